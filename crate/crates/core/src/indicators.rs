//! Momentum and oscillator indicators computed on close prices (Stochastic
//! and Williams %R also read highs and lows), and the condensed report the
//! decision layer consumes.
//!
//! Output alignment: [`ema`] returns one value per input. Windowed
//! indicators return only fully-formed values, so the last element always
//! corresponds to the last input bar:
//!
//! | function | output length |
//! |----------|---------------|
//! | `sma`    | `n - period + 1` |
//! | `rsi`    | `n - period` |
//! | `roc`    | `n - period` |
//! | `stoch`  | `%K`: `n - k + 1`, `%D`: `n - k - d + 2` |
//! | `willr`  | `n - period + 1` |

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::market_data::OhlcBar;

#[derive(Debug, Error, PartialEq)]
pub enum IndicatorError {
    #[error("empty price series")]
    Empty,
    #[error("period must be at least 1")]
    ZeroPeriod,
    #[error("{indicator} needs at least {required} bars, got {available}")]
    InsufficientHistory {
        indicator: &'static str,
        required: usize,
        available: usize,
    },
    #[error("invalid indicator config: {0}")]
    InvalidConfig(String),
}

fn require(indicator: &'static str, required: usize, available: usize) -> Result<(), IndicatorError> {
    if available < required {
        Err(IndicatorError::InsufficientHistory {
            indicator,
            required,
            available,
        })
    } else {
        Ok(())
    }
}

/// Exponential moving average with `alpha = 2 / (period + 1)`, seeded with
/// the first price.
pub fn ema(prices: &[f64], period: usize) -> Result<Vec<f64>, IndicatorError> {
    if period == 0 {
        return Err(IndicatorError::ZeroPeriod);
    }
    let (&first, rest) = prices.split_first().ok_or(IndicatorError::Empty)?;
    let alpha = 2.0 / (period as f64 + 1.0);
    let mut out = Vec::with_capacity(prices.len());
    let mut prev = first;
    out.push(prev);
    for &p in rest {
        prev = alpha * p + (1.0 - alpha) * prev;
        out.push(prev);
    }
    Ok(out)
}

pub fn sma(values: &[f64], period: usize) -> Result<Vec<f64>, IndicatorError> {
    if period == 0 {
        return Err(IndicatorError::ZeroPeriod);
    }
    require("SMA", period, values.len())?;
    Ok(values
        .windows(period)
        .map(|w| w.iter().sum::<f64>() / period as f64)
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MacdSeries {
    pub macd: Vec<f64>,
    pub signal: Vec<f64>,
    pub histogram: Vec<f64>,
}

pub fn macd(
    prices: &[f64],
    fast: usize,
    slow: usize,
    signal: usize,
) -> Result<MacdSeries, IndicatorError> {
    if fast == 0 || slow == 0 || signal == 0 {
        return Err(IndicatorError::ZeroPeriod);
    }
    require("MACD", fast.max(slow), prices.len())?;
    let fast_ema = ema(prices, fast)?;
    let slow_ema = ema(prices, slow)?;
    let line: Vec<f64> = fast_ema.iter().zip(&slow_ema).map(|(f, s)| f - s).collect();
    let signal_line = ema(&line, signal)?;
    let histogram = line.iter().zip(&signal_line).map(|(m, s)| m - s).collect();
    Ok(MacdSeries {
        macd: line,
        signal: signal_line,
        histogram,
    })
}

/// Relative strength index with Wilder smoothing. The first value uses the
/// simple mean of the first `period` gains and losses.
pub fn rsi(prices: &[f64], period: usize) -> Result<Vec<f64>, IndicatorError> {
    if period == 0 {
        return Err(IndicatorError::ZeroPeriod);
    }
    require("RSI", period + 1, prices.len())?;
    let changes: Vec<f64> = prices.windows(2).map(|w| w[1] - w[0]).collect();
    let p = period as f64;
    let mut avg_gain = changes[..period].iter().map(|c| c.max(0.0)).sum::<f64>() / p;
    let mut avg_loss = changes[..period].iter().map(|c| (-c).max(0.0)).sum::<f64>() / p;
    let value = |g: f64, l: f64| {
        if g + l == 0.0 {
            50.0
        } else {
            100.0 * g / (g + l)
        }
    };
    let mut out = Vec::with_capacity(changes.len() - period + 1);
    out.push(value(avg_gain, avg_loss));
    for &c in &changes[period..] {
        avg_gain = (avg_gain * (p - 1.0) + c.max(0.0)) / p;
        avg_loss = (avg_loss * (p - 1.0) + (-c).max(0.0)) / p;
        out.push(value(avg_gain, avg_loss));
    }
    Ok(out)
}

/// Rate of change in percent over `period` bars.
pub fn roc(prices: &[f64], period: usize) -> Result<Vec<f64>, IndicatorError> {
    if period == 0 {
        return Err(IndicatorError::ZeroPeriod);
    }
    require("ROC", period + 1, prices.len())?;
    Ok(prices[period..]
        .iter()
        .zip(prices)
        .map(|(now, then)| 100.0 * (now - then) / then)
        .collect())
}

fn window_extremes(bars: &[OhlcBar]) -> (f64, f64) {
    bars.iter().fold((f64::MIN, f64::MAX), |(h, l), b| {
        (h.max(b.high), l.min(b.low))
    })
}

/// Stochastic oscillator. A flat window (highest high == lowest low) yields 50.
pub fn stoch(
    bars: &[OhlcBar],
    k_period: usize,
    d_period: usize,
) -> Result<(Vec<f64>, Vec<f64>), IndicatorError> {
    if k_period == 0 || d_period == 0 {
        return Err(IndicatorError::ZeroPeriod);
    }
    require("Stochastic", k_period + d_period - 1, bars.len())?;
    let k: Vec<f64> = bars
        .windows(k_period)
        .map(|w| {
            let (hh, ll) = window_extremes(w);
            let close = w[w.len() - 1].close;
            if hh > ll {
                (100.0 * (close - ll) / (hh - ll)).clamp(0.0, 100.0)
            } else {
                50.0
            }
        })
        .collect();
    let d = sma(&k, d_period)?;
    Ok((k, d))
}

/// Williams %R in [-100, 0]. A flat window yields -50.
pub fn willr(bars: &[OhlcBar], period: usize) -> Result<Vec<f64>, IndicatorError> {
    if period == 0 {
        return Err(IndicatorError::ZeroPeriod);
    }
    require("Williams %R", period, bars.len())?;
    Ok(bars
        .windows(period)
        .map(|w| {
            let (hh, ll) = window_extremes(w);
            let close = w[w.len() - 1].close;
            if hh > ll {
                (-100.0 * (hh - close) / (hh - ll)).clamp(-100.0, 0.0)
            } else {
                -50.0
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndicatorConfig {
    pub rsi_period: usize,
    pub roc_period: usize,
    pub stoch_k_period: usize,
    pub stoch_d_period: usize,
    pub willr_period: usize,
    pub macd_fast: usize,
    pub macd_slow: usize,
    pub macd_signal: usize,
    pub rsi_overbought: f64,
    pub rsi_oversold: f64,
    pub stoch_overbought: f64,
    pub stoch_oversold: f64,
    pub willr_overbought: f64,
    pub willr_oversold: f64,
}

impl Default for IndicatorConfig {
    fn default() -> Self {
        Self {
            rsi_period: 14,
            roc_period: 10,
            stoch_k_period: 14,
            stoch_d_period: 3,
            willr_period: 14,
            macd_fast: 12,
            macd_slow: 26,
            macd_signal: 9,
            rsi_overbought: 70.0,
            rsi_oversold: 30.0,
            stoch_overbought: 80.0,
            stoch_oversold: 20.0,
            willr_overbought: -20.0,
            willr_oversold: -80.0,
        }
    }
}

impl IndicatorConfig {
    pub fn validate(&self) -> Result<(), IndicatorError> {
        let periods = [
            self.rsi_period,
            self.roc_period,
            self.stoch_k_period,
            self.stoch_d_period,
            self.willr_period,
            self.macd_fast,
            self.macd_slow,
            self.macd_signal,
        ];
        if periods.contains(&0) {
            return Err(IndicatorError::ZeroPeriod);
        }
        if self.macd_fast >= self.macd_slow {
            return Err(IndicatorError::InvalidConfig(format!(
                "macd_fast ({}) must be below macd_slow ({})",
                self.macd_fast, self.macd_slow
            )));
        }
        if self.rsi_oversold >= self.rsi_overbought
            || self.stoch_oversold >= self.stoch_overbought
            || self.willr_oversold >= self.willr_overbought
        {
            return Err(IndicatorError::InvalidConfig(
                "oversold thresholds must lie below overbought thresholds".into(),
            ));
        }
        Ok(())
    }

    /// Bars needed before every configured indicator has a latest value
    /// (and MACD has two, for cross detection).
    pub fn min_bars(&self) -> usize {
        [
            self.rsi_period + 1,
            self.roc_period + 1,
            self.stoch_k_period + self.stoch_d_period - 1,
            self.willr_period,
            self.macd_slow.max(2),
        ]
        .into_iter()
        .max()
        .unwrap_or(1)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndicatorFlags {
    pub rsi_overbought: bool,
    pub rsi_oversold: bool,
    pub macd_bullish_cross: bool,
    pub macd_bearish_cross: bool,
    pub stoch_overbought: bool,
    pub stoch_oversold: bool,
    pub willr_overbought: bool,
    pub willr_oversold: bool,
    pub roc_positive: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSection {
    pub title: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndicatorReport {
    pub rsi: f64,
    pub macd: f64,
    pub macd_signal: f64,
    pub macd_histogram: f64,
    pub roc: f64,
    pub stoch_k: f64,
    pub stoch_d: f64,
    pub willr: f64,
    pub flags: IndicatorFlags,
    /// MACD line above its signal line on the latest bar.
    pub macd_above_signal: bool,
    /// Mean of the active directional votes, in [-1, 1].
    pub momentum_score: f64,
    pub narrative: Vec<ReportSection>,
}

impl IndicatorReport {
    /// Plain-text rendering used in prompts and console output.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for s in &self.narrative {
            out.push_str(&s.title);
            out.push_str(": ");
            out.push_str(&s.text);
            out.push('\n');
        }
        out
    }
}

/// Directional votes: overbought zones and a MACD line above its signal count
/// as bullish momentum (+1), oversold zones and MACD below signal as bearish
/// (-1), ROC votes its sign. Neutral readings do not vote.
fn momentum_votes(r: &IndicatorReport) -> Vec<f64> {
    let f = &r.flags;
    let mut votes = Vec::with_capacity(5);
    let zone = |ob: bool, os: bool| match (ob, os) {
        (true, false) => Some(1.0),
        (false, true) => Some(-1.0),
        _ => None,
    };
    votes.extend(zone(f.rsi_overbought, f.rsi_oversold));
    if r.macd_histogram > 0.0 {
        votes.push(1.0);
    } else if r.macd_histogram < 0.0 {
        votes.push(-1.0);
    }
    if r.roc > 0.0 {
        votes.push(1.0);
    } else if r.roc < 0.0 {
        votes.push(-1.0);
    }
    votes.extend(zone(f.stoch_overbought, f.stoch_oversold));
    votes.extend(zone(f.willr_overbought, f.willr_oversold));
    votes
}

fn last(v: &[f64]) -> f64 {
    v[v.len() - 1]
}

pub fn summarize_indicators(
    bars: &[OhlcBar],
    config: &IndicatorConfig,
) -> Result<IndicatorReport, IndicatorError> {
    config.validate()?;
    let closes: Vec<f64> = bars.iter().map(|b| b.close).collect();
    let rsi_v = rsi(&closes, config.rsi_period)?;
    let macd_v = macd(&closes, config.macd_fast, config.macd_slow, config.macd_signal)?;
    let roc_v = roc(&closes, config.roc_period)?;
    let (k, d) = stoch(bars, config.stoch_k_period, config.stoch_d_period)?;
    let willr_v = willr(bars, config.willr_period)?;
    require("MACD cross", 2, macd_v.histogram.len())?;

    let n = macd_v.histogram.len();
    let (prev_h, last_h) = (macd_v.histogram[n - 2], macd_v.histogram[n - 1]);
    let rsi_last = last(&rsi_v);
    let stoch_k = last(&k);
    let stoch_d = last(&d);
    let willr_last = last(&willr_v);
    let roc_last = last(&roc_v);
    let flags = IndicatorFlags {
        rsi_overbought: rsi_last > config.rsi_overbought,
        rsi_oversold: rsi_last < config.rsi_oversold,
        macd_bullish_cross: prev_h <= 0.0 && last_h > 0.0,
        macd_bearish_cross: prev_h >= 0.0 && last_h < 0.0,
        stoch_overbought: stoch_k > config.stoch_overbought
            && stoch_d > config.stoch_overbought,
        stoch_oversold: stoch_k < config.stoch_oversold && stoch_d < config.stoch_oversold,
        willr_overbought: willr_last > config.willr_overbought,
        willr_oversold: willr_last < config.willr_oversold,
        roc_positive: roc_last > 0.0,
    };
    let mut report = IndicatorReport {
        rsi: rsi_last,
        macd: last(&macd_v.macd),
        macd_signal: last(&macd_v.signal),
        macd_histogram: last_h,
        roc: roc_last,
        stoch_k,
        stoch_d,
        willr: willr_last,
        flags,
        macd_above_signal: last_h > 0.0,
        momentum_score: 0.0,
        narrative: Vec::new(),
    };
    let votes = momentum_votes(&report);
    report.momentum_score = if votes.is_empty() {
        0.0
    } else {
        (votes.iter().sum::<f64>() / votes.len() as f64).clamp(-1.0, 1.0)
    };
    report.narrative = narrate(&report, config);
    Ok(report)
}

fn narrate(r: &IndicatorReport, c: &IndicatorConfig) -> Vec<ReportSection> {
    let f = &r.flags;
    let section = |title: &str, text: String| ReportSection {
        title: title.to_string(),
        text,
    };
    let rsi_text = if f.rsi_overbought {
        format!("RSI {:.2} is above {:.0}: overbought.", r.rsi, c.rsi_overbought)
    } else if f.rsi_oversold {
        format!("RSI {:.2} is below {:.0}: oversold.", r.rsi, c.rsi_oversold)
    } else if r.rsi >= 50.0 {
        format!("RSI {:.2} is above the neutral 50 line, mildly bullish.", r.rsi)
    } else {
        format!("RSI {:.2} is below the neutral 50 line, mildly bearish.", r.rsi)
    };
    let cross = if f.macd_bullish_cross {
        " A bullish crossover just occurred."
    } else if f.macd_bearish_cross {
        " A bearish crossover just occurred."
    } else {
        ""
    };
    let macd_text = format!(
        "MACD {:.4} is {} its signal line {:.4} (histogram {:+.4}).{}",
        r.macd,
        if r.macd_above_signal { "above" } else { "at or below" },
        r.macd_signal,
        r.macd_histogram,
        cross
    );
    let roc_text = format!(
        "ROC {:+.2}% indicates {} momentum.",
        r.roc,
        if r.roc > 0.0 {
            "upward"
        } else if r.roc < 0.0 {
            "downward"
        } else {
            "no"
        }
    );
    let stoch_text = format!(
        "%K {:.2} / %D {:.2}{}",
        r.stoch_k,
        r.stoch_d,
        if f.stoch_overbought {
            format!(", both above {:.0}: overbought.", c.stoch_overbought)
        } else if f.stoch_oversold {
            format!(", both below {:.0}: oversold.", c.stoch_oversold)
        } else {
            ", inside the neutral band.".to_string()
        }
    );
    let willr_text = format!(
        "Williams %R {:.2}{}",
        r.willr,
        if f.willr_overbought {
            format!(" is above {:.0}: overbought.", c.willr_overbought)
        } else if f.willr_oversold {
            format!(" is below {:.0}: oversold.", c.willr_oversold)
        } else {
            " is inside the neutral band.".to_string()
        }
    );
    let sentiment = if r.momentum_score > 0.0 {
        "bullish"
    } else if r.momentum_score < 0.0 {
        "bearish"
    } else {
        "neutral"
    };
    let extended = (r.momentum_score > 0.0 && (f.stoch_overbought || f.willr_overbought))
        || (r.momentum_score < 0.0 && (f.stoch_oversold || f.willr_oversold));
    let conclusion = format!(
        "Overall sentiment is {sentiment} (momentum score {:+.2}){}",
        r.momentum_score,
        if extended {
            "; oscillators are stretched, watch for a pause or reversal."
        } else {
            "."
        }
    );
    vec![
        section("Relative Strength Index (RSI)", rsi_text),
        section("Moving Average Convergence Divergence (MACD)", macd_text),
        section("Rate of Change (ROC)", roc_text),
        section("Stochastic Oscillator", stoch_text),
        section("Williams %R", willr_text),
        section("Conclusion", conclusion),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn bars_from_closes(closes: &[f64]) -> Vec<OhlcBar> {
        closes
            .iter()
            .enumerate()
            .map(|(i, &c)| OhlcBar {
                timestamp: i as i64,
                open: c,
                high: c,
                low: c,
                close: c,
                volume: None,
            })
            .collect()
    }

    #[test]
    fn ema_examples() {
        assert_eq!(ema(&[5.0; 4], 7).unwrap(), vec![5.0; 4]);
        let x = [3.0, 1.0, 4.0, 1.0, 5.0];
        assert_eq!(ema(&x, 1).unwrap(), x.to_vec());
        assert_eq!(ema(&[1.0, 2.0, 3.0], 3).unwrap(), vec![1.0, 1.5, 2.25]);
        assert_eq!(ema(&[], 3), Err(IndicatorError::Empty));
        assert_eq!(ema(&[1.0], 0), Err(IndicatorError::ZeroPeriod));
    }

    #[test]
    fn macd_degenerate_cases() {
        let flat = vec![42.0; 40];
        let m = macd(&flat, 12, 26, 9).unwrap();
        assert!(m.macd.iter().chain(&m.signal).chain(&m.histogram).all(|v| *v == 0.0));
        let x: Vec<f64> = (0..40).map(|i| 100.0 + (i as f64).sin()).collect();
        let same = macd(&x, 10, 10, 9).unwrap();
        assert!(same.macd.iter().all(|v| *v == 0.0));
        assert!(matches!(
            macd(&x[..20], 12, 26, 9),
            Err(IndicatorError::InsufficientHistory { required: 26, .. })
        ));
    }

    #[test]
    fn rsi_extremes() {
        let up: Vec<f64> = (0..30).map(|i| 10.0 + i as f64).collect();
        assert!(rsi(&up, 14).unwrap().iter().all(|v| *v == 100.0));
        let down: Vec<f64> = up.iter().rev().copied().collect();
        assert!(rsi(&down, 14).unwrap().iter().all(|v| *v == 0.0));
        assert_eq!(rsi(&[1.0; 10], 14).unwrap_err(), IndicatorError::InsufficientHistory {
            indicator: "RSI",
            required: 15,
            available: 10
        });
        assert_eq!(rsi(&[7.0; 20], 14).unwrap()[0], 50.0);
    }

    #[test]
    fn roc_examples() {
        assert!(roc(&[3.0; 12], 10).unwrap().iter().all(|v| *v == 0.0));
        let mut p = vec![100.0; 11];
        p[10] = 110.0;
        assert_abs_diff_eq!(roc(&p, 10).unwrap()[0], 10.0, epsilon = 1e-12);
    }

    #[test]
    fn stoch_and_willr_anchor_points() {
        // window high 110, low 90
        let mut bars = bars_from_closes(&[100.0; 14]);
        bars[0].high = 110.0;
        bars[1].low = 90.0;
        let with_close = |c: f64| {
            let mut b = bars.clone();
            b[13].close = c;
            b[13].open = c;
            b[13].high = c;
            b[13].low = c;
            b
        };
        let (k, _) = stoch(&with_close(110.0), 14, 1).unwrap();
        assert_eq!(k[0], 100.0);
        let (k, _) = stoch(&with_close(90.0), 14, 1).unwrap();
        assert_eq!(k[0], 0.0);
        let (k, _) = stoch(&with_close(100.0), 14, 1).unwrap();
        assert_eq!(k[0], 50.0);
        assert_eq!(willr(&with_close(110.0), 14).unwrap()[0], 0.0);
        assert_eq!(willr(&with_close(90.0), 14).unwrap()[0], -100.0);
        assert_eq!(willr(&with_close(100.0), 14).unwrap()[0], -50.0);
    }

    #[test]
    fn flat_windows_give_midpoints() {
        let bars = bars_from_closes(&[5.0; 20]);
        let (k, d) = stoch(&bars, 14, 3).unwrap();
        assert!(k.iter().chain(&d).all(|v| *v == 50.0));
        assert!(willr(&bars, 14).unwrap().iter().all(|v| *v == -50.0));
    }

    #[test]
    fn output_lengths() {
        let bars = bars_from_closes(&(0..50).map(|i| 10.0 + i as f64).collect::<Vec<_>>());
        let closes: Vec<f64> = bars.iter().map(|b| b.close).collect();
        assert_eq!(rsi(&closes, 14).unwrap().len(), 36);
        assert_eq!(roc(&closes, 10).unwrap().len(), 40);
        let (k, d) = stoch(&bars, 14, 3).unwrap();
        assert_eq!((k.len(), d.len()), (37, 35));
        assert_eq!(willr(&bars, 14).unwrap().len(), 37);
        assert_eq!(sma(&closes, 20).unwrap().len(), 31);
    }

    #[test]
    fn config_validation() {
        let mut c = IndicatorConfig::default();
        assert!(c.validate().is_ok());
        c.macd_fast = 26;
        assert!(c.validate().is_err());
        let mut c = IndicatorConfig::default();
        c.rsi_period = 0;
        assert_eq!(c.validate(), Err(IndicatorError::ZeroPeriod));
        assert_eq!(IndicatorConfig::default().min_bars(), 26);
    }

    #[test]
    fn rising_and_falling_reports() {
        let up: Vec<f64> = (0..97).map(|i| 100.0 + 0.5 * i as f64).collect();
        let r = summarize_indicators(&bars_from_closes(&up), &IndicatorConfig::default()).unwrap();
        assert!(r.flags.rsi_overbought && r.flags.roc_positive);
        assert!(r.flags.stoch_overbought && r.flags.willr_overbought);
        assert!(r.momentum_score > 0.0);

        let down: Vec<f64> = up.iter().rev().copied().collect();
        let r = summarize_indicators(&bars_from_closes(&down), &IndicatorConfig::default()).unwrap();
        assert!(r.flags.rsi_oversold && !r.flags.roc_positive);
        assert!(r.flags.stoch_oversold && r.flags.willr_oversold);
        assert!(r.momentum_score < 0.0);
        assert_eq!(r.narrative.len(), 6);
    }

    #[test]
    fn insufficient_history_names_indicator() {
        let bars = bars_from_closes(&[1.0; 20]);
        let err = summarize_indicators(&bars, &IndicatorConfig::default()).unwrap_err();
        assert!(matches!(err, IndicatorError::InsufficientHistory { indicator: "MACD", .. }));
    }

    /// Uptrend with pullbacks: RSI in the high 60s, fast oscillators pinned
    /// near the top of their ranges.
    #[test]
    fn bullish_but_extended_regime() {
        let mut closes = vec![100.0];
        for i in 0..97 {
            let step = if i % 2 == 0 { 2.0 } else { -1.0 };
            closes.push(closes.last().unwrap() + step);
        }
        let bars: Vec<OhlcBar> = bars_from_closes(&closes);
        let r = summarize_indicators(&bars, &IndicatorConfig::default()).unwrap();
        assert!(r.rsi > 60.0 && r.rsi < 70.0, "rsi {}", r.rsi);
        assert!(!r.flags.rsi_overbought);
        assert!(r.macd_above_signal);
        assert!(r.flags.stoch_overbought, "k {} d {}", r.stoch_k, r.stoch_d);
        assert!(r.flags.willr_overbought);
        assert!(r.momentum_score > 0.0);
        assert!(r.narrative[5].text.contains("bullish"));
    }
}
