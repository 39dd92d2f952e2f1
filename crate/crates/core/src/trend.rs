//! Slope-aware trend detection: swing pivots, least-squares support and
//! resistance lines, the average slope `kappa` and channel geometry.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::market_data::OhlcBar;

#[derive(Debug, Error, PartialEq)]
pub enum TrendError {
    #[error("window of {available} bars is shorter than the required {required}")]
    WindowTooShort { required: usize, available: usize },
    #[error("need at least 2 points to fit a line, got {0}")]
    TooFewPoints(usize),
    #[error("all points share the same x coordinate")]
    VerticalLine,
    #[error("invalid trend config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pivot {
    pub index: usize,
    pub price: f64,
}

/// Swing highs and lows; a high at `i` dominates `[i-k, i+k]` (ties allowed).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PivotSet {
    pub highs: Vec<Pivot>,
    pub lows: Vec<Pivot>,
    pub k: usize,
}

impl PivotSet {
    pub fn highs_in(&self, start: usize, end: usize) -> impl Iterator<Item = &Pivot> {
        self.highs.iter().filter(move |p| p.index >= start && p.index <= end)
    }

    pub fn lows_in(&self, start: usize, end: usize) -> impl Iterator<Item = &Pivot> {
        self.lows.iter().filter(move |p| p.index >= start && p.index <= end)
    }
}

pub fn find_pivots(bars: &[OhlcBar], k: usize) -> Result<PivotSet, TrendError> {
    let required = 2 * k + 1;
    if bars.len() < required {
        return Err(TrendError::WindowTooShort {
            required,
            available: bars.len(),
        });
    }
    let mut highs = Vec::new();
    let mut lows = Vec::new();
    for i in k..bars.len() - k {
        let hood = &bars[i - k..=i + k];
        if hood.iter().all(|b| bars[i].high >= b.high) {
            highs.push(Pivot {
                index: i,
                price: bars[i].high,
            });
        }
        if hood.iter().all(|b| bars[i].low <= b.low) {
            lows.push(Pivot {
                index: i,
                price: bars[i].low,
            });
        }
    }
    Ok(PivotSet { highs, lows, k })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FittedLine {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub n_points: usize,
}

impl FittedLine {
    pub fn at(&self, x: f64) -> f64 {
        self.intercept + self.slope * x
    }
}

/// Ordinary least squares `y = slope * x + intercept` over `(x, y)` points.
pub fn fit_line_ols(points: &[(f64, f64)]) -> Result<FittedLine, TrendError> {
    let n = points.len();
    if n < 2 {
        return Err(TrendError::TooFewPoints(n));
    }
    let nf = n as f64;
    let x_mean = points.iter().map(|p| p.0).sum::<f64>() / nf;
    let y_mean = points.iter().map(|p| p.1).sum::<f64>() / nf;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for &(x, y) in points {
        let dx = x - x_mean;
        let dy = y - y_mean;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(TrendError::VerticalLine);
    }
    let slope = sxy / sxx;
    let intercept = y_mean - slope * x_mean;
    let ss_res: f64 = points
        .iter()
        .map(|&(x, y)| {
            let e = y - (intercept + slope * x);
            e * e
        })
        .sum();
    // Relative tolerance so exactly collinear inputs report r² = 1.
    let scale = syy.max(y_mean * y_mean * nf) * 1e-24;
    let r_squared = if syy <= scale || ss_res <= scale {
        1.0
    } else {
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    };
    Ok(FittedLine {
        slope,
        intercept,
        r_squared,
        n_points: n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TrendLabel {
    Uptrend,
    Downtrend,
    Sideways,
}

impl TrendLabel {
    pub fn sign(self) -> f64 {
        match self {
            TrendLabel::Uptrend => 1.0,
            TrendLabel::Downtrend => -1.0,
            TrendLabel::Sideways => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ChannelGeometry {
    ParallelUp,
    ParallelDown,
    ConvergingWedgeUp,
    ConvergingWedgeDown,
    SymmetricConverging,
    Diverging,
    Flat,
}

/// Which points a channel line was fitted through.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LineSource {
    Pivots,
    /// Fewer than two pivots: every bar's high (or low) was used.
    AllBars,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendConfig {
    /// Trailing bars the channel is fitted over.
    pub lookback: usize,
    /// Threshold on `kappa_rel` (slope per bar over mean close).
    pub tau: f64,
    pub pivot_k: usize,
    /// Tolerance on the end/start gap ratio for "stable" channels.
    pub geometry_eta: f64,
    /// Per-line relative slope below which a line counts as flat.
    pub flat_bound: f64,
}

impl Default for TrendConfig {
    fn default() -> Self {
        let tau = 3e-4;
        Self {
            lookback: 40,
            tau,
            pivot_k: 3,
            geometry_eta: 0.15,
            flat_bound: tau / 2.0,
        }
    }
}

impl TrendConfig {
    pub fn validate(&self) -> Result<(), TrendError> {
        if self.lookback < 2 * self.pivot_k + 1 {
            return Err(TrendError::InvalidConfig(format!(
                "lookback {} must be at least 2k+1 = {}",
                self.lookback,
                2 * self.pivot_k + 1
            )));
        }
        if !(self.tau >= 0.0 && self.geometry_eta > 0.0 && self.flat_bound > 0.0) {
            return Err(TrendError::InvalidConfig(
                "tau must be non-negative, eta and flat_bound positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendChannel {
    /// Line x coordinates count bars from `window_start`.
    pub resistance: FittedLine,
    pub support: FittedLine,
    pub resistance_source: LineSource,
    pub support_source: LineSource,
    pub kappa: f64,
    pub kappa_rel: f64,
    pub mean_close: f64,
    pub label: TrendLabel,
    pub geometry: ChannelGeometry,
    /// Offset of the fitted window inside the analysed bars.
    pub window_start: usize,
    pub window_len: usize,
}

impl TrendChannel {
    /// Resistance minus support at window-relative `x`.
    pub fn gap_at(&self, x: f64) -> f64 {
        self.resistance.at(x) - self.support.at(x)
    }

    /// |gap at last bar| / |gap at first bar|; `None` when the lines meet at
    /// the start.
    pub fn gap_ratio(&self) -> Option<f64> {
        let start = self.gap_at(0.0).abs();
        let end = self.gap_at((self.window_len.max(1) - 1) as f64).abs();
        if start <= self.mean_close.abs() * 1e-12 {
            None
        } else {
            Some(end / start)
        }
    }

    pub fn resistance_rel(&self) -> f64 {
        self.resistance.slope / self.mean_close
    }

    pub fn support_rel(&self) -> f64 {
        self.support.slope / self.mean_close
    }

    pub fn uses_pivots(&self) -> bool {
        self.resistance_source == LineSource::Pivots && self.support_source == LineSource::Pivots
    }

    pub fn to_text(&self) -> String {
        format!(
            "Trend: {:?} (kappa {:+.6} per bar, {:+.5}% of price). Channel geometry: {:?}. \
             Resistance slope {:+.6} (r2 {:.2}), support slope {:+.6} (r2 {:.2}) over the last {} bars.",
            self.label,
            self.kappa,
            100.0 * self.kappa_rel,
            self.geometry,
            self.resistance.slope,
            self.resistance.r_squared,
            self.support.slope,
            self.support.r_squared,
            self.window_len
        )
    }
}

fn classify(kappa_rel: f64, tau: f64) -> TrendLabel {
    if kappa_rel > tau {
        TrendLabel::Uptrend
    } else if kappa_rel < -tau {
        TrendLabel::Downtrend
    } else {
        TrendLabel::Sideways
    }
}

/// Fits the channel over the trailing `config.lookback` bars and labels it.
pub fn detect_trend(bars: &[OhlcBar], config: &TrendConfig) -> Result<TrendChannel, TrendError> {
    config.validate()?;
    let n = config.lookback;
    if bars.len() < n {
        return Err(TrendError::WindowTooShort {
            required: n,
            available: bars.len(),
        });
    }
    let window_start = bars.len() - n;
    let window = &bars[window_start..];
    let pivots = find_pivots(window, config.pivot_k)?;

    let fit = |pivots: &[Pivot], all: &dyn Fn(&OhlcBar) -> f64| {
        if pivots.len() >= 2 {
            let pts: Vec<(f64, f64)> = pivots.iter().map(|p| (p.index as f64, p.price)).collect();
            fit_line_ols(&pts).map(|l| (l, LineSource::Pivots))
        } else {
            let pts: Vec<(f64, f64)> = window
                .iter()
                .enumerate()
                .map(|(i, b)| (i as f64, all(b)))
                .collect();
            fit_line_ols(&pts).map(|l| (l, LineSource::AllBars))
        }
    };
    let (resistance, resistance_source) = fit(&pivots.highs, &|b| b.high)?;
    let (support, support_source) = fit(&pivots.lows, &|b| b.low)?;

    let mean_close = window.iter().map(|b| b.close).sum::<f64>() / n as f64;
    let kappa = (resistance.slope + support.slope) / 2.0;
    let kappa_rel = kappa / mean_close;
    let mut channel = TrendChannel {
        resistance,
        support,
        resistance_source,
        support_source,
        kappa,
        kappa_rel,
        mean_close,
        label: classify(kappa_rel, config.tau),
        geometry: ChannelGeometry::Flat,
        window_start,
        window_len: n,
    };
    channel.geometry = channel_geometry(&channel, n, config);
    Ok(channel)
}

/// Labels the channel shape from relative slopes and how the gap between
/// the lines evolves across `window_length` bars.
pub fn channel_geometry(
    channel: &TrendChannel,
    window_length: usize,
    config: &TrendConfig,
) -> ChannelGeometry {
    let r = channel.resistance.slope / channel.mean_close;
    let s = channel.support.slope / channel.mean_close;
    let flat = config.flat_bound;
    let eta = config.geometry_eta;
    if r.abs() < flat && s.abs() < flat {
        return ChannelGeometry::Flat;
    }
    if r.abs() >= flat && s.abs() >= flat && r.signum() != s.signum() {
        return if r < s {
            ChannelGeometry::SymmetricConverging
        } else {
            ChannelGeometry::Diverging
        };
    }
    let last = (window_length.max(1) - 1) as f64;
    let gap_start = channel.gap_at(0.0).abs();
    let gap_end = channel.gap_at(last).abs();
    let ratio = if gap_start > channel.mean_close.abs() * 1e-12 {
        gap_end / gap_start
    } else if gap_end > gap_start {
        f64::INFINITY
    } else {
        1.0
    };
    let rising = channel.kappa > 0.0;
    if ratio < 1.0 - eta {
        if rising {
            ChannelGeometry::ConvergingWedgeUp
        } else {
            ChannelGeometry::ConvergingWedgeDown
        }
    } else if ratio > 1.0 + eta {
        ChannelGeometry::Diverging
    } else if rising {
        ChannelGeometry::ParallelUp
    } else {
        ChannelGeometry::ParallelDown
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn bar(i: usize, low: f64, high: f64, close: f64) -> OhlcBar {
        OhlcBar {
            timestamp: i as i64,
            open: close,
            high,
            low,
            close,
            volume: None,
        }
    }

    fn line_bars(n: usize, a: f64, b: f64) -> Vec<OhlcBar> {
        (0..n)
            .map(|i| {
                let p = a + b * i as f64;
                bar(i, p, p, p)
            })
            .collect()
    }

    fn mirror(bars: &[OhlcBar], about: f64) -> Vec<OhlcBar> {
        bars.iter()
            .map(|b| OhlcBar {
                timestamp: b.timestamp,
                open: 2.0 * about - b.open,
                high: 2.0 * about - b.low,
                low: 2.0 * about - b.high,
                close: 2.0 * about - b.close,
                volume: b.volume,
            })
            .collect()
    }

    #[test]
    fn monotone_has_no_pivots() {
        let p = find_pivots(&line_bars(20, 10.0, 0.5), 2).unwrap();
        assert!(p.highs.is_empty() && p.lows.is_empty());
    }

    #[test]
    fn tent_has_one_apex() {
        let prices = [1.0, 2.0, 3.0, 4.0, 3.0, 2.0, 1.0];
        let bars: Vec<_> = prices.iter().enumerate().map(|(i, &p)| bar(i, p, p, p)).collect();
        let p = find_pivots(&bars, 1).unwrap();
        assert_eq!(p.highs, vec![Pivot { index: 3, price: 4.0 }]);
        assert!(p.lows.is_empty());
    }

    #[test]
    fn w_shape_by_brute_force() {
        let prices = [5.0, 4.0, 3.0, 2.0, 3.0, 4.0, 3.0, 2.0, 3.0, 4.0, 5.0];
        let bars: Vec<_> = prices.iter().enumerate().map(|(i, &p)| bar(i, p, p, p)).collect();
        let k = 1;
        let p = find_pivots(&bars, k).unwrap();
        // oracle: direct scan of every interior index
        let mut lows = vec![];
        let mut highs = vec![];
        for i in k..prices.len() - k {
            let hood = &prices[i - k..=i + k];
            if hood.iter().all(|&q| prices[i] <= q) {
                lows.push(i);
            }
            if hood.iter().all(|&q| prices[i] >= q) {
                highs.push(i);
            }
        }
        assert_eq!(p.lows.iter().map(|x| x.index).collect::<Vec<_>>(), lows);
        assert_eq!(p.highs.iter().map(|x| x.index).collect::<Vec<_>>(), highs);
        assert_eq!((lows.len(), highs.len()), (2, 1));
        assert!(matches!(find_pivots(&bars[..2], 1), Err(TrendError::WindowTooShort { .. })));
    }

    #[test]
    fn ols_examples() {
        let l = fit_line_ols(&[(0.0, 1.0), (1.0, 2.0), (2.0, 3.0)]).unwrap();
        assert_relative_eq!(l.slope, 1.0);
        assert_relative_eq!(l.intercept, 1.0);
        assert_eq!(l.r_squared, 1.0);
        let v = fit_line_ols(&[(0.0, 2.0), (1.0, 1.0), (2.0, 0.0), (3.0, 1.0), (4.0, 2.0)]).unwrap();
        assert_eq!(v.slope, 0.0);
        assert_eq!(fit_line_ols(&[(0.0, 1.0)]), Err(TrendError::TooFewPoints(1)));
        assert_eq!(
            fit_line_ols(&[(3.0, 1.0), (3.0, 2.0)]),
            Err(TrendError::VerticalLine)
        );
    }

    #[test]
    fn ols_twenty_noisy_points_match_normal_equations() {
        // deterministic pseudo-noise
        let pts: Vec<(f64, f64)> = (0..20)
            .map(|i| {
                let x = i as f64;
                let noise = ((i * 7919) % 13) as f64 / 13.0 - 0.5;
                (x, 10.0 + 0.5 * x + noise)
            })
            .collect();
        let l = fit_line_ols(&pts).unwrap();
        // normal equations: [n Σx; Σx Σx²][b m]' = [Σy Σxy]'
        let n = pts.len() as f64;
        let sx: f64 = pts.iter().map(|p| p.0).sum();
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let sy: f64 = pts.iter().map(|p| p.1).sum();
        let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        let det = n * sxx - sx * sx;
        let m = (n * sxy - sx * sy) / det;
        let b = (sxx * sy - sx * sxy) / det;
        assert!((l.slope - m).abs() < 1e-9);
        assert!((l.intercept - b).abs() < 1e-9);
        assert!((l.slope - 0.5).abs() < 0.05);
    }

    #[test]
    fn exact_rising_line_is_uptrend() {
        let bars = line_bars(60, 100.0, 0.5);
        let cfg = TrendConfig::default();
        let ch = detect_trend(&bars, &cfg).unwrap();
        assert_eq!(ch.label, TrendLabel::Uptrend);
        let mean: f64 = bars[20..].iter().map(|b| b.close).sum::<f64>() / 40.0;
        assert_relative_eq!(ch.kappa_rel, 0.5 / mean, max_relative = 1e-9);
        assert_eq!(ch.resistance_source, LineSource::AllBars);
        assert_eq!(ch.window_start, 20);
    }

    #[test]
    fn constant_window_is_flat_sideways() {
        let bars = line_bars(40, 50.0, 0.0);
        let ch = detect_trend(&bars, &TrendConfig::default()).unwrap();
        assert_eq!(ch.kappa, 0.0);
        assert_eq!(ch.label, TrendLabel::Sideways);
        assert_eq!(ch.geometry, ChannelGeometry::Flat);
    }

    #[test]
    fn mirrored_uptrend_is_downtrend() {
        let bars: Vec<_> = (0..50)
            .map(|i| {
                let p = 100.0 + 0.3 * i as f64 + if i % 4 < 2 { 1.0 } else { -1.0 };
                bar(i, p - 0.5, p + 0.5, p)
            })
            .collect();
        let cfg = TrendConfig::default();
        let up = detect_trend(&bars, &cfg).unwrap();
        let down = detect_trend(&mirror(&bars, 110.0), &cfg).unwrap();
        assert_eq!(up.label, TrendLabel::Uptrend);
        assert_eq!(down.label, TrendLabel::Downtrend);
        assert_relative_eq!(down.kappa, -up.kappa, max_relative = 1e-9);
    }

    #[test]
    fn window_too_short() {
        let bars = line_bars(30, 10.0, 0.1);
        assert_eq!(
            detect_trend(&bars, &TrendConfig::default()).unwrap_err(),
            TrendError::WindowTooShort {
                required: 40,
                available: 30
            }
        );
    }

    fn synthetic_channel(m_r: f64, m_s: f64, gap: f64) -> TrendChannel {
        TrendChannel {
            resistance: FittedLine {
                slope: m_r,
                intercept: 100.0 + gap,
                r_squared: 1.0,
                n_points: 4,
            },
            support: FittedLine {
                slope: m_s,
                intercept: 100.0,
                r_squared: 1.0,
                n_points: 4,
            },
            resistance_source: LineSource::Pivots,
            support_source: LineSource::Pivots,
            kappa: (m_r + m_s) / 2.0,
            kappa_rel: (m_r + m_s) / 200.0,
            mean_close: 100.0,
            label: TrendLabel::Sideways,
            geometry: ChannelGeometry::Flat,
            window_start: 0,
            window_len: 40,
        }
    }

    #[test]
    fn geometry_table() {
        let cfg = TrendConfig::default();
        let g = |m_r, m_s, gap| channel_geometry(&synthetic_channel(m_r, m_s, gap), 40, &cfg);
        assert_eq!(g(0.1, 0.1, 4.0), ChannelGeometry::ParallelUp);
        assert_eq!(g(-0.1, -0.1, 4.0), ChannelGeometry::ParallelDown);
        assert_eq!(g(-0.05, 0.05, 8.0), ChannelGeometry::SymmetricConverging);
        assert_eq!(g(0.05, -0.05, 4.0), ChannelGeometry::Diverging);
        // descending-triangle geometry: falling resistance, flat support
        assert_eq!(g(-0.08, 0.0, 4.0), ChannelGeometry::ConvergingWedgeDown);
        assert_eq!(g(0.0, 0.08, 4.0), ChannelGeometry::ConvergingWedgeUp);
        assert_eq!(g(0.2, 0.1, 2.0), ChannelGeometry::Diverging);
        assert_eq!(g(0.001, -0.001, 4.0), ChannelGeometry::Flat);
    }
}
