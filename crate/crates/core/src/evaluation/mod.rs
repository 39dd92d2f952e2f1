//! Hidden-horizon execution simulation, metrics, baselines, the benchmark
//! runner and the rolling-window case study.

pub mod baselines;
pub mod benchmark;
pub mod case_study;
pub mod metrics;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decision::{Direction, RiskLevels};
use crate::market_data::OhlcBar;

pub const HORIZON: usize = 3;

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("expected {HORIZON} hidden bars, got {0}")]
    WrongHorizon(usize),
    #[error("malformed levels: {0}")]
    MalformedLevels(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExitReason {
    StopHit,
    TargetHit,
    HorizonClose,
}

/// Whether an exit filled at the level itself or at a bar open that had
/// already gapped through it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Fill {
    Level,
    Open,
    Close,
}

/// Which level wins when a single bar spans both stop and target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieBreak {
    #[default]
    StopFirst,
    TargetFirst,
    /// The level nearer the bar's open is assumed to trade first; equal
    /// distances resolve to the stop.
    OpenDirection,
}

impl FromStr for TieBreak {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "stop" => Ok(TieBreak::StopFirst),
            "target" => Ok(TieBreak::TargetFirst),
            "open" => Ok(TieBreak::OpenDirection),
            other => Err(format!("unknown tie-break {other:?} (stop|target|open)")),
        }
    }
}

impl fmt::Display for TieBreak {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TieBreak::StopFirst => "stop",
            TieBreak::TargetFirst => "target",
            TieBreak::OpenDirection => "open",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TradeOutcome {
    pub direction: Direction,
    pub entry: f64,
    pub exit: f64,
    pub exit_reason: ExitReason,
    pub fill: Fill,
    pub exit_bar: usize,
    /// Percent returns, direction-adjusted.
    pub r_cc: f64,
    pub r_max: f64,
    pub r_min: f64,
    pub hits: u8,
}

/// Closes strictly on the predicted side of the entry close.
pub fn directional_hits(direction: Direction, entry_close: f64, hidden_closes: &[f64]) -> u8 {
    hidden_closes
        .iter()
        .filter(|&&c| match direction {
            Direction::Long => c > entry_close,
            Direction::Short => c < entry_close,
        })
        .count() as u8
}

/// Best and worst direction-adjusted percent excursion over the hidden bars.
/// The entry itself is part of the path, so `r_min <= 0 <= r_max`.
pub fn excursions(direction: Direction, entry: f64, hidden: &[OhlcBar]) -> (f64, f64) {
    let hi = hidden.iter().map(|b| b.high).fold(entry, f64::max);
    let lo = hidden.iter().map(|b| b.low).fold(entry, f64::min);
    match direction {
        Direction::Long => (100.0 * (hi - entry) / entry, 100.0 * (lo - entry) / entry),
        Direction::Short => (100.0 * (entry - lo) / entry, 100.0 * (entry - hi) / entry),
    }
}

/// Excursions clipped to the stop and target distances.
pub fn capped_excursions(levels: &RiskLevels, hidden: &[OhlcBar]) -> (f64, f64) {
    let (r_max, r_min) = excursions(levels.direction, levels.entry, hidden);
    (
        r_max.min(100.0 * levels.r * levels.rho),
        r_min.max(-100.0 * levels.rho),
    )
}

fn check_levels(levels: &RiskLevels) -> Result<(), SimError> {
    let (e, s, t) = (levels.entry, levels.stop, levels.target);
    let ok = match levels.direction {
        Direction::Long => s < e && e < t,
        Direction::Short => t < e && e < s,
    };
    if ok && [e, s, t].iter().all(|p| p.is_finite() && *p > 0.0) {
        Ok(())
    } else {
        Err(SimError::MalformedLevels(format!(
            "{} entry {e}, stop {s}, target {t}",
            levels.direction
        )))
    }
}

/// Walks the hidden bars in order and exits at the first stop or target
/// touch, or at the last close.
pub fn simulate_execution(
    levels: &RiskLevels,
    hidden: &[OhlcBar],
    tiebreak: TieBreak,
) -> Result<TradeOutcome, SimError> {
    if hidden.len() != HORIZON {
        return Err(SimError::WrongHorizon(hidden.len()));
    }
    check_levels(levels)?;
    let d = levels.direction;
    let (stop, target) = (levels.stop, levels.target);
    // signed distance in the trade's favour
    let favour = |p: f64| d.sign() * (p - levels.entry);
    let mut exit = None;
    for (j, bar) in hidden.iter().enumerate() {
        if favour(bar.open) <= favour(stop) {
            exit = Some((bar.open, ExitReason::StopHit, Fill::Open, j));
        } else if favour(bar.open) >= favour(target) {
            exit = Some((bar.open, ExitReason::TargetHit, Fill::Open, j));
        } else {
            let (worst, best) = match d {
                Direction::Long => (bar.low, bar.high),
                Direction::Short => (bar.high, bar.low),
            };
            let stop_in = favour(worst) <= favour(stop);
            let target_in = favour(best) >= favour(target);
            let stop_wins = match (stop_in, target_in) {
                (false, false) => continue,
                (true, false) => true,
                (false, true) => false,
                (true, true) => match tiebreak {
                    TieBreak::StopFirst => true,
                    TieBreak::TargetFirst => false,
                    TieBreak::OpenDirection => {
                        (bar.open - stop).abs() <= (target - bar.open).abs()
                    }
                },
            };
            exit = Some(if stop_wins {
                (stop, ExitReason::StopHit, Fill::Level, j)
            } else {
                (target, ExitReason::TargetHit, Fill::Level, j)
            });
        }
        break;
    }
    let (exit_price, reason, fill, bar) = exit.unwrap_or((
        hidden[HORIZON - 1].close,
        ExitReason::HorizonClose,
        Fill::Close,
        HORIZON - 1,
    ));
    let (r_max, r_min) = excursions(d, levels.entry, hidden);
    let closes: Vec<f64> = hidden.iter().map(|b| b.close).collect();
    Ok(TradeOutcome {
        direction: d,
        entry: levels.entry,
        exit: exit_price,
        exit_reason: reason,
        fill,
        exit_bar: bar,
        r_cc: 100.0 * favour(exit_price) / levels.entry,
        r_max,
        r_min,
        hits: directional_hits(d, levels.entry, &closes),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decision::risk_levels;
    use approx::assert_relative_eq;

    fn bar(open: f64, high: f64, low: f64, close: f64) -> OhlcBar {
        OhlcBar {
            timestamp: 0,
            open,
            high,
            low,
            close,
            volume: None,
        }
    }

    fn quiet() -> OhlcBar {
        bar(100.0, 100.01, 99.99, 100.0)
    }

    #[test]
    fn hits_examples() {
        assert_eq!(directional_hits(Direction::Long, 100.0, &[101.0, 102.0, 103.0]), 3);
        assert_eq!(directional_hits(Direction::Short, 100.0, &[101.0, 102.0, 103.0]), 0);
        assert_eq!(directional_hits(Direction::Long, 100.0, &[101.0, 99.0, 100.0]), 1);
    }

    #[test]
    fn target_then_stop_then_tie() {
        let l = risk_levels(100.0, Direction::Long, 0.0005, 1.5).unwrap();
        let o = simulate_execution(&l, &[bar(100.0, 100.2, 99.99, 100.1), quiet(), quiet()], TieBreak::StopFirst)
            .unwrap();
        assert_eq!(o.exit_reason, ExitReason::TargetHit);
        assert_eq!(o.exit_bar, 0);
        assert_relative_eq!(o.r_cc, 0.075, epsilon = 1e-9);

        let o = simulate_execution(&l, &[bar(100.0, 100.01, 99.90, 99.95), quiet(), quiet()], TieBreak::StopFirst)
            .unwrap();
        assert_eq!(o.exit_reason, ExitReason::StopHit);
        assert_relative_eq!(o.r_cc, -0.05, epsilon = 1e-9);

        let both = [bar(100.0, 100.10, 99.90, 100.0), quiet(), quiet()];
        let o = simulate_execution(&l, &both, TieBreak::StopFirst).unwrap();
        assert_eq!(o.exit_reason, ExitReason::StopHit);
        let o = simulate_execution(&l, &both, TieBreak::TargetFirst).unwrap();
        assert_eq!(o.exit_reason, ExitReason::TargetHit);
    }

    #[test]
    fn gap_fills_at_open() {
        let l = risk_levels(100.0, Direction::Long, 0.0005, 1.5).unwrap();
        let o = simulate_execution(&l, &[bar(99.0, 99.5, 98.8, 99.2), quiet(), quiet()], TieBreak::StopFirst)
            .unwrap();
        assert_eq!(o.exit_reason, ExitReason::StopHit);
        assert_eq!(o.fill, Fill::Open);
        assert_eq!(o.exit, 99.0);
    }

    #[test]
    fn horizon_close_and_excursions() {
        let l = risk_levels(100.0, Direction::Short, 0.0005, 1.2).unwrap();
        let o = simulate_execution(&l, &[quiet(), quiet(), bar(100.0, 100.01, 99.99, 99.99)], TieBreak::StopFirst)
            .unwrap();
        assert_eq!(o.exit_reason, ExitReason::HorizonClose);
        assert_eq!(o.exit_bar, 2);
        assert!(o.r_cc > -0.05 && o.r_cc < 0.06);
        assert!(o.r_min <= o.r_cc && o.r_cc <= o.r_max);
    }

    #[test]
    fn excursion_examples() {
        let bars = [bar(100.0, 101.0, 99.5, 100.0), quiet(), quiet()];
        let (mx, mn) = excursions(Direction::Long, 100.0, &bars);
        assert_relative_eq!(mx, 1.0, epsilon = 1e-12);
        assert_relative_eq!(mn, -0.5, epsilon = 1e-12);
        let (mx, mn) = excursions(Direction::Short, 100.0, &bars);
        assert_relative_eq!(mx, 0.5, epsilon = 1e-12);
        assert_relative_eq!(mn, -1.0, epsilon = 1e-12);
        let flat = [bar(100.0, 100.0, 100.0, 100.0); 3];
        assert_eq!(excursions(Direction::Long, 100.0, &flat), (0.0, 0.0));
    }

    #[test]
    fn rejects_bad_input() {
        let l = risk_levels(100.0, Direction::Long, 0.0005, 1.5).unwrap();
        assert_eq!(
            simulate_execution(&l, &[quiet()], TieBreak::StopFirst),
            Err(SimError::WrongHorizon(1))
        );
        let mut bad = l;
        bad.stop = 100.1;
        assert!(matches!(
            simulate_execution(&bad, &[quiet(); 3], TieBreak::StopFirst),
            Err(SimError::MalformedLevels(_))
        ));
    }
}
