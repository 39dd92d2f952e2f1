//! Rolling-window case study: a fixed number of overlapping windows, each
//! scored on the bars right after it.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{directional_hits, HORIZON};
use crate::decision::Direction;
use crate::market_data::OhlcBar;

#[derive(Debug, Error, PartialEq)]
pub enum CaseStudyError {
    #[error("series has {available} bars, the case study needs {required}")]
    TooShort { required: usize, available: usize },
    #[error("window {index}: {message}")]
    Method { index: usize, message: String },
    #[error("window length, count and offset must be positive")]
    BadParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseWindow {
    pub index: usize,
    pub start: usize,
    pub entry_close: f64,
    pub decision: Direction,
    pub hits: u8,
    pub correct: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseStudyReport {
    pub windows: Vec<CaseWindow>,
    pub correct: usize,
    pub total: usize,
}

impl CaseStudyReport {
    /// `"8/10 (80%)"`.
    pub fn summary(&self) -> String {
        let pct = if self.total == 0 {
            0.0
        } else {
            100.0 * self.correct as f64 / self.total as f64
        };
        format!("{}/{} ({:.0}%)", self.correct, self.total, pct)
    }

    pub fn render(&self) -> String {
        let mut out = String::from("window  start  decision  hits  correct\n");
        for w in &self.windows {
            out.push_str(&format!(
                "{:>6}  {:>5}  {:<8}  {:>4}  {}\n",
                w.index + 1,
                w.start,
                w.decision.as_str(),
                w.hits,
                if w.correct { "yes" } else { "no" }
            ));
        }
        out.push_str(&format!("accuracy: {}\n", self.summary()));
        out
    }
}

pub fn required_bars(window_length: usize, num_windows: usize, offset: usize) -> usize {
    window_length + offset * num_windows.saturating_sub(1) + HORIZON
}

/// Window `i` shows bars `[i*offset, i*offset + window_length)` to `decide`
/// and is scored on the following 3 closes; it is correct with at least 2
/// hits.
pub fn rolling_case_study<F>(
    bars: &[OhlcBar],
    window_length: usize,
    num_windows: usize,
    offset: usize,
    mut decide: F,
) -> Result<CaseStudyReport, CaseStudyError>
where
    F: FnMut(usize, &[OhlcBar]) -> Result<Direction, String>,
{
    if window_length == 0 || num_windows == 0 || offset == 0 {
        return Err(CaseStudyError::BadParams);
    }
    let required = required_bars(window_length, num_windows, offset);
    if bars.len() < required {
        return Err(CaseStudyError::TooShort {
            required,
            available: bars.len(),
        });
    }
    let mut windows = Vec::with_capacity(num_windows);
    for index in 0..num_windows {
        let start = index * offset;
        let end = start + window_length;
        let visible = &bars[start..end];
        let decision =
            decide(index, visible).map_err(|message| CaseStudyError::Method { index, message })?;
        let entry_close = visible[visible.len() - 1].close;
        let closes: Vec<f64> = bars[end..end + HORIZON].iter().map(|b| b.close).collect();
        let hits = directional_hits(decision, entry_close, &closes);
        windows.push(CaseWindow {
            index,
            start,
            entry_close,
            decision,
            hits,
            correct: hits >= 2,
        });
    }
    let correct = windows.iter().filter(|w| w.correct).count();
    Ok(CaseStudyReport {
        total: windows.len(),
        correct,
        windows,
    })
}
