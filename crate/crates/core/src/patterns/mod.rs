//! Chart-formation recognition from bar geometry.
//!
//! Every criterion is relative (price ratios, slopes per bar over the mean
//! close, gap ratios), so detections do not depend on the price scale.
//! Confidence is the product over criteria of `0.5 + 0.5 * margin`, where a
//! margin measures how far a threshold is cleared, clamped to [0, 1].

mod detectors;
mod kind;

use serde::{Deserialize, Serialize};

pub use detectors::{
    detect_double_bottom, detect_flags, detect_flags_and_wedges, detect_inverse_head_shoulders,
    detect_patterns, detect_rectangle, detect_triangles, detect_v_and_inverse_hs, detect_v_shape,
    detect_wedges,
};
pub use kind::{Bias, PatternKind};

use crate::trend::{TrendChannel, TrendLabel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeyPoint {
    pub index: usize,
    pub price: f64,
}

/// A straight annotation segment between two window points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Boundary {
    pub start: KeyPoint,
    pub end: KeyPoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternMatch {
    pub kind: PatternKind,
    /// Usually `kind.bias()`; V-shaped reversals carry their orientation.
    pub bias: Bias,
    /// Inclusive window indices.
    pub span: (usize, usize),
    pub confidence: f64,
    pub structure_summary: String,
    pub trend_summary: String,
    pub symmetry_summary: String,
    pub key_points: Vec<KeyPoint>,
    pub boundaries: Vec<Boundary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternConfig {
    /// Relative price tolerance for "similar" levels.
    pub price_tolerance: f64,
    /// Minimum relative move for an impulse leg.
    pub impulse_threshold: f64,
    pub impulse_bars: usize,
    /// Relative slope per bar below which a line is flat.
    pub flat_bound: f64,
    /// Relative slope per bar a line must exceed to count as rising/falling.
    pub slope_threshold: f64,
    pub min_span: usize,
    /// Tolerance on the channel gap ratio.
    pub gap_eta: f64,
    pub flag_min_bars: usize,
    pub flag_max_bars: usize,
}

impl Default for PatternConfig {
    fn default() -> Self {
        Self {
            price_tolerance: 0.004,
            impulse_threshold: 0.02,
            impulse_bars: 5,
            flat_bound: 2e-4,
            slope_threshold: 4e-4,
            min_span: 10,
            gap_eta: 0.15,
            flag_min_bars: 5,
            flag_max_bars: 15,
        }
    }
}

impl PatternConfig {
    pub fn is_valid(&self) -> bool {
        self.price_tolerance > 0.0
            && self.impulse_threshold > 0.0
            && self.impulse_bars > 0
            && self.flat_bound > 0.0
            && self.slope_threshold > 0.0
            && self.gap_eta > 0.0
            && self.min_span > 0
            && self.flag_min_bars >= 2
            && self.flag_min_bars <= self.flag_max_bars
    }
}

/// The three text summaries handed to the decision layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternReport {
    pub pattern: Option<PatternKind>,
    pub bias: Bias,
    pub confidence: f64,
    pub structure: String,
    pub trend: String,
    pub symmetry: String,
}

impl PatternReport {
    pub fn to_text(&self) -> String {
        format!(
            "Pattern: {}\nStructure: {}\nTrend: {}\nSymmetry: {}\n",
            self.pattern.map(|k| k.name()).unwrap_or("none"),
            self.structure,
            self.trend,
            self.symmetry
        )
    }
}

fn label_word(label: TrendLabel) -> &'static str {
    match label {
        TrendLabel::Uptrend => "uptrend",
        TrendLabel::Downtrend => "downtrend",
        TrendLabel::Sideways => "sideways drift",
    }
}

/// Summarises the highest-confidence match (matches are expected sorted).
pub fn pattern_report(matches: &[PatternMatch], channel: &TrendChannel) -> PatternReport {
    let Some(top) = matches.first() else {
        return PatternReport {
            pattern: None,
            bias: Bias::Neutral,
            confidence: 0.0,
            structure: "No recognizable chart pattern in the window.".into(),
            trend: format!(
                "No pattern bias; deferring to the trend channel ({}).",
                label_word(channel.label)
            ),
            symmetry: "No formation symmetry to report.".into(),
        };
    };
    let context = match (top.bias, channel.label) {
        (Bias::Bullish, TrendLabel::Downtrend) => format!(
            "against the prevailing {}: potential reversal to the upside",
            label_word(channel.label)
        ),
        (Bias::Bearish, TrendLabel::Uptrend) => format!(
            "against the prevailing {}: potential reversal to the downside",
            label_word(channel.label)
        ),
        (Bias::Neutral, _) => format!(
            "direction unresolved within the {}; wait for a breakout",
            label_word(channel.label)
        ),
        (_, TrendLabel::Sideways) => "emerging from a sideways channel".to_string(),
        _ => format!("aligned with the {}", label_word(channel.label)),
    };
    PatternReport {
        pattern: Some(top.kind),
        bias: top.bias,
        confidence: top.confidence,
        structure: top.structure_summary.clone(),
        trend: format!("{} ({context}).", top.trend_summary),
        symmetry: top.symmetry_summary.clone(),
    }
}
