//! Signal aggregation, the LONG/SHORT decision policy and stop/target levels.

pub mod llm;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::indicators::IndicatorReport;
use crate::patterns::{PatternMatch, PatternReport};
use crate::trend::{TrendChannel, TrendLabel};

pub const R_MIN: f64 = 1.2;
pub const R_MAX: f64 = 1.8;
pub const DEFAULT_RHO: f64 = 0.0005;
pub const FORECAST_HORIZON: usize = 3;

#[derive(Debug, Error, PartialEq)]
pub enum DecisionError {
    #[error("entry price must be positive and finite, got {0}")]
    NonPositiveEntry(f64),
    #[error("rho must be positive and finite, got {0}")]
    InvalidRho(f64),
    #[error("risk-reward ratio {0} outside [1.2, 1.8]")]
    RatioOutOfRange(f64),
    #[error("unknown direction {0:?}; expected LONG or SHORT")]
    UnknownDirection(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Direction {
    Long,
    Short,
}

impl Direction {
    pub fn sign(self) -> f64 {
        match self {
            Direction::Long => 1.0,
            Direction::Short => -1.0,
        }
    }

    pub fn opposite(self) -> Self {
        match self {
            Direction::Long => Direction::Short,
            Direction::Short => Direction::Long,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Long => "LONG",
            Direction::Short => "SHORT",
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Direction {
    type Err = DecisionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "LONG" => Ok(Direction::Long),
            "SHORT" => Ok(Direction::Short),
            _ => Err(DecisionError::UnknownDirection(s.to_string())),
        }
    }
}

/// Per-source directional scores in [-1, 1] plus the trend slope used for
/// the zero-score fallback.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignalScores {
    pub s_ind: f64,
    pub s_pat: f64,
    pub s_trend: f64,
    pub kappa_rel: f64,
}

impl SignalScores {
    /// Number of sources voting with the majority sign, and that sign.
    pub fn agreement(&self) -> (u8, Option<Direction>) {
        let votes = [self.s_ind, self.s_pat, self.s_trend];
        let pos = votes.iter().filter(|s| **s > 0.0).count() as u8;
        let neg = votes.iter().filter(|s| **s < 0.0).count() as u8;
        match pos.cmp(&neg) {
            std::cmp::Ordering::Greater => (pos, Some(Direction::Long)),
            std::cmp::Ordering::Less => (neg, Some(Direction::Short)),
            std::cmp::Ordering::Equal => (pos, None),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalState {
    pub indicator: IndicatorReport,
    pub pattern: PatternReport,
    pub top_match: Option<PatternMatch>,
    pub trend: TrendChannel,
    pub scores: SignalScores,
    pub agreement: u8,
    pub majority: Option<Direction>,
}

impl SignalState {
    /// Replaces the scores and recomputes the agreement fields.
    pub fn with_scores(mut self, scores: SignalScores) -> Self {
        let (agreement, majority) = scores.agreement();
        self.scores = scores;
        self.agreement = agreement;
        self.majority = majority;
        self
    }
}

pub fn aggregate_signals(
    indicator: &IndicatorReport,
    pattern: &PatternReport,
    top_match: Option<&PatternMatch>,
    trend: &TrendChannel,
    tau: f64,
) -> SignalState {
    let s_ind = indicator.momentum_score.clamp(-1.0, 1.0);
    let s_pat = match top_match {
        Some(m) => (m.bias.sign() * m.confidence).clamp(-1.0, 1.0),
        None => 0.0,
    };
    let strength = if tau > 0.0 {
        (trend.kappa_rel.abs() / tau).min(1.0)
    } else {
        1.0
    };
    let s_trend = trend.label.sign() * strength;
    let scores = SignalScores {
        s_ind,
        s_pat,
        s_trend,
        kappa_rel: trend.kappa_rel,
    };
    let (agreement, majority) = scores.agreement();
    SignalState {
        indicator: indicator.clone(),
        pattern: pattern.clone(),
        top_match: top_match.cloned(),
        trend: trend.clone(),
        scores,
        agreement,
        majority,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    pub indicator: f64,
    pub pattern: f64,
    pub trend: f64,
}

impl Default for Weights {
    fn default() -> Self {
        Self {
            indicator: 0.35,
            pattern: 0.30,
            trend: 0.35,
        }
    }
}

impl Weights {
    pub fn composite(&self, s: &SignalScores) -> f64 {
        self.indicator * s.s_ind + self.pattern * s.s_pat + self.trend * s.s_trend
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionSource {
    Rule,
    Llm,
    /// The LLM backend failed validation and the rule policy decided.
    RuleFallback,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeDecision {
    pub direction: Direction,
    pub risk_reward_ratio: f64,
    pub forecast_horizon: usize,
    pub justification: String,
    pub confidence: f64,
    pub source: DecisionSource,
}

pub fn clamp_ratio(r: f64) -> f64 {
    if r.is_nan() {
        R_MIN
    } else {
        r.clamp(R_MIN, R_MAX)
    }
}

/// Direction and ratio from scores alone. Zero composite defers to the trend
/// slope, then to SHORT.
pub fn decide_scores(scores: &SignalScores, weights: &Weights) -> (Direction, f64, f64) {
    let c = weights.composite(scores);
    let direction = if c > 0.0 {
        Direction::Long
    } else if c < 0.0 {
        Direction::Short
    } else if scores.kappa_rel > 0.0 {
        Direction::Long
    } else {
        Direction::Short
    };
    let c_abs = if c.is_finite() { c.abs() } else { 0.0 };
    (direction, clamp_ratio(1.2 + 0.6 * c_abs), c_abs.clamp(0.0, 1.0))
}

fn label_text(label: TrendLabel) -> &'static str {
    match label {
        TrendLabel::Uptrend => "uptrend",
        TrendLabel::Downtrend => "downtrend",
        TrendLabel::Sideways => "sideways",
    }
}

pub fn decide_rule_based(state: &SignalState, weights: &Weights) -> TradeDecision {
    let s = &state.scores;
    let (direction, r, confidence) = decide_scores(s, weights);
    let c = weights.composite(s);
    let mut sources = [
        (weights.indicator * s.s_ind, "indicators", describe_indicators(state)),
        (weights.pattern * s.s_pat, "pattern", describe_pattern(state)),
        (
            weights.trend * s.s_trend,
            "trend",
            format!(
                "{} channel, slope {:+.4}% per bar",
                label_text(state.trend.label),
                100.0 * state.trend.kappa_rel
            ),
        ),
    ];
    sources.sort_by(|a, b| b.0.abs().total_cmp(&a.0.abs()));
    let mut parts: Vec<String> = sources
        .iter()
        .filter(|(w, _, _)| *w != 0.0)
        .map(|(w, name, text)| format!("{name} {:+.2} ({text})", w))
        .collect();
    if parts.is_empty() {
        parts.push("no directional evidence".into());
    }
    let mut justification = format!(
        "{direction}: composite score {c:+.3} from {}; {}/3 sources agree.",
        parts.join(", "),
        state.agreement
    );
    if c == 0.0 || !c.is_finite() {
        justification.push_str(if s.kappa_rel > 0.0 {
            " Signals cancel; following the rising trendline slope."
        } else {
            " Signals cancel; defaulting to the short side of a non-rising channel."
        });
    }
    TradeDecision {
        direction,
        risk_reward_ratio: r,
        forecast_horizon: FORECAST_HORIZON,
        justification,
        confidence,
        source: DecisionSource::Rule,
    }
}

fn describe_indicators(state: &SignalState) -> String {
    format!("momentum score {:+.2}", state.indicator.momentum_score)
}

fn describe_pattern(state: &SignalState) -> String {
    match &state.top_match {
        Some(m) => format!("{}, {} at confidence {:.2}", m.kind.name(), m.bias.as_str(), m.confidence),
        None => "none".into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskLevels {
    pub direction: Direction,
    pub entry: f64,
    pub stop: f64,
    pub target: f64,
    pub rho: f64,
    pub r: f64,
}

pub fn risk_levels(
    entry: f64,
    direction: Direction,
    rho: f64,
    r: f64,
) -> Result<RiskLevels, DecisionError> {
    if !(entry.is_finite() && entry > 0.0) {
        return Err(DecisionError::NonPositiveEntry(entry));
    }
    if !(rho.is_finite() && rho > 0.0) {
        return Err(DecisionError::InvalidRho(rho));
    }
    if !(R_MIN..=R_MAX).contains(&r) {
        return Err(DecisionError::RatioOutOfRange(r));
    }
    let d = direction.sign();
    Ok(RiskLevels {
        direction,
        entry,
        stop: entry * (1.0 - d * rho),
        target: entry * (1.0 + d * r * rho),
        rho,
        r,
    })
}
