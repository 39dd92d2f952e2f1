//! End-to-end analysis of one visible window.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decision::{
    aggregate_signals, decide_rule_based, risk_levels, DecisionError, RiskLevels, SignalState,
    TradeDecision, Weights, DEFAULT_RHO,
};
use crate::indicators::{summarize_indicators, IndicatorConfig, IndicatorError, IndicatorReport};
use crate::market_data::OhlcBar;
use crate::patterns::{detect_patterns, pattern_report, PatternConfig, PatternMatch, PatternReport};
use crate::trend::{detect_trend, find_pivots, PivotSet, TrendChannel, TrendConfig, TrendError};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("window has {available} bars, at least {required} are required")]
    TooFewBars { required: usize, available: usize },
    #[error("invalid pattern config")]
    InvalidPatternConfig,
    #[error(transparent)]
    Indicator(#[from] IndicatorError),
    #[error(transparent)]
    Trend(#[from] TrendError),
    #[error(transparent)]
    Decision(#[from] DecisionError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisConfig {
    pub indicator: IndicatorConfig,
    pub trend: TrendConfig,
    pub pattern: PatternConfig,
    pub weights: Weights,
    #[serde(default = "default_rho")]
    pub rho: f64,
}

fn default_rho() -> f64 {
    DEFAULT_RHO
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            indicator: IndicatorConfig::default(),
            trend: TrendConfig::default(),
            pattern: PatternConfig::default(),
            weights: Weights::default(),
            rho: DEFAULT_RHO,
        }
    }
}

impl AnalysisConfig {
    pub fn standard() -> Self {
        Self::default()
    }

    /// Smallest window every stage can run on.
    pub fn min_bars(&self) -> usize {
        self.indicator
            .min_bars()
            .max(self.trend.lookback)
            .max(self.pattern.min_span)
            .max(2 * self.trend.pivot_k + 1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Analysis {
    pub indicator: IndicatorReport,
    pub trend: TrendChannel,
    pub pivots: PivotSet,
    pub matches: Vec<PatternMatch>,
    pub pattern: PatternReport,
    pub state: SignalState,
    pub decision: TradeDecision,
    pub levels: RiskLevels,
}

/// Signal state only, without a decision.
pub fn analyze_signals(
    bars: &[OhlcBar],
    config: &AnalysisConfig,
) -> Result<(SignalState, PivotSet, Vec<PatternMatch>), AnalysisError> {
    let required = config.min_bars();
    if bars.len() < required {
        return Err(AnalysisError::TooFewBars {
            required,
            available: bars.len(),
        });
    }
    if !config.pattern.is_valid() {
        return Err(AnalysisError::InvalidPatternConfig);
    }
    let indicator = summarize_indicators(bars, &config.indicator)?;
    let trend = detect_trend(bars, &config.trend)?;
    let pivots = find_pivots(bars, config.trend.pivot_k)?;
    let matches = detect_patterns(bars, &pivots, &trend, &config.pattern);
    let pattern = pattern_report(&matches, &trend);
    let state = aggregate_signals(&indicator, &pattern, matches.first(), &trend, config.trend.tau);
    Ok((state, pivots, matches))
}

/// Indicators, trend, patterns, aggregation, rule-based decision and risk
/// levels on `bars`; the entry is the last close.
pub fn analyze_window(bars: &[OhlcBar], config: &AnalysisConfig) -> Result<Analysis, AnalysisError> {
    let (state, pivots, matches) = analyze_signals(bars, config)?;
    let decision = decide_rule_based(&state, &config.weights);
    finish(bars, config, state, pivots, matches, decision)
}

/// Assembles an [`Analysis`] around an externally made decision.
pub fn finish(
    bars: &[OhlcBar],
    config: &AnalysisConfig,
    state: SignalState,
    pivots: PivotSet,
    matches: Vec<PatternMatch>,
    decision: TradeDecision,
) -> Result<Analysis, AnalysisError> {
    let entry = bars.last().map(|b| b.close).unwrap_or(f64::NAN);
    let levels = risk_levels(entry, decision.direction, config.rho, decision.risk_reward_ratio)?;
    Ok(Analysis {
        indicator: state.indicator.clone(),
        trend: state.trend.clone(),
        pattern: state.pattern.clone(),
        pivots,
        matches,
        state,
        decision,
        levels,
    })
}
