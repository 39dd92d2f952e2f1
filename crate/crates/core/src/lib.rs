//! Price-only technical analysis and a risk-bounded trading benchmark.
//!
//! The crate is organised as a pipeline over OHLC windows:
//!
//! - [`market_data`]: CSV ingestion, validation and seeded segment sampling.
//! - [`indicators`]: EMA/MACD, RSI, ROC, Stochastic and Williams %R plus a
//!   flag-based summary report.
//! - [`trend`]: swing pivots, OLS support/resistance lines and slope-based
//!   trend labels.
//! - [`patterns`]: geometric chart-formation detectors.
//! - [`decision`]: signal aggregation, the rule-based and LLM decision
//!   backends and stop/target levels.
//! - [`evaluation`]: execution simulation over the hidden horizon, metrics,
//!   baselines, the benchmark runner and the rolling-window case study.
//! - [`pipeline`]: the end-to-end analysis of a single visible window.

pub mod decision;
pub mod evaluation;
pub mod indicators;
pub mod market_data;
pub mod patterns;
pub mod pipeline;
pub mod synthetic;
pub mod trend;

pub use decision::{Direction, RiskLevels, SignalState, TradeDecision};
pub use market_data::{BarSeries, OhlcBar, Segment, Timeframe};
pub use pipeline::{analyze_window, Analysis, AnalysisConfig};
