//! HTTP analysis service: `POST /analyze`, `GET /datasets`, `GET /health`.
//!
//! Every error body is `{"code", "message", "detail"}`.

use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use quantdesk_core::decision::llm::{decide_llm, ChatTransport, PromptContext, PromptTemplates};
use quantdesk_core::decision::{DecisionSource, RiskLevels, TradeDecision, FORECAST_HORIZON};
use quantdesk_core::indicators::IndicatorReport;
use quantdesk_core::market_data::{BarSeries, OhlcBar, Timeframe};
use quantdesk_core::patterns::{Boundary, KeyPoint, PatternKind, PatternMatch, PatternReport};
use quantdesk_core::pipeline::{analyze_signals, finish, Analysis, AnalysisConfig, AnalysisError};
use quantdesk_core::trend::{FittedLine, TrendChannel};

/// Trailing bars analysed when a request does not say otherwise.
pub const DEFAULT_CONTEXT_BARS: usize = 97;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    #[default]
    Rule,
    Llm,
}

impl std::str::FromStr for Backend {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rule" => Ok(Backend::Rule),
            "llm" => Ok(Backend::Llm),
            other => Err(format!("unknown backend {other:?} (rule|llm)")),
        }
    }
}

/// Either inline `bars` or a loaded `dataset` (by symbol) with an optional
/// inclusive `end_index`. The window is the trailing `context_bars` bars.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyzeRequest {
    #[serde(default)]
    pub symbol: Option<String>,
    #[serde(default)]
    pub timeframe: Option<Timeframe>,
    #[serde(default)]
    pub bars: Option<Vec<OhlcBar>>,
    #[serde(default)]
    pub dataset: Option<String>,
    #[serde(default)]
    pub end_index: Option<usize>,
    #[serde(default)]
    pub context_bars: Option<usize>,
    #[serde(default)]
    pub backend: Backend,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowInfo {
    /// Offset of the first window bar in the source series.
    pub start_index: usize,
    /// Inclusive offset of the last window bar.
    pub end_index: usize,
    pub bars: usize,
    pub first_timestamp: i64,
    pub last_timestamp: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candle {
    pub index: usize,
    pub timestamp: i64,
    pub open: f64,
    pub high: f64,
    pub low: f64,
    pub close: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartPattern {
    pub kind: PatternKind,
    pub name: String,
    pub key_points: Vec<KeyPoint>,
    pub boundaries: Vec<Boundary>,
}

/// A horizontal level drawn from the last window bar over the forecast
/// horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub price: f64,
    pub anchor_index: usize,
    pub horizon_bars: usize,
}

/// Chart geometry; every index is a position inside the request window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartPayload {
    pub candles: Vec<Candle>,
    pub support: Boundary,
    pub resistance: Boundary,
    pub pattern: Option<ChartPattern>,
    pub entry: Band,
    pub stop: Band,
    pub target: Band,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyzeResponse {
    pub symbol: String,
    pub timeframe: Timeframe,
    pub backend: Backend,
    pub window: WindowInfo,
    pub decision: TradeDecision,
    pub risk: RiskLevels,
    pub indicator: IndicatorReport,
    pub pattern: PatternReport,
    pub matches: Vec<PatternMatch>,
    pub trend: TrendChannel,
    pub reports: TextReports,
    pub chart: ChartPayload,
    pub warnings: Vec<String>,
}

/// The three agent reports as plain text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextReports {
    pub indicator: String,
    pub pattern: String,
    pub trend: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub symbol: String,
    pub timeframe: Timeframe,
    pub bars: usize,
    pub first_timestamp: i64,
    pub last_timestamp: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HealthResponse {
    pub status: String,
    pub version: String,
    pub datasets: usize,
    pub llm_configured: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
    pub detail: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApiError {
    pub status: StatusCode,
    pub body: ErrorBody,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        Self {
            status,
            body: ErrorBody {
                code: code.into(),
                message: message.into(),
                detail: None,
            },
        }
    }

    fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.body.detail = Some(detail.into());
        self
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "invalid_request", message)
    }
}

impl std::fmt::Display for ApiError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.body.code, self.body.message)?;
        if let Some(d) = &self.body.detail {
            write!(f, " ({d})")?;
        }
        Ok(())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

impl From<AnalysisError> for ApiError {
    fn from(e: AnalysisError) -> Self {
        match e {
            AnalysisError::TooFewBars {
                required,
                available,
            } => ApiError::new(
                StatusCode::UNPROCESSABLE_ENTITY,
                "insufficient_bars",
                format!("window has {available} bars; analysis needs at least {required}"),
            ),
            other => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "analysis_failed", other.to_string()),
        }
    }
}

struct Inner {
    datasets: Vec<BarSeries>,
    config: AnalysisConfig,
    templates: PromptTemplates,
    llm: Option<Arc<dyn ChatTransport>>,
    max_retries: usize,
}

/// Shared, read-only service state.
#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

impl AppState {
    pub fn new(datasets: Vec<BarSeries>, config: AnalysisConfig) -> Self {
        Self::build(datasets, config, None, 0)
    }

    /// A state whose `llm` backend goes through `transport`.
    pub fn with_llm(
        datasets: Vec<BarSeries>,
        config: AnalysisConfig,
        transport: Arc<dyn ChatTransport>,
        max_retries: usize,
    ) -> Self {
        Self::build(datasets, config, Some(transport), max_retries)
    }

    fn build(
        datasets: Vec<BarSeries>,
        config: AnalysisConfig,
        llm: Option<Arc<dyn ChatTransport>>,
        max_retries: usize,
    ) -> Self {
        Self {
            inner: Arc::new(Inner {
                datasets,
                config,
                templates: PromptTemplates::default(),
                llm,
                max_retries,
            }),
        }
    }

    pub fn datasets(&self) -> Vec<DatasetInfo> {
        self.inner
            .datasets
            .iter()
            .map(|s| DatasetInfo {
                symbol: s.symbol.clone(),
                timeframe: s.timeframe,
                bars: s.len(),
                first_timestamp: s.bars().first().map(|b| b.timestamp).unwrap_or(0),
                last_timestamp: s.bars().last().map(|b| b.timestamp).unwrap_or(0),
            })
            .collect()
    }

    pub fn health(&self) -> HealthResponse {
        HealthResponse {
            status: "ok".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            datasets: self.inner.datasets.len(),
            llm_configured: self.inner.llm.is_some(),
        }
    }

    /// Resolves the request window and runs the full analysis.
    pub fn analyze(&self, req: &AnalyzeRequest) -> Result<AnalyzeResponse, ApiError> {
        let (symbol, timeframe, bars, start) = self.resolve_window(req)?;
        let cfg = &self.inner.config;
        let (state, pivots, matches) = analyze_signals(bars, cfg)?;
        let mut warnings = Vec::new();
        let decision = match req.backend {
            Backend::Rule => quantdesk_core::decision::decide_rule_based(&state, &cfg.weights),
            Backend::Llm => self.llm_decision(&symbol, timeframe, bars, &state, &mut warnings),
        };
        let analysis = finish(bars, cfg, state, pivots, matches, decision)?;
        Ok(build_response(symbol, timeframe, req.backend, bars, start, analysis, warnings))
    }

    fn llm_decision(
        &self,
        symbol: &str,
        timeframe: Timeframe,
        bars: &[OhlcBar],
        state: &quantdesk_core::decision::SignalState,
        warnings: &mut Vec<String>,
    ) -> TradeDecision {
        let weights = &self.inner.config.weights;
        let rule = |reason: String, warnings: &mut Vec<String>| {
            warnings.push(reason.clone());
            let mut d = quantdesk_core::decision::decide_rule_based(state, weights);
            d.source = DecisionSource::RuleFallback;
            d.justification = format!("[fallback: {reason}] {}", d.justification);
            d
        };
        let Some(transport) = &self.inner.llm else {
            return rule(
                "llm backend not configured (set QUANTDESK_LLM_ENDPOINT); used the rule-based decision"
                    .into(),
                warnings,
            );
        };
        let ctx = PromptContext::new(symbol, &timeframe.to_string(), bars);
        match decide_llm(
            state,
            weights,
            &self.inner.templates,
            &ctx,
            transport.as_ref(),
            self.inner.max_retries,
        ) {
            Ok(d) => {
                if d.source == DecisionSource::RuleFallback {
                    warnings.push("llm output was invalid on every attempt; used the rule-based decision".into());
                }
                d
            }
            Err(e) => rule(format!("llm backend failed: {e}; used the rule-based decision"), warnings),
        }
    }

    fn resolve_window<'a>(
        &'a self,
        req: &'a AnalyzeRequest,
    ) -> Result<(String, Timeframe, &'a [OhlcBar], usize), ApiError> {
        let context = req.context_bars.unwrap_or(DEFAULT_CONTEXT_BARS);
        let min = self.inner.config.min_bars();
        if context < min {
            return Err(ApiError::new(
                StatusCode::UNPROCESSABLE_ENTITY,
                "insufficient_bars",
                format!("context_bars is {context}; analysis needs at least {min}"),
            ));
        }
        let (symbol, timeframe, all): (String, Timeframe, &[OhlcBar]) = match (&req.bars, &req.dataset) {
            (Some(_), Some(_)) => {
                return Err(ApiError::bad_request("give either bars or dataset, not both"))
            }
            (None, None) => return Err(ApiError::bad_request("give either bars or dataset")),
            (Some(bars), None) => {
                let timeframe = req
                    .timeframe
                    .ok_or_else(|| ApiError::bad_request("timeframe is required with inline bars"))?;
                let symbol = req.symbol.clone().unwrap_or_else(|| "INLINE".into());
                if bars.is_empty() {
                    return Err(ApiError::bad_request("bars is empty"));
                }
                BarSeries::new(symbol.clone(), timeframe, bars.clone())
                    .map_err(|e| ApiError::bad_request("invalid bars").with_detail(e.to_string()))?;
                (symbol, timeframe, bars.as_slice())
            }
            (None, Some(name)) => {
                let series = self
                    .inner
                    .datasets
                    .iter()
                    .find(|s| &s.symbol == name)
                    .ok_or_else(|| {
                        ApiError::new(StatusCode::NOT_FOUND, "unknown_dataset", format!("no dataset named {name:?}"))
                    })?;
                if let Some(tf) = req.timeframe {
                    if tf != series.timeframe {
                        return Err(ApiError::bad_request(format!(
                            "dataset {name} is {}, not {tf}",
                            series.timeframe
                        )));
                    }
                }
                (series.symbol.clone(), series.timeframe, series.bars())
            }
        };
        let end = req.end_index.unwrap_or(all.len() - 1);
        if end >= all.len() {
            return Err(ApiError::bad_request(format!(
                "end_index {end} is past the last bar ({})",
                all.len() - 1
            )));
        }
        let start = (end + 1).saturating_sub(context);
        let window = &all[start..=end];
        if window.len() < min {
            return Err(ApiError::new(
                StatusCode::UNPROCESSABLE_ENTITY,
                "insufficient_bars",
                format!("window has {} bars; analysis needs at least {min}", window.len()),
            ));
        }
        Ok((symbol, timeframe, window, start))
    }
}

fn line_ends(line: &FittedLine, offset: usize, len: usize) -> Boundary {
    let last = len - 1;
    Boundary {
        start: KeyPoint {
            index: offset,
            price: line.at(0.0),
        },
        end: KeyPoint {
            index: offset + last,
            price: line.at(last as f64),
        },
    }
}

fn build_response(
    symbol: String,
    timeframe: Timeframe,
    backend: Backend,
    bars: &[OhlcBar],
    start: usize,
    a: Analysis,
    warnings: Vec<String>,
) -> AnalyzeResponse {
    let last = bars.len() - 1;
    let band = |price| Band {
        price,
        anchor_index: last,
        horizon_bars: FORECAST_HORIZON,
    };
    let t = &a.trend;
    let chart = ChartPayload {
        candles: bars
            .iter()
            .enumerate()
            .map(|(index, b)| Candle {
                index,
                timestamp: b.timestamp,
                open: b.open,
                high: b.high,
                low: b.low,
                close: b.close,
            })
            .collect(),
        support: line_ends(&t.support, t.window_start, t.window_len),
        resistance: line_ends(&t.resistance, t.window_start, t.window_len),
        pattern: a.matches.first().map(|m| ChartPattern {
            kind: m.kind,
            name: m.kind.name().into(),
            key_points: m.key_points.clone(),
            boundaries: m.boundaries.clone(),
        }),
        entry: band(a.levels.entry),
        stop: band(a.levels.stop),
        target: band(a.levels.target),
    };
    AnalyzeResponse {
        symbol,
        timeframe,
        backend,
        window: WindowInfo {
            start_index: start,
            end_index: start + last,
            bars: bars.len(),
            first_timestamp: bars[0].timestamp,
            last_timestamp: bars[last].timestamp,
        },
        reports: TextReports {
            indicator: a.indicator.to_text(),
            pattern: a.pattern.to_text(),
            trend: a.trend.to_text(),
        },
        decision: a.decision,
        risk: a.levels,
        indicator: a.indicator,
        pattern: a.pattern,
        matches: a.matches,
        trend: a.trend,
        chart,
        warnings,
    }
}

async fn health(State(state): State<AppState>) -> Json<HealthResponse> {
    Json(state.health())
}

async fn datasets(State(state): State<AppState>) -> Json<Vec<DatasetInfo>> {
    Json(state.datasets())
}

async fn analyze(
    State(state): State<AppState>,
    body: Result<Json<AnalyzeRequest>, JsonRejection>,
) -> Result<Json<AnalyzeResponse>, ApiError> {
    let Json(req) = body.map_err(|e| {
        ApiError::new(e.status(), "invalid_json", "request body is not a valid AnalyzeRequest")
            .with_detail(e.body_text())
    })?;
    // analysis is CPU-bound and the LLM transport blocks
    tokio::task::spawn_blocking(move || state.analyze(&req))
        .await
        .map_err(|e| {
            ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", "analysis task failed")
                .with_detail(e.to_string())
        })?
        .map(Json)
}

async fn not_found() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such endpoint")
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/datasets", get(datasets))
        .route("/analyze", post(analyze))
        .fallback(not_found)
        .with_state(state)
}
