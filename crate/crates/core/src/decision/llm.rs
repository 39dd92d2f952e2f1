//! Optional chat-completion decision backend.
//!
//! Upstream reports are rendered into text prompts; the model answers with a
//! small JSON object that is validated, clamped and, when unusable after the
//! configured retries, replaced by the rule-based decision.

use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use super::{
    clamp_ratio, decide_rule_based, DecisionSource, Direction, SignalState, TradeDecision,
    Weights, FORECAST_HORIZON, R_MAX, R_MIN,
};
use crate::market_data::OhlcBar;
use crate::patterns::PatternKind;

pub const ENV_ENDPOINT: &str = "QUANTDESK_LLM_ENDPOINT";
pub const ENV_MODEL: &str = "QUANTDESK_LLM_MODEL";
pub const ENV_API_KEY: &str = "QUANTDESK_LLM_API_KEY";

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("unexpected response body: {0}")]
    Protocol(String),
    #[error("llm backend not configured: set {0}")]
    NotConfigured(&'static str),
}

#[derive(Debug, Error, PartialEq)]
pub enum ParseError {
    #[error("no JSON object in response")]
    NoJson,
    #[error("malformed JSON: {0}")]
    Json(String),
    #[error("missing field {0}")]
    MissingField(&'static str),
    #[error("invalid decision {0:?}; only LONG or SHORT are allowed")]
    InvalidDecision(String),
    #[error("invalid risk_reward_ratio {0:?}")]
    InvalidRatio(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self {
            role: "system".into(),
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: "user".into(),
            content: content.into(),
        }
    }
}

/// A blocking chat-completion client. Implementations must be safe to call
/// from several threads.
pub trait ChatTransport: Send + Sync {
    fn complete(&self, messages: &[ChatMessage]) -> Result<String, LlmError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmConfig {
    pub endpoint: String,
    pub model: String,
    #[serde(skip_serializing)]
    pub api_key: Option<String>,
    pub max_retries: usize,
    pub timeout_secs: u64,
    pub requests_per_minute: f64,
    pub temperature: f64,
}

impl LlmConfig {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            model: model.into(),
            api_key: None,
            max_retries: 2,
            timeout_secs: 60,
            requests_per_minute: 60.0,
            temperature: 0.0,
        }
    }

    /// Reads endpoint, model and credential from the environment.
    pub fn from_env() -> Result<Self, LlmError> {
        let endpoint =
            std::env::var(ENV_ENDPOINT).map_err(|_| LlmError::NotConfigured(ENV_ENDPOINT))?;
        let model = std::env::var(ENV_MODEL).map_err(|_| LlmError::NotConfigured(ENV_MODEL))?;
        let mut cfg = Self::new(endpoint, model);
        cfg.api_key = std::env::var(ENV_API_KEY).ok().filter(|k| !k.is_empty());
        Ok(cfg)
    }
}

/// Token bucket shared across threads; `acquire` blocks until a token is
/// available.
#[derive(Debug)]
pub struct TokenBucket {
    capacity: f64,
    refill_per_sec: f64,
    state: Mutex<(f64, Instant)>,
}

impl TokenBucket {
    pub fn new(capacity: f64, refill_per_sec: f64) -> Self {
        let capacity = capacity.max(1.0);
        Self {
            capacity,
            refill_per_sec: refill_per_sec.max(1e-9),
            state: Mutex::new((capacity, Instant::now())),
        }
    }

    pub fn per_minute(requests: f64) -> Self {
        Self::new(requests.max(1.0).min(10.0), requests / 60.0)
    }

    /// Takes a token if one is available, otherwise reports how long to wait.
    pub fn try_acquire(&self) -> Result<(), Duration> {
        let mut guard = self.state.lock().unwrap_or_else(|e| e.into_inner());
        let (tokens, last) = &mut *guard;
        let now = Instant::now();
        *tokens = (*tokens + now.duration_since(*last).as_secs_f64() * self.refill_per_sec)
            .min(self.capacity);
        *last = now;
        if *tokens >= 1.0 {
            *tokens -= 1.0;
            Ok(())
        } else {
            Err(Duration::from_secs_f64((1.0 - *tokens) / self.refill_per_sec))
        }
    }

    pub fn acquire(&self) {
        while let Err(wait) = self.try_acquire() {
            std::thread::sleep(wait);
        }
    }
}

/// OpenAI-compatible `chat/completions` client.
pub struct HttpChatTransport {
    client: reqwest::blocking::Client,
    config: LlmConfig,
    bucket: TokenBucket,
}

impl HttpChatTransport {
    pub fn new(config: LlmConfig) -> Result<Self, LlmError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| LlmError::Transport(e.to_string()))?;
        let bucket = TokenBucket::per_minute(config.requests_per_minute);
        Ok(Self {
            client,
            config,
            bucket,
        })
    }

    pub fn config(&self) -> &LlmConfig {
        &self.config
    }
}

impl ChatTransport for HttpChatTransport {
    fn complete(&self, messages: &[ChatMessage]) -> Result<String, LlmError> {
        self.bucket.acquire();
        let body = serde_json::json!({
            "model": self.config.model,
            "messages": messages,
            "temperature": self.config.temperature,
        });
        let mut req = self.client.post(&self.config.endpoint).json(&body);
        if let Some(key) = &self.config.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req
            .send()
            .and_then(|r| r.error_for_status())
            .map_err(|e| LlmError::Transport(e.to_string()))?;
        let value: Value = resp
            .json()
            .map_err(|e| LlmError::Protocol(e.to_string()))?;
        value["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| LlmError::Protocol("missing choices[0].message.content".into()))
    }
}

/// Prompt templates with `{{name}}` placeholders.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptTemplates {
    pub indicator: String,
    pub pattern: String,
    pub trend: String,
    pub decision: String,
}

impl Default for PromptTemplates {
    fn default() -> Self {
        Self {
            indicator: include_str!("../../assets/prompts/indicator.txt").into(),
            pattern: include_str!("../../assets/prompts/pattern.txt").into(),
            trend: include_str!("../../assets/prompts/trend.txt").into(),
            decision: include_str!("../../assets/prompts/decision.txt").into(),
        }
    }
}

pub fn render(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = template.to_string();
    for (name, value) in vars {
        out = out.replace(&format!("{{{{{name}}}}}"), value);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptContext {
    pub stock_name: String,
    pub time_frame: String,
    /// Candles embedded in the indicator prompt.
    pub kline_data: String,
}

impl PromptContext {
    pub fn new(stock_name: &str, time_frame: &str, bars: &[OhlcBar]) -> Self {
        let tail = &bars[bars.len().saturating_sub(50)..];
        Self {
            stock_name: stock_name.into(),
            time_frame: time_frame.into(),
            kline_data: serde_json::to_string(tail).unwrap_or_default(),
        }
    }
}

pub fn render_decision_prompt(
    state: &SignalState,
    templates: &PromptTemplates,
    ctx: &PromptContext,
) -> String {
    let base = [
        ("stock_name", ctx.stock_name.as_str()),
        ("time_frame", ctx.time_frame.as_str()),
        ("kline_data", ctx.kline_data.as_str()),
    ];
    let with = |template: &str, extra: &[(&str, &str)]| {
        let mut vars = base.to_vec();
        vars.extend_from_slice(extra);
        render(template, &vars)
    };
    let library = PatternKind::library_text();
    let indicator = with(&templates.indicator, &[("report", &state.indicator.to_text())]);
    let pattern = with(
        &templates.pattern,
        &[
            ("report", &state.pattern.to_text()),
            ("pattern_library", &library),
        ],
    );
    let trend = with(&templates.trend, &[("report", &state.trend.to_text())]);
    with(
        &templates.decision,
        &[
            ("indicator_report", &indicator),
            ("pattern_report", &pattern),
            ("trend_report", &trend),
        ],
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParsedDecision {
    pub direction: Direction,
    /// As returned, before clamping.
    pub raw_ratio: f64,
    pub justification: String,
    pub forecast_horizon: Option<String>,
}

fn field_text(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

/// Extracts the JSON object between the first `{` and the last `}`.
pub fn parse_decision(text: &str) -> Result<ParsedDecision, ParseError> {
    let start = text.find('{').ok_or(ParseError::NoJson)?;
    let end = text.rfind('}').ok_or(ParseError::NoJson)?;
    if end < start {
        return Err(ParseError::NoJson);
    }
    let value: Value =
        serde_json::from_str(&text[start..=end]).map_err(|e| ParseError::Json(e.to_string()))?;
    let decision = value
        .get("decision")
        .and_then(field_text)
        .ok_or(ParseError::MissingField("decision"))?;
    let direction = decision
        .parse::<Direction>()
        .map_err(|_| ParseError::InvalidDecision(decision.clone()))?;
    let ratio_text = value
        .get("risk_reward_ratio")
        .and_then(field_text)
        .ok_or(ParseError::MissingField("risk_reward_ratio"))?;
    let raw_ratio = ratio_text
        .trim()
        .parse::<f64>()
        .ok()
        .filter(|r| r.is_finite())
        .ok_or_else(|| ParseError::InvalidRatio(ratio_text.clone()))?;
    Ok(ParsedDecision {
        direction,
        raw_ratio,
        justification: value
            .get("justification")
            .and_then(field_text)
            .unwrap_or_default(),
        forecast_horizon: value.get("forecast_horizon").and_then(field_text),
    })
}

/// Asks the model for a decision, retrying on invalid output. After
/// `max_retries` failed attempts the rule policy decides and the
/// justification says so. Transport failures are returned to the caller.
pub fn decide_llm(
    state: &SignalState,
    weights: &Weights,
    templates: &PromptTemplates,
    ctx: &PromptContext,
    transport: &dyn ChatTransport,
    max_retries: usize,
) -> Result<TradeDecision, LlmError> {
    let prompt = render_decision_prompt(state, templates, ctx);
    let mut messages = vec![ChatMessage::user(prompt)];
    let mut last_error = None;
    for _ in 0..=max_retries {
        let reply = transport.complete(&messages)?;
        match parse_decision(&reply) {
            Ok(p) => return Ok(accept(p, state, weights)),
            Err(e) => {
                tracing::warn!(error = %e, "rejected llm decision");
                messages.push(ChatMessage {
                    role: "assistant".into(),
                    content: reply,
                });
                messages.push(ChatMessage::user(format!(
                    "That reply was rejected ({e}). Answer again with the JSON object only; \
                     decision must be LONG or SHORT."
                )));
                last_error = Some(e);
            }
        }
    }
    let mut fallback = decide_rule_based(state, weights);
    fallback.source = DecisionSource::RuleFallback;
    fallback.justification = format!(
        "[fallback: llm output invalid after {} attempts: {}] {}",
        max_retries + 1,
        last_error.map(|e| e.to_string()).unwrap_or_default(),
        fallback.justification
    );
    Ok(fallback)
}

fn accept(p: ParsedDecision, state: &SignalState, weights: &Weights) -> TradeDecision {
    let r = clamp_ratio(p.raw_ratio);
    let mut justification = p.justification;
    if r != p.raw_ratio {
        justification.push_str(&format!(
            " [risk_reward_ratio {} clamped to {r} (allowed {R_MIN}-{R_MAX})]",
            p.raw_ratio
        ));
    }
    let c = weights.composite(&state.scores);
    TradeDecision {
        direction: p.direction,
        risk_reward_ratio: r,
        forecast_horizon: FORECAST_HORIZON,
        justification,
        confidence: if c.is_finite() { c.abs().min(1.0) } else { 0.0 },
        source: DecisionSource::Llm,
    }
}
