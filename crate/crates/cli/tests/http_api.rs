use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use quantdesk::api::{router, AnalyzeResponse, AppState, DatasetInfo, ErrorBody, HealthResponse};
use quantdesk_core::decision::llm::{ChatMessage, ChatTransport, LlmError};
use quantdesk_core::decision::DecisionSource;
use quantdesk_core::market_data::BarSeries;
use quantdesk_core::pipeline::AnalysisConfig;
use quantdesk_core::synthetic::synthetic_series;

fn series() -> BarSeries {
    synthetic_series("SYN", "1h".parse().unwrap(), 400, 100.0, 11).unwrap()
}

fn app() -> axum::Router {
    router(AppState::new(vec![series()], AnalysisConfig::default()))
}

async fn call(app: axum::Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Vec<u8>) {
    let mut req = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(v) => {
            req = req.header("content-type", "application/json");
            Body::from(v.to_string())
        }
        None => Body::empty(),
    };
    let resp = app.oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, bytes)
}

#[tokio::test]
async fn health_and_datasets() {
    let (s, b) = call(app(), "GET", "/health", None).await;
    assert_eq!(s, StatusCode::OK);
    let h: HealthResponse = serde_json::from_slice(&b).unwrap();
    assert_eq!(h.status, "ok");
    assert_eq!(h.datasets, 1);
    let (s, b) = call(app(), "GET", "/datasets", None).await;
    assert_eq!(s, StatusCode::OK);
    let d: Vec<DatasetInfo> = serde_json::from_slice(&b).unwrap();
    assert_eq!(d.len(), 1);
    assert_eq!(d[0].symbol, "SYN");
    assert_eq!(d[0].bars, 400);
    assert_eq!(d[0].timeframe.to_string(), "1h");
}

#[tokio::test]
async fn analyze_dataset_window() {
    let (s, b) = call(app(), "POST", "/analyze", Some(json!({"dataset": "SYN", "end_index": 250}))).await;
    assert_eq!(s, StatusCode::OK, "{}", String::from_utf8_lossy(&b));
    let r: AnalyzeResponse = serde_json::from_slice(&b).unwrap();
    assert_eq!(r.window.end_index, 250);
    assert_eq!(r.window.bars, 97);
    assert_eq!(r.chart.candles.len(), 97);
    assert!((1.2..=1.8).contains(&r.decision.risk_reward_ratio));
    assert_eq!(r.decision.forecast_horizon, 3);
    assert_eq!(r.risk.entry, series().bars()[250].close);
    assert!(r.warnings.is_empty());
}

#[tokio::test]
async fn analyze_is_referentially_transparent() {
    let body = json!({"dataset": "SYN", "end_index": 300, "context_bars": 60});
    let (_, a) = call(app(), "POST", "/analyze", Some(body.clone())).await;
    let (_, b) = call(app(), "POST", "/analyze", Some(body)).await;
    assert_eq!(a, b);
}

#[tokio::test]
async fn analyze_inline_bars_matches_dataset() {
    let s = series();
    let bars = &s.bars()[100..197];
    let inline = json!({"symbol": "SYN", "timeframe": "1h", "bars": bars});
    let (s, a) = call(app(), "POST", "/analyze", Some(inline)).await;
    assert_eq!(s, StatusCode::OK, "{}", String::from_utf8_lossy(&a));
    let (_, b) = call(app(), "POST", "/analyze", Some(json!({"dataset": "SYN", "end_index": 196}))).await;
    let a: AnalyzeResponse = serde_json::from_slice(&a).unwrap();
    let b: AnalyzeResponse = serde_json::from_slice(&b).unwrap();
    assert_eq!(a.decision, b.decision);
    assert_eq!(a.chart, b.chart);
}

#[tokio::test]
async fn hidden_bars_never_read() {
    let full = series();
    let cut = BarSeries::new("SYN", full.timeframe, full.bars()[..=200].to_vec()).unwrap();
    let cut_app = router(AppState::new(vec![cut], AnalysisConfig::default()));
    let body = json!({"dataset": "SYN", "end_index": 200});
    let (_, a) = call(app(), "POST", "/analyze", Some(body.clone())).await;
    let (_, b) = call(cut_app, "POST", "/analyze", Some(body)).await;
    assert_eq!(a, b);
}

#[tokio::test]
async fn trimmed_context_accepted_short_rejected() {
    let (s, b) = call(app(), "POST", "/analyze", Some(json!({"dataset": "SYN", "context_bars": 45}))).await;
    assert_eq!(s, StatusCode::OK);
    let r: AnalyzeResponse = serde_json::from_slice(&b).unwrap();
    assert_eq!(r.window.bars, 45);

    let (s, b) = call(app(), "POST", "/analyze", Some(json!({"dataset": "SYN", "context_bars": 10}))).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    let e: ErrorBody = serde_json::from_slice(&b).unwrap();
    assert_eq!(e.code, "insufficient_bars");
    assert!(e.message.contains("40"));

    let s = series();
    let bars = &s.bars()[..10];
    let (s, b) = call(app(), "POST", "/analyze", Some(json!({"timeframe": "1h", "bars": bars}))).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    let e: ErrorBody = serde_json::from_slice(&b).unwrap();
    assert!(e.message.contains("10 bars") && e.message.contains("40"), "{}", e.message);
}

#[tokio::test]
async fn error_bodies_are_structured() {
    let cases = [
        (json!({"dataset": "NOPE"}), StatusCode::NOT_FOUND, "unknown_dataset"),
        (json!({}), StatusCode::BAD_REQUEST, "invalid_request"),
        (json!({"dataset": "SYN", "end_index": 400}), StatusCode::BAD_REQUEST, "invalid_request"),
        (json!({"dataset": "SYN", "backend": "oracle"}), StatusCode::UNPROCESSABLE_ENTITY, "invalid_json"),
        (json!({"dataset": "SYN", "surprise": 1}), StatusCode::UNPROCESSABLE_ENTITY, "invalid_json"),
        (
            json!({"timeframe": "1h", "bars": [{"timestamp": 1, "open": 10.0, "high": 9.0, "low": 8.0, "close": 9.5, "volume": null}]}),
            StatusCode::BAD_REQUEST,
            "invalid_request",
        ),
    ];
    for (body, status, code) in cases {
        let (s, b) = call(app(), "POST", "/analyze", Some(body.clone())).await;
        assert_eq!(s, status, "{body}");
        let e: ErrorBody = serde_json::from_slice(&b).unwrap();
        assert_eq!(e.code, code, "{body}");
    }
    let req = Request::builder()
        .method("POST")
        .uri("/analyze")
        .header("content-type", "application/json")
        .body(Body::from("{not json"))
        .unwrap();
    let resp = app().oneshot(req).await.unwrap();
    assert_eq!(resp.status(), StatusCode::BAD_REQUEST);
    let (s, b) = call(app(), "GET", "/nowhere", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    let e: ErrorBody = serde_json::from_slice(&b).unwrap();
    assert_eq!(e.code, "not_found");
}

struct Fixed(Result<String, String>);

impl ChatTransport for Fixed {
    fn complete(&self, _m: &[ChatMessage]) -> Result<String, LlmError> {
        self.0.clone().map_err(LlmError::Transport)
    }
}

fn llm_app(t: Fixed) -> axum::Router {
    router(AppState::with_llm(vec![series()], AnalysisConfig::default(), Arc::new(t), 1))
}

#[tokio::test]
async fn llm_backend_paths() {
    let body = json!({"dataset": "SYN", "backend": "llm"});
    let ok = Fixed(Ok(
        r#"{"forecast_horizon": "3", "decision": "LONG", "justification": "steady bid", "risk_reward_ratio": 2.5}"#.into(),
    ));
    let (s, b) = call(llm_app(ok), "POST", "/analyze", Some(body.clone())).await;
    assert_eq!(s, StatusCode::OK);
    let r: AnalyzeResponse = serde_json::from_slice(&b).unwrap();
    assert_eq!(r.decision.source, DecisionSource::Llm);
    assert_eq!(r.decision.risk_reward_ratio, 1.8);
    assert!(r.warnings.is_empty());

    let (_, b) = call(llm_app(Fixed(Ok("no idea".into()))), "POST", "/analyze", Some(body.clone())).await;
    let r: AnalyzeResponse = serde_json::from_slice(&b).unwrap();
    assert_eq!(r.decision.source, DecisionSource::RuleFallback);
    assert_eq!(r.warnings.len(), 1);

    let (s, b) = call(llm_app(Fixed(Err("connection refused".into()))), "POST", "/analyze", Some(body.clone())).await;
    assert_eq!(s, StatusCode::OK);
    let r: AnalyzeResponse = serde_json::from_slice(&b).unwrap();
    assert_eq!(r.decision.source, DecisionSource::RuleFallback);
    assert!(r.warnings[0].contains("connection refused"));

    let (_, b) = call(app(), "POST", "/analyze", Some(body)).await;
    let r: AnalyzeResponse = serde_json::from_slice(&b).unwrap();
    assert_eq!(r.decision.source, DecisionSource::RuleFallback);
    assert!(r.warnings[0].contains("not configured"));
}
