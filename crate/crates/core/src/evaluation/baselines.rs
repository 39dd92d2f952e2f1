//! Reference strategies: random, linear-regression slope and gradient-boosted
//! decision stumps over indicator features.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decision::{DecisionSource, Direction, TradeDecision, FORECAST_HORIZON, R_MAX, R_MIN};
use crate::indicators::{macd, roc, rsi, sma, stoch, willr, IndicatorError};
use crate::market_data::OhlcBar;
use crate::trend::fit_line_ols;

pub const LINREG_WINDOW: usize = 40;
pub const FIXED_RATIO: f64 = 1.5;
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("need at least {required} bars, got {available}")]
    TooFewBars { required: usize, available: usize },
    #[error("need at least {required} labeled windows, got {available}")]
    TooFewSamples { required: usize, available: usize },
    #[error("feature rows have inconsistent width")]
    RaggedFeatures,
    #[error(transparent)]
    Indicator(#[from] IndicatorError),
    #[error("model file {path}: {message}")]
    ModelFile { path: String, message: String },
}

fn baseline_decision(direction: Direction, r: f64, justification: String) -> TradeDecision {
    TradeDecision {
        direction,
        risk_reward_ratio: r,
        forecast_horizon: FORECAST_HORIZON,
        justification,
        confidence: 0.0,
        source: DecisionSource::Rule,
    }
}

/// Uniform direction and uniform ratio in [1.2, 1.8].
pub fn baseline_random<R: Rng + ?Sized>(rng: &mut R) -> TradeDecision {
    let direction = if rng.gen_bool(0.5) {
        Direction::Long
    } else {
        Direction::Short
    };
    let r = rng.gen_range(R_MIN..=R_MAX);
    baseline_decision(direction, r, "random draw".into())
}

/// LONG when the OLS slope of the trailing `window` closes is positive.
pub fn baseline_linreg(closes: &[f64], window: usize) -> Result<TradeDecision, BaselineError> {
    if closes.len() < window || window < 2 {
        return Err(BaselineError::TooFewBars {
            required: window.max(2),
            available: closes.len(),
        });
    }
    let tail = &closes[closes.len() - window..];
    let pts: Vec<(f64, f64)> = tail.iter().enumerate().map(|(i, &c)| (i as f64, c)).collect();
    let slope = fit_line_ols(&pts).map(|l| l.slope).unwrap_or(0.0);
    let direction = if slope > 0.0 {
        Direction::Long
    } else {
        Direction::Short
    };
    Ok(baseline_decision(
        direction,
        FIXED_RATIO,
        format!("{window}-bar close slope {slope:+.6}"),
    ))
}

pub const FEATURE_NAMES: [&str; 7] = [
    "rsi",
    "macd_pct",
    "macd_hist_pct",
    "sma20_ratio",
    "roc",
    "stoch_k",
    "willr",
];

/// Bars needed for one feature vector.
pub const FEATURE_BARS: usize = 35;

/// Indicator features at the last bar of `bars`.
pub fn window_features(bars: &[OhlcBar]) -> Result<[f64; 7], BaselineError> {
    if bars.len() < FEATURE_BARS {
        return Err(BaselineError::TooFewBars {
            required: FEATURE_BARS,
            available: bars.len(),
        });
    }
    let closes: Vec<f64> = bars.iter().map(|b| b.close).collect();
    let last = |v: Vec<f64>| v[v.len() - 1];
    let close = closes[closes.len() - 1];
    let m = macd(&closes, 12, 26, 9)?;
    let (k, _) = stoch(bars, 14, 3)?;
    Ok([
        last(rsi(&closes, 14)?),
        100.0 * last(m.macd) / close,
        100.0 * last(m.histogram) / close,
        close / last(sma(&closes, 20)?) - 1.0,
        last(roc(&closes, 10)?),
        last(k),
        last(willr(bars, 14)?),
    ])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSet {
    pub features: Vec<Vec<f64>>,
    /// 1.0 when the close `horizon` bars ahead is higher.
    pub labels: Vec<f64>,
}

/// Sliding windows of `window` bars with step `stride`, labelled by the close
/// `horizon` bars past the window end.
pub fn training_windows(
    bars: &[OhlcBar],
    window: usize,
    stride: usize,
    horizon: usize,
) -> Result<TrainingSet, BaselineError> {
    let mut set = TrainingSet {
        features: Vec::new(),
        labels: Vec::new(),
    };
    let stride = stride.max(1);
    let mut end = window;
    while end + horizon <= bars.len() {
        let w = &bars[end - window..end];
        set.features.push(window_features(w)?.to_vec());
        let now = w[w.len() - 1].close;
        set.labels
            .push(if bars[end - 1 + horizon].close > now { 1.0 } else { 0.0 });
        end += stride;
    }
    Ok(set)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stump {
    pub feature: usize,
    pub threshold: f64,
    /// Output for `x[feature] <= threshold`.
    pub left: f64,
    pub right: f64,
    pub weight: f64,
}

impl Stump {
    pub fn output(&self, x: &[f64]) -> f64 {
        self.weight
            * if x[self.feature] <= self.threshold {
                self.left
            } else {
                self.right
            }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StumpParams {
    pub rounds: usize,
    pub learning_rate: f64,
    /// L2 penalty on leaf values.
    pub lambda: f64,
    pub min_samples: usize,
}

impl Default for StumpParams {
    fn default() -> Self {
        Self {
            rounds: 50,
            learning_rate: 0.3,
            lambda: 1.0,
            min_samples: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostedStumpsModel {
    pub version: u32,
    pub feature_names: Vec<String>,
    pub base_score: f64,
    pub learning_rate: f64,
    pub rounds: usize,
    pub stumps: Vec<Stump>,
    /// All training labels were one class; the model is constant.
    pub degenerate: bool,
    /// Mean log-loss after initialisation and after each round.
    pub loss_history: Vec<f64>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn log_loss(scores: &[f64], labels: &[f64]) -> f64 {
    let n = labels.len().max(1) as f64;
    scores
        .iter()
        .zip(labels)
        .map(|(&f, &y)| {
            // log(1 + e^f) - y f, stable for large |f|
            let softplus = if f > 0.0 {
                f + (-f).exp().ln_1p()
            } else {
                f.exp().ln_1p()
            };
            softplus - y * f
        })
        .sum::<f64>()
        / n
}

struct Split {
    feature: usize,
    threshold: f64,
    left: f64,
    right: f64,
    gain: f64,
}

fn best_split(
    order: &[Vec<usize>],
    x: &[Vec<f64>],
    g: &[f64],
    h: &[f64],
    lambda: f64,
) -> Option<Split> {
    let (g_total, h_total): (f64, f64) = (g.iter().sum(), h.iter().sum());
    let mut best: Option<Split> = None;
    for (f, idx) in order.iter().enumerate() {
        let (mut gl, mut hl) = (0.0, 0.0);
        for w in 0..idx.len().saturating_sub(1) {
            let i = idx[w];
            gl += g[i];
            hl += h[i];
            let (a, b) = (x[i][f], x[idx[w + 1]][f]);
            if a == b {
                continue;
            }
            let (gr, hr) = (g_total - gl, h_total - hl);
            let gain = gl * gl / (hl + lambda) + gr * gr / (hr + lambda)
                - g_total * g_total / (h_total + lambda);
            if best.as_ref().map_or(true, |s| gain > s.gain) {
                best = Some(Split {
                    feature: f,
                    threshold: (a + b) / 2.0,
                    left: -gl / (hl + lambda),
                    right: -gr / (hr + lambda),
                    gain,
                });
            }
        }
    }
    best
}

/// Stagewise logistic boosting of depth-1 stumps. Each stage's weight is
/// found by backtracking from the learning rate, so the training loss never
/// increases.
pub fn train_boosted_stumps(
    set: &TrainingSet,
    params: &StumpParams,
) -> Result<BoostedStumpsModel, BaselineError> {
    let n = set.labels.len();
    if n < params.min_samples || n != set.features.len() {
        return Err(BaselineError::TooFewSamples {
            required: params.min_samples,
            available: n,
        });
    }
    let width = set.features[0].len();
    if set.features.iter().any(|r| r.len() != width) {
        return Err(BaselineError::RaggedFeatures);
    }
    let positives = set.labels.iter().filter(|&&y| y > 0.5).count();
    let names = if width == FEATURE_NAMES.len() {
        FEATURE_NAMES.iter().map(|s| s.to_string()).collect()
    } else {
        (0..width).map(|i| format!("f{i}")).collect()
    };
    let mut model = BoostedStumpsModel {
        version: MODEL_VERSION,
        feature_names: names,
        base_score: 0.0,
        learning_rate: params.learning_rate,
        rounds: params.rounds,
        stumps: Vec::new(),
        degenerate: false,
        loss_history: Vec::new(),
    };
    if positives == 0 || positives == n {
        model.degenerate = true;
        model.base_score = if positives == n { 10.0 } else { -10.0 };
        let scores = vec![model.base_score; n];
        model.loss_history.push(log_loss(&scores, &set.labels));
        return Ok(model);
    }
    let prior = positives as f64 / n as f64;
    model.base_score = (prior / (1.0 - prior)).ln();
    let mut scores = vec![model.base_score; n];
    let mut loss = log_loss(&scores, &set.labels);
    model.loss_history.push(loss);

    let order: Vec<Vec<usize>> = (0..width)
        .map(|f| {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.sort_by(|&a, &b| set.features[a][f].total_cmp(&set.features[b][f]).then(a.cmp(&b)));
            idx
        })
        .collect();
    let mut g = vec![0.0; n];
    let mut h = vec![0.0; n];
    for _ in 0..params.rounds {
        for i in 0..n {
            let p = sigmoid(scores[i]);
            g[i] = p - set.labels[i];
            h[i] = (p * (1.0 - p)).max(1e-12);
        }
        let Some(split) = best_split(&order, &set.features, &g, &h, params.lambda) else {
            break;
        };
        let mut stump = Stump {
            feature: split.feature,
            threshold: split.threshold,
            left: split.left,
            right: split.right,
            weight: params.learning_rate,
        };
        let mut accepted = None;
        for _ in 0..30 {
            let trial: Vec<f64> = scores
                .iter()
                .zip(&set.features)
                .map(|(s, x)| s + stump.output(x))
                .collect();
            let trial_loss = log_loss(&trial, &set.labels);
            if trial_loss <= loss {
                accepted = Some((trial, trial_loss));
                break;
            }
            stump.weight /= 2.0;
        }
        let Some((trial, trial_loss)) = accepted else {
            break;
        };
        scores = trial;
        loss = trial_loss;
        model.loss_history.push(loss);
        model.stumps.push(stump);
    }
    Ok(model)
}

impl BoostedStumpsModel {
    pub fn score(&self, x: &[f64]) -> f64 {
        self.base_score + self.stumps.iter().map(|s| s.output(x)).sum::<f64>()
    }

    pub fn probability(&self, x: &[f64]) -> f64 {
        sigmoid(self.score(x))
    }

    pub fn accuracy(&self, set: &TrainingSet) -> f64 {
        if set.labels.is_empty() {
            return 0.0;
        }
        let correct = set
            .features
            .iter()
            .zip(&set.labels)
            .filter(|(x, &y)| (self.probability(x) > 0.5) == (y > 0.5))
            .count();
        correct as f64 / set.labels.len() as f64
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), BaselineError> {
        let path = path.as_ref();
        let err = |message: String| BaselineError::ModelFile {
            path: path.display().to_string(),
            message,
        };
        let text = serde_json::to_string_pretty(self).map_err(|e| err(e.to_string()))?;
        std::fs::write(path, text).map_err(|e| err(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, BaselineError> {
        let path = path.as_ref();
        let err = |message: String| BaselineError::ModelFile {
            path: path.display().to_string(),
            message,
        };
        let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        let model: Self = serde_json::from_str(&text).map_err(|e| err(e.to_string()))?;
        if model.version != MODEL_VERSION {
            return Err(err(format!(
                "unsupported model version {} (expected {MODEL_VERSION})",
                model.version
            )));
        }
        Ok(model)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeVoteConfig {
    pub sub_window: usize,
    pub stride: usize,
    /// Votes with `|p - 0.5|` below this abstain.
    pub dead_zone: f64,
}

impl Default for TreeVoteConfig {
    fn default() -> Self {
        Self {
            sub_window: 50,
            stride: 5,
            dead_zone: 0.05,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Vote {
    Long,
    Short,
    Hold,
}

/// Majority of LONG and SHORT votes; HOLD votes are ignored and a tie (or no
/// directional vote at all) abstains.
pub fn majority_vote(votes: &[Vote]) -> Option<Direction> {
    let long = votes.iter().filter(|v| **v == Vote::Long).count();
    let short = votes.iter().filter(|v| **v == Vote::Short).count();
    match long.cmp(&short) {
        std::cmp::Ordering::Greater => Some(Direction::Long),
        std::cmp::Ordering::Less => Some(Direction::Short),
        std::cmp::Ordering::Equal => None,
    }
}

pub fn vote_from_probability(p: f64, dead_zone: f64) -> Vote {
    if (p - 0.5).abs() < dead_zone {
        Vote::Hold
    } else if p > 0.5 {
        Vote::Long
    } else {
        Vote::Short
    }
}

/// Scores sub-windows anchored at the end of `visible` and takes the majority
/// vote. `Ok(None)` is an abstention.
pub fn predict_tree_baseline(
    model: &BoostedStumpsModel,
    visible: &[OhlcBar],
    config: &TreeVoteConfig,
) -> Result<Option<TradeDecision>, BaselineError> {
    let w = config.sub_window.max(FEATURE_BARS);
    if visible.len() < w {
        return Err(BaselineError::TooFewBars {
            required: w,
            available: visible.len(),
        });
    }
    let mut votes = Vec::new();
    let mut end = visible.len();
    while end >= w {
        let x = window_features(&visible[end - w..end])?;
        votes.push(vote_from_probability(model.probability(&x), config.dead_zone));
        if end < w + config.stride.max(1) {
            break;
        }
        end -= config.stride.max(1);
    }
    Ok(majority_vote(&votes).map(|d| {
        let long = votes.iter().filter(|v| **v == Vote::Long).count();
        let short = votes.iter().filter(|v| **v == Vote::Short).count();
        baseline_decision(
            d,
            FIXED_RATIO,
            format!("{long} LONG / {short} SHORT of {} sub-window votes", votes.len()),
        )
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::fixture_bars;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn linreg_examples() {
        let up: Vec<f64> = (0..40).map(|i| 100.0 + i as f64).collect();
        let down: Vec<f64> = up.iter().rev().copied().collect();
        assert_eq!(baseline_linreg(&up, 40).unwrap().direction, Direction::Long);
        assert_eq!(baseline_linreg(&down, 40).unwrap().direction, Direction::Short);
        assert_eq!(baseline_linreg(&[100.0; 40], 40).unwrap().direction, Direction::Short);
        assert!(baseline_linreg(&up[..39], 40).is_err());
    }

    #[test]
    fn random_is_seeded() {
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..50).map(|_| baseline_random(&mut rng)).collect::<Vec<_>>()
        };
        assert_eq!(draw(3), draw(3));
        assert!(draw(3)
            .iter()
            .all(|d| (R_MIN..=R_MAX).contains(&d.risk_reward_ratio)));
    }

    #[test]
    fn votes() {
        use Vote::*;
        assert_eq!(majority_vote(&[Long, Long, Long, Short, Short]), Some(Direction::Long));
        assert_eq!(majority_vote(&[Hold, Hold]), None);
        assert_eq!(majority_vote(&[Long, Short, Hold]), None);
        assert_eq!(vote_from_probability(0.53, 0.05), Hold);
        assert_eq!(vote_from_probability(0.6, 0.05), Long);
    }

    fn set(xs: &[[f64; 2]], ys: &[f64]) -> TrainingSet {
        TrainingSet {
            features: xs.iter().map(|x| x.to_vec()).collect(),
            labels: ys.to_vec(),
        }
    }

    #[test]
    fn degenerate_labels_give_constant_model() {
        let xs: Vec<[f64; 2]> = (0..60).map(|i| [i as f64, 0.0]).collect();
        let s = set(&xs, &[1.0; 60]);
        let m = train_boosted_stumps(&s, &StumpParams::default()).unwrap();
        assert!(m.degenerate);
        assert_eq!(m.accuracy(&s), 1.0);
    }

    #[test]
    fn xor_two_rounds_beats_chance() {
        // label = (x0 >= 2) xor x1
        let xs = [[0.0, 0.0], [1.0, 1.0], [2.0, 0.0], [3.0, 1.0]];
        let s = set(&xs, &[0.0, 1.0, 1.0, 0.0]);
        let p = StumpParams {
            rounds: 2,
            learning_rate: 1.0,
            lambda: 0.0,
            min_samples: 4,
        };
        let m = train_boosted_stumps(&s, &p).unwrap();
        assert!(m.accuracy(&s) > 0.5, "{m:?}");
    }

    #[test]
    fn model_round_trips() {
        let xs: Vec<[f64; 2]> = (0..60).map(|i| [i as f64, (i % 7) as f64]).collect();
        let ys: Vec<f64> = (0..60).map(|i| if i > 30 { 1.0 } else { 0.0 }).collect();
        let m = train_boosted_stumps(&set(&xs, &ys), &StumpParams::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        m.save(&path).unwrap();
        assert_eq!(BoostedStumpsModel::load(&path).unwrap(), m);
        let mut text = std::fs::read_to_string(&path).unwrap();
        text = text.replace("\"version\": 1", "\"version\": 99");
        std::fs::write(&path, text).unwrap();
        assert!(BoostedStumpsModel::load(&path).is_err());
    }

    #[test]
    fn tree_votes_over_ten_sub_windows() {
        let closes: Vec<f64> = (0..97).map(|i| 100.0 + (i as f64 * 0.3).sin()).collect();
        let bars = fixture_bars(&closes);
        let constant = BoostedStumpsModel {
            version: MODEL_VERSION,
            feature_names: vec![],
            base_score: 2.0,
            learning_rate: 0.1,
            rounds: 0,
            stumps: vec![],
            degenerate: true,
            loss_history: vec![],
        };
        let d = predict_tree_baseline(&constant, &bars, &TreeVoteConfig::default())
            .unwrap()
            .unwrap();
        assert_eq!(d.direction, Direction::Long);
        assert!(d.justification.contains("of 10 sub-window"), "{}", d.justification);
        let neutral = BoostedStumpsModel {
            base_score: 0.0,
            ..constant
        };
        assert_eq!(
            predict_tree_baseline(&neutral, &bars, &TreeVoteConfig::default()).unwrap(),
            None
        );
    }
}
