//! Manifest-driven benchmark over sampled segments.
//!
//! Every segment is evaluated independently (in parallel) with randomness
//! derived from the global seed, the asset symbol and the segment index, so
//! results do not depend on the thread count.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::baselines::{
    baseline_linreg, baseline_random, predict_tree_baseline, train_boosted_stumps,
    training_windows, BoostedStumpsModel, StumpParams, TrainingSet, TreeVoteConfig,
    LINREG_WINDOW,
};
use super::metrics::{fill_delta_alpha, MethodRow};
use super::{capped_excursions, simulate_execution, TieBreak, TradeOutcome, HORIZON};
use crate::decision::{risk_levels, Direction, TradeDecision};
use crate::market_data::{sample_segments, BarSeries, Manifest, Segment};
use crate::pipeline::{analyze_window, AnalysisConfig};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("no methods selected")]
    NoMethods,
    #[error("unknown method {0:?} (expected random, linreg, stumps, agent, all)")]
    UnknownMethod(String),
    #[error("thread pool: {0}")]
    ThreadPool(String),
    #[error("writing {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("serialising results: {0}")]
    Serialize(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    Random,
    LinReg,
    Stumps,
    Agent,
}

impl Method {
    /// Table order.
    pub const ALL: [Method; 4] = [Method::Random, Method::LinReg, Method::Stumps, Method::Agent];

    pub fn name(self) -> &'static str {
        match self {
            Method::Random => "Random",
            Method::LinReg => "LinReg",
            Method::Stumps => "Stumps",
            Method::Agent => "Agent",
        }
    }

    /// Parses a comma-separated list; `all` selects every method. The result
    /// is deduplicated and in table order.
    pub fn parse_list(text: &str) -> Result<Vec<Method>, BenchError> {
        let mut out = Vec::new();
        for part in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            if part.eq_ignore_ascii_case("all") {
                out.extend(Method::ALL);
            } else if part.eq_ignore_ascii_case("none") {
                return Err(BenchError::NoMethods);
            } else {
                out.push(part.parse()?);
            }
        }
        out.sort();
        out.dedup();
        if out.is_empty() {
            return Err(BenchError::NoMethods);
        }
        Ok(out)
    }
}

impl FromStr for Method {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "random" | "baseline" => Ok(Method::Random),
            "linreg" | "lr" => Ok(Method::LinReg),
            "stumps" | "tree" => Ok(Method::Stumps),
            "agent" | "rule" => Ok(Method::Agent),
            _ => Err(BenchError::UnknownMethod(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub seed: u64,
    pub methods: Vec<Method>,
    pub tiebreak: TieBreak,
    pub cap_excursions: bool,
    pub analysis: AnalysisConfig,
    pub stumps: StumpParams,
    pub votes: TreeVoteConfig,
    pub train_window: usize,
    pub train_stride: usize,
    /// Worker threads; `None` uses the rayon default.
    pub threads: Option<usize>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            methods: Method::ALL.to_vec(),
            tiebreak: TieBreak::StopFirst,
            cap_excursions: false,
            analysis: AnalysisConfig::default(),
            stumps: StumpParams::default(),
            votes: TreeVoteConfig::default(),
            train_window: 50,
            train_stride: 5,
            threads: None,
        }
    }
}

pub fn fnv1a(text: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in text.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for one segment's random stream.
pub fn segment_seed(global: u64, symbol: &str, segment: usize) -> u64 {
    splitmix64(splitmix64(splitmix64(global) ^ fnv1a(symbol)) ^ segment as u64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentRecord {
    pub asset: String,
    pub segment: usize,
    pub start_index: usize,
    pub method: Method,
    pub decision: Option<Direction>,
    pub risk_reward_ratio: Option<f64>,
    /// `None` when the method abstained or failed.
    pub outcome: Option<TradeOutcome>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub seed: u64,
    pub tiebreak: TieBreak,
    pub cap_excursions: bool,
    pub methods: Vec<Method>,
    pub rows: Vec<MethodRow>,
    pub train_assets: Vec<String>,
    pub notes: Vec<String>,
    #[serde(skip)]
    pub records: Vec<SegmentRecord>,
}

struct LoadedAsset {
    symbol: String,
    series: BarSeries,
    segments: Vec<Segment>,
}

fn evaluate(
    method: Method,
    seg: &Segment,
    index: usize,
    model: Option<&BoostedStumpsModel>,
    config: &BenchConfig,
) -> SegmentRecord {
    let mut record = SegmentRecord {
        asset: seg.symbol.clone(),
        segment: index,
        start_index: seg.start_index,
        method,
        decision: None,
        risk_reward_ratio: None,
        outcome: None,
        note: None,
    };
    let decision: Result<Option<TradeDecision>, String> = match method {
        Method::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(segment_seed(config.seed, &seg.symbol, index));
            Ok(Some(baseline_random(&mut rng)))
        }
        Method::LinReg => {
            let closes: Vec<f64> = seg.visible.iter().map(|b| b.close).collect();
            baseline_linreg(&closes, LINREG_WINDOW)
                .map(Some)
                .map_err(|e| e.to_string())
        }
        Method::Stumps => match model {
            Some(m) => predict_tree_baseline(m, &seg.visible, &config.votes).map_err(|e| e.to_string()),
            None => Err("no trained model".into()),
        },
        Method::Agent => analyze_window(&seg.visible, &config.analysis)
            .map(|a| Some(a.decision))
            .map_err(|e| e.to_string()),
    };
    let decision = match decision {
        Ok(Some(d)) => d,
        Ok(None) => {
            record.note = Some("abstain".into());
            return record;
        }
        Err(e) => {
            record.note = Some(format!("error: {e}"));
            return record;
        }
    };
    record.decision = Some(decision.direction);
    record.risk_reward_ratio = Some(decision.risk_reward_ratio);
    let outcome = risk_levels(
        seg.entry_close(),
        decision.direction,
        config.analysis.rho,
        decision.risk_reward_ratio,
    )
    .map_err(|e| e.to_string())
    .and_then(|levels| {
        let mut o = simulate_execution(&levels, &seg.hidden, config.tiebreak)
            .map_err(|e| e.to_string())?;
        if config.cap_excursions {
            (o.r_max, o.r_min) = capped_excursions(&levels, &seg.hidden);
        }
        Ok(o)
    });
    match outcome {
        Ok(o) => record.outcome = Some(o),
        Err(e) => record.note = Some(format!("error: {e}")),
    }
    record
}

fn train_model(
    assets: &[&LoadedAsset],
    config: &BenchConfig,
) -> Result<BoostedStumpsModel, String> {
    let mut set = TrainingSet {
        features: Vec::new(),
        labels: Vec::new(),
    };
    for a in assets {
        let s = training_windows(a.series.bars(), config.train_window, config.train_stride, HORIZON)
            .map_err(|e| format!("{}: {e}", a.symbol))?;
        set.features.extend(s.features);
        set.labels.extend(s.labels);
    }
    train_boosted_stumps(&set, &config.stumps).map_err(|e| e.to_string())
}

pub fn run_benchmark(manifest: &Manifest, config: &BenchConfig) -> Result<EvalSummary, BenchError> {
    if config.methods.is_empty() {
        return Err(BenchError::NoMethods);
    }
    let mut methods = config.methods.clone();
    methods.sort();
    methods.dedup();
    let mut notes = Vec::new();
    let mut assets = Vec::new();
    for entry in &manifest.assets {
        let loaded = manifest.load_asset(entry).and_then(|series| {
            let seed = splitmix64(splitmix64(config.seed ^ entry.seed) ^ fnv1a(&entry.symbol));
            let segments =
                sample_segments(&series, entry.count, entry.length, entry.holdout, seed)?;
            Ok((series, segments))
        });
        match loaded {
            Ok((series, segments)) => {
                if entry.holdout != HORIZON {
                    notes.push(format!(
                        "asset {} skipped: holdout {} (expected {HORIZON})",
                        entry.symbol, entry.holdout
                    ));
                    continue;
                }
                assets.push(LoadedAsset {
                    symbol: entry.symbol.clone(),
                    series,
                    segments,
                });
            }
            Err(e) => {
                tracing::warn!(asset = %entry.symbol, error = %e, "asset skipped");
                notes.push(format!("asset {} skipped: {e}", entry.symbol));
            }
        }
    }

    let mut train_assets = Vec::new();
    let mut model = None;
    if methods.contains(&Method::Stumps) {
        if assets.len() < 2 {
            notes.push("Stumps skipped: needs at least two assets for the train/test split".into());
            methods.retain(|m| *m != Method::Stumps);
        } else {
            let mut order: Vec<usize> = (0..assets.len()).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(config.seed ^ fnv1a("split")));
            order.shuffle(&mut rng);
            let mut train: Vec<usize> = order[..assets.len() / 2].to_vec();
            train.sort_unstable();
            let refs: Vec<&LoadedAsset> = train.iter().map(|&i| &assets[i]).collect();
            train_assets = refs.iter().map(|a| a.symbol.clone()).collect();
            match train_model(&refs, config) {
                Ok(m) => {
                    if m.degenerate {
                        notes.push("Stumps model is constant: training labels were one class".into());
                    }
                    model = Some(m);
                }
                Err(e) => {
                    notes.push(format!("Stumps skipped: training failed: {e}"));
                    methods.retain(|m| *m != Method::Stumps);
                }
            }
        }
    }

    let jobs: Vec<(usize, usize)> = assets
        .iter()
        .enumerate()
        .flat_map(|(a, asset)| (0..asset.segments.len()).map(move |s| (a, s)))
        .collect();
    let run = || -> Vec<Vec<SegmentRecord>> {
        jobs.par_iter()
            .map(|&(a, s)| {
                let asset = &assets[a];
                let is_train = train_assets.contains(&asset.symbol);
                methods
                    .iter()
                    .filter(|m| !(**m == Method::Stumps && is_train))
                    .map(|&m| evaluate(m, &asset.segments[s], s, model.as_ref(), config))
                    .collect()
            })
            .collect()
    };
    let per_job = match config.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| BenchError::ThreadPool(e.to_string()))?
            .install(run),
        None => run(),
    };
    let records: Vec<SegmentRecord> = per_job.into_iter().flatten().collect();

    let mut rows = Vec::new();
    for asset in &assets {
        for &m in &methods {
            if m == Method::Stumps && train_assets.contains(&asset.symbol) {
                continue;
            }
            let mine: Vec<&SegmentRecord> = records
                .iter()
                .filter(|r| r.asset == asset.symbol && r.method == m)
                .collect();
            let outcomes: Vec<TradeOutcome> = mine.iter().filter_map(|r| r.outcome).collect();
            let errors = mine
                .iter()
                .filter(|r| r.note.as_deref().is_some_and(|n| n.starts_with("error")))
                .count();
            if errors > 0 {
                notes.push(format!("{} {}: {errors} segments failed", asset.symbol, m.name()));
            }
            rows.push(MethodRow::from_outcomes(
                &asset.symbol,
                m.name(),
                &outcomes,
                mine.len() - outcomes.len(),
            ));
        }
    }
    fill_delta_alpha(&mut rows, Method::Random.name());
    Ok(EvalSummary {
        seed: config.seed,
        tiebreak: config.tiebreak,
        cap_excursions: config.cap_excursions,
        methods,
        rows,
        train_assets,
        notes,
        records,
    })
}

impl EvalSummary {
    /// The results table as CSV with fixed precision.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("asset,method,alpha,delta_alpha,r_cc,r_max,r_min,segments,abstained\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{:.2},{},{:.4},{:.4},{:.4},{},{}",
                r.asset,
                r.method,
                r.alpha,
                r.delta_alpha.map(|d| format!("{d:+.2}")).unwrap_or_default(),
                r.mean_r_cc,
                r.mean_r_max,
                r.mean_r_min,
                r.segments,
                r.abstained
            );
        }
        out
    }

    pub fn segments_csv(&self) -> String {
        let mut out = String::from(
            "asset,segment,start_index,method,decision,r,exit_reason,exit_bar,r_cc,r_max,r_min,hits,note\n",
        );
        for r in &self.records {
            let o = r.outcome.as_ref();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.asset,
                r.segment,
                r.start_index,
                r.method.name(),
                r.decision.map(|d| d.as_str()).unwrap_or(""),
                r.risk_reward_ratio.map(|x| format!("{x:.6}")).unwrap_or_default(),
                o.map(|o| format!("{:?}", o.exit_reason)).unwrap_or_default(),
                o.map(|o| o.exit_bar.to_string()).unwrap_or_default(),
                o.map(|o| format!("{:.6}", o.r_cc)).unwrap_or_default(),
                o.map(|o| format!("{:.6}", o.r_max)).unwrap_or_default(),
                o.map(|o| format!("{:.6}", o.r_min)).unwrap_or_default(),
                o.map(|o| o.hits.to_string()).unwrap_or_default(),
                r.note.as_deref().unwrap_or("").replace(',', ";"),
            );
        }
        out
    }

    /// Plain-text table for terminals.
    pub fn render_table(&self) -> String {
        let mut out = format!(
            "{:<10} {:<8} {:>8} {:>8} {:>8} {:>8} {:>8} {:>5}\n",
            "Asset", "Method", "Acc", "dAcc%", "R_cc", "R_max", "R_min", "N"
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:<10} {:<8} {:>8.2} {:>8} {:>8.4} {:>8.4} {:>8.4} {:>5}",
                r.asset,
                r.method,
                r.alpha,
                r.delta_alpha.map(|d| format!("{d:+.2}")).unwrap_or_else(|| "-".into()),
                r.mean_r_cc,
                r.mean_r_max,
                r.mean_r_min,
                r.segments
            );
        }
        for n in &self.notes {
            let _ = writeln!(out, "note: {n}");
        }
        out
    }

    /// Writes `results.csv`, `results.json` and `segments.csv` into `dir`.
    pub fn write_outputs(&self, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>, BenchError> {
        let dir = dir.as_ref();
        let io = |path: &Path| {
            let path = path.to_path_buf();
            move |source| BenchError::Io { path, source }
        };
        std::fs::create_dir_all(dir).map_err(io(dir))?;
        let json =
            serde_json::to_string_pretty(self).map_err(|e| BenchError::Serialize(e.to_string()))?;
        let files = [
            ("results.csv", self.to_csv()),
            ("results.json", json + "\n"),
            ("segments.csv", self.segments_csv()),
        ];
        let mut written = Vec::new();
        for (name, text) in files {
            let path = dir.join(name);
            std::fs::write(&path, text).map_err(io(&path))?;
            written.push(path);
        }
        Ok(written)
    }
}
