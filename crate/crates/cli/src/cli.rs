//! Subcommands: `bench`, `analyze`, `case-study`, `serve`, `generate`.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage error.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use quantdesk_core::decision::llm::{HttpChatTransport, LlmConfig};
use quantdesk_core::decision::Direction;
use quantdesk_core::evaluation::benchmark::{run_benchmark, BenchConfig, BenchError, Method};
use quantdesk_core::evaluation::case_study::{rolling_case_study, CaseStudyError};
use quantdesk_core::evaluation::TieBreak;
use quantdesk_core::market_data::{load_csv, write_csv, BarSeries, Manifest, Timeframe};
use quantdesk_core::pipeline::{analyze_window, AnalysisConfig};
use quantdesk_core::synthetic::synthetic_series;

use crate::api::{router, AnalyzeRequest, AppState, Backend, DEFAULT_CONTEXT_BARS};

pub const DEFAULT_MANIFEST: &str = "data/synthetic/manifest.toml";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "quantdesk", version, about = "Price-only trading analysis and benchmark harness")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run every method over the sampled segments of a manifest.
    Bench(BenchArgs),
    /// Analyse one window and print the decision.
    Analyze(AnalyzeArgs),
    /// Score a rolling sequence of overlapping windows.
    CaseStudy(CaseStudyArgs),
    /// Serve the HTTP analysis API.
    Serve(ServeArgs),
    /// Write a deterministic synthetic dataset and its manifest.
    Generate(GenerateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Table,
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, default_value = DEFAULT_MANIFEST)]
    pub manifest: PathBuf,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Comma-separated list of random, linreg, stumps, agent; or `all`.
    #[arg(long, default_value = "all")]
    pub methods: String,
    /// Which level fills first when one bar spans both: stop, target, open.
    #[arg(long, default_value = "stop")]
    pub tiebreak: String,
    /// Clip excursions at the stop and target distances.
    #[arg(long)]
    pub cap_excursions: bool,
    #[arg(long)]
    pub threads: Option<usize>,
    /// Directory for results.csv, results.json and segments.csv.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = OutputFormat::Table)]
    pub format: OutputFormat,
}

#[derive(Debug, Args)]
pub struct SourceArgs {
    /// A single OHLC CSV file.
    #[arg(long, conflicts_with = "dataset")]
    pub csv: Option<PathBuf>,
    #[arg(long, default_value = "CSV")]
    pub symbol: String,
    #[arg(long, default_value = "1h")]
    pub timeframe: String,
    #[arg(long, default_value = DEFAULT_MANIFEST)]
    pub manifest: PathBuf,
    /// Manifest asset symbol (used when --csv is absent).
    #[arg(long)]
    pub dataset: Option<String>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    /// Inclusive index of the last bar to analyse; defaults to the last bar.
    #[arg(long)]
    pub end_index: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_CONTEXT_BARS)]
    pub context: usize,
    #[arg(long, default_value = "rule")]
    pub backend: String,
    /// Print the full response as JSON.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct CaseStudyArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    /// Bars shown to the method per window.
    #[arg(long, default_value_t = 100)]
    pub window: usize,
    #[arg(long, default_value_t = 10)]
    pub windows: usize,
    /// Bars between consecutive window starts.
    #[arg(long, default_value_t = 5)]
    pub offset: usize,
    /// Replays recorded decisions (e.g. `S,L,L`) instead of analysing.
    #[arg(long)]
    pub decisions: Option<String>,
    /// First bar of the first window.
    #[arg(long, default_value_t = 0)]
    pub start: usize,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = DEFAULT_MANIFEST)]
    pub manifest: PathBuf,
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: String,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 3000)]
    pub bars: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Segments per asset written into the manifest.
    #[arg(long, default_value_t = 100)]
    pub count: usize,
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Bench(a) => bench(a),
        Command::Analyze(a) => analyze(a),
        Command::CaseStudy(a) => case_study(a),
        Command::Serve(a) => serve(a),
        Command::Generate(a) => generate(a),
    }
}

fn bench(a: BenchArgs) -> Result<(), CliError> {
    let methods = Method::parse_list(&a.methods).map_err(|e| CliError::Usage(e.to_string()))?;
    let tiebreak: TieBreak = a.tiebreak.parse().map_err(CliError::Usage)?;
    if a.threads == Some(0) {
        return Err(CliError::Usage("--threads must be at least 1".into()));
    }
    let manifest = Manifest::load(&a.manifest).map_err(runtime)?;
    let config = BenchConfig {
        seed: a.seed,
        methods,
        tiebreak,
        cap_excursions: a.cap_excursions,
        threads: a.threads,
        ..BenchConfig::default()
    };
    let summary = run_benchmark(&manifest, &config).map_err(|e| match e {
        BenchError::NoMethods | BenchError::UnknownMethod(_) => CliError::Usage(e.to_string()),
        other => runtime(other),
    })?;
    match a.format {
        OutputFormat::Table => print!("{}", summary.render_table()),
        OutputFormat::Csv => print!("{}", summary.to_csv()),
        OutputFormat::Json => {
            println!("{}", serde_json::to_string_pretty(&summary).map_err(runtime)?)
        }
    }
    if let Some(dir) = &a.out {
        for path in summary.write_outputs(dir).map_err(runtime)? {
            eprintln!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn load_source(s: &SourceArgs) -> Result<BarSeries, CliError> {
    if let Some(csv) = &s.csv {
        let tf: Timeframe = s.timeframe.parse().map_err(|e| CliError::Usage(format!("{e}")))?;
        return load_csv(csv, &s.symbol, tf).map_err(runtime);
    }
    let manifest = Manifest::load(&s.manifest).map_err(runtime)?;
    let asset = match &s.dataset {
        Some(name) => manifest
            .assets
            .iter()
            .find(|x| &x.symbol == name)
            .ok_or_else(|| CliError::Usage(format!("manifest has no asset {name:?}")))?,
        None => return Err(CliError::Usage("give --csv or --dataset".into())),
    };
    manifest.load_asset(asset).map_err(runtime)
}

fn llm_state(datasets: Vec<BarSeries>) -> Result<AppState, CliError> {
    match LlmConfig::from_env() {
        Ok(cfg) => {
            let retries = cfg.max_retries;
            let transport = HttpChatTransport::new(cfg).map_err(runtime)?;
            Ok(AppState::with_llm(
                datasets,
                AnalysisConfig::default(),
                Arc::new(transport),
                retries,
            ))
        }
        Err(_) => Ok(AppState::new(datasets, AnalysisConfig::default())),
    }
}

fn analyze(a: AnalyzeArgs) -> Result<(), CliError> {
    let backend: Backend = a.backend.parse().map_err(CliError::Usage)?;
    let series = load_source(&a.source)?;
    let symbol = series.symbol.clone();
    let state = match backend {
        Backend::Rule => AppState::new(vec![series], AnalysisConfig::default()),
        Backend::Llm => llm_state(vec![series])?,
    };
    let req = AnalyzeRequest {
        dataset: Some(symbol),
        end_index: a.end_index,
        context_bars: Some(a.context),
        backend,
        ..AnalyzeRequest::default()
    };
    let resp = state.analyze(&req).map_err(|e| match e.status.as_u16() {
        400 | 404 | 422 => CliError::Usage(e.to_string()),
        _ => runtime(e),
    })?;
    for w in &resp.warnings {
        eprintln!("warning: {w}");
    }
    if a.json {
        println!("{}", serde_json::to_string_pretty(&resp).map_err(runtime)?);
        return Ok(());
    }
    let d = &resp.decision;
    let r = &resp.risk;
    println!(
        "{} {} bars {}..={}",
        resp.symbol, resp.timeframe, resp.window.start_index, resp.window.end_index
    );
    println!(
        "decision: {} r={:.3} horizon={} confidence={:.2}",
        d.direction, d.risk_reward_ratio, d.forecast_horizon, d.confidence
    );
    println!("entry {:.6} stop {:.6} target {:.6}", r.entry, r.stop, r.target);
    println!("justification: {}", d.justification);
    println!("\n{}\n{}\n{}", resp.reports.indicator, resp.reports.pattern, resp.reports.trend);
    Ok(())
}

/// Parses `L,S,LONG,short,...` into directions.
pub fn parse_decisions(text: &str) -> Result<Vec<Direction>, CliError> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| match s.to_ascii_uppercase().as_str() {
            "L" | "LONG" => Ok(Direction::Long),
            "S" | "SHORT" => Ok(Direction::Short),
            other => Err(CliError::Usage(format!("unknown decision {other:?} (L|S|LONG|SHORT)"))),
        })
        .collect()
}

fn case_study(a: CaseStudyArgs) -> Result<(), CliError> {
    let series = load_source(&a.source)?;
    let replay = a.decisions.as_deref().map(parse_decisions).transpose()?;
    if let Some(d) = &replay {
        if d.len() != a.windows {
            return Err(CliError::Usage(format!(
                "--decisions has {} entries for {} windows",
                d.len(),
                a.windows
            )));
        }
    }
    let bars = series
        .bars()
        .get(a.start..)
        .ok_or_else(|| CliError::Usage(format!("--start {} is past the series end", a.start)))?;
    let config = AnalysisConfig::default();
    let report = rolling_case_study(bars, a.window, a.windows, a.offset, |i, visible| match &replay {
        Some(d) => Ok(d[i]),
        None => analyze_window(visible, &config)
            .map(|x| x.decision.direction)
            .map_err(|e| e.to_string()),
    })
    .map_err(|e| match e {
        CaseStudyError::Method { .. } => runtime(e),
        other => CliError::Usage(other.to_string()),
    })?;
    if a.json {
        println!("{}", serde_json::to_string_pretty(&report).map_err(runtime)?);
    } else {
        print!("{}", report.render());
    }
    Ok(())
}

fn serve(a: ServeArgs) -> Result<(), CliError> {
    let manifest = Manifest::load(&a.manifest).map_err(runtime)?;
    let mut datasets = Vec::new();
    for asset in &manifest.assets {
        datasets.push(manifest.load_asset(asset).map_err(runtime)?);
    }
    let state = llm_state(datasets)?;
    let rt = tokio::runtime::Runtime::new().map_err(runtime)?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&a.addr).await.map_err(runtime)?;
        tracing::info!(addr = %a.addr, "serving");
        axum::serve(listener, router(state))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(runtime)
    })
}

/// Symbols, timeframes and start prices of the generated assets.
const SYNTHETIC_ASSETS: [(&str, &str, f64); 4] = [
    ("SYNA", "1h", 100.0),
    ("SYNB", "4h", 42.0),
    ("SYNC", "1d", 2500.0),
    ("SYND", "15m", 7.5),
];

fn generate(a: GenerateArgs) -> Result<(), CliError> {
    if a.bars < 100 {
        return Err(CliError::Usage("--bars must be at least 100".into()));
    }
    std::fs::create_dir_all(&a.out).map_err(runtime)?;
    let mut manifest = String::from("name = \"synthetic\"\n");
    for (i, (symbol, tf, start)) in SYNTHETIC_ASSETS.iter().enumerate() {
        let tf: Timeframe = tf.parse().map_err(runtime)?;
        let series = synthetic_series(symbol, tf, a.bars, *start, a.seed.wrapping_add(i as u64))
            .map_err(runtime)?;
        let file = format!("{}.csv", symbol.to_lowercase());
        write_file(&a.out.join(&file), |w| write_csv(w, series.bars()).map_err(runtime))?;
        manifest.push_str(&format!(
            "\n[[asset]]\nsymbol = \"{symbol}\"\ntimeframe = \"{tf}\"\ncsv = \"{file}\"\ncount = {}\n",
            a.count
        ));
    }
    std::fs::write(a.out.join("manifest.toml"), manifest).map_err(runtime)?;
    eprintln!("wrote {} assets to {}", SYNTHETIC_ASSETS.len(), a.out.display());
    Ok(())
}

fn write_file(
    path: &Path,
    f: impl FnOnce(std::fs::File) -> Result<(), CliError>,
) -> Result<(), CliError> {
    let file = std::fs::File::create(path).map_err(runtime)?;
    f(file)
}
