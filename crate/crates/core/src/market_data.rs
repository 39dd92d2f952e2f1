//! OHLC ingestion, validation and evaluation-segment sampling.

use std::fmt;
use std::fs::File;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::{DateTime, NaiveDate, NaiveDateTime};
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot open {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("missing required column `{0}`")]
    MissingColumn(&'static str),
    #[error("row {row}: {message}")]
    BadRow { row: usize, message: String },
    #[error("non-monotonic timestamps at row {row}: {current} does not follow {previous}")]
    NonMonotonic {
        row: usize,
        previous: i64,
        current: i64,
    },
    #[error("empty series")]
    Empty,
    #[error("invalid bar: {0}")]
    InvalidBar(String),
    #[error("invalid timeframe `{0}`")]
    InvalidTimeframe(String),
    #[error("series of {available} bars is too short for segments of {required}")]
    TooShort { available: usize, required: usize },
    #[error("invalid sampling parameters: {0}")]
    BadSampling(String),
    #[error("requested {requested} segments but only {available} distinct start offsets exist")]
    NotEnoughOffsets { requested: usize, available: usize },
    #[error("manifest: {0}")]
    Manifest(String),
}

/// One candlestick. Timestamps are UTC epoch seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OhlcBar {
    pub timestamp: i64,
    pub open: f64,
    pub high: f64,
    pub low: f64,
    pub close: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub volume: Option<f64>,
}

impl OhlcBar {
    pub fn new(
        timestamp: i64,
        open: f64,
        high: f64,
        low: f64,
        close: f64,
        volume: Option<f64>,
    ) -> Result<Self, DataError> {
        let bar = Self {
            timestamp,
            open,
            high,
            low,
            close,
            volume,
        };
        bar.validate()?;
        Ok(bar)
    }

    pub fn validate(&self) -> Result<(), DataError> {
        let prices = [self.open, self.high, self.low, self.close];
        if prices.iter().any(|p| !p.is_finite() || *p <= 0.0) {
            return Err(DataError::InvalidBar(format!(
                "prices must be finite and positive (o={} h={} l={} c={})",
                self.open, self.high, self.low, self.close
            )));
        }
        if self.high < self.low {
            return Err(DataError::InvalidBar(format!(
                "high {} below low {}",
                self.high, self.low
            )));
        }
        if self.high < self.open.max(self.close) {
            return Err(DataError::InvalidBar(format!(
                "high {} below max(open, close)",
                self.high
            )));
        }
        if self.low > self.open.min(self.close) {
            return Err(DataError::InvalidBar(format!(
                "low {} above min(open, close)",
                self.low
            )));
        }
        if let Some(v) = self.volume {
            if !v.is_finite() || v < 0.0 {
                return Err(DataError::InvalidBar(format!("negative volume {v}")));
            }
        }
        Ok(())
    }
}

/// Bar duration, stored in seconds and written as `15m`, `1h`, `4h`, `1d`...
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Timeframe(u64);

impl Timeframe {
    pub fn from_secs(secs: u64) -> Self {
        Self(secs)
    }

    pub fn as_secs(self) -> u64 {
        self.0
    }
}

impl FromStr for Timeframe {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let split = s
            .find(|c: char| !c.is_ascii_digit())
            .ok_or_else(|| DataError::InvalidTimeframe(s.to_string()))?;
        let (num, unit) = s.split_at(split);
        let n: u64 = num
            .parse()
            .map_err(|_| DataError::InvalidTimeframe(s.to_string()))?;
        let unit_secs = match unit {
            "s" => 1,
            "m" | "min" => 60,
            "h" | "H" => 3_600,
            "d" | "D" => 86_400,
            "w" | "W" => 604_800,
            _ => return Err(DataError::InvalidTimeframe(s.to_string())),
        };
        if n == 0 {
            return Err(DataError::InvalidTimeframe(s.to_string()));
        }
        Ok(Self(n * unit_secs))
    }
}

impl fmt::Display for Timeframe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = self.0;
        if s % 604_800 == 0 {
            write!(f, "{}w", s / 604_800)
        } else if s % 86_400 == 0 {
            write!(f, "{}d", s / 86_400)
        } else if s % 3_600 == 0 {
            write!(f, "{}h", s / 3_600)
        } else if s % 60 == 0 {
            write!(f, "{}m", s / 60)
        } else {
            write!(f, "{s}s")
        }
    }
}

impl Serialize for Timeframe {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Timeframe {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// An ordered, validated run of bars for one instrument.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarSeries {
    pub symbol: String,
    pub timeframe: Timeframe,
    bars: Vec<OhlcBar>,
}

impl BarSeries {
    pub fn new(
        symbol: impl Into<String>,
        timeframe: Timeframe,
        bars: Vec<OhlcBar>,
    ) -> Result<Self, DataError> {
        if bars.is_empty() {
            return Err(DataError::Empty);
        }
        for (i, bar) in bars.iter().enumerate() {
            bar.validate().map_err(|e| DataError::BadRow {
                row: i + 1,
                message: e.to_string(),
            })?;
        }
        for (i, pair) in bars.windows(2).enumerate() {
            if pair[1].timestamp <= pair[0].timestamp {
                return Err(DataError::NonMonotonic {
                    row: i + 2,
                    previous: pair[0].timestamp,
                    current: pair[1].timestamp,
                });
            }
        }
        let series = Self {
            symbol: symbol.into(),
            timeframe,
            bars,
        };
        let gaps = series.spacing_gaps();
        if !gaps.is_empty() {
            tracing::warn!(
                symbol = %series.symbol,
                gaps = gaps.len(),
                "bar spacing differs from the declared timeframe (session gaps?)"
            );
        }
        Ok(series)
    }

    pub fn bars(&self) -> &[OhlcBar] {
        &self.bars
    }

    pub fn len(&self) -> usize {
        self.bars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bars.is_empty()
    }

    pub fn closes(&self) -> Vec<f64> {
        self.bars.iter().map(|b| b.close).collect()
    }

    /// Indices `i` where `bars[i].timestamp - bars[i-1].timestamp` differs from
    /// the timeframe. Gaps are tolerated; this only reports them.
    pub fn spacing_gaps(&self) -> Vec<usize> {
        let step = self.timeframe.as_secs() as i64;
        self.bars
            .windows(2)
            .enumerate()
            .filter(|(_, w)| w[1].timestamp - w[0].timestamp != step)
            .map(|(i, _)| i + 1)
            .collect()
    }
}

/// A contiguous evaluation slice: `visible` is analysed, `hidden` scores it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub symbol: String,
    pub timeframe: Timeframe,
    pub start_index: usize,
    pub visible: Vec<OhlcBar>,
    pub hidden: Vec<OhlcBar>,
}

impl Segment {
    pub fn entry_close(&self) -> f64 {
        self.visible.last().map(|b| b.close).unwrap_or(f64::NAN)
    }
}

fn parse_timestamp(raw: &str) -> Option<i64> {
    let raw = raw.trim();
    if let Ok(secs) = raw.parse::<i64>() {
        return Some(secs);
    }
    if let Ok(secs) = raw.parse::<f64>() {
        if secs.is_finite() {
            return Some(secs.floor() as i64);
        }
    }
    if let Ok(dt) = DateTime::parse_from_rfc3339(raw) {
        return Some(dt.timestamp());
    }
    for fmt in ["%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(raw, fmt) {
            return Some(dt.and_utc().timestamp());
        }
    }
    NaiveDate::parse_from_str(raw, "%Y-%m-%d")
        .ok()
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .map(|dt| dt.and_utc().timestamp())
}

struct Columns {
    timestamp: usize,
    open: usize,
    high: usize,
    low: usize,
    close: usize,
    volume: Option<usize>,
}

impl Columns {
    fn resolve(headers: &csv::StringRecord) -> Result<Self, DataError> {
        let find = |names: &[&str]| {
            headers
                .iter()
                .position(|h| names.iter().any(|n| h.trim().eq_ignore_ascii_case(n)))
        };
        Ok(Self {
            timestamp: find(&["timestamp", "time", "date", "datetime"])
                .ok_or(DataError::MissingColumn("timestamp"))?,
            open: find(&["open"]).ok_or(DataError::MissingColumn("open"))?,
            high: find(&["high"]).ok_or(DataError::MissingColumn("high"))?,
            low: find(&["low"]).ok_or(DataError::MissingColumn("low"))?,
            close: find(&["close"]).ok_or(DataError::MissingColumn("close"))?,
            volume: find(&["volume"]),
        })
    }
}

/// Parses CSV text with a header row. Column order is free and names match
/// case-insensitively. Row numbers in errors count data rows from 1.
pub fn parse_csv<R: Read>(
    reader: R,
    symbol: &str,
    timeframe: Timeframe,
) -> Result<BarSeries, DataError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let cols = Columns::resolve(rdr.headers()?)?;
    let mut bars = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record?;
        let field = |idx: usize, name: &str| -> Result<&str, DataError> {
            record.get(idx).ok_or_else(|| DataError::BadRow {
                row,
                message: format!("missing {name}"),
            })
        };
        let price = |idx: usize, name: &str| -> Result<f64, DataError> {
            let raw = field(idx, name)?;
            raw.parse::<f64>().map_err(|_| DataError::BadRow {
                row,
                message: format!("unparsable {name} `{raw}`"),
            })
        };
        let ts_raw = field(cols.timestamp, "timestamp")?;
        let timestamp = parse_timestamp(ts_raw).ok_or_else(|| DataError::BadRow {
            row,
            message: format!("unparsable timestamp `{ts_raw}`"),
        })?;
        let volume = match cols.volume {
            Some(idx) => match record.get(idx) {
                Some("") | None => None,
                Some(_) => Some(price(idx, "volume")?),
            },
            None => None,
        };
        let bar = OhlcBar::new(
            timestamp,
            price(cols.open, "open")?,
            price(cols.high, "high")?,
            price(cols.low, "low")?,
            price(cols.close, "close")?,
            volume,
        )
        .map_err(|e| DataError::BadRow {
            row,
            message: e.to_string(),
        })?;
        if let Some(prev) = bars.last().map(|b: &OhlcBar| b.timestamp) {
            if timestamp <= prev {
                return Err(DataError::NonMonotonic {
                    row,
                    previous: prev,
                    current: timestamp,
                });
            }
        }
        bars.push(bar);
    }
    BarSeries::new(symbol, timeframe, bars)
}

pub fn load_csv(
    path: impl AsRef<Path>,
    symbol: &str,
    timeframe: Timeframe,
) -> Result<BarSeries, DataError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_csv(file, symbol, timeframe)
}

/// Writes bars in the canonical `timestamp,open,high,low,close[,volume]` layout.
pub fn write_csv<W: std::io::Write>(writer: W, bars: &[OhlcBar]) -> Result<(), DataError> {
    let mut wtr = csv::Writer::from_writer(writer);
    let with_volume = bars.iter().any(|b| b.volume.is_some());
    if with_volume {
        wtr.write_record(["timestamp", "open", "high", "low", "close", "volume"])?;
    } else {
        wtr.write_record(["timestamp", "open", "high", "low", "close"])?;
    }
    for b in bars {
        let mut rec = vec![
            b.timestamp.to_string(),
            b.open.to_string(),
            b.high.to_string(),
            b.low.to_string(),
            b.close.to_string(),
        ];
        if with_volume {
            rec.push(b.volume.map(|v| v.to_string()).unwrap_or_default());
        }
        wtr.write_record(&rec)?;
    }
    wtr.flush().map_err(|source| DataError::Io {
        path: PathBuf::from("<writer>"),
        source,
    })?;
    Ok(())
}

/// Draws `count` distinct start offsets uniformly without replacement and cuts
/// `length`-bar segments whose last `holdout` bars are hidden. Segments are
/// returned in ascending start order and may overlap.
pub fn sample_segments(
    series: &BarSeries,
    count: usize,
    length: usize,
    holdout: usize,
    seed: u64,
) -> Result<Vec<Segment>, DataError> {
    if count == 0 || length == 0 || holdout == 0 {
        return Err(DataError::BadSampling(
            "count, length and holdout must be positive".into(),
        ));
    }
    if holdout >= length {
        return Err(DataError::BadSampling(format!(
            "holdout {holdout} must be smaller than length {length}"
        )));
    }
    if series.len() < length {
        return Err(DataError::TooShort {
            available: series.len(),
            required: length,
        });
    }
    let offsets = series.len() - length + 1;
    if count > offsets {
        return Err(DataError::NotEnoughOffsets {
            requested: count,
            available: offsets,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut starts = index::sample(&mut rng, offsets, count).into_vec();
    starts.sort_unstable();
    let bars = series.bars();
    Ok(starts
        .into_iter()
        .map(|start| {
            let split = start + length - holdout;
            Segment {
                symbol: series.symbol.clone(),
                timeframe: series.timeframe,
                start_index: start,
                visible: bars[start..split].to_vec(),
                hidden: bars[split..start + length].to_vec(),
            }
        })
        .collect())
}

fn default_count() -> usize {
    100
}
fn default_length() -> usize {
    100
}
fn default_holdout() -> usize {
    3
}

/// One benchmark asset as listed in a manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssetSpec {
    pub symbol: String,
    pub timeframe: Timeframe,
    pub csv: PathBuf,
    #[serde(default = "default_count")]
    pub count: usize,
    #[serde(default = "default_length")]
    pub length: usize,
    #[serde(default = "default_holdout")]
    pub holdout: usize,
    #[serde(default)]
    pub seed: u64,
}

/// Benchmark manifest (TOML). Relative csv paths resolve against the
/// manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(rename = "asset", default)]
    pub assets: Vec<AssetSpec>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Manifest {
    pub fn from_toml_str(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self, DataError> {
        let mut manifest: Manifest =
            toml::from_str(text).map_err(|e| DataError::Manifest(e.to_string()))?;
        manifest.base_dir = base_dir.into();
        if manifest.assets.is_empty() {
            return Err(DataError::Manifest("no [[asset]] entries".into()));
        }
        Ok(manifest)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, DataError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| DataError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_toml_str(&text, base)
    }

    pub fn csv_path(&self, asset: &AssetSpec) -> PathBuf {
        if asset.csv.is_absolute() {
            asset.csv.clone()
        } else {
            self.base_dir.join(&asset.csv)
        }
    }

    pub fn load_asset(&self, asset: &AssetSpec) -> Result<BarSeries, DataError> {
        load_csv(self.csv_path(asset), &asset.symbol, asset.timeframe)
    }
}
