//! Deterministic synthetic price generators for fixtures and the bundled
//! benchmark data.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::market_data::{BarSeries, DataError, OhlcBar, Timeframe};
use crate::patterns::PatternKind;

pub const BASE_TIMESTAMP: i64 = 1_704_067_200;

/// Builds bars from a close path. Each bar opens halfway between the previous
/// close and its own close; wicks extend `spread` (relative) beyond the body.
pub fn bars_from_closes(closes: &[f64], spread: f64, step_secs: i64) -> Vec<OhlcBar> {
    let mut prev = closes.first().copied().unwrap_or(0.0);
    closes
        .iter()
        .enumerate()
        .map(|(i, &close)| {
            let open = (prev + close) / 2.0;
            prev = close;
            OhlcBar {
                timestamp: BASE_TIMESTAMP + i as i64 * step_secs,
                open,
                high: open.max(close) * (1.0 + spread),
                low: open.min(close) * (1.0 - spread),
                close,
                volume: None,
            }
        })
        .collect()
}

/// Hourly bars with a 0.1% wick, the default fixture shape.
pub fn fixture_bars(closes: &[f64]) -> Vec<OhlcBar> {
    bars_from_closes(closes, 0.001, 3600)
}

/// Linear interpolation through `(index, price)` anchors with increasing
/// indices; the result has `last index + 1` points.
pub fn polyline(anchors: &[(usize, f64)]) -> Vec<f64> {
    let Some(&(last, last_price)) = anchors.last() else {
        return Vec::new();
    };
    let mut out = Vec::with_capacity(last + 1);
    for w in anchors.windows(2) {
        let ((i0, p0), (i1, p1)) = (w[0], w[1]);
        for i in i0..i1 {
            let t = (i - i0) as f64 / (i1 - i0) as f64;
            out.push(p0 + t * (p1 - p0));
        }
    }
    out.push(last_price);
    out
}

/// Oscillates between `lower(t)` and `upper(t)`, turning every `half_period`
/// bars and starting at the lower line.
pub fn zigzag(
    n: usize,
    half_period: usize,
    upper: impl Fn(f64) -> f64,
    lower: impl Fn(f64) -> f64,
) -> Vec<f64> {
    let half_period = half_period.max(1);
    let mut anchors = Vec::new();
    let mut t = 0;
    let mut high = false;
    while t < n + half_period {
        let x = t as f64;
        anchors.push((t, if high { upper(x) } else { lower(x) }));
        high = !high;
        t += half_period;
    }
    let mut path = polyline(&anchors);
    path.truncate(n);
    path
}

/// `a + b * t` plus uniform noise in `[-noise, noise]`.
pub fn noisy_line(n: usize, a: f64, b: f64, noise: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|t| {
            let e = if noise > 0.0 {
                rng.gen_range(-noise..=noise)
            } else {
                0.0
            };
            a + b * t as f64 + e
        })
        .collect()
}

/// Regime-switching random walk: drift and volatility change every few dozen
/// bars, wicks are random. Prices stay positive.
pub fn regime_walk(n: usize, start: f64, seed: u64, step_secs: i64) -> Vec<OhlcBar> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bars = Vec::with_capacity(n);
    let mut price = start;
    let mut drift = 0.0;
    let mut vol = 0.005;
    let mut left = 0usize;
    for i in 0..n {
        if left == 0 {
            left = rng.gen_range(20..80);
            drift = rng.gen_range(-0.002..0.002);
            vol = rng.gen_range(0.002..0.012);
        }
        left -= 1;
        let shock: f64 = rng.gen_range(-1.0..1.0) * vol * 3f64.sqrt();
        let open = price;
        let close = (open * (1.0 + drift + shock)).max(start * 0.05);
        let wick_up = rng.gen_range(0.0..vol);
        let wick_dn = rng.gen_range(0.0..vol);
        bars.push(OhlcBar {
            timestamp: BASE_TIMESTAMP + i as i64 * step_secs,
            open,
            high: open.max(close) * (1.0 + wick_up),
            low: open.min(close) * (1.0 - wick_dn),
            close,
            volume: Some(rng.gen_range(100.0..1000.0_f64).round()),
        });
        price = close;
    }
    bars
}

pub fn synthetic_series(
    symbol: &str,
    timeframe: Timeframe,
    n: usize,
    start: f64,
    seed: u64,
) -> Result<BarSeries, DataError> {
    let step = timeframe.as_secs() as i64;
    BarSeries::new(symbol, timeframe, regime_walk(n, start, seed, step))
}

/// Reflects a close path about its mean, turning bottoms into tops.
pub fn mirror_closes(closes: &[f64]) -> Vec<f64> {
    if closes.is_empty() {
        return Vec::new();
    }
    let mean = closes.iter().sum::<f64>() / closes.len() as f64;
    closes.iter().map(|c| 2.0 * mean - c).collect()
}

/// A labelled close path: `expected` is the formation a detector should
/// rank first, `None` when nothing should be reported.
#[derive(Debug, Clone)]
pub struct PatternFixture {
    pub name: &'static str,
    pub closes: Vec<f64>,
    pub expected: Option<PatternKind>,
}

fn v_spike() -> Vec<f64> {
    let mut v = vec![100.0; 25];
    v.extend(polyline(&[(0, 100.0), (3, 96.0), (6, 100.0)]).into_iter().skip(1));
    v.extend(vec![100.0; 20]);
    v
}

fn bull_flag() -> Vec<f64> {
    let mut f = vec![100.0; 30];
    f.extend(polyline(&[(0, 100.0), (5, 103.0)]).into_iter().skip(1));
    for j in 0..8 {
        let wiggle = if j % 2 == 0 { 0.15 } else { -0.15 };
        f.push(103.0 - 0.1 * (j as f64 + 1.0) + wiggle);
    }
    f
}

/// Hand-built formations plus shapes that must not be labelled.
pub fn pattern_corpus() -> Vec<PatternFixture> {
    let n = 60;
    let fx = |name, closes, expected| PatternFixture {
        name,
        closes,
        expected,
    };
    use PatternKind as K;
    vec![
        fx(
            "descending triangle",
            zigzag(n, 4, |t| 110.0 - 0.15 * t, |_| 100.0),
            Some(K::DescendingTriangle),
        ),
        fx(
            "ascending triangle",
            zigzag(n, 4, |_| 110.0, |t| 100.0 + 0.15 * t),
            Some(K::AscendingTriangle),
        ),
        fx(
            "symmetrical triangle",
            zigzag(n, 4, |t| 112.0 - 0.1 * t, |t| 100.0 + 0.1 * t),
            Some(K::SymmetricalTriangle),
        ),
        fx(
            "expanding triangle",
            zigzag(n, 4, |t| 104.0 + 0.1 * t, |t| 100.0 - 0.1 * t),
            Some(K::ExpandingTriangle),
        ),
        fx(
            "rising wedge",
            zigzag(n, 4, |t| 105.0 + 0.1 * t, |t| 100.0 + 0.18 * t),
            Some(K::RisingWedge),
        ),
        fx(
            "falling wedge",
            zigzag(n, 4, |t| 115.0 - 0.18 * t, |t| 100.0 - 0.1 * t),
            Some(K::FallingWedge),
        ),
        fx("rectangle", zigzag(n, 4, |_| 104.0, |_| 100.0), Some(K::Rectangle)),
        fx(
            "double bottom",
            polyline(&[(0, 110.0), (15, 100.0), (25, 103.0), (35, 100.2), (50, 106.0)]),
            Some(K::DoubleBottom),
        ),
        fx(
            "inverse head and shoulders",
            polyline(&[
                (0, 108.0),
                (10, 100.0),
                (16, 104.0),
                (22, 95.0),
                (28, 104.0),
                (34, 100.3),
                (44, 106.0),
            ]),
            Some(K::InverseHeadAndShoulders),
        ),
        fx("v-shaped reversal", v_spike(), Some(K::VShapedReversal)),
        fx("inverted v", mirror_closes(&v_spike()), Some(K::VShapedReversal)),
        fx("bullish flag", bull_flag(), Some(K::BullishFlag)),
        fx("bearish flag", mirror_closes(&bull_flag()), Some(K::BearishFlag)),
        fx(
            "steady ramp",
            (0..n).map(|i| 100.0 + i as f64 * 0.5).collect(),
            None,
        ),
        fx(
            "steady decline",
            (0..n).map(|i| 130.0 - i as f64 * 0.5).collect(),
            None,
        ),
        fx(
            "rounded arc",
            (0..n)
                .map(|i| {
                    let x = (i as f64 - 30.0) / 30.0;
                    100.0 + 8.0 * x * x
                })
                .collect(),
            None,
        ),
    ]
}
