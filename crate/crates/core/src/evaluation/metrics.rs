//! Accuracy and return aggregates per asset and method.

use serde::{Deserialize, Serialize};

use super::{TradeOutcome, HORIZON};

/// Percent of hidden closes on the predicted side: `100 * hits / (3 * n)`.
pub fn alpha(total_hits: u64, segments: usize) -> f64 {
    if segments == 0 {
        return 0.0;
    }
    100.0 * total_hits as f64 / (HORIZON as f64 * segments as f64)
}

/// Relative accuracy gain over the random baseline, in percent.
pub fn delta_alpha(alpha_method: f64, alpha_random: f64) -> Option<f64> {
    if alpha_random > 0.0 {
        Some(100.0 * (alpha_method - alpha_random) / alpha_random)
    } else {
        None
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodRow {
    pub asset: String,
    pub method: String,
    /// Percent.
    pub alpha: f64,
    /// Percent vs the random baseline on the same asset; absent without one.
    pub delta_alpha: Option<f64>,
    pub mean_r_cc: f64,
    pub mean_r_max: f64,
    pub mean_r_min: f64,
    /// Segments that produced a trade.
    pub segments: usize,
    /// Segments where the method abstained (excluded from every average).
    pub abstained: usize,
    pub hits: u64,
}

impl MethodRow {
    pub fn from_outcomes(
        asset: &str,
        method: &str,
        outcomes: &[TradeOutcome],
        abstained: usize,
    ) -> Self {
        let n = outcomes.len();
        let mean = |f: fn(&TradeOutcome) -> f64| {
            if n == 0 {
                0.0
            } else {
                outcomes.iter().map(f).sum::<f64>() / n as f64
            }
        };
        let hits: u64 = outcomes.iter().map(|o| o.hits as u64).sum();
        Self {
            asset: asset.into(),
            method: method.into(),
            alpha: alpha(hits, n),
            delta_alpha: None,
            mean_r_cc: mean(|o| o.r_cc),
            mean_r_max: mean(|o| o.r_max),
            mean_r_min: mean(|o| o.r_min),
            segments: n,
            abstained,
            hits,
        }
    }
}

/// Fills `delta_alpha` for every row of an asset that has a `random_name` row.
pub fn fill_delta_alpha(rows: &mut [MethodRow], random_name: &str) {
    let randoms: Vec<(String, f64)> = rows
        .iter()
        .filter(|r| r.method == random_name && r.segments > 0)
        .map(|r| (r.asset.clone(), r.alpha))
        .collect();
    for row in rows.iter_mut() {
        row.delta_alpha = randoms
            .iter()
            .find(|(a, _)| *a == row.asset)
            .and_then(|(_, base)| delta_alpha(row.alpha, *base));
    }
}
