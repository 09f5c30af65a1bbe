use serde::Serialize;

use super::special::{ln_erfc, ln_sum_exp};
use crate::error::{Error, Result};

/// Plurality gap of a vote histogram and the bound `q(n̄)` on the probability
/// that Gaussian noisy argmax (per-bin std σ) returns something else.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GapReport {
    /// Counts in decreasing order.
    pub sorted: Vec<f64>,
    /// Position of the plurality bin in the input (first on ties).
    pub top_index: usize,
    /// `n₁ − n₂`; bins that are absent count as zero.
    pub gap: f64,
    /// `min(1, ½ Σ_{i≠i*} erfc((n_{i*} − n_i)/(2σ)))`.
    pub q: f64,
    /// `ln q`, finite even when `q` underflows.
    pub log_q: f64,
}

pub fn gap_bound_q(counts: &[f64], sigma: f64) -> Result<GapReport> {
    gap_bound_q_with_empty(counts, 0.0, sigma)
}

/// As [`gap_bound_q`], with `empty_bins` further bins of count zero folded in
/// analytically (the uncast outcomes of a Powerset histogram).
pub fn gap_bound_q_with_empty(counts: &[f64], empty_bins: f64, sigma: f64) -> Result<GapReport> {
    if counts.is_empty() {
        return Err(Error::param("histogram is empty"));
    }
    if !(sigma > 0.0) {
        return Err(Error::param(format!("sigma {sigma} must be > 0")));
    }
    if let Some(bad) = counts.iter().find(|c| !(**c >= 0.0)) {
        return Err(Error::param(format!("count {bad} is negative or NaN")));
    }
    if !(empty_bins >= 0.0) {
        return Err(Error::param("empty bin count must be >= 0"));
    }

    let mut top_index = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[top_index] {
            top_index = i;
        }
    }
    let top = counts[top_index];

    let mut terms: Vec<f64> = counts
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != top_index)
        .map(|(_, &c)| ln_erfc((top - c) / (2.0 * sigma)))
        .collect();
    if empty_bins > 0.0 {
        terms.push(empty_bins.ln() + ln_erfc(top / (2.0 * sigma)));
    }
    let log_q = (ln_sum_exp(&terms) + 0.5f64.ln()).min(0.0);

    let mut sorted = counts.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let second = if counts.len() > 1 { sorted[1] } else { 0.0 };

    Ok(GapReport { gap: top - second, q: log_q.exp(), log_q, sorted, top_index })
}
