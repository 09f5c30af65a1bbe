//! Data-dependent RDP for noisy argmax.
//!
//! When the plurality outcome is very likely (small `q̃`), the Rényi
//! divergence at a low order λ can be bounded through the mechanism's RDP at
//! two higher orders μ₁, μ₂. Everything is evaluated in log space so that
//! extremely confident histograms, whose `q̃` underflows, still get a bound.

use serde::Serialize;

use super::special::ln_1m_exp;
use crate::accountant::{OrderGrid, RdpCurve};
use crate::error::{Error, Result};

/// RDP guarantees `(μ₁, ε₁)` and `(μ₂, ε₂)` of the underlying mechanism.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DataDependentParams {
    pub mu1: f64,
    pub mu2: f64,
    pub eps1: f64,
    pub eps2: f64,
}

impl DataDependentParams {
    pub fn new(mu1: f64, mu2: f64, eps1: f64, eps2: f64) -> Result<Self> {
        if !(mu1 > 1.0 && mu2 > 1.0) {
            return Err(Error::param(format!("orders mu1={mu1}, mu2={mu2} must exceed 1")));
        }
        if !(eps1 >= 0.0 && eps2 >= 0.0) {
            return Err(Error::param("eps1 and eps2 must be >= 0"));
        }
        Ok(DataDependentParams { mu1, mu2, eps1, eps2 })
    }
}

/// Why the data-dependent bound does not apply. Callers fall back to the
/// data-independent curve.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SideCondition {
    /// λ must satisfy 1 < λ ≤ μ₁.
    OrderOutOfRange,
    /// q̃ must lie strictly inside (0, 1).
    QOutOfRange,
    /// q̃ exceeds `e^{(μ₂−1)ε₂} / (μ₁/(μ₁−1) · μ₂/(μ₂−1))^{μ₂}`.
    QTooLarge,
    /// `q̃·e^{ε₂} ≥ 1`, which leaves the A term undefined.
    ADegenerate,
}

/// Data-dependent bound for a plain `q̃ ∈ [0, 1]`.
pub fn theorem_bound(
    q_tilde: f64,
    params: &DataDependentParams,
    lambda: f64,
) -> std::result::Result<f64, SideCondition> {
    if !(0.0..=1.0).contains(&q_tilde) {
        return Err(SideCondition::QOutOfRange);
    }
    theorem_bound_ln(q_tilde.ln(), params, lambda)
}

/// `(1/(λ−1))·ln((1−q̃)·A^{λ−1} + q̃·B^{λ−1})` with
/// `A = (1−q̃)/(1−(q̃e^{ε₂})^{(μ₂−1)/μ₂})` and `B = e^{ε₁}/q̃^{1/(μ₁−1)}`,
/// taking `ln q̃` directly.
pub fn theorem_bound_ln(log_q: f64, p: &DataDependentParams, lambda: f64) -> std::result::Result<f64, SideCondition> {
    if !(lambda > 1.0 && lambda <= p.mu1) {
        return Err(SideCondition::OrderOutOfRange);
    }
    if !(log_q < 0.0 && log_q > f64::NEG_INFINITY) {
        return Err(SideCondition::QOutOfRange);
    }
    let limit = (p.mu2 - 1.0) * p.eps2 - p.mu2 * ((p.mu1 / (p.mu1 - 1.0)).ln() + (p.mu2 / (p.mu2 - 1.0)).ln());
    if log_q > limit {
        return Err(SideCondition::QTooLarge);
    }
    if log_q + p.eps2 >= 0.0 {
        return Err(SideCondition::ADegenerate);
    }

    let log_1mq = ln_1m_exp(log_q);
    let log_a = log_1mq - ln_1m_exp((log_q + p.eps2) * (1.0 - 1.0 / p.mu2));
    let log_b = p.eps1 - log_q / (p.mu1 - 1.0);
    let left = log_1mq + (lambda - 1.0) * log_a;
    let right = log_q + (lambda - 1.0) * log_b;
    let bound = super::special::ln_add_exp(left, right) / (lambda - 1.0);
    Ok(bound.max(0.0))
}

/// Gaussian noisy argmax whose score vector has ℓ2 sensitivity `delta2`
/// under per-bin noise std `sigma`: data-independent `ε(μ) = μΔ₂²/(2σ²)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GnmaxScale {
    pub delta2: f64,
    pub sigma: f64,
}

impl GnmaxScale {
    /// Histogram of unit votes: one voter moves one count, Δ₂ = √2.
    pub fn unit_votes(sigma: f64) -> Self {
        GnmaxScale { delta2: std::f64::consts::SQRT_2, sigma }
    }

    pub fn rdp(&self, order: f64) -> f64 {
        order * (self.delta2 * self.delta2 / (2.0 * self.sigma * self.sigma))
    }

    /// Noise std relative to a unit-vote histogram.
    fn effective_sigma(&self) -> f64 {
        self.sigma * std::f64::consts::SQRT_2 / self.delta2
    }

    /// Candidate `(μ₁, μ₂)` pairs: μ₂ ∈ σ·√(ln 1/q̃)·{½, 1, 2}, μ₁ = μ₂ + 1.
    pub fn candidate_params(&self, log_q: f64) -> Vec<DataDependentParams> {
        if !(log_q < 0.0 && log_q.is_finite()) {
            return Vec::new();
        }
        let base = self.effective_sigma() * (-log_q).sqrt();
        [0.5, 1.0, 2.0]
            .iter()
            .filter_map(|m| {
                let mu2 = base * m;
                let mu1 = mu2 + 1.0;
                DataDependentParams::new(mu1, mu2, self.rdp(mu1), self.rdp(mu2)).ok()
            })
            .collect()
    }

    /// Smallest valid data-dependent bound at `lambda`, if any candidate
    /// satisfies the side conditions.
    pub fn data_dependent(&self, log_q: f64, lambda: f64) -> Option<f64> {
        self.candidate_params(log_q).iter().filter_map(|p| theorem_bound_ln(log_q, p, lambda).ok()).reduce(f64::min)
    }
}

/// Released cost for one noisy argmax: per order, the data-dependent value
/// where it is valid and smaller, the data-independent value otherwise.
#[derive(Clone, Debug, PartialEq)]
pub struct SelectedCost {
    pub curve: RdpCurve,
    /// True at orders where the data-dependent value was used.
    pub data_dependent: Vec<bool>,
}

impl SelectedCost {
    pub fn fell_back_everywhere(&self) -> bool {
        self.data_dependent.iter().all(|d| !d)
    }
}

pub fn select_cost(log_q: f64, scale: GnmaxScale, grid: &OrderGrid) -> Result<SelectedCost> {
    if !(scale.sigma > 0.0) {
        return Err(Error::param("noise std must be > 0"));
    }
    let mut used = Vec::with_capacity(grid.len());
    let eps = grid
        .orders()
        .iter()
        .map(|&order| {
            let di = scale.rdp(order);
            match scale.data_dependent(log_q, order) {
                Some(dd) if dd < di => {
                    used.push(true);
                    dd
                }
                _ => {
                    used.push(false);
                    di
                }
            }
        })
        .collect();
    Ok(SelectedCost { curve: RdpCurve::from_values(grid, eps)?, data_dependent: used })
}

/// High-gap approximation `ε ≤ exp(−2λ/σ²)/λ` at `λ = gap/4`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ApproxBound {
    pub lambda: f64,
    pub epsilon: f64,
    /// λ ≤ 1 is not a Rényi order; the value is reported but meaningless.
    pub regime_violated: bool,
}

pub fn approx_bound(gap: f64, sigma: f64) -> Result<ApproxBound> {
    if !(gap > 0.0) {
        return Err(Error::param(format!("gap {gap} must be > 0")));
    }
    if !(sigma > 0.0) {
        return Err(Error::param(format!("sigma {sigma} must be > 0")));
    }
    let lambda = gap / 4.0;
    Ok(ApproxBound {
        lambda,
        epsilon: (-2.0 * lambda / (sigma * sigma)).exp() / lambda,
        regime_violated: lambda <= 1.0,
    })
}

/// Whether a histogram (counts sorted decreasingly) is in the large-gap
/// regime where [`approx_bound`] applies: `n₁−n₂ ≥ 10σ` and `n₂−n₃ ≥ 10σ`.
/// Gaps to bins that do not exist are not constraints.
pub fn approx_regime_holds(sorted: &[f64], sigma: f64) -> bool {
    sorted.windows(2).take(2).all(|w| w[0] - w[1] >= 10.0 * sigma)
}
