//! Private multi-winner aggregation: Binary, τ-clipped and Powerset voting.

mod ballots;
mod binary;
mod election;
mod powerset;

use std::f64::consts::SQRT_2;

use serde::{Deserialize, Serialize};

use crate::accountant::{gaussian_rdp, OrderGrid, RdpCurve};
use crate::error::{Error, Result};
use crate::noise::NoiseStream;

pub use ballots::{clip, BallotMatrix, ClipNorm, ClippedBallots, LabelHistogram, PowersetHistogram};
pub use binary::{binary_aggregate, tau_aggregate};
pub use election::deterministic_election;
pub use powerset::powerset_aggregate;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MechanismKind {
    Binary,
    Tau,
    Powerset,
}

impl std::fmt::Display for MechanismKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            MechanismKind::Binary => "binary",
            MechanismKind::Tau => "tau",
            MechanismKind::Powerset => "powerset",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MechanismConfig {
    pub kind: MechanismKind,
    /// Release noise std; 0 selects the non-private oracle mode.
    pub sigma_g: f64,
    /// Consensus-check noise std; 0 disables the check.
    pub sigma_t: f64,
    /// Consensus threshold T; 0 disables the check.
    pub threshold_t: f64,
    /// Clip bound, used by `Tau` only.
    pub tau: f64,
    pub clip_norm: ClipNorm,
}

impl MechanismConfig {
    pub fn new(kind: MechanismKind, sigma_g: f64) -> Self {
        MechanismConfig { kind, sigma_g, sigma_t: 0.0, threshold_t: 0.0, tau: 1.0, clip_norm: ClipNorm::L2 }
    }

    pub fn binary(sigma_g: f64) -> Self {
        Self::new(MechanismKind::Binary, sigma_g)
    }

    pub fn tau(sigma_g: f64, tau: f64, clip_norm: ClipNorm) -> Self {
        MechanismConfig { tau, clip_norm, ..Self::new(MechanismKind::Tau, sigma_g) }
    }

    pub fn powerset(sigma_g: f64) -> Self {
        Self::new(MechanismKind::Powerset, sigma_g)
    }

    pub fn with_threshold(self, sigma_t: f64, threshold_t: f64) -> Self {
        MechanismConfig { sigma_t, threshold_t, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        let finite_nonneg = |name: &str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(Error::param(format!("{name}={v} must be finite and >= 0")))
            }
        };
        finite_nonneg("sigma_g", self.sigma_g)?;
        finite_nonneg("sigma_t", self.sigma_t)?;
        finite_nonneg("threshold_t", self.threshold_t)?;
        if self.kind == MechanismKind::Tau && !(self.tau.is_finite() && self.tau > 0.0) {
            return Err(Error::param(format!("tau={} must be finite and > 0", self.tau)));
        }
        Ok(())
    }

    pub fn oracle_mode(&self) -> bool {
        self.sigma_g == 0.0
    }

    pub fn gate_enabled(&self) -> bool {
        self.sigma_t > 0.0 && self.threshold_t > 0.0
    }

    /// τ voting whose clip never binds on `k` candidates.
    pub fn degenerates_to_binary(&self, k: usize) -> bool {
        let reach = match self.clip_norm {
            ClipNorm::L1 => k as f64,
            ClipNorm::L2 => (k as f64).sqrt(),
        };
        self.kind == MechanismKind::Tau && self.tau >= reach
    }

    /// Price of one consensus check.
    pub(crate) fn gate_cost(&self, grid: &OrderGrid) -> Result<RdpCurve> {
        gaussian_rdp(1.0, self.sigma_t, grid)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Diagnostics {
    /// Raw plurality gap: `|V¹_i − V⁰_i|` per label, or one `n₁ − n₂` for Powerset.
    pub gaps: Vec<f64>,
    /// `q(n̄)` per gap entry; absent in oracle mode.
    pub q: Vec<Option<f64>>,
    /// Consensus check outcome per gap entry (true when the check is off).
    pub gate_passed: Vec<bool>,
    /// Whether the data-dependent bound beat the data-independent one at any order.
    pub data_dependent: Vec<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QueryOutcome {
    /// At least one label was released.
    pub answered: bool,
    /// One entry per candidate; `None` is ⊥.
    pub released: Vec<Option<bool>>,
    pub cost: RdpCurve,
    /// False in oracle mode once anything was released.
    pub private: bool,
    pub diagnostics: Diagnostics,
}

impl QueryOutcome {
    /// Released bits with ⊥ mapped to `None`, as 0/1.
    pub fn labels(&self) -> Vec<Option<u8>> {
        self.released.iter().map(|r| r.map(u8::from)).collect()
    }
}

/// ℓ2 sensitivity of one label's `(V⁰_i, V¹_i)` pair.
pub fn per_label_sensitivity(cfg: &MechanismConfig) -> f64 {
    match cfg.kind {
        MechanismKind::Tau => SQRT_2 * cfg.tau.min(1.0),
        _ => SQRT_2,
    }
}

/// ℓ2 sensitivity of the stacked `(V⁰, V¹)` histogram over `labels` labels:
/// `√2·min(τ, √r)` for ℓ2 clipping, `min(2τ, √(2r))` for ℓ1 clipping and
/// `√(2r)` unclipped. Powerset releases one unit-vote histogram, `√2`.
pub fn joint_sensitivity(cfg: &MechanismConfig, labels: usize) -> f64 {
    let r = labels as f64;
    match (cfg.kind, cfg.clip_norm) {
        // squared form keeps a non-binding clip bit-identical to Binary
        (MechanismKind::Tau, ClipNorm::L2) => (2.0 * (cfg.tau * cfg.tau).min(r)).sqrt(),
        (MechanismKind::Tau, ClipNorm::L1) => (2.0 * (2.0 * cfg.tau * cfg.tau).min(r)).sqrt(),
        (MechanismKind::Binary, _) => (2.0 * r).sqrt(),
        (MechanismKind::Powerset, _) => SQRT_2,
    }
}

/// Price of one query on `labels` labels when no data-dependent bound applies.
pub fn data_independent_cost(cfg: &MechanismConfig, labels: usize, grid: &OrderGrid) -> Result<RdpCurve> {
    let joint = gaussian_rdp(joint_sensitivity(cfg, labels), cfg.sigma_g, grid)?;
    if cfg.kind == MechanismKind::Powerset {
        return Ok(joint);
    }
    gaussian_rdp(per_label_sensitivity(cfg), cfg.sigma_g, grid)?.scaled(labels as f64)?.pointwise_min(&joint)
}

pub fn aggregate(
    ballots: &BallotMatrix,
    cfg: &MechanismConfig,
    noise: &NoiseStream,
    grid: &OrderGrid,
) -> Result<QueryOutcome> {
    match cfg.kind {
        MechanismKind::Binary => binary_aggregate(ballots, cfg, noise, grid),
        MechanismKind::Tau => tau_aggregate(ballots, cfg, noise, grid),
        MechanismKind::Powerset => powerset_aggregate(ballots, cfg, noise, grid),
    }
}

/// Binary or τ voting restricted to `labels`; the others stay ⊥ and cost nothing.
pub fn aggregate_labels(
    ballots: &BallotMatrix,
    cfg: &MechanismConfig,
    noise: &NoiseStream,
    grid: &OrderGrid,
    labels: &[usize],
) -> Result<QueryOutcome> {
    binary::aggregate_subset(ballots, cfg, noise, grid, labels)
}
