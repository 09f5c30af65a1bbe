//! Data-dependent privacy analysis and sensitivity checks.

pub mod balls;
pub mod gap;
pub mod sensitivity;
pub mod special;
pub mod theorem;

pub use balls::{powerset_gap_estimate, stirling_binom_upper, CollisionEstimate};
pub use gap::{gap_bound_q, gap_bound_q_with_empty, GapReport};
pub use sensitivity::{lp_norm, sensitivity_oracle, Adjacency, SearchLimits, SensitivityReport};
pub use theorem::{
    approx_bound, approx_regime_holds, select_cost, theorem_bound, theorem_bound_ln, ApproxBound, DataDependentParams,
    GnmaxScale, SelectedCost, SideCondition,
};
