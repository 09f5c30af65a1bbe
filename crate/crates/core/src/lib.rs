//! Differentially private multi-winner voting.
//!
//! Three aggregation mechanisms over binary ballots (per-label Binary voting,
//! τ-clipped voting and Powerset voting), a Rényi DP accountant with
//! data-dependent pricing, and a harness for synthetic teacher ensembles.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod accountant;
pub mod analysis;
pub mod error;
pub mod io;
pub mod mechanisms;
pub mod metrics;
pub mod noise;
pub mod simulation;

pub use accountant::{compose, gaussian_rdp, to_dp, BudgetLedger, DpGuarantee, OrderGrid, PrivacyBudget, RdpCurve};
pub use error::{Error, Result};
pub use mechanisms::{aggregate, BallotMatrix, ClipNorm, MechanismConfig, MechanismKind, QueryOutcome};
pub use noise::NoiseStream;
