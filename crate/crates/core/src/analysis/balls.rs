use serde::Serialize;

use crate::error::{Error, Result};

/// Balls-and-bins estimate of the plurality count among `t` voters when the
/// likeliest outcome has probability `P₁`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CollisionEstimate {
    /// Max collisions `c`, the root of `c·ln(t·P₁) + c = c·ln c`.
    pub c: f64,
    /// Gap estimate `max(0, c − 1)`.
    pub q_tilde: f64,
}

pub fn powerset_gap_estimate(t: u64, p1: f64) -> Result<CollisionEstimate> {
    if t == 0 {
        return Err(Error::param("teacher count must be >= 1"));
    }
    if !(p1 > 0.0 && p1 < 1.0) {
        return Err(Error::param(format!("outcome probability {p1} must lie in (0, 1)")));
    }
    let c = std::f64::consts::E * t as f64 * p1;
    Ok(CollisionEstimate { c, q_tilde: (c - 1.0).max(0.0) })
}

/// `(e·n/k)^k`, an upper bound on `C(n, k)`.
pub fn stirling_binom_upper(n: u64, k: u64) -> Result<f64> {
    if k == 0 || k > n {
        return Err(Error::param(format!("need 0 < k <= n, got n={n}, k={k}")));
    }
    Ok((std::f64::consts::E * n as f64 / k as f64).powi(k as i32))
}
