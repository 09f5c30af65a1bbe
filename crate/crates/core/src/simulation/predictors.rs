//! Expected per-query privacy loss under the Bernoulli teacher model.
//!
//! These are modelling aids for choosing a mechanism; nothing here is charged
//! to an accountant.

use serde::Serialize;

use super::Correlation;
use crate::analysis::special::ln_binomial;
use crate::analysis::{approx_bound, powerset_gap_estimate};
use crate::error::{Error, Result};

/// `C(t, q) pᵠ (1−p)^{t−q}`.
pub fn binomial_pmf(t: u64, q: u64, p: f64) -> f64 {
    if q > t {
        return 0.0;
    }
    match p {
        0.0 => f64::from(u8::from(q == 0)),
        1.0 => f64::from(u8::from(q == t)),
        _ => (ln_binomial(t, q) + q as f64 * p.ln() + (t - q) as f64 * (1.0 - p).ln()).exp(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EpsPredictors {
    /// `k · Σ_{q̃ ≥ ⌈σ⌉} Bin(t, p)(q̃) · ε_approx(q̃)`.
    pub binary: f64,
    /// `ε_approx` at the balls-and-bins gap; `None` when that gap is below `⌈σ⌉`.
    pub powerset: Option<f64>,
}

pub fn expected_eps_predictors(
    p: f64,
    t: u64,
    k: usize,
    sigma: f64,
    correlation: Correlation,
) -> Result<EpsPredictors> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::param(format!("probability {p} must lie in (0, 1)")));
    }
    if t == 0 || k == 0 {
        return Err(Error::param("need at least one teacher and one label"));
    }
    if !(sigma > 0.0) {
        return Err(Error::param(format!("sigma {sigma} must be > 0")));
    }
    let free_labels = match correlation {
        Correlation::Independent => k,
        Correlation::Block(d) if (1..=k).contains(&d) => k - d + 1,
        Correlation::Block(d) => return Err(Error::param(format!("block size {d} out of range"))),
    };

    let floor = sigma.ceil() as u64;
    let mut per_label = 0.0;
    for q in floor.max(1)..=t {
        per_label += binomial_pmf(t, q, p) * approx_bound(q as f64, sigma)?.epsilon;
    }

    let p1 = p.max(1.0 - p).powi(free_labels as i32);
    let estimate = powerset_gap_estimate(t, p1)?;
    let powerset =
        if estimate.q_tilde < floor as f64 { None } else { Some(approx_bound(estimate.q_tilde, sigma)?.epsilon) };
    Ok(EpsPredictors { binary: k as f64 * per_label, powerset })
}

#[cfg(test)]
#[allow(clippy::excessive_precision)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        ((a - b) / b).abs() < 1e-10
    }

    // Reference values from a 40-digit mpmath evaluation of the same sums.
    #[test]
    fn reference_values() {
        let r = expected_eps_predictors(0.5, 50, 11, 7.0, Correlation::Independent).unwrap();
        assert!(close(r.binary, 1.401_153_084_944_659_3));
        assert_eq!(r.powerset, None);

        let r = expected_eps_predictors(0.999, 50, 11, 7.0, Correlation::Independent).unwrap();
        assert!(close(r.binary, 0.529_144_755_664_228_66));
        assert!(close(r.powerset.unwrap(), 0.007_682_954_447_684_744_6));

        let r = expected_eps_predictors(0.8, 20, 4, 3.0, Correlation::Independent).unwrap();
        assert!(close(r.binary, 0.423_882_790_525_638_22));
        assert!(close(r.powerset.unwrap(), 0.057_700_947_292_815_293));

        let r = expected_eps_predictors(0.5, 50, 1, 7.0, Correlation::Independent).unwrap();
        assert!(close(r.binary, 0.127_377_553_176_787_21));
        assert!(close(r.powerset.unwrap(), 0.030_167_439_327_375_402));
    }

    #[test]
    fn correlated_world() {
        let r = expected_eps_predictors(0.999, 50, 11, 7.0, Correlation::Block(11)).unwrap();
        assert!(close(r.powerset.unwrap(), 0.007_501_716_193_533_949_9));
        assert!(r.powerset.unwrap() <= r.binary * 11.0);
    }

    #[test]
    fn pmf_sums_to_one() {
        let s: f64 = (0..=30).map(|q| binomial_pmf(30, q, 0.37)).sum();
        assert!((s - 1.0).abs() < 1e-12);
        assert_eq!(binomial_pmf(5, 0, 0.0), 1.0);
        assert_eq!(binomial_pmf(5, 6, 0.5), 0.0);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(expected_eps_predictors(1.0, 50, 3, 7.0, Correlation::Independent).is_err());
        assert!(expected_eps_predictors(0.5, 0, 3, 7.0, Correlation::Independent).is_err());
        assert!(expected_eps_predictors(0.5, 50, 3, 7.0, Correlation::Block(4)).is_err());
    }
}
