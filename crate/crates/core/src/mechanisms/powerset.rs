//! One noisy argmax over the cast outcome vectors.

use super::{BallotMatrix, Diagnostics, MechanismConfig, MechanismKind, PowersetHistogram, QueryOutcome};
use crate::accountant::{OrderGrid, RdpCurve};
use crate::analysis::{gap_bound_q_with_empty, select_cost, GnmaxScale};
use crate::error::{Error, Result};
use crate::noise::{gaussian, NoiseStream, Purpose};

pub fn powerset_aggregate(
    ballots: &BallotMatrix,
    cfg: &MechanismConfig,
    noise: &NoiseStream,
    grid: &OrderGrid,
) -> Result<QueryOutcome> {
    if cfg.kind != MechanismKind::Powerset {
        return Err(Error::param(format!("powerset_aggregate called with kind {}", cfg.kind)));
    }
    cfg.validate()?;
    let hist = PowersetHistogram::from_ballots(ballots);
    let counts: Vec<f64> = hist.bins().map(|(_, c)| c as f64).collect();
    let top = counts.iter().copied().fold(0.0, f64::max);
    let oracle = cfg.oracle_mode();

    let report =
        if oracle { None } else { Some(gap_bound_q_with_empty(&counts, hist.uncast_outcomes(), cfg.sigma_g)?) };
    let mut diag = Diagnostics {
        gaps: vec![hist.gap() as f64],
        q: vec![report.as_ref().map(|r| r.q)],
        gate_passed: vec![true],
        data_dependent: vec![false],
    };

    let gate_cost = if cfg.gate_enabled() {
        let mut rng = noise.rng(0, Purpose::Threshold);
        let passed = top + gaussian(&mut rng, cfg.sigma_t) > cfg.threshold_t;
        diag.gate_passed[0] = passed;
        let cost = cfg.gate_cost(grid)?;
        if !passed {
            return Ok(QueryOutcome {
                answered: false,
                released: vec![None; hist.k()],
                cost,
                private: true,
                diagnostics: diag,
            });
        }
        Some(cost)
    } else {
        None
    };

    let mut rng = noise.rng(0, Purpose::Release);
    let mut best: Option<(&[u8], f64)> = None;
    for (outcome, count) in hist.bins() {
        let noisy = count as f64 + gaussian(&mut rng, cfg.sigma_g);
        if best.is_none_or(|(_, b)| noisy > b) {
            best = Some((outcome, noisy));
        }
    }
    let winner = best.expect("ballot matrices are nonempty").0;
    let released = winner.iter().map(|&b| Some(b == 1)).collect();

    let release_cost = match report {
        None => RdpCurve::infinite(grid),
        Some(r) => {
            let sel = select_cost(r.log_q, GnmaxScale::unit_votes(cfg.sigma_g), grid)?;
            diag.data_dependent[0] = !sel.fell_back_everywhere();
            sel.curve
        }
    };
    let cost = match gate_cost {
        Some(g) => release_cost.checked_add(&g)?,
        None => release_cost,
    };

    Ok(QueryOutcome { answered: true, released, cost, private: !oracle, diagnostics: diag })
}
