//! Per-label two-bin noisy argmax, on raw or clipped ballots.

use super::{
    clip, joint_sensitivity, per_label_sensitivity, BallotMatrix, Diagnostics, LabelHistogram, MechanismConfig,
    MechanismKind, QueryOutcome,
};
use crate::accountant::{compose, gaussian_rdp, OrderGrid, RdpCurve};
use crate::analysis::{gap_bound_q, select_cost, GnmaxScale};
use crate::error::{Error, Result};
use crate::noise::{gaussian, NoiseStream, Purpose};

pub fn binary_aggregate(
    ballots: &BallotMatrix,
    cfg: &MechanismConfig,
    noise: &NoiseStream,
    grid: &OrderGrid,
) -> Result<QueryOutcome> {
    if cfg.kind != MechanismKind::Binary {
        return Err(Error::param(format!("binary_aggregate called with kind {}", cfg.kind)));
    }
    let all: Vec<usize> = (0..ballots.k()).collect();
    aggregate_subset(ballots, cfg, noise, grid, &all)
}

pub fn tau_aggregate(
    ballots: &BallotMatrix,
    cfg: &MechanismConfig,
    noise: &NoiseStream,
    grid: &OrderGrid,
) -> Result<QueryOutcome> {
    if cfg.kind != MechanismKind::Tau {
        return Err(Error::param(format!("tau_aggregate called with kind {}", cfg.kind)));
    }
    let all: Vec<usize> = (0..ballots.k()).collect();
    aggregate_subset(ballots, cfg, noise, grid, &all)
}

pub(crate) fn aggregate_subset(
    ballots: &BallotMatrix,
    cfg: &MechanismConfig,
    noise: &NoiseStream,
    grid: &OrderGrid,
    labels: &[usize],
) -> Result<QueryOutcome> {
    cfg.validate()?;
    let k = ballots.k();
    let mut selected = vec![false; k];
    for &i in labels {
        if i >= k {
            return Err(Error::param(format!("label {i} out of range for k={k}")));
        }
        if std::mem::replace(&mut selected[i], true) {
            return Err(Error::param(format!("label {i} selected twice")));
        }
    }

    let hist = match cfg.kind {
        MechanismKind::Binary => LabelHistogram::from_ballots(ballots),
        MechanismKind::Tau => LabelHistogram::from_clipped(&clip(ballots, cfg.tau, cfg.clip_norm)?),
        MechanismKind::Powerset => {
            return Err(Error::param("per-label voting needs a binary or tau mechanism"));
        }
    };
    let oracle = cfg.oracle_mode();
    let scale = GnmaxScale { delta2: per_label_sensitivity(cfg), sigma: cfg.sigma_g };

    let mut released = vec![None; k];
    let mut diag = Diagnostics {
        gaps: Vec::with_capacity(k),
        q: Vec::with_capacity(k),
        gate_passed: vec![false; k],
        data_dependent: vec![false; k],
    };
    let mut label_costs = Vec::new();
    let mut checked = 0usize;

    for i in 0..k {
        let (v0, v1) = (hist.negative[i], hist.positive[i]);
        diag.gaps.push((v1 - v0).abs());
        // bin order [V⁰, V¹] so an exact tie resolves to 0, as in the release
        let report = if oracle { None } else { Some(gap_bound_q(&[v0, v1], cfg.sigma_g)?) };
        diag.q.push(report.as_ref().map(|r| r.q));
        if !selected[i] {
            continue;
        }

        if cfg.gate_enabled() {
            checked += 1;
            let mut rng = noise.rng(i, Purpose::Threshold);
            if v0.max(v1) + gaussian(&mut rng, cfg.sigma_t) <= cfg.threshold_t {
                continue;
            }
        }
        diag.gate_passed[i] = true;

        let mut rng = noise.rng(i, Purpose::Release);
        let noisy0 = v0 + gaussian(&mut rng, cfg.sigma_g);
        let noisy1 = v1 + gaussian(&mut rng, cfg.sigma_g);
        released[i] = Some(noisy1 > noisy0);

        if let Some(report) = report {
            let sel = select_cost(report.log_q, scale, grid)?;
            diag.data_dependent[i] = !sel.fell_back_everywhere();
            label_costs.push(sel.curve);
        }
    }

    let answered = released.iter().any(Option::is_some);
    let release_cost = if !answered {
        RdpCurve::zero(grid)
    } else if oracle {
        RdpCurve::infinite(grid)
    } else {
        let joint = gaussian_rdp(joint_sensitivity(cfg, label_costs.len()), cfg.sigma_g, grid)?;
        compose(grid, &label_costs)?.pointwise_min(&joint)?
    };
    let cost = if checked > 0 {
        release_cost.checked_add(&cfg.gate_cost(grid)?.scaled(checked as f64)?)?
    } else {
        release_cost
    };

    Ok(QueryOutcome { answered, released, cost, private: !(oracle && answered), diagnostics: diag })
}
