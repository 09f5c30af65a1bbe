use mwdp::accountant::{compose, gaussian_rdp, to_dp, BudgetLedger, OrderGrid, PrivacyBudget, RdpCurve};
use mwdp::analysis::gap_bound_q;
use mwdp::mechanisms::{aggregate, clip, BallotMatrix, ClipNorm, LabelHistogram, MechanismConfig, PowersetHistogram};
use mwdp::metrics::{auc, average_precision};
use mwdp::noise::NoiseStream;
use proptest::prelude::*;

fn ballots() -> impl Strategy<Value = BallotMatrix> {
    (1usize..=12, 1usize..=6).prop_flat_map(|(n, k)| {
        proptest::collection::vec(proptest::collection::vec(0u8..=1, k), n)
            .prop_map(|rows| BallotMatrix::from_rows(&rows).unwrap())
    })
}

fn norm() -> impl Strategy<Value = ClipNorm> {
    prop_oneof![Just(ClipNorm::L1), Just(ClipNorm::L2)]
}

fn mechanism() -> impl Strategy<Value = MechanismConfig> {
    (0usize..3, 0.5f64..10.0, 0.2f64..3.0, norm(), any::<bool>()).prop_map(|(kind, sigma, tau, norm, gate)| {
        let cfg = match kind {
            0 => MechanismConfig::binary(sigma),
            1 => MechanismConfig::tau(sigma, tau, norm),
            _ => MechanismConfig::powerset(sigma),
        };
        if gate {
            cfg.with_threshold(1.5, 3.0)
        } else {
            cfg
        }
    })
}

fn curve(grid: &OrderGrid) -> impl Strategy<Value = RdpCurve> {
    let grid = grid.clone();
    proptest::collection::vec(0.0f64..5.0, grid.len()).prop_map(move |eps| RdpCurve::from_values(&grid, eps).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn outcomes_are_deterministic(b in ballots(), cfg in mechanism(), seed in any::<u64>(), qid in any::<u64>()) {
        let grid = OrderGrid::default();
        let noise = NoiseStream::new(seed, qid);
        let first = aggregate(&b, &cfg, &noise, &grid).unwrap();
        let second = aggregate(&b, &cfg, &noise, &grid).unwrap();
        prop_assert_eq!(&first, &second);
        prop_assert_eq!(first.released.len(), b.k());
        if !first.answered {
            prop_assert!(first.released.iter().all(Option::is_none));
        }
    }

    #[test]
    fn clipping_bounds_and_idempotence(b in ballots(), tau in 0.1f64..4.0, nu in norm()) {
        let once = clip(&b, tau, nu).unwrap();
        for (j, row) in once.rows().enumerate() {
            prop_assert!(nu.norm(row) <= tau + 1e-12);
            let scale = (tau / nu.norm(&b.row(j).iter().map(|&x| f64::from(x)).collect::<Vec<_>>())).min(1.0);
            for (v, &x) in row.iter().zip(b.row(j)) {
                prop_assert!((v - scale * f64::from(x)).abs() < 1e-12 || x == 0 && *v == 0.0);
            }
        }
        let twice = once.reclip(tau, nu).unwrap();
        for (r1, r2) in once.rows().zip(twice.rows()) {
            for (a, c) in r1.iter().zip(r2) {
                prop_assert!((a - c).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn mass_is_conserved(b in ballots(), tau in 0.1f64..4.0, nu in norm()) {
        let n = b.n() as f64;
        for h in [LabelHistogram::from_ballots(&b), LabelHistogram::from_clipped(&clip(&b, tau, nu).unwrap())] {
            for (p, q) in h.positive.iter().zip(&h.negative) {
                prop_assert!((p + q - n).abs() < 1e-9);
                prop_assert!(*p >= 0.0 && *q >= -1e-12);
            }
        }
    }

    #[test]
    fn powerset_releases_a_cast_ballot(b in ballots(), sigma in 0.5f64..50.0, seed in any::<u64>()) {
        let grid = OrderGrid::default();
        let out = aggregate(&b, &MechanismConfig::powerset(sigma), &NoiseStream::new(seed, 0), &grid).unwrap();
        let bits: Vec<u8> = out.released.iter().map(|r| u8::from(r.unwrap())).collect();
        prop_assert!(PowersetHistogram::from_ballots(&b).count_of(&bits) > 0);
    }

    #[test]
    fn wide_tau_is_binary(b in ballots(), sigma in 0.5f64..10.0, seed in any::<u64>()) {
        let grid = OrderGrid::default();
        let noise = NoiseStream::new(seed, 1);
        let tau = MechanismConfig::tau(sigma, (b.k() as f64).sqrt(), ClipNorm::L2);
        prop_assert_eq!(
            aggregate(&b, &tau, &noise, &grid).unwrap(),
            aggregate(&b, &MechanismConfig::binary(sigma), &noise, &grid).unwrap()
        );
    }

    #[test]
    fn composition_laws(a in curve(&OrderGrid::default()), b in curve(&OrderGrid::default()), c in curve(&OrderGrid::default())) {
        let g = OrderGrid::default();
        let ab_c = compose(&g, &[compose(&g, &[a.clone(), b.clone()]).unwrap(), c.clone()]).unwrap();
        let a_bc = compose(&g, &[a.clone(), compose(&g, &[b.clone(), c.clone()]).unwrap()]).unwrap();
        let ba = compose(&g, &[b.clone(), a.clone()]).unwrap();
        let ab = compose(&g, &[a.clone(), b.clone()]).unwrap();
        for i in 0..g.len() {
            prop_assert!((ab_c.eps()[i] - a_bc.eps()[i]).abs() < 1e-12);
        }
        prop_assert_eq!(ab, ba);
        prop_assert_eq!(compose(&g, &[a.clone(), RdpCurve::zero(&g)]).unwrap(), a);
    }

    #[test]
    fn gaussian_homogeneity(d in 0.1f64..5.0, s in 0.1f64..20.0, c in 0.1f64..10.0) {
        let g = OrderGrid::default();
        let base = gaussian_rdp(d, s, &g).unwrap();
        let both = gaussian_rdp(c * d, c * s, &g).unwrap();
        let only = gaussian_rdp(c * d, s, &g).unwrap();
        for i in 0..g.len() {
            prop_assert!((base.eps()[i] - both.eps()[i]).abs() <= 1e-12 * base.eps()[i].max(1.0));
            prop_assert!((only.eps()[i] - c * c * base.eps()[i]).abs() <= 1e-12 * only.eps()[i].max(1.0));
        }
    }

    #[test]
    fn conversion_monotone(a in curve(&OrderGrid::default()), extra in curve(&OrderGrid::default()), d1 in 1e-9f64..0.5, d2 in 1e-9f64..0.5) {
        let g = OrderGrid::default();
        let (lo, hi) = if d1 < d2 { (d1, d2) } else { (d2, d1) };
        prop_assert!(to_dp(&a, hi).unwrap().epsilon <= to_dp(&a, lo).unwrap().epsilon);
        let bigger = compose(&g, &[a.clone(), extra]).unwrap();
        prop_assert!(to_dp(&a, lo).unwrap().epsilon <= to_dp(&bigger, lo).unwrap().epsilon);
    }

    #[test]
    fn exhaustion_is_monotone(costs in proptest::collection::vec(curve(&OrderGrid::default()), 1..30), eps in 1.0f64..40.0) {
        let g = OrderGrid::default();
        let mut ledger = BudgetLedger::new(&g, PrivacyBudget::new(eps, 1e-5).unwrap()).unwrap();
        let mut was = false;
        let mut prev = ledger.accumulated().clone();
        for c in &costs {
            let now = ledger.charge(c).unwrap();
            prop_assert!(!was || now);
            was = now;
            for (p, q) in prev.eps().iter().zip(ledger.accumulated().eps()) {
                prop_assert!(q >= p);
            }
            prev = ledger.accumulated().clone();
        }
    }

    #[test]
    fn q_is_a_probability_and_falls_with_gap(rest in proptest::collection::vec(0.0f64..40.0, 1..8), top in 40.0f64..80.0, extra in 0.1f64..30.0, sigma in 1.0f64..20.0) {
        let mut counts = vec![top];
        counts.extend(&rest);
        let r = gap_bound_q(&counts, sigma).unwrap();
        prop_assert!((0.0..=1.0).contains(&r.q));
        prop_assert!(r.gap >= 0.0);
        counts[0] += extra;
        let wider = gap_bound_q(&counts, sigma).unwrap();
        prop_assert!(wider.q <= r.q);
    }

    #[test]
    fn rank_metrics_ignore_monotone_transforms(data in proptest::collection::vec((0u8..6, any::<bool>()), 2..40)) {
        let scores: Vec<f64> = data.iter().map(|(s, _)| f64::from(*s)).collect();
        let truth: Vec<bool> = data.iter().map(|(_, t)| *t).collect();
        let warped: Vec<f64> = scores.iter().map(|s| (s * 0.7).exp() - 3.0).collect();
        let a = auc(&scores, &truth).unwrap();
        prop_assert_eq!(a, auc(&warped, &truth).unwrap());
        prop_assert_eq!(average_precision(&scores, &truth).unwrap(), average_precision(&warped, &truth).unwrap());
        if let Some(a) = a {
            prop_assert!((0.0..=1.0).contains(&a));
        }
    }
}
