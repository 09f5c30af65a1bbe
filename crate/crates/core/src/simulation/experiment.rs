use super::LabeledQuery;
use crate::accountant::{BudgetLedger, DpGuarantee, OrderGrid, PrivacyBudget};
use crate::error::{Error, Result};
use crate::mechanisms::{aggregate, aggregate_labels, MechanismConfig, MechanismKind, QueryOutcome};
use crate::metrics::{evaluate, MetricReport};
use crate::noise::NoiseStream;

#[derive(Clone, Debug, PartialEq)]
pub struct QueryRecord {
    pub query_id: u64,
    pub outcome: QueryOutcome,
    /// Spent ε after this query was charged.
    pub eps_dp_so_far: f64,
}

#[derive(Clone, Debug)]
pub struct ExperimentResult {
    /// Charged queries with at least one released label.
    pub answered: usize,
    /// Every query that was released and charged, in stream order.
    pub records: Vec<QueryRecord>,
    /// The loop stopped at a query whose cost would overrun the budget.
    pub exhausted: bool,
    pub final_guarantee: DpGuarantee,
    pub ledger: BudgetLedger,
    /// Scores of the charged queries; `None` when nothing was charged.
    pub metrics: Option<MetricReport>,
}

fn check_stream(stream: &[LabeledQuery]) -> Result<()> {
    if let Some(first) = stream.first() {
        let k = first.ballots.k();
        if let Some(q) = stream.iter().find(|q| q.ballots.k() != k || q.truth.len() != k) {
            return Err(Error::param(format!("query {} does not have {k} labels", q.query_id)));
        }
    }
    Ok(())
}

fn run_loop(
    stream: &[LabeledQuery],
    cfg: &MechanismConfig,
    budget: PrivacyBudget,
    grid: &OrderGrid,
    mut step: impl FnMut(&LabeledQuery) -> Result<QueryOutcome>,
) -> Result<ExperimentResult> {
    cfg.validate()?;
    if cfg.oracle_mode() {
        return Err(Error::param("oracle mode (sigma_g = 0) has no finite privacy cost to budget"));
    }
    check_stream(stream)?;
    let mut ledger = BudgetLedger::new(grid, budget)?;
    let mut records = Vec::new();
    let mut exhausted = false;

    for q in stream {
        let outcome = step(q)?;
        if ledger.would_exceed(&outcome.cost)? {
            exhausted = true;
            break;
        }
        ledger.charge(&outcome.cost)?;
        records.push(QueryRecord { query_id: q.query_id, outcome, eps_dp_so_far: ledger.spent().epsilon });
    }

    let metrics = if records.is_empty() {
        None
    } else {
        let predictions: Vec<_> = records.iter().map(|r| r.outcome.released.clone()).collect();
        let truth: Vec<_> = stream[..records.len()].iter().map(|q| q.truth.clone()).collect();
        Some(evaluate(&predictions, &truth)?)
    };
    Ok(ExperimentResult {
        answered: records.iter().filter(|r| r.outcome.answered).count(),
        records,
        exhausted,
        final_guarantee: ledger.spent(),
        ledger,
        metrics,
    })
}

/// Answers queries in order until the next one would overrun the budget.
pub fn run_experiment(
    stream: &[LabeledQuery],
    cfg: &MechanismConfig,
    budget: PrivacyBudget,
    grid: &OrderGrid,
    seed: u64,
) -> Result<ExperimentResult> {
    run_loop(stream, cfg, budget, grid, |q| aggregate(&q.ballots, cfg, &NoiseStream::new(seed, q.query_id), grid))
}

/// Releases the pivot label first. A negative pivot sets every other label
/// negative for free; a positive pivot queries the rest; an abstaining pivot
/// leaves the rest abstaining.
pub fn answer_with_dependencies(
    stream: &[LabeledQuery],
    cfg: &MechanismConfig,
    budget: PrivacyBudget,
    grid: &OrderGrid,
    seed: u64,
    pivot: usize,
) -> Result<ExperimentResult> {
    if cfg.kind == MechanismKind::Powerset {
        return Err(Error::param("dependency planning needs a binary or tau mechanism"));
    }
    if let Some(q) = stream.first() {
        if pivot >= q.ballots.k() {
            return Err(Error::param(format!("pivot {pivot} out of range for k={}", q.ballots.k())));
        }
    }
    run_loop(stream, cfg, budget, grid, |q| {
        let noise = NoiseStream::new(seed, q.query_id);
        let mut out = aggregate_labels(&q.ballots, cfg, &noise, grid, &[pivot])?;
        match out.released[pivot] {
            Some(false) => {
                out.released.iter_mut().for_each(|r| *r = Some(false));
            }
            Some(true) => {
                let rest: Vec<usize> = (0..q.ballots.k()).filter(|&i| i != pivot).collect();
                if !rest.is_empty() {
                    let more = aggregate_labels(&q.ballots, cfg, &noise, grid, &rest)?;
                    out.cost = out.cost.checked_add(&more.cost)?;
                    for &i in &rest {
                        out.released[i] = more.released[i];
                        out.diagnostics.gate_passed[i] = more.diagnostics.gate_passed[i];
                        out.diagnostics.data_dependent[i] = more.diagnostics.data_dependent[i];
                    }
                }
            }
            None => {}
        }
        Ok(out)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::accountant::{gaussian_rdp, to_dp};
    use crate::mechanisms::BallotMatrix;
    use crate::simulation::{generate_votes, SimulationConfig};

    fn constant_stream(row: Vec<u8>, t: usize, m: usize) -> Vec<LabeledQuery> {
        let truth = row.iter().map(|&b| b == 1).collect::<Vec<_>>();
        (0..m as u64)
            .map(|query_id| LabeledQuery {
                query_id,
                ballots: BallotMatrix::from_rows(&vec![row.clone(); t]).unwrap(),
                truth: truth.clone(),
            })
            .collect()
    }

    /// Largest number of identical charges that fit the budget.
    fn capacity(cost: &crate::accountant::RdpCurve, budget: PrivacyBudget) -> usize {
        let mut n = 0;
        while to_dp(&cost.scaled((n + 1) as f64).unwrap(), budget.delta).unwrap().epsilon <= budget.epsilon {
            n += 1;
        }
        n
    }

    #[test]
    fn stops_at_capacity() {
        // split votes: the data-independent price applies to every query
        let stream = constant_stream(vec![1, 0, 1], 1, 400);
        let grid = OrderGrid::default();
        let cfg = MechanismConfig::binary(7.0);
        let budget = PrivacyBudget::new(5.0, 1e-5).unwrap();
        let r = run_experiment(&stream, &cfg, budget, &grid, 3).unwrap();
        let per_query = gaussian_rdp(6f64.sqrt(), 7.0, &grid).unwrap();
        assert_eq!(r.answered, capacity(&per_query, budget));
        assert!(r.exhausted);
        assert!(r.final_guarantee.epsilon <= 5.0);
    }

    #[test]
    fn tiny_budget_answers_nothing() {
        let stream = generate_votes(&SimulationConfig::uniform(50, 20, 0.5, 10, 1)).unwrap();
        let budget = PrivacyBudget::new(1.0, 1e-5).unwrap();
        let r = run_experiment(&stream, &MechanismConfig::binary(7.0), budget, &OrderGrid::default(), 1).unwrap();
        assert_eq!(r.answered, 0);
        assert!(r.metrics.is_none());
    }

    #[test]
    fn larger_budget_answers_more() {
        let stream = generate_votes(&SimulationConfig::uniform(50, 5, 0.5, 300, 4)).unwrap();
        let grid = OrderGrid::default();
        let cfg = MechanismConfig::binary(7.0);
        let run = |eps| run_experiment(&stream, &cfg, PrivacyBudget::new(eps, 1e-6).unwrap(), &grid, 8).unwrap();
        let (a, b) = (run(10.0), run(20.0));
        assert!(b.answered > a.answered);
        assert_eq!(a.records[..], b.records[..a.records.len()]);
    }

    #[test]
    fn oracle_mode_is_refused() {
        let stream = constant_stream(vec![1], 3, 2);
        let budget = PrivacyBudget::new(1.0, 1e-5).unwrap();
        assert!(run_experiment(&stream, &MechanismConfig::binary(0.0), budget, &OrderGrid::default(), 0).is_err());
    }

    #[test]
    fn negative_pivot_costs_one_label() {
        let stream = constant_stream(vec![0, 1, 1, 0], 50, 6000);
        let grid = OrderGrid::default();
        let cfg = MechanismConfig::binary(7.0);
        let budget = PrivacyBudget::new(1.0, 1e-5).unwrap();
        let dep = answer_with_dependencies(&stream, &cfg, budget, &grid, 1, 0).unwrap();
        let pivot_only = aggregate_labels(&stream[0].ballots, &cfg, &NoiseStream::new(1, 0), &grid, &[0]).unwrap();
        assert!(dep.exhausted);
        assert_eq!(dep.answered, capacity(&pivot_only.cost, budget));
        for r in &dep.records {
            assert_eq!(r.outcome.released, vec![Some(false); 4]);
        }
        let all = run_experiment(&stream, &cfg, budget, &grid, 1).unwrap();
        assert!(dep.answered > 2 * all.answered, "{} vs {}", dep.answered, all.answered);
    }

    #[test]
    fn positive_pivot_matches_plain_run() {
        let stream = constant_stream(vec![1, 0, 1], 1, 200);
        let grid = OrderGrid::default();
        let cfg = MechanismConfig::binary(3.0);
        let budget = PrivacyBudget::new(3.0, 1e-5).unwrap();
        // σ=3 with one voter: the pivot is released positive only some of the time
        let dep = answer_with_dependencies(&stream, &cfg, budget, &grid, 2, 0).unwrap();
        let plain = run_experiment(&stream, &cfg, budget, &grid, 2).unwrap();
        for (d, p) in dep.records.iter().zip(&plain.records) {
            if d.outcome.released[0] == Some(true) {
                assert_eq!(d.outcome.released, p.outcome.released);
            }
        }
        assert!(dep.answered >= plain.answered);
        let b = BallotMatrix::from_rows(&[vec![1, 0]]).unwrap();
        let bad = vec![LabeledQuery { query_id: 0, ballots: b, truth: vec![true, false] }];
        assert!(answer_with_dependencies(&bad, &cfg, budget, &grid, 0, 2).is_err());
        assert!(answer_with_dependencies(&bad, &MechanismConfig::powerset(3.0), budget, &grid, 0, 0).is_err());
    }
}
