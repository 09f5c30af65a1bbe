//! Synthetic teacher ensembles and budgeted labelling runs.

mod diagnostics;
mod experiment;
mod predictors;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mechanisms::BallotMatrix;
use crate::noise::{derived_rng, Purpose};

pub use diagnostics::{dependency_matrix, empirical_cdf, gap_cdf, raw_gaps, DependencyMatrix, DependencyMode};
pub use experiment::{answer_with_dependencies, run_experiment, ExperimentResult, QueryRecord};
pub use predictors::{binomial_pmf, expected_eps_predictors, EpsPredictors};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Correlation {
    Independent,
    /// Labels `1..d` copy label 0.
    Block(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub teachers: usize,
    pub labels: usize,
    /// Per-label probability of a positive vote.
    pub probabilities: Vec<f64>,
    pub correlation: Correlation,
    pub queries: usize,
    pub seed: u64,
}

impl SimulationConfig {
    pub fn uniform(teachers: usize, labels: usize, p: f64, queries: usize, seed: u64) -> Self {
        SimulationConfig {
            teachers,
            labels,
            probabilities: vec![p; labels],
            correlation: Correlation::Independent,
            queries,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.teachers == 0 || self.labels == 0 {
            return Err(Error::param("need at least one teacher and one label"));
        }
        if self.probabilities.len() != self.labels {
            return Err(Error::param(format!("{} probabilities for {} labels", self.probabilities.len(), self.labels)));
        }
        if let Some(p) = self.probabilities.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::param(format!("probability {p} outside [0, 1]")));
        }
        if let Correlation::Block(d) = self.correlation {
            if d == 0 || d > self.labels {
                return Err(Error::param(format!("block size {d} must lie in 1..={}", self.labels)));
            }
        }
        Ok(())
    }
}

/// One simulated query with the generating distribution's majority bits.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledQuery {
    pub query_id: u64,
    pub ballots: BallotMatrix,
    pub truth: Vec<bool>,
}

pub fn generate_votes(cfg: &SimulationConfig) -> Result<Vec<LabeledQuery>> {
    cfg.validate()?;
    let copies = match cfg.correlation {
        Correlation::Independent => 1,
        Correlation::Block(d) => d,
    };
    let mut truth: Vec<bool> = cfg.probabilities.iter().map(|&p| p > 0.5).collect();
    for i in 1..copies {
        truth[i] = truth[0];
    }

    (0..cfg.queries as u64)
        .map(|query_id| {
            let mut rng = derived_rng(cfg.seed, &[query_id, Purpose::Votes as u64]);
            let rows: Vec<Vec<u8>> = (0..cfg.teachers)
                .map(|_| {
                    let mut row: Vec<u8> = cfg.probabilities.iter().map(|&p| u8::from(rng.random_bool(p))).collect();
                    for i in 1..copies {
                        row[i] = row[0];
                    }
                    row
                })
                .collect();
            Ok(LabeledQuery { query_id, ballots: BallotMatrix::new(cfg.labels, &rows)?, truth: truth.clone() })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn certain_votes() {
        let q = generate_votes(&SimulationConfig::uniform(5, 3, 1.0, 4, 1)).unwrap();
        assert_eq!(q.len(), 4);
        for x in &q {
            assert!(x.ballots.rows().all(|r| r == [1, 1, 1]));
            assert_eq!(x.truth, vec![true; 3]);
        }
    }

    #[test]
    fn fair_coin_moments() {
        let (t, m) = (50usize, 1000usize);
        let q = generate_votes(&SimulationConfig::uniform(t, 4, 0.5, m, 9)).unwrap();
        let sd = (t as f64 * 0.25).sqrt();
        for i in 0..4 {
            let mean = q.iter().map(|x| x.ballots.positive_counts()[i] as f64).sum::<f64>() / m as f64;
            assert!((mean - 25.0).abs() < 3.0 * sd / (m as f64).sqrt(), "label {i}: {mean}");
        }
    }

    #[test]
    fn full_block_is_all_or_nothing() {
        let mut cfg = SimulationConfig::uniform(20, 5, 0.5, 30, 2);
        cfg.correlation = Correlation::Block(5);
        for x in generate_votes(&cfg).unwrap() {
            assert!(x.ballots.rows().all(|r| r == [0; 5] || r == [1; 5]));
        }
    }

    #[test]
    fn reproducible_and_validated() {
        let cfg = SimulationConfig::uniform(7, 3, 0.3, 5, 11);
        assert_eq!(generate_votes(&cfg).unwrap(), generate_votes(&cfg).unwrap());
        let other = SimulationConfig { seed: 12, ..cfg.clone() };
        assert_ne!(generate_votes(&cfg).unwrap(), generate_votes(&other).unwrap());
        assert!(SimulationConfig::uniform(7, 3, 1.3, 5, 11).validate().is_err());
        let bad_block = SimulationConfig { correlation: Correlation::Block(4), ..cfg };
        assert!(bad_block.validate().is_err());
    }
}
