use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mechanisms::{BallotMatrix, MechanismKind, PowersetHistogram};

/// Noise-free gaps: `|V¹_i − V⁰_i|` per label for Binary and τ voting (on the
/// unclipped ballots), `n₁ − n₂` of the outcome histogram for Powerset.
pub fn raw_gaps(stream: &[BallotMatrix], kind: MechanismKind) -> Vec<f64> {
    let mut gaps = Vec::new();
    for b in stream {
        match kind {
            MechanismKind::Powerset => gaps.push(PowersetHistogram::from_ballots(b).gap() as f64),
            MechanismKind::Binary | MechanismKind::Tau => {
                let n = b.n() as f64;
                gaps.extend(b.positive_counts().into_iter().map(|c| (2.0 * c as f64 - n).abs()));
            }
        }
    }
    gaps
}

/// `(x, F(x))` at each distinct value, `F(x)` the fraction of samples `≤ x`.
pub fn empirical_cdf(samples: &[f64]) -> Vec<(f64, f64)> {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (i, &x) in sorted.iter().enumerate() {
        let f = (i + 1) as f64 / n;
        match out.last_mut() {
            Some(last) if last.0 == x => last.1 = f,
            _ => out.push((x, f)),
        }
    }
    out
}

pub fn gap_cdf(stream: &[BallotMatrix], kind: MechanismKind) -> Vec<(f64, f64)> {
    empirical_cdf(&raw_gaps(stream, kind))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DependencyMode {
    /// `P(label j = 1 | label i = 1)`.
    Positive,
    /// `P(label j = 0 | label i = 0)`.
    Negative,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DependencyMatrix {
    pub mode: DependencyMode,
    /// Row `i`, column `j`; `None` where label `i` never takes the conditioning value.
    pub entries: Vec<Vec<Option<f64>>>,
}

pub fn dependency_matrix(labels: &[Vec<bool>], mode: DependencyMode) -> Result<DependencyMatrix> {
    let k = labels.first().map(Vec::len).ok_or_else(|| Error::param("need at least one label row"))?;
    if labels.iter().any(|r| r.len() != k) {
        return Err(Error::param("label rows differ in length"));
    }
    let target = mode == DependencyMode::Positive;
    let entries = (0..k)
        .map(|i| {
            let rows: Vec<&Vec<bool>> = labels.iter().filter(|r| r[i] == target).collect();
            (0..k)
                .map(|j| {
                    (!rows.is_empty())
                        .then(|| rows.iter().filter(|r| r[j] == target).count() as f64 / rows.len() as f64)
                })
                .collect()
        })
        .collect();
    Ok(DependencyMatrix { mode, entries })
}
