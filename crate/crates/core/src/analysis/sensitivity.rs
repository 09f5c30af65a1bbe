//! Exhaustive sensitivity search over small ballot spaces.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mechanisms::BallotMatrix;

/// Which pairs of ballot sets count as neighbours.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Adjacency {
    /// One ballot replaced by any other ballot.
    Substitute,
    /// One ballot replaced by the empty ballot (add/remove a voter).
    NullSwap,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SearchLimits {
    pub max_voters: usize,
    pub max_candidates: usize,
    /// Cap on `n·k`, the exponent of the enumerated space.
    pub max_cells: usize,
}

impl Default for SearchLimits {
    fn default() -> Self {
        SearchLimits { max_voters: 4, max_candidates: 4, max_cells: 16 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SensitivityReport {
    pub p: f64,
    pub value: f64,
    /// `(X, X′)`, differing only in ballot `row`.
    pub witness: (BallotMatrix, BallotMatrix),
    pub row: usize,
}

pub fn lp_norm(v: &[f64], p: f64) -> f64 {
    if p == f64::INFINITY {
        v.iter().fold(0.0, |m, x| m.max(x.abs()))
    } else if p == 1.0 {
        v.iter().map(|x| x.abs()).sum()
    } else if p == 2.0 {
        v.iter().map(|x| x * x).sum::<f64>().sqrt()
    } else {
        v.iter().map(|x| x.abs().powf(p)).sum::<f64>().powf(1.0 / p)
    }
}

fn matrix_from_index(index: u64, n: usize, k: usize) -> BallotMatrix {
    let rows: Vec<Vec<u8>> = (0..n).map(|j| (0..k).map(|i| ((index >> (j * k + i)) & 1) as u8).collect()).collect();
    BallotMatrix::new(k, &rows).expect("enumerated rows are well-formed")
}

/// Exact `max ‖f(X) − f(X′)‖_p` over every neighbouring pair of `n × k`
/// ballot matrices.
pub fn sensitivity_oracle<F>(
    f: F,
    n: usize,
    k: usize,
    p: f64,
    adjacency: Adjacency,
    limits: SearchLimits,
) -> Result<SensitivityReport>
where
    F: Fn(&BallotMatrix) -> Vec<f64>,
{
    if n == 0 || k == 0 {
        return Err(Error::param("need at least one voter and one candidate"));
    }
    if !(p >= 1.0) {
        return Err(Error::param(format!("norm order {p} must be >= 1")));
    }
    if n > limits.max_voters || k > limits.max_candidates || n * k > limits.max_cells {
        return Err(Error::DomainTooLarge(format!(
            "n={n}, k={k} exceeds limits ({} voters, {} candidates, {} cells)",
            limits.max_voters, limits.max_candidates, limits.max_cells
        )));
    }

    let cells = n * k;
    let values: Vec<Vec<f64>> = (0..1u64 << cells).map(|x| f(&matrix_from_index(x, n, k))).collect();
    let row_mask = (1u64 << k) - 1;

    let mut best: Option<(f64, u64, u64, usize)> = None;
    let mut diff = Vec::new();
    for x in 0..1u64 << cells {
        for j in 0..n {
            let shift = j * k;
            let own = (x >> shift) & row_mask;
            let base = x & !(row_mask << shift);
            let alternatives: Box<dyn Iterator<Item = u64>> = match adjacency {
                // each unordered pair once
                Adjacency::Substitute => Box::new(own + 1..=row_mask),
                Adjacency::NullSwap => Box::new((own != 0).then_some(0).into_iter()),
            };
            for alt in alternatives {
                let y = base | (alt << shift);
                let (fx, fy) = (&values[x as usize], &values[y as usize]);
                if fx.len() != fy.len() {
                    return Err(Error::param("function output length varies with input"));
                }
                diff.clear();
                diff.extend(fx.iter().zip(fy).map(|(a, b)| a - b));
                let d = lp_norm(&diff, p);
                if best.is_none_or(|b| d > b.0) {
                    best = Some((d, x, y, j));
                }
            }
        }
    }

    let (value, x, y, row) = best.unwrap_or((0.0, 0, 0, 0));
    Ok(SensitivityReport { p, value, witness: (matrix_from_index(x, n, k), matrix_from_index(y, n, k)), row })
}
