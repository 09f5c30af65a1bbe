use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `n` voters × `k` candidates, one 0/1 ballot per voter.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BallotMatrix {
    n: usize,
    k: usize,
    bits: Vec<u8>,
}

impl BallotMatrix {
    pub fn new(k: usize, rows: &[Vec<u8>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyBallots);
        }
        if k == 0 {
            return Err(Error::InvalidBallot("ballots need at least one candidate".into()));
        }
        let mut bits = Vec::with_capacity(rows.len() * k);
        for (j, row) in rows.iter().enumerate() {
            if row.len() != k {
                return Err(Error::InvalidBallot(format!("ballot {j} has {} entries, expected {k}", row.len())));
            }
            if let Some(b) = row.iter().find(|&&b| b > 1) {
                return Err(Error::InvalidBallot(format!("ballot {j} has non-binary entry {b}")));
            }
            bits.extend_from_slice(row);
        }
        Ok(BallotMatrix { n: rows.len(), k, bits })
    }

    /// Builds from rows, taking `k` from the first row.
    pub fn from_rows(rows: &[Vec<u8>]) -> Result<Self> {
        let k = rows.first().map(Vec::len).ok_or(Error::EmptyBallots)?;
        BallotMatrix::new(k, rows)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn row(&self, j: usize) -> &[u8] {
        &self.bits[j * self.k..(j + 1) * self.k]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u8]> {
        self.bits.chunks_exact(self.k)
    }

    /// Positive votes per candidate.
    pub fn positive_counts(&self) -> Vec<u64> {
        let mut counts = vec![0u64; self.k];
        for row in self.rows() {
            for (c, &b) in counts.iter_mut().zip(row) {
                *c += u64::from(b);
            }
        }
        counts
    }

    /// Copy with ballot `j` replaced.
    pub fn with_row(&self, j: usize, row: &[u8]) -> BallotMatrix {
        assert_eq!(row.len(), self.k);
        let mut out = self.clone();
        out.bits[j * self.k..(j + 1) * self.k].copy_from_slice(row);
        out
    }

    /// Restriction to the given candidate columns, in that order.
    pub fn select_labels(&self, labels: &[usize]) -> Result<BallotMatrix> {
        if labels.is_empty() {
            return Err(Error::param("label selection is empty"));
        }
        if let Some(&bad) = labels.iter().find(|&&i| i >= self.k) {
            return Err(Error::param(format!("label {bad} out of range for k={}", self.k)));
        }
        let bits = self.rows().flat_map(|row| labels.iter().map(move |&i| row[i])).collect();
        Ok(BallotMatrix { n: self.n, k: labels.len(), bits })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClipNorm {
    L1,
    L2,
}

impl ClipNorm {
    pub fn norm(self, row: &[f64]) -> f64 {
        match self {
            ClipNorm::L1 => row.iter().map(|v| v.abs()).sum(),
            ClipNorm::L2 => row.iter().map(|v| v * v).sum::<f64>().sqrt(),
        }
    }
}

/// Ballots scaled row-wise by `min(1, τ/‖b_j‖)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ClippedBallots {
    n: usize,
    k: usize,
    values: Vec<f64>,
    pub tau: f64,
    pub norm: ClipNorm,
}

fn clip_row(row: &mut [f64], tau: f64, norm: ClipNorm) {
    let length = norm.norm(row);
    if length > tau {
        let scale = tau / length;
        row.iter_mut().for_each(|v| *v *= scale);
    }
}

pub fn clip(ballots: &BallotMatrix, tau: f64, norm: ClipNorm) -> Result<ClippedBallots> {
    if !(tau > 0.0) {
        return Err(Error::param(format!("clip bound tau={tau} must be > 0")));
    }
    let mut values: Vec<f64> = ballots.bits.iter().map(|&b| f64::from(b)).collect();
    for row in values.chunks_exact_mut(ballots.k) {
        clip_row(row, tau, norm);
    }
    Ok(ClippedBallots { n: ballots.n, k: ballots.k, values, tau, norm })
}

impl ClippedBallots {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.values[j * self.k..(j + 1) * self.k]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.k)
    }

    /// Clips again with a (possibly different) bound and norm.
    pub fn reclip(&self, tau: f64, norm: ClipNorm) -> Result<ClippedBallots> {
        if !(tau > 0.0) {
            return Err(Error::param(format!("clip bound tau={tau} must be > 0")));
        }
        let mut values = self.values.clone();
        for row in values.chunks_exact_mut(self.k) {
            clip_row(row, tau, norm);
        }
        Ok(ClippedBallots { n: self.n, k: self.k, values, tau, norm })
    }
}

/// Per-candidate positive and negative vote mass.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LabelHistogram {
    pub positive: Vec<f64>,
    pub negative: Vec<f64>,
}

impl LabelHistogram {
    pub fn from_ballots(ballots: &BallotMatrix) -> Self {
        let n = ballots.n as f64;
        let positive: Vec<f64> = ballots.positive_counts().into_iter().map(|c| c as f64).collect();
        let negative = positive.iter().map(|p| n - p).collect();
        LabelHistogram { positive, negative }
    }

    /// Negative mass is `n` minus the clipped positive mass.
    pub fn from_clipped(clipped: &ClippedBallots) -> Self {
        let mut positive = vec![0.0; clipped.k];
        for row in clipped.rows() {
            for (p, v) in positive.iter_mut().zip(row) {
                *p += v;
            }
        }
        let n = clipped.n as f64;
        let negative = positive.iter().map(|p| n - p).collect();
        LabelHistogram { positive, negative }
    }

    pub fn k(&self) -> usize {
        self.positive.len()
    }
}

/// Sparse histogram over the outcome vectors that were actually cast.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PowersetHistogram {
    k: usize,
    total: u64,
    counts: BTreeMap<Vec<u8>, u64>,
}

impl PowersetHistogram {
    pub fn from_ballots(ballots: &BallotMatrix) -> Self {
        let mut counts = BTreeMap::new();
        for row in ballots.rows() {
            *counts.entry(row.to_vec()).or_insert(0) += 1;
        }
        PowersetHistogram { k: ballots.k, total: ballots.n as u64, counts }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// Cast outcomes with their counts, in lexicographic outcome order.
    pub fn bins(&self) -> impl Iterator<Item = (&[u8], u64)> {
        self.counts.iter().map(|(k, &v)| (k.as_slice(), v))
    }

    pub fn cast_outcomes(&self) -> usize {
        self.counts.len()
    }

    pub fn count_of(&self, outcome: &[u8]) -> u64 {
        self.counts.get(outcome).copied().unwrap_or(0)
    }

    /// Number of the 2^k outcomes nobody voted for.
    pub fn uncast_outcomes(&self) -> f64 {
        2f64.powi(self.k as i32) - self.counts.len() as f64
    }

    /// `n₁ − n₂` over all 2^k outcomes (uncast outcomes count zero).
    pub fn gap(&self) -> u64 {
        let mut top = [0u64; 2];
        for &c in self.counts.values() {
            if c > top[0] {
                top = [c, top[0]];
            } else if c > top[1] {
                top[1] = c;
            }
        }
        top[0] - top[1]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[u8]]) -> BallotMatrix {
        BallotMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn construction_checks() {
        assert!(matches!(BallotMatrix::from_rows(&[]), Err(Error::EmptyBallots)));
        assert!(BallotMatrix::new(0, &[vec![]]).is_err());
        assert!(BallotMatrix::from_rows(&[vec![1, 0], vec![1]]).is_err());
        assert!(BallotMatrix::from_rows(&[vec![2, 0]]).is_err());
        let b = m(&[&[1, 0], &[1, 1], &[0, 0]]);
        assert_eq!((b.n(), b.k()), (3, 2));
        assert_eq!(b.positive_counts(), vec![2, 1]);
        assert_eq!(b.select_labels(&[1]).unwrap().positive_counts(), vec![1]);
        assert!(b.select_labels(&[2]).is_err());
    }

    #[test]
    fn clip_examples() {
        let c = clip(&m(&[&[1, 1, 1, 1]]), 1.0, ClipNorm::L2).unwrap();
        assert_eq!(c.row(0), &[0.5; 4]);
        let c = clip(&m(&[&[1, 0, 0]]), 2.0, ClipNorm::L2).unwrap();
        assert_eq!(c.row(0), &[1.0, 0.0, 0.0]);
        let c = clip(&m(&[&[1, 1, 1]]), 1.0, ClipNorm::L1).unwrap();
        for v in c.row(0) {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
        let c = clip(&m(&[&[0, 0, 0]]), 0.5, ClipNorm::L2).unwrap();
        assert_eq!(c.row(0), &[0.0; 3]);
        assert!(clip(&m(&[&[1]]), 0.0, ClipNorm::L2).is_err());
    }

    #[test]
    fn clipped_histogram_conserves_mass() {
        let b = m(&[&[1, 1, 1, 1], &[1, 0, 0, 0], &[0, 0, 0, 0]]);
        let h = LabelHistogram::from_clipped(&clip(&b, 1.0, ClipNorm::L2).unwrap());
        assert_eq!(h.positive, vec![1.5, 0.5, 0.5, 0.5]);
        for (p, q) in h.positive.iter().zip(&h.negative) {
            assert_eq!(p + q, 3.0);
        }
    }

    #[test]
    fn powerset_histogram_is_sparse() {
        let b = m(&[&[0, 1], &[0, 1], &[1, 1]]);
        let h = PowersetHistogram::from_ballots(&b);
        assert_eq!(h.cast_outcomes(), 2);
        assert_eq!(h.count_of(&[0, 1]), 2);
        assert_eq!(h.count_of(&[1, 0]), 0);
        assert_eq!(h.uncast_outcomes(), 2.0);
        assert_eq!(h.gap(), 1);
        assert_eq!(h.total(), 3);
        let unanimous = PowersetHistogram::from_ballots(&m(&[&[1, 0], &[1, 0]]));
        assert_eq!(unanimous.gap(), 2);
    }
}
