use super::BallotMatrix;

/// Bit `i` is set iff strictly more than `threshold` voters selected candidate `i`.
pub fn deterministic_election(ballots: &BallotMatrix, threshold: f64) -> Vec<bool> {
    ballots.positive_counts().into_iter().map(|c| c as f64 > threshold).collect()
}
