//! Per-label scores of released vectors against ground truth.
//!
//! ⊥ entries are excluded from scoring. Undefined per-label values are `None`
//! and are left out of the macro averages.

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn record(&mut self, predicted: bool, truth: bool) {
        match (predicted, truth) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, false) => self.tn += 1,
            (false, true) => self.fn_ += 1,
        }
    }

    pub fn scored(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn accuracy(&self) -> Option<f64> {
        let n = self.scored();
        (n > 0).then(|| (self.tp + self.tn) as f64 / n as f64)
    }

    /// Mean of recall and specificity; with one class absent, the defined half.
    pub fn balanced_accuracy(&self) -> Option<f64> {
        let pos = self.tp + self.fn_;
        let neg = self.tn + self.fp;
        let recall = (pos > 0).then(|| self.tp as f64 / pos as f64);
        let specificity = (neg > 0).then(|| self.tn as f64 / neg as f64);
        match (recall, specificity) {
            (Some(r), Some(s)) => Some(0.5 * (r + s)),
            (r, s) => r.or(s),
        }
    }
}

fn check_shape<T, U>(predictions: &[Vec<T>], truth: &[Vec<U>]) -> Result<usize> {
    if predictions.len() != truth.len() {
        return Err(Error::param(format!("{} predictions for {} ground-truth rows", predictions.len(), truth.len())));
    }
    let k = truth.first().map_or(0, Vec::len);
    if predictions.iter().any(|r| r.len() != k) || truth.iter().any(|r| r.len() != k) {
        return Err(Error::param("rows have inconsistent label counts"));
    }
    Ok(k)
}

/// Confusion counts per label over `m` examples (rows), skipping ⊥.
pub fn confusion(predictions: &[Vec<Option<bool>>], truth: &[Vec<bool>]) -> Result<Vec<ConfusionCounts>> {
    let k = check_shape(predictions, truth)?;
    let mut counts = vec![ConfusionCounts::default(); k];
    for (pred, t) in predictions.iter().zip(truth) {
        for (i, (p, &y)) in pred.iter().zip(t).enumerate() {
            if let Some(p) = p {
                counts[i].record(*p, y);
            }
        }
    }
    Ok(counts)
}

/// Per-label values with their unweighted mean over the defined ones.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LabelScores {
    pub per_label: Vec<Option<f64>>,
    pub macro_avg: Option<f64>,
}

impl LabelScores {
    pub fn new(per_label: Vec<Option<f64>>) -> Self {
        let defined: Vec<f64> = per_label.iter().flatten().copied().collect();
        let macro_avg = (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64);
        LabelScores { per_label, macro_avg }
    }
}

pub fn accuracy(counts: &[ConfusionCounts]) -> LabelScores {
    LabelScores::new(counts.iter().map(ConfusionCounts::accuracy).collect())
}

pub fn balanced_accuracy(counts: &[ConfusionCounts]) -> LabelScores {
    LabelScores::new(counts.iter().map(ConfusionCounts::balanced_accuracy).collect())
}

/// 1-based ranks with ties given their mean rank.
fn midranks(scores: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut ranks = vec![0.0; scores.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        let mean = (start + end + 1) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = mean;
        }
        start = end;
    }
    ranks
}

/// Area under the ROC curve via the Mann–Whitney statistic.
pub fn auc(scores: &[f64], truth: &[bool]) -> Result<Option<f64>> {
    if scores.len() != truth.len() {
        return Err(Error::param("scores and truth differ in length"));
    }
    let positives = truth.iter().filter(|&&t| t).count();
    let negatives = truth.len() - positives;
    if positives == 0 || negatives == 0 {
        return Ok(None);
    }
    let ranks = midranks(scores);
    let rank_sum: f64 = ranks.iter().zip(truth).filter(|(_, &t)| t).map(|(r, _)| r).sum();
    let p = positives as f64;
    Ok(Some((rank_sum - p * (p + 1.0) / 2.0) / (p * negatives as f64)))
}

/// Area under the precision-recall curve, stepping through score thresholds
/// from the highest down. Tied scores enter together.
pub fn average_precision(scores: &[f64], truth: &[bool]) -> Result<Option<f64>> {
    if scores.len() != truth.len() {
        return Err(Error::param("scores and truth differ in length"));
    }
    let positives = truth.iter().filter(|&&t| t).count();
    if positives == 0 {
        return Ok(None);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let (mut seen, mut hits, mut ap) = (0usize, 0usize, 0.0);
    let mut start = 0;
    while start < order.len() {
        let mut end = start;
        let mut group_hits = 0;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            group_hits += usize::from(truth[order[end]]);
            end += 1;
        }
        seen += end - start;
        hits += group_hits;
        ap += (group_hits as f64 / positives as f64) * (hits as f64 / seen as f64);
        start = end;
    }
    Ok(Some(ap))
}

/// Collects the non-⊥ `(score, truth)` pairs of one label.
fn label_column(predictions: &[Vec<Option<bool>>], truth: &[Vec<bool>], i: usize) -> (Vec<f64>, Vec<bool>) {
    predictions.iter().zip(truth).filter_map(|(p, t)| p[i].map(|v| (f64::from(u8::from(v)), t[i]))).unzip()
}

/// Mean of per-label average precision over labels where it is defined.
pub fn mean_average_precision(predictions: &[Vec<Option<bool>>], truth: &[Vec<bool>]) -> Result<LabelScores> {
    let k = check_shape(predictions, truth)?;
    let per_label = (0..k)
        .map(|i| {
            let (s, t) = label_column(predictions, truth, i);
            average_precision(&s, &t)
        })
        .collect::<Result<Vec<_>>>()?;
    if per_label.iter().all(Option::is_none) && k > 0 {
        return Err(Error::param("no positive examples for any label"));
    }
    Ok(LabelScores::new(per_label))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PerLabelMetrics {
    pub acc: Vec<Option<f64>>,
    pub bac: Vec<Option<f64>>,
    pub auc: Vec<Option<f64>>,
    pub map: Vec<Option<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MacroMetrics {
    pub acc: Option<f64>,
    pub bac: Option<f64>,
    pub auc: Option<f64>,
    pub map: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricReport {
    pub per_label: PerLabelMetrics,
    #[serde(rename = "macro")]
    pub macro_avg: MacroMetrics,
    /// Scored (non-⊥) label entries over all label entries.
    pub answered_fraction: f64,
}

/// All metrics at once, with the released bits doubling as scores.
pub fn evaluate(predictions: &[Vec<Option<bool>>], truth: &[Vec<bool>]) -> Result<MetricReport> {
    let k = check_shape(predictions, truth)?;
    let counts = confusion(predictions, truth)?;
    let acc = accuracy(&counts);
    let bac = balanced_accuracy(&counts);
    let mut aucs = Vec::with_capacity(k);
    let mut aps = Vec::with_capacity(k);
    for i in 0..k {
        let (s, t) = label_column(predictions, truth, i);
        aucs.push(auc(&s, &t)?);
        aps.push(average_precision(&s, &t)?);
    }
    let aucs = LabelScores::new(aucs);
    let aps = LabelScores::new(aps);

    let total = predictions.len() * k;
    let scored: u64 = counts.iter().map(ConfusionCounts::scored).sum();
    Ok(MetricReport {
        macro_avg: MacroMetrics { acc: acc.macro_avg, bac: bac.macro_avg, auc: aucs.macro_avg, map: aps.macro_avg },
        per_label: PerLabelMetrics { acc: acc.per_label, bac: bac.per_label, auc: aucs.per_label, map: aps.per_label },
        answered_fraction: if total == 0 { 0.0 } else { scored as f64 / total as f64 },
    })
}
