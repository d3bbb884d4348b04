//! Binary-classification metrics. The positive class (+1) is "attack".

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

impl Confusion {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }
}

/// Qubits, circuit layers and parameter counts of a trained model.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Footprint {
    pub qubits: usize,
    pub layers: usize,
    pub classical_params: usize,
    pub quantum_params: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    /// Positive-class F1.
    pub f1: f64,
    pub macro_f1: f64,
    pub specificity: f64,
    pub sensitivity: f64,
    pub mcc: f64,
    pub roc_auc: Option<f64>,
    pub samples: u64,
    pub positives: u64,
    pub negatives: u64,
    pub confusion: Confusion,
    pub footprint: Footprint,
}

pub fn confusion(preds: &[i8], labels: &[i8]) -> Result<Confusion> {
    if preds.len() != labels.len() {
        return Err(Error::DimensionMismatch { expected: labels.len(), got: preds.len() });
    }
    if preds.is_empty() {
        return Err(Error::EmptyInput("confusion: no samples"));
    }
    let mut c = Confusion::default();
    for (&p, &l) in preds.iter().zip(labels) {
        match (p > 0, l > 0) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn accuracy(c: &Confusion) -> f64 {
    ratio(c.tp + c.tn, c.total())
}

pub fn sensitivity(c: &Confusion) -> f64 {
    ratio(c.tp, c.tp + c.fn_)
}

pub fn specificity(c: &Confusion) -> f64 {
    ratio(c.tn, c.tn + c.fp)
}

/// `2tp / (2tp + fp + fn)`.
pub fn f1_positive(c: &Confusion) -> f64 {
    ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn_)
}

/// Mean of the positive- and negative-class F1.
pub fn macro_f1(c: &Confusion) -> f64 {
    let neg = ratio(2 * c.tn, 2 * c.tn + c.fn_ + c.fp);
    (f1_positive(c) + neg) / 2.0
}

/// Matthews correlation, 0 when any marginal is empty.
pub fn mcc(c: &Confusion) -> f64 {
    let (tp, fp, tn, fn_) = (c.tp as f64, c.fp as f64, c.tn as f64, c.fn_ as f64);
    let den = (tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_);
    if den == 0.0 {
        0.0
    } else {
        (tp * tn - fp * fn_) / den.sqrt()
    }
}

fn check_scores(scores: &[f64], labels: &[i8]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch { expected: labels.len(), got: scores.len() });
    }
    if !(labels.iter().any(|&l| l > 0) && labels.iter().any(|&l| l <= 0)) {
        return Err(Error::DegenerateLabels);
    }
    Ok(())
}

/// Mann-Whitney rank statistic: `P(score_pos > score_neg) + P(tie)/2`.
pub fn roc_auc(scores: &[f64], labels: &[i8]) -> Result<f64> {
    check_scores(scores, labels)?;
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // mid-ranks (1-based) for tie groups
    let mut rank_sum_pos = 0.0;
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && scores[idx[end]] == scores[idx[start]] {
            end += 1;
        }
        let mid = (start + 1 + end) as f64 / 2.0;
        rank_sum_pos += mid * idx[start..end].iter().filter(|&&i| labels[i] > 0).count() as f64;
        start = end;
    }
    let npos = labels.iter().filter(|&&l| l > 0).count() as f64;
    let nneg = labels.len() as f64 - npos;
    Ok((rank_sum_pos - npos * (npos + 1.0) / 2.0) / (npos * nneg))
}

/// Area under the empirical ROC curve by the trapezoidal rule, sweeping the
/// threshold over distinct scores from high to low.
pub fn roc_auc_trapezoid(scores: &[f64], labels: &[i8]) -> Result<f64> {
    check_scores(scores, labels)?;
    let npos = labels.iter().filter(|&&l| l > 0).count() as f64;
    let nneg = labels.len() as f64 - npos;
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let (mut tp, mut fp) = (0.0, 0.0);
    let (mut prev_tpr, mut prev_fpr) = (0.0, 0.0);
    let mut area = 0.0;
    let mut k = 0;
    while k < idx.len() {
        let s = scores[idx[k]];
        while k < idx.len() && scores[idx[k]] == s {
            if labels[idx[k]] > 0 {
                tp += 1.0;
            } else {
                fp += 1.0;
            }
            k += 1;
        }
        let (tpr, fpr) = (tp / npos, fp / nneg);
        area += (fpr - prev_fpr) * (tpr + prev_tpr) / 2.0;
        prev_tpr = tpr;
        prev_fpr = fpr;
    }
    Ok(area)
}

/// All headline metrics. `roc_auc` is omitted without scores or when the
/// labels are single-class.
pub fn metrics(c: &Confusion, scores: Option<&[f64]>, labels: &[i8]) -> Result<MetricsReport> {
    let auc = match scores {
        Some(s) => match roc_auc(s, labels) {
            Ok(v) => Some(v),
            Err(Error::DegenerateLabels) => None,
            Err(e) => return Err(e),
        },
        None => None,
    };
    Ok(MetricsReport {
        accuracy: accuracy(c),
        f1: f1_positive(c),
        macro_f1: macro_f1(c),
        specificity: specificity(c),
        sensitivity: sensitivity(c),
        mcc: mcc(c),
        roc_auc: auc,
        samples: c.total(),
        positives: c.tp + c.fn_,
        negatives: c.tn + c.fp,
        confusion: *c,
        footprint: Footprint::default(),
    })
}

/// Convenience: confusion + metrics from predictions and optional scores.
pub fn evaluate(preds: &[i8], scores: Option<&[f64]>, labels: &[i8]) -> Result<MetricsReport> {
    let c = confusion(preds, labels)?;
    metrics(&c, scores, labels)
}
