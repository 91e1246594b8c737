//! Micro-averaged precision/recall/F1 over multi-label predictions.

use crate::error::{Error, Result};

/// Confusion counts pooled over every (instance, label) cell.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ConfusionCounts {
    pub true_pos: u64,
    pub false_pos: u64,
    pub false_neg: u64,
    pub true_neg: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.true_pos + self.false_pos + self.false_neg + self.true_neg
    }
}

/// Accumulates micro-pooled confusion counts. Shapes must match.
pub fn confusion(pred: &[Vec<u8>], truth: &[Vec<u8>]) -> Result<ConfusionCounts> {
    if pred.len() != truth.len() {
        return Err(Error::ShapeMismatch {
            reason: format!("{} predictions vs {} truths", pred.len(), truth.len()),
        });
    }
    let mut c = ConfusionCounts::default();
    for (p_row, t_row) in pred.iter().zip(truth) {
        if p_row.len() != t_row.len() {
            return Err(Error::ShapeMismatch {
                reason: format!("row width {} vs {}", p_row.len(), t_row.len()),
            });
        }
        for (&p, &t) in p_row.iter().zip(t_row) {
            match (p != 0, t != 0) {
                (true, true) => c.true_pos += 1,
                (true, false) => c.false_pos += 1,
                (false, true) => c.false_neg += 1,
                (false, false) => c.true_neg += 1,
            }
        }
    }
    Ok(c)
}

/// Per-label confusion counts, for macro-averaged variants.
pub fn confusion_per_label(pred: &[Vec<u8>], truth: &[Vec<u8>]) -> Result<Vec<ConfusionCounts>> {
    if pred.len() != truth.len() {
        return Err(Error::ShapeMismatch {
            reason: format!("{} predictions vs {} truths", pred.len(), truth.len()),
        });
    }
    let k = pred.first().map_or(0, |r| r.len());
    let mut counts = vec![ConfusionCounts::default(); k];
    for (p_row, t_row) in pred.iter().zip(truth) {
        if p_row.len() != k || t_row.len() != k {
            return Err(Error::ShapeMismatch {
                reason: "non-uniform row width".to_string(),
            });
        }
        for j in 0..k {
            let c = &mut counts[j];
            match (p_row[j] != 0, t_row[j] != 0) {
                (true, true) => c.true_pos += 1,
                (true, false) => c.false_pos += 1,
                (false, true) => c.false_neg += 1,
                (false, false) => c.true_neg += 1,
            }
        }
    }
    Ok(counts)
}

/// Micro precision, recall, and F1. Any ratio with a zero denominator is
/// defined as 0 so the metric is total.
pub fn micro_prf(c: &ConfusionCounts) -> (f64, f64, f64) {
    let precision = ratio(c.true_pos, c.true_pos + c.false_pos);
    let recall = ratio(c.true_pos, c.true_pos + c.false_neg);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    (precision, recall, f1)
}

/// Macro precision/recall/F1: unweighted mean of per-label scores.
pub fn macro_prf(counts: &[ConfusionCounts]) -> (f64, f64, f64) {
    if counts.is_empty() {
        return (0.0, 0.0, 0.0);
    }
    let mut sums = (0.0, 0.0, 0.0);
    for c in counts {
        let (p, r, f) = micro_prf(c);
        sums.0 += p;
        sums.1 += r;
        sums.2 += f;
    }
    let n = counts.len() as f64;
    (sums.0 / n, sums.1 / n, sums.2 / n)
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}
