//! Confusion counts, recall/precision/F1 and ROC analysis.
//!
//! The positive class is "failure within the prediction interval".

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    /// Counts from true/false positives and the class totals.
    pub fn from_tp_fp(tp: u64, fp: u64, p: u64, n: u64) -> Self {
        debug_assert!(tp <= p && fp <= n);
        ConfusionCounts {
            tp,
            fp,
            tn: n - fp,
            fn_: p - tp,
        }
    }

    /// Actual positives, `TP + FN`.
    pub fn p(&self) -> u64 {
        self.tp + self.fn_
    }

    /// Actual negatives, `FP + TN`.
    pub fn n(&self) -> u64 {
        self.fp + self.tn
    }

    pub fn total(&self) -> u64 {
        self.p() + self.n()
    }

    pub fn predicted_positive(&self) -> u64 {
        self.tp + self.fp
    }
}

/// A ratio that may have an undefined denominator. Degenerate ratios carry
/// value 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ratio {
    pub value: f64,
    pub degenerate: bool,
}

impl Ratio {
    fn of(num: u64, den: u64) -> Self {
        if den == 0 {
            Ratio {
                value: 0.0,
                degenerate: true,
            }
        } else {
            Ratio {
                value: num as f64 / den as f64,
                degenerate: false,
            }
        }
    }
}

pub fn confusion(predicted: &[u8], actual: &[u8]) -> Result<ConfusionCounts> {
    if predicted.len() != actual.len() {
        return Err(Error::LengthMismatch {
            left: predicted.len(),
            right: actual.len(),
        });
    }
    let mut c = ConfusionCounts::default();
    for (&p, &a) in predicted.iter().zip(actual) {
        match (p != 0, a != 0) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

/// Counts for `score >= cutoff` without materialising labels.
pub fn confusion_at(scores: &[f64], actual: &[u8], cutoff: f64) -> Result<ConfusionCounts> {
    if scores.len() != actual.len() {
        return Err(Error::LengthMismatch {
            left: scores.len(),
            right: actual.len(),
        });
    }
    let mut c = ConfusionCounts::default();
    for (&s, &a) in scores.iter().zip(actual) {
        match (s >= cutoff, a != 0) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

/// `TP / P`
pub fn recall(c: &ConfusionCounts) -> Ratio {
    Ratio::of(c.tp, c.p())
}

/// `TP / (TP + FP)`
pub fn precision(c: &ConfusionCounts) -> Ratio {
    Ratio::of(c.tp, c.predicted_positive())
}

/// `2 TP / (TP + FP + P)`
pub fn f1(c: &ConfusionCounts) -> Ratio {
    Ratio::of(2 * c.tp, c.tp + c.fp + c.p())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    /// Rows with `score >= cutoff` are predicted positive. The first point
    /// uses `+inf`.
    pub cutoff: f64,
    pub fpr: f64,
    pub tpr: f64,
    pub counts: ConfusionCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    /// Cutoffs in descending order.
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

/// ROC curve with one point per distinct score plus the `(0, 0)` origin.
/// AUC by the trapezoidal rule.
pub fn roc(scores: &[f64], actual: &[u8]) -> Result<RocCurve> {
    if scores.len() != actual.len() {
        return Err(Error::LengthMismatch {
            left: scores.len(),
            right: actual.len(),
        });
    }
    let p = actual.iter().filter(|&&a| a != 0).count() as u64;
    let n = actual.len() as u64 - p;
    if p == 0 || n == 0 {
        return Err(Error::SingleClass {
            positives: p as usize,
            negatives: n as usize,
        });
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Invalid("NaN score".into()));
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let point = |cutoff: f64, tp: u64, fp: u64| RocPoint {
        cutoff,
        fpr: fp as f64 / n as f64,
        tpr: tp as f64 / p as f64,
        counts: ConfusionCounts::from_tp_fp(tp, fp, p, n),
    };

    let mut points = vec![point(f64::INFINITY, 0, 0)];
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut i = 0;
    while i < order.len() {
        let cutoff = scores[order[i]];
        while i < order.len() && scores[order[i]] == cutoff {
            if actual[order[i]] != 0 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(point(cutoff, tp, fp));
    }

    let auc = points
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0)
        .sum();
    Ok(RocCurve { points, auc })
}
