use serde::{Deserialize, Serialize};

use crate::datamodel::Label;
use crate::error::{Error, Result};

/// Binary confusion counts with the target class as positive.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub fp: u64,
    pub tn: u64,
}

impl ConfusionMatrix {
    pub fn new(tp: u64, fn_: u64, fp: u64, tn: u64) -> Self {
        ConfusionMatrix { tp, fn_, fp, tn }
    }

    pub fn from_labels(truth: &[Label], predicted: &[Label]) -> Result<Self> {
        if truth.len() != predicted.len() {
            return Err(Error::DimensionMismatch {
                expected: truth.len(),
                found: predicted.len(),
            });
        }
        let mut cm = ConfusionMatrix::default();
        for (t, p) in truth.iter().zip(predicted) {
            match (t.is_target(), p.is_target()) {
                (true, true) => cm.tp += 1,
                (true, false) => cm.fn_ += 1,
                (false, true) => cm.fp += 1,
                (false, false) => cm.tn += 1,
            }
        }
        Ok(cm)
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fn_ + self.fp + self.tn
    }

    pub fn add(&mut self, other: &ConfusionMatrix) {
        self.tp += other.tp;
        self.fn_ += other.fn_;
        self.fp += other.fp;
        self.tn += other.tn;
    }
}

/// Sensitivity, specificity, precision, F1, accuracy and geometric mean, all
/// as fractions in `[0, 1]`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub sen: f64,
    pub spe: f64,
    pub pre: f64,
    pub f1: f64,
    pub acc: f64,
    pub gm: f64,
}

impl MetricSet {
    pub fn as_array(&self) -> [f64; 6] {
        [self.sen, self.spe, self.pre, self.f1, self.acc, self.gm]
    }

    /// Element-wise mean.
    pub fn mean(sets: &[MetricSet]) -> MetricSet {
        if sets.is_empty() {
            return MetricSet::default();
        }
        let n = sets.len() as f64;
        let sum = |f: fn(&MetricSet) -> f64| sets.iter().map(f).sum::<f64>() / n;
        MetricSet {
            sen: sum(|m| m.sen),
            spe: sum(|m| m.spe),
            pre: sum(|m| m.pre),
            f1: sum(|m| m.f1),
            acc: sum(|m| m.acc),
            gm: sum(|m| m.gm),
        }
    }
}

/// `a / b` with `0/0` (and any zero denominator) mapped to 0.
fn ratio(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        0.0
    } else {
        a / b
    }
}

pub fn compute_metrics(cm: &ConfusionMatrix) -> Result<MetricSet> {
    if cm.total() == 0 {
        return Err(Error::InvalidData("empty confusion matrix".into()));
    }
    let (tp, fn_, fp, tn) = (cm.tp as f64, cm.fn_ as f64, cm.fp as f64, cm.tn as f64);
    let sen = ratio(tp, tp + fn_);
    let spe = ratio(tn, tn + fp);
    let pre = ratio(tp, tp + fp);
    let f1 = ratio(2.0 * pre * sen, pre + sen);
    let acc = (tp + tn) / cm.total() as f64;
    let gm = (sen * spe).sqrt();
    Ok(MetricSet {
        sen,
        spe,
        pre,
        f1,
        acc,
        gm,
    })
}
