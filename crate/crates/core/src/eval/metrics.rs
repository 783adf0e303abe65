use serde::{Deserialize, Serialize};

use crate::data::Task;
use crate::error::{Error, Result};

/// Metrics of one evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "lowercase")]
pub enum MetricSet {
    Regression { r2: f64, rmse: f64 },
    Classification { accuracy: f64, precision: f64, recall: f64, f1: f64 },
}

impl MetricSet {
    pub const REGRESSION_NAMES: [&'static str; 2] = ["r2", "rmse"];
    pub const CLASSIFICATION_NAMES: [&'static str; 4] = ["accuracy", "precision", "recall", "f1"];

    pub fn names(task: Task) -> &'static [&'static str] {
        match task {
            Task::Regression => &Self::REGRESSION_NAMES,
            Task::Classification => &Self::CLASSIFICATION_NAMES,
        }
    }

    /// The metric used for ranking: R^2 or F1.
    pub fn primary_name(task: Task) -> &'static str {
        match task {
            Task::Regression => "r2",
            Task::Classification => "f1",
        }
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        match (self, name) {
            (MetricSet::Regression { r2, .. }, "r2") => Some(*r2),
            (MetricSet::Regression { rmse, .. }, "rmse") => Some(*rmse),
            (MetricSet::Classification { accuracy, .. }, "accuracy") => Some(*accuracy),
            (MetricSet::Classification { precision, .. }, "precision") => Some(*precision),
            (MetricSet::Classification { recall, .. }, "recall") => Some(*recall),
            (MetricSet::Classification { f1, .. }, "f1") => Some(*f1),
            _ => None,
        }
    }

    pub fn values(&self) -> Vec<(&'static str, f64)> {
        match self {
            MetricSet::Regression { r2, rmse } => vec![("r2", *r2), ("rmse", *rmse)],
            MetricSet::Classification { accuracy, precision, recall, f1 } => {
                vec![("accuracy", *accuracy), ("precision", *precision), ("recall", *recall), ("f1", *f1)]
            }
        }
    }
}

/// Binary confusion counts with respect to an explicit positive label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionMatrix {
    pub fn new(tp: u64, fn_: u64, fp: u64, tn: u64) -> Self {
        ConfusionMatrix { tp, fp, fn_, tn }
    }

    pub fn from_predictions(y_true: &[f64], y_pred: &[f64], positive: f64) -> Result<Self> {
        if y_true.len() != y_pred.len() {
            return Err(Error::invalid(format!("{} labels but {} predictions", y_true.len(), y_pred.len())));
        }
        let mut m = ConfusionMatrix::new(0, 0, 0, 0);
        for (t, p) in y_true.iter().zip(y_pred) {
            match (*t == positive, *p == positive) {
                (true, true) => m.tp += 1,
                (true, false) => m.fn_ += 1,
                (false, true) => m.fp += 1,
                (false, false) => m.tn += 1,
            }
        }
        Ok(m)
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn positives(&self) -> u64 {
        self.tp + self.fn_
    }

    pub fn negatives(&self) -> u64 {
        self.fp + self.tn
    }

    pub fn accuracy(&self) -> f64 {
        ratio(self.tp + self.tn, self.total())
    }

    /// Zero when nothing was predicted positive.
    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn f1(&self) -> f64 {
        ratio(2 * self.tp, 2 * self.tp + self.fp + self.fn_)
    }

    pub fn metrics(&self) -> MetricSet {
        MetricSet::Classification {
            accuracy: self.accuracy(),
            precision: self.precision(),
            recall: self.recall(),
            f1: self.f1(),
        }
    }

    /// Label vectors that reproduce these counts (positives first).
    pub fn to_vectors(&self, positive: f64, negative: f64) -> (Vec<f64>, Vec<f64>) {
        let mut t = Vec::with_capacity(self.total() as usize);
        let mut p = Vec::with_capacity(self.total() as usize);
        for (count, tv, pv) in [
            (self.tp, positive, positive),
            (self.fn_, positive, negative),
            (self.fp, negative, positive),
            (self.tn, negative, negative),
        ] {
            for _ in 0..count {
                t.push(tv);
                p.push(pv);
            }
        }
        (t, p)
    }
}

fn ratio(a: u64, b: u64) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

pub fn r2_score(y_true: &[f64], y_pred: &[f64]) -> Result<f64> {
    check_len(y_true, y_pred)?;
    let m = y_true.iter().sum::<f64>() / y_true.len() as f64;
    let ss_tot: f64 = y_true.iter().map(|v| (v - m) * (v - m)).sum();
    if ss_tot == 0.0 {
        return Err(Error::Undefined("R^2 of a constant target".into()));
    }
    let ss_res: f64 = y_true.iter().zip(y_pred).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

pub fn rmse(y_true: &[f64], y_pred: &[f64]) -> Result<f64> {
    check_len(y_true, y_pred)?;
    let mse = y_true.iter().zip(y_pred).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / y_true.len() as f64;
    Ok(mse.sqrt())
}

fn check_len(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!("{} targets but {} predictions", a.len(), b.len())));
    }
    if a.is_empty() {
        return Err(Error::invalid("cannot score zero predictions"));
    }
    Ok(())
}

/// Scores predictions. Classification metrics refer to label 1 as the
/// positive class; see [`score_with_positive`] for other labels.
pub fn score(y_true: &[f64], y_pred: &[f64], task: Task) -> Result<MetricSet> {
    score_with_positive(y_true, y_pred, task, 1.0)
}

pub fn score_with_positive(y_true: &[f64], y_pred: &[f64], task: Task, positive: f64) -> Result<MetricSet> {
    check_len(y_true, y_pred)?;
    match task {
        Task::Regression => Ok(MetricSet::Regression { r2: r2_score(y_true, y_pred)?, rmse: rmse(y_true, y_pred)? }),
        Task::Classification => Ok(ConfusionMatrix::from_predictions(y_true, y_pred, positive)?.metrics()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_predictions() {
        let y = [1.0, 2.0, 4.0];
        assert_eq!(score(&y, &y, Task::Regression).unwrap(), MetricSet::Regression { r2: 1.0, rmse: 0.0 });
        let l = [1.0, 0.0, 1.0];
        assert_eq!(score(&l, &l, Task::Classification).unwrap().get("f1"), Some(1.0));
    }

    #[test]
    fn constant_target_r2_undefined() {
        assert!(matches!(r2_score(&[2.0, 2.0], &[1.0, 3.0]), Err(Error::Undefined(_))));
    }

    #[test]
    fn two_path_consistency() {
        for (tp, fn_, fp, tn) in [(3, 1, 2, 4), (0, 5, 0, 5), (7, 0, 0, 0)] {
            let m = ConfusionMatrix::new(tp, fn_, fp, tn);
            let (t, p) = m.to_vectors(0.0, 1.0);
            assert_eq!(ConfusionMatrix::from_predictions(&t, &p, 0.0).unwrap(), m);
            assert_eq!(score_with_positive(&t, &p, Task::Classification, 0.0).unwrap(), m.metrics());
            let total = (tp + fn_ + fp + tn) as f64;
            assert_eq!(m.accuracy(), (tp + tn) as f64 / total);
            let f1 = if tp + fp + fn_ == 0 { 0.0 } else { 2.0 * tp as f64 / (2 * tp + fp + fn_) as f64 };
            assert_eq!(m.f1(), f1);
        }
    }
}
