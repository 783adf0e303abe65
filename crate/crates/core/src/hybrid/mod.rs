//! Ground-truth dropout benchmarking and the comparison between a numeric
//! predictor and a textual one.
//!
//! Labels use the dropout target encoding: 1 for a dropout and 0 otherwise.
//! Non-dropout (0) is the positive class throughout, and score files hold
//! the probability of that class.

mod classifier;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{ConfusionMatrix, MetricSet};
use crate::rng::rng;
use crate::textprep::{cochran_n, PostDocument};

pub use classifier::{BuiltinLinearConfig, BuiltinTextClassifier, ExternalScorerMeta, TextClassifierConfig};

pub const DROPOUT: f64 = 1.0;
pub const NON_DROPOUT: f64 = 0.0;
/// Positive class of the hybrid comparison.
pub const POSITIVE: f64 = NON_DROPOUT;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthRecord {
    pub user_id: String,
    pub dropout: bool,
    pub features: Vec<f64>,
    pub posts: Vec<PostDocument>,
}

impl GroundTruthRecord {
    pub fn label(&self) -> f64 {
        if self.dropout {
            DROPOUT
        } else {
            NON_DROPOUT
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthSet {
    pub records: Vec<GroundTruthRecord>,
}

impl GroundTruthSet {
    pub fn labels(&self) -> Vec<f64> {
        self.records.iter().map(GroundTruthRecord::label).collect()
    }
}

/// Sample size for a pool and the sorted indices of a seeded uniform draw
/// without replacement.
pub fn sample_indices(pool_size: usize, margin: f64, z: f64, seed: u64) -> Result<Vec<usize>> {
    if pool_size == 0 {
        return Err(Error::invalid("cannot sample from an empty pool"));
    }
    let n = cochran_n(z, 0.5, margin, Some(pool_size as u64))? as usize;
    if n >= pool_size {
        return Err(Error::invalid(format!("pool of {pool_size} is not larger than the required sample of {n}")));
    }
    let mut idx = rand::seq::index::sample(&mut rng(seed), pool_size, n).into_vec();
    idx.sort_unstable();
    Ok(idx)
}

pub fn sample_ground_truth(pool: &[GroundTruthRecord], margin: f64, z: f64, seed: u64) -> Result<GroundTruthSet> {
    let idx = sample_indices(pool.len(), margin, z, seed)?;
    Ok(GroundTruthSet { records: idx.into_iter().map(|i| pool[i].clone()).collect() })
}

pub fn evaluate_predictor(predictions: &[f64], labels: &[f64], positive: f64) -> Result<(ConfusionMatrix, MetricSet)> {
    let m = ConfusionMatrix::from_predictions(labels, predictions, positive)?;
    Ok((m, m.metrics()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Predictor {
    Numeric,
    Textual,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisagreementRecord {
    pub user_id: String,
    pub numeric: f64,
    pub textual: f64,
    pub truth: f64,
    pub correct: Predictor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub agreement_rate: f64,
    /// Numeric minus textual true positives.
    pub delta_tp: i64,
    /// Numeric minus textual true negatives.
    pub delta_tn: i64,
    pub disagreements: Vec<DisagreementRecord>,
}

pub fn compare_predictors(
    user_ids: &[String],
    numeric: &[f64],
    textual: &[f64],
    labels: &[f64],
    positive: f64,
) -> Result<Comparison> {
    let n = labels.len();
    if user_ids.len() != n || numeric.len() != n || textual.len() != n {
        return Err(Error::invalid(format!(
            "misaligned inputs: {} ids, {} numeric, {} textual, {n} labels",
            user_ids.len(),
            numeric.len(),
            textual.len()
        )));
    }
    if n == 0 {
        return Err(Error::invalid("no instances to compare"));
    }
    let num = ConfusionMatrix::from_predictions(labels, numeric, positive)?;
    let txt = ConfusionMatrix::from_predictions(labels, textual, positive)?;
    let disagreements: Vec<DisagreementRecord> = (0..n)
        .filter(|&i| numeric[i] != textual[i])
        .map(|i| DisagreementRecord {
            user_id: user_ids[i].clone(),
            numeric: numeric[i],
            textual: textual[i],
            truth: labels[i],
            correct: if numeric[i] == labels[i] { Predictor::Numeric } else { Predictor::Textual },
        })
        .collect();
    Ok(Comparison {
        agreement_rate: (n - disagreements.len()) as f64 / n as f64,
        delta_tp: num.tp as i64 - txt.tp as i64,
        delta_tn: num.tn as i64 - txt.tn as i64,
        disagreements,
    })
}

/// Predicts the positive class when either input does.
pub fn or_ensemble(a: &[f64], b: &[f64], positive: f64, negative: f64) -> Result<Vec<f64>> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!("{} vs {} predictions", a.len(), b.len())));
    }
    Ok(a.iter().zip(b).map(|(&x, &y)| if x == positive || y == positive { positive } else { negative }).collect())
}

/// Label for a positive-class probability.
pub fn threshold_label(score: f64, threshold: f64) -> f64 {
    if score >= threshold {
        POSITIVE
    } else {
        DROPOUT
    }
}

#[derive(Debug, Deserialize)]
struct ScoreRow {
    user_id: String,
    probability: f64,
}

#[derive(Debug, Deserialize)]
struct TruthRow {
    user_id: String,
    dropout: u8,
}

/// Reads `user_id,probability` rows (with header).
pub fn read_scores<R: Read>(reader: R) -> Result<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    for (i, row) in csv::Reader::from_reader(reader).deserialize::<ScoreRow>().enumerate() {
        let row = row?;
        if !(0.0..=1.0).contains(&row.probability) {
            return Err(Error::Parse { row: i + 1, message: format!("probability {} outside [0, 1]", row.probability) });
        }
        if out.insert(row.user_id.clone(), row.probability).is_some() {
            return Err(Error::Parse { row: i + 1, message: format!("duplicate user id {}", row.user_id) });
        }
    }
    Ok(out)
}

/// Reads `user_id,dropout` rows (with header); `dropout` is 1 or 0.
pub fn read_ground_truth<R: Read>(reader: R) -> Result<BTreeMap<String, bool>> {
    let mut out = BTreeMap::new();
    for (i, row) in csv::Reader::from_reader(reader).deserialize::<TruthRow>().enumerate() {
        let row = row?;
        if row.dropout > 1 {
            return Err(Error::Parse { row: i + 1, message: format!("dropout label {} is not 0 or 1", row.dropout) });
        }
        if out.insert(row.user_id.clone(), row.dropout == 1).is_some() {
            return Err(Error::Parse { row: i + 1, message: format!("duplicate user id {}", row.user_id) });
        }
    }
    Ok(out)
}

pub fn write_scores<W: Write>(writer: W, scores: &BTreeMap<String, f64>) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["user_id", "probability"])?;
    for (id, p) in scores {
        w.write_record([id.as_str(), &p.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_scores(path: impl AsRef<Path>) -> Result<BTreeMap<String, f64>> {
    read_scores(std::fs::File::open(path)?)
}

pub fn load_ground_truth(path: impl AsRef<Path>) -> Result<BTreeMap<String, bool>> {
    read_ground_truth(std::fs::File::open(path)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictorOutcome {
    pub matrix: ConfusionMatrix,
    pub metrics: MetricSet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridReport {
    pub threshold: f64,
    pub positive_instances: u64,
    pub negative_instances: u64,
    pub numeric: PredictorOutcome,
    pub textual: PredictorOutcome,
    pub comparison: Comparison,
}

impl HybridReport {
    /// Two side-by-side confusion matrices followed by the disagreements.
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "positive class: non-dropout ({} instances); negative: dropout ({})",
            self.positive_instances, self.negative_instances);
        let _ = writeln!(s, "{:<22}{:>14}{:>14}", "", "Numeric", "Textual");
        for (name, a, b) in [
            ("true non-dropout", self.numeric.matrix.tp, self.textual.matrix.tp),
            ("false dropout", self.numeric.matrix.fn_, self.textual.matrix.fn_),
            ("false non-dropout", self.numeric.matrix.fp, self.textual.matrix.fp),
            ("true dropout", self.numeric.matrix.tn, self.textual.matrix.tn),
        ] {
            let _ = writeln!(s, "{name:<22}{a:>14}{b:>14}");
        }
        for metric in ["accuracy", "f1"] {
            let a = self.numeric.metrics.get(metric).unwrap_or(f64::NAN);
            let b = self.textual.metrics.get(metric).unwrap_or(f64::NAN);
            let _ = writeln!(s, "{metric:<22}{a:>14.3}{b:>14.3}");
        }
        let _ = writeln!(s, "agreement rate: {:.3}", self.comparison.agreement_rate);
        let _ = writeln!(s, "disagreements: {}", self.comparison.disagreements.len());
        for d in &self.comparison.disagreements {
            let _ = writeln!(
                s,
                "  {} numeric={} textual={} truth={} correct={:?}",
                d.user_id, d.numeric, d.textual, d.truth, d.correct
            );
        }
        s
    }
}

/// Thresholds both score maps and compares them against the ground truth.
/// Every id must appear in all three maps.
pub fn run_hybrid_eval(
    numeric: &BTreeMap<String, f64>,
    textual: &BTreeMap<String, f64>,
    truth: &BTreeMap<String, bool>,
    threshold: f64,
) -> Result<HybridReport> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::config(format!("threshold {threshold} outside [0, 1]")));
    }
    let truth_ids: BTreeSet<&String> = truth.keys().collect();
    let mut problems = Vec::new();
    for (name, scores) in [("numeric", numeric), ("textual", textual)] {
        let ids: BTreeSet<&String> = scores.keys().collect();
        let unknown: Vec<&&String> = ids.difference(&truth_ids).collect();
        let missing: Vec<&&String> = truth_ids.difference(&ids).collect();
        if !unknown.is_empty() {
            problems.push(format!("{name} scores for unknown ids {unknown:?}"));
        }
        if !missing.is_empty() {
            problems.push(format!("{name} scores missing for ids {missing:?}"));
        }
    }
    if !problems.is_empty() {
        return Err(Error::invalid(problems.join("; ")));
    }
    let ids: Vec<String> = truth.keys().cloned().collect();
    let labels: Vec<f64> = truth.values().map(|&d| if d { DROPOUT } else { NON_DROPOUT }).collect();
    let num: Vec<f64> = ids.iter().map(|i| threshold_label(numeric[i], threshold)).collect();
    let txt: Vec<f64> = ids.iter().map(|i| threshold_label(textual[i], threshold)).collect();
    let (nm, nmet) = evaluate_predictor(&num, &labels, POSITIVE)?;
    let (tm, tmet) = evaluate_predictor(&txt, &labels, POSITIVE)?;
    let comparison = compare_predictors(&ids, &num, &txt, &labels, POSITIVE)?;
    Ok(HybridReport {
        threshold,
        positive_instances: nm.positives(),
        negative_instances: nm.negatives(),
        numeric: PredictorOutcome { matrix: nm, metrics: nmet },
        textual: PredictorOutcome { matrix: tm, metrics: tmet },
        comparison,
    })
}

/// Score and truth maps whose thresholded predictions reproduce the given
/// numeric and textual matrices on the same users. Both matrices must have
/// the same class totals.
pub fn scores_from_matrices(
    numeric: &ConfusionMatrix,
    textual: &ConfusionMatrix,
) -> Result<(BTreeMap<String, f64>, BTreeMap<String, f64>, BTreeMap<String, bool>)> {
    if numeric.positives() != textual.positives() || numeric.negatives() != textual.negatives() {
        return Err(Error::invalid("matrices disagree on class totals"));
    }
    let as_scores = |m: &ConfusionMatrix| -> Vec<f64> {
        let (_, p) = m.to_vectors(POSITIVE, DROPOUT);
        p.into_iter().map(|v| if v == POSITIVE { 0.9 } else { 0.1 }).collect()
    };
    let (truth, _) = numeric.to_vectors(POSITIVE, DROPOUT);
    let (ns, ts) = (as_scores(numeric), as_scores(textual));
    let id = |i: usize| format!("u{i:05}");
    Ok((
        ns.into_iter().enumerate().map(|(i, s)| (id(i), s)).collect(),
        ts.into_iter().enumerate().map(|(i, s)| (id(i), s)).collect(),
        truth.into_iter().enumerate().map(|(i, t)| (id(i), t == DROPOUT)).collect(),
    ))
}
