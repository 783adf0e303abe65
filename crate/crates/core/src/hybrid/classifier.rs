use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng;
use crate::textprep::BimodalSequence;

/// How textual predictions are produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TextClassifierConfig {
    /// Scores come from a fine-tuned transformer run elsewhere and are read
    /// from a score file. The fields record how that model was trained.
    ExternalFineTuned(ExternalScorerMeta),
    BuiltinLinear(BuiltinLinearConfig),
}

impl Default for TextClassifierConfig {
    fn default() -> Self {
        TextClassifierConfig::ExternalFineTuned(ExternalScorerMeta::default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExternalScorerMeta {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_tokens: usize,
    pub output: String,
}

impl Default for ExternalScorerMeta {
    fn default() -> Self {
        ExternalScorerMeta { epochs: 8, learning_rate: 1e-5, batch_size: 8, max_tokens: 512, output: "sigmoid".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BuiltinLinearConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub l2: f64,
}

impl Default for BuiltinLinearConfig {
    fn default() -> Self {
        BuiltinLinearConfig { epochs: 30, learning_rate: 0.5, l2: 1e-4 }
    }
}

/// Token-count logistic model over packed sequences. Word-span and code-span
/// tokens are separate features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuiltinTextClassifier {
    vocabulary: BTreeMap<String, usize>,
    weights: Vec<f64>,
    bias: f64,
}

type Sparse = Vec<(usize, f64)>;

fn keyed_counts(seq: &BimodalSequence) -> BTreeMap<String, f64> {
    let mut counts = BTreeMap::new();
    for (prefix, span) in [("w:", seq.words()), ("c:", seq.code())] {
        for t in span {
            *counts.entry(format!("{prefix}{t}")).or_insert(0.0) += 1.0;
        }
    }
    counts
}

/// log(1 + count), scaled to unit length.
fn normalize(mut v: Sparse) -> Sparse {
    for (_, x) in &mut v {
        *x = x.ln_1p();
    }
    let norm = v.iter().map(|(_, x)| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        for (_, x) in &mut v {
            *x /= norm;
        }
    }
    v
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

impl BuiltinTextClassifier {
    /// Fits on sequences labelled `true` for the positive class.
    pub fn fit(seqs: &[BimodalSequence], labels: &[bool], cfg: &BuiltinLinearConfig, seed: u64) -> Result<Self> {
        if seqs.len() != labels.len() {
            return Err(Error::invalid(format!("{} sequences but {} labels", seqs.len(), labels.len())));
        }
        if !labels.contains(&true) || !labels.contains(&false) {
            return Err(Error::invalid("text classifier needs both classes in the training labels"));
        }
        if cfg.epochs == 0 || !(cfg.learning_rate > 0.0) || cfg.l2 < 0.0 {
            return Err(Error::config("text classifier needs positive epochs and learning rate"));
        }
        let mut vocabulary = BTreeMap::new();
        let docs: Vec<BTreeMap<String, f64>> = seqs.iter().map(keyed_counts).collect();
        for d in &docs {
            for k in d.keys() {
                let next = vocabulary.len();
                vocabulary.entry(k.clone()).or_insert(next);
            }
        }
        let rows: Vec<Sparse> =
            docs.iter().map(|d| normalize(d.iter().map(|(k, &c)| (vocabulary[k], c)).collect())).collect();
        let mut weights = vec![0.0; vocabulary.len()];
        let mut bias = 0.0;
        let mut order: Vec<usize> = (0..rows.len()).collect();
        let mut r = rng(seed);
        let mut step = 0usize;
        for _ in 0..cfg.epochs {
            order.shuffle(&mut r);
            for &i in &order {
                step += 1;
                let lr = cfg.learning_rate / (1.0 + 1e-3 * step as f64);
                let z = bias + rows[i].iter().map(|&(j, x)| weights[j] * x).sum::<f64>();
                let g = sigmoid(z) - if labels[i] { 1.0 } else { 0.0 };
                for &(j, x) in &rows[i] {
                    weights[j] -= lr * (g * x + cfg.l2 * weights[j]);
                }
                bias -= lr * g;
            }
        }
        Ok(BuiltinTextClassifier { vocabulary, weights, bias })
    }

    /// Probability of the positive class.
    pub fn score(&self, seq: &BimodalSequence) -> f64 {
        let row: Sparse =
            keyed_counts(seq).into_iter().filter_map(|(k, c)| self.vocabulary.get(&k).map(|&j| (j, c))).collect();
        sigmoid(self.bias + normalize(row).iter().map(|&(j, x)| self.weights[j] * x).sum::<f64>())
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn vocabulary_len(&self) -> usize {
        self.vocabulary.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textprep::pack_sequence;
    use rand::Rng as _;

    fn seq(words: &[&str], code: &[&str]) -> BimodalSequence {
        let w: Vec<String> = words.iter().map(|s| s.to_string()).collect();
        let c: Vec<String> = code.iter().map(|s| s.to_string()).collect();
        pack_sequence(&w, &c, 512).unwrap()
    }

    /// Documents of 8 filler tokens; positives also contain `marker`.
    fn cohort(n: usize, seed: u64, marker: Option<&str>) -> (Vec<BimodalSequence>, Vec<bool>) {
        let fill = ["a", "b", "c", "d", "e", "f", "g", "h", "i", "j"];
        let mut r = rng(seed);
        let mut seqs = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let pos = i % 2 == 0;
            let mut words: Vec<&str> = (0..8).map(|_| fill[r.random_range(0..fill.len())]).collect();
            if pos {
                if let Some(m) = marker {
                    words.push(m);
                }
            }
            seqs.push(seq(&words, &["x"]));
            labels.push(pos);
        }
        (seqs, labels)
    }

    fn accuracy(m: &BuiltinTextClassifier, seqs: &[BimodalSequence], labels: &[bool]) -> f64 {
        let hits = seqs.iter().zip(labels).filter(|(s, &l)| (m.score(s) >= 0.5) == l).count();
        hits as f64 / seqs.len() as f64
    }

    #[test]
    fn separating_token_is_learned() {
        let (s, l) = cohort(200, 1, Some("thanks"));
        let m = BuiltinTextClassifier::fit(&s, &l, &BuiltinLinearConfig::default(), 3).unwrap();
        let (ts, tl) = cohort(200, 2, Some("thanks"));
        assert_eq!(accuracy(&m, &ts, &tl), 1.0);
        let again = BuiltinTextClassifier::fit(&s, &l, &BuiltinLinearConfig::default(), 3).unwrap();
        assert_eq!(m.weights(), again.weights());
        let p = m.score(&ts[0]);
        assert!(p > 0.0 && p < 1.0);
    }

    #[test]
    fn shuffled_labels_give_chance_accuracy() {
        let (s, mut l) = cohort(400, 5, Some("thanks"));
        l.shuffle(&mut rng(9));
        let m = BuiltinTextClassifier::fit(&s, &l, &BuiltinLinearConfig::default(), 1).unwrap();
        let (ts, tl) = cohort(2000, 6, Some("thanks"));
        let acc = accuracy(&m, &ts, &tl);
        assert!((acc - 0.5).abs() <= 0.1, "{acc}");
    }

    #[test]
    fn single_class_rejected() {
        let s = vec![seq(&["a"], &[]), seq(&["b"], &[])];
        assert!(BuiltinTextClassifier::fit(&s, &[true, true], &BuiltinLinearConfig::default(), 0).is_err());
        assert!(BuiltinTextClassifier::fit(&s, &[true], &BuiltinLinearConfig::default(), 0).is_err());
    }

    #[test]
    fn code_and_word_spans_are_distinct() {
        let s = vec![seq(&["x"], &["y"]), seq(&["y"], &["x"])];
        let m = BuiltinTextClassifier::fit(&s, &[true, false], &BuiltinLinearConfig::default(), 0).unwrap();
        assert_eq!(m.vocabulary_len(), 4);
        assert!(m.score(&s[0]) > 0.5 && m.score(&s[1]) < 0.5);
    }
}
