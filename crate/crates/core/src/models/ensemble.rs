//! Tree-based learners: a single decision tree, random forest, bagging,
//! AdaBoost, and gradient boosting with tree or linear base learners.

use rand::seq::index::sample;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::matrix::{sigmoid, Rows};
use super::tree::{fit_cart, grow_tree, Binned, Tree, TreeParams};
use crate::data::Task;
use crate::hpo::Assignment;
use crate::rng::{derive_seed, rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "combine", rename_all = "kebab-case")]
pub(crate) enum TreeEnsemble {
    /// Mean of member outputs.
    Average { trees: Vec<Tree> },
    /// base + sum of (already shrunk) tree outputs, optionally through a logistic link.
    Boosted { base: f64, trees: Vec<Tree>, logistic: bool },
    /// Linear booster.
    GbLinear { coef: Vec<f64>, bias: f64, logistic: bool },
    /// Weighted median of member outputs.
    WeightedMedian { trees: Vec<Tree>, weights: Vec<f64> },
    /// Weighted vote share of class 1.
    WeightedVote { trees: Vec<Tree>, weights: Vec<f64> },
}

impl TreeEnsemble {
    pub fn predict(&self, x: &Rows) -> Vec<f64> {
        match self {
            TreeEnsemble::Average { trees } => (0..x.n)
                .into_par_iter()
                .map(|i| trees.iter().map(|t| t.predict_one(x.row(i))).sum::<f64>() / trees.len() as f64)
                .collect(),
            TreeEnsemble::Boosted { base, trees, logistic } => (0..x.n)
                .into_par_iter()
                .map(|i| {
                    let f = base + trees.iter().map(|t| t.predict_one(x.row(i))).sum::<f64>();
                    if *logistic {
                        sigmoid(f)
                    } else {
                        f
                    }
                })
                .collect(),
            TreeEnsemble::GbLinear { coef, bias, logistic } => (0..x.n)
                .map(|i| {
                    let f = bias + super::matrix::dot(coef, x.row(i));
                    if *logistic {
                        sigmoid(f)
                    } else {
                        f
                    }
                })
                .collect(),
            TreeEnsemble::WeightedMedian { trees, weights } => (0..x.n)
                .map(|i| {
                    let preds: Vec<f64> = trees.iter().map(|t| t.predict_one(x.row(i))).collect();
                    weighted_median(&preds, weights)
                })
                .collect(),
            TreeEnsemble::WeightedVote { trees, weights } => {
                let total: f64 = weights.iter().sum();
                (0..x.n)
                    .map(|i| {
                        let yes: f64 = trees
                            .iter()
                            .zip(weights)
                            .filter(|(t, _)| t.predict_one(x.row(i)) >= 0.5)
                            .map(|(_, w)| w)
                            .sum();
                        if total > 0.0 {
                            yes / total
                        } else {
                            0.5
                        }
                    })
                    .collect()
            }
        }
    }
}

/// Smallest prediction whose cumulative weight reaches half the total.
fn weighted_median(preds: &[f64], weights: &[f64]) -> f64 {
    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&a, &b| preds[a].total_cmp(&preds[b]).then(a.cmp(&b)));
    let total: f64 = weights.iter().sum();
    let mut acc = 0.0;
    for &k in &order {
        acc += weights[k];
        if acc >= 0.5 * total {
            return preds[k];
        }
    }
    preds[*order.last().expect("non-empty ensemble")]
}

/// Count from a fraction of `n`, at least `min`.
fn frac_count(f: f64, n: usize, min: usize) -> usize {
    ((f * n as f64).ceil() as usize).max(min)
}

/// Tree-shape hyperparameters shared by the single tree and the forest.
fn shape_params(p: &Assignment, n: usize, default_features: f64) -> TreeParams {
    TreeParams {
        max_depth: p.usize_or("max_depth", 64).max(1),
        min_samples_split: p.get("min_samples_split").and_then(|v| v.as_f64()).map_or(2, |f| frac_count(f, n, 2)),
        min_samples_leaf: p.get("min_samples_leaf").and_then(|v| v.as_f64()).map_or(1, |f| frac_count(f, n, 1)),
        min_hessian_leaf: p.f64_or("min_weight_fraction_leaf", 0.0) * n as f64,
        max_features: p.f64_or("max_features", default_features),
        ..TreeParams::default()
    }
}

fn all(n: usize) -> Vec<usize> {
    (0..n).collect()
}

pub(crate) fn decision_tree(x: &Rows, y: &[f64], p: &Assignment, _task: Task, seed: u64) -> TreeEnsemble {
    let data = Binned::new(x);
    let params = shape_params(p, x.n, 1.0);
    let tree = fit_cart(&data, y, &vec![1.0; x.n], &all(x.n), &all(x.p), &params, &mut rng(seed));
    TreeEnsemble::Average { trees: vec![tree] }
}

/// Bootstrap sample of `m` row indices.
fn bootstrap(n: usize, m: usize, r: &mut crate::rng::Rng) -> Vec<usize> {
    (0..m).map(|_| r.random_range(0..n)).collect()
}

pub(crate) fn random_forest(x: &Rows, y: &[f64], p: &Assignment, task: Task, seed: u64) -> TreeEnsemble {
    let data = Binned::new(x);
    let default_features = match task {
        Task::Regression => 1.0,
        Task::Classification => (x.p as f64).sqrt() / x.p as f64,
    };
    let params = shape_params(p, x.n, default_features);
    let n_trees = p.usize_or("n_estimators", 100).max(1);
    let m = frac_count(p.f64_or("max_samples", 1.0), x.n, 1);
    let w = vec![1.0; x.n];
    let features = all(x.p);
    let trees = (0..n_trees)
        .into_par_iter()
        .map(|t| {
            let mut r = rng(derive_seed(seed, t as u64));
            let rows = bootstrap(x.n, m, &mut r);
            fit_cart(&data, y, &w, &rows, &features, &params, &mut r)
        })
        .collect();
    TreeEnsemble::Average { trees }
}

pub(crate) fn bagging(x: &Rows, y: &[f64], p: &Assignment, _task: Task, seed: u64) -> TreeEnsemble {
    let data = Binned::new(x);
    let params = TreeParams::default();
    let n_trees = p.usize_or("n_estimators", 10).max(1);
    let m = frac_count(p.f64_or("max_samples", 1.0), x.n, 1);
    let k = frac_count(p.f64_or("max_features", 1.0), x.p, 1).min(x.p);
    let with_replacement = p.bool_or("bootstrap", true);
    let feature_bootstrap = p.bool_or("bootstrap_features", false);
    let w = vec![1.0; x.n];
    let trees = (0..n_trees)
        .into_par_iter()
        .map(|t| {
            let mut r = rng(derive_seed(seed, t as u64));
            let rows = if with_replacement {
                bootstrap(x.n, m, &mut r)
            } else {
                sample(&mut r, x.n, m.min(x.n)).into_vec()
            };
            let mut features: Vec<usize> = if feature_bootstrap {
                bootstrap(x.p, k, &mut r)
            } else {
                sample(&mut r, x.p, k).into_vec()
            };
            features.sort_unstable();
            features.dedup();
            fit_cart(&data, y, &w, &rows, &features, &params, &mut r)
        })
        .collect();
    TreeEnsemble::Average { trees }
}

/// AdaBoost.R2 with linear loss on depth-3 trees (regression) or SAMME on
/// stumps (classification), both fitted with sample weights.
pub(crate) fn adaboost(x: &Rows, y: &[f64], p: &Assignment, task: Task, seed: u64) -> TreeEnsemble {
    let data = Binned::new(x);
    let n_rounds = p.usize_or("n_estimators", 50).max(1);
    let lr = p.f64_or("learning_rate", 1.0);
    let params = TreeParams {
        max_depth: if task == Task::Regression { 3 } else { 1 },
        ..TreeParams::default()
    };
    let rows = all(x.n);
    let features = all(x.p);
    let mut w = vec![1.0 / x.n as f64; x.n];
    let mut trees = Vec::new();
    let mut weights = Vec::new();
    let mut r = rng(seed);
    for _ in 0..n_rounds {
        let tree = fit_cart(&data, y, &w, &rows, &features, &params, &mut r);
        let pred = tree.predict(x);
        match task {
            Task::Regression => {
                let err: Vec<f64> = pred.iter().zip(y).map(|(a, b)| (a - b).abs()).collect();
                let max = err.iter().copied().fold(0.0, f64::max);
                if max <= 0.0 {
                    trees.push(tree);
                    weights.push(1.0);
                    break;
                }
                let avg: f64 = err.iter().zip(&w).map(|(e, wi)| wi * e / max).sum::<f64>() / w.iter().sum::<f64>();
                if avg >= 0.5 {
                    if trees.is_empty() {
                        trees.push(tree);
                        weights.push(1.0);
                    }
                    break;
                }
                let beta = avg / (1.0 - avg);
                trees.push(tree);
                weights.push(lr * (1.0 / beta).ln());
                for (wi, e) in w.iter_mut().zip(&err) {
                    *wi *= beta.powf((1.0 - e / max) * lr);
                }
            }
            Task::Classification => {
                let miss: Vec<bool> = pred.iter().zip(y).map(|(s, l)| (*s >= 0.5) != (*l == 1.0)).collect();
                let total: f64 = w.iter().sum();
                let err = miss.iter().zip(&w).filter(|(m, _)| **m).map(|(_, wi)| wi).sum::<f64>() / total;
                if err <= 0.0 {
                    trees.push(tree);
                    weights.push(1.0);
                    break;
                }
                if err >= 0.5 {
                    if trees.is_empty() {
                        trees.push(tree);
                        weights.push(1.0);
                    }
                    break;
                }
                let alpha = lr * ((1.0 - err) / err).ln();
                trees.push(tree);
                weights.push(alpha);
                for (wi, m) in w.iter_mut().zip(&miss) {
                    if *m {
                        *wi *= alpha.exp();
                    }
                }
            }
        }
        let s: f64 = w.iter().sum();
        w.iter_mut().for_each(|v| *v /= s);
    }
    match task {
        Task::Regression => TreeEnsemble::WeightedMedian { trees, weights },
        Task::Classification => TreeEnsemble::WeightedVote { trees, weights },
    }
}

fn soft(g: f64, a: f64) -> f64 {
    g.signum() * (g.abs() - a).max(0.0)
}

fn gradients(pred: &[f64], y: &[f64], logistic: bool, g: &mut [f64], h: &mut [f64]) {
    for i in 0..y.len() {
        if logistic {
            let s = sigmoid(pred[i]);
            g[i] = s - y[i];
            h[i] = (s * (1.0 - s)).max(1e-16);
        } else {
            g[i] = pred[i] - y[i];
            h[i] = 1.0;
        }
    }
}

/// Regularised gradient boosting with squared-error or logistic objective.
pub(crate) fn xgboost(x: &Rows, y: &[f64], p: &Assignment, task: Task, seed: u64) -> TreeEnsemble {
    let logistic = task == Task::Classification;
    let eta = p.f64_or("learning_rate", 0.3);
    let rounds = p.usize_or("n_estimators", 100).max(1);
    let lambda = p.f64_or("reg_lambda", 1.0);
    let alpha = p.f64_or("reg_alpha", 0.0);
    let base = if logistic { 0.0 } else { y.iter().sum::<f64>() / y.len() as f64 };
    let mut pred = vec![base; x.n];
    let mut g = vec![0.0; x.n];
    let mut h = vec![0.0; x.n];

    if p.str_or("booster", "gbtree") == "gblinear" {
        let mut coef = vec![0.0; x.p];
        let mut bias = base;
        for _ in 0..rounds {
            gradients(&pred, y, logistic, &mut g, &mut h);
            let (gs, hs): (f64, f64) = (g.iter().sum(), h.iter().sum());
            let db = -eta * gs / hs;
            bias += db;
            for v in pred.iter_mut() {
                *v += db;
            }
            for j in 0..x.p {
                gradients(&pred, y, logistic, &mut g, &mut h);
                let (mut gj, mut hj) = (0.0, 0.0);
                for i in 0..x.n {
                    let xij = x.get(i, j);
                    gj += g[i] * xij;
                    hj += h[i] * xij * xij;
                }
                if hj <= 0.0 {
                    continue;
                }
                let dw = -eta * soft(gj + lambda * coef[j], alpha) / (hj + lambda);
                coef[j] += dw;
                for (i, v) in pred.iter_mut().enumerate() {
                    *v += dw * x.get(i, j);
                }
            }
        }
        return TreeEnsemble::GbLinear { coef, bias, logistic };
    }

    let data = Binned::new(x);
    let params = TreeParams {
        max_depth: p.usize_or("max_depth", 6).max(1),
        min_samples_split: 2,
        min_samples_leaf: 1,
        min_hessian_leaf: 1.0,
        lambda,
        alpha,
        gamma: 0.0,
        max_features: 1.0,
        shrinkage: eta,
    };
    let sub = p.f64_or("subsample", 1.0);
    let m = frac_count(sub, x.n, 1).min(x.n);
    let features = all(x.p);
    let mut trees = Vec::with_capacity(rounds);
    let mut r = rng(seed);
    for _ in 0..rounds {
        gradients(&pred, y, logistic, &mut g, &mut h);
        let rows = if m < x.n {
            let mut s = sample(&mut r, x.n, m).into_vec();
            s.sort_unstable();
            s
        } else {
            all(x.n)
        };
        let tree = grow_tree(&data, &g, &h, &rows, &features, &params, &mut r);
        for (i, v) in pred.iter_mut().enumerate() {
            *v += tree.predict_one(x.row(i));
        }
        trees.push(tree);
    }
    TreeEnsemble::Boosted { base, trees, logistic }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hpo::ParamValue;

    fn friedman(n: usize, seed: u64) -> (Rows, Vec<f64>) {
        let mut r = rng(seed);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..5).map(|_| r.random::<f64>()).collect()).collect();
        let y = rows
            .iter()
            .map(|v| 10.0 * (std::f64::consts::PI * v[0] * v[1]).sin() + 20.0 * (v[2] - 0.5).powi(2) + 10.0 * v[3] + 5.0 * v[4])
            .collect();
        (Rows::from_rows(&rows), y)
    }

    fn r2(pred: &[f64], y: &[f64]) -> f64 {
        let m = y.iter().sum::<f64>() / y.len() as f64;
        let ss_tot: f64 = y.iter().map(|v| (v - m).powi(2)).sum();
        let ss_res: f64 = pred.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum();
        1.0 - ss_res / ss_tot
    }

    #[test]
    fn ensembles_generalise_on_friedman() {
        let (x, y) = friedman(800, 1);
        let (xt, yt) = friedman(400, 2);
        let none = Assignment::new();
        let cases: Vec<(&str, TreeEnsemble, f64)> = vec![
            ("tree", decision_tree(&x, &y, &none, Task::Regression, 42), 0.5),
            ("forest", random_forest(&x, &y, &none.clone().set("n_estimators", ParamValue::Int(50)), Task::Regression, 42), 0.75),
            ("bagging", bagging(&x, &y, &none, Task::Regression, 42), 0.7),
            ("adaboost", adaboost(&x, &y, &none, Task::Regression, 42), 0.6),
            ("xgb", xgboost(&x, &y, &none, Task::Regression, 42), 0.8),
            ("gblinear", xgboost(&x, &y, &none.clone().set("booster", ParamValue::Str("gblinear".into())), Task::Regression, 42), 0.6),
        ];
        for (name, m, floor) in cases {
            let s = r2(&m.predict(&xt), &yt);
            assert!(s > floor, "{name}: {s}");
        }
    }

    #[test]
    fn classifiers_give_probabilities() {
        let (x, y) = friedman(600, 3);
        let med = {
            let mut v = y.clone();
            v.sort_by(f64::total_cmp);
            v[300]
        };
        let labels: Vec<f64> = y.iter().map(|&v| if v > med { 1.0 } else { 0.0 }).collect();
        let none = Assignment::new();
        for m in [
            random_forest(&x, &labels, &none.clone().set("n_estimators", ParamValue::Int(30)), Task::Classification, 1),
            adaboost(&x, &labels, &none, Task::Classification, 1),
            xgboost(&x, &labels, &none, Task::Classification, 1),
        ] {
            let s = m.predict(&x);
            assert!(s.iter().all(|v| (0.0..=1.0).contains(v)));
            let acc = s.iter().zip(&labels).filter(|(a, b)| (**a >= 0.5) == (**b == 1.0)).count() as f64 / 600.0;
            assert!(acc > 0.8, "{acc}");
        }
    }

    #[test]
    fn forest_is_seed_deterministic() {
        let (x, y) = friedman(200, 4);
        let p = Assignment::new().set("n_estimators", ParamValue::Int(10));
        let a = random_forest(&x, &y, &p, Task::Regression, 9);
        let b = random_forest(&x, &y, &p, Task::Regression, 9);
        let c = random_forest(&x, &y, &p, Task::Regression, 10);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn weighted_median_picks_half_mass() {
        assert_eq!(weighted_median(&[3.0, 1.0, 2.0], &[1.0, 1.0, 1.0]), 2.0);
        assert_eq!(weighted_median(&[3.0, 1.0, 2.0], &[5.0, 1.0, 1.0]), 3.0);
    }
}
