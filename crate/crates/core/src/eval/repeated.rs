use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{score_with_positive, MetricSet};
use super::split::split_indices;
use super::summary::{summarize, Summary};
use crate::data::{PlanCell, Task, UserFeatureTable, DROPOUT};
use crate::error::{Error, Result};
use crate::features::fit_apply_transform;
use crate::features::FeTechnique;
use crate::hpo::Assignment;
use crate::models::{find_model, fit, fit_dummy, FittedModel};
use crate::rng::derive_seed;

/// Model name that selects the no-learning baseline in a plan cell.
pub const DUMMY_MODEL: &str = "Shallow Baseline";

/// Positive class used for classification metrics of a target. Dropout is
/// scored with non-dropout (label 0) as the positive class.
pub fn positive_label_for(target: &str) -> f64 {
    if target == DROPOUT {
        0.0
    } else {
        1.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub runs: usize,
    pub master_seed: u64,
    pub train_ratio: f64,
    /// Draw a new split for every run. When false all runs share the split
    /// seeded by `master_seed`.
    pub vary_split: bool,
    pub positive_label: f64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions { runs: 100, master_seed: 42, train_ratio: 0.8, vary_split: true, positive_label: 1.0 }
    }
}

/// Per-run values of one metric together with their summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunDistribution {
    pub values: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    pub median: f64,
}

impl RunDistribution {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        let Summary { mean, std, median, .. } = summarize(&values)?;
        Ok(RunDistribution { values, mean, std, median })
    }

    pub fn summary(&self) -> Summary {
        summarize(&self.values).expect("distribution is non-empty")
    }
}

/// Outcome of one repeated evaluation of a plan cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub cell: PlanCell,
    pub task: Task,
    pub params: Assignment,
    /// Metric name to distribution; empty when every run failed.
    pub metrics: BTreeMap<String, RunDistribution>,
    /// Messages of failed runs, keyed by run index.
    pub failures: BTreeMap<usize, String>,
}

impl CellResult {
    pub fn is_na(&self) -> bool {
        self.metrics.is_empty()
    }

    pub fn mean(&self, metric: &str) -> Option<f64> {
        self.metrics.get(metric).map(|d| d.mean)
    }

    pub fn primary(&self) -> Option<&RunDistribution> {
        self.metrics.get(MetricSet::primary_name(self.task))
    }
}

/// Fits with a registry model, or the dummy baseline for [`DUMMY_MODEL`].
pub fn fit_named(model: &str, params: &Assignment, x: &DMatrix<f64>, y: &[f64], task: Task, seed: u64) -> Result<FittedModel> {
    if model == DUMMY_MODEL {
        return fit_dummy(task, y, x.ncols());
    }
    fit(&find_model(model)?, params, x, y, task, seed)
}

/// One split/transform/fit/score pass.
pub fn evaluate_once(
    model: &str,
    fe: FeTechnique,
    params: &Assignment,
    x: &DMatrix<f64>,
    y: &[f64],
    task: Task,
    split_seed: u64,
    fit_seed: u64,
    opts: &EvalOptions,
) -> Result<MetricSet> {
    let strata = (task == Task::Classification).then_some(y);
    let s = split_indices(x.nrows(), opts.train_ratio, split_seed, strata)?;
    let xtr = x.select_rows(&s.train);
    let xte = x.select_rows(&s.test);
    let ytr: Vec<f64> = s.train.iter().map(|&i| y[i]).collect();
    let yte: Vec<f64> = s.test.iter().map(|&i| y[i]).collect();
    let (xtr, xte, _) = fit_apply_transform(fe, &xtr, &xte)?;
    let m = fit_named(model, params, &xtr, &ytr, task, fit_seed)?;
    let pred = m.predict(&xte)?;
    score_with_positive(&yte, &pred.values, task, opts.positive_label)
}

/// Repeats [`evaluate_once`] `opts.runs` times. Run `i` uses
/// `derive_seed(master_seed, i)` for fitting and, with `vary_split`, for the
/// split. Failed runs are recorded and left out of the distributions.
pub fn repeated_eval_xy(
    cell: &PlanCell,
    task: Task,
    params: &Assignment,
    x: &DMatrix<f64>,
    y: &[f64],
    opts: &EvalOptions,
) -> Result<CellResult> {
    if opts.runs == 0 {
        return Err(Error::config("run count must be at least 1"));
    }
    if x.nrows() != y.len() {
        return Err(Error::invalid("predictor and target row counts differ"));
    }
    if cell.model != DUMMY_MODEL {
        find_model(&cell.model)?.search_space.validate_partial(params)?;
    }
    let outcomes: Vec<Result<MetricSet>> = (0..opts.runs)
        .into_par_iter()
        .map(|i| {
            let seed = derive_seed(opts.master_seed, i as u64);
            let split_seed = if opts.vary_split { seed } else { opts.master_seed };
            evaluate_once(&cell.model, cell.fe, params, x, y, task, split_seed, seed, opts)
        })
        .collect();
    let mut per_metric: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut failures = BTreeMap::new();
    for (i, o) in outcomes.into_iter().enumerate() {
        match o {
            Ok(m) => {
                for (name, v) in m.values() {
                    per_metric.entry(name.to_string()).or_default().push(v);
                }
            }
            Err(e) => {
                failures.insert(i, e.to_string());
            }
        }
    }
    if !failures.is_empty() {
        log::warn!("{}/{}/{}: {} of {} runs failed", cell.fe, cell.model, cell.target, failures.len(), opts.runs);
    }
    let metrics = per_metric
        .into_iter()
        .map(|(k, v)| Ok((k, RunDistribution::new(v)?)))
        .collect::<Result<_>>()?;
    Ok(CellResult { cell: cell.clone(), task, params: params.clone(), metrics, failures })
}

/// Repeated evaluation of a plan cell on table columns.
pub fn repeated_eval<S: AsRef<str>>(
    cell: &PlanCell,
    task: Task,
    params: &Assignment,
    table: &UserFeatureTable,
    predictors: &[S],
    opts: &EvalOptions,
) -> Result<CellResult> {
    let x = table.to_matrix(predictors)?;
    let y = table.column_values(&cell.target)?;
    repeated_eval_xy(cell, task, params, &x, y, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng;
    use rand::Rng as _;

    fn data(n: usize) -> (DMatrix<f64>, Vec<f64>) {
        let mut r = rng(5);
        let x = DMatrix::from_fn(n, 2, |_, _| r.random::<f64>());
        let y = (0..n).map(|i| 3.0 * x[(i, 0)] - x[(i, 1)] + 0.1 * r.random::<f64>()).collect();
        (x, y)
    }

    fn cell(model: &str) -> PlanCell {
        PlanCell { fe: FeTechnique::Standardise, model: model.into(), target: "y".into() }
    }

    #[test]
    fn reproducible_and_fixed_split_has_no_variance() {
        let (x, y) = data(120);
        let opts = EvalOptions { runs: 8, ..Default::default() };
        let a = repeated_eval_xy(&cell("OLS"), Task::Regression, &Assignment::new(), &x, &y, &opts).unwrap();
        let b = repeated_eval_xy(&cell("OLS"), Task::Regression, &Assignment::new(), &x, &y, &opts).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.metrics["r2"].values.len(), 8);
        assert!(a.metrics["r2"].std > 0.0);
        let fixed = EvalOptions { vary_split: false, ..opts };
        let c = repeated_eval_xy(&cell("OLS"), Task::Regression, &Assignment::new(), &x, &y, &fixed).unwrap();
        assert_eq!(c.metrics["r2"].std, 0.0);
    }

    #[test]
    fn single_run_summary() {
        let (x, y) = data(50);
        let opts = EvalOptions { runs: 1, ..Default::default() };
        let r = repeated_eval_xy(&cell("OLS"), Task::Regression, &Assignment::new(), &x, &y, &opts).unwrap();
        let d = &r.metrics["rmse"];
        assert_eq!((d.mean, d.std, d.median), (d.values[0], 0.0, d.values[0]));
    }

    #[test]
    fn dummy_r2_near_zero() {
        let (x, y) = data(400);
        let opts = EvalOptions { runs: 50, ..Default::default() };
        let r = repeated_eval_xy(&cell(DUMMY_MODEL), Task::Regression, &Assignment::new(), &x, &y, &opts).unwrap();
        assert!(r.metrics["r2"].mean.abs() < 0.05, "{}", r.metrics["r2"].mean);
        assert!(r.metrics["r2"].values.iter().all(|v| *v <= 0.0));
    }

    #[test]
    fn all_failed_is_na() {
        let x = DMatrix::from_element(10, 1, 1.0);
        let y = vec![2.0; 10];
        let opts = EvalOptions { runs: 3, ..Default::default() };
        let r = repeated_eval_xy(&cell("OLS"), Task::Regression, &Assignment::new(), &x, &y, &opts).unwrap();
        assert!(r.is_na());
        assert_eq!(r.failures.len(), 3);
    }
}
