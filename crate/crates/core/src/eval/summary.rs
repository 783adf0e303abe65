use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::repeated::CellResult;
use crate::data::Task;
use crate::error::{Error, Result};
use crate::stats::{mean, median, std_pop};

/// Mean, population standard deviation and median of a run distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
    pub median: f64,
    pub text: String,
}

/// Rounds to three decimals and prints at least one decimal digit:
/// 2 becomes "2.0", 0.8164 becomes "0.816".
pub fn format_number(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let mut s = format!("{:.3}", x);
    while s.ends_with('0') && !s.ends_with(".0") {
        s.pop();
    }
    if s == "-0.0" {
        s = "0.0".into();
    }
    s
}

pub fn summarize(values: &[f64]) -> Result<Summary> {
    if values.is_empty() {
        return Err(Error::invalid("cannot summarize an empty distribution"));
    }
    let (m, s, med) = (mean(values), std_pop(values), median(values));
    Ok(Summary {
        mean: m,
        std: s,
        median: med,
        text: format!("{} ± {} ({})", format_number(m), format_number(s), format_number(med)),
    })
}

fn compare(a: &CellResult, b: &CellResult, task: Task) -> Ordering {
    let get = |c: &CellResult, k: &str| c.mean(k).unwrap_or(f64::NAN);
    // Larger is better for the first key of each pair, so compare b to a.
    let (primary, secondary, secondary_higher) = match task {
        Task::Regression => ("r2", "rmse", false),
        Task::Classification => ("f1", "accuracy", true),
    };
    get(b, primary)
        .total_cmp(&get(a, primary))
        .then_with(|| {
            if secondary_higher {
                get(b, secondary).total_cmp(&get(a, secondary))
            } else {
                get(a, secondary).total_cmp(&get(b, secondary))
            }
        })
        .then_with(|| (a.cell.fe.name(), &a.cell.model).cmp(&(b.cell.fe.name(), &b.cell.model)))
}

/// Best non-N/A cell: highest mean R^2 (then lowest RMSE) for regression,
/// highest mean F1 (then highest accuracy) for classification, then the
/// lexicographically first (FE, model).
pub fn select_best(results: &[CellResult], task: Task) -> Result<&CellResult> {
    rank_cells(results, task).into_iter().next().ok_or_else(|| Error::Undefined("every cell is N/A".into()))
}

/// Non-N/A cells of `task`, best first.
pub fn rank_cells(results: &[CellResult], task: Task) -> Vec<&CellResult> {
    let mut v: Vec<&CellResult> = results.iter().filter(|c| c.task == task && !c.is_na()).collect();
    v.sort_by(|a, b| compare(a, b, task));
    v
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::data::PlanCell;
    use crate::eval::RunDistribution;
    use crate::features::FeTechnique;
    use crate::hpo::Assignment;

    #[test]
    fn formats() {
        assert_eq!(summarize(&[1.0, 2.0, 3.0]).unwrap().text, "2.0 ± 0.816 (2.0)");
        assert_eq!(summarize(&[5.0]).unwrap().text, "5.0 ± 0.0 (5.0)");
        assert_eq!(summarize(&[0.7; 100]).unwrap().std, 0.0);
        assert_eq!(format_number(0.8214), "0.821");
        assert_eq!(format_number(-0.0001), "0.0");
        assert_eq!(format_number(1255.0), "1255.0");
        assert!(summarize(&[]).is_err());
    }

    fn cell(fe: FeTechnique, model: &str, r2: f64, rmse: f64) -> CellResult {
        let mut metrics = BTreeMap::new();
        metrics.insert("r2".into(), RunDistribution::new(vec![r2]).unwrap());
        metrics.insert("rmse".into(), RunDistribution::new(vec![rmse]).unwrap());
        CellResult {
            cell: PlanCell { fe, model: model.into(), target: "Answers".into() },
            task: Task::Regression,
            params: Assignment::new(),
            metrics,
            failures: BTreeMap::new(),
        }
    }

    #[test]
    fn best_and_tie_breaks() {
        let cells = vec![
            cell(FeTechnique::None, "Extreme Gradient Boosting", 0.716, 0.5),
            cell(FeTechnique::Standardise, "Bagging", 0.821, 0.5),
        ];
        assert_eq!(select_best(&cells, Task::Regression).unwrap().cell.model, "Bagging");
        let tie = vec![cell(FeTechnique::Log, "B", 0.5, 0.4), cell(FeTechnique::Log, "A", 0.5, 0.3)];
        assert_eq!(select_best(&tie, Task::Regression).unwrap().cell.model, "A");
        let lex = vec![cell(FeTechnique::Log, "B", 0.5, 0.3), cell(FeTechnique::Log, "A", 0.5, 0.3)];
        assert_eq!(select_best(&lex, Task::Regression).unwrap().cell.model, "A");
        assert!(select_best(&[], Task::Regression).is_err());
    }
}
