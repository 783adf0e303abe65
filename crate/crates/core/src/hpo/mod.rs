//! Hyperparameter search spaces and optimizers. Both optimizers minimize;
//! callers maximizing a score pass its negation.

mod agreement;
mod ga;
mod space;
mod tpe;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use agreement::{agreement_check, refine_top_k, AgreementReport, ParamAgreement, RefineOutcome, TOLERANCE_PERCENT};
pub use ga::{ga_optimize, GaConfig};
pub use space::{Assignment, Domain, Param, ParamValue, SearchSpace};
pub use tpe::{tpe_optimize, tpe_optimize_with, TpeConfig};

/// A boxed objective, as produced by objective factories.
pub type Objective<'a> = Box<dyn Fn(&Assignment) -> Result<f64> + Sync + 'a>;

/// One objective evaluation. `objective` is `None` when the evaluation
/// failed; the message is kept in `error`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub params: Assignment,
    pub objective: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub best_params: Assignment,
    pub best_objective: f64,
    pub trials: Vec<Trial>,
    pub budget_used: usize,
}

impl OptimizationResult {
    fn from_trials(trials: Vec<Trial>) -> Result<Self> {
        let best = trials
            .iter()
            .filter_map(|t| t.objective.map(|o| (o, t)))
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .map(|(o, t)| (o, t.params.clone()));
        match best {
            Some((best_objective, best_params)) => {
                Ok(OptimizationResult { best_params, best_objective, budget_used: trials.len(), trials })
            }
            None => {
                let last = trials.iter().rev().find_map(|t| t.error.clone()).unwrap_or_default();
                Err(Error::Undefined(format!("all {} trials failed; last error: {last}", trials.len())))
            }
        }
    }

    /// Running minimum of successful objectives, one entry per trial.
    pub fn best_so_far(&self) -> Vec<f64> {
        let mut best = f64::INFINITY;
        self.trials
            .iter()
            .map(|t| {
                if let Some(o) = t.objective {
                    best = best.min(o);
                }
                best
            })
            .collect()
    }
}

fn evaluate<F>(objective: &F, params: Assignment) -> Trial
where
    F: Fn(&Assignment) -> Result<f64> + ?Sized,
{
    match objective(&params) {
        Ok(v) if v.is_finite() => Trial { params, objective: Some(v), error: None },
        Ok(v) => Trial { params, objective: None, error: Some(format!("non-finite objective {v}")) },
        Err(e) => Trial { params, objective: None, error: Some(e.to_string()) },
    }
}
