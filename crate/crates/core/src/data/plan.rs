use serde::{Deserialize, Serialize};

use super::schema::TargetSpec;
use crate::error::{Error, Result};
use crate::features::FeTechnique;
use crate::models::ModelSpec;

/// One (feature engineering, model, target) evaluation.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PlanCell {
    pub fe: FeTechnique,
    pub model: String,
    pub target: String,
}

/// The FE x model x target grid of one research question.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub cells: Vec<PlanCell>,
    pub seed: u64,
}

impl ExperimentPlan {
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }
}

/// Full cross product of models, FE techniques and targets, ordered
/// lexicographically by (FE name, model name, target name).
///
/// Every model must support the task of every target; the registry filter
/// is the caller's job and a mismatch here is a configuration error.
pub fn build_plan(
    models: &[&ModelSpec],
    fe: &[FeTechnique],
    targets: &[TargetSpec],
    seed: u64,
) -> Result<ExperimentPlan> {
    if models.is_empty() {
        return Err(Error::config("experiment plan needs at least one model"));
    }
    if fe.is_empty() {
        return Err(Error::config("experiment plan needs at least one FE technique"));
    }
    if targets.is_empty() {
        return Err(Error::config("experiment plan needs at least one target"));
    }
    for m in models {
        for t in targets {
            if !m.supports(t.task) {
                return Err(Error::config(format!(
                    "model `{}` does not support {} target `{}`",
                    m.name, t.task, t.name
                )));
            }
        }
    }
    let mut fe_sorted: Vec<FeTechnique> = fe.to_vec();
    fe_sorted.sort_by_key(|f| f.name());
    fe_sorted.dedup();
    let mut model_names: Vec<&str> = models.iter().map(|m| m.name.as_str()).collect();
    model_names.sort_unstable();
    model_names.dedup();
    let mut target_names: Vec<&str> = targets.iter().map(|t| t.name.as_str()).collect();
    target_names.sort_unstable();
    target_names.dedup();

    let mut cells = Vec::with_capacity(fe_sorted.len() * model_names.len() * target_names.len());
    for f in &fe_sorted {
        for m in &model_names {
            for t in &target_names {
                cells.push(PlanCell {
                    fe: *f,
                    model: (*m).to_string(),
                    target: (*t).to_string(),
                });
            }
        }
    }
    Ok(ExperimentPlan { cells, seed })
}
