use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{DataSource, RunConfig};
use crate::data::{build_plan, generate_synthetic_users, FeatureSchema, PlanCell, Task, UserFeatureTable};
use crate::error::{Error, Result};
use crate::eval::{
    conover_iman, evaluate_once, positive_label_for, rank_cells, repeated_eval_xy, select_best, CellResult,
    EvalOptions, MetricSet, SignificanceReport, ALPHA, DUMMY_MODEL,
};
use crate::features::{drop_composites, prune_by_vif, FeTechnique, VifReport};
use crate::hpo::{refine_top_k, tpe_optimize_with, Assignment, Objective, RefineOutcome, SearchSpace};
use crate::impute::{apply_strategy_map_with_report, EmReport};
use crate::models::{find_model, ModelSpec};
use crate::rng::{derive_seed, derive_seed_str};

/// Data after imputation, composite removal and VIF pruning.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub table: UserFeatureTable,
    pub predictors: Vec<String>,
    pub vif: VifReport,
    pub vif_removed: Vec<String>,
    pub em_reports: Vec<EmReport>,
}

impl Prepared {
    pub fn design(&self) -> Result<DMatrix<f64>> {
        self.table.to_matrix(&self.predictors)
    }
}

pub fn load_data(cfg: &RunConfig) -> Result<UserFeatureTable> {
    match &cfg.data {
        DataSource::Synthetic { rows, seed, profile } => {
            generate_synthetic_users(*rows, seed.unwrap_or(cfg.seed), profile)
        }
        DataSource::File { path, delimiter } => {
            let d = u8::try_from(*delimiter).map_err(|_| Error::config("delimiter must be a single-byte character"))?;
            UserFeatureTable::load(path, &FeatureSchema::user_level(), d)
        }
    }
}

/// Imputes a table with the configured strategy map.
pub fn impute_table(cfg: &RunConfig, table: &UserFeatureTable) -> Result<(UserFeatureTable, Vec<EmReport>)> {
    let map = cfg.imputation.strategy_map(table.schema())?;
    let out = apply_strategy_map_with_report(table, &map)?;
    Ok((out.table, out.em_reports))
}

/// Loads, imputes, drops composites and prunes the question's predictors.
pub fn prepare(cfg: &RunConfig) -> Result<Prepared> {
    let rq = cfg.rq.rq().ok_or_else(|| Error::config("feature preparation needs rq = RQ1, RQ2 or RQ3"))?;
    let raw = load_data(cfg).map_err(|e| e.in_stage("load"))?;
    let (imputed, em_reports) = impute_table(cfg, &raw).map_err(|e| e.in_stage("impute"))?;
    let composites = imputed.schema().composites();
    let table = drop_composites(&imputed, &composites).map_err(|e| e.in_stage("features"))?;
    let candidates: Vec<String> =
        table.schema().predictors(rq).into_iter().filter(|p| table.schema().contains(p)).collect();
    let (table, vif, vif_removed) =
        prune_by_vif(&table, &candidates, cfg.vif_threshold).map_err(|e| e.in_stage("features"))?;
    let predictors = candidates.into_iter().filter(|c| !vif_removed.contains(c)).collect();
    Ok(Prepared { table, predictors, vif, vif_removed, em_reports })
}

/// One plan cell in the report; N/A cells carry the reason.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub result: CellResult,
    /// Best TPE objective (negated primary metric), when tuning ran.
    pub tuning_objective: Option<f64>,
    pub tuning_trials: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetSignificance {
    pub target: String,
    /// `fe/model` label of each group, in test order.
    pub groups: Vec<String>,
    pub report: Option<SignificanceReport>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestCell {
    pub target: String,
    pub cell: PlanCell,
    pub params: Assignment,
    pub primary_metric: String,
    pub summary: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
    pub runs: usize,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preprocessing {
    pub rows: usize,
    pub predictors: Vec<String>,
    pub vif_removed: Vec<String>,
    pub vif: VifReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub rq: String,
    pub task: Task,
    pub provenance: Provenance,
    pub preprocessing: Preprocessing,
    pub cells: Vec<CellReport>,
    pub baselines: Vec<CellResult>,
    pub best: Vec<BestCell>,
    pub refinements: Vec<RefineOutcome>,
    pub significance: Vec<TargetSignificance>,
}

impl BenchmarkReport {
    pub fn cell_results(&self) -> Vec<CellResult> {
        self.cells.iter().map(|c| c.result.clone()).collect()
    }
}

fn cell_key(cell: &PlanCell) -> String {
    format!("{}/{}/{}", cell.fe, cell.model, cell.target)
}

fn eval_options(cfg: &RunConfig, target: &str, runs: usize, seed: u64) -> EvalOptions {
    EvalOptions {
        runs,
        master_seed: seed,
        train_ratio: cfg.train_ratio,
        vary_split: true,
        positive_label: positive_label_for(target),
    }
}

/// Search space and tuning objective of a cell: the negated mean primary
/// metric over `hpo.inner_runs` seeded train/test splits.
pub fn cell_objective<'a>(
    cfg: &'a RunConfig,
    x: &'a DMatrix<f64>,
    targets: &'a BTreeMap<String, Vec<f64>>,
    task: Task,
    cell: &PlanCell,
) -> Result<(SearchSpace, Objective<'a>)> {
    let space = if cell.model == DUMMY_MODEL { SearchSpace::new() } else { find_model(&cell.model)?.search_space };
    let y = targets.get(&cell.target).ok_or_else(|| Error::Schema(cell.target.clone()))?;
    let seed = derive_seed_str(cfg.seed, &format!("tune/{}", cell_key(cell)));
    let opts = eval_options(cfg, &cell.target, 1, seed);
    let (model, fe) = (cell.model.clone(), cell.fe);
    let objective = move |params: &Assignment| -> Result<f64> {
        let mut total = 0.0;
        for j in 0..cfg.hpo.inner_runs {
            let s = derive_seed(seed, j as u64);
            let m = evaluate_once(&model, fe, params, x, y, task, s, s, &opts)?;
            total += m.get(MetricSet::primary_name(task)).expect("primary metric present");
        }
        Ok(-total / cfg.hpo.inner_runs as f64)
    };
    Ok((space, Box::new(objective)))
}

fn run_cell(
    cfg: &RunConfig,
    x: &DMatrix<f64>,
    targets: &BTreeMap<String, Vec<f64>>,
    task: Task,
    cell: &PlanCell,
) -> CellReport {
    let na = |error: String, trials: usize| CellReport {
        result: CellResult {
            cell: cell.clone(),
            task,
            params: Assignment::new(),
            metrics: BTreeMap::new(),
            failures: BTreeMap::new(),
        },
        tuning_objective: None,
        tuning_trials: trials,
        error: Some(error),
    };
    let (params, tuning_objective) = if cfg.hpo.tpe_trials == 0 || cell.model == DUMMY_MODEL {
        (Assignment::new(), None)
    } else {
        let tuned = cell_objective(cfg, x, targets, task, cell).and_then(|(space, objective)| {
            let seed = derive_seed_str(cfg.seed, &format!("tpe/{}", cell_key(cell)));
            tpe_optimize_with(objective, &space, cfg.hpo.tpe_trials, seed, &cfg.hpo.tpe)
        });
        match tuned {
            Ok(r) => (r.best_params, Some(r.best_objective)),
            Err(e) => {
                log::warn!("{}: tuning failed: {e}", cell_key(cell));
                return na(format!("tuning: {e}"), cfg.hpo.tpe_trials);
            }
        }
    };
    let y = &targets[&cell.target];
    let opts = eval_options(cfg, &cell.target, cfg.runs, cfg.seed);
    match repeated_eval_xy(cell, task, &params, x, y, &opts) {
        Ok(result) => {
            let error = result.is_na().then(|| "every evaluation run failed".to_string());
            CellReport { result, tuning_objective, tuning_trials: cfg.hpo.tpe_trials, error }
        }
        Err(e) => na(format!("evaluation: {e}"), cfg.hpo.tpe_trials),
    }
}

fn significance_for(target: &str, cells: &[&CellResult]) -> TargetSignificance {
    let usable: Vec<&CellResult> = cells.iter().copied().filter(|c| c.primary().is_some()).collect();
    let groups: Vec<String> = usable.iter().map(|c| format!("{}/{}", c.cell.fe, c.cell.model)).collect();
    let values: Vec<Vec<f64>> = usable.iter().map(|c| c.primary().expect("filtered").values.clone()).collect();
    match conover_iman(&values, ALPHA) {
        Ok(report) => TargetSignificance { target: target.to_string(), groups, report: Some(report), note: None },
        Err(e) => TargetSignificance { target: target.to_string(), groups, report: None, note: Some(e.to_string()) },
    }
}

/// Runs the full grid for one research question.
pub fn run_benchmark(cfg: &RunConfig) -> Result<BenchmarkReport> {
    cfg.validate()?;
    let task = cfg.task().ok_or_else(|| Error::config("benchmarking needs rq = RQ1, RQ2 or RQ3"))?;
    let specs: Vec<ModelSpec> = cfg.model_specs()?;
    let target_specs = cfg.target_specs()?;
    let spec_refs: Vec<&ModelSpec> = specs.iter().collect();
    let plan = build_plan(&spec_refs, &cfg.fe, &target_specs, cfg.seed)?;

    let prepared = prepare(cfg)?;
    let x = prepared.design().map_err(|e| e.in_stage("features"))?;
    let targets: BTreeMap<String, Vec<f64>> = target_specs
        .iter()
        .map(|t| Ok((t.name.clone(), prepared.table.column_values(&t.name)?.to_vec())))
        .collect::<Result<_>>()
        .map_err(|e| e.in_stage("features"))?;

    let cells: Vec<CellReport> = plan.cells.par_iter().map(|c| run_cell(cfg, &x, &targets, task, c)).collect();

    let baselines: Vec<CellResult> = if cfg.baseline {
        target_specs
            .iter()
            .map(|t| {
                let cell = PlanCell { fe: FeTechnique::None, model: DUMMY_MODEL.into(), target: t.name.clone() };
                let opts = eval_options(cfg, &t.name, cfg.runs, cfg.seed);
                repeated_eval_xy(&cell, task, &Assignment::new(), &x, &targets[&t.name], &opts)
                    .map_err(|e| e.in_stage("baseline"))
            })
            .collect::<Result<_>>()?
    } else {
        Vec::new()
    };

    let mut best = Vec::new();
    let mut refinements = Vec::new();
    let mut significance = Vec::new();
    for t in &target_specs {
        let of_target: Vec<CellResult> =
            cells.iter().filter(|c| c.result.cell.target == t.name).map(|c| c.result.clone()).collect();
        let refs: Vec<&CellResult> = of_target.iter().collect();
        significance.push(significance_for(&t.name, &refs));
        match select_best(&of_target, task) {
            Ok(b) => {
                let primary = MetricSet::primary_name(task);
                best.push(BestCell {
                    target: t.name.clone(),
                    cell: b.cell.clone(),
                    params: b.params.clone(),
                    primary_metric: primary.to_string(),
                    summary: b.metrics[primary].summary().text,
                });
            }
            Err(e) => log::warn!("{}: {e}", t.name),
        }
        let ranked = rank_cells(&of_target, task);
        if cfg.hpo.top_k > 0 && cfg.hpo.tpe_trials > 0 && !ranked.is_empty() {
            let factory = |cell: &PlanCell| cell_objective(cfg, &x, &targets, task, cell);
            let seed = derive_seed_str(cfg.seed, "ga");
            refinements.extend(
                refine_top_k(&of_target, cfg.hpo.top_k, factory, &cfg.hpo.ga, seed).map_err(|e| e.in_stage("hpo"))?,
            );
        }
    }

    Ok(BenchmarkReport {
        rq: cfg.rq.to_string(),
        task,
        provenance: Provenance {
            config_hash: cfg.content_hash(),
            seed: cfg.seed,
            runs: cfg.runs,
            version: env!("CARGO_PKG_VERSION").to_string(),
        },
        preprocessing: Preprocessing {
            rows: prepared.table.n_rows(),
            predictors: prepared.predictors.clone(),
            vif_removed: prepared.vif_removed.clone(),
            vif: prepared.vif.clone(),
        },
        cells,
        baselines,
        best,
        refinements,
        significance,
    })
}
