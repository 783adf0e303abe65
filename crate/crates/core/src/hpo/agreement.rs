use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ga::{ga_optimize, GaConfig};
use super::space::{Assignment, ParamValue, SearchSpace};
use super::{Objective, OptimizationResult};
use crate::data::PlanCell;
use crate::error::{Error, Result};
use crate::eval::{rank_cells, CellResult};
use crate::rng::derive_seed_str;

pub const TOLERANCE_PERCENT: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamAgreement {
    pub bo: ParamValue,
    pub ga: ParamValue,
    /// |bo - ga| / |bo| * 100 for numeric values (|bo - ga| * 100 when bo is
    /// zero); `None` for categorical and boolean values.
    pub diff_percent: Option<f64>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub per_param: BTreeMap<String, ParamAgreement>,
    pub tolerance_percent: f64,
    /// Which side the percentage is relative to; always "bo".
    pub denominator: String,
    pub pass: bool,
}

/// Compares a BO and a GA assignment parameter by parameter.
pub fn agreement_check(bo: &Assignment, ga: &Assignment, tolerance_percent: f64) -> Result<AgreementReport> {
    let names_bo: Vec<&String> = bo.0.keys().collect();
    let names_ga: Vec<&String> = ga.0.keys().collect();
    if names_bo != names_ga {
        return Err(Error::invalid(format!("parameter names differ: {names_bo:?} vs {names_ga:?}")));
    }
    let mut per_param = BTreeMap::new();
    for (name, b) in &bo.0 {
        let g = &ga.0[name];
        let entry = match (b.as_f64(), g.as_f64()) {
            (Some(x), Some(y)) => {
                let delta = (x - y).abs();
                let d = if x == 0.0 { delta * 100.0 } else { delta / x.abs() * 100.0 };
                ParamAgreement { bo: b.clone(), ga: g.clone(), diff_percent: Some(d), pass: d <= tolerance_percent }
            }
            _ => ParamAgreement { bo: b.clone(), ga: g.clone(), diff_percent: None, pass: b == g },
        };
        per_param.insert(name.clone(), entry);
    }
    let pass = per_param.values().all(|p| p.pass);
    Ok(AgreementReport { per_param, tolerance_percent, denominator: "bo".into(), pass })
}

/// GA validation of one grid cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefineOutcome {
    pub cell: PlanCell,
    pub bo_params: Assignment,
    pub ga: OptimizationResult,
    pub report: AgreementReport,
}

/// Re-optimizes the `k` best cells with the GA and checks agreement with
/// their BO parameters (`CellResult::params`). The factory supplies the
/// search space and the objective of a cell.
pub fn refine_top_k<'a, F>(
    grid: &[CellResult],
    k: usize,
    objective_factory: F,
    ga: &GaConfig,
    seed: u64,
) -> Result<Vec<RefineOutcome>>
where
    F: Fn(&PlanCell) -> Result<(SearchSpace, Objective<'a>)> + Sync,
{
    let first = grid.first().ok_or_else(|| Error::invalid("no grid results to refine"))?;
    let ranked = rank_cells(grid, first.task);
    if k > ranked.len() {
        log::warn!("requested top {k} of only {} evaluated cells", ranked.len());
    }
    ranked
        .into_iter()
        .take(k)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|c| {
            let (space, objective) = objective_factory(&c.cell)?;
            let cell_seed = derive_seed_str(seed, &format!("{}/{}/{}", c.cell.fe, c.cell.model, c.cell.target));
            let res = ga_optimize(|a: &Assignment| objective(a), &space, ga, cell_seed)?;
            let report = agreement_check(&c.params, &res.best_params, TOLERANCE_PERCENT)?;
            Ok(RefineOutcome { cell: c.cell.clone(), bo_params: c.params.clone(), ga: res, report })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn num(pairs: &[(&str, ParamValue)]) -> Assignment {
        pairs.iter().fold(Assignment::new(), |a, (k, v)| a.set(k, v.clone()))
    }

    #[test]
    fn published_rows() {
        for (bo, ga, want) in [(1199, 1255, 4.671), (77, 79, 2.597)] {
            let r = agreement_check(&num(&[("n", ParamValue::Int(bo))]), &num(&[("n", ParamValue::Int(ga))]), 5.0)
                .unwrap();
            let d = r.per_param["n"].diff_percent.unwrap();
            assert!((d - want).abs() < 5e-4, "{d}");
            assert!(r.pass);
        }
        let r = agreement_check(&num(&[("n", ParamValue::Int(100))]), &num(&[("n", ParamValue::Int(110))]), 5.0)
            .unwrap();
        assert!((r.per_param["n"].diff_percent.unwrap() - 10.0).abs() < 1e-12);
        assert!(!r.pass);
    }

    #[test]
    fn categorical_and_mismatch() {
        let a = num(&[("k", ParamValue::Str("rbf".into()))]);
        let b = num(&[("k", ParamValue::Str("poly".into()))]);
        assert!(agreement_check(&a, &a, 5.0).unwrap().pass);
        assert!(!agreement_check(&a, &b, 5.0).unwrap().pass);
        assert!(agreement_check(&a, &num(&[("j", ParamValue::Bool(true))]), 5.0).is_err());
        let z = agreement_check(&num(&[("x", ParamValue::Float(0.0))]), &num(&[("x", ParamValue::Float(0.01))]), 5.0)
            .unwrap();
        assert!((z.per_param["x"].diff_percent.unwrap() - 1.0).abs() < 1e-12);
    }
}
