use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::UserFeatureTable;
use crate::error::{Error, Result};
use crate::util::float_inf;

/// Default VIF cut-off; columns strictly above it are removed.
pub const VIF_THRESHOLD: f64 = 5.0;

/// 1 - R^2 below this counts as an exact linear dependence.
const PERFECT_FIT: f64 = 1e-10;

/// Product-moment correlation.
pub fn pearson_r(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::invalid("pearson_r needs two equal-length vectors of length >= 2"));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Undefined("correlation with a constant vector".into()));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VifEntry {
    pub name: String,
    #[serde(with = "float_inf")]
    pub vif: f64,
    /// The other columns are themselves linearly dependent, so the auxiliary
    /// regression was solved in the least-norm sense.
    #[serde(default)]
    pub rank_deficient: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VifReport {
    pub entries: Vec<VifEntry>,
    pub threshold: f64,
}

impl VifReport {
    /// Report from precomputed values, e.g. a published VIF table.
    pub fn from_values<S: AsRef<str>>(values: &[(S, f64)], threshold: f64) -> Self {
        VifReport {
            entries: values
                .iter()
                .map(|(n, v)| VifEntry { name: n.as_ref().to_string(), vif: *v, rank_deficient: false })
                .collect(),
            threshold,
        }
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.entries.iter().find(|e| e.name == name).map(|e| e.vif)
    }

    /// Columns strictly above the threshold, in report order.
    pub fn removed(&self) -> Vec<String> {
        self.entries.iter().filter(|e| e.vif > self.threshold).map(|e| e.name.clone()).collect()
    }

    pub fn retained(&self) -> Vec<String> {
        self.entries.iter().filter(|e| e.vif <= self.threshold).map(|e| e.name.clone()).collect()
    }
}

/// VIF of every column of `x`. Each column's R^2 against the others comes
/// from the correlation matrix: R^2_i = r_i' C_{-i}^+ r_i.
pub fn compute_vif<S: AsRef<str>>(x: &DMatrix<f64>, names: &[S], threshold: f64) -> Result<VifReport> {
    let (n, p) = x.shape();
    if names.len() != p {
        return Err(Error::invalid("one name per predictor column required"));
    }
    if p < 2 {
        return Err(Error::invalid("VIF needs at least two predictor columns"));
    }
    if n <= p {
        return Err(Error::invalid(format!("VIF needs more rows than columns ({n} rows, {p} columns)")));
    }
    let mut z = x.clone();
    let mut constant = vec![false; p];
    for j in 0..p {
        let mut c = z.column_mut(j);
        let m = c.mean();
        c.add_scalar_mut(-m);
        let norm = c.norm();
        if norm == 0.0 {
            constant[j] = true;
        } else {
            c /= norm;
        }
    }
    let corr = z.transpose() * &z;

    let mut entries = Vec::with_capacity(p);
    for i in 0..p {
        let name = names[i].as_ref().to_string();
        if constant[i] {
            entries.push(VifEntry { name, vif: f64::INFINITY, rank_deficient: true });
            continue;
        }
        let others: Vec<usize> = (0..p).filter(|&j| j != i && !constant[j]).collect();
        let k = others.len();
        let c_oo = DMatrix::from_fn(k, k, |a, b| corr[(others[a], others[b])]);
        let r = DVector::from_fn(k, |a, _| corr[(others[a], i)]);
        let svd = c_oo.svd(true, true);
        let tol = 1e-12 * svd.singular_values.max().max(1.0) * k as f64;
        let rank = svd.rank(tol);
        let beta = svd.solve(&r, tol).map_err(|e| Error::Undefined(e.to_string()))?;
        let r2 = r.dot(&beta).clamp(0.0, 1.0);
        let resid = 1.0 - r2;
        let vif = if resid < PERFECT_FIT { f64::INFINITY } else { 1.0 / resid };
        entries.push(VifEntry { name, vif, rank_deficient: rank < k || k + 1 < p });
    }
    Ok(VifReport { entries, threshold })
}

/// Single-pass pruning: VIF is computed once over `predictors` and every
/// column strictly above `threshold` is dropped from the table.
pub fn prune_by_vif<S: AsRef<str>>(
    table: &UserFeatureTable,
    predictors: &[S],
    threshold: f64,
) -> Result<(UserFeatureTable, VifReport, Vec<String>)> {
    let x = table.to_matrix(predictors)?;
    let report = compute_vif(&x, predictors, threshold)?;
    let removed = report.removed();
    if removed.len() == predictors.len() {
        return Err(Error::config(format!("every predictor exceeds VIF threshold {threshold}")));
    }
    let drop: BTreeSet<String> = removed.iter().cloned().collect();
    Ok((table.drop_columns(&drop), report, removed))
}

/// Removes the named composite columns. Every rule must name a column of
/// the table.
pub fn drop_composites<S: AsRef<str>>(table: &UserFeatureTable, rules: &[S]) -> Result<UserFeatureTable> {
    let mut drop = BTreeSet::new();
    for r in rules {
        table.schema().require(r.as_ref())?;
        drop.insert(r.as_ref().to_string());
    }
    Ok(table.drop_columns(&drop))
}

/// Default composite rules: every column flagged excluded-composite.
pub fn composite_rules(table: &UserFeatureTable) -> Vec<String> {
    table.schema().composites()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::FeatureSchema;
    use crate::rng::rng;
    use rand::Rng as _;

    #[test]
    fn pearson_examples() {
        assert!((pearson_r(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!((pearson_r(&[1.0, 2.0, 3.0], &[6.0, 4.0, 2.0]).unwrap() + 1.0).abs() < 1e-15);
        // Hand evaluation: sxy = 3, sxx = 2, syy = 14/3.
        let oracle = 3.0 / (2.0f64 * 14.0 / 3.0).sqrt();
        let r = pearson_r(&[1.0, 2.0, 3.0], &[1.0, 2.0, 4.0]).unwrap();
        assert!((r - oracle).abs() < 1e-15);
        assert!((r - 0.982).abs() < 5e-4);
        assert!(matches!(pearson_r(&[1.0, 1.0], &[1.0, 2.0]), Err(Error::Undefined(_))));
    }

    #[test]
    fn orthogonal_columns_have_unit_vif() {
        // Centered, mutually orthogonal columns.
        let x = DMatrix::from_row_slice(4, 3, &[1., 1., 1., 1., -1., -1., -1., 1., -1., -1., -1., 1.]);
        let rep = compute_vif(&x, &["a", "b", "c"], 5.0).unwrap();
        for e in &rep.entries {
            assert!((e.vif - 1.0).abs() < 1e-12, "{e:?}");
        }
    }

    #[test]
    fn exact_sum_is_infinite() {
        let mut r = rng(1);
        let n = 50;
        let a: Vec<f64> = (0..n).map(|_| r.random::<f64>()).collect();
        let b: Vec<f64> = (0..n).map(|_| r.random::<f64>()).collect();
        let x = DMatrix::from_fn(n, 3, |i, j| match j {
            0 => a[i],
            1 => b[i],
            _ => a[i] + b[i],
        });
        let rep = compute_vif(&x, &["A", "B", "C"], 5.0).unwrap();
        assert_eq!(rep.get("C"), Some(f64::INFINITY));
    }

    #[test]
    fn needs_more_rows_than_columns() {
        assert!(compute_vif(&DMatrix::zeros(2, 2), &["a", "b"], 5.0).is_err());
    }

    #[test]
    fn threshold_is_strict() {
        let rep = VifReport::from_values(&[("a", 5.0), ("b", 5.0001)], 5.0);
        assert_eq!(rep.removed(), vec!["b".to_string()]);
        assert_eq!(rep.retained(), vec!["a".to_string()]);
    }

    #[test]
    fn composites_dropped_addends_kept() {
        let schema = FeatureSchema::user_level();
        let t = UserFeatureTable::empty(schema);
        let out = drop_composites(&t, &composite_rules(&t)).unwrap();
        for c in ["User Development Index", "User Management Index"] {
            assert!(!out.schema().contains(c));
        }
        for c in ["UpVotes", "DownVotes", "Questions", "Answers"] {
            assert!(out.schema().contains(c));
        }
        assert_eq!(drop_composites::<&str>(&t, &[]).unwrap(), t);
        let again = drop_composites(&out, &composite_rules(&out)).unwrap();
        assert_eq!(again, out);
        assert!(drop_composites(&t, &["Nope"]).is_err());
    }
}
