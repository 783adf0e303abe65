use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::seq::IndexedRandom;
use serde::{Deserialize, Serialize};

use crate::data::UserFeatureTable;
use crate::error::{Error, Result};
use crate::rng::{rng, DEFAULT_SEED};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmInit {
    /// Missing cells start as random draws from the column's observed values.
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmParams {
    pub tolerance: f64,
    pub max_iterations: usize,
    pub init: EmInit,
    pub seed: u64,
}

impl Default for EmParams {
    fn default() -> Self {
        EmParams {
            tolerance: 1e-6,
            max_iterations: 100,
            init: EmInit::Random,
            seed: DEFAULT_SEED,
        }
    }
}

impl EmParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(Error::config("EM tolerance must be positive"));
        }
        if self.max_iterations == 0 {
            return Err(Error::config("EM needs max_iterations >= 1"));
        }
        Ok(())
    }
}

/// Diagnostics of one EM fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmReport {
    pub columns: Vec<String>,
    pub converged: bool,
    pub iterations: usize,
    /// Observed-data log-likelihood at the initial parameters and after
    /// every iteration.
    pub log_likelihood: Vec<f64>,
    pub mean: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    pub ridge_applied: bool,
}

struct Pattern {
    observed: Vec<usize>,
    missing: Vec<usize>,
    rows: Vec<usize>,
}

struct Gaussian {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
}

fn sub(m: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

fn subv(v: &DVector<f64>, idx: &[usize]) -> DVector<f64> {
    DVector::from_fn(idx.len(), |i, _| v[idx[i]])
}

/// Adds a diagonal ridge until the covariance factors. Returns whether any
/// ridge was needed.
fn regularize(cov: &mut DMatrix<f64>) -> bool {
    if cov.clone().cholesky().is_some() {
        return false;
    }
    let p = cov.nrows();
    let mean_diag = (cov.trace() / p as f64).abs();
    let mut ridge = 1e-8 * if mean_diag > 0.0 { mean_diag } else { 1.0 };
    loop {
        for i in 0..p {
            cov[(i, i)] += ridge;
        }
        if cov.clone().cholesky().is_some() {
            log::warn!("EM covariance singular; added diagonal ridge {ridge:e}");
            return true;
        }
        ridge *= 10.0;
    }
}

/// Per-pattern regression of missing on observed coordinates:
/// returns (B, C) with E[x_m | x_o] = mu_m + B (x_o - mu_o) and C the
/// conditional covariance.
fn conditional(g: &Gaussian, pat: &Pattern) -> (DMatrix<f64>, DMatrix<f64>) {
    let s_mm = sub(&g.cov, &pat.missing, &pat.missing);
    if pat.observed.is_empty() {
        return (DMatrix::zeros(pat.missing.len(), 0), s_mm);
    }
    let s_oo = sub(&g.cov, &pat.observed, &pat.observed);
    let s_om = sub(&g.cov, &pat.observed, &pat.missing);
    let chol = s_oo.cholesky().expect("regularized covariance block is positive definite");
    let b = chol.solve(&s_om).transpose();
    let c = &s_mm - &b * &s_om;
    (b, c)
}

fn log_likelihood(g: &Gaussian, data: &[Vec<f64>], patterns: &[Pattern]) -> f64 {
    let ln2pi = (2.0 * std::f64::consts::PI).ln();
    let mut ll = 0.0;
    for pat in patterns {
        if pat.observed.is_empty() {
            continue;
        }
        let s_oo = sub(&g.cov, &pat.observed, &pat.observed);
        let chol = s_oo.cholesky().expect("regularized covariance block is positive definite");
        let logdet: f64 = 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        let mu_o = subv(&g.mean, &pat.observed);
        let k = pat.observed.len() as f64;
        for &r in &pat.rows {
            let x = DVector::from_fn(pat.observed.len(), |i, _| data[r][pat.observed[i]]) - &mu_o;
            let q = x.dot(&chol.solve(&x));
            ll -= 0.5 * (k * ln2pi + logdet + q);
        }
    }
    ll
}

fn fit_filled(data: &[Vec<f64>], p: usize) -> Gaussian {
    let n = data.len() as f64;
    let mut mean = DVector::zeros(p);
    for row in data {
        for j in 0..p {
            mean[j] += row[j];
        }
    }
    mean /= n;
    let mut cov = DMatrix::zeros(p, p);
    for row in data {
        for i in 0..p {
            for j in 0..p {
                cov[(i, j)] += (row[i] - mean[i]) * (row[j] - mean[j]);
            }
        }
    }
    cov /= n;
    Gaussian { mean, cov }
}

/// One E-step plus M-step.
fn em_step(g: &Gaussian, data: &[Vec<f64>], patterns: &[Pattern], p: usize) -> Gaussian {
    let n = data.len() as f64;
    let mut t1 = DVector::zeros(p);
    let mut t2 = DMatrix::zeros(p, p);
    for pat in patterns {
        let (b, c) = if pat.missing.is_empty() {
            (DMatrix::zeros(0, 0), DMatrix::zeros(0, 0))
        } else {
            conditional(g, pat)
        };
        let mu_o = subv(&g.mean, &pat.observed);
        let mu_m = subv(&g.mean, &pat.missing);
        for &r in &pat.rows {
            let mut x = DVector::from_fn(p, |j, _| data[r][j]);
            if !pat.missing.is_empty() {
                let xo = DVector::from_fn(pat.observed.len(), |i, _| data[r][pat.observed[i]]);
                let xm = &mu_m + &b * (xo - &mu_o);
                for (i, &j) in pat.missing.iter().enumerate() {
                    x[j] = xm[i];
                }
            }
            t1 += &x;
            t2 += &x * x.transpose();
            for (a, &ja) in pat.missing.iter().enumerate() {
                for (bb, &jb) in pat.missing.iter().enumerate() {
                    t2[(ja, jb)] += c[(a, bb)];
                }
            }
        }
    }
    let mean = t1 / n;
    let cov = t2 / n - &mean * mean.transpose();
    Gaussian { mean, cov }
}

/// Multivariate-Gaussian EM imputation over a column group. Each missing
/// cell becomes its conditional expectation given the row's observed cells
/// under the final parameters.
pub fn impute_em<S: AsRef<str>>(
    table: &UserFeatureTable,
    columns: &[S],
    params: &EmParams,
) -> Result<(UserFeatureTable, EmReport)> {
    params.validate()?;
    if columns.is_empty() {
        return Err(Error::invalid("EM imputation needs a non-empty column set"));
    }
    let names: Vec<String> = columns.iter().map(|c| c.as_ref().to_string()).collect();
    let group = names.join(", ");
    let idx: Vec<usize> = names.iter().map(|c| table.schema().require(c)).collect::<Result<_>>()?;
    let p = idx.len();
    let n = table.n_rows();
    let err = |message: String| Error::Imputation { column: group.clone(), message };
    for (&c, name) in idx.iter().zip(&names) {
        if n - table.missing_count(c) < 2 {
            return Err(err(format!("column `{name}` has fewer than 2 observed values")));
        }
    }

    let mut by_pattern: BTreeMap<Vec<bool>, Vec<usize>> = BTreeMap::new();
    for r in 0..n {
        let key: Vec<bool> = idx.iter().map(|&c| table.is_missing(r, c)).collect();
        by_pattern.entry(key).or_default().push(r);
    }
    let patterns: Vec<Pattern> = by_pattern
        .into_iter()
        .map(|(key, rows)| Pattern {
            observed: (0..p).filter(|&j| !key[j]).collect(),
            missing: (0..p).filter(|&j| key[j]).collect(),
            rows,
        })
        .collect();

    // Observed values with random fills for the initial fit.
    let mut r = rng(params.seed);
    let observed_pool: Vec<Vec<f64>> = idx
        .iter()
        .map(|&c| (0..n).filter_map(|row| table.get(row, c)).collect())
        .collect();
    let data: Vec<Vec<f64>> = (0..n)
        .map(|row| idx.iter().map(|&c| table.get(row, c).unwrap_or(f64::NAN)).collect())
        .collect();
    let mut filled = data.clone();
    for (row, vals) in filled.iter_mut().enumerate() {
        for j in 0..p {
            if table.is_missing(row, idx[j]) {
                vals[j] = *observed_pool[j].choose(&mut r).expect("at least two observed values");
            }
        }
    }

    let mut g = fit_filled(&filled, p);
    let mut ridge_applied = regularize(&mut g.cov);
    let mut trace = vec![log_likelihood(&g, &data, &patterns)];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < params.max_iterations {
        iterations += 1;
        let mut next = em_step(&g, &data, &patterns, p);
        ridge_applied |= regularize(&mut next.cov);
        let ll = log_likelihood(&next, &data, &patterns);
        let delta = (ll - trace[trace.len() - 1]).abs();
        trace.push(ll);
        g = next;
        if delta < params.tolerance {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!("EM over [{group}] hit the iteration cap ({iterations}) without converging");
    }

    let mut out_cols: Vec<Vec<f64>> = idx.iter().map(|&c| table.column_raw(c).to_vec()).collect();
    for pat in patterns.iter().filter(|pt| !pt.missing.is_empty()) {
        let (b, _) = conditional(&g, pat);
        let mu_o = subv(&g.mean, &pat.observed);
        let mu_m = subv(&g.mean, &pat.missing);
        for &row in &pat.rows {
            let xo = DVector::from_fn(pat.observed.len(), |i, _| data[row][pat.observed[i]]);
            let xm = &mu_m + &b * (xo - &mu_o);
            for (i, &j) in pat.missing.iter().enumerate() {
                out_cols[j][row] = xm[i];
            }
        }
    }
    let mut out = table.clone();
    for (j, values) in out_cols.into_iter().enumerate() {
        out = out.with_column(idx[j], values, vec![false; n])?;
    }
    let report = EmReport {
        columns: names,
        converged,
        iterations,
        log_likelihood: trace,
        mean: g.mean.iter().copied().collect(),
        covariance: (0..p).map(|i| (0..p).map(|j| g.cov[(i, j)]).collect()).collect(),
        ridge_applied,
    };
    Ok((out, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{ColumnRole, ColumnSpec, FeatureSchema};
    use rand::Rng as _;
    use rand_distr::{Distribution, StandardNormal};

    fn schema2() -> FeatureSchema {
        FeatureSchema::new(vec![
            ColumnSpec::new("a", ColumnRole::Predictor, &[]),
            ColumnSpec::new("b", ColumnRole::Predictor, &[]),
        ])
        .unwrap()
    }

    fn bivariate(n: usize, rho: f64, miss: f64, seed: u64) -> UserFeatureTable {
        let mut r = rng(seed);
        let mut a = Vec::with_capacity(n);
        let mut b = Vec::with_capacity(n);
        for _ in 0..n {
            let z1: f64 = StandardNormal.sample(&mut r);
            let z2: f64 = StandardNormal.sample(&mut r);
            let x = z1;
            let y = rho * z1 + (1.0 - rho * rho).sqrt() * z2;
            // Never drop both coordinates of one row.
            let u: f64 = r.random();
            let (ma, mb) = if u < miss / 2.0 {
                (true, false)
            } else if u < miss {
                (false, true)
            } else {
                (false, false)
            };
            a.push((!ma).then_some(x));
            b.push((!mb).then_some(y));
        }
        UserFeatureTable::from_options(schema2(), vec![a, b]).unwrap()
    }

    #[test]
    fn complete_data_unchanged_and_converges_at_once() {
        let t = bivariate(200, 0.5, 0.0, 1);
        let (out, rep) = impute_em(&t, &["a", "b"], &EmParams::default()).unwrap();
        assert_eq!(out, t);
        assert!(rep.converged);
        assert_eq!(rep.iterations, 1);
    }

    #[test]
    fn bivariate_conditional_mean_oracle() {
        let t = bivariate(5000, 0.8, 0.2, 11);
        let (out, rep) = impute_em(&t, &["a", "b"], &EmParams::default()).unwrap();
        assert!(rep.converged);
        // Closed-form conditional mean of the fitted bivariate normal.
        let (m, s) = (&rep.mean, &rep.covariance);
        for row in 0..t.n_rows() {
            if t.is_missing(row, 1) {
                let x = t.get(row, 0).unwrap();
                let oracle = m[1] + s[1][0] / s[0][0] * (x - m[0]);
                assert!((out.get(row, 1).unwrap() - oracle).abs() < 0.05);
            }
            if t.is_missing(row, 0) {
                let y = t.get(row, 1).unwrap();
                let oracle = m[0] + s[0][1] / s[1][1] * (y - m[1]);
                assert!((out.get(row, 0).unwrap() - oracle).abs() < 0.05);
            }
        }
        let rho = s[0][1] / (s[0][0] * s[1][1]).sqrt();
        assert!((rho - 0.8).abs() < 0.03, "{rho}");
    }

    #[test]
    fn log_likelihood_is_monotone() {
        let t = bivariate(800, 0.6, 0.3, 5);
        let (_, rep) = impute_em(&t, &["a", "b"], &EmParams::default()).unwrap();
        for w in rep.log_likelihood.windows(2) {
            assert!(w[1] >= w[0] - 1e-9, "{:?}", w);
        }
    }

    #[test]
    fn iteration_cap_sets_flag() {
        let t = bivariate(500, 0.8, 0.3, 2);
        let p = EmParams { max_iterations: 1, ..Default::default() };
        let (out, rep) = impute_em(&t, &["a", "b"], &p).unwrap();
        assert!(!rep.converged);
        assert_eq!(rep.iterations, 1);
        assert!(!out.has_missing(0) && !out.has_missing(1));
    }

    #[test]
    fn observed_cells_bit_identical_and_idempotent() {
        let t = bivariate(300, 0.7, 0.25, 3);
        let (out, _) = impute_em(&t, &["a", "b"], &EmParams::default()).unwrap();
        for c in 0..2 {
            for row in 0..t.n_rows() {
                if let Some(v) = t.get(row, c) {
                    assert_eq!(v.to_bits(), out.get(row, c).unwrap().to_bits());
                }
            }
        }
        let (again, _) = impute_em(&out, &["a", "b"], &EmParams::default()).unwrap();
        assert_eq!(again, out);
    }

    #[test]
    fn singular_covariance_gets_ridge() {
        let a: Vec<Option<f64>> = (0..50).map(|i| Some(i as f64)).collect();
        let mut b: Vec<Option<f64>> = (0..50).map(|i| Some(2.0 * i as f64)).collect();
        b[7] = None;
        let t = UserFeatureTable::from_options(schema2(), vec![a, b]).unwrap();
        let (out, rep) = impute_em(&t, &["a", "b"], &EmParams::default()).unwrap();
        assert!(rep.ridge_applied);
        assert!((out.get(7, 1).unwrap() - 14.0).abs() < 1e-3);
    }

    #[test]
    fn empty_column_set_rejected() {
        let t = bivariate(10, 0.5, 0.0, 1);
        assert!(impute_em::<&str>(&t, &[], &EmParams::default()).is_err());
    }
}
