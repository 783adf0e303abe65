//! Kernel support-vector machines solved by dual coordinate descent over a
//! precomputed kernel matrix. The bias is absorbed into the kernel (K + 1).

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::matrix::{dot, sigmoid, Rows};
use crate::error::{Error, Result};
use crate::hpo::Assignment;
use crate::rng::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub(crate) enum Kernel {
    Rbf,
    Poly,
    Linear,
    Sigmoid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct KernelSpec {
    kernel: Kernel,
    gamma: f64,
    degree: i32,
    coef0: f64,
}

impl KernelSpec {
    fn from_params(p: &Assignment, x: &Rows) -> Result<Self> {
        let kernel = match p.str_or("kernel", "rbf") {
            "rbf" => Kernel::Rbf,
            "poly" => Kernel::Poly,
            "linear" => Kernel::Linear,
            "sigmoid" => Kernel::Sigmoid,
            other => return Err(Error::config(format!("unknown kernel `{other}`"))),
        };
        let n = x.data.len().max(1) as f64;
        let mean = x.data.iter().sum::<f64>() / n;
        let var = x.data.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let gamma = if var > 0.0 { 1.0 / (x.p as f64 * var) } else { 1.0 };
        Ok(KernelSpec { kernel, gamma, degree: p.usize_or("degree", 3) as i32, coef0: p.f64_or("coef0", 0.0) })
    }

    fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match self.kernel {
            Kernel::Rbf => {
                let d2: f64 = a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum();
                (-self.gamma * d2).exp()
            }
            Kernel::Poly => (self.gamma * dot(a, b) + self.coef0).powi(self.degree),
            Kernel::Linear => dot(a, b),
            Kernel::Sigmoid => (self.gamma * dot(a, b) + self.coef0).tanh(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct KernelModel {
    spec: KernelSpec,
    p: usize,
    /// Support vectors, row-major.
    support: Vec<f64>,
    coef: Vec<f64>,
    y_offset: f64,
    y_scale: f64,
    classifier: bool,
}

impl KernelModel {
    pub fn predict(&self, x: &Rows) -> Vec<f64> {
        (0..x.n)
            .into_par_iter()
            .map(|i| {
                let xi = x.row(i);
                let f: f64 = self
                    .coef
                    .iter()
                    .enumerate()
                    .map(|(s, c)| c * (self.spec.eval(&self.support[s * self.p..(s + 1) * self.p], xi) + 1.0))
                    .sum();
                if self.classifier {
                    sigmoid(f)
                } else {
                    self.y_offset + self.y_scale * f
                }
            })
            .collect()
    }
}

/// Gram matrix plus one, row-major.
fn gram(spec: &KernelSpec, x: &Rows) -> Vec<f64> {
    let n = x.n;
    let mut q = vec![0.0; n * n];
    q.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        let xi = x.row(i);
        for (j, v) in row.iter_mut().enumerate() {
            *v = spec.eval(xi, x.row(j)) + 1.0;
        }
    });
    q
}

/// Default epoch limit of the dual solvers.
const MAX_EPOCHS: usize = 10_000;

fn non_finite(model: &str) -> Error {
    Error::NonConvergence { model: model.to_string(), message: "unable to determine finite dual coefficients".into() }
}

struct Solved {
    coef: Vec<f64>,
    converged: bool,
}

/// Dual epsilon-insensitive regression:
/// min 1/2 b'Qb - y'b + eps*|b|_1 subject to -C <= b <= C.
fn solve_svr(q: &[f64], y: &[f64], c: f64, eps: f64, max_iter: usize, model: &str) -> Result<Solved> {
    let s = solve_svr_raw(q, y, c, eps, max_iter, model)?;
    if s.converged {
        Ok(s)
    } else {
        Err(not_converged(model, max_iter))
    }
}

fn not_converged(model: &str, max_iter: usize) -> Error {
    Error::NonConvergence { model: model.to_string(), message: format!("dual solver did not converge in {max_iter} epochs") }
}

/// Like [`solve_svr`] but returns the last iterate when the epoch limit is hit.
fn solve_svr_raw(q: &[f64], y: &[f64], c: f64, eps: f64, max_iter: usize, model: &str) -> Result<Solved> {
    let n = y.len();
    let mut beta = vec![0.0; n];
    let mut grad: Vec<f64> = y.iter().map(|v| -v).collect();
    let mut order: Vec<usize> = (0..n).collect();
    let mut r = rng(0);
    let tol = 1e-3;
    for _ in 0..max_iter {
        order.shuffle(&mut r);
        let mut worst = 0.0f64;
        for &i in &order {
            let qii = q[i * n + i];
            if qii <= 0.0 {
                continue;
            }
            let z = beta[i] - grad[i] / qii;
            let new = (z.signum() * (z.abs() - eps / qii).max(0.0)).clamp(-c, c);
            let delta = new - beta[i];
            if delta != 0.0 {
                let row = &q[i * n..(i + 1) * n];
                for (g, qij) in grad.iter_mut().zip(row) {
                    *g += delta * qij;
                }
                beta[i] = new;
            }
            worst = worst.max((delta * qii).abs());
        }
        if !worst.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(non_finite(model));
        }
        if worst < tol {
            return Ok(Solved { coef: beta, converged: true });
        }
    }
    Ok(Solved { coef: beta, converged: false })
}

/// Dual hinge-loss classification:
/// min 1/2 a'Qa - 1'a subject to 0 <= a <= C, Q_ij = y_i y_j (K_ij + 1).
fn solve_svc(q: &[f64], s: &[f64], c: f64, max_iter: usize, model: &str) -> Result<Solved> {
    let n = s.len();
    let mut a = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let mut order: Vec<usize> = (0..n).collect();
    let mut r = rng(0);
    let tol = 1e-3;
    for _ in 0..max_iter {
        order.shuffle(&mut r);
        let mut worst = 0.0f64;
        for &i in &order {
            let qii = q[i * n + i];
            if qii <= 0.0 {
                continue;
            }
            let new = (a[i] - grad[i] / qii).clamp(0.0, c);
            let delta = new - a[i];
            if delta != 0.0 {
                let row = &q[i * n..(i + 1) * n];
                for j in 0..n {
                    grad[j] += delta * s[i] * s[j] * row[j];
                }
                a[i] = new;
            }
            worst = worst.max((delta * qii).abs());
        }
        if !worst.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(non_finite(model));
        }
        if worst < tol {
            return Ok(Solved { coef: a.iter().zip(s).map(|(ai, si)| ai * si).collect(), converged: true });
        }
    }
    Err(not_converged(model, max_iter))
}

fn build(spec: KernelSpec, x: &Rows, coef: Vec<f64>, y_offset: f64, y_scale: f64, classifier: bool) -> KernelModel {
    let keep: Vec<usize> = (0..x.n).filter(|&i| coef[i] != 0.0).collect();
    KernelModel {
        spec,
        p: x.p,
        support: x.select_rows(&keep).data,
        coef: keep.iter().map(|&i| coef[i]).collect(),
        y_offset,
        y_scale,
        classifier,
    }
}

/// Target standardisation shared by both regressors.
fn scale_target(y: &[f64]) -> (Vec<f64>, f64, f64) {
    let n = y.len() as f64;
    let m = y.iter().sum::<f64>() / n;
    let sd = (y.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n).sqrt();
    let sd = if sd > 0.0 { sd } else { 1.0 };
    (y.iter().map(|v| (v - m) / sd).collect(), m, sd)
}

fn prepared(x: &Rows, p: &Assignment, model: &str) -> Result<(KernelSpec, Vec<f64>)> {
    let spec = KernelSpec::from_params(p, x)?;
    let q = gram(&spec, x);
    if q.iter().any(|v| !v.is_finite()) {
        return Err(non_finite(model));
    }
    Ok((spec, q))
}

pub(crate) fn epsilon_svr(x: &Rows, y: &[f64], p: &Assignment, model: &str) -> Result<KernelModel> {
    let (spec, q) = prepared(x, p, model)?;
    let (ys, m, sd) = scale_target(y);
    let c = p.f64_or("C", 1.0);
    let sol = solve_svr(&q, &ys, c, p.f64_or("epsilon", 0.1), p.usize_or("max_iter", MAX_EPOCHS).max(1), model)?;
    Ok(build(spec, x, sol.coef, m, sd, false))
}

/// Nu-SVR: the tube width is set so that a fraction `nu` of training
/// residuals of a zero-width pilot fit fall outside it, then the model is
/// refitted. The pilot only supplies residuals, so its epoch limit is not an
/// error.
pub(crate) fn nu_svr(x: &Rows, y: &[f64], p: &Assignment, model: &str) -> Result<KernelModel> {
    let (spec, q) = prepared(x, p, model)?;
    let (ys, m, sd) = scale_target(y);
    let c = p.f64_or("C", 1.0);
    let nu = p.f64_or("nu", 0.5).clamp(0.0, 1.0);
    let max_iter = p.usize_or("max_iter", MAX_EPOCHS).max(1);
    let first = solve_svr_raw(&q, &ys, c, 0.0, max_iter, model)?;
    let n = ys.len();
    let mut resid: Vec<f64> = (0..n)
        .map(|i| (ys[i] - dot(&q[i * n..(i + 1) * n], &first.coef)).abs())
        .collect();
    resid.sort_by(f64::total_cmp);
    let pos = (((1.0 - nu) * (n - 1) as f64).round() as usize).min(n - 1);
    let eps = resid[pos];
    let sol = solve_svr(&q, &ys, c, eps, max_iter, model)?;
    Ok(build(spec, x, sol.coef, m, sd, false))
}

pub(crate) fn c_svc(x: &Rows, y: &[f64], p: &Assignment, model: &str) -> Result<KernelModel> {
    let (spec, q) = prepared(x, p, model)?;
    let s: Vec<f64> = y.iter().map(|&v| 2.0 * v - 1.0).collect();
    let sol = solve_svc(&q, &s, p.f64_or("C", 1.0), p.usize_or("max_iter", MAX_EPOCHS).max(1), model)?;
    Ok(build(spec, x, sol.coef, 0.0, 1.0, true))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hpo::ParamValue;
    use rand::Rng as _;

    fn wave(n: usize) -> (Rows, Vec<f64>) {
        let mut r = rng(3);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| vec![r.random::<f64>() * 6.0 - 3.0]).collect();
        let y = rows.iter().map(|v| v[0].sin() + 0.2 * (r.random::<f64>() - 0.5)).collect();
        (Rows::from_rows(&rows), y)
    }

    fn rmse(a: &[f64], b: &[f64]) -> f64 {
        (a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum::<f64>() / a.len() as f64).sqrt()
    }

    #[test]
    fn rbf_svr_fits_sine() {
        let (x, y) = wave(150);
        let p = Assignment::new().set("C", ParamValue::Float(10.0)).set("epsilon", ParamValue::Float(0.05));
        let truth: Vec<f64> = x.data.iter().map(|v| v.sin()).collect();
        let m = epsilon_svr(&x, &y, &p, "Epsilon SVM").unwrap();
        assert!(rmse(&m.predict(&x), &truth) < 0.1);
        let m = nu_svr(&x, &y, &p, "Nu SVM").unwrap();
        assert!(rmse(&m.predict(&x), &truth) < 0.1);
    }

    #[test]
    fn raw_wide_range_features_do_not_converge() {
        let mut r = rng(1);
        let rows: Vec<Vec<f64>> =
            (0..120).map(|_| (0..3).map(|_| 10f64.powf(r.random::<f64>() * 10.0)).collect()).collect();
        let y: Vec<f64> = rows.iter().map(|v| v[0].log10() + r.random::<f64>()).collect();
        let p = Assignment::new().set("kernel", ParamValue::Str("linear".into()));
        let e = epsilon_svr(&Rows::from_rows(&rows), &y, &p, "Epsilon SVM").unwrap_err();
        assert!(e.is_non_convergence(), "{e}");
    }

    #[test]
    fn rbf_svc_separates_interval() {
        let (x, _) = wave(200);
        let labels: Vec<f64> = x.data.iter().map(|&v| if v.abs() < 1.5 { 1.0 } else { 0.0 }).collect();
        let m = c_svc(&x, &labels, &Assignment::new().set("C", ParamValue::Float(10.0)), "C-SVM").unwrap();
        let pred = m.predict(&x);
        let acc = pred.iter().zip(&labels).filter(|(s, l)| (**s >= 0.5) == (**l == 1.0)).count() as f64 / 200.0;
        assert!(acc > 0.95, "{acc}");
    }

    #[test]
    fn overflowing_kernel_is_non_convergence() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![10f64.powi(i % 11) * 1e150]).collect();
        let y: Vec<f64> = (0..20).map(f64::from).collect();
        let p = Assignment::new().set("kernel", ParamValue::Str("linear".into()));
        let e = epsilon_svr(&Rows::from_rows(&rows), &y, &p, "Epsilon SVM").unwrap_err();
        assert!(e.to_string().contains("unable to determine finite dual coefficients"), "{e}");
    }
}
