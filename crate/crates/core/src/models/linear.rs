//! Linear learners: least squares, penalised and Bayesian regressions,
//! robust regressions, SGD, logistic and ridge classifiers, linear SVM.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::matrix::{dot, sigmoid, Rows};
use crate::data::Task;
use crate::error::{Error, Result};
use crate::hpo::Assignment;
use crate::rng::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub(crate) enum Link {
    Identity,
    /// Class-1 score is the logistic of the decision value.
    Logistic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct LinearModel {
    pub coef: Vec<f64>,
    pub intercept: f64,
    pub link: Link,
}

impl LinearModel {
    pub fn decision(&self, x: &[f64]) -> f64 {
        dot(&self.coef, x) + self.intercept
    }

    pub fn predict(&self, x: &Rows) -> Vec<f64> {
        (0..x.n)
            .map(|i| {
                let d = self.decision(x.row(i));
                match self.link {
                    Link::Identity => d,
                    Link::Logistic => sigmoid(d),
                }
            })
            .collect()
    }
}

/// Centered copy of the data: (Xc, yc, x_mean, y_mean).
fn center(x: &Rows, y: &[f64]) -> (DMatrix<f64>, DVector<f64>, Vec<f64>, f64) {
    let xm = x.means();
    let ym = y.iter().sum::<f64>() / y.len() as f64;
    let xc = DMatrix::from_fn(x.n, x.p, |i, j| x.get(i, j) - xm[j]);
    let yc = DVector::from_iterator(y.len(), y.iter().map(|v| v - ym));
    (xc, yc, xm, ym)
}

fn uncenter(coef: Vec<f64>, xm: &[f64], ym: f64, link: Link) -> LinearModel {
    let intercept = ym - dot(&coef, xm);
    LinearModel { coef, intercept, link }
}

fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let svd = a.clone().svd(true, true);
    let tol = f64::EPSILON * a.nrows().max(a.ncols()) as f64 * svd.singular_values.max();
    svd.solve(b, tol).unwrap_or_else(|_| DVector::zeros(a.ncols()))
}

pub(crate) fn ols(x: &Rows, y: &[f64]) -> LinearModel {
    let (xc, yc, xm, ym) = center(x, y);
    let coef = lstsq(&xc, &yc);
    uncenter(coef.iter().copied().collect(), &xm, ym, Link::Identity)
}

fn soft(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

/// Coordinate descent on (1/2n)|y - Xw|^2 + a*l1*|w|_1 + a*(1-l1)/2*|w|^2.
fn elastic_net_cd(xc: &DMatrix<f64>, yc: &DVector<f64>, alpha: f64, l1: f64, max_iter: usize, tol: f64) -> Vec<f64> {
    let (n, p) = xc.shape();
    let nf = n as f64;
    let norms: Vec<f64> = (0..p).map(|j| xc.column(j).norm_squared()).collect();
    let mut w = vec![0.0; p];
    let mut r = yc.clone();
    for _ in 0..max_iter {
        let (mut max_dw, mut max_w) = (0.0f64, 0.0f64);
        for j in 0..p {
            if norms[j] == 0.0 {
                continue;
            }
            let col = xc.column(j);
            let rho = col.dot(&r) + norms[j] * w[j];
            let new = soft(rho, nf * alpha * l1) / (norms[j] + nf * alpha * (1.0 - l1));
            let d = new - w[j];
            if d != 0.0 {
                r.axpy(-d, &col, 1.0);
                w[j] = new;
            }
            max_dw = max_dw.max(d.abs());
            max_w = max_w.max(new.abs());
        }
        if max_w == 0.0 || max_dw <= tol * max_w {
            break;
        }
    }
    w
}

pub(crate) fn elastic_net(x: &Rows, y: &[f64], p: &Assignment) -> LinearModel {
    let (xc, yc, xm, ym) = center(x, y);
    let w = elastic_net_cd(&xc, &yc, p.f64_or("alpha", 1.0), p.f64_or("l1_ratio", 0.5), p.usize_or("max_iter", 1000), 1e-4);
    uncenter(w, &xm, ym, Link::Identity)
}

/// Least-angle regression with the lasso modification, stopped where the
/// maximal correlation reaches `alpha` (same objective as the lasso).
pub(crate) fn lasso_lars(x: &Rows, y: &[f64], p: &Assignment) -> LinearModel {
    let alpha = p.f64_or("alpha", 1.0);
    let max_iter = p.usize_or("max_iter", 500);
    let (xc, yc, xm, ym) = center(x, y);
    let (n, nf) = (xc.nrows(), xc.ncols());
    let n_f = n as f64;
    let gram = xc.transpose() * &xc;
    let mut c: Vec<f64> = (xc.transpose() * &yc).iter().copied().collect();
    let mut beta = vec![0.0; nf];
    let mut active: Vec<usize> = Vec::new();
    let mut dropped: Option<usize> = None;
    let eps = 1e-12;

    for _ in 0..max_iter {
        let inactive: Vec<usize> = (0..nf).filter(|j| !active.contains(j)).collect();
        let c_max = active
            .iter()
            .map(|&j| c[j].abs())
            .chain(inactive.iter().map(|&j| c[j].abs()))
            .fold(0.0f64, f64::max);
        if c_max / n_f <= alpha + eps {
            break;
        }
        if dropped.is_none() {
            if let Some(&j) = inactive
                .iter()
                .filter(|&&j| gram[(j, j)] > eps)
                .max_by(|&&a, &&b| c[a].abs().total_cmp(&c[b].abs()).then(b.cmp(&a)))
            {
                if active.len() < n.saturating_sub(1).max(1) {
                    active.push(j);
                }
            }
        }
        dropped = None;
        if active.is_empty() {
            break;
        }
        let k = active.len();
        let s: Vec<f64> = active.iter().map(|&j| c[j].signum()).collect();
        let g_a = DMatrix::from_fn(k, k, |a, b| gram[(active[a], active[b])]);
        let w = lstsq(&g_a, &DVector::from_column_slice(&s));
        let norm = dot(&s, w.as_slice());
        if norm <= eps {
            break;
        }
        let a_a = 1.0 / norm.sqrt();
        let d: Vec<f64> = w.iter().map(|v| v * a_a).collect();
        // a_j = x_j' u where u = X_A d.
        let a_vec: Vec<f64> = (0..nf).map(|j| active.iter().zip(&d).map(|(&m, dm)| gram[(j, m)] * dm).sum()).collect();

        let mut gamma = c_max / a_a;
        for &j in inactive.iter() {
            for cand in [(c_max - c[j]) / (a_a - a_vec[j]), (c_max + c[j]) / (a_a + a_vec[j])] {
                if cand > eps && cand < gamma {
                    gamma = cand;
                }
            }
        }
        let mut drop_idx = None;
        for (pos, &j) in active.iter().enumerate() {
            if d[pos] != 0.0 {
                let g = -beta[j] / d[pos];
                if g > eps && g < gamma {
                    gamma = g;
                    drop_idx = Some(pos);
                }
            }
        }
        let mut done = false;
        let c_after = c_max - gamma * a_a;
        if c_after / n_f < alpha {
            gamma = (c_max - n_f * alpha) / a_a;
            drop_idx = None;
            done = true;
        }
        for (pos, &j) in active.iter().enumerate() {
            beta[j] += gamma * d[pos];
        }
        for j in 0..nf {
            c[j] -= gamma * a_vec[j];
        }
        if done {
            break;
        }
        if let Some(pos) = drop_idx {
            let j = active.remove(pos);
            beta[j] = 0.0;
            dropped = Some(j);
        }
    }
    uncenter(beta, &xm, ym, Link::Identity)
}

fn variance(y: &DVector<f64>) -> f64 {
    let n = y.len() as f64;
    let m = y.sum() / n;
    y.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n
}

struct Priors {
    a1: f64,
    a2: f64,
    l1: f64,
    l2: f64,
}

fn priors(p: &Assignment) -> Priors {
    Priors {
        a1: p.f64_or("alpha_1", 1e-6),
        a2: p.f64_or("alpha_2", 1e-6),
        l1: p.f64_or("lambda_1", 1e-6),
        l2: p.f64_or("lambda_2", 1e-6),
    }
}

/// Evidence maximisation with a shared weight precision.
pub(crate) fn bayesian_ridge(x: &Rows, y: &[f64], p: &Assignment) -> LinearModel {
    let max_iter = p.usize_or("max_iter", 300).max(1);
    let pr = priors(p);
    let (xc, yc, xm, ym) = center(x, y);
    let n = xc.nrows() as f64;
    let svd = xc.clone().svd(true, true);
    let u = svd.u.as_ref().expect("u requested");
    let vt = svd.v_t.as_ref().expect("v_t requested");
    let s = &svd.singular_values;
    let uty = u.transpose() * &yc;
    let eig: Vec<f64> = s.iter().map(|v| v * v).collect();

    let mut alpha = 1.0 / (variance(&yc) + f64::EPSILON);
    let mut lambda = 1.0;
    let coef_for = |alpha: f64, lambda: f64| -> DVector<f64> {
        let scaled = DVector::from_fn(s.len(), |k, _| s[k] * uty[k] / (eig[k] + lambda / alpha));
        vt.transpose() * scaled
    };
    let mut coef = coef_for(alpha, lambda);
    for _ in 0..max_iter {
        let resid = &yc - &xc * &coef;
        let rmse = resid.norm_squared();
        let gamma: f64 = eig.iter().map(|e| alpha * e / (lambda + alpha * e)).sum();
        lambda = (gamma + 2.0 * pr.l1) / (coef.norm_squared() + 2.0 * pr.l2);
        alpha = (n - gamma + 2.0 * pr.a1) / (rmse + 2.0 * pr.a2);
        let next = coef_for(alpha, lambda);
        let change: f64 = (&next - &coef).abs().sum();
        coef = next;
        if change < 1e-3 {
            break;
        }
    }
    uncenter(coef.iter().copied().collect(), &xm, ym, Link::Identity)
}

/// Automatic relevance determination: one precision per weight; weights
/// whose precision exceeds the pruning threshold are fixed at zero.
pub(crate) fn ard(x: &Rows, y: &[f64], p: &Assignment) -> LinearModel {
    const THRESHOLD_LAMBDA: f64 = 1e4;
    let max_iter = p.usize_or("max_iter", 300).max(1);
    let pr = priors(p);
    let (xc, yc, xm, ym) = center(x, y);
    let (n, nf) = xc.shape();
    let xtx = xc.transpose() * &xc;
    let xty = xc.transpose() * &yc;
    let mut alpha = 1.0 / (variance(&yc) + f64::EPSILON);
    let mut lambda = vec![1.0; nf];
    let mut coef = DVector::zeros(nf);
    for _ in 0..max_iter {
        let keep: Vec<usize> = (0..nf).filter(|&j| lambda[j] < THRESHOLD_LAMBDA).collect();
        let k = keep.len();
        let mut next = DVector::zeros(nf);
        let mut sigma_diag = vec![0.0; k];
        if k > 0 {
            let a = DMatrix::from_fn(k, k, |i, j| alpha * xtx[(keep[i], keep[j])] + if i == j { lambda[keep[i]] } else { 0.0 });
            let sigma = a.clone().cholesky().map(|c| c.inverse()).or_else(|| a.try_inverse());
            let Some(sigma) = sigma else { break };
            let b = DVector::from_fn(k, |i, _| xty[keep[i]]);
            let ck = &sigma * b * alpha;
            for (i, &j) in keep.iter().enumerate() {
                next[j] = ck[i];
                sigma_diag[i] = sigma[(i, i)];
            }
        }
        let rmse = (&yc - &xc * &next).norm_squared();
        let mut gamma_sum = 0.0;
        for (i, &j) in keep.iter().enumerate() {
            let g = 1.0 - lambda[j] * sigma_diag[i];
            gamma_sum += g;
            lambda[j] = (g + 2.0 * pr.l1) / (next[j] * next[j] + 2.0 * pr.l2);
        }
        alpha = (n as f64 - gamma_sum + 2.0 * pr.a1) / (rmse + 2.0 * pr.a2);
        let change: f64 = (&next - &coef).abs().sum();
        coef = next;
        if change < 1e-3 {
            break;
        }
    }
    uncenter(coef.iter().copied().collect(), &xm, ym, Link::Identity)
}

fn median_of(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        0.0
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Weighted ridge with an unpenalised intercept.
fn weighted_ridge(x: &Rows, y: &[f64], w: &[f64], alpha: f64) -> (Vec<f64>, f64) {
    let p = x.p;
    let sw: f64 = w.iter().sum();
    let mut xm = vec![0.0; p];
    let mut ym = 0.0;
    for i in 0..x.n {
        for (m, v) in xm.iter_mut().zip(x.row(i)) {
            *m += w[i] * v;
        }
        ym += w[i] * y[i];
    }
    xm.iter_mut().for_each(|m| *m /= sw);
    ym /= sw;
    let mut a = DMatrix::<f64>::zeros(p, p);
    let mut b = DVector::<f64>::zeros(p);
    let mut xi = vec![0.0; p];
    for i in 0..x.n {
        for (j, v) in x.row(i).iter().enumerate() {
            xi[j] = v - xm[j];
        }
        let yi = y[i] - ym;
        for j in 0..p {
            b[j] += w[i] * xi[j] * yi;
            for k in j..p {
                a[(j, k)] += w[i] * xi[j] * xi[k];
            }
        }
    }
    for j in 0..p {
        for k in 0..j {
            a[(j, k)] = a[(k, j)];
        }
        a[(j, j)] += alpha;
    }
    let coef = lstsq(&a, &b);
    let coef: Vec<f64> = coef.iter().copied().collect();
    let intercept = ym - dot(&coef, &xm);
    (coef, intercept)
}

/// Huber regression by iteratively reweighted least squares with a robust
/// (MAD) residual scale.
pub(crate) fn huber(x: &Rows, y: &[f64], p: &Assignment) -> LinearModel {
    let epsilon = p.f64_or("epsilon", 1.35);
    let alpha = p.f64_or("alpha", 1e-4);
    let max_iter = p.usize_or("max_iter", 100).max(1);
    let mut w = vec![1.0; x.n];
    let (mut coef, mut intercept) = weighted_ridge(x, y, &w, alpha);
    for _ in 0..max_iter {
        let resid: Vec<f64> = (0..x.n).map(|i| y[i] - dot(&coef, x.row(i)) - intercept).collect();
        let med = median_of(resid.clone());
        let scale = 1.4826 * median_of(resid.iter().map(|r| (r - med).abs()).collect());
        if scale <= f64::EPSILON {
            break;
        }
        for (wi, r) in w.iter_mut().zip(&resid) {
            let z = (r / scale).abs();
            *wi = if z <= epsilon { 1.0 } else { epsilon / z };
        }
        let (c2, i2) = weighted_ridge(x, y, &w, alpha);
        let change = c2.iter().zip(&coef).map(|(a, b)| (a - b).abs()).fold((i2 - intercept).abs(), f64::max);
        let size = c2.iter().fold(i2.abs(), |m, v| m.max(v.abs())).max(1.0);
        coef = c2;
        intercept = i2;
        if change < 1e-6 * size {
            break;
        }
    }
    LinearModel { coef, intercept, link: Link::Identity }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Modified Weiszfeld iteration for the spatial median.
fn spatial_median(points: &[Vec<f64>], max_iter: usize, tol: f64) -> Vec<f64> {
    let d = points[0].len();
    let mut cur: Vec<f64> = (0..d).map(|j| points.iter().map(|p| p[j]).sum::<f64>() / points.len() as f64).collect();
    for _ in 0..max_iter {
        let mut num = vec![0.0; d];
        let mut quotient = vec![0.0; d];
        let mut denom = 0.0;
        let mut at_point = false;
        for p in points {
            let dist = p.iter().zip(&cur).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            if dist <= 0.0 {
                at_point = true;
                continue;
            }
            for j in 0..d {
                num[j] += p[j] / dist;
                quotient[j] += (p[j] - cur[j]) / dist;
            }
            denom += 1.0 / dist;
        }
        if denom == 0.0 {
            break;
        }
        let qn = quotient.iter().map(|v| v * v).sum::<f64>().sqrt();
        if qn <= f64::EPSILON {
            break;
        }
        let dir: Vec<f64> = num.iter().map(|v| v / denom).collect();
        let next: Vec<f64> = if at_point {
            let a = (1.0 - 1.0 / qn).max(0.0);
            let b = (1.0 / qn).min(1.0);
            dir.iter().zip(&cur).map(|(u, c)| a * u + b * c).collect()
        } else {
            dir
        };
        let step = next.iter().zip(&cur).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        cur = next;
        if step < tol {
            break;
        }
    }
    cur
}

/// Theil-Sen: spatial median of exact least-squares fits on (p+1)-row
/// subsets, enumerated when few enough, otherwise sampled.
pub(crate) fn theil_sen(x: &Rows, y: &[f64], p: &Assignment, seed: u64) -> Result<LinearModel> {
    let max_sub = p.usize_or("max_subpopulation", 10_000).max(1);
    let max_iter = p.usize_or("max_iter", 300).max(1);
    let k = (x.p + 1).min(x.n);
    let total = binomial(x.n, k);
    let mut subsets: Vec<Vec<usize>> = Vec::new();
    if total <= max_sub as f64 {
        let mut idx: Vec<usize> = (0..k).collect();
        loop {
            subsets.push(idx.clone());
            let mut i = k;
            while i > 0 && idx[i - 1] == x.n - k + i - 1 {
                i -= 1;
            }
            if i == 0 {
                break;
            }
            idx[i - 1] += 1;
            for j in i..k {
                idx[j] = idx[j - 1] + 1;
            }
        }
    } else {
        let mut r = rng(seed);
        for _ in 0..max_sub {
            subsets.push(rand::seq::index::sample(&mut r, x.n, k).into_vec());
        }
    }
    let fits: Vec<Vec<f64>> = subsets
        .iter()
        .map(|s| {
            let a = DMatrix::from_fn(s.len(), x.p + 1, |r, c| if c == 0 { 1.0 } else { x.get(s[r], c - 1) });
            let b = DVector::from_iterator(s.len(), s.iter().map(|&i| y[i]));
            lstsq(&a, &b).iter().copied().collect()
        })
        .collect();
    if fits.is_empty() {
        return Err(Error::NonConvergence { model: "Theil-Sen".into(), message: "no subsets to fit".into() });
    }
    let med = spatial_median(&fits, max_iter, 1e-3);
    Ok(LinearModel { coef: med[1..].to_vec(), intercept: med[0], link: Link::Identity })
}

/// Plain SGD with an elastic-net penalty, inverse-scaling learning rate and
/// per-epoch shuffling. Squared loss for regression, log loss otherwise.
pub(crate) fn sgd(x: &Rows, y: &[f64], p: &Assignment, task: Task, seed: u64) -> Result<LinearModel> {
    let alpha = p.f64_or("alpha", 1e-4);
    let l1 = p.f64_or("l1_ratio", 0.15);
    let max_iter = p.usize_or("max_iter", 1000).max(1);
    let eta0 = p.f64_or("eta0", 0.01);
    let tol = 1e-3;
    let mut r = rng(seed);
    let mut w = vec![0.0; x.p];
    let mut b = 0.0;
    let mut order: Vec<usize> = (0..x.n).collect();
    let mut t = 1.0f64;
    let mut best = f64::INFINITY;
    let mut stale = 0;
    for _ in 0..max_iter {
        order.shuffle(&mut r);
        let mut sum_loss = 0.0;
        for &i in &order {
            let xi = x.row(i);
            let z = dot(&w, xi) + b;
            let (loss, dloss) = match task {
                Task::Regression => {
                    let e = z - y[i];
                    (0.5 * e * e, e)
                }
                Task::Classification => {
                    let s = sigmoid(z);
                    let yy = y[i];
                    let l = if yy == 1.0 { softplus(-z) } else { softplus(z) };
                    (l, s - yy)
                }
            };
            sum_loss += loss;
            let eta = eta0 / t.powf(0.25);
            let shrink = 1.0 - eta * alpha * (1.0 - l1);
            for (wj, xj) in w.iter_mut().zip(xi) {
                *wj = soft(*wj * shrink - eta * dloss * xj, eta * alpha * l1);
            }
            b -= eta * dloss;
            t += 1.0;
        }
        if !sum_loss.is_finite() || !b.is_finite() || w.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonConvergence {
                model: "SGD".into(),
                message: "weights diverged to non-finite values".into(),
            });
        }
        if sum_loss > best - tol * x.n as f64 {
            stale += 1;
        } else {
            stale = 0;
        }
        best = best.min(sum_loss);
        if stale >= 5 {
            break;
        }
    }
    let link = if task == Task::Classification { Link::Logistic } else { Link::Identity };
    Ok(LinearModel { coef: w, intercept: b, link })
}

fn softplus(z: f64) -> f64 {
    if z > 30.0 {
        z
    } else {
        z.exp().ln_1p()
    }
}

/// L2-penalised logistic regression by Newton's method. Objective:
/// |w|^2/2 + C * sum of log losses (intercept unpenalised).
pub(crate) fn logistic(x: &Rows, y: &[f64], p: &Assignment) -> LinearModel {
    let c = p.f64_or("C", 1.0);
    let max_iter = p.usize_or("max_iter", 100).max(1);
    let d = x.p + 1;
    let mut beta = DVector::<f64>::zeros(d);
    for _ in 0..max_iter {
        let mut g = DVector::<f64>::zeros(d);
        let mut h = DMatrix::<f64>::zeros(d, d);
        for i in 0..x.n {
            let xi = x.row(i);
            let z = beta[0] + dot(&beta.as_slice()[1..], xi);
            let s = sigmoid(z);
            let wgt = (s * (1.0 - s)).max(1e-12);
            let e = s - y[i];
            let at = |j: usize| if j == 0 { 1.0 } else { xi[j - 1] };
            for j in 0..d {
                g[j] += c * e * at(j);
                for k in j..d {
                    h[(j, k)] += c * wgt * at(j) * at(k);
                }
            }
        }
        for j in 0..d {
            for k in 0..j {
                h[(j, k)] = h[(k, j)];
            }
            if j > 0 {
                g[j] += beta[j];
                h[(j, j)] += 1.0;
            } else {
                h[(0, 0)] += 1e-10;
            }
        }
        let step = lstsq(&h, &g);
        beta -= &step;
        if step.amax() < 1e-8 {
            break;
        }
    }
    LinearModel { coef: beta.as_slice()[1..].to_vec(), intercept: beta[0], link: Link::Logistic }
}

/// Ridge regression on +/-1 targets; the class-1 score is the logistic of
/// the decision value, so the 0.5 cut-off equals the sign rule.
pub(crate) fn ridge_classifier(x: &Rows, y: &[f64], p: &Assignment) -> LinearModel {
    let alpha = p.f64_or("alpha", 1.0);
    let yy: Vec<f64> = y.iter().map(|&v| 2.0 * v - 1.0).collect();
    let (coef, intercept) = weighted_ridge(x, &yy, &vec![1.0; x.n], alpha);
    LinearModel { coef, intercept, link: Link::Logistic }
}

/// Dual coordinate descent on the bias-augmented problem. Classification
/// uses the squared hinge loss, regression the epsilon-insensitive loss.
pub(crate) fn linear_svm(x: &Rows, y: &[f64], p: &Assignment, task: Task) -> LinearModel {
    let c = p.f64_or("C", 1.0);
    let eps = p.f64_or("epsilon", 0.0);
    let max_iter = p.usize_or("max_iter", 1000).max(1);
    let d = x.p + 1;
    let aug = |i: usize, j: usize| if j == x.p { 1.0 } else { x.get(i, j) };
    let qdiag: Vec<f64> = (0..x.n).map(|i| (0..d).map(|j| aug(i, j) * aug(i, j)).sum()).collect();
    let mut w = vec![0.0; d];
    let mut a = vec![0.0; x.n];
    let mut order: Vec<usize> = (0..x.n).collect();
    let mut r = rng(0);
    let mut converged = false;
    for _ in 0..max_iter {
        order.shuffle(&mut r);
        let mut max_step = 0.0f64;
        let mut max_a = 0.0f64;
        for &i in &order {
            let wx: f64 = (0..d).map(|j| w[j] * aug(i, j)).sum();
            let new = match task {
                Task::Classification => {
                    let yi = 2.0 * y[i] - 1.0;
                    let dii = 0.5 / c;
                    let g = yi * wx - 1.0 + dii * a[i];
                    (a[i] - g / (qdiag[i] + dii)).max(0.0)
                }
                Task::Regression => {
                    if qdiag[i] == 0.0 {
                        continue;
                    }
                    let g = wx - y[i];
                    let z = a[i] - g / qdiag[i];
                    (z.signum() * (z.abs() - eps / qdiag[i]).max(0.0)).clamp(-c, c)
                }
            };
            let delta = new - a[i];
            if delta != 0.0 {
                let coef = match task {
                    Task::Classification => delta * (2.0 * y[i] - 1.0),
                    Task::Regression => delta,
                };
                for j in 0..d {
                    w[j] += coef * aug(i, j);
                }
                a[i] = new;
            }
            max_step = max_step.max((delta * qdiag[i].sqrt()).abs());
            max_a = max_a.max((new * qdiag[i].sqrt()).abs());
        }
        if max_step <= 1e-4 * max_a.max(1e-12) {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!("Linear SVM reached {max_iter} epochs without converging");
    }
    let link = if task == Task::Classification { Link::Logistic } else { Link::Identity };
    LinearModel { coef: w[..x.p].to_vec(), intercept: w[x.p], link }
}
