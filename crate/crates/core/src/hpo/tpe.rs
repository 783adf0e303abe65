use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use super::space::{Assignment, Param, SearchSpace};
use super::{evaluate, OptimizationResult};
use crate::error::{Error, Result};
use crate::rng::{rng, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TpeConfig {
    pub n_startup: usize,
    pub gamma: f64,
    pub n_candidates: usize,
    /// Model numeric parameters jointly (one kernel per observation across
    /// all numeric dimensions) instead of one density per parameter.
    pub multivariate: bool,
}

impl Default for TpeConfig {
    fn default() -> Self {
        TpeConfig { n_startup: 10, gamma: 0.25, n_candidates: 24, multivariate: true }
    }
}

fn trunc_normal_pdf(x: f64, c: f64, s: f64) -> f64 {
    let z = (x - c) / s;
    let root2 = std::f64::consts::SQRT_2;
    let mass = 0.5 * (erf((1.0 - c) / (s * root2)) - erf(-c / (s * root2)));
    (-0.5 * z * z).exp() / (s * (2.0 * std::f64::consts::PI).sqrt() * mass.max(1e-12))
}

fn trunc_normal_sample(c: f64, s: f64, r: &mut Rng) -> f64 {
    let normal = Normal::new(c, s).expect("positive sigma");
    for _ in 0..100 {
        let v = normal.sample(r);
        if (0.0..=1.0).contains(&v) {
            return v;
        }
    }
    c
}

/// Parzen mixture on [0, 1]: truncated Gaussians at the observations plus a
/// uniform prior component.
struct Parzen {
    centers: Vec<f64>,
    sigmas: Vec<f64>,
}

impl Parzen {
    fn new(points: &[f64]) -> Self {
        let mut sorted = points.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let floor = 1.0 / (n as f64 + 1.0).min(100.0) / 10.0;
        let sigmas = points
            .iter()
            .map(|&c| {
                let i = sorted.partition_point(|&v| v < c);
                let left = if i > 0 { c - sorted[i - 1] } else { c };
                let right = sorted.get(i + 1).map_or(1.0 - c, |&v| v - c);
                left.max(right).clamp(floor, 1.0)
            })
            .collect();
        Parzen { centers: points.to_vec(), sigmas }
    }

    fn weight(&self) -> f64 {
        1.0 / (self.centers.len() as f64 + 1.0)
    }

    fn pdf(&self, x: f64) -> f64 {
        let w = self.weight();
        let mut p = w; // uniform prior on [0, 1]
        for (&c, &s) in self.centers.iter().zip(&self.sigmas) {
            p += w * trunc_normal_pdf(x, c, s);
        }
        p
    }

    fn sample(&self, r: &mut Rng) -> f64 {
        let k = r.random_range(0..=self.centers.len());
        if k == self.centers.len() {
            return r.random::<f64>();
        }
        trunc_normal_sample(self.centers[k], self.sigmas[k], r)
    }
}

/// Joint Parzen mixture on [0, 1]^d with a shared Scott-style bandwidth and
/// a uniform prior component.
struct JointParzen {
    centers: Vec<Vec<f64>>,
    sigma: f64,
}

impl JointParzen {
    fn new(points: Vec<Vec<f64>>, dims: usize) -> Self {
        let n = points.len().max(1) as f64;
        let sigma = (0.2 * n.powf(-1.0 / (dims as f64 + 4.0))).clamp(0.01, 1.0);
        JointParzen { centers: points, sigma }
    }

    fn ln_pdf(&self, x: &[f64]) -> f64 {
        let ln_w = -(self.centers.len() as f64 + 1.0).ln();
        let terms: Vec<f64> = std::iter::once(0.0)
            .chain(self.centers.iter().map(|c| {
                c.iter().zip(x).map(|(&ci, &xi)| trunc_normal_pdf(xi, ci, self.sigma).max(1e-300).ln()).sum()
            }))
            .collect();
        let m = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        ln_w + m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
    }

    fn sample(&self, dims: usize, r: &mut Rng) -> Vec<f64> {
        let k = r.random_range(0..=self.centers.len());
        match self.centers.get(k) {
            None => (0..dims).map(|_| r.random::<f64>()).collect(),
            Some(c) => c.iter().map(|&ci| trunc_normal_sample(ci, self.sigma, r)).collect(),
        }
    }
}

/// Smoothed category frequencies.
fn categorical_probs(indices: &[usize], k: usize) -> Vec<f64> {
    let mut counts = vec![1.0; k];
    for &i in indices {
        counts[i] += 1.0;
    }
    let total: f64 = counts.iter().sum();
    counts.iter().map(|c| c / total).collect()
}

fn sample_index(probs: &[f64], r: &mut Rng) -> usize {
    let u = r.random::<f64>();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

fn propose(space: &SearchSpace, good: &[&Assignment], bad: &[&Assignment], cfg: &TpeConfig, r: &mut Rng) -> Assignment {
    let mut best: Option<(f64, Assignment)> = None;
    let mut candidates: Vec<Assignment> = vec![Assignment::new(); cfg.n_candidates.max(1)];
    let mut scores = vec![0.0; candidates.len()];
    let numeric: Vec<&Param> = space.params.iter().filter(|p| p.domain.n_choices().is_none()).collect();
    let joint = cfg.multivariate && numeric.len() > 1;
    if joint {
        let units = |set: &[&Assignment]| -> Vec<Vec<f64>> {
            set.iter()
                .filter_map(|a| numeric.iter().map(|p| a.get(&p.name).and_then(|v| p.domain.to_unit(v))).collect())
                .collect()
        };
        let l = JointParzen::new(units(good), numeric.len());
        let g = JointParzen::new(units(bad), numeric.len());
        for (c, s) in candidates.iter_mut().zip(&mut scores) {
            let u = l.sample(numeric.len(), r);
            let mut scored = Vec::with_capacity(u.len());
            for (p, ui) in numeric.iter().zip(u) {
                let v = p.domain.from_unit(ui).expect("numeric domain");
                scored.push(p.domain.to_unit(&v).unwrap_or(ui));
                c.0.insert(p.name.clone(), v);
            }
            *s += l.ln_pdf(&scored) - g.ln_pdf(&scored);
        }
    }
    for p in &space.params {
        match p.domain.n_choices() {
            Some(k) => {
                let idx = |set: &[&Assignment]| -> Vec<usize> {
                    set.iter().filter_map(|a| a.get(&p.name).and_then(|v| p.domain.choice_index(v))).collect()
                };
                let l = categorical_probs(&idx(good), k);
                let g = categorical_probs(&idx(bad), k);
                for (c, s) in candidates.iter_mut().zip(&mut scores) {
                    let i = sample_index(&l, r);
                    *s += l[i].ln() - g[i].ln();
                    c.0.insert(p.name.clone(), p.domain.choice(i).expect("valid index"));
                }
            }
            None if joint => {}
            None => {
                let units = |set: &[&Assignment]| -> Vec<f64> {
                    set.iter().filter_map(|a| a.get(&p.name).and_then(|v| p.domain.to_unit(v))).collect()
                };
                let l = Parzen::new(&units(good));
                let g = Parzen::new(&units(bad));
                for (c, s) in candidates.iter_mut().zip(&mut scores) {
                    let u = l.sample(r);
                    let v = p.domain.from_unit(u).expect("numeric domain");
                    // Score the value actually proposed (integers are rounded).
                    let u = p.domain.to_unit(&v).unwrap_or(u);
                    *s += l.pdf(u).ln() - g.pdf(u).ln();
                    c.0.insert(p.name.clone(), v);
                }
            }
        }
    }
    for (c, s) in candidates.into_iter().zip(scores) {
        if best.as_ref().is_none_or(|(b, _)| s > *b) {
            best = Some((s, c));
        }
    }
    best.expect("at least one candidate").1
}

/// Tree-structured Parzen estimator search with default settings.
pub fn tpe_optimize<F>(objective: F, space: &SearchSpace, n_trials: usize, seed: u64) -> Result<OptimizationResult>
where
    F: Fn(&Assignment) -> Result<f64>,
{
    tpe_optimize_with(objective, space, n_trials, seed, &TpeConfig::default())
}

pub fn tpe_optimize_with<F>(
    objective: F,
    space: &SearchSpace,
    n_trials: usize,
    seed: u64,
    cfg: &TpeConfig,
) -> Result<OptimizationResult>
where
    F: Fn(&Assignment) -> Result<f64>,
{
    if n_trials == 0 {
        return Err(Error::config("optimization needs at least one trial"));
    }
    if !(cfg.gamma > 0.0 && cfg.gamma < 1.0) {
        return Err(Error::config("TPE gamma must lie in (0, 1)"));
    }
    let mut r = rng(seed);
    let mut trials = Vec::with_capacity(n_trials);
    for t in 0..n_trials {
        let mut ok: Vec<(f64, &Assignment)> =
            trials.iter().filter_map(|tr: &super::Trial| tr.objective.map(|o| (o, &tr.params))).collect();
        let params = if t < cfg.n_startup || ok.len() < 2 || space.is_empty() {
            space.sample(&mut r)
        } else {
            ok.sort_by(|a, b| a.0.total_cmp(&b.0));
            let n_good = ((cfg.gamma * ok.len() as f64).ceil() as usize).clamp(1, ok.len() - 1);
            let good: Vec<&Assignment> = ok[..n_good].iter().map(|x| x.1).collect();
            let bad: Vec<&Assignment> = ok[n_good..].iter().map(|x| x.1).collect();
            propose(space, &good, &bad, cfg, &mut r)
        };
        trials.push(evaluate(&objective, params));
    }
    OptimizationResult::from_trials(trials)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hpo::{Domain, ParamValue};

    fn x_of(a: &Assignment, k: &str) -> f64 {
        a.get(k).and_then(ParamValue::as_f64).unwrap()
    }

    #[test]
    fn quadratic_minimum() {
        let space = SearchSpace::new().with("x", &[], Domain::Continuous { lo: 0.0, hi: 10.0 });
        let res = tpe_optimize(|a| Ok((x_of(a, "x") - 3.0).powi(2)), &space, 100, 7).unwrap();
        assert!((x_of(&res.best_params, "x") - 3.0).abs() < 0.2);
        assert_eq!(res.trials.len(), 100);
        assert_eq!(res.budget_used, 100);
    }

    #[test]
    fn categorical_enumeration_oracle() {
        let opts = ["a", "b", "c", "d"];
        let cost = |s: &str| -> f64 { match s {
            "a" => 3.0,
            "b" => 1.0,
            "c" => 4.0,
            _ => 2.0,
        } };
        let oracle = opts.iter().min_by(|a, b| cost(a).total_cmp(&cost(b))).unwrap();
        let space = SearchSpace::new().with(
            "c",
            &[],
            Domain::Categorical { options: opts.iter().map(|s| s.to_string()).collect() },
        );
        let res = tpe_optimize(|a| Ok(cost(a.str_or("c", ""))), &space, 50, 1).unwrap();
        assert_eq!(res.best_params.str_or("c", ""), *oracle);
    }

    #[test]
    fn single_trial_and_determinism() {
        let space = SearchSpace::new().with("x", &[], Domain::Integer { lo: 0, hi: 5 });
        let f = |a: &Assignment| Ok(x_of(a, "x"));
        let one = tpe_optimize(f, &space, 1, 3).unwrap();
        assert_eq!(one.trials.len(), 1);
        assert_eq!(one.best_params, one.trials[0].params);
        assert_eq!(tpe_optimize(f, &space, 30, 3).unwrap(), tpe_optimize(f, &space, 30, 3).unwrap());
    }

    #[test]
    fn failures_are_excluded() {
        let space = SearchSpace::new().with("x", &[], Domain::Continuous { lo: 0.0, hi: 1.0 });
        let res = tpe_optimize(
            |a| if x_of(a, "x") < 0.5 { Err(Error::invalid("bad region")) } else { Ok(x_of(a, "x")) },
            &space,
            40,
            2,
        )
        .unwrap();
        assert!(x_of(&res.best_params, "x") >= 0.5);
        assert!(res.trials.iter().any(|t| t.error.is_some()));
        let all_fail = tpe_optimize(|_| Err(Error::invalid("no")), &space, 5, 2);
        assert!(matches!(all_fail, Err(Error::Undefined(_))));
    }

    #[test]
    fn monotone_running_best() {
        let space = SearchSpace::new().with("x", &[], Domain::LogContinuous { lo: 1e-3, hi: 1e3 });
        let res = tpe_optimize(|a| Ok(x_of(a, "x")), &space, 60, 9).unwrap();
        let trace = res.best_so_far();
        assert!(trace.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(*trace.last().unwrap(), res.best_objective);
    }

    #[test]
    fn joint_and_independent_modes() {
        let space = SearchSpace::new()
            .with("x", &[], Domain::Continuous { lo: -2.0, hi: 2.0 })
            .with("y", &[], Domain::Continuous { lo: -2.0, hi: 2.0 })
            .with("k", &[], Domain::Categorical { options: vec!["on".into(), "off".into()] });
        let f = |a: &Assignment| {
            let penalty = if a.str_or("k", "") == "on" { 0.0 } else { 1.0 };
            Ok(x_of(a, "x").powi(2) + x_of(a, "y").powi(2) + penalty)
        };
        for multivariate in [true, false] {
            let cfg = TpeConfig { multivariate, ..Default::default() };
            let res = tpe_optimize_with(f, &space, 80, 4, &cfg).unwrap();
            assert!(res.best_objective < 0.2, "{multivariate}: {}", res.best_objective);
            assert_eq!(res.best_params.str_or("k", ""), "on");
        }
    }
}
