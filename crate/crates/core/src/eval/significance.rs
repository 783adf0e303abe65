//! Rank-based tests: Kruskal-Wallis with Conover-Iman post-hoc comparisons,
//! and a Kolmogorov-Smirnov normality check.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal, StudentsT};

use crate::error::{Error, Result};
use crate::stats::{average_ranks, mean, std_sample};

/// Significance level used throughout the reports.
pub const ALPHA: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Correction {
    Bonferroni,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseResult {
    pub a: usize,
    pub b: usize,
    pub statistic: f64,
    pub p_raw: f64,
    pub p_adjusted: f64,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignificanceReport {
    pub h: f64,
    pub p: f64,
    pub alpha: f64,
    pub correction: Correction,
    pub posthoc: Vec<PairwiseResult>,
}

struct Ranked {
    n: usize,
    sizes: Vec<usize>,
    mean_ranks: Vec<f64>,
    sum_sq_ranks: f64,
    tie_term: f64,
}

fn rank_groups(groups: &[Vec<f64>]) -> Result<Ranked> {
    if groups.len() < 2 {
        return Err(Error::invalid("rank tests need at least two groups"));
    }
    if let Some(i) = groups.iter().position(Vec::is_empty) {
        return Err(Error::invalid(format!("group {i} is empty")));
    }
    let pooled: Vec<f64> = groups.iter().flatten().copied().collect();
    if pooled.iter().any(|v| v.is_nan()) {
        return Err(Error::invalid("rank tests cannot handle NaN values"));
    }
    let ranks = average_ranks(&pooled);
    let mut sorted = pooled.clone();
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let mut mean_ranks = Vec::with_capacity(groups.len());
    let mut k = 0;
    for g in groups {
        mean_ranks.push(ranks[k..k + g.len()].iter().sum::<f64>() / g.len() as f64);
        k += g.len();
    }
    Ok(Ranked {
        n: pooled.len(),
        sizes: groups.iter().map(Vec::len).collect(),
        mean_ranks,
        sum_sq_ranks: ranks.iter().map(|r| r * r).sum(),
        tie_term,
    })
}

fn h_statistic(r: &Ranked) -> f64 {
    let n = r.n as f64;
    let grand = (n + 1.0) / 2.0;
    let h: f64 = 12.0 / (n * (n + 1.0))
        * r.sizes.iter().zip(&r.mean_ranks).map(|(&ni, m)| ni as f64 * (m - grand).powi(2)).sum::<f64>();
    let correction = 1.0 - r.tie_term / (n * n * n - n);
    if correction <= 0.0 {
        0.0
    } else {
        h / correction
    }
}

/// Kruskal-Wallis H (tie-corrected) and its chi-squared p-value.
pub fn kruskal_wallis(groups: &[Vec<f64>]) -> Result<(f64, f64)> {
    let r = rank_groups(groups)?;
    let h = h_statistic(&r);
    let df = (groups.len() - 1) as f64;
    let chi = ChiSquared::new(df).map_err(|e| Error::invalid(e.to_string()))?;
    let p = if h <= 0.0 { 1.0 } else { chi.sf(h) };
    Ok((h, p))
}

/// Conover-Iman pairwise comparisons with Bonferroni-adjusted p-values.
pub fn conover_iman(groups: &[Vec<f64>], alpha: f64) -> Result<SignificanceReport> {
    let r = rank_groups(groups)?;
    let h = h_statistic(&r);
    let k = groups.len();
    let n = r.n as f64;
    let df_chi = (k - 1) as f64;
    let p = if h <= 0.0 { 1.0 } else { ChiSquared::new(df_chi).map_err(|e| Error::invalid(e.to_string()))?.sf(h) };
    let s2 = (r.sum_sq_ranks - n * (n + 1.0).powi(2) / 4.0) / (n - 1.0);
    let df = n - k as f64;
    let pairs = k * (k - 1) / 2;
    let t_dist = if df > 0.0 { Some(StudentsT::new(0.0, 1.0, df).map_err(|e| Error::invalid(e.to_string()))?) } else { None };
    let mut posthoc = Vec::with_capacity(pairs);
    for a in 0..k {
        for b in a + 1..k {
            let diff = r.mean_ranks[a] - r.mean_ranks[b];
            let var = s2 * (n - 1.0 - h) / df * (1.0 / r.sizes[a] as f64 + 1.0 / r.sizes[b] as f64);
            let (statistic, p_raw) = match (&t_dist, var > 0.0) {
                (Some(t), true) => {
                    let stat = diff / var.sqrt();
                    (stat, (2.0 * t.sf(stat.abs())).min(1.0))
                }
                _ if diff == 0.0 => (0.0, 1.0),
                _ => (f64::INFINITY.copysign(diff), 0.0),
            };
            let p_adjusted = bonferroni(p_raw, pairs);
            posthoc.push(PairwiseResult { a, b, statistic, p_raw, p_adjusted, significant: p_adjusted < alpha });
        }
    }
    Ok(SignificanceReport { h, p, alpha, correction: Correction::Bonferroni, posthoc })
}

pub fn bonferroni(p: f64, comparisons: usize) -> f64 {
    (p * comparisons as f64).min(1.0)
}

/// One-sample KS distance to a normal with the sample's mean and (n-1)
/// standard deviation, with the Stephens-adjusted asymptotic p-value.
pub fn ks_normality(sample: &[f64]) -> Result<(f64, f64)> {
    if sample.len() < 5 {
        return Err(Error::invalid("KS normality check needs at least 5 values"));
    }
    let sd = std_sample(sample);
    if sd == 0.0 || !sd.is_finite() {
        return Err(Error::invalid("KS normality check of a constant sample"));
    }
    let dist = Normal::new(mean(sample), sd).map_err(|e| Error::invalid(e.to_string()))?;
    let mut v = sample.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let d = v
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let f = dist.cdf(*x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max);
    let lambda = (n.sqrt() + 0.12 + 0.11 / n.sqrt()) * d;
    Ok((d, kolmogorov_sf(lambda)))
}

/// P(K > x) for the Kolmogorov distribution.
fn kolmogorov_sf(x: f64) -> f64 {
    if x < 0.2 {
        return 1.0;
    }
    let mut s = 0.0;
    for j in 1..=100 {
        let j = f64::from(j);
        let term = 2.0 * (-1f64).powf(j - 1.0) * (-2.0 * j * j * x * x).exp();
        s += term;
        if term.abs() < 1e-16 {
            break;
        }
    }
    s.clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn identical_groups_give_zero() {
        let g = vec![vec![1.0, 2.0, 3.0]; 3];
        assert_eq!(kruskal_wallis(&g).unwrap(), (0.0, 1.0));
        assert!(conover_iman(&g, ALPHA).unwrap().posthoc.iter().all(|p| !p.significant));
    }

    #[test]
    fn disjoint_ranks_hand_value() {
        let g = vec![vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0], vec![7.0, 8.0, 9.0]];
        // 12/(9*10) * 3 * ((2-5)^2 + 0 + (8-5)^2) = 7.2
        let (h, p) = kruskal_wallis(&g).unwrap();
        assert!((h - 7.2).abs() < 1e-12);
        assert!((p - (-3.6f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn monotone_invariance() {
        let g = vec![vec![0.1f64, 0.5, 0.2, 0.9], vec![0.3, 1.2, 0.05], vec![2.0, 0.7]];
        let e: Vec<Vec<f64>> = g.iter().map(|v| v.iter().map(|x| x.exp()).collect()).collect();
        assert_eq!(kruskal_wallis(&g).unwrap(), kruskal_wallis(&e).unwrap());
    }

    #[test]
    fn bonferroni_rule() {
        assert!((bonferroni(0.004, 3) - 0.012).abs() < 1e-15);
        assert_eq!(bonferroni(0.6, 3), 1.0);
    }

    #[test]
    fn empty_group_rejected() {
        assert!(kruskal_wallis(&[vec![1.0], vec![]]).is_err());
    }

    #[test]
    fn ks_on_normal_sample() {
        let mut r = rng(11);
        let s: Vec<f64> = (0..10_000).map(|_| StandardNormal.sample(&mut r)).collect();
        let (d, p) = ks_normality(&s).unwrap();
        assert!(d < 0.02 && p > 0.01, "{d} {p}");
        assert!(ks_normality(&[1.0; 6]).is_err());
    }
}
