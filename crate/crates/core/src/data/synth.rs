//! Deterministic synthetic user tables for desk-scale runs.
//!
//! Count-like activity columns are log-normal, rate-like columns come from
//! beta draws on their natural bounds. Missingness follows the three column
//! groups of the imputation map: structural zeros are masked in zero-imputed
//! columns, and the neighbour and EM groups lose cells completely at random.
//! Each target carries a planted signal whose noise is scaled so the
//! population R^2 of the signal equals `signal_r2`.

use rand::Rng as _;
use rand_distr::{Beta, Distribution, LogNormal, Normal};
use serde::{Deserialize, Serialize};

use super::schema::{
    violation_density, FeatureSchema, ANSWERS, DROPOUT, GENDER, LANGUAGES, QUALITY_DIMENSIONS,
    USER_DEVELOPMENT_INDEX, USER_MANAGEMENT_INDEX,
};
use super::table::UserFeatureTable;
use crate::error::{Error, Result};
use crate::impute::{EM_COLUMNS, KNN_COLUMNS};
use crate::rng::{derive_seed_str, rng, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticProfile {
    /// Probability that a structural zero in a zero-imputed column is stored
    /// as missing.
    pub zero_mask_rate: f64,
    /// Completely-at-random missing rate in the neighbour-imputed group.
    pub knn_missing_rate: f64,
    /// Completely-at-random missing rate in the EM-imputed group.
    pub em_missing_rate: f64,
    /// Fraction of target variance explained by the planted signal.
    pub signal_r2: f64,
    /// Scale of the Answers column.
    pub answers_scale: f64,
    /// Log-odds multiplier of the dropout signal.
    pub dropout_strength: f64,
}

impl Default for SyntheticProfile {
    fn default() -> Self {
        SyntheticProfile {
            zero_mask_rate: 0.5,
            knn_missing_rate: 0.08,
            em_missing_rate: 0.12,
            signal_r2: 0.8,
            answers_scale: 10.0,
            dropout_strength: 2.5,
        }
    }
}

impl SyntheticProfile {
    /// Same signal, no missing cells.
    pub fn complete() -> Self {
        SyntheticProfile {
            zero_mask_rate: 0.0,
            knn_missing_rate: 0.0,
            em_missing_rate: 0.0,
            ..Default::default()
        }
    }

    fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("zero_mask_rate", self.zero_mask_rate),
            ("knn_missing_rate", self.knn_missing_rate),
            ("em_missing_rate", self.em_missing_rate),
        ] {
            if !(0.0..1.0).contains(&v) {
                return Err(Error::config(format!("{name} must lie in [0, 1)")));
            }
        }
        if !(self.signal_r2 > 0.0 && self.signal_r2 <= 1.0) {
            return Err(Error::config("signal_r2 must lie in (0, 1]"));
        }
        Ok(())
    }
}

/// Columns whose missing cells are structural zeros.
pub fn zero_group_columns() -> Vec<String> {
    let mut v: Vec<String> = ["ProfileLength", "UpVotes", "DownVotes", "Views", "Reputation", "Questions", ANSWERS, "Code Length"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    v.extend(super::schema::violation_density_columns());
    v
}

fn standardize(v: &[f64]) -> Vec<f64> {
    let n = v.len().max(1) as f64;
    let mean = v.iter().sum::<f64>() / n;
    let sd = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
    if sd == 0.0 {
        return vec![0.0; v.len()];
    }
    v.iter().map(|x| (x - mean) / sd).collect()
}

fn ln1p_z(v: &[f64]) -> Vec<f64> {
    standardize(&v.iter().map(|x| x.ln_1p()).collect::<Vec<_>>())
}

fn variance(v: &[f64]) -> f64 {
    let n = v.len().max(1) as f64;
    let mean = v.iter().sum::<f64>() / n;
    v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n
}

fn lognormal(r: &mut Rng, mu: f64, sigma: f64) -> f64 {
    LogNormal::new(mu, sigma).expect("valid log-normal").sample(r)
}

fn beta(r: &mut Rng, a: f64, b: f64) -> f64 {
    Beta::new(a, b).expect("valid beta").sample(r)
}

/// Adds Gaussian noise so the signal explains `r2` of the total variance.
fn add_noise(r: &mut Rng, signal: &[f64], r2: f64) -> Vec<f64> {
    let sd = (variance(signal) * (1.0 - r2) / r2).sqrt();
    if sd == 0.0 {
        return signal.to_vec();
    }
    let noise = Normal::new(0.0, sd).expect("valid normal");
    signal.iter().map(|s| s + noise.sample(r)).collect()
}

/// Generates `n` synthetic users under the full user-level schema.
pub fn generate_synthetic_users(n: usize, seed: u64, profile: &SyntheticProfile) -> Result<UserFeatureTable> {
    profile.validate()?;
    let schema = FeatureSchema::user_level();
    if n == 0 {
        return Ok(UserFeatureTable::empty(schema));
    }
    let mut r = rng(seed);
    let std_normal = Normal::new(0.0, 1.0).expect("valid normal");

    let activity: Vec<f64> = (0..n).map(|_| std_normal.sample(&mut r)).collect();
    let tenure: Vec<f64> = (0..n).map(|_| std_normal.sample(&mut r)).collect();
    let mut cols: Vec<(String, Vec<f64>)> = Vec::new();
    let mut push = |name: &str, v: Vec<f64>| cols.push((name.to_string(), v));

    let count = |r: &mut Rng, mu: f64, sigma: f64| (lognormal(r, mu, sigma) - 1.0).max(0.0).floor();

    let gender: Vec<f64> = (0..n).map(|_| if r.random::<f64>() < 0.2 { 1.0 } else { 0.0 }).collect();
    let ydu: Vec<f64> = (0..n).map(|i| (0.5 + 14.0 * beta(&mut r, 2.0, 4.0) + 0.8 * tenure[i]).max(0.1)).collect();
    let questions: Vec<f64> = (0..n).map(|i| count(&mut r, 1.2 + 0.6 * activity[i], 0.9)).collect();
    let comments: Vec<f64> = (0..n).map(|i| count(&mut r, 1.6 + 0.7 * activity[i] + 0.2 * tenure[i], 0.8)).collect();
    let edits: Vec<f64> = (0..n).map(|i| count(&mut r, 0.9 + 0.5 * activity[i], 0.9)).collect();
    let upvotes: Vec<f64> = (0..n).map(|i| count(&mut r, 1.8 + 0.6 * activity[i] + 0.3 * tenure[i], 1.0)).collect();
    let downvotes: Vec<f64> = (0..n).map(|i| count(&mut r, 0.4 + 0.3 * activity[i], 1.0)).collect();
    let views: Vec<f64> = (0..n).map(|i| count(&mut r, 3.0 + 0.5 * activity[i] + 0.4 * tenure[i], 1.0)).collect();
    let reputation: Vec<f64> = (0..n).map(|i| count(&mut r, 4.0 + 0.9 * activity[i] + 0.3 * tenure[i], 0.7)).collect();
    let badges: Vec<f64> = (0..n)
        .map(|i| (0.6 * reputation[i].ln_1p() + 0.25 * std_normal.sample(&mut r)).exp().floor())
        .collect();
    let profile_len: Vec<f64> = (0..n)
        .map(|_| if r.random::<f64>() < 0.3 { 0.0 } else { count(&mut r, 2.5, 1.2) })
        .collect();
    let ucf: Vec<f64> = (0..n)
        .map(|i| ((questions[i] + (1.0 + activity[i]).max(0.0) * 3.0) / (365.0 * ydu[i])) * (0.1 * std_normal.sample(&mut r)).exp())
        .collect();
    let readability: Vec<f64> = (0..n).map(|_| 100.0 * beta(&mut r, 5.0, 3.0)).collect();
    let attention: Vec<f64> = (0..n).map(|i| 0.9 * readability[i] / 100.0 + 0.1 * beta(&mut r, 2.0, 2.0)).collect();
    let completion: Vec<f64> = (0..n).map(|_| beta(&mut r, 2.0, 2.0)).collect();
    let polarity = |r: &mut Rng| 2.0 * beta(r, 3.0, 3.0) - 1.0;
    let aboutme: Vec<f64> = (0..n).map(|_| polarity(&mut r)).collect();
    let comment_pol: Vec<f64> = (0..n).map(|_| polarity(&mut r)).collect();
    let answer_pol: Vec<f64> = (0..n).map(|_| polarity(&mut r)).collect();
    let question_pol: Vec<f64> = (0..n).map(|_| polarity(&mut r)).collect();
    let popularity: Vec<f64> = (0..n).map(|i| lognormal(&mut r, 0.4 * activity[i], 0.8)).collect();
    let code_len: Vec<f64> = (0..n)
        .map(|i| if r.random::<f64>() < 0.15 { 0.0 } else { count(&mut r, 5.0 + 0.3 * activity[i], 1.0) })
        .collect();
    let disengagement: Vec<f64> = (0..n).map(|_| 48.0 * beta(&mut r, 2.0, 5.0)).collect();

    // Answers: linear signal over retained predictors plus one interaction,
    // lightly curved so the rounded, zero-clipped counts stay right-skewed.
    let zc = ln1p_z(&comments);
    let zq = ln1p_z(&questions);
    let ze = ln1p_z(&edits);
    let zv = ln1p_z(&views);
    let zy = standardize(&ydu);
    let zap = standardize(&answer_pol);
    let raw_h: Vec<f64> = (0..n)
        .map(|i| 0.55 * zc[i] + 0.35 * zq[i] + 0.25 * ze[i] * zy[i] + 0.2 * zv[i] + 0.15 * zap[i])
        .collect();
    let h = standardize(&raw_h);
    let answers_signal: Vec<f64> = h.iter().map(|x| profile.answers_scale * (0.2 * x).exp()).collect();
    let answers: Vec<f64> = add_noise(&mut r, &answers_signal, profile.signal_r2)
        .into_iter()
        .map(|v| v.max(0.0).round())
        .collect();
    let za = ln1p_z(&answers);

    let predictors_for_vd = [&zc, &zq, &ze, &zv, &zy, &za];
    let mut vds: Vec<(String, Vec<f64>)> = Vec::new();
    for lang in LANGUAGES {
        for dim in QUALITY_DIMENSIONS {
            let name = violation_density(lang, dim);
            let mut wr = rng(derive_seed_str(seed, &name));
            let w: Vec<f64> = predictors_for_vd.iter().map(|_| wr.random_range(-1.0..1.0)).collect();
            let raw: Vec<f64> = (0..n)
                .map(|i| {
                    let lin: f64 = predictors_for_vd.iter().zip(&w).map(|(z, wj)| z[i] * wj).sum();
                    lin + 0.3 * zc[i] * zy[i]
                })
                .collect();
            let hz = standardize(&raw);
            let signal: Vec<f64> = hz.iter().map(|x| 0.5 * (0.5 * x).exp()).collect();
            let vd: Vec<f64> = add_noise(&mut r, &signal, profile.signal_r2).into_iter().map(|v| v.max(0.0)).collect();
            vds.push((name, vd));
        }
    }

    // Dropout (1 = dropped out): less activity and shorter tenure raise the odds.
    let zrq: Vec<f64> = standardize(&vds[0].1);
    let raw_logit: Vec<f64> = (0..n)
        .map(|i| -0.8 * zc[i] - 0.6 * zy[i] - 0.5 * za[i] + 0.3 * zrq[i] - 0.3 * ze[i] * zq[i])
        .collect();
    let zl = standardize(&raw_logit);
    let dropout: Vec<f64> = zl
        .iter()
        .map(|l| {
            let p = 1.0 / (1.0 + (-(0.45 + profile.dropout_strength * l)).exp());
            if r.random::<f64>() < p { 1.0 } else { 0.0 }
        })
        .collect();

    let udi: Vec<f64> = questions.iter().zip(&answers).map(|(q, a)| q + a).collect();
    let umi: Vec<f64> = upvotes.iter().zip(&downvotes).map(|(u, d)| u + d).collect();

    push(GENDER, gender);
    push("Post Attention to Detail", attention);
    push("Post Readability", readability);
    push("Badges", badges);
    push("User Contribution Frequency", ucf);
    push("Reputation", reputation);
    push("YearlyDurationUsage", ydu);
    push("User Profile Completion Rate", completion);
    push("Questions", questions);
    push("Comments", comments);
    push("Edits", edits);
    push("Average AboutMe Polarity", aboutme);
    push("ProfileLength", profile_len);
    push("Views", views);
    push("UpVotes", upvotes);
    push("User Popularity Index", popularity);
    push("Comment Polarity", comment_pol);
    push("Answer Polarity", answer_pol);
    push("Question Polarity", question_pol);
    push("Code Length", code_len);
    push("DownVotes", downvotes);
    push("User Disengagement Rate", disengagement);
    push(USER_DEVELOPMENT_INDEX, udi);
    push(USER_MANAGEMENT_INDEX, umi);
    push(ANSWERS, answers);
    for (name, v) in vds {
        push(&name, v);
    }
    push(DROPOUT, dropout);

    // Order by schema and inject missingness.
    let zero_group = zero_group_columns();
    let mut mr = rng(derive_seed_str(seed, "missingness"));
    let mut out: Vec<Vec<Option<f64>>> = Vec::with_capacity(schema.len());
    for name in schema.names() {
        let values = &cols
            .iter()
            .find(|(n, _)| n == name)
            .unwrap_or_else(|| panic!("generator covers column {name}"))
            .1;
        let column: Vec<Option<f64>> = if zero_group.iter().any(|z| z == name) {
            values
                .iter()
                .map(|&v| if v == 0.0 && mr.random::<f64>() < profile.zero_mask_rate { None } else { Some(v) })
                .collect()
        } else if KNN_COLUMNS.contains(&name) {
            values.iter().map(|&v| if mr.random::<f64>() < profile.knn_missing_rate { None } else { Some(v) }).collect()
        } else if EM_COLUMNS.contains(&name) {
            values.iter().map(|&v| if mr.random::<f64>() < profile.em_missing_rate { None } else { Some(v) }).collect()
        } else {
            values.iter().map(|&v| Some(v)).collect()
        };
        out.push(column);
    }
    UserFeatureTable::from_options(schema, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn skewness(v: &[f64]) -> f64 {
        let n = v.len() as f64;
        let m = v.iter().sum::<f64>() / n;
        let m2 = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
        let m3 = v.iter().map(|x| (x - m).powi(3)).sum::<f64>() / n;
        m3 / m2.powf(1.5)
    }

    #[test]
    fn zero_rows_gives_empty_table() {
        let t = generate_synthetic_users(0, 7, &SyntheticProfile::default()).unwrap();
        assert_eq!(t.n_rows(), 0);
        assert_eq!(t.schema(), &FeatureSchema::user_level());
    }

    #[test]
    fn same_seed_same_bytes() {
        let p = SyntheticProfile::default();
        let mut a = Vec::new();
        let mut b = Vec::new();
        generate_synthetic_users(1000, 7, &p).unwrap().write(&mut a, b',').unwrap();
        generate_synthetic_users(1000, 7, &p).unwrap().write(&mut b, b',').unwrap();
        assert_eq!(a, b);
        let mut c = Vec::new();
        generate_synthetic_users(1000, 8, &p).unwrap().write(&mut c, b',').unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn answers_are_right_skewed() {
        let t = generate_synthetic_users(10_000, 7, &SyntheticProfile::default()).unwrap();
        let c = t.schema().require(ANSWERS).unwrap();
        let observed: Vec<f64> = (0..t.n_rows()).map(|r| t.get(r, c).unwrap_or(0.0)).collect();
        assert!(skewness(&observed) > 0.5, "skewness {}", skewness(&observed));
    }

    #[test]
    fn missingness_follows_groups() {
        let t = generate_synthetic_users(2000, 3, &SyntheticProfile::default()).unwrap();
        let s = t.schema();
        assert_eq!(t.missing_count(s.require("YearlyDurationUsage").unwrap()), 0);
        assert!(t.missing_count(s.require("Comments").unwrap()) > 0);
        assert!(t.missing_count(s.require("Comment Polarity").unwrap()) > 0);
        // Zero-group cells are only masked where the underlying value is zero.
        let complete = generate_synthetic_users(2000, 3, &SyntheticProfile::complete()).unwrap();
        let q = s.require("Questions").unwrap();
        for r in 0..t.n_rows() {
            if t.is_missing(r, q) {
                assert_eq!(complete.get(r, q), Some(0.0));
            }
        }
    }

    #[test]
    fn invalid_profile_rejected() {
        let p = SyntheticProfile { signal_r2: 0.0, ..Default::default() };
        assert!(generate_synthetic_users(10, 1, &p).is_err());
    }
}
