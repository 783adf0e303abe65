use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{mean, skewness, std_pop};

/// Feature-engineering technique applied to predictor columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeTechnique {
    Standardise,
    Normalise,
    Log,
    Power,
    None,
}

impl FeTechnique {
    pub const ALL: [FeTechnique; 5] =
        [FeTechnique::Standardise, FeTechnique::Normalise, FeTechnique::Log, FeTechnique::Power, FeTechnique::None];

    pub fn name(self) -> &'static str {
        match self {
            FeTechnique::Standardise => "standardise",
            FeTechnique::Normalise => "normalise",
            FeTechnique::Log => "log",
            FeTechnique::Power => "power",
            FeTechnique::None => "none",
        }
    }
}

impl fmt::Display for FeTechnique {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FeTechnique {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FeTechnique::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::config(format!("unknown FE technique `{s}`")))
    }
}

/// Exponent grid searched by the power transform; 0 stands for the log map.
pub const POWER_GRID: [f64; 6] = [-1.0, -0.5, 0.0, 0.5, 1.0, 2.0];

/// Fitted statistics of one column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ColumnParams {
    Standardise { mean: f64, std: f64 },
    Normalise { min: f64, max: f64 },
    Log { shift: f64 },
    Power { shift: f64, exponent: f64 },
    Identity,
}

/// Box-Cox style map on y = 1 + x - shift (y >= 1 on training data), monotone
/// increasing for every exponent.
fn power_map(x: f64, shift: f64, exponent: f64) -> f64 {
    let y = (1.0 + x - shift).max(1.0);
    if exponent == 0.0 {
        y.ln()
    } else {
        (y.powf(exponent) - 1.0) / exponent
    }
}

impl ColumnParams {
    fn fit(kind: FeTechnique, col: &[f64], name: usize) -> ColumnParams {
        match kind {
            FeTechnique::Standardise => {
                let std = std_pop(col);
                if std == 0.0 {
                    log::warn!("column {name} has zero variance; standardised to zeros");
                }
                ColumnParams::Standardise { mean: mean(col), std }
            }
            FeTechnique::Normalise => {
                let min = col.iter().copied().fold(f64::INFINITY, f64::min);
                let max = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                if max == min {
                    log::warn!("column {name} is constant; normalised to zeros");
                }
                ColumnParams::Normalise { min, max }
            }
            FeTechnique::Log => {
                let min = col.iter().copied().fold(f64::INFINITY, f64::min);
                ColumnParams::Log { shift: min.min(0.0) }
            }
            FeTechnique::Power => {
                let min = col.iter().copied().fold(f64::INFINITY, f64::min);
                let shift = min.min(0.0);
                let mut best = (f64::INFINITY, 1.0);
                for &e in &POWER_GRID {
                    let t: Vec<f64> = col.iter().map(|&x| power_map(x, shift, e)).collect();
                    let s = skewness(&t).abs();
                    if s.is_finite() && s < best.0 {
                        best = (s, e);
                    }
                }
                ColumnParams::Power { shift, exponent: best.1 }
            }
            FeTechnique::None => ColumnParams::Identity,
        }
    }

    fn apply(&self, x: f64) -> f64 {
        match *self {
            ColumnParams::Standardise { mean, std } => {
                if std == 0.0 {
                    0.0
                } else {
                    (x - mean) / std
                }
            }
            ColumnParams::Normalise { min, max } => {
                if max == min {
                    0.0
                } else {
                    (x - min) / (max - min)
                }
            }
            // Evaluation values below the training shift are clamped to the
            // training floor so the logarithm stays defined.
            ColumnParams::Log { shift } => (1.0 + x - shift).max(1.0).ln(),
            ColumnParams::Power { shift, exponent } => power_map(x, shift, exponent),
            ColumnParams::Identity => x,
        }
    }
}

/// A transform fitted on training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureTransform {
    pub kind: FeTechnique,
    pub params: Vec<ColumnParams>,
}

impl FeatureTransform {
    pub fn fit(kind: FeTechnique, train: &DMatrix<f64>) -> Result<Self> {
        if train.nrows() == 0 {
            return Err(Error::invalid("cannot fit a transform on zero training rows"));
        }
        let params = (0..train.ncols())
            .map(|j| {
                let col: Vec<f64> = train.column(j).iter().copied().collect();
                ColumnParams::fit(kind, &col, j)
            })
            .collect();
        Ok(FeatureTransform { kind, params })
    }

    pub fn apply(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.ncols() != self.params.len() {
            return Err(Error::invalid(format!(
                "transform fitted on {} columns, got {}",
                self.params.len(),
                x.ncols()
            )));
        }
        Ok(DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| self.params[j].apply(x[(i, j)])))
    }
}

/// Fits `kind` on `train` and applies it to both matrices.
pub fn fit_apply_transform(
    kind: FeTechnique,
    train: &DMatrix<f64>,
    eval: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, DMatrix<f64>, FeatureTransform)> {
    if eval.ncols() != train.ncols() {
        return Err(Error::invalid("train and eval column counts differ"));
    }
    let t = FeatureTransform::fit(kind, train)?;
    Ok((t.apply(train)?, t.apply(eval)?, t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng;
    use crate::stats::average_ranks;
    use proptest::prelude::*;
    use rand_distr::{Distribution, LogNormal};

    fn col(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_column_slice(v.len(), 1, v)
    }

    #[test]
    fn standardise_example() {
        let (tr, _, _) = fit_apply_transform(FeTechnique::Standardise, &col(&[1.0, 2.0, 3.0]), &col(&[0.0])).unwrap();
        let want = [-1.224744871391589, 0.0, 1.224744871391589];
        for (a, b) in tr.iter().zip(want) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn normalise_example_and_eval_may_exit_unit_interval() {
        let (tr, ev, _) =
            fit_apply_transform(FeTechnique::Normalise, &col(&[2.0, 4.0, 6.0]), &col(&[8.0])).unwrap();
        assert_eq!(tr.as_slice(), &[0.0, 0.5, 1.0]);
        assert_eq!(ev[(0, 0)], 1.5);
    }

    #[test]
    fn constant_columns_map_to_zero() {
        for k in [FeTechnique::Standardise, FeTechnique::Normalise] {
            let (tr, _, _) = fit_apply_transform(k, &col(&[3.0, 3.0]), &col(&[3.0])).unwrap();
            assert_eq!(tr.as_slice(), &[0.0, 0.0]);
        }
    }

    #[test]
    fn log_reduces_skew_of_lognormal() {
        let mut r = rng(7);
        let d = LogNormal::new(1.0, 1.0).unwrap();
        let v: Vec<f64> = (0..5000).map(|_| d.sample(&mut r)).collect();
        let before = skewness(&v).abs();
        let (tr, _, _) = fit_apply_transform(FeTechnique::Log, &col(&v), &col(&[1.0])).unwrap();
        let after = skewness(tr.as_slice()).abs();
        assert!(after < before, "{after} vs {before}");
    }

    #[test]
    fn power_picks_grid_exponent() {
        let mut r = rng(3);
        let d = LogNormal::new(0.0, 1.5).unwrap();
        let v: Vec<f64> = (0..2000).map(|_| d.sample(&mut r)).collect();
        let t = FeatureTransform::fit(FeTechnique::Power, &col(&v)).unwrap();
        match t.params[0] {
            ColumnParams::Power { exponent, shift } => {
                assert!(POWER_GRID.contains(&exponent));
                assert_eq!(shift, 0.0);
                assert!(exponent < 1.0);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn fitted_params_ignore_eval_rows() {
        let train = col(&[1.0, 5.0, 9.0, 2.0]);
        for k in FeTechnique::ALL {
            let (_, _, a) = fit_apply_transform(k, &train, &col(&[100.0, -3.0])).unwrap();
            let (_, _, b) = fit_apply_transform(k, &train, &col(&[-50.0])).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn names_round_trip() {
        for k in FeTechnique::ALL {
            assert_eq!(k.name().parse::<FeTechnique>().unwrap(), k);
        }
        assert!("zscore".parse::<FeTechnique>().is_err());
    }

    proptest! {
        #[test]
        fn standardise_moments(v in prop::collection::vec(-1e3f64..1e3, 3..60)) {
            prop_assume!(std_pop(&v) > 1e-3);
            let (tr, _, _) = fit_apply_transform(FeTechnique::Standardise, &col(&v), &col(&[0.0])).unwrap();
            prop_assert!(mean(tr.as_slice()).abs() < 1e-10);
            prop_assert!((std_pop(tr.as_slice()) - 1.0).abs() < 1e-10);
        }

        #[test]
        fn normalise_hits_both_endpoints(v in prop::collection::vec(-1e3f64..1e3, 2..60)) {
            prop_assume!(std_pop(&v) > 0.0);
            let (tr, _, _) = fit_apply_transform(FeTechnique::Normalise, &col(&v), &col(&[0.0])).unwrap();
            prop_assert!(tr.iter().all(|x| (0.0..=1.0).contains(x)));
            prop_assert!(tr.iter().any(|&x| x == 0.0) && tr.iter().any(|&x| x == 1.0));
        }

        #[test]
        fn log_and_power_preserve_ranks(v in prop::collection::vec(-50f64..1e4, 2..60)) {
            for k in [FeTechnique::Log, FeTechnique::Power] {
                let (tr, _, _) = fit_apply_transform(k, &col(&v), &col(&[0.0])).unwrap();
                prop_assert_eq!(average_ranks(tr.as_slice()), average_ranks(&v));
            }
        }
    }
}
