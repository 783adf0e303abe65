use serde::{Deserialize, Serialize};

use crate::data::{ColumnRole, UserFeatureTable};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistanceMetric {
    Euclidean,
    Manhattan,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Weighting {
    Uniform,
    InverseDistance,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KnnParams {
    pub k: usize,
    pub metric: DistanceMetric,
    pub weighting: Weighting,
}

impl Default for KnnParams {
    /// Five neighbours, Euclidean distance, inverse-distance weights.
    fn default() -> Self {
        KnnParams {
            k: 5,
            metric: DistanceMetric::Euclidean,
            weighting: Weighting::InverseDistance,
        }
    }
}

impl KnnParams {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::config("KNN imputation needs k >= 1"));
        }
        Ok(())
    }
}

/// Default neighbour space for imputing `column`: fully observed predictor
/// columns other than `column` itself. Targets and composites never serve as
/// neighbour features.
pub fn neighbour_columns(table: &UserFeatureTable, column: &str) -> Vec<String> {
    table
        .schema()
        .columns()
        .iter()
        .enumerate()
        .filter(|(i, c)| c.role == ColumnRole::Predictor && c.name != column && !table.has_missing(*i))
        .map(|(_, c)| c.name.clone())
        .collect()
}

/// Column-standardized feature rows (population std). Constant columns are
/// dropped since they cannot separate neighbours.
pub(crate) fn standardized_rows(table: &UserFeatureTable, features: &[String]) -> Result<Vec<Vec<f64>>> {
    let n = table.n_rows();
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(features.len());
    for name in features {
        let v = table.column_values(name)?;
        let mean = v.iter().sum::<f64>() / n as f64;
        let sd = (v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64).sqrt();
        if sd > 0.0 {
            cols.push(v.iter().map(|x| (x - mean) / sd).collect());
        }
    }
    Ok((0..n).map(|r| cols.iter().map(|c| c[r]).collect()).collect())
}

pub(crate) fn distance(metric: DistanceMetric, a: &[f64], b: &[f64]) -> f64 {
    match metric {
        DistanceMetric::Euclidean => a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt(),
        DistanceMetric::Manhattan => a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum(),
    }
}

/// Weighted mean over neighbours given as (distance, value) in ascending
/// (distance, row) order. Any zero-distance neighbour short-circuits to the
/// mean of the zero-distance values.
pub(crate) fn neighbour_estimate(weighting: Weighting, neighbours: &[(f64, f64)]) -> f64 {
    let exact: Vec<f64> = neighbours.iter().filter(|(d, _)| *d == 0.0).map(|(_, v)| *v).collect();
    if !exact.is_empty() {
        return exact.iter().sum::<f64>() / exact.len() as f64;
    }
    match weighting {
        Weighting::Uniform => neighbours.iter().map(|(_, v)| v).sum::<f64>() / neighbours.len() as f64,
        Weighting::InverseDistance => {
            let mut num = 0.0;
            let mut den = 0.0;
            for (d, v) in neighbours {
                let w = 1.0 / d;
                num += w * v;
                den += w;
            }
            num / den
        }
    }
}

/// Imputes `column` from its `k` nearest donor rows in the default
/// neighbour space (see [`neighbour_columns`]).
pub fn impute_knn(table: &UserFeatureTable, column: &str, params: &KnnParams) -> Result<UserFeatureTable> {
    let features = neighbour_columns(table, column);
    impute_knn_with(table, column, params, &features)
}

/// Imputes `column` using an explicit neighbour feature set.
pub fn impute_knn_with(
    table: &UserFeatureTable,
    column: &str,
    params: &KnnParams,
    features: &[String],
) -> Result<UserFeatureTable> {
    params.validate()?;
    let c = table.schema().require(column)?;
    let err = |message: String| Error::Imputation { column: column.to_string(), message };
    if !table.has_missing(c) {
        return Ok(table.clone());
    }
    let donors: Vec<usize> = (0..table.n_rows()).filter(|&r| !table.is_missing(r, c)).collect();
    if donors.is_empty() {
        return Err(err("column is entirely missing; strategy misassigned".into()));
    }
    if donors.len() < params.k {
        return Err(err(format!("{} observed donors, need k = {}", donors.len(), params.k)));
    }
    if features.is_empty() {
        return Err(err("no complete predictor columns to measure similarity".into()));
    }
    let rows = standardized_rows(table, features).map_err(|e| err(e.to_string()))?;
    let raw = table.column_raw(c);

    let mut values = raw.to_vec();
    let mut scratch: Vec<(f64, usize)> = Vec::with_capacity(donors.len());
    for r in 0..table.n_rows() {
        if !table.is_missing(r, c) {
            continue;
        }
        scratch.clear();
        scratch.extend(donors.iter().map(|&d| (distance(params.metric, &rows[r], &rows[d]), d)));
        let k = params.k;
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if scratch.len() > k {
            scratch.select_nth_unstable_by(k - 1, cmp);
            scratch.truncate(k);
        }
        scratch.sort_by(cmp);
        let neighbours: Vec<(f64, f64)> = scratch.iter().map(|&(d, i)| (d, raw[i])).collect();
        values[r] = neighbour_estimate(params.weighting, &neighbours);
    }
    table.with_column(c, values, vec![false; table.n_rows()])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{ColumnSpec, FeatureSchema};

    fn table(feature: Vec<f64>, target: Vec<Option<f64>>) -> UserFeatureTable {
        let s = FeatureSchema::new(vec![
            ColumnSpec::new("f", ColumnRole::Predictor, &[]),
            ColumnSpec::new("y", ColumnRole::Predictor, &[]),
        ])
        .unwrap();
        UserFeatureTable::from_options(s, vec![feature.into_iter().map(Some).collect(), target]).unwrap()
    }

    #[test]
    fn k1_takes_nearest_donor() {
        let t = table(vec![0.0, 1.0, 5.0, 1.2], vec![Some(10.0), Some(20.0), Some(30.0), None]);
        let p = KnnParams { k: 1, ..Default::default() };
        let out = impute_knn(&t, "y", &p).unwrap();
        assert_eq!(out.get(3, 1), Some(20.0));
    }

    #[test]
    fn inverse_distance_weighted_mean() {
        // Donors at distances 1 and 3 with values 10 and 20.
        let est = neighbour_estimate(Weighting::InverseDistance, &[(1.0, 10.0), (3.0, 20.0)]);
        assert!((est - 12.5).abs() < 1e-12, "{est}");
    }

    #[test]
    fn zero_distance_donor_is_exact() {
        let t = table(vec![0.0, 2.0, 7.0, 2.0], vec![Some(1.0), Some(42.0), Some(3.0), None]);
        let out = impute_knn(&t, "y", &KnnParams { k: 2, ..Default::default() }).unwrap();
        assert_eq!(out.get(3, 1), Some(42.0));
    }

    #[test]
    fn too_few_donors() {
        let t = table(vec![0.0, 1.0, 2.0], vec![Some(1.0), None, None]);
        let e = impute_knn(&t, "y", &KnnParams::default()).unwrap_err();
        assert!(matches!(e, Error::Imputation { ref column, .. } if column == "y"));
    }

    #[test]
    fn all_missing_is_an_error() {
        let t = table(vec![0.0, 1.0], vec![None, None]);
        assert!(impute_knn(&t, "y", &KnnParams { k: 1, ..Default::default() }).is_err());
    }

    #[test]
    fn idempotent_and_observed_cells_untouched() {
        let t = table(vec![0.0, 1.0, 2.0, 3.0], vec![Some(1.0), None, Some(3.0), Some(4.0)]);
        let once = impute_knn(&t, "y", &KnnParams { k: 2, ..Default::default() }).unwrap();
        for r in [0, 2, 3] {
            assert_eq!(once.get(r, 1).unwrap().to_bits(), t.get(r, 1).unwrap().to_bits());
        }
        assert_eq!(impute_knn(&once, "y", &KnnParams::default()).unwrap(), once);
    }
}
