use serde::{Deserialize, Serialize};

use super::matrix::Rows;
use crate::data::Task;
use crate::hpo::Assignment;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub(crate) enum Metric {
    Euclidean,
    Manhattan,
}

/// Brute-force neighbour model. The traversal strategy and leaf size only
/// affect speed in tree-indexed implementations, so they are accepted and
/// ignored here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct KnnModel {
    train: Rows,
    y: Vec<f64>,
    k: usize,
    distance_weighted: bool,
    metric: Metric,
}

pub(crate) fn fit(x: &Rows, y: &[f64], p: &Assignment, _task: Task) -> KnnModel {
    let metric = match p.str_or("metric", "minkowski") {
        "manhattan" => Metric::Manhattan,
        _ => Metric::Euclidean,
    };
    KnnModel {
        train: x.clone(),
        y: y.to_vec(),
        k: p.usize_or("n_neighbors", 5).clamp(1, x.n),
        distance_weighted: p.str_or("weights", "uniform") == "distance",
        metric,
    }
}

impl KnnModel {
    fn dist(&self, a: &[f64], b: &[f64]) -> f64 {
        match self.metric {
            Metric::Euclidean => a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt(),
            Metric::Manhattan => a.iter().zip(b).map(|(u, v)| (u - v).abs()).sum(),
        }
    }

    pub fn predict(&self, x: &Rows) -> Vec<f64> {
        use rayon::prelude::*;
        (0..x.n)
            .into_par_iter()
            .map(|i| {
                let q = x.row(i);
                let mut d: Vec<(f64, usize)> = (0..self.train.n).map(|j| (self.dist(q, self.train.row(j)), j)).collect();
                let k = self.k.min(d.len());
                d.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                let near = &mut d[..k];
                near.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                if self.distance_weighted {
                    let exact: Vec<f64> = near.iter().filter(|(dd, _)| *dd == 0.0).map(|(_, j)| self.y[*j]).collect();
                    if !exact.is_empty() {
                        return exact.iter().sum::<f64>() / exact.len() as f64;
                    }
                    let (num, den) = near.iter().fold((0.0, 0.0), |(a, b), (dd, j)| (a + self.y[*j] / dd, b + 1.0 / dd));
                    num / den
                } else {
                    near.iter().map(|(_, j)| self.y[*j]).sum::<f64>() / k as f64
                }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hpo::ParamValue;

    #[test]
    fn nearest_neighbour_and_vote_share() {
        let x = Rows::from_rows(&[vec![0.0], vec![1.0], vec![2.0], vec![10.0]]);
        let y = [0.0, 1.0, 1.0, 0.0];
        let m = fit(&x, &y, &Assignment::new().set("n_neighbors", ParamValue::Int(3)), Task::Classification);
        let p = m.predict(&Rows::from_rows(&[vec![1.2]]));
        assert!((p[0] - 2.0 / 3.0).abs() < 1e-15);
        let one = fit(&x, &y, &Assignment::new().set("n_neighbors", ParamValue::Int(1)), Task::Regression);
        assert_eq!(one.predict(&Rows::from_rows(&[vec![9.0]])), vec![0.0]);
    }

    #[test]
    fn distance_weighting() {
        let x = Rows::from_rows(&[vec![0.0], vec![4.0]]);
        let y = [10.0, 20.0];
        let p = Assignment::new()
            .set("n_neighbors", ParamValue::Int(2))
            .set("weights", ParamValue::Str("distance".into()))
            .set("metric", ParamValue::Str("manhattan".into()));
        let m = fit(&x, &y, &p, Task::Regression);
        // distances 1 and 3: (10 + 20/3) / (1 + 1/3) = 12.5
        assert!((m.predict(&Rows::from_rows(&[vec![1.0]]))[0] - 12.5).abs() < 1e-12);
        assert_eq!(m.predict(&Rows::from_rows(&[vec![4.0]]))[0], 20.0);
    }
}
