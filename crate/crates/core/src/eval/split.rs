use std::collections::BTreeMap;

use rand::seq::SliceRandom;

use crate::data::{Task, UserFeatureTable};
use crate::error::{Error, Result};
use crate::rng::rng;

/// Train/test row indices, each sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Shuffled split of `n` rows. With `strata`, each distinct label is split
/// separately so both parts keep the label mix.
pub fn split_indices(n: usize, ratio: f64, seed: u64, strata: Option<&[f64]>) -> Result<Split> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::invalid(format!("train ratio {ratio} outside (0, 1)")));
    }
    if n < 2 {
        return Err(Error::invalid("splitting needs at least two rows"));
    }
    let mut r = rng(seed);
    let groups: Vec<Vec<usize>> = match strata {
        Some(labels) => {
            if labels.len() != n {
                return Err(Error::invalid("one stratum label per row required"));
            }
            let mut by: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
            for (i, l) in labels.iter().enumerate() {
                by.entry(l.to_bits()).or_default().push(i);
            }
            by.into_values().collect()
        }
        None => vec![(0..n).collect()],
    };
    let mut train = Vec::with_capacity(n);
    let mut test = Vec::with_capacity(n);
    for mut g in groups {
        g.shuffle(&mut r);
        let k = ((ratio * g.len() as f64).round() as usize).min(g.len());
        train.extend_from_slice(&g[..k]);
        test.extend_from_slice(&g[k..]);
    }
    if train.is_empty() || test.is_empty() {
        return Err(Error::invalid(format!("ratio {ratio} leaves an empty partition of {n} rows")));
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(Split { train, test })
}

/// Splits table rows; classification targets are stratified on `target`.
pub fn split_train_test(
    table: &UserFeatureTable,
    target: &str,
    task: Task,
    ratio: f64,
    seed: u64,
) -> Result<(UserFeatureTable, UserFeatureTable)> {
    let labels = table.column_values(target)?;
    let strata = (task == Task::Classification).then_some(labels);
    let s = split_indices(table.n_rows(), ratio, seed, strata)?;
    Ok((table.take_rows(&s.train), table.take_rows(&s.test)))
}
