//! Histogram-based regression tree over gradient/hessian statistics. With
//! g = -w*y and h = w it is a weighted least-squares CART; boosting passes
//! loss gradients instead.

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use super::matrix::Rows;
use crate::rng::Rng;

const MAX_BINS: usize = 256;

/// Per-feature cut points and the binned training matrix (row-major).
pub(crate) struct Binned {
    pub p: usize,
    cuts: Vec<Vec<f64>>,
    bins: Vec<u8>,
}

impl Binned {
    pub fn new(x: &Rows) -> Self {
        let cuts: Vec<Vec<f64>> = (0..x.p).map(|j| cut_points(x.column(j))).collect();
        let mut bins = vec![0u8; x.n * x.p];
        for i in 0..x.n {
            for j in 0..x.p {
                let c = &cuts[j];
                bins[i * x.p + j] = c.partition_point(|&t| t < x.get(i, j)) as u8;
            }
        }
        Binned { p: x.p, cuts, bins }
    }

    #[inline]
    fn bin(&self, i: usize, j: usize) -> usize {
        self.bins[i * self.p + j] as usize
    }
}

/// Midpoints between distinct values, or quantile midpoints when there are
/// more distinct values than bins. A value v lands in bin b iff
/// cuts[b-1] < v <= cuts[b].
fn cut_points(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v.dedup();
    if v.len() <= 1 {
        return Vec::new();
    }
    if v.len() <= MAX_BINS {
        return v.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    }
    let k = MAX_BINS - 1;
    let mut cuts: Vec<f64> = (1..=k)
        .map(|q| {
            let pos = q * (v.len() - 1) / (k + 1);
            0.5 * (v[pos] + v[pos + 1])
        })
        .collect();
    cuts.dedup();
    cuts
}

#[derive(Debug, Clone)]
pub(crate) struct TreeParams {
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    pub min_hessian_leaf: f64,
    pub lambda: f64,
    pub alpha: f64,
    pub gamma: f64,
    /// Fraction of the allowed features examined at each node.
    pub max_features: f64,
    /// Leaf values are multiplied by this factor.
    pub shrinkage: f64,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: 64,
            min_samples_split: 2,
            min_samples_leaf: 1,
            min_hessian_leaf: 0.0,
            lambda: 0.0,
            alpha: 0.0,
            gamma: 0.0,
            max_features: 1.0,
            shrinkage: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub(crate) enum Node {
    Leaf { value: f64 },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    pub fn predict_one(&self, x: &[f64]) -> f64 {
        let mut k = 0;
        loop {
            match &self.nodes[k] {
                Node::Leaf { value } => return *value,
                Node::Split { feature, threshold, left, right } => {
                    k = if x[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn predict(&self, x: &Rows) -> Vec<f64> {
        (0..x.n).map(|i| self.predict_one(x.row(i))).collect()
    }

    #[cfg(test)]
    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], k: usize) -> usize {
            match &nodes[k] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

fn soft(g: f64, a: f64) -> f64 {
    if g > a {
        g - a
    } else if g < -a {
        g + a
    } else {
        0.0
    }
}

struct Builder<'a> {
    data: &'a Binned,
    g: &'a [f64],
    h: &'a [f64],
    params: &'a TreeParams,
    features: &'a [usize],
    nodes: Vec<Node>,
}

struct Best {
    gain: f64,
    feature: usize,
    bin: usize,
}

impl Builder<'_> {
    fn score(&self, g: f64, h: f64) -> f64 {
        let t = soft(g, self.params.alpha);
        t * t / (h + self.params.lambda)
    }

    fn leaf(&self, g: f64, h: f64) -> f64 {
        let denom = h + self.params.lambda;
        if denom <= 0.0 {
            0.0
        } else {
            -soft(g, self.params.alpha) / denom * self.params.shrinkage
        }
    }

    fn grow(&mut self, idx: &mut [usize], depth: usize, rng: &mut Rng) -> usize {
        let (g, h) = idx.iter().fold((0.0, 0.0), |(a, b), &i| (a + self.g[i], b + self.h[i]));
        let me = self.nodes.len();
        self.nodes.push(Node::Leaf { value: self.leaf(g, h) });
        let p = self.params;
        if depth >= p.max_depth || idx.len() < p.min_samples_split || idx.len() < 2 * p.min_samples_leaf {
            return me;
        }
        let Some(best) = self.best_split(idx, g, h, rng) else { return me };
        let mid = partition(idx, |i| self.data.bin(i, best.feature) <= best.bin);
        let threshold = self.data.cuts[best.feature][best.bin];
        let (l, r) = idx.split_at_mut(mid);
        let left = self.grow(l, depth + 1, rng);
        let right = self.grow(r, depth + 1, rng);
        self.nodes[me] = Node::Split { feature: best.feature, threshold, left, right };
        me
    }

    fn best_split(&self, idx: &[usize], g: f64, h: f64, rng: &mut Rng) -> Option<Best> {
        let p = self.params;
        let k = ((p.max_features * self.features.len() as f64).round() as usize).clamp(1, self.features.len());
        let chosen: Vec<usize> = if k == self.features.len() {
            self.features.to_vec()
        } else {
            let mut c: Vec<usize> = sample(rng, self.features.len(), k).into_iter().map(|t| self.features[t]).collect();
            c.sort_unstable();
            c
        };
        let parent = self.score(g, h);
        let mut best: Option<Best> = None;
        let mut hist = vec![(0.0f64, 0.0f64, 0usize); MAX_BINS];
        for &f in &chosen {
            let n_cuts = self.data.cuts[f].len();
            if n_cuts == 0 {
                continue;
            }
            hist[..=n_cuts].iter_mut().for_each(|e| *e = (0.0, 0.0, 0));
            for &i in idx {
                let e = &mut hist[self.data.bin(i, f)];
                e.0 += self.g[i];
                e.1 += self.h[i];
                e.2 += 1;
            }
            let (mut gl, mut hl, mut cl) = (0.0, 0.0, 0usize);
            for (b, e) in hist.iter().enumerate().take(n_cuts) {
                gl += e.0;
                hl += e.1;
                cl += e.2;
                let cr = idx.len() - cl;
                if cl < p.min_samples_leaf.max(1) {
                    continue;
                }
                if cr < p.min_samples_leaf.max(1) {
                    break;
                }
                let (gr, hr) = (g - gl, h - hl);
                if hl < p.min_hessian_leaf || hr < p.min_hessian_leaf {
                    continue;
                }
                let gain = 0.5 * (self.score(gl, hl) + self.score(gr, hr) - parent) - p.gamma;
                if gain > 1e-12 * parent.abs().max(1e-300) && best.as_ref().is_none_or(|bb| gain > bb.gain) {
                    best = Some(Best { gain, feature: f, bin: b });
                }
            }
        }
        best
    }
}

/// Stable two-way partition; returns the size of the `true` part.
fn partition(idx: &mut [usize], pred: impl Fn(usize) -> bool) -> usize {
    let (yes, no): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| pred(i));
    let k = yes.len();
    idx[..k].copy_from_slice(&yes);
    idx[k..].copy_from_slice(&no);
    k
}

/// Grows one tree on the rows in `rows` (repeats allowed) using only the
/// features in `features`.
pub(crate) fn grow_tree(
    data: &Binned,
    g: &[f64],
    h: &[f64],
    rows: &[usize],
    features: &[usize],
    params: &TreeParams,
    rng: &mut Rng,
) -> Tree {
    let mut b = Builder { data, g, h, params, features, nodes: Vec::new() };
    let mut idx = rows.to_vec();
    if idx.is_empty() || features.is_empty() {
        return Tree { nodes: vec![Node::Leaf { value: 0.0 }] };
    }
    b.grow(&mut idx, 0, rng);
    Tree { nodes: b.nodes }
}

/// Weighted least-squares tree: leaves hold weighted means of `y`.
pub(crate) fn fit_cart(
    data: &Binned,
    y: &[f64],
    w: &[f64],
    rows: &[usize],
    features: &[usize],
    params: &TreeParams,
    rng: &mut Rng,
) -> Tree {
    let g: Vec<f64> = y.iter().zip(w).map(|(a, b)| -a * b).collect();
    grow_tree(data, &g, w, rows, features, params, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng;

    #[test]
    fn cut_points_put_values_in_own_bins() {
        let c = cut_points(vec![3.0, 1.0, 2.0, 2.0]);
        assert_eq!(c, vec![1.5, 2.5]);
        assert!(cut_points(vec![5.0; 4]).is_empty());
        let many: Vec<f64> = (0..10_000).map(f64::from).collect();
        assert!(cut_points(many).len() <= MAX_BINS - 1);
    }

    #[test]
    fn step_function_is_learned_exactly() {
        let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![f64::from(i), f64::from(i % 3)]).collect();
        let x = Rows::from_rows(&rows);
        let y: Vec<f64> = (0..40).map(|i| if i < 17 { 1.0 } else { 5.0 }).collect();
        let data = Binned::new(&x);
        let all: Vec<usize> = (0..40).collect();
        let t = fit_cart(&data, &y, &[1.0; 40], &all, &[0, 1], &TreeParams::default(), &mut rng(0));
        assert_eq!(t.predict(&x), y);
        assert_eq!(t.depth(), 1);
        assert_eq!(t.predict_one(&[16.4, 0.0]), 1.0);
        assert_eq!(t.predict_one(&[16.6, 0.0]), 5.0);
    }

    #[test]
    fn depth_and_leaf_limits_hold() {
        let rows: Vec<Vec<f64>> = (0..100).map(|i| vec![f64::from(i)]).collect();
        let x = Rows::from_rows(&rows);
        let y: Vec<f64> = (0..100).map(|i| f64::from(i * i)).collect();
        let data = Binned::new(&x);
        let all: Vec<usize> = (0..100).collect();
        let p = TreeParams { max_depth: 3, min_samples_leaf: 10, ..TreeParams::default() };
        let t = fit_cart(&data, &y, &[1.0; 100], &all, &[0], &p, &mut rng(0));
        assert!(t.depth() <= 3);
        let preds = t.predict(&x);
        let mut distinct = preds.clone();
        distinct.dedup();
        for v in &distinct {
            assert!(preds.iter().filter(|p| *p == v).count() >= 10);
        }
    }

    #[test]
    fn regularised_leaf_matches_closed_form() {
        let x = Rows::from_rows(&[vec![0.0], vec![0.0]]);
        let data = Binned::new(&x);
        let p = TreeParams { lambda: 1.0, alpha: 0.5, ..TreeParams::default() };
        let t = grow_tree(&data, &[-2.0, -1.0], &[1.0, 1.0], &[0, 1], &[0], &p, &mut rng(0));
        // -soft(-3, 0.5) / (2 + 1)
        assert!((t.predict_one(&[0.0]) - 2.5 / 3.0).abs() < 1e-15);
    }
}
