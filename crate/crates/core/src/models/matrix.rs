use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// Row-major copy of a design matrix; most learners scan rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Rows {
    pub n: usize,
    pub p: usize,
    pub data: Vec<f64>,
}

impl Rows {
    pub fn from_dmatrix(x: &DMatrix<f64>) -> Self {
        let (n, p) = x.shape();
        let mut data = Vec::with_capacity(n * p);
        for i in 0..n {
            for j in 0..p {
                data.push(x[(i, j)]);
            }
        }
        Rows { n, p, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        let p = rows.first().map_or(0, Vec::len);
        Rows { n, p, data: rows.iter().flatten().copied().collect() }
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.p..(i + 1) * self.p]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.p + j]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, j)).collect()
    }

    pub fn select_rows(&self, idx: &[usize]) -> Rows {
        let mut data = Vec::with_capacity(idx.len() * self.p);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Rows { n: idx.len(), p: self.p, data }
    }

    pub fn select_cols(&self, cols: &[usize]) -> Rows {
        let mut data = Vec::with_capacity(self.n * cols.len());
        for i in 0..self.n {
            let r = self.row(i);
            data.extend(cols.iter().map(|&j| r[j]));
        }
        Rows { n: self.n, p: cols.len(), data }
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.p, &self.data)
    }

    /// Column means.
    pub fn means(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.p];
        for i in 0..self.n {
            for (a, b) in m.iter_mut().zip(self.row(i)) {
                *a += b;
            }
        }
        m.iter_mut().for_each(|v| *v /= self.n.max(1) as f64);
        m
    }
}

impl Serialize for Rows {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        (self.n, self.p, &self.data).serialize(s)
    }
}

impl<'de> Deserialize<'de> for Rows {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let (n, p, data): (usize, usize, Vec<f64>) = Deserialize::deserialize(d)?;
        if data.len() != n * p {
            return Err(serde::de::Error::custom("row data length does not match shape"));
        }
        Ok(Rows { n, p, data })
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}
