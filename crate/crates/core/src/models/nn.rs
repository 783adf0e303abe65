//! Feed-forward networks for the four benchmarked architectures, trained
//! by mini-batch gradient descent with validation early stopping.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::matrix::{sigmoid, Rows};
use crate::data::Task;
use crate::error::{Error, Result};
use crate::hpo::Assignment;
use crate::rng::{derive_seed, rng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Activation {
    Sigmoid,
    Relu,
    LeakyRelu { slope: f64 },
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Sigmoid => sigmoid(z),
            Activation::Relu => z.max(0.0),
            Activation::LeakyRelu { slope } => {
                if z > 0.0 {
                    z
                } else {
                    slope * z
                }
            }
        }
    }

    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Sigmoid => {
                let s = sigmoid(z);
                s * (1.0 - s)
            }
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::LeakyRelu { slope } => {
                if z > 0.0 {
                    1.0
                } else {
                    slope
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Optimizer {
    /// Adaptive moment estimation.
    Adam,
    RmsProp,
    /// Heavy-ball momentum 0.9, without the Nesterov correction.
    SgdMomentum,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LrSchedule {
    Fixed,
    /// Learning rate multiplied by `rate` after every epoch.
    ExponentialDecay { rate: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NNArchitecture {
    pub id: u8,
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub optimizer: Optimizer,
    pub dropout: f64,
    pub lr_schedule: LrSchedule,
    /// Epochs without validation improvement before training stops.
    pub patience: usize,
}

impl NNArchitecture {
    pub fn by_id(id: u8) -> Result<Self> {
        let base = |hidden: Vec<usize>, activation, optimizer| NNArchitecture {
            id,
            hidden,
            activation,
            optimizer,
            dropout: 0.0,
            lr_schedule: LrSchedule::Fixed,
            patience: 10,
        };
        Ok(match id {
            1 => base(vec![8, 8], Activation::Sigmoid, Optimizer::Adam),
            2 => base(vec![512, 512, 512], Activation::Relu, Optimizer::RmsProp),
            3 => base(vec![128, 64], Activation::Relu, Optimizer::Adam),
            4 => NNArchitecture {
                dropout: 0.2,
                lr_schedule: LrSchedule::ExponentialDecay { rate: 0.96 },
                ..base(vec![64, 64, 64], Activation::LeakyRelu { slope: 0.01 }, Optimizer::SgdMomentum)
            },
            other => return Err(Error::config(format!("no network architecture with id {other} (valid: 1-4)"))),
        })
    }

    pub fn custom() -> Self {
        Self::by_id(4).expect("architecture 4 exists")
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(Error::config("every hidden layer needs at least one unit"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::config("dropout rate must lie in [0, 1)"));
        }
        Ok(())
    }

    /// Layer widths from input to the single output unit.
    pub fn layer_sizes(&self, n_inputs: usize) -> Vec<usize> {
        let mut s = vec![n_inputs];
        s.extend(&self.hidden);
        s.push(1);
        s
    }

    fn default_lr(&self) -> f64 {
        match self.optimizer {
            Optimizer::Adam | Optimizer::RmsProp => 1e-3,
            Optimizer::SgdMomentum => 1e-2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Dense {
    w: DMatrix<f64>,
    b: DVector<f64>,
}

/// Network weights plus the architecture that shapes them. The output unit
/// is linear; classification applies a sigmoid to it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    arch: NNArchitecture,
    task: Task,
    layers: Vec<Dense>,
}

struct Pass {
    /// Pre-activations per layer.
    z: Vec<DMatrix<f64>>,
    /// Layer inputs; a[0] is the batch itself (features x batch).
    a: Vec<DMatrix<f64>>,
    masks: Vec<Option<DMatrix<f64>>>,
}

impl Network {
    /// Glorot-uniform weights, zero biases.
    pub fn new(arch: &NNArchitecture, task: Task, n_inputs: usize, seed: u64) -> Result<Self> {
        arch.validate()?;
        let sizes = arch.layer_sizes(n_inputs);
        let mut r = rng(seed);
        let layers = sizes
            .windows(2)
            .map(|w| {
                let limit = (6.0 / (w[0] + w[1]) as f64).sqrt();
                Dense { w: DMatrix::from_fn(w[1], w[0], |_, _| r.random_range(-limit..limit)), b: DVector::zeros(w[1]) }
            })
            .collect();
        Ok(Network { arch: arch.clone(), task, layers })
    }

    pub fn architecture(&self) -> &NNArchitecture {
        &self.arch
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut s = vec![self.layers[0].w.ncols()];
        s.extend(self.layers.iter().map(|l| l.w.nrows()));
        s
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    /// All weights and biases flattened layer by layer.
    pub fn params(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.n_params());
        for l in &self.layers {
            v.extend(l.w.iter());
            v.extend(l.b.iter());
        }
        v
    }

    pub fn set_params(&mut self, v: &[f64]) -> Result<()> {
        if v.len() != self.n_params() {
            return Err(Error::invalid(format!("expected {} parameters, got {}", self.n_params(), v.len())));
        }
        let mut k = 0;
        for l in &mut self.layers {
            for w in l.w.iter_mut() {
                *w = v[k];
                k += 1;
            }
            for b in l.b.iter_mut() {
                *b = v[k];
                k += 1;
            }
        }
        Ok(())
    }

    fn forward(&self, input: DMatrix<f64>, dropout: Option<&mut crate::rng::Rng>) -> Pass {
        let mut pass = Pass { z: Vec::new(), a: vec![input], masks: Vec::new() };
        let last = self.layers.len() - 1;
        let mut dropout = dropout;
        for (k, l) in self.layers.iter().enumerate() {
            let mut z = &l.w * pass.a.last().expect("input present");
            for mut col in z.column_iter_mut() {
                col += &l.b;
            }
            if k == last {
                pass.z.push(z);
                pass.masks.push(None);
                break;
            }
            let mut a = z.map(|v| self.arch.activation.apply(v));
            let mask = match dropout.as_deref_mut() {
                Some(r) if self.arch.dropout > 0.0 => {
                    let keep = 1.0 - self.arch.dropout;
                    let m = DMatrix::from_fn(a.nrows(), a.ncols(), |_, _| if r.random::<f64>() < keep { 1.0 / keep } else { 0.0 });
                    a.component_mul_assign(&m);
                    Some(m)
                }
                _ => None,
            };
            pass.z.push(z);
            pass.a.push(a);
            pass.masks.push(mask);
        }
        pass
    }

    /// Raw output unit values (before any sigmoid) for a batch.
    fn outputs(&self, x: &Rows) -> Vec<f64> {
        let input = DMatrix::from_fn(x.p, x.n, |j, i| x.get(i, j));
        let pass = self.forward(input, None);
        pass.z.last().expect("output layer").iter().copied().collect()
    }

    /// Mean loss and its gradient with respect to the output pre-activation.
    fn loss_terms(&self, out: &DMatrix<f64>, y: &[f64]) -> (f64, DMatrix<f64>) {
        let n = y.len() as f64;
        let mut loss = 0.0;
        let d = DMatrix::from_fn(1, y.len(), |_, i| {
            let z = out[(0, i)];
            match self.task {
                Task::Regression => {
                    let e = z - y[i];
                    loss += e * e;
                    2.0 * e / n
                }
                Task::Classification => {
                    loss += softplus(z) - y[i] * z;
                    (sigmoid(z) - y[i]) / n
                }
            }
        });
        (loss / n, d)
    }

    fn backward(&self, pass: &Pass, mut dz: DMatrix<f64>) -> Vec<(DMatrix<f64>, DVector<f64>)> {
        let mut grads = Vec::with_capacity(self.layers.len());
        for k in (0..self.layers.len()).rev() {
            let gw = &dz * pass.a[k].transpose();
            let gb = dz.column_sum();
            grads.push((gw, gb));
            if k == 0 {
                break;
            }
            let mut da = self.layers[k].w.transpose() * &dz;
            if let Some(m) = &pass.masks[k - 1] {
                da.component_mul_assign(m);
            }
            let act = self.arch.activation;
            dz = da.zip_map(&pass.z[k - 1], |g, z| g * act.derivative(z));
        }
        grads.reverse();
        grads
    }

    /// Loss on a batch (no dropout) and the gradient with respect to
    /// [`Network::params`]. Regression uses mean squared error, classification
    /// binary cross-entropy on the sigmoid output.
    pub fn loss_and_grad(&self, x: &Rows, y: &[f64]) -> (f64, Vec<f64>) {
        let input = DMatrix::from_fn(x.p, x.n, |j, i| x.get(i, j));
        let pass = self.forward(input, None);
        let (loss, dz) = self.loss_terms(pass.z.last().expect("output"), y);
        let grads = self.backward(&pass, dz);
        let mut flat = Vec::with_capacity(self.n_params());
        for (gw, gb) in grads {
            flat.extend(gw.iter());
            flat.extend(gb.iter());
        }
        (loss, flat)
    }

    pub fn loss(&self, x: &Rows, y: &[f64]) -> f64 {
        let out = DMatrix::from_row_slice(1, x.n, &self.outputs(x));
        self.loss_terms(&out, y).0
    }

    /// Output-layer predictions: raw values for regression, sigmoid scores
    /// for classification.
    pub fn predict(&self, x: &Rows) -> Vec<f64> {
        let out = self.outputs(x);
        match self.task {
            Task::Regression => out,
            Task::Classification => out.into_iter().map(sigmoid).collect(),
        }
    }
}

fn softplus(z: f64) -> f64 {
    if z > 30.0 {
        z
    } else if z < -30.0 {
        z.exp()
    } else {
        z.exp().ln_1p()
    }
}

struct OptState {
    kind: Optimizer,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl OptState {
    fn new(kind: Optimizer, n: usize) -> Self {
        OptState { kind, m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        self.t += 1;
        match self.kind {
            Optimizer::Adam => {
                let (b1, b2, eps): (f64, f64, f64) = (0.9, 0.999, 1e-8);
                let c1 = 1.0 - b1.powi(self.t);
                let c2 = 1.0 - b2.powi(self.t);
                for k in 0..params.len() {
                    self.m[k] = b1 * self.m[k] + (1.0 - b1) * grad[k];
                    self.v[k] = b2 * self.v[k] + (1.0 - b2) * grad[k] * grad[k];
                    params[k] -= lr * (self.m[k] / c1) / ((self.v[k] / c2).sqrt() + eps);
                }
            }
            Optimizer::RmsProp => {
                let (rho, eps) = (0.9, 1e-7);
                for k in 0..params.len() {
                    self.v[k] = rho * self.v[k] + (1.0 - rho) * grad[k] * grad[k];
                    params[k] -= lr * grad[k] / (self.v[k].sqrt() + eps);
                }
            }
            Optimizer::SgdMomentum => {
                for k in 0..params.len() {
                    self.m[k] = 0.9 * self.m[k] - lr * grad[k];
                    params[k] += self.m[k];
                }
            }
        }
    }
}

/// A trained (or frozen) network with the target scaling used in training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedNetwork {
    pub network: Network,
    y_mean: f64,
    y_std: f64,
    pub epochs_run: usize,
}

impl TrainedNetwork {
    /// Randomly initialised network that is never trained.
    pub fn frozen(arch: &NNArchitecture, task: Task, n_inputs: usize, seed: u64) -> Result<Self> {
        Ok(TrainedNetwork { network: Network::new(arch, task, n_inputs, seed)?, y_mean: 0.0, y_std: 1.0, epochs_run: 0 })
    }

    pub fn predict(&self, x: &Rows) -> Vec<f64> {
        let raw = self.network.predict(x);
        match self.network.task {
            Task::Regression => raw.into_iter().map(|v| self.y_mean + self.y_std * v).collect(),
            Task::Classification => raw,
        }
    }
}

pub(crate) fn architecture_from(p: &Assignment) -> Result<NNArchitecture> {
    let id: u8 = p
        .str_or("architecture", "4")
        .parse()
        .map_err(|_| Error::config("network architecture must be one of 1, 2, 3, 4"))?;
    NNArchitecture::by_id(id)
}

/// Trains on a 90/10 split of the rows, keeping the weights with the best
/// validation loss. Regression targets are standardised internally.
pub(crate) fn fit_network(x: &Rows, y: &[f64], p: &Assignment, task: Task, seed: u64) -> Result<TrainedNetwork> {
    let arch = architecture_from(p)?;
    let lr0 = p.f64_or("learning_rate", arch.default_lr());
    let epochs = p.usize_or("epochs", 100).max(1);
    let batch = p.usize_or("batch_size", 32).max(1);

    let (y_mean, y_std) = match task {
        Task::Regression => {
            let n = y.len() as f64;
            let m = y.iter().sum::<f64>() / n;
            let sd = (y.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n).sqrt();
            (m, if sd > 0.0 { sd } else { 1.0 })
        }
        Task::Classification => (0.0, 1.0),
    };
    let ys: Vec<f64> = y.iter().map(|v| (v - y_mean) / y_std).collect();

    let mut r = rng(derive_seed(seed, 1));
    let mut order: Vec<usize> = (0..x.n).collect();
    order.shuffle(&mut r);
    let n_val = if x.n >= 20 { x.n / 10 } else { 0 };
    let (val_idx, train_idx) = order.split_at(n_val);
    let mut train_idx = train_idx.to_vec();
    let xv = x.select_rows(val_idx);
    let yv: Vec<f64> = val_idx.iter().map(|&i| ys[i]).collect();

    let mut net = Network::new(&arch, task, x.p, seed)?;
    let mut params = net.params();
    let mut opt = OptState::new(arch.optimizer, params.len());
    let mut best = (f64::INFINITY, params.clone());
    let mut stale = 0;
    let mut lr = lr0;
    let mut epochs_run = 0;
    for _ in 0..epochs {
        epochs_run += 1;
        train_idx.shuffle(&mut r);
        for chunk in train_idx.chunks(batch) {
            let xb = x.select_rows(chunk);
            let yb: Vec<f64> = chunk.iter().map(|&i| ys[i]).collect();
            let input = DMatrix::from_fn(xb.p, xb.n, |j, i| xb.get(i, j));
            let pass = net.forward(input, Some(&mut r));
            let (_, dz) = net.loss_terms(pass.z.last().expect("output"), &yb);
            let grads = net.backward(&pass, dz);
            let flat: Vec<f64> = grads.iter().flat_map(|(gw, gb)| gw.iter().chain(gb.iter()).copied()).collect();
            opt.step(&mut params, &flat, lr);
            net.set_params(&params)?;
        }
        if params.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonConvergence { model: "Neural Network".into(), message: "weights became non-finite".into() });
        }
        let monitor = if n_val > 0 { net.loss(&xv, &yv) } else { net.loss(x, &ys) };
        if !monitor.is_finite() {
            return Err(Error::NonConvergence { model: "Neural Network".into(), message: "loss became non-finite".into() });
        }
        if monitor < best.0 {
            best = (monitor, params.clone());
            stale = 0;
        } else {
            stale += 1;
            if stale >= arch.patience {
                break;
            }
        }
        if let LrSchedule::ExponentialDecay { rate } = arch.lr_schedule {
            lr *= rate;
        }
    }
    net.set_params(&best.1)?;
    Ok(TrainedNetwork { network: net, y_mean, y_std, epochs_run })
}
