//! Multilayer perceptron binary classifier, the black box being explained.
//!
//! Hidden layers use ReLU or tanh, the output is a single sigmoid unit and
//! training minimizes mean log-loss plus an L2 penalty on weights with Adam.
//! Weight arrays are stored row-major with shape `(inputs, outputs)`, so row `j`
//! holds the outgoing weights of input unit `j`.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::seed;

/// Anything that maps a feature row to a positive-class probability.
pub trait Predictor: Sync {
    fn n_features(&self) -> usize;

    /// Predicts `rows.len() / n_features()` flat row-major rows into `out`.
    fn predict_into(&self, rows: &[f64], out: &mut [f64]);

    fn predict_row(&self, x: &[f64]) -> f64 {
        let mut out = [0.0];
        self.predict_into(x, &mut out);
        out[0]
    }

    /// For each mask, the `bg_weights`-weighted mean prediction over the
    /// background rows with the masked-in features taken from `x`.
    fn coalition_means(
        &self,
        x: &[f64],
        bg_rows: &[f64],
        bg_weights: &[f64],
        masks: &[u64],
    ) -> Vec<f64> {
        let d = x.len();
        let m = bg_weights.len();
        let chunk = (4096 / m.max(1)).max(1);
        let mut values = Vec::with_capacity(masks.len());
        let mut rows = Vec::with_capacity(chunk * m * d);
        let mut out = vec![0.0; chunk * m];
        for block in masks.chunks(chunk) {
            rows.clear();
            for &mask in block {
                for r in bg_rows.chunks_exact(d) {
                    rows.extend((0..d).map(|i| if mask >> i & 1 == 1 { x[i] } else { r[i] }));
                }
            }
            let out = &mut out[..block.len() * m];
            self.predict_into(&rows, out);
            for preds in out.chunks_exact(m) {
                values.push(preds.iter().zip(bg_weights).map(|(p, w)| p * w).sum());
            }
        }
        values
    }
}

/// Position of `g` in the reflected binary Gray sequence.
fn gray_rank(g: u64) -> u64 {
    let mut b = g;
    let mut shift = 1;
    while shift < 64 {
        b ^= b >> shift;
        shift <<= 1;
    }
    b
}

/// Adapts a closure to [`Predictor`].
pub struct FnPredictor<F> {
    d: usize,
    f: F,
}

impl<F: Fn(&[f64]) -> f64 + Sync> FnPredictor<F> {
    pub fn new(d: usize, f: F) -> Self {
        Self { d, f }
    }
}

impl<F: Fn(&[f64]) -> f64 + Sync> Predictor for FnPredictor<F> {
    fn n_features(&self) -> usize {
        self.d
    }

    fn predict_into(&self, rows: &[f64], out: &mut [f64]) {
        for (x, o) in rows.chunks_exact(self.d).zip(out.iter_mut()) {
            *o = (self.f)(x);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative expressed through the activated value.
    #[inline]
    fn derivative(self, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - a * a,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MlpConfig {
    pub hidden_layers: Vec<usize>,
    pub activation: Activation,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub l2_penalty: f64,
    pub seed: u64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self {
            hidden_layers: vec![100],
            activation: Activation::Relu,
            learning_rate: 1e-3,
            epochs: 25,
            batch_size: 32,
            l2_penalty: 1e-4,
            seed: 0,
        }
    }
}

impl MlpConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_layers.contains(&0) {
            return Err(Error::Config("hidden layer sizes must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config(
                "epochs and batch_size must be at least 1".into(),
            ));
        }
        if !(self.l2_penalty >= 0.0) {
            return Err(Error::Config("l2_penalty must be nonnegative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .map(|(x, y)| x * y)
        .sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

impl Layer {
    #[inline]
    fn forward(&self, input: &[f64], out: &mut [f64]) {
        if self.outputs == 1 {
            out[0] = self.biases[0] + dot(input, &self.weights);
            return;
        }
        out.copy_from_slice(&self.biases);
        for (x, w) in input.iter().zip(self.weights.chunks_exact(self.outputs)) {
            for (o, wk) in out.iter_mut().zip(w) {
                *o += x * wk;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub config: MlpConfig,
    pub input_dim: usize,
    pub layers: Vec<Layer>,
    /// Full-data objective before the first update.
    pub initial_loss: f64,
    /// Full-data objective after each epoch.
    pub loss_trace: Vec<f64>,
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
#[inline]
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

impl TrainedModel {
    /// Builds a model from explicit layers; the last layer must have one output.
    pub fn from_layers(activation: Activation, layers: Vec<Layer>) -> Result<Self> {
        let first = layers
            .first()
            .ok_or_else(|| Error::InvalidInput("model needs at least one layer".into()))?;
        let input_dim = first.inputs;
        let mut prev = input_dim;
        for l in &layers {
            if l.inputs != prev
                || l.weights.len() != l.inputs * l.outputs
                || l.biases.len() != l.outputs
            {
                return Err(Error::InvalidInput("inconsistent layer shapes".into()));
            }
            prev = l.outputs;
        }
        if prev != 1 {
            return Err(Error::InvalidInput(
                "output layer must have a single unit".into(),
            ));
        }
        let config = MlpConfig {
            hidden_layers: layers[..layers.len() - 1]
                .iter()
                .map(|l| l.outputs)
                .collect(),
            activation,
            ..MlpConfig::default()
        };
        Ok(Self {
            config,
            input_dim,
            layers,
            initial_loss: 0.0,
            loss_trace: Vec::new(),
        })
    }

    /// Glorot-uniform initialization (gain 2 instead of 6 for the sigmoid output).
    pub fn init(input_dim: usize, cfg: &MlpConfig) -> Self {
        let mut rng = seed::rng(seed::derive(cfg.seed, 0));
        let mut sizes = vec![input_dim];
        sizes.extend(&cfg.hidden_layers);
        sizes.push(1);
        let last = sizes.len() - 2;
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let gain = if i == last { 2.0 } else { 6.0 };
                let bound = (gain / (w[0] + w[1]) as f64).sqrt();
                Layer {
                    inputs: w[0],
                    outputs: w[1],
                    weights: (0..w[0] * w[1])
                        .map(|_| rng.gen_range(-bound..bound))
                        .collect(),
                    biases: (0..w[1]).map(|_| rng.gen_range(-bound..bound)).collect(),
                }
            })
            .collect();
        Self {
            config: cfg.clone(),
            input_dim,
            layers,
            initial_loss: 0.0,
            loss_trace: Vec::new(),
        }
    }

    fn buffers(&self) -> Vec<Vec<f64>> {
        self.layers.iter().map(|l| vec![0.0; l.outputs]).collect()
    }

    /// Output logit from the first layer's pre-activation.
    fn forward_tail(&self, pre0: &[f64], acts: &mut [Vec<f64>]) -> f64 {
        let last = self.layers.len() - 1;
        if last == 0 {
            return pre0[0];
        }
        let act = self.config.activation;
        if last == 1 && act == Activation::Relu {
            let out = &self.layers[1];
            let mut acc = [0.0; 4];
            let (cz, cw) = (pre0.chunks_exact(4), out.weights.chunks_exact(4));
            let tail: f64 = cz
                .remainder()
                .iter()
                .zip(cw.remainder())
                .map(|(z, w)| z.max(0.0) * w)
                .sum();
            for (z, w) in cz.zip(cw) {
                for k in 0..4 {
                    acc[k] += z[k].max(0.0) * w[k];
                }
            }
            return out.biases[0] + (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail;
        }
        acts[0]
            .iter_mut()
            .zip(pre0)
            .for_each(|(a, &z)| *a = act.apply(z));
        for l in 1..=last {
            let (done, rest) = acts.split_at_mut(l);
            let out = &mut rest[0];
            self.layers[l].forward(&done[l - 1], out);
            if l < last {
                out.iter_mut().for_each(|v| *v = act.apply(*v));
            }
        }
        acts[last][0]
    }

    /// Output logit; `acts[l]` receives the activated output of layer `l`.
    fn forward(&self, x: &[f64], acts: &mut [Vec<f64>]) -> f64 {
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let (done, rest) = acts.split_at_mut(l);
            let input = if l == 0 { x } else { &done[l - 1] };
            let out = &mut rest[0];
            layer.forward(input, out);
            if l < last {
                let act = self.config.activation;
                out.iter_mut().for_each(|v| *v = act.apply(*v));
            }
        }
        acts[last][0]
    }

    pub fn predict_proba(&self, x: &Matrix) -> Result<Vec<f64>> {
        if x.cols() != self.input_dim {
            return Err(Error::Dimension {
                expected: self.input_dim,
                got: x.cols(),
            });
        }
        let mut out = vec![0.0; x.rows()];
        self.predict_into(x.as_slice(), &mut out);
        Ok(out)
    }

    pub fn accuracy(&self, ds: &Dataset) -> Result<f64> {
        let p = self.predict_proba(ds.features())?;
        Ok(accuracy(&p, ds.labels()))
    }

    pub fn n_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.biases.len())
            .sum()
    }

    /// Parameters flattened layer by layer, weights before biases.
    pub fn flat_params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.n_params());
        for l in &self.layers {
            p.extend_from_slice(&l.weights);
            p.extend_from_slice(&l.biases);
        }
        p
    }

    pub fn set_flat_params(&mut self, p: &[f64]) {
        assert_eq!(p.len(), self.n_params());
        let mut off = 0;
        for l in &mut self.layers {
            let nw = l.weights.len();
            l.weights.copy_from_slice(&p[off..off + nw]);
            off += nw;
            let nb = l.biases.len();
            l.biases.copy_from_slice(&p[off..off + nb]);
            off += nb;
        }
    }

    /// Training objective on the given rows and its gradient in
    /// [`flat_params`](Self::flat_params) order: mean log-loss plus
    /// `l2 / (2 k) * sum(w^2)` over weights (not biases), `k` the row count.
    pub fn loss_and_gradient(&self, x: &Matrix, y: &[u8], l2: f64) -> (f64, Vec<f64>) {
        let rows: Vec<usize> = (0..x.rows()).collect();
        let mut grad = vec![0.0; self.n_params()];
        let loss = self.batch_gradient(x, y, &rows, l2, &mut grad);
        (loss, grad)
    }

    fn batch_gradient(
        &self,
        x: &Matrix,
        y: &[u8],
        rows: &[usize],
        l2: f64,
        grad: &mut [f64],
    ) -> f64 {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let k = rows.len() as f64;
        let last = self.layers.len() - 1;
        let act = self.config.activation;
        let mut acts = self.buffers();
        let mut deltas = self.buffers();
        let offsets: Vec<usize> = self
            .layers
            .iter()
            .scan(0, |off, l| {
                let o = *off;
                *off += l.weights.len() + l.biases.len();
                Some(o)
            })
            .collect();
        let mut loss = 0.0;
        for &i in rows {
            let xi = x.row(i);
            let z = self.forward(xi, &mut acts);
            let t = f64::from(y[i]);
            loss += softplus(z) - t * z;
            deltas[last][0] = (sigmoid(z) - t) / k;
            for l in (0..=last).rev() {
                let layer = &self.layers[l];
                let input: &[f64] = if l == 0 { xi } else { &acts[l - 1] };
                let off = offsets[l];
                let (gw, gb) = grad[off..off + layer.weights.len() + layer.outputs]
                    .split_at_mut(layer.weights.len());
                let delta = &deltas[l];
                for (a, gw_row) in input.iter().zip(gw.chunks_exact_mut(layer.outputs)) {
                    for (g, dk) in gw_row.iter_mut().zip(delta) {
                        *g += a * dk;
                    }
                }
                for (g, dk) in gb.iter_mut().zip(delta) {
                    *g += dk;
                }
                if l > 0 {
                    let (lo, hi) = deltas.split_at_mut(l);
                    let prev = &mut lo[l - 1];
                    let delta = &hi[0];
                    for (j, (p, w_row)) in prev
                        .iter_mut()
                        .zip(layer.weights.chunks_exact(layer.outputs))
                        .enumerate()
                    {
                        let s: f64 = w_row.iter().zip(delta).map(|(w, d)| w * d).sum();
                        *p = s * act.derivative(acts[l - 1][j]);
                    }
                }
            }
        }
        let mut penalty = 0.0;
        if l2 > 0.0 {
            for (l, layer) in self.layers.iter().enumerate() {
                let off = offsets[l];
                for (g, w) in grad[off..off + layer.weights.len()]
                    .iter_mut()
                    .zip(&layer.weights)
                {
                    *g += l2 * w / k;
                    penalty += w * w;
                }
            }
        }
        loss / k + l2 * penalty / (2.0 * k)
    }

    fn full_loss(&self, ds: &Dataset, l2: f64) -> f64 {
        let mut acts = self.buffers();
        let mut loss = 0.0;
        for (xi, &t) in ds.features().iter_rows().zip(ds.labels()) {
            let z = self.forward(xi, &mut acts);
            loss += softplus(z) - f64::from(t) * z;
        }
        let n = ds.n() as f64;
        let penalty: f64 = self
            .layers
            .iter()
            .flat_map(|l| l.weights.iter())
            .map(|w| w * w)
            .sum();
        loss / n + l2 * penalty / (2.0 * n)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

impl Predictor for TrainedModel {
    fn n_features(&self) -> usize {
        self.input_dim
    }

    fn predict_into(&self, rows: &[f64], out: &mut [f64]) {
        let mut acts = self.buffers();
        for (x, o) in rows.chunks_exact(self.input_dim).zip(out.iter_mut()) {
            *o = sigmoid(self.forward(x, &mut acts));
        }
    }

    /// Visits masks in Gray-code order and updates each background row's
    /// first-layer pre-activation only for the features that flip.
    fn coalition_means(
        &self,
        x: &[f64],
        bg_rows: &[f64],
        bg_weights: &[f64],
        masks: &[u64],
    ) -> Vec<f64> {
        let d = self.input_dim;
        let first = &self.layers[0];
        let h = first.outputs;
        let mut pre: Vec<f64> = Vec::with_capacity(bg_weights.len() * h);
        let mut buf = vec![0.0; h];
        for r in bg_rows.chunks_exact(d) {
            first.forward(r, &mut buf);
            pre.extend_from_slice(&buf);
        }
        let mut order: Vec<usize> = (0..masks.len()).collect();
        order.sort_by_key(|&k| gray_rank(masks[k]));
        let mut acts = self.buffers();
        let mut values = vec![0.0; masks.len()];
        let mut cur = 0u64;
        for k in order {
            let mask = masks[k];
            let mut flip = cur ^ mask;
            while flip != 0 {
                let i = flip.trailing_zeros() as usize;
                flip &= flip - 1;
                let sign = if mask >> i & 1 == 1 { 1.0 } else { -1.0 };
                let w = &first.weights[i * h..(i + 1) * h];
                for (z, r) in pre.chunks_exact_mut(h).zip(bg_rows.chunks_exact(d)) {
                    let c = sign * (x[i] - r[i]);
                    z.iter_mut().zip(w).for_each(|(z, w)| *z += c * w);
                }
            }
            cur = mask;
            values[k] = pre
                .chunks_exact(h)
                .zip(bg_weights)
                .map(|(z, bw)| bw * sigmoid(self.forward_tail(z, &mut acts)))
                .sum();
        }
        values
    }
}

pub fn accuracy(proba: &[f64], labels: &[u8]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let correct = proba
        .iter()
        .zip(labels)
        .filter(|(&p, &l)| (p >= 0.5) == (l == 1))
        .count();
    correct as f64 / labels.len() as f64
}

/// Trains on every row of `ds` (no held-out split).
pub fn train_mlp(ds: &Dataset, cfg: &MlpConfig) -> Result<TrainedModel> {
    cfg.validate()?;
    if cfg.batch_size > ds.n() {
        return Err(Error::Config(format!(
            "batch_size {} exceeds instance count {}",
            cfg.batch_size,
            ds.n()
        )));
    }
    let mut model = TrainedModel::init(ds.d(), cfg);
    model.initial_loss = model.full_loss(ds, cfg.l2_penalty);

    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;
    let np = model.n_params();
    let mut params = model.flat_params();
    let mut m = vec![0.0; np];
    let mut v = vec![0.0; np];
    let mut grad = vec![0.0; np];
    let mut step = 0i32;
    let mut order: Vec<usize> = (0..ds.n()).collect();
    let mut shuffle = seed::rng(seed::derive(cfg.seed, 1));

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut shuffle);
        for batch in order.chunks(cfg.batch_size) {
            model.batch_gradient(ds.features(), ds.labels(), batch, cfg.l2_penalty, &mut grad);
            step += 1;
            let lr = cfg.learning_rate * (1.0 - BETA2.powi(step)).sqrt() / (1.0 - BETA1.powi(step));
            for (((p, g), mi), vi) in params.iter_mut().zip(&grad).zip(&mut m).zip(&mut v) {
                *mi = BETA1 * *mi + (1.0 - BETA1) * g;
                *vi = BETA2 * *vi + (1.0 - BETA2) * g * g;
                *p -= lr * *mi / (vi.sqrt() + EPS);
            }
            model.set_flat_params(&params);
        }
        let loss = model.full_loss(ds, cfg.l2_penalty);
        if !loss.is_finite() {
            return Err(Error::Divergence { epoch });
        }
        model.loss_trace.push(loss);
    }
    Ok(model)
}
