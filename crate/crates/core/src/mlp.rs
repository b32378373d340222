//! Dense feed-forward networks with manual reverse-mode gradients.
//!
//! Each layer is affine, then activation, then (inverted) dropout. Weights are
//! stored row-major as `out_dim x in_dim`. Flattened parameter order is, per
//! layer, all weights followed by all biases.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SeededRng;

static NEXT_STAMP: AtomicU64 = AtomicU64::new(1);

fn fresh_stamp() -> u64 {
    NEXT_STAMP.fetch_add(1, Ordering::Relaxed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Linear,
    Tanh,
    Relu,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Linear => z,
            Activation::Tanh => libm::tanh(z),
            Activation::Relu => z.max(0.0),
        }
    }

    /// Derivative expressed through the pre-activation `z`.
    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Linear => 1.0,
            Activation::Tanh => {
                let t = libm::tanh(z);
                1.0 - t * t
            }
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
    #[serde(default)]
    pub dropout_p: f64,
}

impl LayerSpec {
    pub fn new(in_dim: usize, out_dim: usize, activation: Activation) -> Self {
        Self {
            in_dim,
            out_dim,
            activation,
            dropout_p: 0.0,
        }
    }

    pub fn with_dropout(mut self, p: f64) -> Self {
        self.dropout_p = p;
        self
    }

    pub fn param_count(&self) -> usize {
        (self.in_dim + 1) * self.out_dim
    }
}

/// Layer specs for `input -> hidden... -> output`; dropout is applied after
/// every hidden activation, never after the head.
pub fn stack(
    input: usize,
    hidden: &[usize],
    output: usize,
    hidden_activation: Activation,
    head: Activation,
    dropout_p: f64,
) -> Vec<LayerSpec> {
    let mut specs = Vec::with_capacity(hidden.len() + 1);
    let mut prev = input;
    for &h in hidden {
        specs.push(LayerSpec::new(prev, h, hidden_activation).with_dropout(dropout_p));
        prev = h;
    }
    specs.push(LayerSpec::new(prev, output, head));
    specs
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub spec: LayerSpec,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Debug)]
pub struct MlpNet {
    layers: Vec<Layer>,
    mode: Mode,
    /// Changes on every parameter mutation; ties forward caches to one state.
    stamp: u64,
}

impl Clone for MlpNet {
    fn clone(&self) -> Self {
        Self {
            layers: self.layers.clone(),
            mode: self.mode,
            stamp: fresh_stamp(),
        }
    }
}

impl PartialEq for MlpNet {
    fn eq(&self, other: &Self) -> bool {
        self.layers == other.layers && self.mode == other.mode
    }
}

/// Intermediate values of one forward pass, consumed by [`MlpNet::backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    stamp: u64,
    inputs: Vec<Vec<f64>>,
    pre_activations: Vec<Vec<f64>>,
    /// Per-unit dropout multipliers (0 or 1/(1-p)), when dropout was active.
    masks: Vec<Option<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGrad>,
    /// Gradient with respect to the network input.
    pub input: Vec<f64>,
}

impl Gradients {
    pub fn zeros_like(net: &MlpNet) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| LayerGrad {
                    weights: vec![0.0; l.weights.len()],
                    bias: vec![0.0; l.bias.len()],
                })
                .collect(),
            input: vec![0.0; net.input_dim()],
        }
    }

    pub fn accumulate(&mut self, other: &Gradients) -> Result<()> {
        Error::check_dim(self.layers.len(), other.layers.len())?;
        Error::check_dim(self.input.len(), other.input.len())?;
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            Error::check_dim(a.weights.len(), b.weights.len())?;
            Error::check_dim(a.bias.len(), b.bias.len())?;
            a.weights.iter_mut().zip(&b.weights).for_each(|(x, y)| *x += y);
            a.bias.iter_mut().zip(&b.bias).for_each(|(x, y)| *x += y);
        }
        self.input.iter_mut().zip(&other.input).for_each(|(x, y)| *x += y);
        Ok(())
    }

    pub fn scale(&mut self, factor: f64) {
        for l in &mut self.layers {
            l.weights.iter_mut().chain(l.bias.iter_mut()).for_each(|x| *x *= factor);
        }
        self.input.iter_mut().for_each(|x| *x *= factor);
    }

    /// Parameter gradients in flattened parameter order (input gradient excluded).
    pub fn flatten(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.bias).copied())
            .collect()
    }
}

impl MlpNet {
    /// Builds a network with weights and biases uniform in `+-1/sqrt(in_dim)`.
    pub fn new(specs: &[LayerSpec], rng: &mut SeededRng) -> Result<Self> {
        validate_specs(specs)?;
        let layers = specs
            .iter()
            .map(|spec| {
                let bound = 1.0 / libm::sqrt(spec.in_dim as f64);
                let weights = (0..spec.in_dim * spec.out_dim)
                    .map(|_| rng.uniform_range(-bound, bound))
                    .collect();
                let bias = (0..spec.out_dim).map(|_| rng.uniform_range(-bound, bound)).collect();
                Layer { spec: *spec, weights, bias }
            })
            .collect();
        Ok(Self {
            layers,
            mode: Mode::Train,
            stamp: fresh_stamp(),
        })
    }

    /// Builds a network from flattened parameters.
    pub fn from_params(specs: &[LayerSpec], params: &[f64]) -> Result<Self> {
        validate_specs(specs)?;
        let mut net = Self {
            layers: specs
                .iter()
                .map(|spec| Layer {
                    spec: *spec,
                    weights: vec![0.0; spec.in_dim * spec.out_dim],
                    bias: vec![0.0; spec.out_dim],
                })
                .collect(),
            mode: Mode::Train,
            stamp: fresh_stamp(),
        };
        net.set_params(params)?;
        Ok(net)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(|l| l.spec).collect()
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn set_mode(&mut self, mode: Mode) {
        self.mode = mode;
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].spec.in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].spec.out_dim
    }

    pub fn param_breakdown(&self) -> Vec<usize> {
        self.layers.iter().map(|l| l.spec.param_count()).collect()
    }

    pub fn param_count(&self) -> usize {
        self.param_breakdown().iter().sum()
    }

    pub fn params(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.bias).copied())
            .collect()
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        Error::check_dim(self.param_count(), params.len())?;
        let mut it = params.iter().copied();
        for l in &mut self.layers {
            l.weights.iter_mut().chain(l.bias.iter_mut()).for_each(|p| {
                *p = it.next().unwrap_or_default();
            });
        }
        self.stamp = fresh_stamp();
        Ok(())
    }

    /// Applies `f(param, other_param)` to every parameter pair of two
    /// shape-congruent networks, writing into `self`.
    pub fn zip_params_mut(&mut self, other: &MlpNet, mut f: impl FnMut(&mut f64, f64)) -> Result<()> {
        if self.specs().len() != other.layers.len()
            || self.layers.iter().zip(&other.layers).any(|(a, b)| a.spec.in_dim != b.spec.in_dim || a.spec.out_dim != b.spec.out_dim)
        {
            return Err(Error::InvalidInput("networks are not shape-congruent".into()));
        }
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weights.iter_mut().zip(&b.weights).for_each(|(x, y)| f(x, *y));
            a.bias.iter_mut().zip(&b.bias).for_each(|(x, y)| f(x, *y));
        }
        self.stamp = fresh_stamp();
        Ok(())
    }

    /// Forward pass honoring the current mode. Dropout masks are drawn from
    /// `rng` only in train mode for layers with `dropout_p > 0`.
    pub fn forward(&self, input: &[f64], rng: &mut SeededRng) -> Result<(Vec<f64>, ForwardCache)> {
        self.run(input, self.mode, Some(rng))
    }

    /// Eval-mode forward pass without a cache.
    pub fn predict(&self, input: &[f64]) -> Result<Vec<f64>> {
        Ok(self.run(input, Mode::Eval, None)?.0)
    }

    /// Eval-mode forward pass that keeps the cache for a later backward pass.
    pub fn forward_eval(&self, input: &[f64]) -> Result<(Vec<f64>, ForwardCache)> {
        self.run(input, Mode::Eval, None)
    }

    fn run(&self, input: &[f64], mode: Mode, mut rng: Option<&mut SeededRng>) -> Result<(Vec<f64>, ForwardCache)> {
        Error::check_dim(self.input_dim(), input.len())?;
        let n = self.layers.len();
        let mut cache = ForwardCache {
            stamp: self.stamp,
            inputs: Vec::with_capacity(n),
            pre_activations: Vec::with_capacity(n),
            masks: Vec::with_capacity(n),
        };
        let mut x = input.to_vec();
        for layer in &self.layers {
            let LayerSpec { in_dim, out_dim, activation, dropout_p } = layer.spec;
            let z: Vec<f64> = (0..out_dim)
                .map(|o| {
                    let row = &layer.weights[o * in_dim..(o + 1) * in_dim];
                    layer.bias[o] + row.iter().zip(&x).map(|(w, v)| w * v).sum::<f64>()
                })
                .collect();
            let mut a: Vec<f64> = z.iter().map(|&v| activation.apply(v)).collect();
            let mask = match (&mut rng, mode) {
                (Some(r), Mode::Train) if dropout_p > 0.0 => {
                    let keep = 1.0 / (1.0 - dropout_p);
                    let m: Vec<f64> = (0..out_dim)
                        .map(|_| if r.uniform() < dropout_p { 0.0 } else { keep })
                        .collect();
                    a.iter_mut().zip(&m).for_each(|(v, k)| *v *= k);
                    Some(m)
                }
                _ => None,
            };
            cache.inputs.push(core::mem::replace(&mut x, a));
            cache.pre_activations.push(z);
            cache.masks.push(mask);
        }
        Ok((x, cache))
    }

    /// Reverse-mode gradients of `upstream . output` for the pass recorded in `cache`.
    pub fn backward(&self, cache: &ForwardCache, upstream: &[f64]) -> Result<Gradients> {
        if cache.stamp != self.stamp || cache.inputs.len() != self.layers.len() {
            return Err(Error::Protocol(
                "forward cache does not belong to the current network parameters".into(),
            ));
        }
        Error::check_dim(self.output_dim(), upstream.len())?;
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut delta = upstream.to_vec();
        for (idx, layer) in self.layers.iter().enumerate().rev() {
            let in_dim = layer.spec.in_dim;
            if let Some(mask) = &cache.masks[idx] {
                delta.iter_mut().zip(mask).for_each(|(d, m)| *d *= m);
            }
            delta
                .iter_mut()
                .zip(&cache.pre_activations[idx])
                .for_each(|(d, z)| *d *= layer.spec.activation.derivative(*z));
            let input = &cache.inputs[idx];
            let mut gw = vec![0.0; layer.weights.len()];
            for (o, d) in delta.iter().enumerate() {
                for (g, v) in gw[o * in_dim..(o + 1) * in_dim].iter_mut().zip(input) {
                    *g = d * v;
                }
            }
            let mut prev = vec![0.0; in_dim];
            for (o, d) in delta.iter().enumerate() {
                for (p, w) in prev.iter_mut().zip(&layer.weights[o * in_dim..(o + 1) * in_dim]) {
                    *p += w * d;
                }
            }
            grads.push(LayerGrad { weights: gw, bias: delta });
            delta = prev;
        }
        grads.reverse();
        Ok(Gradients { layers: grads, input: delta })
    }
}

fn validate_specs(specs: &[LayerSpec]) -> Result<()> {
    if specs.is_empty() {
        return Err(Error::InvalidInput("network needs at least one layer".into()));
    }
    for (i, s) in specs.iter().enumerate() {
        if s.in_dim == 0 || s.out_dim == 0 {
            return Err(Error::InvalidInput(format!("layer {i} has a zero dimension")));
        }
        if !(0.0..1.0).contains(&s.dropout_p) {
            return Err(Error::InvalidInput(format!("layer {i}: dropout must lie in [0, 1)")));
        }
    }
    for (i, pair) in specs.windows(2).enumerate() {
        if pair[0].out_dim != pair[1].in_dim {
            return Err(Error::InvalidInput(format!(
                "layer {} outputs {} values but layer {} expects {}",
                i,
                pair[0].out_dim,
                i + 1,
                pair[1].in_dim
            )));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub lr: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(param_count: usize, lr: f64) -> Self {
        Self {
            m: vec![0.0; param_count],
            v: vec![0.0; param_count],
            t: 0,
            beta1: 0.9,
            beta2: 0.999,
            lr,
            eps: 1e-8,
        }
    }

    pub fn for_net(net: &MlpNet, lr: f64) -> Self {
        Self::new(net.param_count(), lr)
    }
}

/// One bias-corrected Adam descent step on `net` using `grads`.
pub fn adam_step(net: &mut MlpNet, grads: &Gradients, state: &mut AdamState) -> Result<()> {
    let g = grads.flatten();
    let n = net.param_count();
    Error::check_dim(n, g.len())?;
    Error::check_dim(n, state.m.len())?;
    Error::check_dim(n, state.v.len())?;
    state.t += 1;
    let bc1 = 1.0 - libm::pow(state.beta1, state.t as f64);
    let bc2 = 1.0 - libm::pow(state.beta2, state.t as f64);
    let mut params = net.params();
    for i in 0..n {
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g[i];
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g[i] * g[i];
        let m_hat = state.m[i] / bc1;
        let v_hat = state.v[i] / bc2;
        params[i] -= state.lr * m_hat / (libm::sqrt(v_hat) + state.eps);
    }
    net.set_params(&params)
}

/// Mean squared error and its gradient with respect to `pred`.
pub fn mse_loss(pred: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>)> {
    Error::check_dim(pred.len(), target.len())?;
    if pred.is_empty() {
        return Err(Error::InvalidInput("mse of empty vectors".into()));
    }
    let n = pred.len() as f64;
    let loss = pred.iter().zip(target).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / n;
    let grad = pred.iter().zip(target).map(|(p, t)| 2.0 * (p - t) / n).collect();
    Ok((loss, grad))
}
