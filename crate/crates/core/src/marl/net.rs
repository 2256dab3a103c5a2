//! A small dense tanh network with categorical action heads and a value
//! head, trained by hand-written reverse-mode accumulation.
//!
//! All parameters live in one flat vector so optimizers, gradient checks and
//! checkpoints can treat the network as a single tensor. Each layer stores
//! its weights input-major (`w[i * out + o]`), which makes sparse inputs
//! cheap: the first layer only touches rows of active features.

use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::rng::Rng;

/// Sparse feature vector. Indices need not be sorted but must be unique.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Features {
    pub dim: usize,
    pub idx: Vec<u32>,
    pub val: Vec<f64>,
}

impl Features {
    pub fn new(dim: usize) -> Self {
        Features {
            dim,
            idx: Vec::new(),
            val: Vec::new(),
        }
    }

    pub fn dense(values: &[f64]) -> Self {
        let mut f = Features::new(values.len());
        for (i, &v) in values.iter().enumerate() {
            f.push(i, v);
        }
        f
    }

    /// Record `value` at `index`; zeros are skipped.
    pub fn push(&mut self, index: usize, value: f64) {
        debug_assert!(index < self.dim);
        if value != 0.0 {
            self.idx.push(index as u32);
            self.val.push(value);
        }
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (&i, &v) in self.idx.iter().zip(&self.val) {
            out[i as usize] += v;
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Layer {
    inputs: usize,
    outputs: usize,
    w: usize,
    b: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyNetwork {
    input_dim: usize,
    hidden: Vec<usize>,
    heads: Vec<usize>,
    layers: Vec<Layer>,
    params: Vec<f64>,
}

/// Per-call activations, reused across calls to avoid allocation.
#[derive(Debug, Clone, Default)]
pub struct Workspace {
    /// tanh outputs of each hidden layer.
    hidden: Vec<Vec<f64>>,
    /// Concatenated head logits followed by the value.
    out: Vec<f64>,
    grad_hidden: Vec<Vec<f64>>,
}

/// Log-probabilities for every head, plus the value estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyOutput {
    pub log_probs: Vec<Vec<f64>>,
    pub value: f64,
}

impl PolicyOutput {
    pub fn probs(&self, head: usize) -> Vec<f64> {
        self.log_probs[head].iter().map(|l| l.exp()).collect()
    }

    /// Joint log-probability of one action per head.
    pub fn log_prob(&self, actions: &[usize]) -> f64 {
        actions
            .iter()
            .zip(&self.log_probs)
            .map(|(&a, lp)| lp[a])
            .sum()
    }

    pub fn entropy(&self) -> f64 {
        self.log_probs
            .iter()
            .map(|lp| -lp.iter().map(|&l| l.exp() * l).sum::<f64>())
            .sum()
    }

    /// Inverse-CDF sample from each head.
    pub fn sample(&self, rng: &mut Rng) -> Vec<usize> {
        self.log_probs
            .iter()
            .map(|lp| {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (k, &l) in lp.iter().enumerate() {
                    acc += l.exp();
                    if u < acc {
                        return k;
                    }
                }
                lp.len() - 1
            })
            .collect()
    }
}

/// Dot product with four independent partial sums, which lets the compiler
/// vectorize the reduction.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Numerically stable log-softmax into `out`.
pub fn log_softmax(logits: &[f64], out: &mut Vec<f64>) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
    out.clear();
    out.extend(logits.iter().map(|z| z - lse));
}

impl PolicyNetwork {
    /// Zero-initialized network.
    pub fn zeros(input_dim: usize, hidden: &[usize], heads: &[usize]) -> Result<Self> {
        if input_dim == 0 || hidden.contains(&0) || heads.is_empty() || heads.contains(&0) {
            return Err(Error::invalid("network dimensions must be positive"));
        }
        let mut layers = Vec::new();
        let mut off = 0;
        let mut prev = input_dim;
        let outputs = heads.iter().sum::<usize>() + 1;
        for &width in hidden.iter().chain(std::iter::once(&outputs)) {
            let w = off;
            let b = w + prev * width;
            off = b + width;
            layers.push(Layer {
                inputs: prev,
                outputs: width,
                w,
                b,
            });
            prev = width;
        }
        Ok(PolicyNetwork {
            input_dim,
            hidden: hidden.to_vec(),
            heads: heads.to_vec(),
            layers,
            params: vec![0.0; off],
        })
    }

    /// Scaled-normal initialization: hidden layers with std √(1/fan_in)·5/3
    /// (tanh gain), the policy logits with std 0.01/√fan_in and the value
    /// with std 1/√fan_in. Biases start at zero.
    pub fn new(input_dim: usize, hidden: &[usize], heads: &[usize], rng: &mut Rng) -> Result<Self> {
        let mut net = Self::zeros(input_dim, hidden, heads)?;
        let n_layers = net.layers.len();
        let n_logits: usize = heads.iter().sum();
        for (l, layer) in net.layers.clone().into_iter().enumerate() {
            let fan_in = layer.inputs as f64;
            for i in 0..layer.inputs {
                for o in 0..layer.outputs {
                    let gain = if l + 1 < n_layers {
                        5.0 / 3.0
                    } else if o < n_logits {
                        0.01
                    } else {
                        1.0
                    };
                    let normal = Normal::new(0.0, gain / fan_in.sqrt()).expect("finite std");
                    net.params[layer.w + i * layer.outputs + o] = normal.sample(rng);
                }
            }
        }
        Ok(net)
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden(&self) -> &[usize] {
        &self.hidden
    }

    pub fn heads(&self) -> &[usize] {
        &self.heads
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    /// Set the bias of output unit `unit` (logits first, value last).
    pub fn set_output_bias(&mut self, unit: usize, value: f64) {
        let last = *self.layers.last().expect("at least one layer");
        self.params[last.b + unit] = value;
    }

    fn check_input(&self, x: &Features) -> Result<()> {
        if x.dim != self.input_dim {
            return Err(Error::invalid(format!(
                "feature vector has dimension {}, network expects {}",
                x.dim, self.input_dim
            )));
        }
        if x.idx.len() != x.val.len() || x.idx.iter().any(|&i| i as usize >= self.input_dim) {
            return Err(Error::invalid("malformed sparse feature vector"));
        }
        Ok(())
    }

    /// Raw outputs (logits then value) into `ws.out`.
    pub fn forward_raw(&self, x: &Features, ws: &mut Workspace) -> Result<()> {
        self.check_input(x)?;
        let n_hidden = self.hidden.len();
        ws.hidden.resize(n_hidden, Vec::new());
        for (l, layer) in self.layers.iter().enumerate() {
            let mut acc = std::mem::take(if l < n_hidden { &mut ws.hidden[l] } else { &mut ws.out });
            acc.clear();
            acc.extend_from_slice(&self.params[layer.b..layer.b + layer.outputs]);
            let w = &self.params[layer.w..layer.b];
            let width = layer.outputs;
            if l == 0 {
                for (&i, &v) in x.idx.iter().zip(&x.val) {
                    let row = &w[i as usize * width..(i as usize + 1) * width];
                    acc.iter_mut().zip(row).for_each(|(a, wi)| *a += v * wi);
                }
            } else {
                let input = &ws.hidden[l - 1];
                for (i, &v) in input.iter().enumerate() {
                    let row = &w[i * width..(i + 1) * width];
                    acc.iter_mut().zip(row).for_each(|(a, wi)| *a += v * wi);
                }
            }
            if l < n_hidden {
                acc.iter_mut().for_each(|a| *a = a.tanh());
                ws.hidden[l] = acc;
            } else {
                ws.out = acc;
            }
        }
        Ok(())
    }

    pub fn forward(&self, x: &Features) -> Result<PolicyOutput> {
        let mut ws = Workspace::default();
        self.forward_with(x, &mut ws)
    }

    pub fn forward_with(&self, x: &Features, ws: &mut Workspace) -> Result<PolicyOutput> {
        self.forward_raw(x, ws)?;
        let mut off = 0;
        let log_probs = self
            .heads
            .iter()
            .map(|&k| {
                let mut lp = Vec::with_capacity(k);
                log_softmax(&ws.out[off..off + k], &mut lp);
                off += k;
                lp
            })
            .collect();
        Ok(PolicyOutput {
            log_probs,
            value: ws.out[off],
        })
    }

    /// Accumulate `d loss / d params` into `grad` for the sample whose
    /// activations are in `ws` (from the last `forward_raw` on `x`), given
    /// the gradient `d_out` with respect to the raw outputs.
    pub fn backward(&self, x: &Features, ws: &mut Workspace, d_out: &[f64], grad: &mut [f64]) {
        debug_assert_eq!(grad.len(), self.params.len());
        let n_hidden = self.hidden.len();
        ws.grad_hidden.resize(n_hidden, Vec::new());
        let mut upstream: Vec<f64> = d_out.to_vec();
        for l in (0..self.layers.len()).rev() {
            let layer = self.layers[l];
            let width = layer.outputs;
            grad[layer.b..layer.b + width]
                .iter_mut()
                .zip(&upstream)
                .for_each(|(g, d)| *g += d);
            if l == 0 {
                for (&i, &v) in x.idx.iter().zip(&x.val) {
                    let start = layer.w + i as usize * width;
                    grad[start..start + width]
                        .iter_mut()
                        .zip(&upstream)
                        .for_each(|(g, d)| *g += v * d);
                }
                break;
            }
            let input = &ws.hidden[l - 1];
            let w = &self.params[layer.w..layer.b];
            let mut down = std::mem::take(&mut ws.grad_hidden[l - 1]);
            down.clear();
            for (i, &h) in input.iter().enumerate() {
                let start = layer.w + i * width;
                grad[start..start + width]
                    .iter_mut()
                    .zip(&upstream)
                    .for_each(|(g, d)| *g += h * d);
                let row = &w[i * width..(i + 1) * width];
                let dh = dot(row, &upstream);
                down.push(dh * (1.0 - h * h));
            }
            ws.grad_hidden[l - 1] = std::mem::replace(&mut upstream, down);
        }
    }

    /// Layout description used by checkpoints.
    pub fn shape(&self) -> Vec<u64> {
        let mut s = vec![self.input_dim as u64, self.hidden.len() as u64];
        s.extend(self.hidden.iter().map(|&h| h as u64));
        s.push(self.heads.len() as u64);
        s.extend(self.heads.iter().map(|&h| h as u64));
        s
    }

    pub fn from_shape(shape: &[u64], params: Vec<f64>) -> Result<Self> {
        let bad = || Error::Checkpoint("malformed network shape".into());
        let input = *shape.first().ok_or_else(bad)? as usize;
        let nh = *shape.get(1).ok_or_else(bad)? as usize;
        let hidden: Vec<usize> = shape.get(2..2 + nh).ok_or_else(bad)?.iter().map(|&h| h as usize).collect();
        let nk = *shape.get(2 + nh).ok_or_else(bad)? as usize;
        let heads: Vec<usize> = shape
            .get(3 + nh..3 + nh + nk)
            .ok_or_else(bad)?
            .iter()
            .map(|&h| h as usize)
            .collect();
        if shape.len() != 3 + nh + nk {
            return Err(bad());
        }
        let mut net = Self::zeros(input, &hidden, &heads)?;
        if params.len() != net.params.len() {
            return Err(Error::Checkpoint(format!(
                "network expects {} parameters, checkpoint has {}",
                net.params.len(),
                params.len()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Checkpoint("non-finite network parameter".into()));
        }
        net.params = params;
        Ok(net)
    }
}

/// Adam with bias correction.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Adam {
    pub fn new(n: usize) -> Self {
        Adam {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for (((p, g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;

    #[test]
    fn zero_weights_give_uniform_policy() {
        let net = PolicyNetwork::zeros(6, &[8, 8], &[7]).unwrap();
        let out = net.forward(&Features::dense(&[1.0, -2.0, 0.5, 0.0, 3.0, 1.0])).unwrap();
        for p in out.probs(0) {
            assert!((p - 1.0 / 7.0).abs() < 1e-15);
        }
        assert_eq!(out.value, 0.0);
    }

    #[test]
    fn softmax_normalized_on_random_inputs() {
        let mut rng = stream_rng(3, 0);
        let net = PolicyNetwork::new(10, &[16, 16], &[5, 3], &mut rng).unwrap();
        for _ in 0..50 {
            let x: Vec<f64> = (0..10).map(|_| rng.random_range(-3.0..3.0)).collect();
            let out = net.forward(&Features::dense(&x)).unwrap();
            for h in 0..2 {
                let s: f64 = out.probs(h).iter().sum();
                assert!((s - 1.0).abs() < 1e-12);
            }
            assert!(out.value.is_finite());
        }
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let net = PolicyNetwork::zeros(4, &[3], &[2]).unwrap();
        assert!(net.forward(&Features::dense(&[1.0; 5])).is_err());
    }

    #[test]
    fn sparse_and_dense_inputs_agree() {
        let mut rng = stream_rng(5, 0);
        let net = PolicyNetwork::new(12, &[9], &[4], &mut rng).unwrap();
        let dense: Vec<f64> = (0..12).map(|i| if i % 3 == 0 { 1.0 } else { 0.0 }).collect();
        let mut sparse = Features::new(12);
        for i in [9, 0, 6, 3] {
            sparse.push(i, 1.0);
        }
        let a = net.forward(&Features::dense(&dense)).unwrap();
        let b = net.forward(&sparse).unwrap();
        assert!((a.value - b.value).abs() < 1e-12);
    }

    #[test]
    fn log_prob_gradient_matches_finite_differences() {
        let mut rng = stream_rng(17, 0);
        for trial in 0..5 {
            let mut net = PolicyNetwork::new(7, &[6, 5], &[4], &mut rng).unwrap();
            let x: Vec<f64> = (0..7).map(|_| rng.random_range(-1.0..1.0)).collect();
            let x = Features::dense(&x);
            let action = trial % 4;
            let mut ws = Workspace::default();
            let out = net.forward_with(&x, &mut ws).unwrap();
            let p = out.probs(0);
            let mut d_out = vec![0.0; 5];
            for k in 0..4 {
                d_out[k] = f64::from(k == action) - p[k];
            }
            let mut grad = vec![0.0; net.param_count()];
            net.backward(&x, &mut ws, &d_out, &mut grad);
            let h = 1e-3;
            for j in 0..net.param_count() {
                let orig = net.params[j];
                net.params[j] = orig + h;
                let up = net.forward(&x).unwrap().log_probs[0][action];
                net.params[j] = orig - h;
                let down = net.forward(&x).unwrap().log_probs[0][action];
                net.params[j] = orig;
                let fd = (up - down) / (2.0 * h);
                let denom = grad[j].abs().max(fd.abs()).max(1e-6);
                assert!((grad[j] - fd).abs() / denom < 1e-4, "param {j}: {} vs {fd}", grad[j]);
            }
        }
    }

    #[test]
    fn shape_round_trip() {
        let mut rng = stream_rng(1, 0);
        let net = PolicyNetwork::new(5, &[4, 3], &[2, 6], &mut rng).unwrap();
        let back = PolicyNetwork::from_shape(&net.shape(), net.params().to_vec()).unwrap();
        assert_eq!(back, net);
        assert!(PolicyNetwork::from_shape(&net.shape(), vec![0.0; 3]).is_err());
    }

    #[test]
    fn adam_zero_lr_is_exact_noop() {
        let mut p = vec![0.3, -1.7, 2.0];
        let orig = p.clone();
        let mut adam = Adam::new(3);
        adam.step(&mut p, &[1.0, -2.0, 0.5], 0.0);
        assert_eq!(p, orig);
    }

    #[test]
    fn near_one_hot_logits_sample_deterministically() {
        let mut net = PolicyNetwork::zeros(2, &[2], &[5]).unwrap();
        net.set_output_bias(3, 1000.0);
        let out = net.forward(&Features::dense(&[0.1, 0.2])).unwrap();
        let mut rng = stream_rng(0, 0);
        for _ in 0..100 {
            assert_eq!(out.sample(&mut rng), vec![3]);
        }
    }
}
