//! Clipped-surrogate PPO with a shared policy/value network.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::buffer::TrainSample;
use super::net::{Adam, PolicyNetwork, Workspace};
use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PpoConfig {
    pub clip: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub entropy_coef: f64,
    pub value_coef: f64,
    pub lr: f64,
    pub epochs: usize,
    pub minibatch: usize,
    /// Global gradient-norm cap; non-positive disables clipping.
    pub max_grad_norm: f64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        PpoConfig {
            clip: 0.2,
            gamma: 0.99,
            lambda: 0.95,
            entropy_coef: 0.01,
            value_coef: 0.5,
            lr: 3e-4,
            epochs: 4,
            minibatch: 256,
            max_grad_norm: 0.5,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self, prefix: &str) -> Result<()> {
        let key = |k: &str| format!("{prefix}{k}");
        if !(self.clip > 0.0) {
            return Err(Error::config(key("clip"), "must be positive"));
        }
        for (name, v) in [("gamma", self.gamma), ("lambda", self.lambda)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::config(key(name), "must lie in [0, 1]"));
            }
        }
        if self.gamma >= 1.0 {
            return Err(Error::config(key("gamma"), "discount must be below 1"));
        }
        for (name, v) in [
            ("entropy_coef", self.entropy_coef),
            ("value_coef", self.value_coef),
            ("lr", self.lr),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(key(name), "must be finite and non-negative"));
            }
        }
        if self.epochs == 0 {
            return Err(Error::config(key("epochs"), "must be at least 1"));
        }
        if self.minibatch == 0 {
            return Err(Error::config(key("minibatch"), "must be at least 1"));
        }
        Ok(())
    }
}

/// Loss components averaged over a batch.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossStats {
    pub total: f64,
    pub policy: f64,
    pub value: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
}

/// Loss terms and coefficients as a plain function of a batch, so the same
/// code serves training and gradient checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossSpec {
    pub clip: f64,
    pub entropy_coef: f64,
    pub value_coef: f64,
}

impl From<&PpoConfig> for LossSpec {
    fn from(c: &PpoConfig) -> Self {
        LossSpec {
            clip: c.clip,
            entropy_coef: c.entropy_coef,
            value_coef: c.value_coef,
        }
    }
}

/// Mean PPO loss over `batch` using the advantages exactly as given.
/// When `grad` is supplied, its gradient is accumulated into it.
///
/// Per sample: `−min(ρA, clip(ρ, 1−ε, 1+ε)A) + c_v (V − R)² − c_e Σ_heads H`.
pub fn ppo_loss(
    net: &PolicyNetwork,
    batch: &[&TrainSample],
    spec: LossSpec,
    mut grad: Option<&mut [f64]>,
) -> Result<LossStats> {
    if batch.is_empty() {
        return Err(Error::Contract("PPO loss over an empty batch".into()));
    }
    let m = batch.len() as f64;
    let mut ws = Workspace::default();
    let mut stats = LossStats::default();
    let n_out = net.heads().iter().sum::<usize>() + 1;
    let mut d_out = vec![0.0; n_out];
    for s in batch {
        let out = net.forward_with(&s.obs, &mut ws)?;
        let log_prob = out.log_prob(&s.actions);
        let ratio = (log_prob - s.old_log_prob).exp();
        let surr1 = ratio * s.advantage;
        let surr2 = ratio.clamp(1.0 - spec.clip, 1.0 + spec.clip) * s.advantage;
        let policy = -surr1.min(surr2);
        let value_err = out.value - s.ret;
        let entropy = out.entropy();

        stats.policy += policy / m;
        stats.value += value_err * value_err / m;
        stats.entropy += entropy / m;
        stats.approx_kl += ((ratio - 1.0) - (log_prob - s.old_log_prob)) / m;
        if (ratio - 1.0).abs() > spec.clip {
            stats.clip_fraction += 1.0 / m;
        }

        if let Some(g) = grad.as_deref_mut() {
            // d(policy)/d(log π): the unclipped branch is active iff it is the min.
            let d_logp = if surr1 <= surr2 { -s.advantage * ratio } else { 0.0 };
            let mut off = 0;
            for (h, lp) in out.log_probs.iter().enumerate() {
                let head_entropy = -lp.iter().map(|&l| l.exp() * l).sum::<f64>();
                for (k, &l) in lp.iter().enumerate() {
                    let p = l.exp();
                    let chosen = if s.actions[h] == k { 1.0 } else { 0.0 };
                    let d_policy = d_logp * (chosen - p);
                    let d_entropy = spec.entropy_coef * p * (l + head_entropy);
                    d_out[off + k] = (d_policy + d_entropy) / m;
                }
                off += lp.len();
            }
            d_out[off] = 2.0 * spec.value_coef * value_err / m;
            net.backward(&s.obs, &mut ws, &d_out, g);
        }
    }
    stats.total = stats.policy + spec.value_coef * stats.value - spec.entropy_coef * stats.entropy;
    Ok(stats)
}

/// Shift and scale advantages to zero mean and unit variance.
pub fn normalize_advantages(batch: &mut [TrainSample]) {
    if batch.is_empty() {
        return;
    }
    let n = batch.len() as f64;
    let mean = batch.iter().map(|s| s.advantage).sum::<f64>() / n;
    let var = batch.iter().map(|s| (s.advantage - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    for s in batch {
        s.advantage = (s.advantage - mean) / (std + 1e-8);
    }
}

fn clip_grad(grad: &mut [f64], max_norm: f64) {
    if max_norm <= 0.0 {
        return;
    }
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm {
        let scale = max_norm / norm;
        grad.iter_mut().for_each(|g| *g *= scale);
    }
}

/// Averages over all minibatch steps of the update.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PpoDiagnostics {
    pub steps: usize,
    pub loss: LossStats,
}

/// Several epochs of shuffled minibatch Adam steps on the PPO loss.
/// Advantages are normalized within each minibatch.
pub fn ppo_update(
    net: &mut PolicyNetwork,
    opt: &mut Adam,
    samples: &[TrainSample],
    config: &PpoConfig,
    rng: &mut Rng,
) -> Result<PpoDiagnostics> {
    if samples.is_empty() {
        return Err(Error::Contract("PPO update with an empty buffer".into()));
    }
    let spec = LossSpec::from(config);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut grad = vec![0.0; net.param_count()];
    let mut diag = PpoDiagnostics::default();
    for _ in 0..config.epochs {
        order.shuffle(rng);
        for chunk in order.chunks(config.minibatch) {
            let mut mb: Vec<TrainSample> = chunk.iter().map(|&i| samples[i].clone()).collect();
            normalize_advantages(&mut mb);
            let refs: Vec<&TrainSample> = mb.iter().collect();
            grad.iter_mut().for_each(|g| *g = 0.0);
            let stats = ppo_loss(net, &refs, spec, Some(&mut grad))?;
            clip_grad(&mut grad, config.max_grad_norm);
            opt.step(net.params_mut(), &grad, config.lr);
            diag.steps += 1;
            let l = &mut diag.loss;
            l.total += stats.total;
            l.policy += stats.policy;
            l.value += stats.value;
            l.entropy += stats.entropy;
            l.approx_kl += stats.approx_kl;
            l.clip_fraction += stats.clip_fraction;
        }
    }
    let k = diag.steps as f64;
    let l = &mut diag.loss;
    for v in [
        &mut l.total,
        &mut l.policy,
        &mut l.value,
        &mut l.entropy,
        &mut l.approx_kl,
        &mut l.clip_fraction,
    ] {
        *v /= k;
    }
    if !net.params().iter().all(|p| p.is_finite()) {
        return Err(Error::Contract("PPO update produced non-finite parameters".into()));
    }
    Ok(diag)
}
