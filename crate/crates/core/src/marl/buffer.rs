use super::gae::gae_advantages;
use super::net::Features;
use crate::error::{Error, Result};

/// One agent's step as seen by the learner.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub agent: usize,
    pub obs: Features,
    pub actions: Vec<usize>,
    pub log_prob: f64,
    pub value: f64,
    pub reward: f64,
    /// The episode ended after this step.
    pub done: bool,
}

/// A transition with its advantage and return target filled in.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainSample {
    pub obs: Features,
    pub actions: Vec<usize>,
    pub old_log_prob: f64,
    pub advantage: f64,
    pub ret: f64,
}

/// Time-ordered transitions from one environment, interleaved across agents.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutBuffer {
    capacity: usize,
    records: Vec<Transition>,
}

impl RolloutBuffer {
    /// Room for `horizon` steps of `n_agents` agents in `n_envs` environments.
    pub fn new(horizon: usize, n_agents: usize, n_envs: usize) -> Self {
        let capacity = horizon * n_agents * n_envs;
        RolloutBuffer {
            capacity,
            records: Vec::with_capacity(capacity),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.records.len() >= self.capacity
    }

    pub fn records(&self) -> &[Transition] {
        &self.records
    }

    pub fn push(&mut self, t: Transition) -> Result<()> {
        if self.is_full() {
            return Err(Error::Contract(format!("rollout buffer full at {} records", self.capacity)));
        }
        self.records.push(t);
        Ok(())
    }

    /// Add `reward` to the most recent transition of `agent`.
    pub fn credit_last(&mut self, agent: usize, reward: f64) -> Result<()> {
        let t = self
            .records
            .iter_mut()
            .rev()
            .find(|t| t.agent == agent)
            .ok_or_else(|| Error::Contract(format!("no transition recorded for agent {agent}")))?;
        t.reward += reward;
        Ok(())
    }

    /// Mark the most recent transition of every agent as terminal.
    pub fn end_episode(&mut self, n_agents: usize) {
        for agent in 0..n_agents {
            if let Some(t) = self.records.iter_mut().rev().find(|t| t.agent == agent) {
                t.done = true;
            }
        }
    }

    pub fn clear(&mut self) {
        self.records.clear();
    }

    /// Run GAE separately over each agent's stream. `bootstrap[i]` values the
    /// state after agent `i`'s final transition.
    pub fn training_samples(&self, bootstrap: &[f64], gamma: f64, lambda: f64) -> Result<Vec<TrainSample>> {
        let n_agents = bootstrap.len();
        let mut out = Vec::with_capacity(self.records.len());
        for agent in 0..n_agents {
            let stream: Vec<&Transition> = self.records.iter().filter(|t| t.agent == agent).collect();
            if stream.is_empty() {
                continue;
            }
            let rewards: Vec<f64> = stream.iter().map(|t| t.reward).collect();
            let values: Vec<f64> = stream.iter().map(|t| t.value).collect();
            let dones: Vec<bool> = stream.iter().map(|t| t.done).collect();
            let (adv, ret) = gae_advantages(&rewards, &values, &dones, bootstrap[agent], gamma, lambda)?;
            for ((t, a), r) in stream.into_iter().zip(adv).zip(ret) {
                out.push(TrainSample {
                    obs: t.obs.clone(),
                    actions: t.actions.clone(),
                    old_log_prob: t.log_prob,
                    advantage: a,
                    ret: r,
                });
            }
        }
        if let Some(t) = self.records.iter().find(|t| t.agent >= n_agents) {
            return Err(Error::invalid(format!("transition for agent {} without a bootstrap value", t.agent)));
        }
        Ok(out)
    }
}
