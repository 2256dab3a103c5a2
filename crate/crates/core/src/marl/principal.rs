//! The principal's per-bracket discrete action space and the tax-annealing
//! curriculum.

use serde::{Deserialize, Serialize};

use super::net::{Features, PolicyNetwork, Workspace};
use crate::error::{Error, Result};
use crate::fiscal::TaxSchedule;
use crate::rng::Rng;

/// Two-phase curriculum: no tax at all for `tax_free_rounds`, then the
/// ceiling climbs linearly to 1 over `anneal_rounds`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnnealConfig {
    pub tax_free_rounds: u64,
    pub anneal_rounds: u64,
}

impl Default for AnnealConfig {
    fn default() -> Self {
        AnnealConfig {
            tax_free_rounds: 20,
            anneal_rounds: 50,
        }
    }
}

/// Highest tax rate the principal may pick in `round`.
pub fn anneal_schedule(round: u64, config: &AnnealConfig) -> f64 {
    if round < config.tax_free_rounds {
        return 0.0;
    }
    if config.anneal_rounds == 0 {
        return 1.0;
    }
    let progress = (round - config.tax_free_rounds) as f64 / config.anneal_rounds as f64;
    progress.min(1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrincipalActionSpace {
    levels: Vec<f64>,
    ceiling: f64,
    /// Largest allowed per-bracket move from the previous schedule.
    max_change: Option<f64>,
}

impl PrincipalActionSpace {
    /// `n_levels` evenly spaced rates from 0 to 1 inclusive.
    pub fn uniform(n_levels: usize) -> Result<Self> {
        if n_levels < 2 {
            return Err(Error::invalid("the rate grid needs at least two levels"));
        }
        let levels = (0..n_levels).map(|k| k as f64 / (n_levels - 1) as f64).collect();
        Self::new(levels)
    }

    pub fn new(levels: Vec<f64>) -> Result<Self> {
        if levels.is_empty()
            || levels.iter().any(|l| !(0.0..=1.0).contains(l))
            || levels.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(Error::invalid("rate levels must ascend strictly within [0, 1]"));
        }
        Ok(PrincipalActionSpace {
            levels,
            ceiling: 1.0,
            max_change: None,
        })
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn ceiling(&self) -> f64 {
        self.ceiling
    }

    pub fn set_ceiling(&mut self, ceiling: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&ceiling) {
            return Err(Error::invalid(format!("ceiling {ceiling} outside [0, 1]")));
        }
        self.ceiling = ceiling;
        Ok(())
    }

    pub fn max_change(&self) -> Option<f64> {
        self.max_change
    }

    pub fn set_max_change(&mut self, bound: Option<f64>) -> Result<()> {
        if let Some(b) = bound {
            if !(b >= 0.0) {
                return Err(Error::invalid(format!("max change {b} must be non-negative")));
            }
        }
        self.max_change = bound;
        Ok(())
    }

    /// Rate for grid index `level`, after the change bound relative to the
    /// previous rate and then the ceiling. The ceiling wins if the two
    /// cannot both hold.
    pub fn rate(&self, level: usize, previous: f64) -> f64 {
        let mut r = self.levels[level];
        if let Some(d) = self.max_change {
            r = r.clamp(previous - d, previous + d);
        }
        r.min(self.ceiling).clamp(0.0, 1.0)
    }
}

/// One principal decision as recorded for its own learning.
#[derive(Debug, Clone, PartialEq)]
pub struct PrincipalChoice {
    pub schedule: TaxSchedule,
    pub levels: Vec<usize>,
    pub log_prob: f64,
    pub value: f64,
}

/// Sample one grid level per bracket and turn them into a schedule.
pub fn principal_select(
    net: &PolicyNetwork,
    obs: &Features,
    space: &PrincipalActionSpace,
    previous: &TaxSchedule,
    rng: &mut Rng,
    ws: &mut Workspace,
) -> Result<PrincipalChoice> {
    let b = previous.brackets();
    if net.heads().len() != b || net.heads().iter().any(|&h| h != space.levels.len()) {
        return Err(Error::invalid(format!(
            "principal network heads {:?} do not match {b} brackets of {} levels",
            net.heads(),
            space.levels.len()
        )));
    }
    let out = net.forward_with(obs, ws)?;
    let levels = out.sample(rng);
    let rates = levels
        .iter()
        .zip(previous.rates())
        .map(|(&k, &prev)| space.rate(k, prev))
        .collect();
    Ok(PrincipalChoice {
        schedule: previous.with_rates(rates)?,
        log_prob: out.log_prob(&levels),
        levels,
        value: out.value,
    })
}
