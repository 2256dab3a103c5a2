//! Run configuration: a TOML tree with strict key checking.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::env::GridConfig;
use crate::error::{Error, Result};
use crate::fiscal::{SocialRewardScope, TaxSchedule, DEFAULT_BOUNDARIES};
use crate::marl::{AnnealConfig, PpoConfig};
use crate::welfare::{PrincipalBias, WelfareObjective};

/// When taxed rewards reach the follower learners.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Delivery {
    /// At every tax-period boundary.
    #[default]
    PerPeriod,
    /// Summed and delivered at the end of the voting round.
    EndOfRound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FiscalConfig {
    pub boundaries: Vec<f64>,
    pub tax_period: u64,
    pub delivery: Delivery,
    pub social_reward_scope: SocialRewardScope,
}

impl Default for FiscalConfig {
    fn default() -> Self {
        FiscalConfig {
            boundaries: DEFAULT_BOUNDARIES.to_vec(),
            tax_period: 50,
            delivery: Delivery::PerPeriod,
            social_reward_scope: SocialRewardScope::All,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VotingMode {
    /// η is the mean reported selfishness.
    #[default]
    Interpolated,
    /// Plurality over `menu`.
    Menu,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VotingConfig {
    pub mode: VotingMode,
    pub menu: Vec<WelfareObjective>,
    /// Explicit per-agent selfishness; drawn uniformly from
    /// `[sigma_min, sigma_max]` when absent.
    pub sigma: Option<Vec<f64>>,
    pub sigma_min: f64,
    pub sigma_max: f64,
    /// Reported selfishness; truthful when absent.
    pub reports: Option<Vec<f64>>,
    pub principal_bias: Option<PrincipalBias>,
}

impl Default for VotingConfig {
    fn default() -> Self {
        VotingConfig {
            mode: VotingMode::Interpolated,
            menu: vec![
                WelfareObjective::Utilitarian,
                WelfareObjective::Nash,
                WelfareObjective::Egalitarian,
            ],
            sigma: None,
            sigma_min: 0.0,
            sigma_max: 1.0,
            reports: None,
            principal_bias: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LearningConfig {
    pub hidden: Vec<usize>,
    pub principal_hidden: Vec<usize>,
    /// Follower steps between PPO updates.
    pub sampling_horizon: u64,
    pub rate_levels: usize,
    /// Rounds between principal updates.
    pub principal_update_rounds: u64,
    /// Per-round bound on any bracket's rate change; off when absent.
    pub max_rate_change: Option<f64>,
    pub anneal: AnnealConfig,
    pub follower: PpoConfig,
    pub principal: PpoConfig,
}

impl Default for LearningConfig {
    fn default() -> Self {
        LearningConfig {
            hidden: vec![64, 64],
            principal_hidden: vec![64, 64],
            sampling_horizon: 200,
            rate_levels: 21,
            principal_update_rounds: 8,
            max_rate_change: None,
            anneal: AnnealConfig::default(),
            follower: PpoConfig::default(),
            principal: PpoConfig {
                minibatch: 8,
                ..PpoConfig::default()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub rounds: u64,
    pub periods_per_round: u64,
    /// Write a checkpoint every this many rounds; 0 disables.
    pub checkpoint_every: u64,
    pub seed: u64,
    pub out_dir: PathBuf,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            rounds: 100,
            periods_per_round: 4,
            checkpoint_every: 10,
            seed: 0,
            out_dir: PathBuf::from("runs/default"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub env: GridConfig,
    pub fiscal: FiscalConfig,
    pub voting: VotingConfig,
    pub learning: LearningConfig,
    pub run: RunSection,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| {
            let key = e.span().map_or_else(String::new, |s| {
                text.get(s).unwrap_or_default().trim().to_string()
            });
            Error::config(key, e.message().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    /// Steps in one voting round.
    pub fn round_steps(&self) -> u64 {
        self.run.periods_per_round * self.fiscal.tax_period
    }

    pub fn validate(&self) -> Result<()> {
        self.env.validate("env.")?;
        let f = &self.fiscal;
        TaxSchedule::zero(f.boundaries.clone()).map_err(|e| Error::config("fiscal.boundaries", e.to_string()))?;
        if f.tax_period == 0 {
            return Err(Error::config("fiscal.tax_period", "must be at least 1"));
        }
        if !self.env.episode_length.is_multiple_of(f.tax_period) {
            return Err(Error::config(
                "env.episode_length",
                format!(
                    "episode length {} must be divisible by fiscal.tax_period {}",
                    self.env.episode_length, f.tax_period
                ),
            ));
        }

        let v = &self.voting;
        let n = self.env.n_agents;
        if v.mode == VotingMode::Menu && v.menu.is_empty() {
            return Err(Error::config("voting.menu", "menu voting needs at least one objective"));
        }
        for (i, o) in v.menu.iter().enumerate() {
            if let WelfareObjective::Interpolated { eta } = o {
                if !(0.0..=1.0).contains(eta) {
                    return Err(Error::config(format!("voting.menu[{i}].eta"), "must lie in [0, 1]"));
                }
            }
        }
        if !(0.0 <= v.sigma_min && v.sigma_min <= v.sigma_max && v.sigma_max <= 1.0) {
            return Err(Error::config("voting.sigma_min", "need 0 <= sigma_min <= sigma_max <= 1"));
        }
        for (key, list) in [("voting.sigma", &v.sigma), ("voting.reports", &v.reports)] {
            if let Some(list) = list {
                if list.len() != n {
                    return Err(Error::config(key, format!("has {} entries for {n} agents", list.len())));
                }
                if list.iter().any(|s| !(0.0..=1.0).contains(s)) {
                    return Err(Error::config(key, "entries must lie in [0, 1]"));
                }
            }
        }
        if let Some(b) = &v.principal_bias {
            if !(0.0..=1.0).contains(&b.weight) || !(0.0..=1.0).contains(&b.eta) {
                return Err(Error::config("voting.principal_bias", "weight and eta must lie in [0, 1]"));
            }
        }

        let l = &self.learning;
        if l.hidden.is_empty() || l.hidden.contains(&0) {
            return Err(Error::config("learning.hidden", "need at least one non-empty layer"));
        }
        if l.principal_hidden.is_empty() || l.principal_hidden.contains(&0) {
            return Err(Error::config("learning.principal_hidden", "need at least one non-empty layer"));
        }
        if l.rate_levels < 2 {
            return Err(Error::config("learning.rate_levels", "must be at least 2"));
        }
        if l.principal_update_rounds == 0 {
            return Err(Error::config("learning.principal_update_rounds", "must be at least 1"));
        }
        if let Some(d) = l.max_rate_change {
            if !(d >= 0.0) {
                return Err(Error::config("learning.max_rate_change", "must be non-negative"));
            }
        }
        l.follower.validate("learning.follower.")?;
        l.principal.validate("learning.principal.")?;

        let r = &self.run;
        if r.periods_per_round == 0 {
            return Err(Error::config("run.periods_per_round", "must be at least 1 tax period"));
        }
        let round = self.round_steps();
        if l.sampling_horizon == 0 || !round.is_multiple_of(l.sampling_horizon) {
            return Err(Error::config(
                "learning.sampling_horizon",
                format!("must divide the round length of {round} steps"),
            ));
        }
        match f.delivery {
            Delivery::PerPeriod if !l.sampling_horizon.is_multiple_of(f.tax_period) => {
                return Err(Error::config(
                    "learning.sampling_horizon",
                    "must be a multiple of fiscal.tax_period so rewards land before each update",
                ));
            }
            Delivery::EndOfRound if l.sampling_horizon != round => {
                return Err(Error::config(
                    "learning.sampling_horizon",
                    "must equal the round length when rewards arrive at the end of the round",
                ));
            }
            _ => {}
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key_of(r: Result<RunConfig>) -> String {
        match r {
            Err(Error::Config { key, .. }) => key,
            other => panic!("expected a config error, got {other:?}"),
        }
    }

    #[test]
    fn default_is_valid_and_round_trips() {
        let c = RunConfig::default();
        c.validate().unwrap();
        assert_eq!(RunConfig::from_toml(&c.to_toml()).unwrap(), c);
        assert_eq!(RunConfig::from_toml("").unwrap(), c);
    }

    #[test]
    fn unknown_keys_are_named() {
        let err = RunConfig::from_toml("[env]\nwidht = 3\n").unwrap_err();
        assert!(err.to_string().contains("widht"), "{err}");
        let err = RunConfig::from_toml("[runn]\n").unwrap_err();
        assert!(err.to_string().contains("runn"), "{err}");
    }

    #[test]
    fn divisibility_rule() {
        let k = key_of(RunConfig::from_toml("[env]\nepisode_length = 1001\n"));
        assert_eq!(k, "env.episode_length");
    }

    #[test]
    fn zero_periods_rejected() {
        assert_eq!(key_of(RunConfig::from_toml("[run]\nperiods_per_round = 0\n")), "run.periods_per_round");
    }

    #[test]
    fn horizon_must_fit_the_round() {
        let k = key_of(RunConfig::from_toml("[run]\nperiods_per_round = 1\n"));
        assert_eq!(k, "learning.sampling_horizon");
        let ok = "[run]\nperiods_per_round = 1\n[learning]\nsampling_horizon = 50\n";
        RunConfig::from_toml(ok).unwrap();
    }

    #[test]
    fn nested_sections_parse() {
        let c = RunConfig::from_toml(
            "[learning.follower]\nlr = 0.0\n[voting]\nsigma = [0,0,0,0,0,0,0.5]\n[fiscal]\ndelivery = \"per_period\"\n",
        )
        .unwrap();
        assert_eq!(c.learning.follower.lr, 0.0);
        assert_eq!(c.voting.sigma.as_ref().unwrap()[6], 0.5);
        assert_eq!(key_of(RunConfig::from_toml("[voting]\nsigma = [0.5]\n")), "voting.sigma");
    }
}
