//! The round loop: vote, design, simulate, learn.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::Rng as _;
use serde::Serialize;

use super::config::{Delivery, RunConfig, VotingMode};
use super::metrics::{gini, MetricsWriter, PeriodRow, RoundRecord, Summary};
use crate::env::{write_events, Action, CellView, HarvestEnv, PomgState};
use crate::error::{Error, Result};
use crate::fiscal::{apply_tax_period, mix_taxed, AgentType, SocialRewardScope, TaxSchedule};
use crate::marl::{
    anneal_schedule, gae_advantages, ppo_update, principal_select, Adam, Checkpoint, Features, FollowerEncoder,
    PolicyNetwork, PrincipalActionSpace, PrincipalContext, PrincipalEncoder, RolloutBuffer, TrainSample,
    Transition, Workspace,
};
use crate::rng::{mix_seed, stream, stream_rng, Rng, RngState};
use crate::welfare::{principal_reward, social_choice_mean, social_choice_menu, WelfareObjective};

/// Salt separating evaluation episode seeds from training ones.
const EVAL_SALT: u64 = 1 << 40;

/// Per-period metrics rows and the summary record of one round.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundOutput {
    pub record: RoundRecord,
    pub periods: Vec<PeriodRow>,
}

/// Live state of an experiment between rounds.
pub struct Experiment {
    config: RunConfig,
    seed: u64,
    env: HarvestEnv,
    follower_enc: FollowerEncoder,
    principal_enc: PrincipalEncoder,
    space: PrincipalActionSpace,
    types: Vec<AgentType>,
    state: PomgState,
    round: u64,
    episode: u64,
    env_steps: u64,
    schedule: TaxSchedule,
    follower: PolicyNetwork,
    follower_opt: Adam,
    principal: PolicyNetwork,
    principal_opt: Adam,
    sampling_rng: Rng,
    shuffle_rng: Rng,
    principal_rng: Rng,
    buffer: RolloutBuffer,
    principal_pending: Vec<Transition>,
    events: Option<BufWriter<File>>,
    event_path: PathBuf,
    window: Vec<CellView>,
    ws: Workspace,
}

impl Experiment {
    pub fn new(config: RunConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let env = HarvestEnv::new(config.env.clone())?;
        let n = config.env.n_agents;
        let schedule = TaxSchedule::zero(config.fiscal.boundaries.clone())?;
        let b = schedule.brackets();

        let mut type_rng = stream_rng(seed, stream::AGENT_TYPES);
        let v = &config.voting;
        let sigma: Vec<f64> = match &v.sigma {
            Some(s) => s.clone(),
            None => (0..n).map(|_| v.sigma_min + (v.sigma_max - v.sigma_min) * type_rng.random::<f64>()).collect(),
        };
        let types = sigma
            .iter()
            .enumerate()
            .map(|(i, &s)| AgentType::with_report(s, v.reports.as_ref().map_or(s, |r| r[i])))
            .collect::<Result<Vec<_>>>()?;

        let follower_enc = FollowerEncoder::new(&env, b);
        let principal_enc = PrincipalEncoder::new(&env, b);
        let l = &config.learning;
        let mut init_rng = stream_rng(seed, stream::NET_INIT);
        let follower = PolicyNetwork::new(follower_enc.dim(), &l.hidden, &[crate::env::Action::COUNT], &mut init_rng)?;
        let principal = PolicyNetwork::new(principal_enc.dim(), &l.principal_hidden, &vec![l.rate_levels; b], &mut init_rng)?;
        let mut space = PrincipalActionSpace::uniform(l.rate_levels)?;
        space.set_max_change(l.max_rate_change)?;

        let state = env.reset(mix_seed(seed, 0))?;
        Ok(Experiment {
            follower_opt: Adam::new(follower.param_count()),
            principal_opt: Adam::new(principal.param_count()),
            buffer: RolloutBuffer::new(l.sampling_horizon as usize, n, 1),
            sampling_rng: stream_rng(seed, stream::POLICY_SAMPLING),
            shuffle_rng: stream_rng(seed, stream::PPO_SHUFFLE),
            principal_rng: stream_rng(seed, stream::PRINCIPAL),
            principal_pending: Vec::new(),
            config,
            seed,
            env,
            follower_enc,
            principal_enc,
            space,
            types,
            state,
            round: 0,
            episode: 0,
            env_steps: 0,
            schedule,
            follower,
            principal,
            events: None,
            event_path: PathBuf::new(),
            window: Vec::new(),
            ws: Workspace::default(),
        })
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Index of the next round to run.
    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn state(&self) -> &PomgState {
        &self.state
    }

    pub fn env(&self) -> &HarvestEnv {
        &self.env
    }

    pub fn types(&self) -> &[AgentType] {
        &self.types
    }

    pub fn schedule(&self) -> &TaxSchedule {
        &self.schedule
    }

    pub fn follower(&self) -> &PolicyNetwork {
        &self.follower
    }

    pub fn principal(&self) -> &PolicyNetwork {
        &self.principal
    }

    /// Stream every environment event to `path` as line-delimited JSON.
    pub fn log_events_to(&mut self, path: &Path) -> Result<()> {
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        self.events = Some(BufWriter::new(f));
        self.event_path = path.to_path_buf();
        Ok(())
    }

    fn vote(&self) -> Result<(WelfareObjective, Vec<f64>)> {
        let reports: Vec<f64> = self.types.iter().map(|t| t.reported_sigma).collect();
        let v = &self.config.voting;
        let objective = match v.mode {
            VotingMode::Interpolated => {
                let mut eta = social_choice_mean(&reports)?;
                if let Some(bias) = &v.principal_bias {
                    eta = bias.apply(eta);
                }
                WelfareObjective::interpolated(eta)?
            }
            VotingMode::Menu => social_choice_menu(&reports, &v.menu)?,
        };
        Ok((objective, reports))
    }

    /// One step for every follower: observe, sample, record, move.
    fn step_followers(&mut self) -> Result<()> {
        let n = self.config.env.n_agents;
        let period = self.config.fiscal.tax_period;
        let mut actions = Vec::with_capacity(n);
        for agent in 0..n {
            let mut obs = Features::default();
            self.follower_enc
                .encode(&self.env, &self.state, agent, period, &mut self.window, &mut obs);
            let out = self.follower.forward_with(&obs, &mut self.ws)?;
            let choice = out.sample(&mut self.sampling_rng);
            actions.push(Action::from_index(choice[0]).expect("policy head matches the action set"));
            self.buffer.push(Transition {
                agent,
                log_prob: out.log_prob(&choice),
                value: out.value,
                obs,
                actions: choice,
                reward: 0.0,
                done: false,
            })?;
        }
        match self.events.as_mut() {
            Some(sink) => {
                let mut log = Vec::new();
                self.env.step_logged(&mut self.state, &actions, Some(&mut log))?;
                write_events(sink, &log).map_err(|e| Error::io(&self.event_path, e))?;
            }
            None => {
                self.env.step(&mut self.state, &actions)?;
            }
        }
        self.env_steps += 1;
        Ok(())
    }

    fn update_followers(&mut self) -> Result<()> {
        let n = self.config.env.n_agents;
        let period = self.config.fiscal.tax_period;
        let mut bootstrap = Vec::with_capacity(n);
        for agent in 0..n {
            let mut obs = Features::default();
            self.follower_enc
                .encode(&self.env, &self.state, agent, period, &mut self.window, &mut obs);
            bootstrap.push(self.follower.forward_with(&obs, &mut self.ws)?.value);
        }
        let ppo = &self.config.learning.follower;
        let samples = self.buffer.training_samples(&bootstrap, ppo.gamma, ppo.lambda)?;
        ppo_update(&mut self.follower, &mut self.follower_opt, &samples, ppo, &mut self.shuffle_rng)?;
        self.buffer.clear();
        Ok(())
    }

    fn update_principal(&mut self) -> Result<()> {
        let ppo = &self.config.learning.principal;
        let pending = std::mem::take(&mut self.principal_pending);
        let rewards: Vec<f64> = pending.iter().map(|t| t.reward).collect();
        let values: Vec<f64> = pending.iter().map(|t| t.value).collect();
        let dones: Vec<bool> = pending.iter().map(|t| t.done).collect();
        let (adv, ret) = gae_advantages(&rewards, &values, &dones, 0.0, ppo.gamma, ppo.lambda)?;
        let samples: Vec<TrainSample> = pending
            .into_iter()
            .zip(adv)
            .zip(ret)
            .map(|((t, a), r)| TrainSample {
                obs: t.obs,
                actions: t.actions,
                old_log_prob: t.log_prob,
                advantage: a,
                ret: r,
            })
            .collect();
        ppo_update(&mut self.principal, &mut self.principal_opt, &samples, ppo, &mut self.principal_rng)?;
        Ok(())
    }

    /// Run the next voting round. The state carries over into the round
    /// after; errors carry the round index.
    pub fn run_round(&mut self) -> Result<RoundOutput> {
        let r = self.round;
        self.run_round_inner().map_err(|e| e.in_round(r))
    }

    fn run_round_inner(&mut self) -> Result<RoundOutput> {
        let r = self.round;
        let n = self.config.env.n_agents;
        let period_len = self.config.fiscal.tax_period;
        let episode_len = self.config.env.episode_length;

        // (1) vote
        let (objective, reports) = self.vote()?;
        let eta = objective.eta();

        // (2) the principal designs the economy
        let ceiling = anneal_schedule(r, &self.config.learning.anneal);
        self.space.set_ceiling(ceiling)?;
        let principal_obs = self.principal_enc.encode(
            &self.env,
            &self.state,
            PrincipalContext {
                eta,
                previous_rates: self.schedule.rates(),
                ceiling,
                episode_length: episode_len,
            },
        );
        let choice = principal_select(
            &self.principal,
            &principal_obs,
            &self.space,
            &self.schedule,
            &mut self.principal_rng,
            &mut self.ws,
        )?;
        let schedule = choice.schedule.clone();
        self.env.set_tax_rates(schedule.rates());

        let initial_hash = self.state.economic_hash();
        let apples_start = self.state.apple_count();
        let episode = self.episode;

        // (3) simulate the round's tax periods, learning as buffers fill
        let mut periods = Vec::with_capacity(self.config.run.periods_per_round as usize * n);
        let mut period_apples = Vec::new();
        let mut round_reward = 0.0;
        let mut owed = vec![0.0; n];
        let mut apples_end = apples_start;
        for period in 0..self.config.run.periods_per_round {
            for _ in 0..period_len {
                self.step_followers()?;
            }
            let before: Vec<f64> = self
                .state
                .apples_this_round
                .iter()
                .zip(&self.state.apples_this_period)
                .map(|(r, p)| (r - p) as f64)
                .collect();
            let settlement = apply_tax_period(&mut self.state, &schedule, period_len)?;
            let visible = match self.config.fiscal.social_reward_scope {
                SocialRewardScope::All => None,
                SocialRewardScope::FieldOfView => Some(self.env.visibility(&self.state)),
            };
            let mixed = mix_taxed(&settlement.taxed, &self.types, visible.as_deref())?;
            let after: Vec<f64> = self.state.apples_this_round.iter().map(|&a| a as f64).collect();
            let welfare = objective.value(&after)?;
            let delta = principal_reward(&objective, &before, &after)?;
            round_reward += delta;
            for agent in 0..n {
                periods.push(PeriodRow {
                    round: r,
                    period,
                    agent,
                    apples: settlement.apples[agent],
                    tax_paid: settlement.tax_paid[agent],
                    redistribution: settlement.share,
                    mixed_reward: mixed[agent],
                    eta,
                    phi: schedule.rates().to_vec(),
                    welfare,
                    principal_reward: delta,
                });
            }
            let last_period = period + 1 == self.config.run.periods_per_round;
            match self.config.fiscal.delivery {
                Delivery::PerPeriod => {
                    for (agent, m) in mixed.iter().enumerate() {
                        self.buffer.credit_last(agent, *m)?;
                    }
                }
                Delivery::EndOfRound => {
                    owed.iter_mut().zip(&mixed).for_each(|(o, m)| *o += m);
                    if last_period {
                        for (agent, o) in owed.iter().enumerate() {
                            self.buffer.credit_last(agent, *o)?;
                        }
                    }
                }
            }
            apples_end = self.state.apple_count();
            period_apples.push((self.state.step_clock, apples_end));

            if self.state.step_clock >= episode_len {
                // Episode over: the commons regenerates from a fresh layout.
                // Round tallies survive so the round's accounting is whole.
                self.buffer.end_episode(n);
                self.episode += 1;
                let tallies = std::mem::take(&mut self.state.apples_this_round);
                self.state = self.env.reset(mix_seed(self.seed, self.episode))?;
                self.state.apples_this_round = tallies;
            }
            if self.buffer.is_full() {
                self.update_followers()?;
            }
        }

        // (4) the principal's one-step episode for this round
        self.principal_pending.push(Transition {
            agent: 0,
            obs: principal_obs,
            actions: choice.levels.clone(),
            log_prob: choice.log_prob,
            value: choice.value,
            reward: round_reward,
            done: true,
        });
        if self.principal_pending.len() as u64 >= self.config.learning.principal_update_rounds {
            self.update_principal()?;
        }

        // (5) close the round
        let totals = std::mem::replace(&mut self.state.apples_this_round, vec![0; n]);
        let totals_f: Vec<f64> = totals.iter().map(|&t| t as f64).collect();
        let record = RoundRecord {
            round: r,
            episode,
            objective,
            eta,
            reports,
            ceiling,
            phi: schedule.rates().to_vec(),
            welfare: objective.value(&totals_f)?,
            principal_reward: round_reward,
            totals,
            apples_start,
            apples_end,
            period_apples,
            initial_hash,
            terminal_hash: self.state.economic_hash(),
        };
        self.schedule = schedule;
        self.round += 1;
        if let Some(sink) = self.events.as_mut() {
            sink.flush().map_err(|e| Error::io(&self.event_path, e))?;
        }
        self.state.check_invariants()?;
        Ok(RoundOutput { record, periods })
    }

    /// Everything needed to continue this experiment bit-for-bit.
    pub fn checkpoint(&self) -> Checkpoint {
        let mut c = Checkpoint::new();
        c.put_bytes("config", self.config.to_toml().as_bytes());
        c.put_u64("seed", &[self.seed]);
        c.put_u64("round", &[self.round]);
        c.put_u64("episode", &[self.episode]);
        c.put_u64("env_steps", &[self.env_steps]);
        c.put_f64("anneal.ceiling", &[self.space.ceiling()]);
        c.put_f64("schedule.rates", self.schedule.rates());
        let mut types: Vec<f64> = self.types.iter().map(|t| t.sigma).collect();
        types.extend(self.types.iter().map(|t| t.reported_sigma));
        c.put_f64("types", &types);
        c.put_bytes("state", &self.state.to_bytes());
        c.put_network("follower", &self.follower);
        c.put_adam("follower.adam", &self.follower_opt);
        c.put_network("principal", &self.principal);
        c.put_adam("principal.adam", &self.principal_opt);
        c.put_bytes("rng.sampling", &RngState::capture(&self.sampling_rng).to_bytes());
        c.put_bytes("rng.shuffle", &RngState::capture(&self.shuffle_rng).to_bytes());
        c.put_bytes("rng.principal", &RngState::capture(&self.principal_rng).to_bytes());

        let p = &self.principal_pending;
        c.put_u64("pending.dim", &p.iter().map(|t| t.obs.dim as u64).collect::<Vec<_>>());
        c.put_u64("pending.nnz", &p.iter().map(|t| t.obs.idx.len() as u64).collect::<Vec<_>>());
        c.put_u64(
            "pending.idx",
            &p.iter().flat_map(|t| t.obs.idx.iter().map(|&i| i as u64)).collect::<Vec<_>>(),
        );
        c.put_f64("pending.val", &p.iter().flat_map(|t| t.obs.val.iter().copied()).collect::<Vec<_>>());
        c.put_u64(
            "pending.actions",
            &p.iter().flat_map(|t| t.actions.iter().map(|&a| a as u64)).collect::<Vec<_>>(),
        );
        c.put_f64(
            "pending.scalars",
            &p.iter().flat_map(|t| [t.log_prob, t.value, t.reward]).collect::<Vec<_>>(),
        );
        c
    }

    pub fn from_checkpoint(c: &Checkpoint) -> Result<Self> {
        let text = std::str::from_utf8(c.bytes("config")?)
            .map_err(|_| Error::Checkpoint("embedded config is not UTF-8".into()))?;
        let config = RunConfig::from_toml(text)?;
        let seed = c.u64("seed")?;
        let mut exp = Experiment::new(config, seed)?;
        let n = exp.config.env.n_agents;

        exp.round = c.u64("round")?;
        exp.episode = c.u64("episode")?;
        exp.env_steps = c.u64("env_steps")?;
        exp.schedule = exp.schedule.with_rates(c.f64s("schedule.rates")?.to_vec())?;
        exp.env.set_tax_rates(exp.schedule.rates());
        match c.f64s("anneal.ceiling")? {
            [ceiling] => exp.space.set_ceiling(*ceiling)?,
            _ => return Err(Error::Checkpoint("malformed anneal ceiling".into())),
        }
        let types = c.f64s("types")?;
        if types.len() != 2 * n {
            return Err(Error::Checkpoint(format!("{} type entries for {n} agents", types.len())));
        }
        exp.types = (0..n)
            .map(|i| AgentType::with_report(types[i], types[n + i]))
            .collect::<Result<Vec<_>>>()?;
        exp.state = PomgState::from_bytes(c.bytes("state")?)?;
        if exp.state.n_agents() != n || exp.state.width != exp.config.env.width || exp.state.height != exp.config.env.height
        {
            return Err(Error::Checkpoint("stored state does not match the stored config".into()));
        }

        let follower = c.network("follower")?;
        let principal = c.network("principal")?;
        if follower.shape() != exp.follower.shape() || principal.shape() != exp.principal.shape() {
            return Err(Error::Checkpoint("stored networks do not match the stored config".into()));
        }
        exp.follower = follower;
        exp.principal = principal;
        exp.follower_opt = c.adam("follower.adam")?;
        exp.principal_opt = c.adam("principal.adam")?;
        if exp.follower_opt.m.len() != exp.follower.param_count()
            || exp.principal_opt.m.len() != exp.principal.param_count()
        {
            return Err(Error::Checkpoint("optimizer state does not match its network".into()));
        }
        let rng = |name: &str| -> Result<Rng> {
            RngState::from_bytes(c.bytes(name)?)
                .map(|s| s.restore())
                .ok_or_else(|| Error::Checkpoint(format!("malformed generator state `{name}`")))
        };
        exp.sampling_rng = rng("rng.sampling")?;
        exp.shuffle_rng = rng("rng.shuffle")?;
        exp.principal_rng = rng("rng.principal")?;

        let dims = c.u64s("pending.dim")?;
        let nnz = c.u64s("pending.nnz")?;
        let idx = c.u64s("pending.idx")?;
        let val = c.f64s("pending.val")?;
        let actions = c.u64s("pending.actions")?;
        let scalars = c.f64s("pending.scalars")?;
        let heads = exp.principal.heads().len();
        let total_nnz: u64 = nnz.iter().sum();
        if nnz.len() != dims.len()
            || idx.len() as u64 != total_nnz
            || val.len() as u64 != total_nnz
            || actions.len() != dims.len() * heads
            || scalars.len() != dims.len() * 3
        {
            return Err(Error::Checkpoint("malformed pending principal samples".into()));
        }
        let mut off = 0;
        exp.principal_pending = (0..dims.len())
            .map(|k| {
                let end = off + nnz[k] as usize;
                let obs = Features {
                    dim: dims[k] as usize,
                    idx: idx[off..end].iter().map(|&i| i as u32).collect(),
                    val: val[off..end].to_vec(),
                };
                off = end;
                Transition {
                    agent: 0,
                    obs,
                    actions: actions[k * heads..(k + 1) * heads].iter().map(|&a| a as usize).collect(),
                    log_prob: scalars[3 * k],
                    value: scalars[3 * k + 1],
                    reward: scalars[3 * k + 2],
                    done: true,
                }
            })
            .collect();
        Ok(exp)
    }

    pub fn resume(path: &Path) -> Result<Self> {
        Self::from_checkpoint(&Checkpoint::load(path)?)
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Print the grid after every round.
    pub render: bool,
    pub events: Option<PathBuf>,
    /// Keep per-period rows in memory as well as on disk.
    pub keep_periods: bool,
    /// Suppress progress output.
    pub quiet: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub summary: Summary,
    pub records: Vec<RoundRecord>,
    pub periods: Vec<PeriodRow>,
}

pub fn checkpoint_path(out: &Path, completed_rounds: u64) -> PathBuf {
    out.join("checkpoints").join(format!("round_{completed_rounds:06}.ckpt"))
}

impl Experiment {
    /// Run the remaining rounds, writing outputs under `out`. Output files
    /// are created before any simulation.
    pub fn run(mut self, out: &Path, opts: &RunOptions) -> Result<RunOutcome> {
        let n = self.config.env.n_agents;
        let b = self.schedule.brackets();
        let mut writer = MetricsWriter::create(out, n, b)?;
        let every = self.config.run.checkpoint_every;
        if every > 0 {
            let dir = out.join("checkpoints");
            std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        }
        if let Some(p) = &opts.events {
            self.log_events_to(p)?;
        }

        let first_round = self.round;
        let start_steps = self.env_steps;
        let started = Instant::now();
        let mut records = Vec::new();
        let mut kept = Vec::new();
        while self.round < self.config.run.rounds {
            let RoundOutput { record, periods } = self.run_round()?;
            for row in &periods {
                writer.write_period(row)?;
            }
            writer.write_round(&record)?;
            writer.flush()?;
            if opts.render {
                println!("round {}\n{}", record.round, self.env.render(&self.state));
            }
            if !opts.quiet {
                eprintln!(
                    "round {:>5}  eta {:.3}  phi {:?}  welfare {:.2}",
                    record.round, record.eta, record.phi, record.welfare
                );
            }
            if opts.keep_periods {
                kept.extend(periods);
            }
            records.push(record);
            if every > 0 && self.round.is_multiple_of(every) {
                self.checkpoint().save(&checkpoint_path(out, self.round))?;
            }
        }

        let elapsed = started.elapsed().as_secs_f64();
        let env_steps = self.env_steps - start_steps;
        let mut totals = vec![0u64; n];
        for r in &records {
            totals.iter_mut().zip(&r.totals).for_each(|(t, x)| *t += x);
        }
        let totals_f: Vec<f64> = totals.iter().map(|&t| t as f64).collect();
        let summary = Summary {
            seed: self.seed,
            first_round,
            rounds: records.len() as u64,
            env_steps,
            elapsed_secs: elapsed,
            env_steps_per_sec: if elapsed > 0.0 { env_steps as f64 / elapsed } else { 0.0 },
            welfare: records.iter().map(|r| r.welfare).collect(),
            gini: gini(&totals_f),
            totals,
            final_phi: self.schedule.rates().to_vec(),
        };
        summary.write(out)?;
        Ok(RunOutcome {
            summary,
            records,
            periods: kept,
        })
    }
}

/// Fresh experiment from `config`, run to completion.
pub fn run_experiment(config: &RunConfig, seed: u64, out: &Path, opts: &RunOptions) -> Result<RunOutcome> {
    Experiment::new(config.clone(), seed)?.run(out, opts)
}

/// Per-episode result of a frozen-policy rollout.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalEpisode {
    pub episode: u64,
    pub totals: Vec<u64>,
    pub taxed: Vec<f64>,
    pub apples_left: u64,
    pub welfare: f64,
    pub gini: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub round: u64,
    pub phi: Vec<f64>,
    pub eta: f64,
    pub episodes: Vec<EvalEpisode>,
    pub mean_welfare: f64,
}

impl Experiment {
    /// Roll out `episodes` full episodes with the current policies and the
    /// current tax schedule. Nothing is learned and the experiment itself is
    /// left untouched.
    pub fn evaluate(&self, episodes: u64) -> Result<EvalReport> {
        let n = self.config.env.n_agents;
        let period = self.config.fiscal.tax_period;
        let (objective, _) = self.vote()?;
        let mut env = self.env.clone();
        env.set_tax_rates(self.schedule.rates());
        let mut window = Vec::new();
        let mut ws = Workspace::default();
        let mut obs = Features::default();
        let mut out = Vec::new();
        for e in 0..episodes {
            let seed = mix_seed(self.seed, EVAL_SALT + e);
            let mut state = env.reset(seed)?;
            let mut rng = stream_rng(seed, stream::POLICY_SAMPLING);
            let mut taxed = vec![0.0; n];
            let mut totals = vec![0u64; n];
            for _ in 0..self.config.env.episode_length {
                let mut actions = Vec::with_capacity(n);
                for agent in 0..n {
                    self.follower_enc.encode(&env, &state, agent, period, &mut window, &mut obs);
                    let a = self.follower.forward_with(&obs, &mut ws)?.sample(&mut rng);
                    actions.push(Action::from_index(a[0]).expect("policy head matches the action set"));
                }
                env.step(&mut state, &actions)?;
                if state.step_clock % period == 0 {
                    let s = apply_tax_period(&mut state, &self.schedule, period)?;
                    taxed.iter_mut().zip(&s.taxed).for_each(|(t, x)| *t += x);
                }
            }
            totals.iter_mut().zip(&state.apples_this_round).for_each(|(t, x)| *t += x);
            let tf: Vec<f64> = totals.iter().map(|&t| t as f64).collect();
            out.push(EvalEpisode {
                episode: e,
                welfare: objective.value(&tf)?,
                gini: gini(&tf),
                apples_left: state.apple_count(),
                totals,
                taxed,
            });
        }
        let mean_welfare = if out.is_empty() {
            0.0
        } else {
            out.iter().map(|e| e.welfare).sum::<f64>() / out.len() as f64
        };
        Ok(EvalReport {
            round: self.round,
            phi: self.schedule.rates().to_vec(),
            eta: objective.eta(),
            episodes: out,
            mean_welfare,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> RunConfig {
        let mut c = RunConfig::default();
        c.env.width = 10;
        c.env.height = 8;
        c.env.n_agents = 3;
        c.env.initial_apples = 20;
        c.env.apple_clusters = 2;
        c.env.episode_length = 100;
        c.fiscal.tax_period = 25;
        c.run.periods_per_round = 2;
        c.run.rounds = 4;
        c.learning.sampling_horizon = 50;
        c.learning.hidden = vec![8];
        c.learning.principal_hidden = vec![8];
        c.learning.follower.minibatch = 64;
        c.learning.principal_update_rounds = 2;
        c.learning.anneal.tax_free_rounds = 1;
        c.learning.anneal.anneal_rounds = 2;
        c
    }

    #[test]
    fn rounds_chain_and_settle() {
        let mut exp = Experiment::new(tiny(), 1).unwrap();
        let mut prev: Option<u64> = None;
        for _ in 0..4 {
            let out = exp.run_round().unwrap();
            let rec = &out.record;
            if let Some(h) = prev {
                assert_eq!(h, rec.initial_hash);
            }
            prev = Some(rec.terminal_hash);
            assert_eq!(out.periods.len(), 2 * 3);
            let apples: f64 = out.periods.iter().map(|p| p.apples).sum();
            let rewards: f64 = out.periods.iter().map(|p| p.mixed_reward).sum();
            assert_eq!(apples, rec.totals.iter().sum::<u64>() as f64);
            assert!(rewards >= apples - 1e-9);
            assert!(rec.phi.iter().all(|&p| p <= rec.ceiling));
        }
        assert_eq!(exp.round(), 4);
        assert_eq!(exp.episode, 2);
    }

    #[test]
    fn checkpoint_round_trip_is_byte_identical() {
        let mut exp = Experiment::new(tiny(), 2).unwrap();
        exp.run_round().unwrap();
        let bytes = exp.checkpoint().to_bytes();
        let back = Experiment::from_checkpoint(&Checkpoint::from_bytes(&bytes).unwrap()).unwrap();
        let again = back.checkpoint().to_bytes();
        assert!(again == bytes, "first difference at byte {:?}", again.iter().zip(&bytes).position(|(a, b)| a != b));
        assert_eq!(back.principal_pending.len(), 1);
    }

    #[test]
    fn resumed_rounds_match() {
        let mut a = Experiment::new(tiny(), 3).unwrap();
        a.run_round().unwrap();
        let mut b = Experiment::from_checkpoint(&a.checkpoint()).unwrap();
        for _ in 0..3 {
            assert_eq!(a.run_round().unwrap(), b.run_round().unwrap());
        }
    }

    #[test]
    fn errors_carry_the_round() {
        let mut exp = Experiment::new(tiny(), 4).unwrap();
        exp.run_round().unwrap();
        // A mid-period clock makes the levy land off its boundary.
        exp.state.step_clock += 1;
        match exp.run_round() {
            Err(Error::Round { round, .. }) => assert_eq!(round, 1),
            other => panic!("expected a round error, got {:?}", other.map(|o| o.record.round)),
        }
    }

    #[test]
    fn evaluation_is_repeatable() {
        let exp = Experiment::new(tiny(), 5).unwrap();
        let a = exp.evaluate(2).unwrap();
        assert_eq!(a, exp.evaluate(2).unwrap());
        assert_eq!(a.episodes.len(), 2);
    }
}
