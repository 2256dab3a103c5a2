//! Feature encodings for follower and principal observations.
//!
//! Follower layout: three indicator planes over the view window (apple,
//! agent, out-of-bounds; an empty cell is all zeros), then the agent's
//! period tally / 10, the current bracket rates, the position within the tax
//! period, and a one-hot agent id.
//!
//! Principal layout: the apple map, each agent's round tally / 10, the voted
//! η, the previous bracket rates, the anneal ceiling and the position within
//! the episode.

use super::net::Features;
use crate::env::{CellView, HarvestEnv, PomgState};

const TALLY_SCALE: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FollowerEncoder {
    cells: usize,
    n_agents: usize,
    brackets: usize,
}

impl FollowerEncoder {
    pub fn new(env: &HarvestEnv, brackets: usize) -> Self {
        let v = env.config().view;
        FollowerEncoder {
            cells: v.rows() * v.cols(),
            n_agents: env.config().n_agents,
            brackets,
        }
    }

    pub fn dim(&self) -> usize {
        3 * self.cells + 1 + self.brackets + 1 + self.n_agents
    }

    /// Encode agent `agent`'s view into `out`, reusing `window` as scratch.
    pub fn encode(
        &self,
        env: &HarvestEnv,
        state: &PomgState,
        agent: usize,
        tax_period: u64,
        window: &mut Vec<CellView>,
        out: &mut Features,
    ) {
        window.resize(self.cells, CellView::Empty);
        env.window_into(state, agent, window);
        out.dim = self.dim();
        out.idx.clear();
        out.val.clear();
        for (c, cell) in window.iter().enumerate() {
            let plane = match cell {
                CellView::Empty => continue,
                CellView::Apple => 0,
                CellView::Agent => 1,
                CellView::OutOfBounds => 2,
            };
            out.push(plane * self.cells + c, 1.0);
        }
        let mut k = 3 * self.cells;
        out.push(k, state.apples_this_period[agent] as f64 * TALLY_SCALE);
        k += 1;
        for (b, &r) in env.tax_rates().iter().take(self.brackets).enumerate() {
            out.push(k + b, r);
        }
        k += self.brackets;
        out.push(k, (state.step_clock % tax_period) as f64 / tax_period as f64);
        k += 1;
        out.push(k + agent, 1.0);
    }
}

/// Inputs for a principal decision beyond what the state holds.
#[derive(Debug, Clone, Copy)]
pub struct PrincipalContext<'a> {
    pub eta: f64,
    pub previous_rates: &'a [f64],
    pub ceiling: f64,
    pub episode_length: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrincipalEncoder {
    cells: usize,
    n_agents: usize,
    brackets: usize,
}

impl PrincipalEncoder {
    pub fn new(env: &HarvestEnv, brackets: usize) -> Self {
        let c = env.config();
        PrincipalEncoder {
            cells: c.width * c.height,
            n_agents: c.n_agents,
            brackets,
        }
    }

    pub fn dim(&self) -> usize {
        self.cells + self.n_agents + 1 + self.brackets + 2
    }

    pub fn encode(&self, env: &HarvestEnv, state: &PomgState, ctx: PrincipalContext<'_>) -> Features {
        let view = env.principal_observe(state);
        let mut out = Features::new(self.dim());
        for (c, &apple) in view.apples.iter().enumerate() {
            if apple {
                out.push(c, 1.0);
            }
        }
        let mut k = self.cells;
        for (i, &t) in view.apples_this_round.iter().enumerate() {
            out.push(k + i, t as f64 * TALLY_SCALE);
        }
        k += self.n_agents;
        out.push(k, ctx.eta);
        k += 1;
        for (b, &r) in ctx.previous_rates.iter().take(self.brackets).enumerate() {
            out.push(k + b, r);
        }
        k += self.brackets;
        out.push(k, ctx.ceiling);
        out.push(k + 1, (state.step_clock % ctx.episode_length) as f64 / ctx.episode_length as f64);
        out
    }
}
