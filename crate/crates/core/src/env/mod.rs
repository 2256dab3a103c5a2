//! The harvest commons gridworld.
//!
//! Agents walk a rectangular grid, pick apples by stepping onto them, and see
//! only an egocentric window. Empty apple cells regrow with a probability
//! that depends on how many apples are nearby; a patch with no apples left
//! never comes back.

mod config;
mod state;

use std::io::Write;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::Serialize;

pub use config::{GridConfig, ViewExtents};
pub use state::{Action, Orientation, PomgState, Pose};

use crate::error::{Error, Result};
use crate::rng::{stream, stream_rng};

/// Contents of one observed cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CellView {
    Empty,
    Apple,
    Agent,
    OutOfBounds,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentObservation {
    pub rows: usize,
    pub cols: usize,
    /// Row-major; row 0 is farthest forward, column 0 is farthest left.
    pub window: Vec<CellView>,
    pub period_tally: u64,
    pub tax_rates: Vec<f64>,
}

impl AgentObservation {
    pub fn at(&self, row: usize, col: usize) -> CellView {
        self.window[row * self.cols + col]
    }
}

/// What the principal sees: the full grid and every agent's running tallies.
#[derive(Debug, Clone, PartialEq)]
pub struct PrincipalView {
    pub width: usize,
    pub height: usize,
    pub apples: Vec<bool>,
    pub poses: Vec<Pose>,
    pub apples_this_period: Vec<u64>,
    pub apples_this_round: Vec<u64>,
    pub collected_total: Vec<u64>,
}

/// One line of the optional event log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    Move { step: u64, agent: usize, from: [usize; 2], to: [usize; 2] },
    Blocked { step: u64, agent: usize, target: [i64; 2] },
    Collect { step: u64, agent: usize, cell: [usize; 2] },
    Respawn { step: u64, cell: [usize; 2] },
}

/// Write events as line-delimited JSON.
pub fn write_events(out: &mut impl Write, events: &[Event]) -> std::io::Result<()> {
    for e in events {
        serde_json::to_writer(&mut *out, e)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepOutcome {
    pub collected: Vec<u32>,
}

/// The gridworld dynamics plus the tax rates currently in force, which
/// agents can observe.
#[derive(Debug, Clone)]
pub struct HarvestEnv {
    config: GridConfig,
    neighbourhood: Vec<(i64, i64)>,
    tax_rates: Vec<f64>,
}

impl HarvestEnv {
    pub fn new(config: GridConfig) -> Result<Self> {
        config.validate("env.")?;
        let r = config.respawn_radius;
        let reach = r.floor() as i64;
        let mut neighbourhood = Vec::new();
        for dy in -reach..=reach {
            for dx in -reach..=reach {
                if (dx, dy) != (0, 0) && ((dx * dx + dy * dy) as f64) <= r * r {
                    neighbourhood.push((dx, dy));
                }
            }
        }
        Ok(HarvestEnv {
            config,
            neighbourhood,
            tax_rates: Vec::new(),
        })
    }

    pub fn config(&self) -> &GridConfig {
        &self.config
    }

    pub fn tax_rates(&self) -> &[f64] {
        &self.tax_rates
    }

    pub fn set_tax_rates(&mut self, rates: &[f64]) {
        self.tax_rates.clear();
        self.tax_rates.extend_from_slice(rates);
    }

    /// Fresh state for `seed`: apples laid out, agents on distinct
    /// apple-free cells, clocks and tallies at zero.
    pub fn reset(&self, seed: u64) -> Result<PomgState> {
        let c = &self.config;
        let mut rng = stream_rng(seed, stream::ENV);
        let cells = c.width * c.height;
        let mut apples = vec![false; cells];
        match &c.apple_cells {
            Some(list) => {
                for &[x, y] in list {
                    apples[y * c.width + x] = true;
                }
            }
            None => self.place_clusters(&mut apples, &mut rng),
        }
        let mut free: Vec<usize> = (0..cells).filter(|&i| !apples[i]).collect();
        if free.len() < c.n_agents {
            return Err(Error::Capacity(format!(
                "{} agents but only {} apple-free cells",
                c.n_agents,
                free.len()
            )));
        }
        free.shuffle(&mut rng);
        let poses = free[..c.n_agents]
            .iter()
            .map(|&i| Pose {
                x: i % c.width,
                y: i / c.width,
                orientation: Orientation::ALL[rng.random_range(0..4)],
            })
            .collect();
        let n = c.n_agents;
        Ok(PomgState {
            width: c.width,
            height: c.height,
            apple_capable: apples.clone(),
            initial_apples: apples.iter().filter(|&&a| a).count() as u64,
            apples,
            poses,
            apples_this_period: vec![0; n],
            apples_this_round: vec![0; n],
            collected_total: vec![0; n],
            respawned_total: 0,
            step_clock: 0,
            rng,
        })
    }

    /// Fill `apples` with `initial_apples` cells grouped into seeded discs.
    /// Cluster centres are drawn one per vertical strip.
    fn place_clusters(&self, apples: &mut [bool], rng: &mut crate::rng::Rng) {
        let c = &self.config;
        let k = c.apple_clusters.max(1);
        let strip = (c.width as f64) / k as f64;
        let mut placed = 0;
        for cluster in 0..k {
            let want = c.initial_apples / k + usize::from(cluster < c.initial_apples % k);
            let lo = (cluster as f64 * strip).floor() as usize;
            let hi = (((cluster + 1) as f64 * strip).floor() as usize).clamp(lo + 1, c.width);
            let cx = rng.random_range(lo..hi) as f64;
            let cy = rng.random_range(0..c.height) as f64;
            let mut order: Vec<usize> = (0..apples.len()).filter(|&i| !apples[i]).collect();
            let dist = |i: usize| {
                let dx = (i % c.width) as f64 - cx;
                let dy = (i / c.width) as f64 - cy;
                dx * dx + dy * dy
            };
            order.sort_by(|&a, &b| dist(a).total_cmp(&dist(b)).then(a.cmp(&b)));
            for &i in order.iter().take(want) {
                apples[i] = true;
                placed += 1;
            }
        }
        debug_assert_eq!(placed, c.initial_apples);
    }

    pub fn step(&self, state: &mut PomgState, actions: &[Action]) -> Result<StepOutcome> {
        self.step_logged(state, actions, None)
    }

    /// Advance one step. Agents act one at a time in a freshly shuffled
    /// priority order, so the first mover wins a contested cell. Entering an
    /// apple cell collects it; regrowth runs after all moves.
    pub fn step_logged(
        &self,
        state: &mut PomgState,
        actions: &[Action],
        mut log: Option<&mut Vec<Event>>,
    ) -> Result<StepOutcome> {
        let n = state.n_agents();
        if actions.len() != n {
            return Err(Error::invalid(format!("{} actions for {n} agents", actions.len())));
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut state.rng);
        let mut collected = vec![0u32; n];
        let t = state.step_clock;
        for &i in &order {
            let pose = state.poses[i];
            let (dx, dy) = match actions[i] {
                Action::Noop => continue,
                Action::TurnLeft => {
                    state.poses[i].orientation = pose.orientation.turn_left();
                    continue;
                }
                Action::TurnRight => {
                    state.poses[i].orientation = pose.orientation.turn_right();
                    continue;
                }
                Action::Forward => pose.orientation.forward(),
                Action::Backward => {
                    let (fx, fy) = pose.orientation.forward();
                    (-fx, -fy)
                }
                Action::StrafeRight => pose.orientation.right(),
                Action::StrafeLeft => {
                    let (rx, ry) = pose.orientation.right();
                    (-rx, -ry)
                }
            };
            let tx = pose.x as i64 + dx;
            let ty = pose.y as i64 + dy;
            let in_bounds = tx >= 0 && ty >= 0 && (tx as usize) < state.width && (ty as usize) < state.height;
            if !in_bounds || state.agent_at(tx as usize, ty as usize).is_some() {
                if let Some(log) = log.as_deref_mut() {
                    log.push(Event::Blocked { step: t, agent: i, target: [tx, ty] });
                }
                continue;
            }
            let (tx, ty) = (tx as usize, ty as usize);
            state.poses[i].x = tx;
            state.poses[i].y = ty;
            if let Some(log) = log.as_deref_mut() {
                log.push(Event::Move { step: t, agent: i, from: [pose.x, pose.y], to: [tx, ty] });
            }
            let cell = state.cell(tx, ty);
            if state.apples[cell] {
                state.apples[cell] = false;
                collected[i] += 1;
                state.apples_this_period[i] += 1;
                state.apples_this_round[i] += 1;
                state.collected_total[i] += 1;
                if let Some(log) = log.as_deref_mut() {
                    log.push(Event::Collect { step: t, agent: i, cell: [tx, ty] });
                }
            }
        }
        self.respawn_update(state, log);
        state.step_clock += 1;
        Ok(StepOutcome { collected })
    }

    /// Apples within the regrowth radius of `(x, y)`, excluding the cell itself.
    pub fn neighbour_apples(&self, state: &PomgState, x: usize, y: usize) -> usize {
        self.neighbourhood
            .iter()
            .filter(|&&(dx, dy)| {
                let nx = x as i64 + dx;
                let ny = y as i64 + dy;
                nx >= 0
                    && ny >= 0
                    && (nx as usize) < state.width
                    && (ny as usize) < state.height
                    && state.apples[ny as usize * state.width + nx as usize]
            })
            .count()
    }

    /// Regrow apples. Every empty, unoccupied apple-capable cell regrows
    /// independently with the probability for its neighbour count, counted
    /// on the grid as it stood before this update.
    pub fn respawn_update(&self, state: &mut PomgState, mut log: Option<&mut Vec<Event>>) {
        let w = state.width;
        let mut grow = Vec::new();
        for cell in 0..state.apples.len() {
            if !state.apple_capable[cell] || state.apples[cell] {
                continue;
            }
            let (x, y) = (cell % w, cell / w);
            let p = self.config.respawn_probability(self.neighbour_apples(state, x, y));
            if p <= 0.0 || state.agent_at(x, y).is_some() {
                continue;
            }
            if state.rng.random::<f64>() < p {
                grow.push(cell);
            }
        }
        for cell in grow {
            state.apples[cell] = true;
            state.respawned_total += 1;
            if let Some(log) = log.as_deref_mut() {
                log.push(Event::Respawn { step: state.step_clock, cell: [cell % w, cell / w] });
            }
        }
    }

    /// Fill `window` (row-major, `rows * cols`) with agent `agent`'s view.
    pub fn window_into(&self, state: &PomgState, agent: usize, window: &mut [CellView]) {
        let v = self.config.view;
        let pose = state.poses[agent];
        let (fx, fy) = pose.orientation.forward();
        let (rx, ry) = pose.orientation.right();
        let cols = v.cols();
        for row in 0..v.rows() {
            let ahead = v.forward as i64 - row as i64;
            for col in 0..cols {
                let side = col as i64 - v.left as i64;
                let x = pose.x as i64 + ahead * fx + side * rx;
                let y = pose.y as i64 + ahead * fy + side * ry;
                window[row * cols + col] =
                    if x < 0 || y < 0 || x as usize >= state.width || y as usize >= state.height {
                        CellView::OutOfBounds
                    } else if state.agent_at(x as usize, y as usize).is_some() {
                        CellView::Agent
                    } else if state.apples[y as usize * state.width + x as usize] {
                        CellView::Apple
                    } else {
                        CellView::Empty
                    };
            }
        }
    }

    pub fn observe(&self, state: &PomgState, agent: usize) -> Result<AgentObservation> {
        if agent >= state.n_agents() {
            return Err(Error::invalid(format!("agent {agent} out of range")));
        }
        let v = self.config.view;
        let mut window = vec![CellView::Empty; v.rows() * v.cols()];
        self.window_into(state, agent, &mut window);
        Ok(AgentObservation {
            rows: v.rows(),
            cols: v.cols(),
            window,
            period_tally: state.apples_this_period[agent],
            tax_rates: self.tax_rates.clone(),
        })
    }

    /// `visible[i][j]`: agent `j` lies inside agent `i`'s window.
    pub fn visibility(&self, state: &PomgState) -> Vec<Vec<bool>> {
        let v = self.config.view;
        state
            .poses
            .iter()
            .map(|p| {
                let (fx, fy) = p.orientation.forward();
                let (rx, ry) = p.orientation.right();
                state
                    .poses
                    .iter()
                    .map(|q| {
                        let dx = q.x as i64 - p.x as i64;
                        let dy = q.y as i64 - p.y as i64;
                        let ahead = dx * fx + dy * fy;
                        let side = dx * rx + dy * ry;
                        (-(v.backward as i64)..=v.forward as i64).contains(&ahead)
                            && (-(v.left as i64)..=v.right as i64).contains(&side)
                    })
                    .collect()
            })
            .collect()
    }

    pub fn principal_observe(&self, state: &PomgState) -> PrincipalView {
        PrincipalView {
            width: state.width,
            height: state.height,
            apples: state.apples.clone(),
            poses: state.poses.clone(),
            apples_this_period: state.apples_this_period.clone(),
            apples_this_round: state.apples_this_round.clone(),
            collected_total: state.collected_total.clone(),
        }
    }

    /// ASCII picture: `*` apple, `.` empty, agents as `0-9a-z`.
    pub fn render(&self, state: &PomgState) -> String {
        let mut s = String::with_capacity((state.width + 1) * state.height);
        for y in 0..state.height {
            for x in 0..state.width {
                let ch = match state.agent_at(x, y) {
                    Some(i) => std::char::from_digit((i % 36) as u32, 36).unwrap_or('?'),
                    None if state.apples[state.cell(x, y)] => '*',
                    None => '.',
                };
                s.push(ch);
            }
            s.push('\n');
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env() -> HarvestEnv {
        HarvestEnv::new(GridConfig::default()).unwrap()
    }

    fn small(apples: Vec<[usize; 2]>, n_agents: usize) -> HarvestEnv {
        HarvestEnv::new(GridConfig {
            width: 9,
            height: 9,
            n_agents,
            initial_apples: apples.len(),
            apple_cells: Some(apples),
            ..GridConfig::default()
        })
        .unwrap()
    }

    fn place(state: &mut PomgState, agent: usize, x: usize, y: usize, o: Orientation) {
        state.poses[agent] = Pose { x, y, orientation: o };
    }

    #[test]
    fn reset_is_deterministic_with_64_apples() {
        let e = env();
        let a = e.reset(0).unwrap();
        let b = e.reset(0).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.apple_count(), 64);
        assert_eq!(a.apple_capable.iter().filter(|&&c| c).count(), 64);
        a.check_invariants().unwrap();
        for p in &a.poses {
            assert!(!a.apples[a.cell(p.x, p.y)]);
        }
        assert_ne!(e.reset(1).unwrap().economic_hash(), a.economic_hash());
    }

    #[test]
    fn reset_without_apples() {
        let e = HarvestEnv::new(GridConfig { initial_apples: 0, ..GridConfig::default() }).unwrap();
        let s = e.reset(3).unwrap();
        assert_eq!(s.apple_count(), 0);
        s.check_invariants().unwrap();
    }

    #[test]
    fn too_many_agents_is_a_capacity_error() {
        let cfg = GridConfig {
            width: 3,
            height: 3,
            n_agents: 2,
            initial_apples: 8,
            apple_clusters: 1,
            ..GridConfig::default()
        };
        assert!(matches!(HarvestEnv::new(cfg), Err(Error::Config { .. })));
    }

    #[test]
    fn idle_step_on_bare_grid_only_advances_clock() {
        let e = small(vec![], 3);
        let mut s = e.reset(5).unwrap();
        let before = s.clone();
        e.step(&mut s, &[Action::Noop; 3]).unwrap();
        assert_eq!(s.step_clock, 1);
        assert_eq!(s.apples, before.apples);
        assert_eq!(s.poses, before.poses);
        assert_eq!(s.collected_total, before.collected_total);
    }

    #[test]
    fn stepping_onto_apple_collects_it() {
        let e = small(vec![[4, 3]], 1);
        let mut s = e.reset(0).unwrap();
        place(&mut s, 0, 4, 4, Orientation::North);
        let out = e.step(&mut s, &[Action::Forward]).unwrap();
        assert_eq!(out.collected, vec![1]);
        assert_eq!(s.apples_this_period, vec![1]);
        assert_eq!(s.apples_this_round, vec![1]);
        assert!(!s.apples[s.cell(4, 3)]);
        assert!(s.apples_conserved());
    }

    #[test]
    fn wrong_action_count_rejected() {
        let e = small(vec![], 2);
        let mut s = e.reset(0).unwrap();
        assert!(e.step(&mut s, &[Action::Noop]).is_err());
    }

    #[test]
    fn walls_block_movement() {
        let e = small(vec![], 1);
        let mut s = e.reset(0).unwrap();
        place(&mut s, 0, 0, 0, Orientation::North);
        e.step(&mut s, &[Action::Forward]).unwrap();
        assert_eq!((s.poses[0].x, s.poses[0].y), (0, 0));
        e.step(&mut s, &[Action::StrafeLeft]).unwrap();
        assert_eq!((s.poses[0].x, s.poses[0].y), (0, 0));
        e.step(&mut s, &[Action::StrafeRight]).unwrap();
        assert_eq!((s.poses[0].x, s.poses[0].y), (1, 0));
        e.step(&mut s, &[Action::TurnRight]).unwrap();
        assert_eq!(s.poses[0].orientation, Orientation::East);
        e.step(&mut s, &[Action::Backward]).unwrap();
        assert_eq!((s.poses[0].x, s.poses[0].y), (0, 0));
    }

    #[test]
    fn contested_cell_goes_to_first_in_priority() {
        let e = small(vec![], 2);
        let mut winners = [0usize; 2];
        for seed in 0..64 {
            let run = || {
                let mut s = e.reset(seed).unwrap();
                place(&mut s, 0, 3, 4, Orientation::East);
                place(&mut s, 1, 5, 4, Orientation::West);
                // replay the priority draw the step is about to make
                let mut probe = s.rng.clone();
                let mut order = [0usize, 1];
                order.shuffle(&mut probe);
                e.step(&mut s, &[Action::Forward, Action::Forward]).unwrap();
                let moved: Vec<usize> = (0..2).filter(|&i| s.poses[i].x == 4).collect();
                (moved, order[0])
            };
            let (moved, first) = run();
            assert_eq!(moved, vec![first], "seed {seed}");
            assert_eq!(run().0, moved);
            winners[first] += 1;
        }
        assert!(winners[0] > 0 && winners[1] > 0);
    }

    #[test]
    fn respawn_endpoints() {
        let e = env();
        assert_eq!(e.config().respawn_probability(0), 0.0);
        assert_eq!(e.config().respawn_probability(3), 0.025);
        assert_eq!(e.config().respawn_probability(4), 0.025);
        assert_eq!(e.config().respawn_probability(12), 0.025);
        assert_eq!(e.config().respawn_probability(1), 0.0025);
        assert_eq!(e.config().respawn_probability(2), 0.005);
    }

    #[test]
    fn neighbourhood_is_euclidean_radius_two() {
        let e = env();
        assert_eq!(e.neighbourhood.len(), 12);
        assert!(e.neighbourhood.contains(&(2, 0)));
        assert!(!e.neighbourhood.contains(&(2, 1)));
    }

    #[test]
    fn isolated_cell_never_regrows() {
        // Two far-apart apple cells; harvest one, the other stays out of range.
        let e = small(vec![[1, 1], [7, 7]], 1);
        let mut s = e.reset(0).unwrap();
        place(&mut s, 0, 1, 2, Orientation::North);
        e.step(&mut s, &[Action::Forward]).unwrap();
        e.step(&mut s, &[Action::Backward]).unwrap();
        for _ in 0..5000 {
            e.step(&mut s, &[Action::Noop]).unwrap();
        }
        assert!(!s.apples[s.cell(1, 1)]);
        assert_eq!(s.respawned_total, 0);
    }

    #[test]
    fn dense_patch_regrows() {
        let cells: Vec<[usize; 2]> = (2..7).flat_map(|x| (2..7).map(move |y| [x, y])).collect();
        let e = small(cells, 1);
        let mut s = e.reset(0).unwrap();
        place(&mut s, 0, 0, 0, Orientation::North);
        let c = s.cell(4, 4);
        s.apples[c] = false;
        s.collected_total[0] = 1;
        for _ in 0..2000 {
            e.step(&mut s, &[Action::Noop]).unwrap();
        }
        assert!(s.apples[s.cell(4, 4)]);
        assert_eq!(s.respawned_total, 1);
        assert!(s.apples_conserved());
    }

    #[test]
    fn window_orientation_convention() {
        let e = small(vec![[4, 1]], 2);
        let mut s = e.reset(0).unwrap();
        place(&mut s, 0, 4, 4, Orientation::North);
        place(&mut s, 1, 4, 5, Orientation::North);
        let o = e.observe(&s, 0).unwrap();
        assert_eq!((o.rows, o.cols), (11, 11));
        assert_eq!(o.window.len(), 121);
        // apple three ahead, agent one behind, self in the centre column
        assert_eq!(o.at(9 - 3, 5), CellView::Apple);
        assert_eq!(o.at(10, 5), CellView::Agent);
        assert_eq!(o.at(9, 5), CellView::Agent);
        // row 0 is nine cells ahead: y = -5, outside the grid
        assert_eq!(o.at(0, 5), CellView::OutOfBounds);
        assert_eq!(o.at(9, 1), CellView::Empty);
        assert_eq!(o.at(9, 0), CellView::OutOfBounds);
        assert!(e.observe(&s, 2).is_err());
    }

    #[test]
    fn rotated_scenes_give_identical_windows() {
        // Rotate a square scene by 90 degrees clockwise: (x, y) -> (8 - y, x).
        let rot = |[x, y]: [usize; 2]| [8 - y, x];
        let apples = vec![[4, 1], [2, 4], [6, 5]];
        let mut scenes = Vec::new();
        let mut cells = apples.clone();
        let mut agents = vec![[4, 4], [3, 2]];
        let mut o = Orientation::North;
        for _ in 0..4 {
            let e = small(cells.clone(), 2);
            let mut s = e.reset(0).unwrap();
            place(&mut s, 0, agents[0][0], agents[0][1], o);
            place(&mut s, 1, agents[1][0], agents[1][1], Orientation::South);
            scenes.push(e.observe(&s, 0).unwrap().window);
            cells = cells.into_iter().map(rot).collect();
            agents = agents.into_iter().map(rot).collect();
            o = o.turn_right();
        }
        for w in &scenes[1..] {
            assert_eq!(w, &scenes[0]);
        }
    }

    #[test]
    fn visibility_matches_window() {
        let e = env();
        let mut s = e.reset(11).unwrap();
        for _ in 0..20 {
            let acts: Vec<Action> = (0..7).map(|i| Action::ALL[(i + s.step_clock as usize) % 7]).collect();
            e.step(&mut s, &acts).unwrap();
            let vis = e.visibility(&s);
            for i in 0..7 {
                let o = e.observe(&s, i).unwrap();
                let seen = o.window.iter().filter(|c| **c == CellView::Agent).count();
                assert_eq!(seen, vis[i].iter().filter(|&&v| v).count());
            }
        }
    }

    #[test]
    fn principal_view_exposes_tallies() {
        let e = small(vec![[4, 3], [4, 2], [4, 1]], 1);
        let mut s = e.reset(0).unwrap();
        assert_eq!(e.principal_observe(&s).apples_this_round, vec![0]);
        place(&mut s, 0, 4, 4, Orientation::North);
        for _ in 0..3 {
            e.step(&mut s, &[Action::Forward]).unwrap();
        }
        let v = e.principal_observe(&s);
        assert_eq!(v.apples_this_period, vec![3]);
        assert_eq!(v.collected_total, vec![3]);
    }

    #[test]
    fn state_bytes_round_trip() {
        let e = env();
        let mut s = e.reset(9).unwrap();
        for _ in 0..50 {
            e.step(&mut s, &[Action::Forward; 7]).unwrap();
        }
        let back = PomgState::from_bytes(&s.to_bytes()).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.economic_hash(), s.economic_hash());
    }

    #[test]
    fn render_marks_agents_and_apples() {
        let e = small(vec![[0, 0]], 1);
        let mut s = e.reset(0).unwrap();
        place(&mut s, 0, 1, 0, Orientation::North);
        assert!(e.render(&s).starts_with("*0......."));
    }
}
