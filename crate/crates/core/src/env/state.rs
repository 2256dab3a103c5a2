use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::rng::{Rng, RngState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Orientation {
    North,
    East,
    South,
    West,
}

impl Orientation {
    pub const ALL: [Orientation; 4] = [
        Orientation::North,
        Orientation::East,
        Orientation::South,
        Orientation::West,
    ];

    /// Unit step "forward" as (dx, dy); y grows downward.
    pub fn forward(self) -> (i64, i64) {
        match self {
            Orientation::North => (0, -1),
            Orientation::East => (1, 0),
            Orientation::South => (0, 1),
            Orientation::West => (-1, 0),
        }
    }

    /// Unit step to the agent's right.
    pub fn right(self) -> (i64, i64) {
        self.turn_right().forward()
    }

    pub fn turn_right(self) -> Self {
        Orientation::ALL[(self as usize + 1) % 4]
    }

    pub fn turn_left(self) -> Self {
        Orientation::ALL[(self as usize + 3) % 4]
    }

    fn code(self) -> u8 {
        self as u8
    }

    fn from_code(c: u8) -> Option<Self> {
        Orientation::ALL.get(c as usize).copied()
    }
}

/// The seven egocentric actions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    Noop,
    Forward,
    Backward,
    StrafeLeft,
    StrafeRight,
    TurnLeft,
    TurnRight,
}

impl Action {
    pub const COUNT: usize = 7;
    pub const ALL: [Action; 7] = [
        Action::Noop,
        Action::Forward,
        Action::Backward,
        Action::StrafeLeft,
        Action::StrafeRight,
        Action::TurnLeft,
        Action::TurnRight,
    ];

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pose {
    pub x: usize,
    pub y: usize,
    pub orientation: Orientation,
}

/// Full economic state of the gridworld. Cells are stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PomgState {
    pub width: usize,
    pub height: usize,
    pub apples: Vec<bool>,
    /// Cells that may hold an apple; only these ever regrow.
    pub apple_capable: Vec<bool>,
    pub poses: Vec<Pose>,
    pub apples_this_period: Vec<u64>,
    pub apples_this_round: Vec<u64>,
    /// Apples collected per agent since reset.
    pub collected_total: Vec<u64>,
    pub respawned_total: u64,
    pub initial_apples: u64,
    pub step_clock: u64,
    pub rng: Rng,
}

const STATE_MAGIC: &[u8; 4] = b"PGS1";

impl PomgState {
    pub fn n_agents(&self) -> usize {
        self.poses.len()
    }

    pub fn cell(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }

    pub fn apple_count(&self) -> u64 {
        self.apples.iter().filter(|&&a| a).count() as u64
    }

    pub fn agent_at(&self, x: usize, y: usize) -> Option<usize> {
        self.poses.iter().position(|p| p.x == x && p.y == y)
    }

    /// Conservation: apples on the grid plus apples collected minus apples
    /// regrown equals the initial count.
    pub fn apples_conserved(&self) -> bool {
        let collected: u64 = self.collected_total.iter().sum();
        self.apple_count() + collected == self.initial_apples + self.respawned_total
    }

    /// Structural invariants: distinct in-bounds poses and period ≤ round tallies.
    pub fn check_invariants(&self) -> Result<()> {
        let n = self.width * self.height;
        if self.apples.len() != n || self.apple_capable.len() != n {
            return Err(Error::Contract("grid vectors do not match dimensions".into()));
        }
        for (i, p) in self.poses.iter().enumerate() {
            if p.x >= self.width || p.y >= self.height {
                return Err(Error::Contract(format!("agent {i} out of bounds")));
            }
            if self.poses[..i].iter().any(|q| q.x == p.x && q.y == p.y) {
                return Err(Error::Contract(format!("agent {i} shares a cell")));
            }
        }
        if self
            .apples_this_period
            .iter()
            .zip(&self.apples_this_round)
            .any(|(p, r)| p > r)
        {
            return Err(Error::Contract("period tally exceeds round tally".into()));
        }
        Ok(())
    }

    /// Canonical byte encoding of everything except the generator.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let n = self.n_agents();
        let mut out = Vec::with_capacity(64 + 2 * self.apples.len() + 48 * n);
        out.extend_from_slice(STATE_MAGIC);
        put_u64(&mut out, self.width as u64);
        put_u64(&mut out, self.height as u64);
        put_u64(&mut out, n as u64);
        out.extend(self.apples.iter().map(|&a| a as u8));
        out.extend(self.apple_capable.iter().map(|&a| a as u8));
        for p in &self.poses {
            put_u64(&mut out, p.x as u64);
            put_u64(&mut out, p.y as u64);
            out.push(p.orientation.code());
        }
        for v in self
            .apples_this_period
            .iter()
            .chain(&self.apples_this_round)
            .chain(&self.collected_total)
        {
            put_u64(&mut out, *v);
        }
        put_u64(&mut out, self.respawned_total);
        put_u64(&mut out, self.initial_apples);
        put_u64(&mut out, self.step_clock);
        out
    }

    /// Stable 64-bit digest of the economic state; the generator is excluded.
    pub fn economic_hash(&self) -> u64 {
        let digest = Sha256::digest(self.canonical_bytes());
        u64::from_le_bytes(digest[..8].try_into().expect("sha256 yields 32 bytes"))
    }

    /// Canonical bytes followed by the generator state.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = self.canonical_bytes();
        out.extend_from_slice(&RngState::capture(&self.rng).to_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::Checkpoint(format!("environment state: {m}"));
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != STATE_MAGIC {
            return Err(bad("bad magic"));
        }
        let width = r.u64()? as usize;
        let height = r.u64()? as usize;
        let n = r.u64()? as usize;
        let cells = width.checked_mul(height).ok_or_else(|| bad("dimension overflow"))?;
        let apples = r.take(cells)?.iter().map(|&b| b != 0).collect();
        let apple_capable = r.take(cells)?.iter().map(|&b| b != 0).collect();
        let mut poses = Vec::with_capacity(n);
        for _ in 0..n {
            let x = r.u64()? as usize;
            let y = r.u64()? as usize;
            let orientation = Orientation::from_code(r.take(1)?[0]).ok_or_else(|| bad("bad orientation"))?;
            poses.push(Pose { x, y, orientation });
        }
        let mut tally = || (0..n).map(|_| r.u64()).collect::<Result<Vec<u64>>>();
        let apples_this_period = tally()?;
        let apples_this_round = tally()?;
        let collected_total = tally()?;
        let respawned_total = r.u64()?;
        let initial_apples = r.u64()?;
        let step_clock = r.u64()?;
        let rng = RngState::from_bytes(r.take(56)?)
            .ok_or_else(|| bad("bad generator state"))?
            .restore();
        if r.pos != bytes.len() {
            return Err(bad("trailing bytes"));
        }
        let state = PomgState {
            width,
            height,
            apples,
            apple_capable,
            poses,
            apples_this_period,
            apples_this_round,
            collected_total,
            respawned_total,
            initial_apples,
            step_clock,
            rng,
        };
        state.check_invariants()?;
        Ok(state)
    }
}

fn put_u64(out: &mut Vec<u8>, v: u64) {
    out.extend_from_slice(&v.to_le_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Checkpoint("environment state truncated".into()))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}
