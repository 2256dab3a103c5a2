use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How far an agent sees in each egocentric direction, in cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ViewExtents {
    pub forward: usize,
    pub right: usize,
    pub backward: usize,
    pub left: usize,
}

impl ViewExtents {
    pub fn rows(&self) -> usize {
        self.forward + self.backward + 1
    }

    pub fn cols(&self) -> usize {
        self.left + self.right + 1
    }
}

impl Default for ViewExtents {
    fn default() -> Self {
        ViewExtents {
            forward: 9,
            right: 5,
            backward: 1,
            left: 5,
        }
    }
}

/// Static description of the harvest gridworld.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub width: usize,
    pub height: usize,
    pub n_agents: usize,
    /// Apples on the grid after reset; also the number of cells that can
    /// ever regrow.
    pub initial_apples: usize,
    /// Number of seeded clusters the initial apples are grouped into.
    pub apple_clusters: usize,
    /// Explicit `[x, y]` apple cells. Overrides the seeded clusters.
    pub apple_cells: Option<Vec<[usize; 2]>>,
    pub episode_length: u64,
    /// Regrowth probability indexed by the number of apples within
    /// `respawn_radius`; the last entry covers all larger counts.
    pub respawn_probabilities: Vec<f64>,
    pub respawn_radius: f64,
    pub view: ViewExtents,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            width: 24,
            height: 15,
            n_agents: 7,
            initial_apples: 64,
            apple_clusters: 4,
            apple_cells: None,
            episode_length: 1000,
            respawn_probabilities: vec![0.0, 0.0025, 0.005, 0.025],
            respawn_radius: 2.0,
            view: ViewExtents::default(),
        }
    }
}

impl GridConfig {
    /// Check every field; errors name the offending key relative to `prefix`.
    pub fn validate(&self, prefix: &str) -> Result<()> {
        let key = |k: &str| format!("{prefix}{k}");
        if self.width == 0 || self.height == 0 {
            return Err(Error::config(key("width"), "grid dimensions must be positive"));
        }
        if self.width > u16::MAX as usize || self.height > u16::MAX as usize {
            return Err(Error::config(key("width"), "grid dimensions must fit in 16 bits"));
        }
        if self.n_agents == 0 {
            return Err(Error::config(key("n_agents"), "need at least one agent"));
        }
        if self.episode_length == 0 {
            return Err(Error::config(key("episode_length"), "must be at least 1"));
        }
        match &self.apple_cells {
            Some(cells) => {
                if cells.len() != self.initial_apples {
                    return Err(Error::config(
                        key("apple_cells"),
                        format!("{} cells listed but initial_apples = {}", cells.len(), self.initial_apples),
                    ));
                }
                let mut seen = std::collections::HashSet::new();
                for &[x, y] in cells {
                    if x >= self.width || y >= self.height {
                        return Err(Error::config(key("apple_cells"), format!("cell [{x}, {y}] outside the grid")));
                    }
                    if !seen.insert((x, y)) {
                        return Err(Error::config(key("apple_cells"), format!("cell [{x}, {y}] listed twice")));
                    }
                }
            }
            None => {
                if self.initial_apples > 0 && self.apple_clusters == 0 {
                    return Err(Error::config(key("apple_clusters"), "need at least one cluster"));
                }
            }
        }
        if self.initial_apples + self.n_agents > self.width * self.height {
            return Err(Error::config(
                key("initial_apples"),
                "apples plus agents exceed the number of grid cells",
            ));
        }
        let probs = &self.respawn_probabilities;
        if probs.is_empty() {
            return Err(Error::config(key("respawn_probabilities"), "must not be empty"));
        }
        if probs[0] != 0.0 {
            return Err(Error::config(
                key("respawn_probabilities"),
                "an apple with no neighbours must never regrow (first entry must be 0)",
            ));
        }
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::config(key("respawn_probabilities"), "probabilities must lie in [0, 1]"));
        }
        if !(self.respawn_radius >= 0.0 && self.respawn_radius.is_finite()) {
            return Err(Error::config(key("respawn_radius"), "must be finite and non-negative"));
        }
        Ok(())
    }

    /// Regrowth probability for an empty cell with `neighbours` apples nearby.
    pub fn respawn_probability(&self, neighbours: usize) -> f64 {
        let last = self.respawn_probabilities.len() - 1;
        self.respawn_probabilities[neighbours.min(last)]
    }
}
