//! Social environment design: agents vote on a welfare objective, a
//! principal picks a bracketed tax schedule that parameterizes a harvest
//! commons gridworld, and PPO learners play the induced game. A brute-force
//! Stackelberg oracle for small finite games sits alongside for checking
//! equilibrium claims at desk scale.

pub mod env;
pub mod error;
pub mod fiscal;
pub mod harness;
pub mod marl;
pub mod rng;
pub mod stackelberg;
pub mod welfare;

pub use error::{Error, Result};
