//! Learning machinery: a small dense policy/value network, GAE, PPO, and the
//! principal's action space.

pub mod buffer;
pub mod checkpoint;
pub mod encode;
pub mod gae;
pub mod net;
pub mod ppo;
pub mod principal;

pub use buffer::{RolloutBuffer, TrainSample, Transition};
pub use gae::gae_advantages;
pub use net::{Adam, Features, PolicyNetwork, PolicyOutput, Workspace};
pub use ppo::{ppo_loss, ppo_update, LossSpec, LossStats, PpoConfig, PpoDiagnostics};
pub use checkpoint::{Checkpoint, Record};
pub use encode::{FollowerEncoder, PrincipalContext, PrincipalEncoder};
pub use principal::{anneal_schedule, principal_select, AnnealConfig, PrincipalActionSpace, PrincipalChoice};
