//! Multi-agent deep Q-learning: network, replay, learner and checkpoints.

pub mod checkpoint;
pub mod dqn;
pub mod network;
pub mod replay;

pub use dqn::{select_actions, td_targets, DqnConfig, DqnLearner, NStepBuffer, Transition};
pub use network::{QNetwork, QValues};
pub use replay::{ReplayBuffer, SumTree};
