//! Multi-agent SLAM coordination simulator: grid worlds, a drift-based SLAM
//! proxy, relative pose estimation between agents and a dueling double DQN
//! organizer that decides which agents assist which.

pub mod coordinator;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod perception;
pub mod planner;
pub mod relpose;
pub mod rl;
pub mod rng;
pub mod slam;
pub mod world;

pub use error::{Error, Result};
