//! Trajectory error metrics pooled over every (tick, agent) sample.

use crate::error::{Error, Result};
use crate::geometry::{rotation_angle, Pose3};

/// True and estimated pose of every agent at every tick.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrajectoryLog {
    agents: usize,
    truth: Vec<Vec<Pose3>>,
    estimate: Vec<Vec<Pose3>>,
}

impl TrajectoryLog {
    pub fn new(agents: usize) -> Self {
        Self {
            agents,
            ..Self::default()
        }
    }

    pub fn push(&mut self, truth: Vec<Pose3>, estimate: Vec<Pose3>) -> Result<()> {
        if truth.len() != self.agents || estimate.len() != self.agents {
            return Err(Error::InvalidArgument(format!(
                "tick has {} true and {} estimated poses for {} agents",
                truth.len(),
                estimate.len(),
                self.agents
            )));
        }
        self.truth.push(truth);
        self.estimate.push(estimate);
        Ok(())
    }

    pub fn agents(&self) -> usize {
        self.agents
    }

    pub fn ticks(&self) -> usize {
        self.truth.len()
    }

    pub fn is_empty(&self) -> bool {
        self.truth.is_empty() || self.agents == 0
    }

    /// `(truth, estimate)` of `agent` at 0-based tick index `t`.
    pub fn sample(&self, t: usize, agent: usize) -> (&Pose3, &Pose3) {
        (&self.truth[t][agent], &self.estimate[t][agent])
    }

    fn pooled(&self, f: impl Fn(&Pose3, &Pose3) -> f64) -> Result<f64> {
        if self.is_empty() {
            return Err(Error::InvalidArgument("empty trajectory log".into()));
        }
        let mut sum = 0.0;
        for (truth, est) in self.truth.iter().zip(&self.estimate) {
            for (a, b) in truth.iter().zip(est) {
                sum += f(a, b).powi(2);
            }
        }
        Ok((sum / (self.ticks() * self.agents) as f64).sqrt())
    }

    fn per_agent(&self, agent: usize, f: impl Fn(&Pose3, &Pose3) -> f64) -> Result<f64> {
        if self.is_empty() || agent >= self.agents {
            return Err(Error::InvalidArgument("empty trajectory log or agent out of range".into()));
        }
        let sum: f64 = (0..self.ticks()).map(|t| f(&self.truth[t][agent], &self.estimate[t][agent]).powi(2)).sum();
        Ok((sum / self.ticks() as f64).sqrt())
    }
}

fn position_error(truth: &Pose3, est: &Pose3) -> f64 {
    (est.translation - truth.translation).norm()
}

fn rotation_error_deg(truth: &Pose3, est: &Pose3) -> f64 {
    rotation_angle(&(est.rotation.transpose() * truth.rotation)).to_degrees()
}

/// Pooled position RMSE (m).
pub fn transition_rmse(log: &TrajectoryLog) -> Result<f64> {
    log.pooled(position_error)
}

/// Pooled geodesic rotation RMSE (deg).
pub fn orientation_rmse(log: &TrajectoryLog) -> Result<f64> {
    log.pooled(rotation_error_deg)
}

/// Position RMSE of one agent over all ticks (m).
pub fn agent_transition_rmse(log: &TrajectoryLog, agent: usize) -> Result<f64> {
    log.per_agent(agent, position_error)
}

pub fn agent_orientation_rmse(log: &TrajectoryLog, agent: usize) -> Result<f64> {
    log.per_agent(agent, rotation_error_deg)
}
