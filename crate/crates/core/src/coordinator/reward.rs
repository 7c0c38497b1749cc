//! Per-agent reward and assistance outcomes.

use std::fmt;

/// Result of an agent's order over one tick.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Outcome {
    Waiting,
    Independent,
    Approaching,
    Successful,
    Fail,
}

impl Outcome {
    /// Reward factor: +1 on a completed assist, -1 on a failed one, 0 otherwise.
    pub fn epsilon(self) -> f64 {
        match self {
            Outcome::Successful => 1.0,
            Outcome::Fail => -1.0,
            Outcome::Waiting | Outcome::Independent | Outcome::Approaching => 0.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Waiting => "wait",
            Outcome::Independent => "self",
            Outcome::Approaching => "approach",
            Outcome::Successful => "success",
            Outcome::Fail => "fail",
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// `r = -(mu * loss + eps * (1 - mu) * delta)`, where `delta` is the assist
/// target's loss change over the tick (`None` when there is no target).
pub fn reward(loss: f64, delta_target: Option<f64>, mu: f64, outcome: Outcome) -> f64 {
    let assist = delta_target.map_or(0.0, |d| outcome.epsilon() * (1.0 - mu) * d);
    -(mu * loss + assist)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_cases() {
        assert!((reward(0.5, None, 0.5, Outcome::Independent) + 0.25).abs() < 1e-15);
        assert!((reward(0.4, Some(-0.3), 0.5, Outcome::Successful) + 0.05).abs() < 1e-15);
        assert!((reward(0.4, Some(-0.3), 0.5, Outcome::Fail) + 0.35).abs() < 1e-15);
    }

    #[test]
    fn not_reached_ignores_delta() {
        assert_eq!(reward(0.2, Some(-1.0), 0.7, Outcome::Approaching), reward(0.2, None, 0.7, Outcome::Approaching));
    }
}
