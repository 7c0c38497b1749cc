//! Per-agent orders and their position in the network's output layer.

use std::fmt;

use crate::error::{Error, Result};

/// What one agent was told to do this tick.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Order {
    /// Stop and wait for assistance (`j = 0`).
    Wait,
    /// SLAM on its own (`j = i`).
    Independent,
    /// Assist another agent, 0-based id.
    Assist(usize),
}

/// Orders for all agents. Targets use the network's convention: `0` waits,
/// `1..=m` names an agent, and an agent naming itself works independently.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Assignment {
    targets: Vec<usize>,
}

impl Assignment {
    pub fn new(targets: Vec<usize>) -> Result<Self> {
        let m = targets.len();
        if let Some(bad) = targets.iter().find(|j| **j > m) {
            return Err(Error::InvalidArgument(format!("target {bad} out of range 0..={m}")));
        }
        Ok(Self { targets })
    }

    /// Everyone works independently.
    pub fn independent(m: usize) -> Self {
        Self {
            targets: (1..=m).collect(),
        }
    }

    pub fn from_orders(orders: &[Order]) -> Self {
        let targets = orders
            .iter()
            .enumerate()
            .map(|(i, o)| match o {
                Order::Wait => 0,
                Order::Independent => i + 1,
                Order::Assist(k) => k + 1,
            })
            .collect();
        Self { targets }
    }

    pub fn agents(&self) -> usize {
        self.targets.len()
    }

    /// Raw `j` of agent `i` (0-based agent).
    pub fn target(&self, agent: usize) -> usize {
        self.targets[agent]
    }

    pub fn targets(&self) -> &[usize] {
        &self.targets
    }

    pub fn order(&self, agent: usize) -> Order {
        match self.targets[agent] {
            0 => Order::Wait,
            j if j == agent + 1 => Order::Independent,
            j => Order::Assist(j - 1),
        }
    }

    pub fn orders(&self) -> Vec<Order> {
        (0..self.agents()).map(|i| self.order(i)).collect()
    }

    pub fn is_waiting(&self, agent: usize) -> bool {
        self.targets[agent] == 0
    }
}

impl fmt::Display for Assignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.targets.iter().map(usize::to_string).collect();
        write!(f, "{}", parts.join(" "))
    }
}

/// 0-based output index of agent `i` (1-based) taking action `j`: `(i-1)(m+1)+j`.
pub fn encode_action(i: usize, j: usize, m: usize) -> Result<usize> {
    if i < 1 || i > m || j > m {
        return Err(Error::InvalidArgument(format!("action ({i}, {j}) out of range for m = {m}")));
    }
    Ok((i - 1) * (m + 1) + j)
}

/// Inverse of [`encode_action`].
pub fn decode_action(index: usize, m: usize) -> Result<(usize, usize)> {
    if index >= m * (m + 1) {
        return Err(Error::InvalidArgument(format!("output index {index} out of range for m = {m}")));
    }
    Ok((index / (m + 1) + 1, index % (m + 1)))
}
