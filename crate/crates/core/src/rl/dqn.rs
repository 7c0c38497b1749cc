//! Multi-agent DQN: epsilon-greedy orders, n-step transitions, Double-Q
//! targets and prioritized training steps with SGD momentum.

use std::collections::VecDeque;

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::network::{QNetwork, QValues};
use super::replay::ReplayBuffer;
use crate::coordinator::assignment::Assignment;
use crate::error::{Error, Result};
use crate::perception::ObservationVector;
use crate::rng::{stream, SimRng, Stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DqnConfig {
    pub gamma: f64,
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    /// Training steps between target-network syncs.
    pub target_sync: u64,
    pub alpha: f64,
    pub beta0: f64,
    /// Training steps over which beta anneals to 1.
    pub beta_anneal_steps: u64,
    pub buffer_capacity: usize,
    /// Minimum replay size before training starts.
    pub warmup: usize,
    pub n_step: usize,
    pub hidden: Vec<usize>,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Fraction of training ticks over which epsilon decays linearly.
    pub epsilon_fraction: f64,
    pub huber_delta: f64,
    pub priority_floor: f64,
}

impl Default for DqnConfig {
    fn default() -> Self {
        Self {
            gamma: 0.95,
            learning_rate: 1e-4,
            momentum: 0.9,
            batch_size: 32,
            target_sync: 500,
            alpha: 0.6,
            beta0: 0.4,
            beta_anneal_steps: 45_000,
            buffer_capacity: 50_000,
            warmup: 1000,
            n_step: 3,
            hidden: vec![256, 256],
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_fraction: 0.3,
            huber_delta: 1.0,
            priority_floor: 1e-6,
        }
    }
}

impl DqnConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidConfiguration(format!("rl: {what}")));
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1]");
        }
        if !(self.learning_rate > 0.0) {
            return bad("learning_rate must be > 0");
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad("momentum must lie in [0, 1)");
        }
        if self.batch_size == 0 || self.buffer_capacity == 0 || self.n_step == 0 || self.target_sync == 0 {
            return bad("batch_size, buffer_capacity, n_step and target_sync must be positive");
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return bad("hidden widths must be positive");
        }
        if !(self.alpha >= 0.0) || !(0.0..=1.0).contains(&self.beta0) {
            return bad("alpha must be >= 0 and beta0 in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.epsilon_start) || !(0.0..=1.0).contains(&self.epsilon_end) {
            return bad("epsilon bounds must lie in [0, 1]");
        }
        Ok(())
    }

    /// Linear decay from `epsilon_start` to `epsilon_end` over the first
    /// `epsilon_fraction` of `total_ticks`.
    pub fn epsilon_at(&self, tick: u64, total_ticks: u64) -> f64 {
        let horizon = (self.epsilon_fraction * total_ticks as f64).max(1.0);
        let frac = (tick as f64 / horizon).min(1.0);
        self.epsilon_start + frac * (self.epsilon_end - self.epsilon_start)
    }
}

/// One replay entry: `(phi_t, a_t, r_{t+1}, phi_{t+k})` with the k-step return.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub obs: ObservationVector,
    /// Action `j` of every agent.
    pub actions: Vec<usize>,
    /// Immediate per-agent rewards.
    pub rewards: Vec<f64>,
    /// Discounted per-agent return over `steps` ticks.
    pub returns: Vec<f64>,
    pub next_obs: ObservationVector,
    pub steps: usize,
    pub done: bool,
}

/// Folds single-tick transitions into n-step ones.
#[derive(Debug, Clone)]
pub struct NStepBuffer {
    n: usize,
    gamma: f64,
    pending: VecDeque<(ObservationVector, Vec<usize>, Vec<f64>)>,
}

impl NStepBuffer {
    pub fn new(n: usize, gamma: f64) -> Self {
        Self {
            n,
            gamma,
            pending: VecDeque::new(),
        }
    }

    /// Add `(phi_t, a_t, r_{t+1}, phi_{t+1})`; emits the transition starting
    /// `n - 1` ticks ago once enough ticks have accumulated.
    pub fn push(
        &mut self,
        obs: ObservationVector,
        actions: Vec<usize>,
        rewards: Vec<f64>,
        next_obs: &ObservationVector,
    ) -> Option<Transition> {
        self.pending.push_back((obs, actions, rewards));
        (self.pending.len() >= self.n).then(|| self.emit(next_obs, false))
    }

    /// Emit the remaining partial transitions at the end of an episode.
    pub fn finish(&mut self, next_obs: &ObservationVector, done: bool) -> Vec<Transition> {
        let mut out = Vec::new();
        while !self.pending.is_empty() {
            out.push(self.emit(next_obs, done));
        }
        out
    }

    fn emit(&mut self, next_obs: &ObservationVector, done: bool) -> Transition {
        let steps = self.pending.len();
        let m = self.pending[0].2.len();
        let mut returns = vec![0.0; m];
        let mut discount = 1.0;
        for (_, _, r) in &self.pending {
            for (g, ri) in returns.iter_mut().zip(r) {
                *g += discount * ri;
            }
            discount *= self.gamma;
        }
        let (obs, actions, rewards) = self.pending.pop_front().expect("pending transition");
        Transition {
            obs,
            actions,
            rewards,
            returns,
            next_obs: next_obs.clone(),
            steps,
            done,
        }
    }
}

/// Per agent: greedy with probability `1 - epsilon` (ties to the smallest
/// action), otherwise uniform over `0..=m`.
pub fn select_actions<R: Rng + ?Sized>(q: &QValues, epsilon: f64, rng: &mut R) -> Assignment {
    let m = q.agents();
    let targets = (0..m)
        .map(|i| {
            if epsilon > 0.0 && rng.random::<f64>() < epsilon {
                rng.random_range(0..=m)
            } else {
                q.argmax(i)
            }
        })
        .collect();
    Assignment::new(targets).expect("actions within 0..=m")
}

pub(crate) fn stack(observations: &[&ObservationVector]) -> DMatrix<f64> {
    let rows = observations[0].len();
    let mut x = DMatrix::zeros(rows, observations.len());
    for (b, o) in observations.iter().enumerate() {
        x.column_mut(b).copy_from_slice(o.as_slice());
    }
    x
}

/// Double-Q n-step targets: per agent `a* = argmax_j Q_online(phi')[i][j]`,
/// `y_i = G_i + gamma^k Q_target(phi')[i][a*]`, bootstrap dropped when done.
pub fn td_targets(batch: &[&Transition], online: &QNetwork, target: &QNetwork, gamma: f64) -> Vec<Vec<f64>> {
    if batch.is_empty() {
        return Vec::new();
    }
    let m = online.agents();
    let next: Vec<&ObservationVector> = batch.iter().map(|t| &t.next_obs).collect();
    let x = stack(&next);
    let q_online = online.forward_batch(&x);
    let q_target = target.forward_batch(&x);
    batch
        .iter()
        .enumerate()
        .map(|(b, t)| {
            (0..m)
                .map(|i| {
                    if t.done {
                        return t.returns[i];
                    }
                    let row: Vec<f64> = (0..=m).map(|j| q_online.q()[(i * (m + 1) + j, b)]).collect();
                    let best = super::network::argmax(&row);
                    t.returns[i] + gamma.powi(t.steps as i32) * q_target.q()[(i * (m + 1) + best, b)]
                })
                .collect()
        })
        .collect()
}

fn huber(u: f64, delta: f64) -> f64 {
    if u.abs() <= delta {
        0.5 * u * u
    } else {
        delta * (u.abs() - 0.5 * delta)
    }
}

/// Loss gradient of a batch with fixed targets.
#[derive(Debug, Clone)]
pub struct BatchLoss {
    pub loss: f64,
    pub gradients: QNetwork,
    /// Mean absolute TD error across agents, per sample.
    pub td_abs: Vec<f64>,
}

/// Importance-weighted Huber loss summed over agents and averaged over the
/// batch, with its gradient with respect to every parameter of `net`.
pub fn loss_and_gradient(
    net: &QNetwork,
    batch: &[&Transition],
    targets: &[Vec<f64>],
    weights: &[f64],
    huber_delta: f64,
) -> BatchLoss {
    let m = net.agents();
    let obs: Vec<&ObservationVector> = batch.iter().map(|t| &t.obs).collect();
    let cache = net.forward_batch(&stack(&obs));
    let n = batch.len() as f64;
    let mut dq = DMatrix::zeros(net.output_dim(), batch.len());
    let mut loss = 0.0;
    let mut td_abs = Vec::with_capacity(batch.len());
    for (b, t) in batch.iter().enumerate() {
        let mut abs_sum = 0.0;
        for i in 0..m {
            let idx = i * (m + 1) + t.actions[i];
            let u = cache.q()[(idx, b)] - targets[b][i];
            loss += weights[b] * huber(u, huber_delta) / n;
            dq[(idx, b)] = weights[b] * u.clamp(-huber_delta, huber_delta) / n;
            abs_sum += u.abs();
        }
        td_abs.push(abs_sum / m as f64);
    }
    BatchLoss {
        loss,
        gradients: net.backward(&cache, &dq),
        td_abs,
    }
}

/// Loss value only, for finite-difference checks.
pub fn batch_loss(net: &QNetwork, batch: &[&Transition], targets: &[Vec<f64>], weights: &[f64], huber_delta: f64) -> f64 {
    let m = net.agents();
    let obs: Vec<&ObservationVector> = batch.iter().map(|t| &t.obs).collect();
    let cache = net.forward_batch(&stack(&obs));
    let n = batch.len() as f64;
    let mut loss = 0.0;
    for (b, t) in batch.iter().enumerate() {
        for i in 0..m {
            let u = cache.q()[(i * (m + 1) + t.actions[i], b)] - targets[b][i];
            loss += weights[b] * huber(u, huber_delta) / n;
        }
    }
    loss
}

/// Online/target networks, momentum state and prioritized replay.
#[derive(Debug, Clone)]
pub struct DqnLearner {
    config: DqnConfig,
    online: QNetwork,
    target: QNetwork,
    velocity: QNetwork,
    replay: ReplayBuffer<Transition>,
    rng: SimRng,
    train_steps: u64,
}

impl DqnLearner {
    pub fn new(config: DqnConfig, input_dim: usize, m: usize, seed: u64) -> Result<Self> {
        config.validate()?;
        let online = QNetwork::new(input_dim, &config.hidden, m, &mut stream(seed, Stream::Network, 0))?;
        Ok(Self::with_network(config, online, seed))
    }

    pub fn with_network(config: DqnConfig, online: QNetwork, seed: u64) -> Self {
        Self {
            target: online.clone(),
            velocity: online.zeros_like(),
            replay: ReplayBuffer::new(config.buffer_capacity, config.alpha),
            rng: stream(seed, Stream::Replay, 0),
            online,
            config,
            train_steps: 0,
        }
    }

    pub fn config(&self) -> &DqnConfig {
        &self.config
    }

    pub fn online(&self) -> &QNetwork {
        &self.online
    }

    pub fn target(&self) -> &QNetwork {
        &self.target
    }

    pub fn replay(&self) -> &ReplayBuffer<Transition> {
        &self.replay
    }

    pub fn train_steps(&self) -> u64 {
        self.train_steps
    }

    pub fn remember(&mut self, transition: Transition) {
        self.replay.push(transition);
    }

    pub fn beta(&self) -> f64 {
        let frac = (self.train_steps as f64 / self.config.beta_anneal_steps.max(1) as f64).min(1.0);
        self.config.beta0 + frac * (1.0 - self.config.beta0)
    }

    /// One prioritized gradient step. `Ok(None)` while the buffer is below warmup.
    pub fn train_step(&mut self) -> Result<Option<f64>> {
        if self.replay.len() < self.config.warmup.max(1) || self.replay.len() < self.config.batch_size {
            return Ok(None);
        }
        let beta = self.beta();
        let batch = self.replay.sample(self.config.batch_size, beta, &mut self.rng)?;
        let targets = td_targets(&batch.items, &self.online, &self.target, self.config.gamma);
        let result = loss_and_gradient(&self.online, &batch.items, &targets, &batch.weights, self.config.huber_delta);
        let indices = batch.indices.clone();
        drop(batch);

        let (lr, mu) = (self.config.learning_rate, self.config.momentum);
        let grads = result.gradients.parameters();
        for ((theta, vel), g) in self
            .online
            .parameters_mut()
            .into_iter()
            .zip(self.velocity.parameters_mut())
            .zip(grads)
        {
            for ((p, v), gi) in theta.iter_mut().zip(vel.iter_mut()).zip(g) {
                *v = mu * *v + gi;
                *p -= lr * *v;
            }
        }
        for (slot, td) in indices.iter().zip(&result.td_abs) {
            self.replay.update_priority(*slot, td + self.config.priority_floor)?;
        }
        self.train_steps += 1;
        if self.train_steps % self.config.target_sync == 0 {
            self.target = self.online.clone();
        }
        Ok(Some(result.loss))
    }
}
