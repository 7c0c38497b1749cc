//! Decision makers plugged into the organizer loop.

use super::assignment::Assignment;
use super::reward::Outcome;
use crate::error::{Error, Result};
use crate::perception::ObservationVector;
use crate::rl::dqn::{select_actions, DqnLearner, NStepBuffer};
use crate::rl::network::QNetwork;
use crate::rng::SimRng;
use rand::Rng;

/// Everything the organizer knows when it issues orders at tick `t`.
#[derive(Debug, Clone, Copy)]
pub struct DecisionContext<'a> {
    /// 1-based tick.
    pub tick: u64,
    pub observation: &'a ObservationVector,
    /// `r_t` for the orders issued at `t - 1`; `None` on the first tick.
    pub rewards: Option<&'a [f64]>,
    pub losses: &'a [f64],
    /// Pairwise path distances on the merged map (m), `None` when unreachable.
    pub distances: &'a [Vec<Option<f64>>],
    /// Target (0-based) of every helper whose assist is still approaching.
    pub active_targets: &'a [Option<usize>],
    /// Outcome of every agent's previous order.
    pub outcomes: &'a [Outcome],
}

impl DecisionContext<'_> {
    pub fn agents(&self) -> usize {
        self.losses.len()
    }
}

pub trait Policy {
    fn name(&self) -> &str;

    fn decide(&mut self, ctx: &DecisionContext<'_>) -> Result<Assignment>;

    /// Called once after the last tick of an episode.
    fn end_episode(&mut self) {}
}

/// Every agent always runs SLAM on its own.
#[derive(Debug, Clone, Default)]
pub struct NoCoopPolicy;

impl Policy for NoCoopPolicy {
    fn name(&self) -> &str {
        "nocoop"
    }

    fn decide(&mut self, ctx: &DecisionContext<'_>) -> Result<Assignment> {
        Ok(Assignment::independent(ctx.agents()))
    }
}

/// Uniformly random order for every agent every tick.
#[derive(Debug, Clone)]
pub struct RandomPolicy {
    rng: SimRng,
}

impl RandomPolicy {
    pub fn new(rng: SimRng) -> Self {
        Self { rng }
    }
}

impl Policy for RandomPolicy {
    fn name(&self) -> &str {
        "random"
    }

    fn decide(&mut self, ctx: &DecisionContext<'_>) -> Result<Assignment> {
        let m = ctx.agents();
        Assignment::new((0..m).map(|_| self.rng.random_range(0..=m)).collect())
    }
}

/// Q-network organizer. In training mode it stores transitions and takes a
/// gradient step every tick once the replay buffer is warm; in greedy mode it
/// only acts.
#[derive(Debug, Clone)]
pub struct DqnPolicy {
    brain: Brain,
    rng: SimRng,
    prev: Option<(ObservationVector, Vec<usize>)>,
    last_obs: Option<ObservationVector>,
    ticks_seen: u64,
    train_losses: Vec<f64>,
}

#[derive(Debug, Clone)]
enum Brain {
    Training {
        learner: Box<DqnLearner>,
        nstep: NStepBuffer,
        total_ticks: u64,
    },
    Greedy {
        net: QNetwork,
        epsilon: f64,
    },
}

impl DqnPolicy {
    /// `total_ticks` is the length of the whole training run, used by the
    /// epsilon schedule.
    pub fn training(learner: DqnLearner, total_ticks: u64, rng: SimRng) -> Self {
        let nstep = NStepBuffer::new(learner.config().n_step, learner.config().gamma);
        Self {
            brain: Brain::Training {
                learner: Box::new(learner),
                nstep,
                total_ticks,
            },
            rng,
            prev: None,
            last_obs: None,
            ticks_seen: 0,
            train_losses: Vec::new(),
        }
    }

    pub fn greedy(net: QNetwork, epsilon: f64, rng: SimRng) -> Self {
        Self {
            brain: Brain::Greedy { net, epsilon },
            rng,
            prev: None,
            last_obs: None,
            ticks_seen: 0,
            train_losses: Vec::new(),
        }
    }

    pub fn network(&self) -> &QNetwork {
        match &self.brain {
            Brain::Training { learner, .. } => learner.online(),
            Brain::Greedy { net, .. } => net,
        }
    }

    pub fn learner(&self) -> Option<&DqnLearner> {
        match &self.brain {
            Brain::Training { learner, .. } => Some(learner),
            Brain::Greedy { .. } => None,
        }
    }

    /// Loss of every gradient step taken so far.
    pub fn train_losses(&self) -> &[f64] {
        &self.train_losses
    }

    pub fn ticks_seen(&self) -> u64 {
        self.ticks_seen
    }
}

impl Policy for DqnPolicy {
    fn name(&self) -> &str {
        "dqn"
    }

    fn decide(&mut self, ctx: &DecisionContext<'_>) -> Result<Assignment> {
        let q = self.network().forward(ctx.observation.as_slice())?;
        if q.agents() != ctx.agents() {
            return Err(Error::InvalidArgument("network agent count differs from the system".into()));
        }
        let epsilon = match &mut self.brain {
            Brain::Training { learner, nstep, total_ticks } => {
                if let (Some((obs, actions)), Some(rewards)) = (self.prev.take(), ctx.rewards) {
                    if let Some(t) = nstep.push(obs, actions, rewards.to_vec(), ctx.observation) {
                        learner.remember(t);
                    }
                    if let Some(loss) = learner.train_step()? {
                        self.train_losses.push(loss);
                    }
                }
                learner.config().epsilon_at(self.ticks_seen, *total_ticks)
            }
            Brain::Greedy { epsilon, .. } => *epsilon,
        };
        let assignment = select_actions(&q, epsilon, &mut self.rng);
        self.prev = Some((ctx.observation.clone(), assignment.targets().to_vec()));
        self.last_obs = Some(ctx.observation.clone());
        self.ticks_seen += 1;
        Ok(assignment)
    }

    fn end_episode(&mut self) {
        if let (Brain::Training { learner, nstep, .. }, Some(last)) = (&mut self.brain, &self.last_obs) {
            // Time-limit cut: bootstrap from the last observation.
            for t in nstep.finish(last, false) {
                learner.remember(t);
            }
        }
        self.prev = None;
        self.last_obs = None;
    }
}
