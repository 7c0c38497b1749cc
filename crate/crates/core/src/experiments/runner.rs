//! Training and evaluation episodes, and their aggregation into a summary.

use std::sync::Arc;

use rayon::prelude::*;

use super::baselines::{AuctionPolicy, EmotionPolicy};
use super::config::{ExperimentConfig, PolicyKind};
use super::metrics::{agent_transition_rmse, orientation_rmse, transition_rmse, TrajectoryLog};
use crate::coordinator::{DqnPolicy, NoCoopPolicy, Order, Outcome, Policy, RandomPolicy, Simulation, TickMetrics};
use crate::error::{Error, Result};
use crate::perception::ObservationVector;
use crate::rl::{DqnLearner, QNetwork};
use crate::rng::{derive_seed, stream, Stream};
use crate::world::{spawn_agents, GridWorld};

/// Compact per-tick record kept for `ticks.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct TickRow {
    pub tick: u64,
    pub losses: Vec<f64>,
    pub orientation_errors_deg: Vec<f64>,
    pub rewards: Option<Vec<f64>>,
    pub targets: Vec<usize>,
    pub outcomes: Vec<Outcome>,
    pub utility: f64,
}

impl From<&TickMetrics> for TickRow {
    fn from(m: &TickMetrics) -> Self {
        Self {
            tick: m.tick,
            losses: m.losses.clone(),
            orientation_errors_deg: m.orientation_errors_deg.clone(),
            rewards: m.rewards.clone(),
            targets: m.assignment.targets().to_vec(),
            outcomes: m.outcomes.clone(),
            utility: m.utility,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeResult {
    pub policy: PolicyKind,
    pub sigma1: f64,
    /// 0-based evaluation episode index.
    pub episode: usize,
    pub seed: u64,
    pub trans_rmse_m: f64,
    pub orient_rmse_deg: f64,
    pub mean_utility: f64,
    /// Per-agent transition RMSE (m).
    pub agent_trans_rmse_m: Vec<f64>,
    /// Fraction of (tick, agent) orders that were waits.
    pub wait_fraction: f64,
    /// Fraction of (tick, agent) orders that were assists.
    pub assist_fraction: f64,
    pub successful_assists: u64,
    pub failed_assists: u64,
    pub ticks: Vec<TickRow>,
}

/// One line of `summary.csv` plus the spread over seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub policy: PolicyKind,
    pub sigma1: f64,
    pub trans_rmse_m: f64,
    pub orient_rmse_deg: f64,
    pub mean_utility: f64,
    pub trans_std: f64,
    pub orient_std: f64,
    pub wait_fraction: f64,
    pub assist_fraction: f64,
    pub successful_assists: f64,
    pub episodes: usize,
}

#[derive(Debug, Clone)]
pub struct TrainingReport {
    pub network: QNetwork,
    /// Mean TD loss of each training episode (NaN before the first step).
    pub episode_losses: Vec<f64>,
    /// Pooled transition RMSE of each training episode.
    pub episode_trans_rmse: Vec<f64>,
    pub train_steps: u64,
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub summary: Vec<SummaryRow>,
    pub episodes: Vec<EpisodeResult>,
    pub training: Option<TrainingReport>,
}

impl ExperimentReport {
    pub fn row(&self, policy: PolicyKind, sigma1: f64) -> Option<&SummaryRow> {
        self.summary.iter().find(|r| r.policy == policy && r.sigma1 == sigma1)
    }
}

pub fn training_seed(cfg: &ExperimentConfig, episode: usize) -> u64 {
    derive_seed(cfg.seed, Stream::Training, episode as u64)
}

pub fn evaluation_seed(cfg: &ExperimentConfig, episode: usize) -> u64 {
    derive_seed(cfg.seed, Stream::Evaluation, episode as u64)
}

/// World, agents and simulation of one episode. Everything random is drawn
/// from `seed`, so all policies meet the same world, the same agents and the
/// same noise.
pub fn build_simulation(cfg: &ExperimentConfig, sigma1: f64, seed: u64) -> Result<Simulation> {
    let mut world_rng = stream(seed, Stream::World, 0);
    let world = match &cfg.world {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::InvalidConfiguration(format!("cannot read world {}: {e}", path.display())))?;
            GridWorld::parse(&text, cfg.terrain.cell_size, &mut world_rng)?
        }
        None => {
            let t = &cfg.terrain;
            GridWorld::random(t.width, t.height, t.cell_size, t.obstacle_density, cfg.agents, &mut world_rng)?
        }
    };
    let attrs = spawn_agents(cfg.agents, &cfg.attributes, sigma1, &mut stream(seed, Stream::Attributes, 0))?;
    Simulation::new(cfg.sim.clone(), Arc::new(world), attrs, seed)
}

pub fn observation_width(cfg: &ExperimentConfig) -> usize {
    ObservationVector::width(cfg.sim.frames, cfg.agents)
}

/// Run one evaluation episode and reduce it to metrics.
pub fn evaluate_episode(
    cfg: &ExperimentConfig,
    kind: PolicyKind,
    policy: &mut dyn Policy,
    sigma1: f64,
    episode: usize,
) -> Result<EpisodeResult> {
    let seed = evaluation_seed(cfg, episode);
    let mut sim = build_simulation(cfg, sigma1, seed)?;
    let metrics = sim.run_episode(policy, cfg.ticks)?;
    summarize_episode(kind, sigma1, episode, seed, cfg.agents, &metrics)
}

pub fn summarize_episode(
    policy: PolicyKind,
    sigma1: f64,
    episode: usize,
    seed: u64,
    agents: usize,
    metrics: &[TickMetrics],
) -> Result<EpisodeResult> {
    let mut log = TrajectoryLog::new(agents);
    let (mut waits, mut assists, mut ok, mut failed) = (0u64, 0u64, 0u64, 0u64);
    for m in metrics {
        log.push(m.true_poses.clone(), m.est_poses.clone())?;
        for (i, outcome) in m.outcomes.iter().enumerate() {
            match m.assignment.order(i) {
                Order::Wait => waits += 1,
                Order::Assist(_) => assists += 1,
                Order::Independent => {}
            }
            match outcome {
                Outcome::Successful => ok += 1,
                Outcome::Fail => failed += 1,
                _ => {}
            }
        }
    }
    let samples = (metrics.len() * agents).max(1) as f64;
    Ok(EpisodeResult {
        policy,
        sigma1,
        episode,
        seed,
        trans_rmse_m: transition_rmse(&log)?,
        orient_rmse_deg: orientation_rmse(&log)?,
        mean_utility: metrics.iter().map(|m| m.utility).sum::<f64>() / metrics.len() as f64,
        agent_trans_rmse_m: (0..agents).map(|a| agent_transition_rmse(&log, a)).collect::<Result<_>>()?,
        wait_fraction: waits as f64 / samples,
        assist_fraction: assists as f64 / samples,
        successful_assists: ok,
        failed_assists: failed,
        ticks: metrics.iter().map(TickRow::from).collect(),
    })
}

/// Train the DQN organizer on `train_episodes` episodes at the configured `sigma1`.
pub fn train_dqn(cfg: &ExperimentConfig) -> Result<TrainingReport> {
    train_dqn_with(cfg, |_, _| {})
}

/// As [`train_dqn`], calling `progress(episode, trans_rmse)` after each episode.
pub fn train_dqn_with(cfg: &ExperimentConfig, mut progress: impl FnMut(usize, f64)) -> Result<TrainingReport> {
    cfg.validate()?;
    let learner = DqnLearner::new(cfg.dqn.clone(), observation_width(cfg), cfg.agents, cfg.seed)?;
    let total = cfg.train_episodes as u64 * cfg.ticks;
    let mut policy = DqnPolicy::training(learner, total, stream(cfg.seed, Stream::Policy, u64::MAX));
    let mut episode_losses = Vec::with_capacity(cfg.train_episodes);
    let mut episode_trans_rmse = Vec::with_capacity(cfg.train_episodes);
    for e in 0..cfg.train_episodes {
        let seed = training_seed(cfg, e);
        let mut sim = build_simulation(cfg, cfg.sigma1, seed)?;
        let before = policy.train_losses().len();
        let metrics = sim.run_episode(&mut policy, cfg.ticks)?;
        let fresh = &policy.train_losses()[before..];
        episode_losses.push(if fresh.is_empty() { f64::NAN } else { fresh.iter().sum::<f64>() / fresh.len() as f64 });
        let result = summarize_episode(PolicyKind::Dqn, cfg.sigma1, e, seed, cfg.agents, &metrics)?;
        episode_trans_rmse.push(result.trans_rmse_m);
        progress(e, result.trans_rmse_m);
    }
    let train_steps = policy.learner().map_or(0, |l| l.train_steps());
    Ok(TrainingReport {
        network: policy.network().clone(),
        episode_losses,
        episode_trans_rmse,
        train_steps,
    })
}

fn make_policy(cfg: &ExperimentConfig, kind: PolicyKind, net: Option<&QNetwork>, seed: u64) -> Result<Box<dyn Policy>> {
    let rng = stream(seed, Stream::Policy, kind as u64);
    Ok(match kind {
        PolicyKind::Dqn => {
            let net = net.ok_or_else(|| Error::InvalidState("dqn policy evaluated without a network".into()))?;
            Box::new(DqnPolicy::greedy(net.clone(), cfg.eval_epsilon, rng))
        }
        PolicyKind::Auction => Box::new(AuctionPolicy::new(cfg.auction)),
        PolicyKind::Emotion => Box::new(EmotionPolicy::new(cfg.agents, cfg.emotion)),
        PolicyKind::Nocoop => Box::new(NoCoopPolicy),
        PolicyKind::Random => Box::new(RandomPolicy::new(rng)),
    })
}

fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count().max(1) as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Evaluate every configured policy at every `sigma1` on the same evaluation
/// seeds. The DQN uses `pretrained` when given, otherwise it is trained
/// first. Episodes run in parallel; results are ordered by (policy, sigma1,
/// episode) before aggregation.
pub fn run_experiment(cfg: &ExperimentConfig, sigmas: &[f64], pretrained: Option<QNetwork>) -> Result<ExperimentReport> {
    run_experiment_with(cfg, sigmas, pretrained, |_, _| {})
}

pub fn run_experiment_with(
    cfg: &ExperimentConfig,
    sigmas: &[f64],
    pretrained: Option<QNetwork>,
    progress: impl FnMut(usize, f64),
) -> Result<ExperimentReport> {
    cfg.validate()?;
    if sigmas.is_empty() || sigmas.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
        return Err(Error::InvalidConfiguration(format!("sigma1 values must be finite and >= 0: {sigmas:?}")));
    }
    let width = observation_width(cfg);
    if let Some(net) = &pretrained {
        if net.input_dim() != width || net.agents() != cfg.agents {
            return Err(Error::InvalidConfiguration(format!(
                "checkpoint expects {} inputs and {} agents; config gives {width} and {}",
                net.input_dim(),
                net.agents(),
                cfg.agents
            )));
        }
    }
    let needs_dqn = cfg.policies.contains(&PolicyKind::Dqn);
    let mut training = None;
    let net = match (pretrained, needs_dqn) {
        (Some(net), _) => Some(net),
        (None, true) => {
            let report = train_dqn_with(cfg, progress)?;
            let net = report.network.clone();
            training = Some(report);
            Some(net)
        }
        (None, false) => None,
    };

    let jobs: Vec<(PolicyKind, f64, usize)> = cfg
        .policies
        .iter()
        .flat_map(|p| sigmas.iter().flat_map(move |s| (0..cfg.eval_episodes).map(move |e| (*p, *s, e))))
        .collect();
    let episodes: Vec<EpisodeResult> = jobs
        .par_iter()
        .map(|&(kind, sigma1, e)| {
            let mut policy = make_policy(cfg, kind, net.as_ref(), evaluation_seed(cfg, e))?;
            evaluate_episode(cfg, kind, policy.as_mut(), sigma1, e)
        })
        .collect::<Result<_>>()?;

    let mut summary = Vec::new();
    for &policy in &cfg.policies {
        for &sigma1 in sigmas {
            let group: Vec<&EpisodeResult> = episodes.iter().filter(|r| r.policy == policy && r.sigma1 == sigma1).collect();
            let (trans, trans_std) = mean_std(group.iter().map(|r| r.trans_rmse_m));
            let (orient, orient_std) = mean_std(group.iter().map(|r| r.orient_rmse_deg));
            summary.push(SummaryRow {
                policy,
                sigma1,
                trans_rmse_m: trans,
                orient_rmse_deg: orient,
                mean_utility: mean_std(group.iter().map(|r| r.mean_utility)).0,
                trans_std,
                orient_std,
                wait_fraction: mean_std(group.iter().map(|r| r.wait_fraction)).0,
                assist_fraction: mean_std(group.iter().map(|r| r.assist_fraction)).0,
                successful_assists: mean_std(group.iter().map(|r| r.successful_assists as f64)).0,
                episodes: group.len(),
            });
        }
    }
    Ok(ExperimentReport {
        summary,
        episodes,
        training,
    })
}
