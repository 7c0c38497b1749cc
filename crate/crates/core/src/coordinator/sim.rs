//! The organizer loop: one call to [`Simulation::tick`] collects agent state,
//! merges maps, builds the observation and rewards, asks the policy for
//! orders and executes them, including relative observations between agents.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::assignment::{Assignment, Order};
use super::merge_maps;
use super::policy::{DecisionContext, Policy};
use super::reward::{reward, Outcome};
use super::utility::{utility_report, GroupGraph};
use crate::error::{Error, Result};
use crate::geometry::Pose3;
use crate::perception::{observation, sample_feature_vector, FeatureHistory, NormalizationScales, ObservationVector};
use crate::planner::{NavCell, NavMap};
use crate::relpose::{estimate_pose, initial_guess, measurement_error, RelObservation, TargetModel};
use crate::rng::{stream, SimRng, Stream};
use crate::slam::{SlamParams, SlamState};
use crate::world::{self, step_kinematics, AgentAttributes, CellCoord, Command, GridWorld, Motion, Velocity, SENSOR_RANGE};
use rand::Rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// Tick length (s).
    pub dt: f64,
    /// Reward selfishness.
    pub mu: f64,
    /// Observation frames.
    pub frames: usize,
    /// Ticks an assist may take before it fails.
    pub life: u32,
    /// Distance from the target at which helpers observe it (m).
    pub observation_distance: f64,
    /// Heading error allowed when starting an observation (deg).
    pub observe_heading_tolerance_deg: f64,
    /// Ticks before a random-walk waypoint is abandoned.
    pub walk_patience: u32,
    pub slam: SlamParams,
    pub scales: Option<NormalizationScales>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 0.5,
            mu: 0.7,
            frames: 4,
            life: 40,
            observation_distance: 2.0,
            observe_heading_tolerance_deg: 20.0,
            walk_patience: 60,
            slam: SlamParams::default(),
            scales: None,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) {
            return Err(Error::InvalidConfiguration(format!("dt must be > 0, got {}", self.dt)));
        }
        if !(0.0..=1.0).contains(&self.mu) {
            return Err(Error::InvalidConfiguration(format!("mu must lie in [0, 1], got {}", self.mu)));
        }
        if self.frames == 0 || self.life == 0 {
            return Err(Error::InvalidConfiguration("frames and life must be positive".into()));
        }
        if !(self.observation_distance > 0.0) {
            return Err(Error::InvalidConfiguration("observation_distance must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AssistStatus {
    Approaching,
    Successful,
    Fail,
}

/// Where and how a helper should stand to observe its target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservationPost {
    pub cell: CellCoord,
    /// Heading toward the target's estimated position (rad).
    pub heading: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssistTask {
    pub helper: usize,
    pub target: usize,
    pub life: u32,
    pub status: AssistStatus,
    pub post: Option<ObservationPost>,
}

#[derive(Debug, Clone, Default)]
struct WalkState {
    waypoint: Option<CellCoord>,
    age: u32,
    blocked: u32,
}

#[derive(Debug, Clone)]
struct Agent {
    attrs: AgentAttributes,
    pose: Pose3,
    vel: Velocity,
    slam: SlamState,
    task: Option<AssistTask>,
    walk: WalkState,
    drift_rng: SimRng,
    keyframe_rng: SimRng,
    walk_rng: SimRng,
    noise_rng: SimRng,
}

/// Per-tick record.
#[derive(Debug, Clone, PartialEq)]
pub struct TickMetrics {
    pub tick: u64,
    /// Position error per agent after the tick (m).
    pub losses: Vec<f64>,
    /// Orientation error per agent after the tick (deg).
    pub orientation_errors_deg: Vec<f64>,
    /// `r_t` delivered at this tick's decision, if any.
    pub rewards: Option<Vec<f64>>,
    pub assignment: Assignment,
    pub outcomes: Vec<Outcome>,
    /// `E(u(X))` after execution.
    pub utility: f64,
    pub true_poses: Vec<Pose3>,
    pub est_poses: Vec<Pose3>,
}

#[derive(Debug, Clone)]
pub struct Simulation {
    config: SimConfig,
    world: Arc<GridWorld>,
    model: TargetModel,
    agents: Vec<Agent>,
    history: FeatureHistory,
    global_map: NavMap,
    tick: u64,
    prev_losses: Vec<f64>,
    last_assignment: Option<Assignment>,
    last_outcomes: Vec<Outcome>,
    unreachable: f64,
}

fn wrap_angle(a: f64) -> f64 {
    let mut a = a % (2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    } else if a < -PI {
        a += 2.0 * PI;
    }
    a
}

impl Simulation {
    /// Place one agent per spawn cell (in slot order) with a random heading.
    pub fn new(config: SimConfig, world: Arc<GridWorld>, attrs: Vec<AgentAttributes>, seed: u64) -> Result<Self> {
        config.validate()?;
        let m = attrs.len();
        if m < 2 {
            return Err(Error::InvalidConfiguration(format!("need at least 2 agents, got {m}")));
        }
        if world.spawns().len() < m {
            return Err(Error::InvalidConfiguration(format!("world has {} spawn cells for {m} agents", world.spawns().len())));
        }
        let agents: Vec<Agent> = attrs
            .into_iter()
            .enumerate()
            .map(|(i, attrs)| {
                let mut walk_rng = stream(seed, Stream::Walk, i as u64);
                let yaw = walk_rng.random_range(-PI..PI);
                let pose = world.spawn_pose(i, yaw);
                Agent {
                    attrs,
                    pose,
                    vel: Velocity::default(),
                    slam: SlamState::new(&world, pose),
                    task: None,
                    walk: WalkState::default(),
                    drift_rng: stream(seed, Stream::Drift, i as u64),
                    keyframe_rng: stream(seed, Stream::Keyframes, i as u64),
                    walk_rng,
                    noise_rng: stream(seed, Stream::PointNoise, i as u64),
                }
            })
            .collect();
        for a in &agents {
            a.attrs.validate()?;
        }
        let scales = config.scales.unwrap_or_else(|| NormalizationScales::for_diagonal(world.diagonal()));
        Ok(Self {
            history: FeatureHistory::new(m, scales),
            global_map: NavMap::unknown(world.width(), world.height(), world.cell_size()),
            unreachable: 2.0 * world.diagonal(),
            model: TargetModel::default(),
            prev_losses: vec![0.0; m],
            last_assignment: None,
            last_outcomes: vec![Outcome::Independent; m],
            tick: 0,
            agents,
            world,
            config,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn world(&self) -> &GridWorld {
        &self.world
    }

    pub fn agents(&self) -> usize {
        self.agents.len()
    }

    pub fn tick_count(&self) -> u64 {
        self.tick
    }

    pub fn slam(&self, agent: usize) -> &SlamState {
        &self.agents[agent].slam
    }

    pub fn slam_mut(&mut self, agent: usize) -> &mut SlamState {
        &mut self.agents[agent].slam
    }

    pub fn attributes(&self, agent: usize) -> &AgentAttributes {
        &self.agents[agent].attrs
    }

    pub fn true_pose(&self, agent: usize) -> &Pose3 {
        &self.agents[agent].pose
    }

    pub fn task(&self, agent: usize) -> Option<&AssistTask> {
        self.agents[agent].task.as_ref()
    }

    pub fn global_map(&self) -> &NavMap {
        &self.global_map
    }

    pub fn history(&self) -> &FeatureHistory {
        &self.history
    }

    pub fn losses(&self) -> Vec<f64> {
        self.agents.iter().map(|a| a.slam.loss()).collect()
    }

    /// Teleport an agent (true pose and SLAM truth together, drift kept). For scripted scenarios.
    pub fn place_agent(&mut self, agent: usize, pose: Pose3) -> Result<()> {
        if !self.world.point_is_free(pose.translation.x, pose.translation.y) {
            return Err(Error::InvalidArgument("pose is not in a free cell".into()));
        }
        let a = &mut self.agents[agent];
        let drift = a.slam.drift_position();
        let yaw = a.slam.yaw_error();
        a.pose = pose;
        a.vel = Velocity::default();
        a.slam.advance(pose, 0.0, 0.0, 0.0, &self.world, &self.config.slam, &mut a.drift_rng, &mut a.keyframe_rng);
        a.slam.set_drift(drift, yaw);
        Ok(())
    }

    fn cell_of_point(&self, x: f64, y: f64) -> CellCoord {
        let cs = self.world.cell_size();
        let col = ((x / cs).floor().max(0.0) as usize).min(self.world.width() - 1);
        let row = ((y / cs).floor().max(0.0) as usize).min(self.world.height() - 1);
        CellCoord::new(row, col)
    }

    fn true_cell(&self, agent: usize) -> CellCoord {
        let p = &self.agents[agent].pose.translation;
        self.cell_of_point(p.x, p.y)
    }

    fn est_cell(&self, agent: usize) -> CellCoord {
        let p = self.agents[agent].slam.est_pose().translation;
        self.cell_of_point(p.x, p.y)
    }

    /// Run `ticks` ticks and close the episode for the policy.
    pub fn run_episode(&mut self, policy: &mut dyn Policy, ticks: u64) -> Result<Vec<TickMetrics>> {
        let mut out = Vec::with_capacity(ticks as usize);
        for _ in 0..ticks {
            out.push(self.tick(policy)?);
        }
        policy.end_episode();
        Ok(out)
    }

    pub fn tick(&mut self, policy: &mut dyn Policy) -> Result<TickMetrics> {
        let t = self.tick + 1;
        let m = self.agents.len();

        // Collect local maps and merge them.
        let locals: Vec<&NavMap> = self.agents.iter().map(|a| a.slam.local_nav_map()).collect();
        self.global_map = merge_maps(&locals)?;

        // Pairwise path distances between estimated positions on the merged map.
        let est_cells: Vec<CellCoord> = (0..m).map(|i| self.est_cell(i)).collect();
        let mut distances = vec![vec![None; m]; m];
        for i in 0..m {
            distances[i][i] = Some(0.0);
            if i + 1 < m {
                let row = self.global_map.distances_to(est_cells[i], &est_cells[i + 1..])?;
                for (k, d) in (i + 1..m).zip(row) {
                    distances[i][k] = d;
                    distances[k][i] = d;
                }
            }
        }

        // Feature vectors and the observation.
        let mut frame = Vec::with_capacity(m);
        for i in 0..m {
            let peers: Vec<Option<f64>> = (0..m).filter(|k| *k != i).map(|k| distances[i][k]).collect();
            frame.push(sample_feature_vector(&mut self.agents[i].slam, &peers, self.unreachable));
        }
        self.history.push(frame)?;
        let phi: ObservationVector = observation(&self.history, t as usize, self.config.frames)?;

        // Rewards for the orders issued last tick.
        let losses_now = self.losses();
        let rewards: Option<Vec<f64>> = self.last_assignment.as_ref().map(|prev| {
            (0..m)
                .map(|i| {
                    let delta = match prev.order(i) {
                        Order::Assist(k) => Some(losses_now[k] - self.prev_losses[k]),
                        _ => None,
                    };
                    reward(losses_now[i], delta, self.config.mu, self.last_outcomes[i])
                })
                .collect()
        });

        let active: Vec<Option<usize>> = self
            .agents
            .iter()
            .map(|a| a.task.filter(|t| t.status == AssistStatus::Approaching).map(|t| t.target))
            .collect();
        let ctx = DecisionContext {
            tick: t,
            observation: &phi,
            rewards: rewards.as_deref(),
            losses: &losses_now,
            distances: &distances,
            active_targets: &active,
            outcomes: &self.last_outcomes,
        };
        let assignment = policy.decide(&ctx)?;
        if assignment.agents() != m {
            return Err(Error::InvalidArgument(format!("policy returned {} orders for {m} agents", assignment.agents())));
        }

        let outcomes = self.execute(&assignment)?;

        let losses_after = self.losses();
        let contributions: Vec<f64> = (0..m)
            .map(|i| match (assignment.order(i), outcomes[i]) {
                (Order::Assist(k), Outcome::Successful) => losses_now[k] - losses_after[k],
                _ => 0.0,
            })
            .collect();
        let graph = GroupGraph::from_assignment(&assignment, &outcomes);
        let utility = utility_report(&graph, &losses_after, &contributions).expected;

        let metrics = TickMetrics {
            tick: t,
            orientation_errors_deg: self.agents.iter().map(|a| a.slam.rotation_error_angle().to_degrees()).collect(),
            losses: losses_after,
            rewards,
            assignment: assignment.clone(),
            outcomes: outcomes.clone(),
            utility,
            true_poses: self.agents.iter().map(|a| a.pose).collect(),
            est_poses: self.agents.iter().map(|a| a.slam.est_pose()).collect(),
        };
        self.prev_losses = losses_now;
        self.last_assignment = Some(assignment);
        self.last_outcomes = outcomes;
        self.tick = t;
        Ok(metrics)
    }

    /// Carry out every agent's order: task lifecycle, motion, SLAM update and
    /// relative observations.
    fn execute(&mut self, assignment: &Assignment) -> Result<Vec<Outcome>> {
        let m = self.agents.len();
        let mut outcomes = vec![Outcome::Independent; m];
        let mut commands: Vec<Option<Command>> = vec![None; m];
        let mut observing = vec![false; m];

        for i in 0..m {
            match assignment.order(i) {
                Order::Wait => {
                    self.agents[i].task = None;
                    outcomes[i] = Outcome::Waiting;
                }
                Order::Independent => {
                    self.agents[i].task = None;
                    commands[i] = Some(self.walk_command(i)?);
                }
                Order::Assist(k) => {
                    let (outcome, command, observe) = self.assist_step(i, k)?;
                    outcomes[i] = outcome;
                    commands[i] = command;
                    observing[i] = observe;
                }
            }
        }

        // Motion and SLAM.
        let dt = self.config.dt;
        for (i, command) in commands.iter().enumerate() {
            let a = &mut self.agents[i];
            let motion = match command {
                Some(cmd) => {
                    let (pose, vel, motion) = step_kinematics(&self.world, &a.pose, a.vel, *cmd, &a.attrs, dt);
                    a.pose = pose;
                    a.vel = vel;
                    if motion.blocked {
                        a.walk.blocked += 1;
                    }
                    motion
                }
                None => {
                    a.vel = Velocity::default();
                    Motion::default()
                }
            };
            let sigma2 = a.attrs.camera_noise_sigma;
            a.slam.advance(a.pose, motion.distance, motion.turn, sigma2, &self.world, &self.config.slam, &mut a.drift_rng, &mut a.keyframe_rng);
            a.slam.check_loop_closure(&self.world, &self.config.slam);
        }

        // Relative observations, grouped by target, helpers in id order.
        for target in 0..m {
            let helpers: Vec<usize> = (0..m)
                .filter(|h| observing[*h] && self.agents[*h].task.is_some_and(|t| t.target == target))
                .collect();
            if helpers.is_empty() {
                continue;
            }
            let mut views = Vec::new();
            for &h in &helpers {
                match self.observe_target(h, target) {
                    Some(points) if points.len() >= 3 => views.push(RelObservation {
                        observer: h,
                        observer_pose: self.agents[h].slam.est_pose(),
                        points,
                    }),
                    _ => outcomes[h] = Outcome::Fail,
                }
            }
            if views.is_empty() {
                continue;
            }
            let solved = initial_guess(&views, &self.model).and_then(|init| estimate_pose(&views, &self.model, init));
            match solved {
                Ok(est) => {
                    let quality: Vec<(f64, f64)> = views
                        .iter()
                        .map(|v| (self.agents[v.observer].slam.loss(), self.agents[v.observer].attrs.camera_noise_sigma))
                        .collect();
                    self.agents[target].slam.apply_pose_fix(&est.pose, measurement_error(&quality));
                    let winner = views[0].observer;
                    for i in 0..m {
                        if i == winner {
                            outcomes[i] = Outcome::Successful;
                        } else if self.agents[i].task.is_some_and(|t| t.target == target) && outcomes[i] == Outcome::Approaching {
                            outcomes[i] = Outcome::Fail;
                        }
                    }
                }
                Err(_) => {
                    for v in &views {
                        outcomes[v.observer] = Outcome::Fail;
                    }
                }
            }
        }

        for (i, outcome) in outcomes.iter().enumerate() {
            if let Some(task) = self.agents[i].task.as_mut() {
                task.status = match outcome {
                    Outcome::Successful => AssistStatus::Successful,
                    Outcome::Fail => AssistStatus::Fail,
                    _ => AssistStatus::Approaching,
                };
            }
        }
        Ok(outcomes)
    }

    /// Lifecycle bookkeeping and motion command of a helper assigned to `target`.
    fn assist_step(&mut self, helper: usize, target: usize) -> Result<(Outcome, Option<Command>, bool)> {
        let life_limit = self.config.life;
        let continuing = self.agents[helper]
            .task
            .is_some_and(|t| t.target == target && t.status == AssistStatus::Approaching);
        let task = if continuing {
            let mut t = self.agents[helper].task.expect("continuing task");
            t.life += 1;
            t
        } else {
            AssistTask {
                helper,
                target,
                life: 0,
                status: AssistStatus::Approaching,
                post: None,
            }
        };
        self.agents[helper].task = Some(task);
        if task.life >= life_limit {
            return Ok((Outcome::Fail, None, false));
        }

        let post = self.observation_post(helper, target);
        if let Some(t) = self.agents[helper].task.as_mut() {
            t.post = post;
        }
        let Some(post) = post else {
            return Ok((Outcome::Fail, None, false));
        };

        let here = self.true_cell(helper);
        let a = &self.agents[helper];
        if here == post.cell {
            let target_est = self.agents[target].slam.est_pose().translation;
            let bearing = (target_est.y - a.pose.translation.y).atan2(target_est.x - a.pose.translation.x);
            let err = wrap_angle(bearing - a.pose.yaw());
            if err.abs() <= self.config.observe_heading_tolerance_deg.to_radians() {
                return Ok((Outcome::Approaching, Some(Command::default()), true));
            }
            let cmd = Command {
                linear: 0.0,
                angular: (2.0 * err).clamp(-a.attrs.max_ang_vel, a.attrs.max_ang_vel),
            };
            return Ok((Outcome::Approaching, Some(cmd), false));
        }
        match self.global_map.next_step(here, post.cell)? {
            Some(next) => {
                let (x, y) = self.world.cell_center(next);
                let cmd = self.steer(helper, x, y, next == post.cell);
                Ok((Outcome::Approaching, Some(cmd), false))
            }
            None => Ok((Outcome::Fail, None, false)),
        }
    }

    /// Nearest known-free cell (to the helper) on a ring at the observation
    /// distance around the target's estimated position, with a clear line of
    /// sight on the merged map.
    fn observation_post(&self, helper: usize, target: usize) -> Option<ObservationPost> {
        let cs = self.world.cell_size();
        let tgt = self.agents[target].slam.est_pose().translation;
        let me = self.agents[helper].pose.translation;
        let d = self.config.observation_distance;
        let band = cs.max(0.25 * d);
        let reach = ((d + band) / cs).ceil() as isize;
        let centre = self.cell_of_point(tgt.x, tgt.y);
        let mut best: Option<(f64, CellCoord)> = None;
        for dr in -reach..=reach {
            for dc in -reach..=reach {
                let (r, c) = (centre.row as isize + dr, centre.col as isize + dc);
                if !self.world.in_bounds(r, c) {
                    continue;
                }
                let cell = CellCoord::new(r as usize, c as usize);
                if self.global_map.get(cell) != NavCell::Free {
                    continue;
                }
                let (x, y) = self.world.cell_center(cell);
                let range = (x - tgt.x).hypot(y - tgt.y);
                if (range - d).abs() > band || !self.map_line_of_sight(x, y, tgt.x, tgt.y) {
                    continue;
                }
                let score = (x - me.x).hypot(y - me.y);
                if best.is_none_or(|(s, b)| score < s || (score == s && cell < b)) {
                    best = Some((score, cell));
                }
            }
        }
        best.map(|(_, cell)| {
            let (x, y) = self.world.cell_center(cell);
            ObservationPost {
                cell,
                heading: (tgt.y - y).atan2(tgt.x - x),
            }
        })
    }

    /// Line of sight over the merged map: no known-occupied cell on the segment.
    fn map_line_of_sight(&self, ax: f64, ay: f64, bx: f64, by: f64) -> bool {
        let cs = self.world.cell_size();
        let len = (bx - ax).hypot(by - ay);
        let steps = ((len / (0.25 * cs)).ceil() as usize).max(1);
        (0..=steps).all(|s| {
            let f = s as f64 / steps as f64;
            let c = self.cell_of_point(ax + f * (bx - ax), ay + f * (by - ay));
            self.global_map.get(c) != NavCell::Occupied
        })
    }

    /// Model points of `target` visible from `helper`, in the helper's camera
    /// frame with the helper's point noise.
    fn observe_target(&mut self, helper: usize, target: usize) -> Option<Vec<(usize, Vector3<f64>)>> {
        let (hp, tp) = (self.agents[helper].pose, self.agents[target].pose);
        if !self.world.line_of_sight(hp.translation.x, hp.translation.y, tp.translation.x, tp.translation.y) {
            return None;
        }
        let sd = world::POINT_NOISE_PER_SIGMA * self.agents[helper].attrs.camera_noise_sigma;
        let model = self.model.clone();
        let a = &mut self.agents[helper];
        let points: Vec<(usize, Vector3<f64>)> = model
            .points()
            .iter()
            .enumerate()
            .filter_map(|(k, p)| {
                let p_c = hp.inverse_transform_point(&tp.transform_point(p));
                world::in_field_of_view(&p_c, SENSOR_RANGE).then(|| (k, p_c + world::noise3(sd, &mut a.noise_rng)))
            })
            .collect();
        Some(points)
    }

    fn steer(&self, agent: usize, x: f64, y: f64, arrive: bool) -> Command {
        let a = &self.agents[agent];
        let (dx, dy) = (x - a.pose.translation.x, y - a.pose.translation.y);
        let err = wrap_angle(dy.atan2(dx) - a.pose.yaw());
        let angular = (2.0 * err).clamp(-a.attrs.max_ang_vel, a.attrs.max_ang_vel);
        let mut linear = if err.abs() < PI / 4.0 { a.attrs.max_lin_vel * err.cos() } else { 0.0 };
        if arrive {
            linear = linear.min(dx.hypot(dy) / self.config.dt);
        }
        Command { linear, angular }
    }

    /// Momentum-biased random walk toward sampled waypoints that favour
    /// unexplored cells ahead of the agent.
    fn walk_command(&mut self, agent: usize) -> Result<Command> {
        let here = self.true_cell(agent);
        let patience = self.config.walk_patience;
        {
            let w = &mut self.agents[agent].walk;
            w.age += 1;
            if w.waypoint == Some(here) || w.age > patience || w.blocked >= 3 {
                w.waypoint = None;
            }
        }
        for _ in 0..2 {
            if self.agents[agent].walk.waypoint.is_none() {
                let wp = self.pick_waypoint(agent, here);
                let w = &mut self.agents[agent].walk;
                *w = WalkState { waypoint: wp, age: 0, blocked: 0 };
            }
            let Some(wp) = self.agents[agent].walk.waypoint else {
                break;
            };
            match self.global_map.next_step(here, wp)? {
                Some(next) => {
                    let (x, y) = self.world.cell_center(next);
                    return Ok(self.steer(agent, x, y, false));
                }
                None => self.agents[agent].walk.waypoint = None,
            }
        }
        let a = &self.agents[agent];
        Ok(Command {
            linear: 0.0,
            angular: a.attrs.max_ang_vel,
        })
    }

    fn pick_waypoint(&mut self, agent: usize, here: CellCoord) -> Option<CellCoord> {
        let (w, h) = (self.world.width(), self.world.height());
        let diag = self.world.diagonal();
        let pose = self.agents[agent].pose;
        let rng = &mut self.agents[agent].walk_rng;
        let mut best: Option<(f64, CellCoord)> = None;
        for _ in 0..24 {
            let cell = CellCoord::new(rng.random_range(0..h), rng.random_range(0..w));
            let kind = self.global_map.get(cell);
            if cell == here || kind == NavCell::Occupied {
                continue;
            }
            let (x, y) = self.world.cell_center(cell);
            let (dx, dy) = (x - pose.translation.x, y - pose.translation.y);
            let ahead = wrap_angle(dy.atan2(dx) - pose.yaw()).cos();
            let novelty = if kind == NavCell::Unknown { 1.0 } else { 0.0 };
            let score = novelty + 0.5 * ahead - 0.5 * dx.hypot(dy) / diag;
            if best.is_none_or(|(s, _)| score > s) {
                best = Some((score, cell));
            }
        }
        best.map(|(_, c)| c)
    }
}
