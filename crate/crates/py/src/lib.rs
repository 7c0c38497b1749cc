//! Python bindings for the masslam simulator.

use std::path::PathBuf;

use masslam::coordinator::{self, Assignment, DecisionContext, NoCoopPolicy, Outcome, Policy, RandomPolicy, Simulation as CoreSimulation};
use masslam::experiments::{self, ExperimentConfig, PolicyKind, SummaryRow};
use masslam::geometry::Pose3;
use masslam::planner::{NavCell, NavMap};
use masslam::relpose::{self, RelObservation, TargetModel};
use masslam::rl::{checkpoint, QNetwork};
use masslam::rng::{stream, Stream};
use masslam::world::CellCoord;
use masslam::Error;
use nalgebra::{Matrix3, Vector3};
use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

type Matrix4x4 = [[f64; 4]; 4];

fn to_py(e: Error) -> PyErr {
    match e {
        Error::InvalidConfiguration(_) | Error::InvalidArgument(_) | Error::DegenerateInput(_) | Error::Parse(_) => PyValueError::new_err(e.to_string()),
        Error::Io(_) | Error::Csv(_) => PyIOError::new_err(e.to_string()),
        Error::InvalidState(_) => PyRuntimeError::new_err(e.to_string()),
    }
}

fn pose_to_matrix(p: &Pose3) -> Matrix4x4 {
    let mut m = [[0.0; 4]; 4];
    for r in 0..3 {
        for c in 0..3 {
            m[r][c] = p.rotation[(r, c)];
        }
        m[r][3] = p.translation[r];
    }
    m[3][3] = 1.0;
    m
}

fn matrix_to_pose(m: &Matrix4x4) -> PyResult<Pose3> {
    let rotation = Matrix3::from_fn(|r, c| m[r][c]);
    let pose = Pose3::new(rotation, Vector3::new(m[0][3], m[1][3], m[2][3]));
    if !pose.is_valid_rotation(1e-6) {
        return Err(PyValueError::new_err("upper-left 3x3 block is not a rotation"));
    }
    Ok(pose)
}

/// Experiment configuration. Build the default with `Config()`, or parse
/// TOML with `Config.from_toml` / `Config.load`.
#[pyclass(name = "Config", from_py_object)]
#[derive(Clone)]
struct PyConfig {
    inner: ExperimentConfig,
}

#[pymethods]
impl PyConfig {
    #[new]
    fn new() -> Self {
        Self {
            inner: ExperimentConfig::default(),
        }
    }

    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        let inner = ExperimentConfig::from_toml(text).map_err(to_py)?;
        inner.validate().map_err(to_py)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: ExperimentConfig::load(&path).map_err(to_py)?,
        })
    }

    fn validate(&self) -> PyResult<()> {
        self.inner.validate().map_err(to_py)
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }
    #[setter]
    fn set_seed(&mut self, v: u64) {
        self.inner.seed = v;
    }

    #[getter]
    fn agents(&self) -> usize {
        self.inner.agents
    }
    #[setter]
    fn set_agents(&mut self, v: usize) {
        self.inner.agents = v;
    }

    #[getter]
    fn sigma1(&self) -> f64 {
        self.inner.sigma1
    }
    #[setter]
    fn set_sigma1(&mut self, v: f64) {
        self.inner.sigma1 = v;
    }

    #[getter]
    fn ticks(&self) -> u64 {
        self.inner.ticks
    }
    #[setter]
    fn set_ticks(&mut self, v: u64) {
        self.inner.ticks = v;
    }

    #[getter]
    fn train_episodes(&self) -> usize {
        self.inner.train_episodes
    }
    #[setter]
    fn set_train_episodes(&mut self, v: usize) {
        self.inner.train_episodes = v;
    }

    #[getter]
    fn eval_episodes(&self) -> usize {
        self.inner.eval_episodes
    }
    #[setter]
    fn set_eval_episodes(&mut self, v: usize) {
        self.inner.eval_episodes = v;
    }

    #[getter]
    fn width(&self) -> usize {
        self.inner.terrain.width
    }
    #[setter]
    fn set_width(&mut self, v: usize) {
        self.inner.terrain.width = v;
    }

    #[getter]
    fn height(&self) -> usize {
        self.inner.terrain.height
    }
    #[setter]
    fn set_height(&mut self, v: usize) {
        self.inner.terrain.height = v;
    }

    #[getter]
    fn frames(&self) -> usize {
        self.inner.sim.frames
    }

    #[getter]
    fn policies(&self) -> Vec<&'static str> {
        self.inner.policies.iter().map(|p| p.as_str()).collect()
    }
    #[setter]
    fn set_policies(&mut self, names: Vec<String>) -> PyResult<()> {
        self.inner.policies = names.iter().map(|n| n.parse::<PolicyKind>()).collect::<Result<_, _>>().map_err(to_py)?;
        Ok(())
    }

    fn __repr__(&self) -> String {
        format!(
            "Config(agents={}, sigma1={}, ticks={}, train_episodes={}, eval_episodes={}, policies={:?})",
            self.inner.agents,
            self.inner.sigma1,
            self.inner.ticks,
            self.inner.train_episodes,
            self.inner.eval_episodes,
            self.policies()
        )
    }
}

/// Trained dueling Q-network.
#[pyclass(name = "QNetwork", from_py_object)]
#[derive(Clone)]
struct PyQNetwork {
    inner: QNetwork,
}

#[pymethods]
impl PyQNetwork {
    #[staticmethod]
    fn load(path: PathBuf, agents: usize, frames: usize) -> PyResult<Self> {
        Ok(Self {
            inner: checkpoint::load(&path, agents, frames).map_err(to_py)?,
        })
    }

    fn save(&self, path: PathBuf, frames: usize) -> PyResult<()> {
        checkpoint::save(&path, &self.inner, frames).map_err(to_py)
    }

    #[getter]
    fn agents(&self) -> usize {
        self.inner.agents()
    }

    #[getter]
    fn input_dim(&self) -> usize {
        self.inner.input_dim()
    }

    /// Q-values as `agents` rows of `agents + 1` actions.
    fn forward(&self, x: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
        let q = self.inner.forward(&x).map_err(to_py)?;
        Ok((0..q.agents()).map(|i| q.row(i).to_vec()).collect())
    }

    /// Greedy 1-based targets, one per agent.
    fn greedy_targets(&self, x: Vec<f64>) -> PyResult<Vec<usize>> {
        let q = self.inner.forward(&x).map_err(to_py)?;
        Ok((0..q.agents()).map(|i| q.argmax(i)).collect())
    }
}

fn summary_dict<'py>(py: Python<'py>, row: &SummaryRow) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("policy", row.policy.as_str())?;
    d.set_item("sigma1", row.sigma1)?;
    d.set_item("trans_rmse_m", row.trans_rmse_m)?;
    d.set_item("orient_rmse_deg", row.orient_rmse_deg)?;
    d.set_item("mean_utility", row.mean_utility)?;
    d.set_item("trans_std", row.trans_std)?;
    d.set_item("orient_std", row.orient_std)?;
    d.set_item("wait_fraction", row.wait_fraction)?;
    d.set_item("assist_fraction", row.assist_fraction)?;
    d.set_item("episodes", row.episodes)?;
    Ok(d)
}

/// Train (unless `network` is given) and evaluate every configured policy at
/// every `sigma1`. Returns `(summary_rows, network)`; writes the usual output
/// files when `out_dir` is set.
#[pyfunction]
#[pyo3(signature = (config, sigmas, network=None, out_dir=None))]
fn run_experiment<'py>(
    py: Python<'py>,
    config: &PyConfig,
    sigmas: Vec<f64>,
    network: Option<PyQNetwork>,
    out_dir: Option<PathBuf>,
) -> PyResult<(Vec<Bound<'py, PyDict>>, Option<PyQNetwork>)> {
    let cfg = config.inner.clone();
    let report = py
        .detach(move || experiments::run_experiment(&cfg, &sigmas, network.map(|n| n.inner)))
        .map_err(to_py)?;
    if let Some(dir) = out_dir {
        experiments::write_report(&dir, &report, config.inner.agents, config.inner.plots).map_err(to_py)?;
    }
    let rows = report.summary.iter().map(|r| summary_dict(py, r)).collect::<PyResult<_>>()?;
    let net = report.training.map(|t| PyQNetwork { inner: t.network });
    Ok((rows, net))
}

/// Issues a fixed assignment on the next decision.
struct Scripted(Assignment);

impl Policy for Scripted {
    fn name(&self) -> &str {
        "scripted"
    }

    fn decide(&mut self, _ctx: &DecisionContext<'_>) -> masslam::Result<Assignment> {
        Ok(self.0.clone())
    }
}

/// One simulated team. `tick` takes either explicit 1-based targets
/// (0 wait, i+1 self, k+1 assist agent k) or a built-in policy name.
#[pyclass(name = "Simulation", unsendable)]
struct PySimulation {
    inner: CoreSimulation,
    random: RandomPolicy,
}

#[pymethods]
impl PySimulation {
    #[new]
    fn new(config: &PyConfig, sigma1: f64, seed: u64) -> PyResult<Self> {
        Ok(Self {
            inner: experiments::build_simulation(&config.inner, sigma1, seed).map_err(to_py)?,
            random: RandomPolicy::new(stream(seed, Stream::Policy, PolicyKind::Random as u64)),
        })
    }

    #[getter]
    fn agents(&self) -> usize {
        self.inner.agents()
    }

    #[getter]
    fn tick_count(&self) -> u64 {
        self.inner.tick_count()
    }

    #[pyo3(signature = (targets=None, policy="nocoop"))]
    fn tick<'py>(&mut self, py: Python<'py>, targets: Option<Vec<usize>>, policy: &str) -> PyResult<Bound<'py, PyDict>> {
        let metrics = match (targets, policy) {
            (Some(t), _) => {
                let a = Assignment::new(t).map_err(to_py)?;
                if a.agents() != self.inner.agents() {
                    return Err(PyValueError::new_err(format!("expected {} targets", self.inner.agents())));
                }
                self.inner.tick(&mut Scripted(a))
            }
            (None, "nocoop") => self.inner.tick(&mut NoCoopPolicy),
            (None, "random") => self.inner.tick(&mut self.random),
            (None, other) => return Err(PyValueError::new_err(format!("unknown policy {other:?}; pass targets, \"nocoop\" or \"random\""))),
        }
        .map_err(to_py)?;
        let d = PyDict::new(py);
        d.set_item("tick", metrics.tick)?;
        d.set_item("losses", metrics.losses)?;
        d.set_item("orientation_errors_deg", metrics.orientation_errors_deg)?;
        d.set_item("rewards", metrics.rewards)?;
        d.set_item("targets", metrics.assignment.targets().to_vec())?;
        d.set_item("outcomes", metrics.outcomes.iter().map(|o| o.as_str()).collect::<Vec<_>>())?;
        d.set_item("utility", metrics.utility)?;
        Ok(d)
    }

    fn losses(&self) -> Vec<f64> {
        self.inner.losses()
    }

    fn true_pose(&self, agent: usize) -> PyResult<Matrix4x4> {
        self.check(agent)?;
        Ok(pose_to_matrix(self.inner.true_pose(agent)))
    }

    fn estimated_pose(&self, agent: usize) -> PyResult<Matrix4x4> {
        self.check(agent)?;
        Ok(pose_to_matrix(&self.inner.slam(agent).est_pose()))
    }
}

impl PySimulation {
    fn check(&self, agent: usize) -> PyResult<()> {
        if agent >= self.inner.agents() {
            return Err(PyValueError::new_err(format!("agent {agent} out of range")));
        }
        Ok(())
    }
}

/// Estimate a target's world pose from camera-frame views of its model
/// points. `observations` holds `(observer_pose, [(model_id, [x, y, z]), ...])`.
/// Returns `(pose, error, iterations, converged)`.
#[pyfunction]
fn estimate_pose(observations: Vec<(Matrix4x4, Vec<(usize, [f64; 3])>)>, init: Matrix4x4) -> PyResult<(Matrix4x4, f64, usize, bool)> {
    let obs = observations
        .into_iter()
        .enumerate()
        .map(|(observer, (pose, points))| {
            Ok(RelObservation {
                observer,
                observer_pose: matrix_to_pose(&pose)?,
                points: points.into_iter().map(|(k, p)| (k, Vector3::from(p))).collect(),
            })
        })
        .collect::<PyResult<Vec<_>>>()?;
    let est = relpose::estimate_pose(&obs, &TargetModel::default(), matrix_to_pose(&init)?).map_err(to_py)?;
    Ok((pose_to_matrix(&est.pose), est.error, est.iterations, est.converged))
}

/// Model points of the default target, in the target frame.
#[pyfunction]
fn target_model_points() -> Vec<[f64; 3]> {
    TargetModel::default().points().iter().map(|p| [p.x, p.y, p.z]).collect()
}

/// Path length (m) on a grid given as rows of `.` free, `#` occupied and
/// `?` unknown; `None` when unreachable.
#[pyfunction]
fn shortest_distance(rows: Vec<String>, cell_size: f64, start: (usize, usize), goal: (usize, usize)) -> PyResult<Option<f64>> {
    let height = rows.len();
    let width = rows.first().map_or(0, |r| r.chars().count());
    let mut cells = Vec::with_capacity(width * height);
    for row in &rows {
        if row.chars().count() != width {
            return Err(PyValueError::new_err("rows differ in length"));
        }
        for ch in row.chars() {
            cells.push(match ch {
                '.' => NavCell::Free,
                '#' => NavCell::Occupied,
                '?' => NavCell::Unknown,
                other => return Err(PyValueError::new_err(format!("unknown cell {other:?}"))),
            });
        }
    }
    let map = NavMap::from_cells(width, height, cell_size, cells).map_err(to_py)?;
    map.shortest_distance(CellCoord::new(start.0, start.1), CellCoord::new(goal.0, goal.1))
        .map_err(to_py)
}

#[pyfunction]
fn encode_action(i: usize, j: usize, m: usize) -> PyResult<usize> {
    coordinator::encode_action(i, j, m).map_err(to_py)
}

#[pyfunction]
fn decode_action(index: usize, m: usize) -> PyResult<(usize, usize)> {
    coordinator::decode_action(index, m).map_err(to_py)
}

/// Per-agent reward. `outcome` is one of wait, self, approach, success, fail.
#[pyfunction]
#[pyo3(signature = (loss, mu, outcome, delta_target=None))]
fn reward(loss: f64, mu: f64, outcome: &str, delta_target: Option<f64>) -> PyResult<f64> {
    let outcome = [Outcome::Waiting, Outcome::Independent, Outcome::Approaching, Outcome::Successful, Outcome::Fail]
        .into_iter()
        .find(|o| o.as_str() == outcome)
        .ok_or_else(|| PyValueError::new_err(format!("unknown outcome {outcome:?}")))?;
    Ok(coordinator::reward(loss, delta_target, mu, outcome))
}

#[pymodule]
fn pymasslam(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyConfig>()?;
    m.add_class::<PyQNetwork>()?;
    m.add_class::<PySimulation>()?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_pose, m)?)?;
    m.add_function(wrap_pyfunction!(target_model_points, m)?)?;
    m.add_function(wrap_pyfunction!(shortest_distance, m)?)?;
    m.add_function(wrap_pyfunction!(encode_action, m)?)?;
    m.add_function(wrap_pyfunction!(decode_action, m)?)?;
    m.add_function(wrap_pyfunction!(reward, m)?)?;
    Ok(())
}
