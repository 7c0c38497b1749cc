//! Abstracted per-agent SLAM: drifting pose estimate, map-point and keyframe
//! bookkeeping, loop closure and external pose fixes.

use std::collections::{HashMap, HashSet};

use nalgebra::{Matrix3, Vector3};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::geometry::{orthonormalize, rot_z, rotation_angle, so3_exp, so3_log, Pose3};
use crate::planner::{NavCell, NavMap};
use crate::world::{self, CellCoord, GridWorld, Occupancy, SENSOR_RANGE};

/// Tunables of the drift and bookkeeping model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SlamParams {
    /// Position drift per metre travelled per unit noise scale.
    pub k_distance: f64,
    /// Yaw drift per radian turned per unit noise scale.
    pub k_angle: f64,
    /// Fraction of first-seen landmarks that triggers a keyframe.
    pub keyframe_novelty: f64,
    /// Keyframes kept before culling starts.
    pub cull_window: u32,
    pub cull_probability: f64,
    /// Minimum ticks since the last visit for a revisit to close a loop.
    pub loop_window: u64,
    /// Drift multiplier applied on loop closure.
    pub loop_factor: f64,
}

impl Default for SlamParams {
    fn default() -> Self {
        Self {
            k_distance: 0.02,
            k_angle: 0.01,
            keyframe_novelty: 0.2,
            cull_window: 10,
            cull_probability: 0.1,
            loop_window: 50,
            loop_factor: 0.1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SlamState {
    true_pose: Pose3,
    drift_position: Vector3<f64>,
    /// Left rotation error: `R_est = rotation_error * R_true`.
    rotation_error: Matrix3<f64>,
    tick: u64,
    visited: HashMap<CellCoord, u64>,
    seen: HashSet<u32>,
    map_points_current: u32,
    kf_new_since_sample: u32,
    kf_culled_since_sample: u32,
    keyframes_total: u32,
    ticks_since_loop: u32,
    local_nav_map: NavMap,
    last_fix_error: Option<f64>,
}

/// One keyframe-counter sample, consumed from the state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KeyframeCounts {
    pub created: u32,
    pub culled: u32,
}

impl SlamState {
    /// Start at a known pose with zero drift; the initial view seeds the map.
    pub fn new(world: &GridWorld, start: Pose3) -> Self {
        let mut state = Self {
            true_pose: start,
            drift_position: Vector3::zeros(),
            rotation_error: Matrix3::identity(),
            tick: 0,
            visited: HashMap::new(),
            seen: HashSet::new(),
            map_points_current: 0,
            kf_new_since_sample: 0,
            kf_culled_since_sample: 0,
            keyframes_total: 1,
            ticks_since_loop: 0,
            local_nav_map: NavMap::unknown(world.width(), world.height(), world.cell_size()),
            last_fix_error: None,
        };
        let visible = world::visible_landmarks(world, &start, SENSOR_RANGE);
        state.map_points_current = visible.len() as u32;
        state.seen.extend(visible);
        if let Some(c) = world.cell_of(start.translation.x, start.translation.y) {
            state.visited.insert(c, 0);
        }
        state.reveal(world);
        state
    }

    pub fn true_pose(&self) -> &Pose3 {
        &self.true_pose
    }

    pub fn est_pose(&self) -> Pose3 {
        Pose3 {
            rotation: self.rotation_error * self.true_pose.rotation,
            translation: self.true_pose.translation + self.drift_position,
        }
    }

    pub fn drift_position(&self) -> Vector3<f64> {
        self.drift_position
    }

    /// Signed yaw component of the rotation error.
    pub fn yaw_error(&self) -> f64 {
        self.rotation_error[(1, 0)].atan2(self.rotation_error[(0, 0)])
    }

    /// Geodesic angle between estimated and true orientation (rad).
    pub fn rotation_error_angle(&self) -> f64 {
        rotation_angle(&self.rotation_error)
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn map_points_current(&self) -> u32 {
        self.map_points_current
    }

    pub fn keyframes_total(&self) -> u32 {
        self.keyframes_total
    }

    pub fn pending_keyframe_counts(&self) -> KeyframeCounts {
        KeyframeCounts {
            created: self.kf_new_since_sample,
            culled: self.kf_culled_since_sample,
        }
    }

    /// Read and reset the keyframe counters accumulated since the last sample.
    pub fn take_keyframe_counts(&mut self) -> KeyframeCounts {
        let counts = self.pending_keyframe_counts();
        self.kf_new_since_sample = 0;
        self.kf_culled_since_sample = 0;
        counts
    }

    pub fn ticks_since_loop(&self) -> u32 {
        self.ticks_since_loop
    }

    pub fn local_nav_map(&self) -> &NavMap {
        &self.local_nav_map
    }

    pub fn last_fix_error(&self) -> Option<f64> {
        self.last_fix_error
    }

    pub fn last_visit(&self, cell: CellCoord) -> Option<u64> {
        self.visited.get(&cell).copied()
    }

    /// Euclidean distance between estimated and true positions (m).
    pub fn loss(&self) -> f64 {
        compute_loss(&self.est_pose(), &self.true_pose)
    }

    /// Overwrite the drift directly; used by scripted scenarios.
    pub fn set_drift(&mut self, position: Vector3<f64>, yaw: f64) {
        self.drift_position = position;
        self.rotation_error = rot_z(yaw);
    }

    /// Advance one tick after the agent moved to `new_true_pose`.
    ///
    /// `drift_rng` always yields three normals per call and `keyframe_rng`
    /// one uniform, so streams stay aligned regardless of motion.
    #[allow(clippy::too_many_arguments)]
    pub fn advance<R1: Rng + ?Sized, R2: Rng + ?Sized>(
        &mut self,
        new_true_pose: Pose3,
        distance: f64,
        turn: f64,
        sigma2: f64,
        world: &GridWorld,
        params: &SlamParams,
        drift_rng: &mut R1,
        keyframe_rng: &mut R2,
    ) {
        let zx: f64 = StandardNormal.sample(drift_rng);
        let zy: f64 = StandardNormal.sample(drift_rng);
        let zyaw: f64 = StandardNormal.sample(drift_rng);
        let pos_sd = params.k_distance * distance.abs() * sigma2;
        let yaw_sd = params.k_angle * turn.abs() * sigma2;
        if pos_sd > 0.0 {
            self.drift_position += Vector3::new(zx * pos_sd, zy * pos_sd, 0.0);
        }
        if yaw_sd > 0.0 {
            self.rotation_error = orthonormalize(&(rot_z(zyaw * yaw_sd) * self.rotation_error));
        }
        self.true_pose = new_true_pose;
        self.tick += 1;
        self.ticks_since_loop += 1;

        let visible = world::visible_landmarks(world, &self.true_pose, SENSOR_RANGE);
        self.map_points_current = visible.len() as u32;
        let fresh = visible.iter().filter(|id| !self.seen.contains(id)).count();
        self.seen.extend(visible.iter().copied());
        let cull_draw: f64 = keyframe_rng.random();
        if !visible.is_empty() && fresh as f64 >= params.keyframe_novelty * visible.len() as f64 {
            self.kf_new_since_sample += 1;
            self.keyframes_total += 1;
            if self.keyframes_total > params.cull_window && cull_draw < params.cull_probability {
                self.kf_culled_since_sample += 1;
            }
        }
        self.reveal(world);
    }

    /// Close a loop when the current cell was last visited at least
    /// `loop_window` ticks ago. Records the visit either way.
    pub fn check_loop_closure(&mut self, world: &GridWorld, params: &SlamParams) -> bool {
        let Some(cell) = world.cell_of(self.true_pose.translation.x, self.true_pose.translation.y) else {
            return false;
        };
        let closed = self
            .visited
            .get(&cell)
            .is_some_and(|last| self.tick - last >= params.loop_window);
        if closed {
            self.drift_position *= params.loop_factor;
            self.rotation_error = so3_exp(&(so3_log(&self.rotation_error) * params.loop_factor));
            self.ticks_since_loop = 0;
        }
        self.visited.insert(cell, self.tick);
        closed
    }

    /// Replace the estimate with an externally measured pose.
    pub fn apply_pose_fix(&mut self, measured: &Pose3, measurement_err: f64) {
        let rotation = orthonormalize(&measured.rotation);
        self.drift_position = measured.translation - self.true_pose.translation;
        self.rotation_error = orthonormalize(&(rotation * self.true_pose.rotation.transpose()));
        self.ticks_since_loop = 0;
        self.last_fix_error = Some(measurement_err);
    }

    /// Mark frustum cells (and the agent's own neighbourhood) with ground truth.
    fn reveal(&mut self, world: &GridWorld) {
        let cs = world.cell_size();
        let (px, py) = (self.true_pose.translation.x, self.true_pose.translation.y);
        let reach = (SENSOR_RANGE / cs).ceil() as isize + 1;
        let here = world.cell_of(px, py);
        let (r0, c0) = match here {
            Some(c) => (c.row as isize, c.col as isize),
            None => return,
        };
        for dr in -reach..=reach {
            for dc in -reach..=reach {
                let (r, c) = (r0 + dr, c0 + dc);
                if !world.in_bounds(r, c) {
                    continue;
                }
                let cell = CellCoord::new(r as usize, c as usize);
                let near = dr.abs() <= 1 && dc.abs() <= 1;
                if !near {
                    let (cx, cy) = world.cell_center(cell);
                    let p_c = self.true_pose.inverse_transform_point(&Vector3::new(cx, cy, 0.0));
                    if !world::in_field_of_view(&p_c, SENSOR_RANGE) {
                        continue;
                    }
                }
                let v = match world.occupancy(cell) {
                    Occupancy::Free => NavCell::Free,
                    Occupancy::Occupied => NavCell::Occupied,
                };
                self.local_nav_map.set(cell, v);
            }
        }
    }
}

/// Euclidean position error between an estimate and the truth (m).
pub fn compute_loss(est: &Pose3, truth: &Pose3) -> f64 {
    (est.translation - truth.translation).norm()
}
