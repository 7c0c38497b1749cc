//! Ground-truth grid world: terrain, synthetic landmarks, heterogeneous agent
//! attributes, planar kinematics and noisy point measurements.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use nalgebra::Vector3;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Pose3;

/// Sensing range of the simulated depth camera (m).
pub const SENSOR_RANGE: f64 = 8.0;
/// Half of the horizontal field of view (rad).
pub const HALF_FOV: f64 = std::f64::consts::FRAC_PI_4;
/// Metric point noise per unit of camera noise scale (m).
pub const POINT_NOISE_PER_SIGMA: f64 = 0.01;

/// Backoff from an obstacle boundary so a truncated position stays in the free cell.
const WALL_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Occupancy {
    Free,
    Occupied,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CellCoord {
    pub row: usize,
    pub col: usize,
}

impl CellCoord {
    pub fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }
}

impl fmt::Display for CellCoord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.row, self.col)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Landmark {
    pub id: u32,
    pub position: Vector3<f64>,
}

#[derive(Debug, Clone)]
pub struct GridWorld {
    width: usize,
    height: usize,
    cell_size: f64,
    cells: Vec<Occupancy>,
    landmarks: Vec<Landmark>,
    /// Spawn cells indexed by agent slot (0-based).
    spawns: Vec<CellCoord>,
}

impl GridWorld {
    /// Build a world from an occupancy raster; landmarks are placed with `rng`.
    pub fn new<R: Rng + ?Sized>(
        width: usize,
        height: usize,
        cell_size: f64,
        cells: Vec<Occupancy>,
        spawns: Vec<CellCoord>,
        rng: &mut R,
    ) -> Result<Self> {
        if !(cell_size > 0.0) {
            return Err(Error::InvalidConfiguration(format!("cell_size must be > 0, got {cell_size}")));
        }
        if width == 0 || height == 0 || cells.len() != width * height {
            return Err(Error::InvalidConfiguration("grid dimensions do not match cell data".into()));
        }
        let mut world = Self {
            width,
            height,
            cell_size,
            cells,
            landmarks: Vec::new(),
            spawns,
        };
        for (i, s) in world.spawns.iter().enumerate() {
            if !world.in_bounds(s.row as isize, s.col as isize) || !world.is_free(*s) {
                return Err(Error::InvalidConfiguration(format!("spawn {} at {s} is not a free cell", i + 1)));
            }
        }
        world.place_landmarks(rng);
        Ok(world)
    }

    /// Parse the plain-text grid format: `#` occupied, `.` free, `1`..`9` spawn cells.
    pub fn parse<R: Rng + ?Sized>(text: &str, cell_size: f64, rng: &mut R) -> Result<Self> {
        let plan: GridPlan = text.parse()?;
        Self::new(plan.width, plan.height, cell_size, plan.cells, plan.spawns, rng)
    }

    /// Random world: bordered grid with rectangular obstacle blocks until
    /// `obstacle_density` of the cells are occupied, and `m` spawn cells drawn
    /// from the largest connected free region.
    pub fn random<R: Rng + ?Sized>(
        width: usize,
        height: usize,
        cell_size: f64,
        obstacle_density: f64,
        m: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if width < 5 || height < 5 {
            return Err(Error::InvalidConfiguration("random world needs at least 5x5 cells".into()));
        }
        if !(0.0..0.6).contains(&obstacle_density) {
            return Err(Error::InvalidConfiguration("obstacle_density must be in [0, 0.6)".into()));
        }
        let mut cells = vec![Occupancy::Free; width * height];
        let mut occupied = 0usize;
        for r in 0..height {
            for c in 0..width {
                if r == 0 || c == 0 || r == height - 1 || c == width - 1 {
                    cells[r * width + c] = Occupancy::Occupied;
                    occupied += 1;
                }
            }
        }
        let target = (obstacle_density * (width * height) as f64).round() as usize;
        while occupied < target {
            let bw = rng.random_range(1..=4usize);
            let bh = rng.random_range(1..=4usize);
            let r0 = rng.random_range(1..height - 1);
            let c0 = rng.random_range(1..width - 1);
            for r in r0..(r0 + bh).min(height - 1) {
                for c in c0..(c0 + bw).min(width - 1) {
                    let cell = &mut cells[r * width + c];
                    if *cell == Occupancy::Free && occupied < target {
                        *cell = Occupancy::Occupied;
                        occupied += 1;
                    }
                }
            }
        }
        let region = largest_free_region(width, height, &cells);
        // Spawn cells need free neighbours so agents can start moving.
        let roomy: Vec<CellCoord> = region
            .iter()
            .copied()
            .filter(|c| {
                (-1isize..=1).all(|dr| {
                    (-1isize..=1).all(|dc| {
                        let r = c.row as isize + dr;
                        let cc = c.col as isize + dc;
                        cells[r as usize * width + cc as usize] == Occupancy::Free
                    })
                })
            })
            .collect();
        let pool = if roomy.len() >= m { roomy } else { region };
        if pool.len() < m {
            return Err(Error::InvalidConfiguration("not enough free cells for spawns".into()));
        }
        let mut spawns = Vec::with_capacity(m);
        while spawns.len() < m {
            let c = pool[rng.random_range(0..pool.len())];
            if !spawns.contains(&c) {
                spawns.push(c);
            }
        }
        Self::new(width, height, cell_size, cells, spawns, rng)
    }

    fn place_landmarks<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let cs = self.cell_size;
        let mut landmarks = Vec::new();
        for r in 0..self.height {
            for c in 0..self.width {
                if self.cells[r * self.width + c] == Occupancy::Free {
                    let x = (c as f64 + rng.random::<f64>()) * cs;
                    let y = (r as f64 + rng.random::<f64>()) * cs;
                    let z = 2.0 * rng.random::<f64>();
                    landmarks.push(Landmark {
                        id: landmarks.len() as u32,
                        position: Vector3::new(x, y, z),
                    });
                }
            }
        }
        self.landmarks = landmarks;
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn landmarks(&self) -> &[Landmark] {
        &self.landmarks
    }

    pub fn spawns(&self) -> &[CellCoord] {
        &self.spawns
    }

    /// Diagonal length of the world (m).
    pub fn diagonal(&self) -> f64 {
        let w = self.width as f64 * self.cell_size;
        let h = self.height as f64 * self.cell_size;
        w.hypot(h)
    }

    pub fn in_bounds(&self, row: isize, col: isize) -> bool {
        row >= 0 && col >= 0 && (row as usize) < self.height && (col as usize) < self.width
    }

    pub fn occupancy(&self, c: CellCoord) -> Occupancy {
        self.cells[c.row * self.width + c.col]
    }

    pub fn is_free(&self, c: CellCoord) -> bool {
        self.occupancy(c) == Occupancy::Free
    }

    pub fn cell_of(&self, x: f64, y: f64) -> Option<CellCoord> {
        let col = (x / self.cell_size).floor();
        let row = (y / self.cell_size).floor();
        if col < 0.0 || row < 0.0 {
            return None;
        }
        let (row, col) = (row as usize, col as usize);
        (row < self.height && col < self.width).then_some(CellCoord { row, col })
    }

    pub fn cell_center(&self, c: CellCoord) -> (f64, f64) {
        (
            (c.col as f64 + 0.5) * self.cell_size,
            (c.row as f64 + 0.5) * self.cell_size,
        )
    }

    /// Whether a planar point lies inside a free cell.
    pub fn point_is_free(&self, x: f64, y: f64) -> bool {
        self.cell_of(x, y).is_some_and(|c| self.is_free(c))
    }

    pub fn spawn_pose(&self, slot: usize, yaw: f64) -> Pose3 {
        let (x, y) = self.cell_center(self.spawns[slot]);
        Pose3::planar(x, y, yaw)
    }

    /// Fraction in `[0, 1]` of the segment `a -> b` that can be travelled before
    /// entering an occupied or out-of-bounds cell.
    fn free_fraction(&self, ax: f64, ay: f64, bx: f64, by: f64) -> f64 {
        let cs = self.cell_size;
        let Some(start) = self.cell_of(ax, ay) else {
            return 0.0;
        };
        let dx = bx - ax;
        let dy = by - ay;
        let (mut col, mut row) = (start.col as isize, start.row as isize);
        let step_c: isize = if dx > 0.0 { 1 } else { -1 };
        let step_r: isize = if dy > 0.0 { 1 } else { -1 };
        let next_boundary = |idx: isize, step: isize| -> f64 {
            if step > 0 {
                (idx + 1) as f64 * cs
            } else {
                idx as f64 * cs
            }
        };
        let mut t_max_c = if dx != 0.0 {
            (next_boundary(col, step_c) - ax) / dx
        } else {
            f64::INFINITY
        };
        let mut t_max_r = if dy != 0.0 {
            (next_boundary(row, step_r) - ay) / dy
        } else {
            f64::INFINITY
        };
        let t_delta_c = if dx != 0.0 { cs / dx.abs() } else { f64::INFINITY };
        let t_delta_r = if dy != 0.0 { cs / dy.abs() } else { f64::INFINITY };
        loop {
            let t_cross;
            if t_max_c < t_max_r {
                t_cross = t_max_c;
                col += step_c;
                t_max_c += t_delta_c;
            } else {
                t_cross = t_max_r;
                row += step_r;
                t_max_r += t_delta_r;
            }
            if t_cross >= 1.0 {
                return 1.0;
            }
            if !self.in_bounds(row, col) || !self.is_free(CellCoord::new(row as usize, col as usize)) {
                return t_cross.max(0.0);
            }
        }
    }

    /// Grid line of sight between two planar points (no occupied cell on the segment).
    pub fn line_of_sight(&self, ax: f64, ay: f64, bx: f64, by: f64) -> bool {
        self.point_is_free(ax, ay) && self.free_fraction(ax, ay, bx, by) >= 1.0
    }
}

/// Parsed text grid before landmarks are placed.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPlan {
    pub width: usize,
    pub height: usize,
    pub cells: Vec<Occupancy>,
    pub spawns: Vec<CellCoord>,
}

impl FromStr for GridPlan {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let rows: Vec<&str> = text
            .lines()
            .map(|l| l.trim_end())
            .filter(|l| !l.is_empty())
            .collect();
        if rows.is_empty() {
            return Err(Error::Parse("empty grid".into()));
        }
        let width = rows[0].chars().count();
        let mut cells = Vec::with_capacity(width * rows.len());
        let mut spawn_slots: Vec<Option<CellCoord>> = vec![None; 9];
        for (r, line) in rows.iter().enumerate() {
            if line.chars().count() != width {
                return Err(Error::Parse(format!("row {} has a different width", r + 1)));
            }
            for (c, ch) in line.chars().enumerate() {
                let cell = match ch {
                    '#' => Occupancy::Occupied,
                    '.' => Occupancy::Free,
                    '1'..='9' => {
                        let slot = ch as usize - '1' as usize;
                        if spawn_slots[slot].is_some() {
                            return Err(Error::Parse(format!("duplicate spawn '{ch}'")));
                        }
                        spawn_slots[slot] = Some(CellCoord::new(r, c));
                        Occupancy::Free
                    }
                    other => return Err(Error::Parse(format!("unexpected character '{other}' at row {}", r + 1))),
                };
                cells.push(cell);
            }
        }
        let count = spawn_slots.iter().take_while(|s| s.is_some()).count();
        if spawn_slots[count..].iter().any(Option::is_some) {
            return Err(Error::Parse("spawn digits must be consecutive from 1".into()));
        }
        Ok(GridPlan {
            width,
            height: rows.len(),
            cells,
            spawns: spawn_slots.into_iter().flatten().collect(),
        })
    }
}

fn largest_free_region(width: usize, height: usize, cells: &[Occupancy]) -> Vec<CellCoord> {
    let mut label = vec![usize::MAX; cells.len()];
    let mut best: Vec<CellCoord> = Vec::new();
    for start in 0..cells.len() {
        if cells[start] != Occupancy::Free || label[start] != usize::MAX {
            continue;
        }
        let mut region = Vec::new();
        let mut queue = VecDeque::from([start]);
        label[start] = start;
        while let Some(i) = queue.pop_front() {
            let (r, c) = (i / width, i % width);
            region.push(CellCoord::new(r, c));
            let neighbours = [
                (r.wrapping_sub(1), c),
                (r + 1, c),
                (r, c.wrapping_sub(1)),
                (r, c + 1),
            ];
            for (nr, nc) in neighbours {
                if nr < height && nc < width {
                    let j = nr * width + nc;
                    if cells[j] == Occupancy::Free && label[j] == usize::MAX {
                        label[j] = start;
                        queue.push_back(j);
                    }
                }
            }
        }
        if region.len() > best.len() {
            best = region;
        }
    }
    best
}

/// Motion and sensing capabilities of one agent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentAttributes {
    pub max_lin_vel: f64,
    pub max_ang_vel: f64,
    pub max_lin_acc: f64,
    pub max_ang_acc: f64,
    pub camera_noise_sigma: f64,
}

impl Default for AgentAttributes {
    fn default() -> Self {
        Self {
            max_lin_vel: 1.0,
            max_ang_vel: 1.0,
            max_lin_acc: 0.5,
            max_ang_acc: 1.0,
            camera_noise_sigma: 1.0,
        }
    }
}

impl AgentAttributes {
    fn fields(&self) -> [f64; 5] {
        [
            self.max_lin_vel,
            self.max_ang_vel,
            self.max_lin_acc,
            self.max_ang_acc,
            self.camera_noise_sigma,
        ]
    }

    fn from_fields(f: [f64; 5]) -> Self {
        Self {
            max_lin_vel: f[0],
            max_ang_vel: f[1],
            max_lin_acc: f[2],
            max_ang_acc: f[3],
            camera_noise_sigma: f[4],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.fields().iter().all(|v| *v > 0.0 && v.is_finite()) {
            Ok(())
        } else {
            Err(Error::InvalidConfiguration(format!("agent attributes must be positive: {self:?}")))
        }
    }
}

/// Draw `m` heterogeneous agents: every field is `N(mu, sigma1 * mu)` clamped to
/// at least `0.05 * mu`. Standard normals are drawn in a fixed order so that
/// the same stream yields proportionally scaled agents for different `sigma1`.
pub fn spawn_agents<R: Rng + ?Sized>(
    m: usize,
    mu: &AgentAttributes,
    sigma1: f64,
    rng: &mut R,
) -> Result<Vec<AgentAttributes>> {
    if m < 2 {
        return Err(Error::InvalidConfiguration(format!("need at least 2 agents, got {m}")));
    }
    if !(sigma1 >= 0.0) {
        return Err(Error::InvalidConfiguration(format!("sigma1 must be >= 0, got {sigma1}")));
    }
    mu.validate()?;
    let means = mu.fields();
    Ok((0..m)
        .map(|_| {
            let mut f = [0.0; 5];
            for (k, mean) in means.iter().enumerate() {
                let z: f64 = StandardNormal.sample(rng);
                f[k] = (mean + sigma1 * mean * z).max(0.05 * mean);
            }
            AgentAttributes::from_fields(f)
        })
        .collect())
}

/// Linear and angular speed of an agent.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Velocity {
    pub linear: f64,
    pub angular: f64,
}

/// Desired linear speed and angular rate.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Command {
    pub linear: f64,
    pub angular: f64,
}

/// What a kinematic step actually did.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Motion {
    pub distance: f64,
    pub turn: f64,
    pub blocked: bool,
}

/// Advance a planar agent by `dt`: accelerate toward the command within the
/// acceleration limits, clamp speeds, integrate about the vertical axis and
/// truncate motion at the first occupied cell boundary.
pub fn step_kinematics(
    world: &GridWorld,
    pose: &Pose3,
    vel: Velocity,
    cmd: Command,
    attrs: &AgentAttributes,
    dt: f64,
) -> (Pose3, Velocity, Motion) {
    let lin_step = attrs.max_lin_acc * dt;
    let ang_step = attrs.max_ang_acc * dt;
    let mut linear = vel.linear + (cmd.linear - vel.linear).clamp(-lin_step, lin_step);
    linear = linear.clamp(-attrs.max_lin_vel, attrs.max_lin_vel);
    let mut angular = vel.angular + (cmd.angular - vel.angular).clamp(-ang_step, ang_step);
    angular = angular.clamp(-attrs.max_ang_vel, attrs.max_ang_vel);

    let yaw0 = pose.yaw();
    let turn = angular * dt;
    let yaw1 = yaw0 + turn;
    let heading = yaw0 + 0.5 * turn;
    let dist = linear * dt;
    let (ax, ay) = (pose.translation.x, pose.translation.y);
    let (bx, by) = (ax + dist * heading.cos(), ay + dist * heading.sin());

    let mut motion = Motion {
        distance: dist.abs(),
        turn: turn.abs(),
        blocked: false,
    };
    let (x, y) = if dist == 0.0 {
        (ax, ay)
    } else {
        let frac = world.free_fraction(ax, ay, bx, by);
        if frac >= 1.0 {
            (bx, by)
        } else {
            motion.blocked = true;
            let travel = (frac * dist.abs() - WALL_EPS).max(0.0);
            motion.distance = travel;
            linear = 0.0;
            (ax + travel * heading.cos() * dist.signum(), ay + travel * heading.sin() * dist.signum())
        }
    };
    let mut next = Pose3::planar(x, y, yaw1);
    next.translation.z = pose.translation.z;
    (next, Velocity { linear, angular }, motion)
}

/// Whether a camera-frame point is inside the sensor frustum.
pub fn in_field_of_view(p_c: &Vector3<f64>, range: f64) -> bool {
    p_c.x > 0.0 && p_c.y.abs().atan2(p_c.x) <= HALF_FOV && p_c.norm() <= range
}

/// Ids of landmarks inside the noise-free frustum of `pose`.
pub fn visible_landmarks(world: &GridWorld, pose: &Pose3, range: f64) -> Vec<u32> {
    world
        .landmarks()
        .iter()
        .filter(|l| in_field_of_view(&pose.inverse_transform_point(&l.position), range))
        .map(|l| l.id)
        .collect()
}

/// Landmarks in range and field of view, expressed in the camera frame with
/// additive Gaussian noise of `0.01 * sigma2` m per axis.
pub fn observe_points<R: Rng + ?Sized>(
    world: &GridWorld,
    true_pose: &Pose3,
    sigma2: f64,
    range: f64,
    rng: &mut R,
) -> Vec<(u32, Vector3<f64>)> {
    let sd = POINT_NOISE_PER_SIGMA * sigma2;
    world
        .landmarks()
        .iter()
        .filter_map(|l| {
            let p_c = true_pose.inverse_transform_point(&l.position);
            in_field_of_view(&p_c, range).then(|| (l.id, p_c + noise3(sd, rng)))
        })
        .collect()
}

pub(crate) fn noise3<R: Rng + ?Sized>(sd: f64, rng: &mut R) -> Vector3<f64> {
    if sd == 0.0 {
        return Vector3::zeros();
    }
    let x: f64 = StandardNormal.sample(rng);
    let y: f64 = StandardNormal.sample(rng);
    let z: f64 = StandardNormal.sample(rng);
    Vector3::new(x, y, z) * sd
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Stream};

    fn corridor() -> GridWorld {
        let text = "#######\n#1....#\n#.2...#\n#######\n";
        GridWorld::parse(text, 1.0, &mut stream(1, Stream::World, 0)).unwrap()
    }

    #[test]
    fn parses_grid_and_spawns() {
        let w = corridor();
        assert_eq!((w.width(), w.height()), (7, 4));
        assert_eq!(w.spawns(), &[CellCoord::new(1, 1), CellCoord::new(2, 2)]);
        assert!(!w.is_free(CellCoord::new(0, 0)));
        for l in w.landmarks() {
            let c = w.cell_of(l.position.x, l.position.y).unwrap();
            assert!(w.is_free(c));
        }
    }

    #[test]
    fn rejects_bad_grids() {
        assert!("#x#".parse::<GridPlan>().is_err());
        assert!("##\n#".parse::<GridPlan>().is_err());
        assert!("1.1".parse::<GridPlan>().is_err());
        assert!("2..".parse::<GridPlan>().is_err());
        let mut rng = stream(0, Stream::World, 0);
        assert!(GridWorld::parse("1..", 0.0, &mut rng).is_err());
    }

    #[test]
    fn random_world_spawns_are_free() {
        let mut rng = stream(3, Stream::World, 0);
        let w = GridWorld::random(50, 50, 0.5, 0.15, 4, &mut rng).unwrap();
        assert_eq!(w.spawns().len(), 4);
        for s in w.spawns() {
            assert!(w.is_free(*s));
        }
    }

    #[test]
    fn zero_sigma_reproduces_mean() {
        let mu = AgentAttributes::default();
        let agents = spawn_agents(5, &mu, 0.0, &mut stream(1, Stream::Attributes, 0)).unwrap();
        assert!(agents.iter().all(|a| *a == mu));
    }

    #[test]
    fn heterogeneous_agents_differ() {
        let mu = AgentAttributes::default();
        let agents = spawn_agents(4, &mu, 0.2, &mut stream(1, Stream::Attributes, 0)).unwrap();
        assert!(agents.windows(2).any(|w| w[0] != w[1]));
        for a in &agents {
            assert!(a.validate().is_ok());
        }
    }

    #[test]
    fn too_few_agents_rejected() {
        let mu = AgentAttributes::default();
        assert!(spawn_agents(1, &mu, 0.2, &mut stream(1, Stream::Attributes, 0)).is_err());
    }

    #[test]
    fn sample_mean_within_three_standard_errors() {
        let mu = AgentAttributes::default();
        let agents = spawn_agents(1000, &mu, 0.2, &mut stream(11, Stream::Attributes, 0)).unwrap();
        let v: Vec<f64> = agents.iter().map(|a| a.max_lin_vel).collect();
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (v.len() - 1) as f64;
        let se = (var / v.len() as f64).sqrt();
        assert!((mean - mu.max_lin_vel).abs() < 3.0 * se, "mean {mean} se {se}");
    }

    #[test]
    fn rest_stays_at_rest() {
        let w = corridor();
        let pose = w.spawn_pose(0, 0.3);
        let (next, vel, motion) = step_kinematics(&w, &pose, Velocity::default(), Command::default(), &AgentAttributes::default(), 0.5);
        assert_eq!(next.translation, pose.translation);
        assert!((next.yaw() - 0.3).abs() < 1e-15);
        assert_eq!(vel, Velocity::default());
        assert_eq!(motion.distance, 0.0);
    }

    #[test]
    fn acceleration_clamp() {
        let w = corridor();
        let attrs = AgentAttributes {
            max_lin_acc: 1.0,
            max_lin_vel: 5.0,
            ..Default::default()
        };
        let (_, vel, _) = step_kinematics(
            &w,
            &w.spawn_pose(0, 0.0),
            Velocity::default(),
            Command { linear: 10.0, angular: 0.0 },
            &attrs,
            0.5,
        );
        assert_eq!(vel.linear, 0.5);
    }

    #[test]
    fn truncates_at_wall_boundary() {
        // Agent at x = 4.5 in a row whose wall starts at x = 6.0.
        let w = corridor();
        let start = Pose3::planar(4.5, 1.5, 0.0);
        let attrs = AgentAttributes {
            max_lin_vel: 4.0,
            max_lin_acc: 100.0,
            ..Default::default()
        };
        let (next, vel, motion) = step_kinematics(
            &w,
            &start,
            Velocity { linear: 4.0, angular: 0.0 },
            Command { linear: 4.0, angular: 0.0 },
            &attrs,
            0.5,
        );
        assert!(motion.blocked);
        assert!((next.translation.x - 6.0).abs() < 1e-8);
        assert!(w.point_is_free(next.translation.x, next.translation.y));
        assert_eq!(vel.linear, 0.0);
    }

    #[test]
    fn noiseless_observation_is_inverse_transform() {
        let w = corridor();
        let pose = Pose3::planar(1.5, 1.5, 0.0);
        let obs = observe_points(&w, &pose, 0.0, SENSOR_RANGE, &mut stream(0, Stream::PointNoise, 0));
        assert!(!obs.is_empty());
        for (id, p) in obs {
            let lw = w.landmarks()[id as usize].position;
            assert_eq!(p, pose.rotation.transpose() * (lw - pose.translation));
        }
    }

    #[test]
    fn points_behind_are_excluded() {
        let w = corridor();
        let pose = Pose3::planar(5.5, 1.5, 0.0);
        let obs = observe_points(&w, &pose, 0.0, SENSOR_RANGE, &mut stream(0, Stream::PointNoise, 0));
        for (id, _) in obs {
            assert!(w.landmarks()[id as usize].position.x > 5.5);
        }
    }

    #[test]
    fn point_noise_calibration() {
        let w = corridor();
        let pose = Pose3::planar(1.5, 1.5, 0.0);
        let mut rng = stream(5, Stream::PointNoise, 0);
        let first = observe_points(&w, &pose, 0.0, SENSOR_RANGE, &mut rng)[0];
        let mut samples = Vec::new();
        for _ in 0..10_000 {
            let obs = observe_points(&w, &pose, 1.0, SENSOR_RANGE, &mut rng);
            let (_, p) = obs.iter().find(|(id, _)| *id == first.0).unwrap();
            samples.push(p - first.1);
        }
        for axis in 0..3 {
            let n = samples.len() as f64;
            let mean = samples.iter().map(|s| s[axis]).sum::<f64>() / n;
            let sd = (samples.iter().map(|s| (s[axis] - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
            assert!((sd - 0.01).abs() < 0.001, "axis {axis}: sd {sd}");
        }
    }
}
