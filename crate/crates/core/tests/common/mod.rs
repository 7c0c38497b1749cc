//! Independent oracles shared by the integration tests and the acceptance run.
#![allow(dead_code)]

use std::collections::VecDeque;

use masslam::coordinator::EdgeKind;
use masslam::geometry::Pose3;
use masslam::perception::{FeatureHistory, NormalizationScales, ObservationVector, OrbFeatureVector};
use masslam::planner::{NavCell, NavMap};
use masslam::relpose::{Correspondence, RelObservation, TargetModel};
use masslam::rl::network::{dueling_parts, Dense};
use masslam::rl::{QNetwork, QValues};
use masslam::world::CellCoord;
use nalgebra::{DMatrix, DVector, Matrix3, Matrix4, SymmetricEigen, UnitQuaternion, Vector3};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

// ---- relative pose ----

pub fn random_rotation(rng: &mut impl Rng) -> Matrix3<f64> {
    let q = UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(
        StandardNormal.sample(rng),
        StandardNormal.sample(rng),
        StandardNormal.sample(rng),
        StandardNormal.sample(rng),
    ));
    *q.to_rotation_matrix().matrix()
}

pub fn random_pose(rng: &mut impl Rng, spread: f64) -> Pose3 {
    let t = Vector3::new(rng.random_range(-spread..spread), rng.random_range(-spread..spread), rng.random_range(-1.0..1.0));
    Pose3::new(random_rotation(rng), t)
}

/// Pose `truth` disturbed by a rotation of up to `max_angle` and a shift of up to `max_shift`.
pub fn disturbed(truth: &Pose3, rng: &mut impl Rng, max_angle: f64, max_shift: f64) -> Pose3 {
    let axis = Vector3::new(StandardNormal.sample(rng), StandardNormal.sample(rng), StandardNormal.sample(rng)).normalize();
    let angle = rng.random_range(0.0..max_angle);
    let dir = Vector3::new(StandardNormal.sample(rng), StandardNormal.sample(rng), StandardNormal.sample(rng)).normalize();
    let shift = dir * rng.random_range(0.0..max_shift);
    let r = *nalgebra::Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(axis), angle).matrix();
    Pose3::new(r * truth.rotation, truth.translation + shift)
}

/// Horn's quaternion solution of the absolute orientation problem.
pub fn horn(corr: &[Correspondence]) -> Pose3 {
    let n = corr.len() as f64;
    let mc = corr.iter().map(|c| c.model).sum::<Vector3<f64>>() / n;
    let wc = corr.iter().map(|c| c.world).sum::<Vector3<f64>>() / n;
    let mut s = Matrix3::zeros();
    for c in corr {
        s += (c.model - mc) * (c.world - wc).transpose();
    }
    let (sxx, sxy, sxz) = (s[(0, 0)], s[(0, 1)], s[(0, 2)]);
    let (syx, syy, syz) = (s[(1, 0)], s[(1, 1)], s[(1, 2)]);
    let (szx, szy, szz) = (s[(2, 0)], s[(2, 1)], s[(2, 2)]);
    #[rustfmt::skip]
    let big = Matrix4::new(
        sxx + syy + szz, syz - szy,        szx - sxz,        sxy - syx,
        syz - szy,       sxx - syy - szz,  sxy + syx,        szx + sxz,
        szx - sxz,       sxy + syx,        -sxx + syy - szz, syz + szy,
        sxy - syx,       szx + sxz,        syz + szy,        -sxx - syy + szz,
    );
    let eig = SymmetricEigen::new(big);
    let k = eig.eigenvalues.imax();
    let v = eig.eigenvectors.column(k);
    let q = UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(v[0], v[1], v[2], v[3]));
    let r = *q.to_rotation_matrix().matrix();
    Pose3::new(r, wc - r * mc)
}

/// Rotation angle of `a^T b`, computed from the chord length so it stays
/// accurate near zero.
pub fn rotation_gap(a: &Pose3, b: &Pose3) -> f64 {
    let chord = (a.rotation - b.rotation).norm();
    2.0 * (chord / (2.0 * std::f64::consts::SQRT_2)).min(1.0).asin()
}

/// Translation gap (m) plus rotation gap (rad).
pub fn pose_gap(a: &Pose3, b: &Pose3) -> f64 {
    (a.translation - b.translation).norm() + rotation_gap(a, b)
}

/// Camera-frame view of every model point of a target at `truth`.
pub fn view(observer: usize, observer_pose: Pose3, truth: &Pose3, model: &TargetModel, noise: f64, rng: &mut impl Rng) -> RelObservation {
    let points = model
        .points()
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let mut p_c = observer_pose.inverse_transform_point(&truth.transform_point(p));
            if noise > 0.0 {
                p_c += Vector3::new(StandardNormal.sample(rng), StandardNormal.sample(rng), StandardNormal.sample(rng)) * noise;
            }
            (k, p_c)
        })
        .collect();
    RelObservation {
        observer,
        observer_pose,
        points,
    }
}

/// Random world/model correspondences for Jacobian checks.
pub fn random_correspondences(rng: &mut impl Rng, n: usize) -> Vec<Correspondence> {
    (0..n)
        .map(|k| Correspondence {
            world: Vector3::new(rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0), rng.random_range(-1.0..1.0)),
            model: Vector3::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5), rng.random_range(0.0..0.5)),
            model_id: k,
        })
        .collect()
}

// ---- planner ----

pub fn random_map(rng: &mut impl Rng, w: usize, h: usize, occupied: f64, unknown: f64) -> NavMap {
    let cells = (0..w * h)
        .map(|_| {
            let u: f64 = rng.random();
            if u < occupied {
                NavCell::Occupied
            } else if u < occupied + unknown {
                NavCell::Unknown
            } else {
                NavCell::Free
            }
        })
        .collect();
    NavMap::from_cells(w, h, 0.5, cells).unwrap()
}

pub fn open(map: &NavMap, r: isize, c: isize) -> bool {
    r >= 0
        && c >= 0
        && (r as usize) < map.height()
        && (c as usize) < map.width()
        && map.get(CellCoord::new(r as usize, c as usize)) != NavCell::Occupied
}

fn value(p: (u32, u32)) -> f64 {
    p.0 as f64 + p.1 as f64 * std::f64::consts::SQRT_2
}

/// Bellman-Ford relaxation over (straight, diagonal) move counts, run to a fixed point.
pub fn bellman_ford(map: &NavMap, source: CellCoord) -> Vec<Option<(u32, u32)>> {
    let (w, h) = (map.width(), map.height());
    let mut dist: Vec<Option<(u32, u32)>> = vec![None; w * h];
    if map.get(source) == NavCell::Occupied {
        return dist;
    }
    dist[source.row * w + source.col] = Some((0, 0));
    loop {
        let mut changed = false;
        for r in 0..h as isize {
            for c in 0..w as isize {
                let Some(d) = dist[r as usize * w + c as usize] else { continue };
                for dr in -1..=1isize {
                    for dc in -1..=1isize {
                        if (dr, dc) == (0, 0) || !open(map, r + dr, c + dc) {
                            continue;
                        }
                        let diag = dr != 0 && dc != 0;
                        if diag && !(open(map, r + dr, c) && open(map, r, c + dc)) {
                            continue;
                        }
                        let nd = if diag { (d.0, d.1 + 1) } else { (d.0 + 1, d.1) };
                        let k = (r + dr) as usize * w + (c + dc) as usize;
                        if dist[k].is_none_or(|old| value(nd) < value(old) - 1e-9) {
                            dist[k] = Some(nd);
                            changed = true;
                        }
                    }
                }
            }
        }
        if !changed {
            return dist;
        }
    }
}

// ---- rl ----

/// Forward pass that also asserts the dueling identity on the result.
pub fn forward(net: &QNetwork, x: &[f64]) -> QValues {
    let q = net.forward(x).unwrap();
    let (values, advantages) = dueling_parts(net, x).unwrap();
    let m = net.agents();
    for i in 0..m {
        let mean = (0..=m).map(|j| q.get(i, j) - values[i]).sum::<f64>() / (m + 1) as f64;
        assert!(mean.abs() < 1e-6, "agent {i}: advantage mean {mean:e}");
        for j in 0..=m {
            assert!((q.get(i, j) - values[i] - advantages[i][j]).abs() < 1e-9);
        }
    }
    q
}

pub fn random_net(rng: &mut impl Rng, input: usize, hidden: &[usize], m: usize) -> QNetwork {
    let mut net = QNetwork::new(input, hidden, m, rng).unwrap();
    for p in net.parameters_mut() {
        for v in p.iter_mut() {
            *v = rng.random_range(-1.0..1.0);
        }
    }
    net
}

// Toy MDP: three states visited in a cycle 0 -> 1 -> 2 -> 0, two agents,
// each agent's action only changes its own reward.
pub const GAMMA: f64 = 0.9;
pub const M: usize = 2;

pub fn toy_reward(state: usize, agent: usize, action: usize) -> f64 {
    [[1.0, -0.5, 0.25], [0.0, 2.0, -1.0], [0.5, 0.5, 3.0]][state][action] * if agent == 0 { 1.0 } else { -0.7 }
}

/// Exact optimal Q by value iteration on the cycle.
pub fn toy_q_star() -> Vec<[[f64; M + 1]; M]> {
    let mut v = [[0.0; M]; 3];
    for _ in 0..2000 {
        let mut nv = [[0.0; M]; 3];
        for s in 0..3 {
            for i in 0..M {
                nv[s][i] = (0..=M).map(|a| toy_reward(s, i, a) + GAMMA * v[(s + 1) % 3][i]).fold(f64::MIN, f64::max);
            }
        }
        v = nv;
    }
    (0..3)
        .map(|s| {
            let mut q = [[0.0; M + 1]; M];
            for (i, row) in q.iter_mut().enumerate() {
                for (a, cell) in row.iter_mut().enumerate() {
                    *cell = toy_reward(s, i, a) + GAMMA * v[(s + 1) % 3][i];
                }
            }
            q
        })
        .collect()
}

pub fn one_hot(s: usize) -> ObservationVector {
    let mut v = vec![0.0; 3];
    v[s] = 1.0;
    ObservationVector(v)
}

/// A network whose output on `one_hot(s)` is exactly `q[s]`.
pub fn tabular_net(q: &[[[f64; M + 1]; M]]) -> QNetwork {
    let trunk = vec![Dense {
        weights: DMatrix::identity(3, 3),
        bias: DVector::zeros(3),
    }];
    let mut head = DMatrix::zeros(QNetwork::head_width(M), 3);
    for (s, qs) in q.iter().enumerate() {
        for i in 0..M {
            let base = i * (M + 2);
            head[(base, s)] = qs[i].iter().sum::<f64>() / (M + 1) as f64;
            for j in 0..=M {
                head[(base + 1 + j, s)] = qs[i][j];
            }
        }
    }
    QNetwork::from_layers(
        M,
        trunk,
        Dense {
            weights: head,
            bias: DVector::zeros(QNetwork::head_width(M)),
        },
    )
    .unwrap()
}

pub fn greedy(q: &[[f64; M + 1]; M], i: usize) -> usize {
    (0..=M).fold(0, |b, a| if q[i][a] > q[i][b] { a } else { b })
}

// ---- perception ----

pub const DIAGONAL: f64 = 50.0;

/// Feature vector whose fields identify its tick and agent.
pub fn tagged(tick: usize, agent: usize, m: usize) -> OrbFeatureVector {
    OrbFeatureVector {
        map_points: (100 * tick + agent) as u32,
        kf_new: tick as u32,
        kf_culled: agent as u32,
        loop_interval: (10 * tick + agent) as u32,
        distances: (0..m - 1).map(|k| tick as f64 + 0.1 * agent as f64 + 0.01 * k as f64).collect(),
    }
}

pub fn normalize_by_hand(f: &OrbFeatureVector) -> Vec<f64> {
    let clip = |v: f64| v.clamp(0.0, 2.0);
    let mut out = vec![
        clip(f.map_points as f64 / 500.0),
        clip(f.kf_new as f64 / 10.0),
        clip(f.kf_culled as f64 / 10.0),
        clip(f.loop_interval as f64 / 200.0),
    ];
    out.extend(f.distances.iter().map(|d| clip(d / DIAGONAL)));
    out
}

pub fn tagged_history(m: usize, ticks: usize) -> FeatureHistory {
    let mut h = FeatureHistory::new(m, NormalizationScales::for_diagonal(DIAGONAL));
    for tick in 1..=ticks {
        h.push((1..=m).map(|j| tagged(tick, j, m)).collect()).unwrap();
    }
    h
}

/// The frame loop written out with explicit indices: frames `t, t-1, ...`
/// newest first, agents inside, ticks before 1 replaced by tick 1. Returns
/// the vector and the number of padded agent blocks.
pub fn unrolled_observation(n: usize, m: usize, t: usize) -> (Vec<f64>, usize) {
    let mut expected = Vec::new();
    let mut padded = 0;
    for i in 1..=n {
        let back = t as isize - i as isize + 1;
        let frame = if back > 0 { back as usize } else { 1 };
        for j in 1..=m {
            if back <= 0 {
                padded += 1;
            }
            expected.extend(normalize_by_hand(&tagged(frame, j, m)));
        }
    }
    (expected, padded)
}

// ---- coordinator ----

/// Components by breadth-first search over the undirected edge set.
pub fn components(edges: &[Option<(usize, EdgeKind)>]) -> Vec<Vec<usize>> {
    let n = edges.len();
    let mut adj = vec![Vec::new(); n];
    for (a, e) in edges.iter().enumerate() {
        if let Some((b, _)) = e {
            adj[a].push(*b);
            adj[*b].push(a);
        }
    }
    let mut seen = vec![false; n];
    let mut out = Vec::new();
    for s in 0..n {
        if seen[s] {
            continue;
        }
        let mut group = Vec::new();
        let mut queue = VecDeque::from([s]);
        seen[s] = true;
        while let Some(x) = queue.pop_front() {
            group.push(x);
            for y in &adj[x] {
                if !seen[*y] {
                    seen[*y] = true;
                    queue.push_back(*y);
                }
            }
        }
        group.sort();
        out.push(group);
    }
    out
}

/// Random assignment graph with losses and contributions for the utility identity.
pub fn random_group_graph(rng: &mut impl Rng) -> (Vec<Option<(usize, EdgeKind)>>, Vec<f64>, Vec<f64>) {
    let kinds = [EdgeKind::Pending, EdgeKind::Completed, EdgeKind::Failed];
    let n = rng.random_range(1..12);
    let edges: Vec<Option<(usize, EdgeKind)>> = (0..n)
        .map(|x| match rng.random_range(0..3) {
            0 => None,
            1 => Some((x, EdgeKind::SelfLoop)),
            _ => {
                let t = rng.random_range(0..n);
                Some(if t == x { (x, EdgeKind::SelfLoop) } else { (t, kinds[rng.random_range(0..3)]) })
            }
        })
        .collect();
    let losses: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..2.0)).collect();
    let contributions: Vec<f64> = edges
        .iter()
        .map(|e| if matches!(e, Some((_, EdgeKind::Completed))) { rng.random_range(-0.5..1.0) } else { 0.0 })
        .collect();
    (edges, losses, contributions)
}
