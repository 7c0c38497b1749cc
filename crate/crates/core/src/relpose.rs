//! Target pose recovery from feature points observed on the target's body.
//!
//! Observers express points in their camera frame; these are lifted to the
//! world with each observer's *estimated* pose, then the target pose
//! minimising `e = 1/2 sum ||p_w - (R p_model + t)||^2` is found with damped
//! Gauss-Newton on a left-multiplicative SE(3) perturbation.

use nalgebra::{DMatrix, DVector, Matrix3, Matrix6, Vector3, Vector6};

use crate::error::{Error, Result};
use crate::geometry::{skew, Pose3};
use crate::world::POINT_NOISE_PER_SIGMA;

pub const MAX_ITERATIONS: usize = 100;
const STEP_TOL: f64 = 1e-10;
const DECREASE_TOL: f64 = 1e-12;
const LAMBDA_INIT: f64 = 1e-3;
const LAMBDA_MAX: f64 = 1e12;

/// Points of the target seen by one observer, in that observer's camera frame.
#[derive(Debug, Clone, PartialEq)]
pub struct RelObservation {
    pub observer: usize,
    pub observer_pose: Pose3,
    /// `(model point id, camera-frame point)`.
    pub points: Vec<(usize, Vector3<f64>)>,
}

/// Feature points fixed to the target body.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetModel {
    points: Vec<Vector3<f64>>,
}

impl TargetModel {
    pub fn new(points: Vec<Vector3<f64>>) -> Result<Self> {
        if points.len() < 3 {
            return Err(Error::DegenerateInput("target model needs at least 3 points".into()));
        }
        Ok(Self { points })
    }

    /// Corners of an axis-aligned cube of edge `side`, with its bottom face
    /// `base` metres above the body origin.
    pub fn cube(side: f64, base: f64) -> Self {
        let h = side * 0.5;
        let mut points = Vec::with_capacity(8);
        for z in [base, base + side] {
            for y in [-h, h] {
                for x in [-h, h] {
                    points.push(Vector3::new(x, y, z));
                }
            }
        }
        Self { points }
    }

    pub fn points(&self) -> &[Vector3<f64>] {
        &self.points
    }

    pub fn point(&self, id: usize) -> Option<&Vector3<f64>> {
        self.points.get(id)
    }
}

impl Default for TargetModel {
    fn default() -> Self {
        Self::cube(0.4, 0.1)
    }
}

/// Result of a pose solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseEstimate {
    pub pose: Pose3,
    /// Final value of the objective `e`.
    pub error: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// `R p_c + t`: camera point into world coordinates.
pub fn to_world(observer_pose: &Pose3, p_c: &Vector3<f64>) -> Vector3<f64> {
    observer_pose.rotation * p_c + observer_pose.translation
}

/// A world point paired with the model point it corresponds to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correspondence {
    pub world: Vector3<f64>,
    pub model: Vector3<f64>,
    pub model_id: usize,
}

pub fn correspondences(observations: &[RelObservation], model: &TargetModel) -> Result<Vec<Correspondence>> {
    let mut out = Vec::new();
    for obs in observations {
        for (id, p_c) in &obs.points {
            let model_point = model
                .point(*id)
                .ok_or_else(|| Error::InvalidArgument(format!("unknown model point id {id}")))?;
            out.push(Correspondence {
                world: to_world(&obs.observer_pose, p_c),
                model: *model_point,
                model_id: *id,
            });
        }
    }
    Ok(out)
}

/// Require at least three distinct, non-collinear model points.
pub fn check_geometry(corr: &[Correspondence]) -> Result<()> {
    let mut ids: Vec<usize> = corr.iter().map(|c| c.model_id).collect();
    ids.sort_unstable();
    ids.dedup();
    if ids.len() < 3 {
        return Err(Error::DegenerateInput(format!("{} distinct model points, need 3", ids.len())));
    }
    let a = corr[0].model;
    let b = corr
        .iter()
        .map(|c| c.model)
        .max_by(|p, q| (p - a).norm().total_cmp(&(q - a).norm()))
        .unwrap();
    let ab = b - a;
    let len = ab.norm();
    if len < 1e-9 {
        return Err(Error::DegenerateInput("model points coincide".into()));
    }
    let off_line = corr
        .iter()
        .map(|c| (c.model - a).cross(&ab).norm() / len)
        .fold(0.0, f64::max);
    if off_line < 1e-9 * len.max(1.0) {
        return Err(Error::DegenerateInput("model points are collinear".into()));
    }
    Ok(())
}

/// Objective `e` for a candidate target pose.
pub fn pose_error(pose: &Pose3, corr: &[Correspondence]) -> f64 {
    0.5 * corr
        .iter()
        .map(|c| (c.world - pose.transform_point(&c.model)).norm_squared())
        .sum::<f64>()
}

/// Stacked residuals `p_w - (R p_model + t)` and their Jacobian with respect
/// to a left perturbation `(rho, phi)`; each 3x6 block is `[-I, [q]x]` with
/// `q = R p_model + t`.
pub fn residuals_and_jacobian(pose: &Pose3, corr: &[Correspondence]) -> (DVector<f64>, DMatrix<f64>) {
    let mut r = DVector::zeros(3 * corr.len());
    let mut j = DMatrix::zeros(3 * corr.len(), 6);
    for (k, c) in corr.iter().enumerate() {
        let q = pose.transform_point(&c.model);
        r.fixed_rows_mut::<3>(3 * k).copy_from(&(c.world - q));
        j.fixed_view_mut::<3, 3>(3 * k, 0).copy_from(&(-Matrix3::identity()));
        j.fixed_view_mut::<3, 3>(3 * k, 3).copy_from(&skew(&q));
    }
    (r, j)
}

/// Least-squares rigid alignment of model points onto world points (SVD).
pub fn closed_form_alignment(corr: &[Correspondence]) -> Result<Pose3> {
    check_geometry(corr)?;
    let n = corr.len() as f64;
    let mc = corr.iter().map(|c| c.model).sum::<Vector3<f64>>() / n;
    let wc = corr.iter().map(|c| c.world).sum::<Vector3<f64>>() / n;
    let h = corr
        .iter()
        .map(|c| (c.model - mc) * (c.world - wc).transpose())
        .sum::<Matrix3<f64>>();
    let svd = h.svd(true, true);
    let u = svd.u.ok_or_else(|| Error::DegenerateInput("svd failed".into()))?;
    let vt = svd.v_t.ok_or_else(|| Error::DegenerateInput("svd failed".into()))?;
    let v = vt.transpose();
    let mut d = Matrix3::identity();
    if (v * u.transpose()).determinant() < 0.0 {
        d[(2, 2)] = -1.0;
    }
    let rotation = v * d * u.transpose();
    Ok(Pose3::new(rotation, wc - rotation * mc))
}

/// Closed-form alignment on the observer with the most points (lowest id on ties).
pub fn initial_guess(observations: &[RelObservation], model: &TargetModel) -> Result<Pose3> {
    let best = observations
        .iter()
        .max_by(|a, b| a.points.len().cmp(&b.points.len()).then(b.observer.cmp(&a.observer)))
        .ok_or_else(|| Error::DegenerateInput("no observations".into()))?;
    let single = correspondences(std::slice::from_ref(best), model)?;
    match closed_form_alignment(&single) {
        Ok(p) => Ok(p),
        Err(_) => closed_form_alignment(&correspondences(observations, model)?),
    }
}

/// Damped Gauss-Newton solve for the target pose.
///
/// Returns `DegenerateInput` if the observed points cannot fix a pose. When
/// the iteration budget runs out the best pose so far is returned with
/// `converged = false`.
pub fn estimate_pose(observations: &[RelObservation], model: &TargetModel, init: Pose3) -> Result<PoseEstimate> {
    let corr = correspondences(observations, model)?;
    check_geometry(&corr)?;

    let mut pose = init;
    let mut error = pose_error(&pose, &corr);
    let mut lambda = LAMBDA_INIT;
    for iteration in 1..=MAX_ITERATIONS {
        let (r, j) = residuals_and_jacobian(&pose, &corr);
        let jt = j.transpose();
        let h: Matrix6<f64> = (&jt * &j).fixed_view::<6, 6>(0, 0).into();
        let g: Vector6<f64> = (&jt * &r).fixed_rows::<6>(0).into();
        let damped = h + Matrix6::identity() * lambda;
        let Some(chol) = damped.cholesky() else {
            lambda *= 10.0;
            continue;
        };
        let step = chol.solve(&(-g));
        if step.norm() < STEP_TOL {
            return Ok(PoseEstimate { pose, error, iterations: iteration, converged: true });
        }
        let candidate = pose.perturb_left(&step);
        let candidate_error = pose_error(&candidate, &corr);
        if candidate_error < error {
            let decrease = error - candidate_error;
            pose = candidate;
            error = candidate_error;
            lambda = (lambda / 10.0).max(1e-12);
            if decrease < DECREASE_TOL {
                return Ok(PoseEstimate { pose, error, iterations: iteration, converged: true });
            }
        } else {
            lambda *= 10.0;
            if lambda > LAMBDA_MAX {
                // No descent direction left at machine precision.
                return Ok(PoseEstimate { pose, error, iterations: iteration, converged: true });
            }
        }
    }
    Ok(PoseEstimate {
        pose,
        error,
        iterations: MAX_ITERATIONS,
        converged: false,
    })
}

/// Quality annotation of a fix: the best observer's own position loss plus
/// its point-noise floor `0.01 * sigma2`. Each entry is `(loss, sigma2)`.
pub fn measurement_error(observers: &[(f64, f64)]) -> f64 {
    observers
        .iter()
        .map(|(loss, sigma2)| loss + POINT_NOISE_PER_SIGMA * sigma2)
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::so3_exp;

    fn target() -> Pose3 {
        Pose3::new(so3_exp(&Vector3::new(0.0, 0.0, 0.7)), Vector3::new(3.0, -1.0, 0.0))
    }

    fn observe(observer: usize, observer_pose: Pose3, target: &Pose3, model: &TargetModel) -> RelObservation {
        let points = model
            .points()
            .iter()
            .enumerate()
            .map(|(k, p)| (k, observer_pose.inverse_transform_point(&target.transform_point(p))))
            .collect();
        RelObservation { observer, observer_pose, points }
    }

    #[test]
    fn to_world_basics() {
        let p = Vector3::new(0.3, -0.2, 1.0);
        assert_eq!(to_world(&Pose3::identity(), &p), p);
        let shifted = Pose3::new(Matrix3::identity(), Vector3::new(1.0, 2.0, 3.0));
        assert_eq!(to_world(&shifted, &Vector3::zeros()), Vector3::new(1.0, 2.0, 3.0));
    }

    #[test]
    fn fixed_point_at_truth() {
        let model = TargetModel::default();
        let t = target();
        let obs = vec![observe(0, Pose3::planar(1.0, -1.0, 0.0), &t, &model)];
        let est = estimate_pose(&obs, &model, t).unwrap();
        assert!(est.iterations <= 2);
        assert!(est.error < 1e-18);
        assert!(est.converged);
    }

    #[test]
    fn recovers_from_offset_init() {
        let model = TargetModel::default();
        let t = target();
        let obs = vec![observe(0, Pose3::planar(1.0, -1.0, 0.2), &t, &model)];
        let init = Pose3::new(so3_exp(&Vector3::new(0.2, -0.1, 0.9)), Vector3::new(3.5, -0.4, 0.3));
        let est = estimate_pose(&obs, &model, init).unwrap();
        assert!(est.pose.translation_distance(&t) < 1e-8);
        assert!(est.pose.rotation_angle_to(&t) < 1e-8);
    }

    #[test]
    fn degenerate_inputs_rejected() {
        let model = TargetModel::default();
        let t = target();
        let mut obs = observe(0, Pose3::identity(), &t, &model);
        obs.points.truncate(2);
        assert!(matches!(estimate_pose(&[obs], &model, t), Err(Error::DegenerateInput(_))));

        let line = TargetModel::new(vec![Vector3::zeros(), Vector3::x(), Vector3::x() * 2.0]).unwrap();
        let obs = observe(0, Pose3::identity(), &t, &line);
        assert!(matches!(estimate_pose(&[obs], &line, t), Err(Error::DegenerateInput(_))));
    }

    #[test]
    fn measurement_error_takes_best_observer() {
        assert_eq!(measurement_error(&[(0.0, 0.0)]), 0.0);
        assert_eq!(measurement_error(&[(0.5, 0.0), (0.1, 0.0)]), 0.1);
        assert!((measurement_error(&[(0.2, 1.0), (0.3, 0.0)]) - 0.21).abs() < 1e-15);
    }

    #[test]
    fn cube_has_eight_corners() {
        let m = TargetModel::default();
        assert_eq!(m.points().len(), 8);
        for p in m.points() {
            assert!((p.x.abs() - 0.2).abs() < 1e-15 && (p.y.abs() - 0.2).abs() < 1e-15);
        }
    }
}
