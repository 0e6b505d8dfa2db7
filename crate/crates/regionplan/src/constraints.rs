//! Constraint functions `F: C -> R^k` with Jacobians, including the
//! task-space-region (TSR) constraint and the scalar adherence objective
//! `G(q) = F(q)^T F(q)`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Matrix2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::{fk_raw, jacobian_raw, wrap_angle, ArmModel, JointConfig, PlanarPose};

/// Whether a [`ConstraintSet`] carries an analytic Jacobian or falls back
/// to central finite differences.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum JacobianMode {
    Analytic,
    Numeric,
}

type ResidualFn = Arc<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>;
type JacobianFn = Arc<dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync>;
type NormFn = Arc<dyn Fn(&DVector<f64>) -> f64 + Send + Sync>;

/// A constraint `F: R^n -> R^k`; a configuration satisfies it when
/// `|F(q)| <= tolerance`. Values are immutable and cheap to clone.
#[derive(Clone)]
pub struct ConstraintSet {
    k: usize,
    n: usize,
    mode: JacobianMode,
    residual_fn: ResidualFn,
    jacobian_fn: JacobianFn,
    /// Allocation-free `|F(q)|` for edge-validation hot loops.
    norm_fn: Option<NormFn>,
}

impl std::fmt::Debug for ConstraintSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ConstraintSet")
            .field("k", &self.k)
            .field("n", &self.n)
            .field("mode", &self.mode)
            .finish()
    }
}

const FD_STEP: f64 = 1e-6;

impl ConstraintSet {
    /// Constraint with a user-supplied analytic Jacobian.
    pub fn new_analytic<R, J>(k: usize, n: usize, residual: R, jacobian: J) -> Self
    where
        R: Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
        J: Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync + 'static,
    {
        ConstraintSet {
            k,
            n,
            mode: JacobianMode::Analytic,
            residual_fn: Arc::new(residual),
            jacobian_fn: Arc::new(jacobian),
            norm_fn: None,
        }
    }

    /// Constraint whose Jacobian is estimated by central differences.
    pub fn new_numeric<R>(k: usize, n: usize, residual: R) -> Self
    where
        R: Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    {
        let res: ResidualFn = Arc::new(residual);
        let res_for_jac = res.clone();
        let jac = move |q: &DVector<f64>| -> DMatrix<f64> {
            let mut out = DMatrix::zeros(k, n);
            for j in 0..n {
                let mut qp = q.clone();
                let mut qm = q.clone();
                qp[j] += FD_STEP;
                qm[j] -= FD_STEP;
                let col = (res_for_jac(&qp) - res_for_jac(&qm)) / (2.0 * FD_STEP);
                out.set_column(j, &col);
            }
            out
        };
        ConstraintSet { k, n, mode: JacobianMode::Numeric, residual_fn: res, jacobian_fn: Arc::new(jac), norm_fn: None }
    }

    /// `F(q) = Aq - b`.
    pub fn linear(a: DMatrix<f64>, b: DVector<f64>) -> Self {
        assert_eq!(a.nrows(), b.len());
        let (k, n) = (a.nrows(), a.ncols());
        let a2 = a.clone();
        ConstraintSet::new_analytic(k, n, move |q| &a * q - &b, move |_| a2.clone())
    }

    /// The empty constraint (`k = 0`); `G` is identically zero.
    pub fn unconstrained(n: usize) -> Self {
        ConstraintSet::new_analytic(0, n, |_| DVector::zeros(0), move |_| DMatrix::zeros(0, n))
    }

    /// TSR constraint on the arm's end effector with an analytic Jacobian.
    pub fn tsr(arm: &ArmModel, tsr: TsrConstraint) -> Self {
        let n = arm.dof();
        let arm_res = arm.clone();
        let arm_jac = arm.clone();
        let tsr_res = tsr.clone();
        let tsr_jac = tsr;
        let arm_norm = arm.clone();
        let tsr_norm = tsr_res.clone();
        let mut set = ConstraintSet::new_analytic(
            3,
            n,
            move |q| {
                let pose = fk_raw(&arm_res, q);
                tsr_residual(&pose, &tsr_res)
            },
            move |q| {
                let pose = fk_raw(&arm_jac, q);
                let d = tsr_displacement(&pose, &tsr_jac);
                let m = displacement_pose_jacobian(&pose, &tsr_jac);
                let mut jac = m * jacobian_raw(&arm_jac, q);
                for i in 0..3 {
                    if !tsr_jac.row_active(i, d[i]) {
                        jac.row_mut(i).fill(0.0);
                    }
                }
                jac
            },
        );
        set.norm_fn = Some(Arc::new(move |q: &DVector<f64>| {
            let pose = fk_raw(&arm_norm, q);
            tsr_residual_norm(&pose, &tsr_norm)
        }));
        set
    }

    /// Vertical concatenation; residual and Jacobian rows keep input order.
    pub fn stack(sets: Vec<ConstraintSet>) -> Result<Self> {
        let Some(first) = sets.first() else {
            return Err(Error::InvalidModel("stack of zero constraint sets".into()));
        };
        let n = first.n;
        for s in &sets {
            if s.n != n {
                return Err(Error::DimensionMismatch { expected: n, got: s.n });
            }
        }
        let k: usize = sets.iter().map(|s| s.k).sum();
        let mode = if sets.iter().all(|s| s.mode == JacobianMode::Analytic) {
            JacobianMode::Analytic
        } else {
            JacobianMode::Numeric
        };
        let res_sets = sets.clone();
        let jac_sets_for_norm = sets.clone();
        let jac_sets = sets;
        let residual = move |q: &DVector<f64>| {
            let mut out = DVector::zeros(k);
            let mut row = 0;
            for s in &res_sets {
                out.rows_mut(row, s.k).copy_from(&(s.residual_fn)(q));
                row += s.k;
            }
            out
        };
        let jacobian = move |q: &DVector<f64>| {
            let mut out = DMatrix::zeros(k, n);
            let mut row = 0;
            for s in &jac_sets {
                out.rows_mut(row, s.k).copy_from(&(s.jacobian_fn)(q));
                row += s.k;
            }
            out
        };
        let norm_sets: Vec<ConstraintSet> = jac_sets_for_norm;
        let norm = move |q: &DVector<f64>| -> f64 {
            norm_sets.iter().map(|s| s.residual_norm_at(q).powi(2)).sum::<f64>().sqrt()
        };
        Ok(ConstraintSet {
            k,
            n,
            mode,
            residual_fn: Arc::new(residual),
            jacobian_fn: Arc::new(jacobian),
            norm_fn: Some(Arc::new(norm)),
        })
    }

    /// Number of constraint rows `k`.
    pub fn rows(&self) -> usize {
        self.k
    }

    /// Configuration-space dimension `n`.
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn jacobian_mode(&self) -> JacobianMode {
        self.mode
    }

    fn check_dim(&self, q: &JointConfig) -> Result<()> {
        if q.dim() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: q.dim() });
        }
        Ok(())
    }

    /// Residual vector `F(q)`.
    pub fn evaluate(&self, q: &JointConfig) -> Result<DVector<f64>> {
        self.check_dim(q)?;
        Ok(self.residual_at(&q.q))
    }

    /// Jacobian `dF/dq`, `k x n`.
    pub fn jacobian(&self, q: &JointConfig) -> Result<DMatrix<f64>> {
        self.check_dim(q)?;
        Ok(self.jacobian_at(&q.q))
    }

    /// `G(q) = |F(q)|^2`, the constraint-adherence objective.
    pub fn squared_residual(&self, q: &JointConfig) -> f64 {
        assert_eq!(q.dim(), self.n, "configuration dimension mismatch");
        self.g_at(&q.q)
    }

    /// Hot-path residual without the dimension check wrapper.
    pub(crate) fn residual_at(&self, q: &DVector<f64>) -> DVector<f64> {
        debug_assert_eq!(q.len(), self.n);
        (self.residual_fn)(q)
    }

    pub(crate) fn jacobian_at(&self, q: &DVector<f64>) -> DMatrix<f64> {
        debug_assert_eq!(q.len(), self.n);
        (self.jacobian_fn)(q)
    }

    pub(crate) fn g_at(&self, q: &DVector<f64>) -> f64 {
        self.residual_at(q).norm_squared()
    }

    pub(crate) fn residual_norm_at(&self, q: &DVector<f64>) -> f64 {
        match &self.norm_fn {
            Some(f) => f(q),
            None => self.residual_at(q).norm(),
        }
    }
}

/// Bounds on the planar displacement `(dx, dy, dtheta)` between the
/// end-effector frame (composed with `ee_offset`) and `target_pose`,
/// expressed in the target frame. Zero-width rows are equality rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TsrConstraint {
    #[serde(rename = "target")]
    pub target_pose: PlanarPose,
    #[serde(rename = "offset", default = "PlanarPose::identity")]
    pub ee_offset: PlanarPose,
    /// `[lo, hi]` per displacement coordinate: meters, meters, radians.
    pub bounds: [[f64; 2]; 3],
}

impl TsrConstraint {
    pub fn new(target_pose: PlanarPose, ee_offset: PlanarPose, bounds: [[f64; 2]; 3]) -> Result<Self> {
        let t = TsrConstraint { target_pose, ee_offset, bounds };
        t.validate()?;
        Ok(t)
    }

    /// Equality TSR pinning the offset frame exactly to `target_pose`.
    pub fn equality(target_pose: PlanarPose, ee_offset: PlanarPose) -> Self {
        TsrConstraint { target_pose, ee_offset, bounds: [[0.0, 0.0]; 3] }
    }

    /// Orientation-only equality: position rows are free within `slack`.
    pub fn orientation(theta: f64, slack: f64) -> Self {
        TsrConstraint {
            target_pose: PlanarPose::new(0.0, 0.0, theta),
            ee_offset: PlanarPose::identity(),
            bounds: [[-slack, slack], [-slack, slack], [0.0, 0.0]],
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (i, b) in self.bounds.iter().enumerate() {
            if !(b[0] <= b[1]) {
                return Err(Error::InvalidModel(format!(
                    "bounds[{i}] must satisfy lo <= hi, got [{}, {}]",
                    b[0], b[1]
                )));
            }
        }
        Ok(())
    }

    /// Rows at the clamp boundary count as active (subgradient from the
    /// active side), which keeps equality rows differentiable at zero.
    fn row_active(&self, i: usize, d: f64) -> bool {
        d <= self.bounds[i][0] || d >= self.bounds[i][1]
    }
}

/// Displacement of `pose` composed with the TSR's end-effector offset,
/// relative to the target pose and expressed in the target frame.
pub fn tsr_displacement(pose: &PlanarPose, tsr: &TsrConstraint) -> DVector<f64> {
    let w = pose.compose(&tsr.ee_offset);
    let (s, c) = tsr.target_pose.theta.sin_cos();
    let dx = w.x - tsr.target_pose.x;
    let dy = w.y - tsr.target_pose.y;
    DVector::from_vec(vec![
        c * dx + s * dy,
        -s * dx + c * dy,
        wrap_angle(w.theta - tsr.target_pose.theta),
    ])
}

/// Scalar `|tsr_residual|` without intermediate vectors.
fn tsr_residual_norm(pose: &PlanarPose, tsr: &TsrConstraint) -> f64 {
    let w = pose.compose(&tsr.ee_offset);
    let (s, c) = tsr.target_pose.theta.sin_cos();
    let dx = w.x - tsr.target_pose.x;
    let dy = w.y - tsr.target_pose.y;
    let d = [
        c * dx + s * dy,
        -s * dx + c * dy,
        crate::kinematics::wrap_angle(w.theta - tsr.target_pose.theta),
    ];
    let mut acc = 0.0;
    for i in 0..3 {
        let [lo, hi] = tsr.bounds[i];
        let r = if d[i] > hi {
            d[i] - hi
        } else if d[i] < lo {
            d[i] - lo
        } else {
            0.0
        };
        acc += r * r;
    }
    acc.sqrt()
}

/// Clamp the displacement against the TSR bounds: zero inside, distance to
/// the violated bound outside.
pub fn tsr_residual(pose: &PlanarPose, tsr: &TsrConstraint) -> DVector<f64> {
    let d = tsr_displacement(pose, tsr);
    DVector::from_fn(3, |i, _| {
        let [lo, hi] = tsr.bounds[i];
        if d[i] > hi {
            d[i] - hi
        } else if d[i] < lo {
            d[i] - lo
        } else {
            0.0
        }
    })
}

/// `d(displacement)/d(pose)` as a 3x3 matrix; the wrap on the angle row is
/// a piecewise-constant offset and does not appear in the derivative.
fn displacement_pose_jacobian(pose: &PlanarPose, tsr: &TsrConstraint) -> DMatrix<f64> {
    let (st, ct) = tsr.target_pose.theta.sin_cos();
    let rot_t_inv = Matrix2::new(ct, st, -st, ct);
    let (sp, cp) = pose.theta.sin_cos();
    let drot = Matrix2::new(-sp, -cp, cp, -sp);
    let off = nalgebra::Vector2::new(tsr.ee_offset.x, tsr.ee_offset.y);
    let dxy_dtheta = rot_t_inv * drot * off;
    let mut m = DMatrix::zeros(3, 3);
    m[(0, 0)] = rot_t_inv[(0, 0)];
    m[(0, 1)] = rot_t_inv[(0, 1)];
    m[(1, 0)] = rot_t_inv[(1, 0)];
    m[(1, 1)] = rot_t_inv[(1, 1)];
    m[(0, 2)] = dxy_dtheta[0];
    m[(1, 2)] = dxy_dtheta[1];
    m[(2, 2)] = 1.0;
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::forward_kinematics;
    use approx::assert_relative_eq;
    use nalgebra::Matrix3;
    use proptest::prelude::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pose_matrix(p: &PlanarPose) -> Matrix3<f64> {
        let (s, c) = p.theta.sin_cos();
        Matrix3::new(c, -s, p.x, s, c, p.y, 0.0, 0.0, 1.0)
    }

    fn random_pose(rng: &mut ChaCha8Rng) -> PlanarPose {
        PlanarPose::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(-3.0..3.0))
    }

    #[test]
    fn displacement_identity() {
        let t = PlanarPose::new(0.4, -0.2, 0.9);
        let tsr = TsrConstraint::equality(t, PlanarPose::identity());
        let d = tsr_displacement(&t, &tsr);
        assert_relative_eq!(d.norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn displacement_pure_translation() {
        let t = PlanarPose::new(0.5, 0.1, 0.7);
        let tsr = TsrConstraint::equality(t, PlanarPose::identity());
        // Shift the pose 0.2 m along the target frame's x axis.
        let (s, c) = t.theta.sin_cos();
        let p = PlanarPose::new(t.x + 0.2 * c, t.y + 0.2 * s, t.theta);
        let d = tsr_displacement(&p, &tsr);
        assert_relative_eq!(d[0], 0.2, epsilon = 1e-12);
        assert_relative_eq!(d[1], 0.0, epsilon = 1e-12);
        assert_relative_eq!(d[2], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn displacement_matches_homogeneous_transform_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(101);
        for _ in 0..500 {
            let target = random_pose(&mut rng);
            let offset = random_pose(&mut rng);
            let pose = random_pose(&mut rng);
            let tsr = TsrConstraint::equality(target, offset);
            let d = tsr_displacement(&pose, &tsr);
            let m = pose_matrix(&target).try_inverse().unwrap()
                * pose_matrix(&pose)
                * pose_matrix(&offset);
            assert_relative_eq!(d[0], m[(0, 2)], epsilon = 1e-10);
            assert_relative_eq!(d[1], m[(1, 2)], epsilon = 1e-10);
            assert_relative_eq!(d[2], m[(1, 0)].atan2(m[(0, 0)]), epsilon = 1e-10);
        }
    }

    #[test]
    fn residual_clamping() {
        let tsr = TsrConstraint::new(
            PlanarPose::identity(),
            PlanarPose::identity(),
            [[-0.1, 0.1], [0.0, 0.0], [0.0, 0.0]],
        )
        .unwrap();
        let r = tsr_residual(&PlanarPose::new(0.05, 0.0, 0.0), &tsr);
        assert_relative_eq!(r.norm(), 0.0);
        let r = tsr_residual(&PlanarPose::new(0.3, 0.0, 0.0), &tsr);
        assert_relative_eq!(r[0], 0.2, epsilon = 1e-12);
        assert_relative_eq!(r[1], 0.0);
        assert_relative_eq!(r[2], 0.0);
    }

    #[test]
    fn zero_width_bounds_equal_displacement() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let tsr = TsrConstraint::equality(random_pose(&mut rng), random_pose(&mut rng));
            let pose = random_pose(&mut rng);
            let d = tsr_displacement(&pose, &tsr);
            let r = tsr_residual(&pose, &tsr);
            assert_relative_eq!((d - r).norm(), 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn evaluate_orientation_equality_on_manifold() {
        let arm = ArmModel::uniform(3, 0.3, 3.0, 0.01).unwrap();
        let theta = 0.6;
        let f = ConstraintSet::tsr(&arm, TsrConstraint::orientation(theta, 10.0));
        // Heading sums to theta; position rows sit far inside their bounds.
        let q = JointConfig::from_slice(&[0.1, 0.2, theta - 0.3]);
        let r = f.evaluate(&q).unwrap();
        assert_relative_eq!(r.norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn evaluate_linear_at_center() {
        let c = DVector::from_vec(vec![0.3, -0.8]);
        let f = ConstraintSet::linear(DMatrix::identity(2, 2), c.clone());
        let r = f.evaluate(&JointConfig::new(c)).unwrap();
        assert_relative_eq!(r.norm(), 0.0);
    }

    #[test]
    fn evaluate_matches_fk_transform_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let arm = ArmModel::uniform(4, 0.25, 3.0, 0.01).unwrap();
        for _ in 0..200 {
            let target = random_pose(&mut rng);
            let offset = random_pose(&mut rng);
            let tsr = TsrConstraint::equality(target, offset);
            let f = ConstraintSet::tsr(&arm, tsr.clone());
            let q = JointConfig::from_slice(&(0..4).map(|_| rng.gen_range(-3.0..3.0)).collect::<Vec<_>>());
            let r = f.evaluate(&q).unwrap();
            let pose = forward_kinematics(&arm, &q).unwrap();
            let expect = tsr_residual(&pose, &tsr);
            assert_relative_eq!((r - expect).norm(), 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn jacobian_linear_returns_matrix() {
        let a = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, -1.0, 0.5, 0.0]);
        let f = ConstraintSet::linear(a.clone(), DVector::zeros(2));
        let q = JointConfig::from_slice(&[0.4, -0.1, 2.0]);
        assert_eq!(f.jacobian(&q).unwrap(), a);
    }

    #[test]
    fn jacobian_zero_when_no_row_active() {
        let arm = ArmModel::uniform(2, 1.0, 3.0, 0.01).unwrap();
        let tsr = TsrConstraint::new(
            PlanarPose::identity(),
            PlanarPose::identity(),
            [[-10.0, 10.0], [-10.0, 10.0], [-10.0, 10.0]],
        )
        .unwrap();
        let f = ConstraintSet::tsr(&arm, tsr);
        let q = JointConfig::from_slice(&[0.3, 0.4]);
        assert_relative_eq!(f.jacobian(&q).unwrap().norm(), 0.0);
    }

    fn fd_constraint_jacobian(f: &ConstraintSet, q: &DVector<f64>, h: f64) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(f.rows(), f.dim());
        for j in 0..f.dim() {
            let mut qp = q.clone();
            let mut qm = q.clone();
            qp[j] += h;
            qm[j] -= h;
            out.set_column(j, &((f.residual_at(&qp) - f.residual_at(&qm)) / (2.0 * h)));
        }
        out
    }

    #[test]
    fn jacobian_matches_finite_differences_away_from_clamp() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let arm = ArmModel::uniform(5, 0.3, 3.0, 0.01).unwrap();
        let mut checked = 0;
        while checked < 300 {
            let target = random_pose(&mut rng);
            let offset = random_pose(&mut rng);
            let bounds = [[-0.3, 0.3], [0.0, 0.0], [0.0, 0.0]];
            let tsr = TsrConstraint::new(target, offset, bounds).unwrap();
            let q: DVector<f64> = DVector::from_fn(5, |_, _| rng.gen_range(-3.0..3.0));
            let pose = fk_raw(&arm, &q);
            let d = tsr_displacement(&pose, &tsr);
            // Skip samples near a clamp edge or the angle wrap point.
            let near_edge = (d[0] - 0.3).abs() < 1e-3
                || (d[0] + 0.3).abs() < 1e-3
                || d[2].abs() > std::f64::consts::PI - 1e-3;
            if near_edge {
                continue;
            }
            let f = ConstraintSet::tsr(&arm, tsr);
            let jac = f.jacobian_at(&q);
            let fd = fd_constraint_jacobian(&f, &q, 1e-6);
            let err = (&jac - &fd).abs().max();
            assert!(err <= 1e-5, "constraint Jacobian mismatch {err}");
            checked += 1;
        }
    }

    #[test]
    fn squared_residual_values() {
        let f = ConstraintSet::linear(
            DMatrix::identity(2, 2),
            DVector::from_vec(vec![0.0, 0.0]),
        );
        assert_relative_eq!(f.squared_residual(&JointConfig::from_slice(&[0.0, 0.0])), 0.0);
        assert_relative_eq!(f.squared_residual(&JointConfig::from_slice(&[0.3, 0.4])), 0.25);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let q = JointConfig::from_slice(&[rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]);
            let r = f.evaluate(&q).unwrap();
            assert_relative_eq!(f.squared_residual(&q), r.dot(&r));
        }
    }

    #[test]
    fn stack_behaviour() {
        let a = ConstraintSet::linear(
            DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
            DVector::from_vec(vec![0.5]),
        );
        let b = ConstraintSet::linear(
            DMatrix::from_row_slice(1, 2, &[0.0, 1.0]),
            DVector::from_vec(vec![-0.25]),
        );
        let single = ConstraintSet::stack(vec![a.clone()]).unwrap();
        let q = JointConfig::from_slice(&[0.9, 0.2]);
        assert_relative_eq!(
            (single.evaluate(&q).unwrap() - a.evaluate(&q).unwrap()).norm(),
            0.0
        );
        let both = ConstraintSet::stack(vec![a.clone(), b.clone()]).unwrap();
        assert_eq!(both.rows(), 2);
        let r = both.evaluate(&q).unwrap();
        assert_relative_eq!(r[0], 0.4, epsilon = 1e-12);
        assert_relative_eq!(r[1], 0.45, epsilon = 1e-12);
        // G of a stack is the sum of the parts.
        assert_relative_eq!(
            both.squared_residual(&q),
            a.squared_residual(&q) + b.squared_residual(&q),
            epsilon = 1e-12
        );
        assert!(ConstraintSet::stack(vec![]).is_err());
    }

    #[test]
    fn numeric_mode_recorded_and_close() {
        let f = ConstraintSet::new_numeric(1, 2, |q| DVector::from_vec(vec![q[0] * q[0] + q[1]]));
        assert_eq!(f.jacobian_mode(), JacobianMode::Numeric);
        let q = DVector::from_vec(vec![0.7, -0.3]);
        let jac = f.jacobian_at(&q);
        assert_relative_eq!(jac[(0, 0)], 1.4, epsilon = 1e-8);
        assert_relative_eq!(jac[(0, 1)], 1.0, epsilon = 1e-8);
    }

    #[test]
    fn evaluate_dimension_mismatch() {
        let f = ConstraintSet::unconstrained(3);
        assert!(f.evaluate(&JointConfig::from_slice(&[0.0])).is_err());
        assert_eq!(f.rows(), 0);
        assert_relative_eq!(f.squared_residual(&JointConfig::from_slice(&[0.0, 0.0, 0.0])), 0.0);
    }

    proptest! {
        /// The clamp residual is 1-Lipschitz in the displacement and zero
        /// exactly on the bound box.
        #[test]
        fn residual_piecewise_linear(
            dx in -2.0_f64..2.0,
            dx2 in -2.0_f64..2.0,
            lo in -1.0_f64..0.0,
            width in 0.0_f64..1.0,
        ) {
            let hi = lo + width;
            let clamp = |d: f64| if d > hi { d - hi } else if d < lo { d - lo } else { 0.0 };
            let (r1, r2) = (clamp(dx), clamp(dx2));
            prop_assert!((r1 - r2).abs() <= (dx - dx2).abs() + 1e-15);
            if dx >= lo && dx <= hi {
                prop_assert_eq!(r1, 0.0);
            } else {
                prop_assert!(r1 != 0.0);
            }
        }
    }
}
