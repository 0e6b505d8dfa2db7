//! Planar N-link serial arm: forward kinematics, analytic Jacobian, and
//! link geometry for collision queries.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Wrap an angle into `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut r = a.rem_euclid(two_pi);
    if r > std::f64::consts::PI {
        r -= two_pi;
    }
    r
}

/// A planar serial arm with revolute joints at each link boundary.
///
/// The base sits at the origin; joint angles are relative to the previous
/// link, so the absolute heading of link `i` is the prefix sum of `q`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArmModel {
    /// Length of each link in meters; one entry per joint.
    pub link_lengths: Vec<f64>,
    /// `[lo, hi]` joint angle interval in radians, per joint.
    pub joint_limits: Vec<[f64; 2]>,
    /// Capsule radius used for collision checking, meters.
    pub link_radius: f64,
}

impl ArmModel {
    pub fn new(link_lengths: Vec<f64>, joint_limits: Vec<[f64; 2]>, link_radius: f64) -> Result<Self> {
        let arm = ArmModel { link_lengths, joint_limits, link_radius };
        arm.validate()?;
        Ok(arm)
    }

    /// Uniform arm with `n` links of length `len` and symmetric limits.
    pub fn uniform(n: usize, len: f64, limit: f64, link_radius: f64) -> Result<Self> {
        Self::new(vec![len; n], vec![[-limit, limit]; n], link_radius)
    }

    pub fn validate(&self) -> Result<()> {
        if self.link_lengths.is_empty() {
            return Err(Error::InvalidModel("link_lengths is empty".into()));
        }
        for (i, &l) in self.link_lengths.iter().enumerate() {
            if !(l > 0.0) {
                return Err(Error::InvalidModel(format!("link_lengths[{i}] must be > 0, got {l}")));
            }
        }
        if self.joint_limits.len() != self.link_lengths.len() {
            return Err(Error::InvalidModel(format!(
                "joint_limits has {} entries, expected {}",
                self.joint_limits.len(),
                self.link_lengths.len()
            )));
        }
        for (i, lim) in self.joint_limits.iter().enumerate() {
            if !(lim[0] < lim[1]) {
                return Err(Error::InvalidModel(format!(
                    "joint_limits[{i}] must satisfy lo < hi, got [{}, {}]",
                    lim[0], lim[1]
                )));
            }
        }
        if !(self.link_radius >= 0.0) {
            return Err(Error::InvalidModel(format!("link_radius must be >= 0, got {}", self.link_radius)));
        }
        Ok(())
    }

    /// Number of joints.
    pub fn dof(&self) -> usize {
        self.link_lengths.len()
    }

    /// Total reach, the sum of link lengths.
    pub fn reach(&self) -> f64 {
        self.link_lengths.iter().sum()
    }

    /// Clamp each joint into its limit interval.
    pub fn clamp_to_limits(&self, q: &mut DVector<f64>) {
        for i in 0..self.dof() {
            q[i] = q[i].clamp(self.joint_limits[i][0], self.joint_limits[i][1]);
        }
    }

    pub fn within_limits(&self, q: &DVector<f64>) -> bool {
        (0..self.dof()).all(|i| q[i] >= self.joint_limits[i][0] && q[i] <= self.joint_limits[i][1])
    }

    fn check_dim(&self, q: &JointConfig) -> Result<()> {
        if q.dim() != self.dof() {
            return Err(Error::DimensionMismatch { expected: self.dof(), got: q.dim() });
        }
        Ok(())
    }
}

/// A point in the arm's configuration space (radians per joint).
#[derive(Clone, Debug, PartialEq)]
pub struct JointConfig {
    pub q: DVector<f64>,
}

impl JointConfig {
    pub fn new(q: DVector<f64>) -> Self {
        JointConfig { q }
    }

    pub fn from_slice(q: &[f64]) -> Self {
        JointConfig { q: DVector::from_column_slice(q) }
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.q.iter().copied().collect()
    }
}

impl From<Vec<f64>> for JointConfig {
    fn from(v: Vec<f64>) -> Self {
        JointConfig { q: DVector::from_vec(v) }
    }
}

/// End-effector pose in the plane; `theta` is normalized to `(-pi, pi]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanarPose {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl PlanarPose {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        PlanarPose { x, y, theta: wrap_angle(theta) }
    }

    pub fn identity() -> Self {
        PlanarPose { x: 0.0, y: 0.0, theta: 0.0 }
    }

    /// Re-wrap `theta`; deserialized poses go through this at validation.
    pub fn normalized(self) -> Self {
        PlanarPose::new(self.x, self.y, self.theta)
    }

    /// Compose two poses: apply `other` in this pose's frame.
    pub fn compose(&self, other: &PlanarPose) -> PlanarPose {
        let (s, c) = self.theta.sin_cos();
        PlanarPose::new(
            self.x + c * other.x - s * other.y,
            self.y + s * other.x + c * other.y,
            self.theta + other.theta,
        )
    }

    /// Inverse pose, so `p.compose(&p.inverse())` is the identity.
    pub fn inverse(&self) -> PlanarPose {
        let (s, c) = self.theta.sin_cos();
        PlanarPose::new(-c * self.x - s * self.y, s * self.x - c * self.y, -self.theta)
    }
}

/// Allocation-free squared Euclidean distance between configurations.
pub(crate) fn dist_sq(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut s = 0.0;
    for i in 0..a.len() {
        let d = a[i] - b[i];
        s += d * d;
    }
    s
}

/// Visit each link segment in base-to-tip order without allocating.
pub(crate) fn for_each_link_segment(
    arm: &ArmModel,
    q: &DVector<f64>,
    mut visit: impl FnMut(Segment) -> bool,
) {
    let mut x = 0.0;
    let mut y = 0.0;
    let mut heading = 0.0;
    for i in 0..arm.dof() {
        heading += q[i];
        let nx = x + arm.link_lengths[i] * heading.cos();
        let ny = y + arm.link_lengths[i] * heading.sin();
        if !visit(Segment { a: [x, y], b: [nx, ny] }) {
            return;
        }
        x = nx;
        y = ny;
    }
}

/// Cumulative joint positions: base, joint 1, ..., end effector.
/// `n + 1` points; consecutive pairs are the link segments.
pub(crate) fn joint_points(arm: &ArmModel, q: &DVector<f64>) -> Vec<[f64; 2]> {
    let mut pts = Vec::with_capacity(arm.dof() + 1);
    let mut x = 0.0;
    let mut y = 0.0;
    let mut heading = 0.0;
    pts.push([x, y]);
    for i in 0..arm.dof() {
        heading += q[i];
        x += arm.link_lengths[i] * heading.cos();
        y += arm.link_lengths[i] * heading.sin();
        pts.push([x, y]);
    }
    pts
}

pub(crate) fn fk_raw(arm: &ArmModel, q: &DVector<f64>) -> PlanarPose {
    let mut x = 0.0;
    let mut y = 0.0;
    let mut heading = 0.0;
    for i in 0..arm.dof() {
        heading += q[i];
        x += arm.link_lengths[i] * heading.cos();
        y += arm.link_lengths[i] * heading.sin();
    }
    PlanarPose::new(x, y, heading)
}

/// End-effector pose for configuration `q`.
pub fn forward_kinematics(arm: &ArmModel, q: &JointConfig) -> Result<PlanarPose> {
    arm.check_dim(q)?;
    Ok(fk_raw(arm, &q.q))
}

pub(crate) fn jacobian_raw(arm: &ArmModel, q: &DVector<f64>) -> DMatrix<f64> {
    let n = arm.dof();
    // Absolute heading of each link.
    let mut headings = vec![0.0; n];
    let mut acc = 0.0;
    for i in 0..n {
        acc += q[i];
        headings[i] = acc;
    }
    let mut jac = DMatrix::zeros(3, n);
    // d(x, y)/dq_j sums the contribution of every link at or beyond joint j;
    // accumulate from the last column backwards.
    let mut sx = 0.0;
    let mut sy = 0.0;
    for j in (0..n).rev() {
        sx += -arm.link_lengths[j] * headings[j].sin();
        sy += arm.link_lengths[j] * headings[j].cos();
        jac[(0, j)] = sx;
        jac[(1, j)] = sy;
        jac[(2, j)] = 1.0;
    }
    jac
}

/// Analytic Jacobian of [`forward_kinematics`]: rows are d(x, y, theta)/dq.
pub fn jacobian(arm: &ArmModel, q: &JointConfig) -> Result<DMatrix<f64>> {
    arm.check_dim(q)?;
    Ok(jacobian_raw(arm, &q.q))
}

/// A straight link segment from `a` to `b` (base of a capsule).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Segment {
    pub a: [f64; 2],
    pub b: [f64; 2],
}

/// The arm's link segments at configuration `q`, base to end effector.
pub fn link_segments(arm: &ArmModel, q: &JointConfig) -> Result<Vec<Segment>> {
    arm.check_dim(q)?;
    let pts = joint_points(arm, &q.q);
    Ok(pts.windows(2).map(|w| Segment { a: w[0], b: w[1] }).collect())
}
