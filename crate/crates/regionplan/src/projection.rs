//! First-order gradient projection of configurations onto the constraint
//! manifold.
//!
//! Each iteration solves the damped normal equations
//! `dq = -J^T (J J^T + lambda I)^{-1} F(q)`, clamps the step, and clamps
//! the iterate into the joint limits. A halve-on-increase backtrack keeps
//! the residual norm non-increasing across accepted iterations.

use nalgebra::{DMatrix, DVector};

use crate::constraints::ConstraintSet;
use crate::error::{Error, Result};
use crate::kinematics::JointConfig;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProjectionParams {
    /// Residual-norm tolerance for convergence.
    pub epsilon: f64,
    /// Iteration cap; exceeding it is a non-convergence failure.
    pub max_iters: usize,
    /// Tikhonov damping `lambda` for the normal-equations solve.
    pub damping: f64,
    /// Maximum `|dq|` per iteration, radians.
    pub step_clamp: f64,
    /// When false, take the raw direction `-J^T (J J^T) F(q)` instead of
    /// the damped pseudoinverse step; kept for comparison runs.
    pub invert_gram: bool,
}

impl Default for ProjectionParams {
    fn default() -> Self {
        ProjectionParams {
            epsilon: 1e-4,
            max_iters: 100,
            damping: 1e-9,
            step_clamp: 0.5,
            invert_gram: true,
        }
    }
}

impl ProjectionParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidModel(format!("epsilon must be > 0, got {}", self.epsilon)));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidModel("max_iters must be >= 1".into()));
        }
        if !(self.damping >= 0.0) {
            return Err(Error::InvalidModel(format!("damping must be >= 0, got {}", self.damping)));
        }
        if !(self.step_clamp > 0.0) {
            return Err(Error::InvalidModel(format!("step_clamp must be > 0, got {}", self.step_clamp)));
        }
        Ok(())
    }
}

/// Result of a successful projection.
#[derive(Clone, Debug)]
pub struct Projection {
    pub q: JointConfig,
    /// Iterations consumed; zero when the input already satisfied `F`.
    pub iterations: usize,
}

fn clamp_limits(q: &mut DVector<f64>, limits: Option<&[[f64; 2]]>) {
    if let Some(lims) = limits {
        for i in 0..q.len() {
            q[i] = q[i].clamp(lims[i][0], lims[i][1]);
        }
    }
}

/// Project `q` onto the manifold of `f`, optionally clamped into joint
/// limits after every step.
pub fn project(
    q: &JointConfig,
    f: &ConstraintSet,
    limits: Option<&[[f64; 2]]>,
    params: &ProjectionParams,
) -> Result<Projection> {
    if q.dim() != f.dim() {
        return Err(Error::DimensionMismatch { expected: f.dim(), got: q.dim() });
    }
    if let Some(lims) = limits {
        if lims.len() != f.dim() {
            return Err(Error::DimensionMismatch { expected: f.dim(), got: lims.len() });
        }
    }

    let mut cur = q.q.clone();
    let mut res = f.residual_at(&cur);
    let mut norm = res.norm();
    if norm <= params.epsilon {
        return Ok(Projection { q: JointConfig::new(cur), iterations: 0 });
    }

    let k = f.rows();
    for iter in 1..=params.max_iters {
        let jac = f.jacobian_at(&cur);
        let mut dq = if params.invert_gram {
            let mut gram = &jac * jac.transpose();
            for i in 0..k {
                gram[(i, i)] += params.damping;
            }
            let y = solve_spd(&gram, &res)?;
            -(jac.transpose() * y)
        } else {
            let gram: DMatrix<f64> = &jac * jac.transpose();
            -(jac.transpose() * (gram * &res))
        };

        let step_norm = dq.norm();
        if step_norm > params.step_clamp {
            dq *= params.step_clamp / step_norm;
        }

        // Halve on residual increase, up to 8 times; if the step still makes
        // things worse we stay put for this iteration.
        let mut accepted = None;
        let mut scale = 1.0;
        for _ in 0..=8 {
            let mut cand = &cur + &dq * scale;
            clamp_limits(&mut cand, limits);
            let cand_res = f.residual_at(&cand);
            let cand_norm = cand_res.norm();
            if !cand_norm.is_finite() {
                return Err(Error::Numeric("non-finite residual during projection".into()));
            }
            if cand_norm <= norm {
                accepted = Some((cand, cand_res, cand_norm));
                break;
            }
            scale *= 0.5;
        }
        if let Some((cand, cand_res, cand_norm)) = accepted {
            debug_assert!(cand_norm <= norm);
            cur = cand;
            res = cand_res;
            norm = cand_norm;
        }

        if norm <= params.epsilon {
            return Ok(Projection { q: JointConfig::new(cur), iterations: iter });
        }
    }

    Err(Error::NonConvergence { iterations: params.max_iters, residual: norm })
}

fn solve_spd(gram: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    match gram.clone().cholesky() {
        Some(chol) => Ok(chol.solve(rhs)),
        None => Err(Error::Numeric("singular or indefinite J J^T in projection solve".into())),
    }
}
