//! 2D workspace model, capsule collision checking, discretized edge
//! validation, and scenario file ingestion.

use std::path::{Path, PathBuf};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::constraints::{ConstraintSet, TsrConstraint};
use crate::error::{Error, Result};
use crate::kinematics::{ArmModel, JointConfig, Segment};
use crate::projection::ProjectionParams;
use crate::regions::OptimizerParams;

/// Workspace obstacles, meters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Obstacle {
    Circle { center: [f64; 2], radius: f64 },
    Box { min: [f64; 2], max: [f64; 2] },
}

impl Obstacle {
    fn validate(&self, idx: usize) -> Result<()> {
        match self {
            Obstacle::Circle { radius, .. } => {
                if !(*radius > 0.0) {
                    return Err(Error::InvalidModel(format!(
                        "obstacles[{idx}].radius must be > 0, got {radius}"
                    )));
                }
            }
            Obstacle::Box { min, max } => {
                if !(min[0] < max[0] && min[1] < max[1]) {
                    return Err(Error::InvalidModel(format!(
                        "obstacles[{idx}] must have min < max per axis"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// The collision world; immutable after construction, queries are pure.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub obstacles: Vec<Obstacle>,
}

impl Environment {
    pub fn new(obstacles: Vec<Obstacle>) -> Self {
        Environment { obstacles }
    }

    pub fn empty() -> Self {
        Environment { obstacles: Vec::new() }
    }

    pub fn validate(&self) -> Result<()> {
        for (i, o) in self.obstacles.iter().enumerate() {
            o.validate(i)?;
        }
        Ok(())
    }
}

fn point_segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let ap = [p[0] - a[0], p[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = if len2 > 0.0 { ((ap[0] * ab[0] + ap[1] * ab[1]) / len2).clamp(0.0, 1.0) } else { 0.0 };
    let cx = a[0] + t * ab[0] - p[0];
    let cy = a[1] + t * ab[1] - p[1];
    (cx * cx + cy * cy).sqrt()
}

fn segments_intersect(a1: [f64; 2], a2: [f64; 2], b1: [f64; 2], b2: [f64; 2]) -> bool {
    let orient = |p: [f64; 2], q: [f64; 2], r: [f64; 2]| -> f64 {
        (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])
    };
    let d1 = orient(b1, b2, a1);
    let d2 = orient(b1, b2, a2);
    let d3 = orient(a1, a2, b1);
    let d4 = orient(a1, a2, b2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    let on_segment = |p: [f64; 2], q: [f64; 2], r: [f64; 2]| -> bool {
        orient(p, q, r) == 0.0
            && r[0] >= p[0].min(q[0])
            && r[0] <= p[0].max(q[0])
            && r[1] >= p[1].min(q[1])
            && r[1] <= p[1].max(q[1])
    };
    on_segment(b1, b2, a1) || on_segment(b1, b2, a2) || on_segment(a1, a2, b1) || on_segment(a1, a2, b2)
}

fn segment_segment_distance(a1: [f64; 2], a2: [f64; 2], b1: [f64; 2], b2: [f64; 2]) -> f64 {
    if segments_intersect(a1, a2, b1, b2) {
        return 0.0;
    }
    point_segment_distance(a1, b1, b2)
        .min(point_segment_distance(a2, b1, b2))
        .min(point_segment_distance(b1, a1, a2))
        .min(point_segment_distance(b2, a1, a2))
}

fn segment_intersects_aabb(a: [f64; 2], b: [f64; 2], min: [f64; 2], max: [f64; 2]) -> bool {
    let d = [b[0] - a[0], b[1] - a[1]];
    let mut tmin = 0.0_f64;
    let mut tmax = 1.0_f64;
    for axis in 0..2 {
        if d[axis].abs() < 1e-15 {
            if a[axis] < min[axis] || a[axis] > max[axis] {
                return false;
            }
        } else {
            let t1 = (min[axis] - a[axis]) / d[axis];
            let t2 = (max[axis] - a[axis]) / d[axis];
            let (lo, hi) = if t1 < t2 { (t1, t2) } else { (t2, t1) };
            tmin = tmin.max(lo);
            tmax = tmax.min(hi);
            if tmin > tmax {
                return false;
            }
        }
    }
    true
}

fn segment_aabb_distance(a: [f64; 2], b: [f64; 2], min: [f64; 2], max: [f64; 2]) -> f64 {
    if segment_intersects_aabb(a, b, min, max) {
        return 0.0;
    }
    let corners =
        [[min[0], min[1]], [max[0], min[1]], [max[0], max[1]], [min[0], max[1]]];
    let mut best = f64::INFINITY;
    for i in 0..4 {
        let e1 = corners[i];
        let e2 = corners[(i + 1) % 4];
        best = best.min(segment_segment_distance(a, b, e1, e2));
    }
    best
}

/// Distance from a link segment's axis to an obstacle surface; negative
/// inside a circle, zero anywhere on or inside a box.
pub(crate) fn segment_obstacle_distance(seg: &Segment, obs: &Obstacle) -> f64 {
    match obs {
        Obstacle::Circle { center, radius } => {
            point_segment_distance(*center, seg.a, seg.b) - radius
        }
        Obstacle::Box { min, max } => segment_aabb_distance(seg.a, seg.b, *min, *max),
    }
}

/// Smallest obstacle clearance over all link capsules; positive when the
/// configuration is collision-free, `+inf` for an empty environment.
pub fn min_clearance(arm: &ArmModel, q: &JointConfig, env: &Environment) -> f64 {
    let mut best = f64::INFINITY;
    crate::kinematics::for_each_link_segment(arm, &q.q, |seg| {
        for obs in &env.obstacles {
            best = best.min(segment_obstacle_distance(&seg, obs) - arm.link_radius);
        }
        true
    });
    best
}

/// True iff every link capsule has strictly positive clearance from every
/// obstacle.
pub fn is_collision_free(arm: &ArmModel, q: &JointConfig, env: &Environment) -> bool {
    collision_free_raw(arm, &q.q, env)
}

/// Collision query on a raw configuration vector, with early exit.
pub(crate) fn collision_free_raw(arm: &ArmModel, q: &DVector<f64>, env: &Environment) -> bool {
    let mut free = true;
    crate::kinematics::for_each_link_segment(arm, q, |seg| {
        for obs in &env.obstacles {
            if segment_obstacle_distance(&seg, obs) <= arm.link_radius {
                free = false;
                return false;
            }
        }
        true
    });
    free
}

/// Discretized edge validity: every interpolated state at joint-space
/// spacing at most `resolution` must be collision-free with residual norm
/// at most `epsilon_valid`.
pub fn segment_valid(
    arm: &ArmModel,
    q_a: &JointConfig,
    q_b: &JointConfig,
    env: &Environment,
    f: &ConstraintSet,
    resolution: f64,
    epsilon_valid: f64,
) -> bool {
    segment_valid_counted(arm, q_a, q_b, env, f, resolution, epsilon_valid).0
}

/// Edge validity plus the number of interpolated states examined.
pub(crate) fn segment_valid_counted(
    arm: &ArmModel,
    q_a: &JointConfig,
    q_b: &JointConfig,
    env: &Environment,
    f: &ConstraintSet,
    resolution: f64,
    epsilon_valid: f64,
) -> (bool, u64) {
    debug_assert!(resolution > 0.0);
    let dist = crate::kinematics::dist_sq(&q_a.q, &q_b.q).sqrt();
    let steps = (dist / resolution).ceil() as usize;
    let denom = steps.max(1) as f64;
    let mut checked = 0u64;
    let mut q = q_a.q.clone();
    for i in 0..=steps {
        let t = i as f64 / denom;
        for j in 0..q.len() {
            q[j] = q_a.q[j] * (1.0 - t) + q_b.q[j] * t;
        }
        checked += 1;
        if !collision_free_raw(arm, &q, env) {
            return (false, checked);
        }
        if f.residual_norm_at(&q) > epsilon_valid {
            return (false, checked);
        }
    }
    (true, checked)
}

/// Constraint description inside a scenario file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ConstraintSpec {
    #[default]
    None,
    Tsr(TsrConstraint),
}

impl ConstraintSpec {
    pub fn build(&self, arm: &ArmModel) -> ConstraintSet {
        match self {
            ConstraintSpec::None => ConstraintSet::unconstrained(arm.dof()),
            ConstraintSpec::Tsr(tsr) => ConstraintSet::tsr(arm, tsr.clone()),
        }
    }
}

/// Goal description: an explicit configuration or a TSR goal region.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GoalSpec {
    Config(Vec<f64>),
    Tsr(TsrConstraint),
}

/// Planner and pipeline settings; every field has a default so scenario
/// files only need to spell out what they change.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerConfig {
    /// Maximum sampling iterations `K`.
    pub k: usize,
    /// Goal-region bias probability `b` in `[0, 1]`.
    pub goal_bias: f64,
    /// Extension step, radians.
    pub step_size: f64,
    /// Joining distance; defaults to one step when absent.
    pub connect_tol: Option<f64>,
    pub proj_eps: f64,
    pub proj_max_iters: usize,
    pub proj_damping: f64,
    pub proj_step_clamp: f64,
    /// Edge discretization spacing, radians.
    pub resolution: f64,
    /// Residual tolerance for interpolated states.
    pub epsilon_valid: f64,
    pub beam_width: usize,
    pub max_seq_len: usize,
    /// Softmax temperature of the heuristic scorer.
    pub temperature: f64,
    /// Retry budget for TSR goal sampling.
    pub goal_attempts: usize,
    /// Shortcut attempts in path simplification.
    pub simplify_shortcuts: usize,
    pub opt_eta: f64,
    pub opt_n_mc: usize,
    pub opt_delta_stop: f64,
    pub opt_max_iters: usize,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            k: 5000,
            goal_bias: 0.1,
            step_size: 0.2,
            connect_tol: None,
            proj_eps: 1e-4,
            proj_max_iters: 100,
            proj_damping: 1e-9,
            proj_step_clamp: 0.5,
            resolution: 0.02,
            epsilon_valid: 1e-3,
            beam_width: 4,
            max_seq_len: 24,
            temperature: 0.25,
            goal_attempts: 32,
            simplify_shortcuts: 100,
            opt_eta: 0.05,
            opt_n_mc: 64,
            opt_delta_stop: 1e-3,
            opt_max_iters: 200,
        }
    }
}

impl PlannerConfig {
    pub fn projection_params(&self) -> ProjectionParams {
        ProjectionParams {
            epsilon: self.proj_eps,
            max_iters: self.proj_max_iters,
            damping: self.proj_damping,
            step_clamp: self.proj_step_clamp,
            invert_gram: true,
        }
    }

    pub fn optimizer_params(&self, seed: u64) -> OptimizerParams {
        OptimizerParams {
            eta: self.opt_eta,
            n_mc: self.opt_n_mc,
            delta_stop: self.opt_delta_stop,
            max_outer_iters: self.opt_max_iters,
            seed,
        }
    }

    pub fn connect_tol(&self) -> f64 {
        self.connect_tol.unwrap_or(self.step_size)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidModel("planner.k must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.goal_bias) {
            return Err(Error::InvalidModel(format!(
                "planner.goal_bias must be in [0, 1], got {}",
                self.goal_bias
            )));
        }
        if !(self.step_size > 0.0) {
            return Err(Error::InvalidModel("planner.step_size must be > 0".into()));
        }
        if !(self.resolution > 0.0) {
            return Err(Error::InvalidModel("planner.resolution must be > 0".into()));
        }
        if !(self.epsilon_valid > 0.0) {
            return Err(Error::InvalidModel("planner.epsilon_valid must be > 0".into()));
        }
        if self.beam_width == 0 || self.max_seq_len == 0 {
            return Err(Error::InvalidModel(
                "planner.beam_width and planner.max_seq_len must be >= 1".into(),
            ));
        }
        if !(self.temperature > 0.0) {
            return Err(Error::InvalidModel("planner.temperature must be > 0".into()));
        }
        self.projection_params().validate()?;
        self.optimizer_params(0).validate()
    }
}

/// A complete planning problem as stored on disk.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub arm: ArmModel,
    #[serde(default)]
    pub obstacles: Vec<Obstacle>,
    #[serde(default)]
    pub constraint: ConstraintSpec,
    pub start: Vec<f64>,
    pub goal: GoalSpec,
    #[serde(default)]
    pub planner: PlannerConfig,
    /// Path to the codebook file, relative to the scenario file.
    #[serde(default)]
    pub codebook: Option<String>,
}

impl Scenario {
    pub fn environment(&self) -> Environment {
        Environment::new(self.obstacles.clone())
    }

    pub fn constraint_set(&self) -> ConstraintSet {
        self.constraint.build(&self.arm)
    }

    pub fn start_config(&self) -> JointConfig {
        JointConfig::new(DVector::from_vec(self.start.clone()))
    }

    /// Codebook path resolved relative to the scenario file's directory.
    pub fn codebook_path(&self, scenario_path: &Path) -> Option<PathBuf> {
        self.codebook.as_ref().map(|rel| {
            let p = Path::new(rel);
            if p.is_absolute() {
                p.to_path_buf()
            } else {
                scenario_path.parent().unwrap_or_else(|| Path::new(".")).join(p)
            }
        })
    }

    fn normalize(&mut self) {
        let norm_tsr = |t: &mut TsrConstraint| {
            t.target_pose = t.target_pose.normalized();
            t.ee_offset = t.ee_offset.normalized();
        };
        if let ConstraintSpec::Tsr(t) = &mut self.constraint {
            norm_tsr(t);
        }
        if let GoalSpec::Tsr(t) = &mut self.goal {
            norm_tsr(t);
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.arm.validate()?;
        for (i, o) in self.obstacles.iter().enumerate() {
            o.validate(i)?;
        }
        match &self.constraint {
            ConstraintSpec::None => {}
            ConstraintSpec::Tsr(t) => t.validate()?,
        }
        if self.start.len() != self.arm.dof() {
            return Err(Error::InvalidModel(format!(
                "start has {} joints, arm has {}",
                self.start.len(),
                self.arm.dof()
            )));
        }
        for (i, &v) in self.start.iter().enumerate() {
            let [lo, hi] = self.arm.joint_limits[i];
            if v < lo || v > hi {
                return Err(Error::InvalidModel(format!(
                    "start[{i}] = {v} outside joint_limits[{i}] = [{lo}, {hi}]"
                )));
            }
        }
        match &self.goal {
            GoalSpec::Config(c) => {
                if c.len() != self.arm.dof() {
                    return Err(Error::InvalidModel(format!(
                        "goal.config has {} joints, arm has {}",
                        c.len(),
                        self.arm.dof()
                    )));
                }
            }
            GoalSpec::Tsr(t) => t.validate()?,
        }
        self.planner.validate()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

/// Parse and validate a scenario file. Parse errors carry serde's line and
/// column info; validation errors name the failing field.
pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Scenario(format!("{}: {e}", path.display())))?;
    let mut scenario: Scenario = serde_json::from_str(&text)
        .map_err(|e| Error::Scenario(format!("{}: {e}", path.display())))?;
    scenario.normalize();
    scenario.validate().map_err(|e| Error::Scenario(format!("{}: {e}", path.display())))?;
    Ok(scenario)
}
