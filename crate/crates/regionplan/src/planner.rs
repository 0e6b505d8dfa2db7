//! Bidirectional constrained planner: both trees extend toward each
//! projected sample with projected, collision-checked steps, then try to
//! connect. A uniform-sampling baseline shares the same skeleton.

use std::time::Instant;

use nalgebra::DVector;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::constraints::{ConstraintSet, TsrConstraint};
use crate::environment::{is_collision_free, segment_valid_counted, Environment, GoalSpec, Scenario};
use crate::error::{Error, Result};
use crate::kinematics::{ArmModel, JointConfig};
use crate::mix_seed;
use crate::projection::{project, ProjectionParams};
use crate::sampling::GmmSampler;

const GOAL_RNG_SALT: u64 = 0x6F61_6C73;
const LOOP_RNG_SALT: u64 = 0x6C6F_6F70;

/// Which configuration a tree is rooted at.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RootKind {
    Start,
    Goal,
}

/// A search tree of on-manifold, collision-free configurations. Node
/// coordinates are mirrored in a flat buffer so nearest-neighbor scans
/// stay cache-friendly on large trees.
#[derive(Clone, Debug)]
pub struct PlanningTree {
    nodes: Vec<JointConfig>,
    parents: Vec<Option<usize>>,
    flat: Vec<f64>,
    dim: usize,
    root_kind: RootKind,
}

impl PlanningTree {
    pub fn new(root: JointConfig, root_kind: RootKind) -> Self {
        let dim = root.dim();
        let flat = root.q.iter().copied().collect();
        PlanningTree { nodes: vec![root], parents: vec![None], flat, dim, root_kind }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn config(&self, i: usize) -> &JointConfig {
        &self.nodes[i]
    }

    pub fn parent(&self, i: usize) -> Option<usize> {
        self.parents[i]
    }

    pub fn root_kind(&self) -> RootKind {
        self.root_kind
    }

    /// Append a node; parents always point at earlier indices, so the
    /// tree is acyclic by construction.
    pub fn push(&mut self, config: JointConfig, parent: usize) -> usize {
        debug_assert!(parent < self.nodes.len());
        debug_assert_eq!(config.dim(), self.dim);
        self.flat.extend(config.q.iter().copied());
        self.nodes.push(config);
        self.parents.push(Some(parent));
        self.nodes.len() - 1
    }

    /// Configurations from node `i` back to the root, inclusive.
    pub fn walk_to_root(&self, i: usize) -> Vec<JointConfig> {
        let mut out = Vec::new();
        let mut cur = Some(i);
        while let Some(idx) = cur {
            out.push(self.nodes[idx].clone());
            cur = self.parents[idx];
        }
        out
    }

    /// Parent-child index pairs for every non-root node.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.parents.iter().enumerate().filter_map(|(i, p)| p.map(|p| (p, i)))
    }
}

/// Goal of a planning query.
#[derive(Clone, Debug)]
pub enum Goal {
    Config(JointConfig),
    Tsr(TsrConstraint),
}

/// Everything one planning run needs. Shared inputs are cloned in, so a
/// run owns its data and many runs can proceed concurrently.
#[derive(Clone, Debug)]
pub struct PlanRequest {
    pub arm: ArmModel,
    pub env: Environment,
    pub constraint: ConstraintSet,
    pub start: JointConfig,
    pub goal: Goal,
    /// Maximum sampling iterations `K`.
    pub k_max: usize,
    /// Goal-region bias probability `b`.
    pub goal_bias: f64,
    /// Extension step, radians.
    pub step_size: f64,
    /// Joining distance for `connect`.
    pub connect_tol: f64,
    pub seed: u64,
    pub projection: ProjectionParams,
    pub resolution: f64,
    pub epsilon_valid: f64,
    pub goal_attempts: usize,
    pub simplify_shortcuts: usize,
    /// Wall-clock budget in seconds; exceeding it fails the run.
    pub time_budget: Option<f64>,
}

impl PlanRequest {
    pub fn from_scenario(scenario: &Scenario, seed: u64) -> Result<PlanRequest> {
        scenario.validate()?;
        let goal = match &scenario.goal {
            GoalSpec::Config(c) => Goal::Config(JointConfig::from_slice(c)),
            GoalSpec::Tsr(t) => Goal::Tsr(t.clone()),
        };
        let p = &scenario.planner;
        Ok(PlanRequest {
            arm: scenario.arm.clone(),
            env: scenario.environment(),
            constraint: scenario.constraint_set(),
            start: scenario.start_config(),
            goal,
            k_max: p.k,
            goal_bias: p.goal_bias,
            step_size: p.step_size,
            connect_tol: p.connect_tol(),
            seed,
            projection: p.projection_params(),
            resolution: p.resolution,
            epsilon_valid: p.epsilon_valid,
            goal_attempts: p.goal_attempts,
            simplify_shortcuts: p.simplify_shortcuts,
            time_budget: None,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.arm.validate()?;
        self.env.validate()?;
        self.projection.validate()?;
        let n = self.arm.dof();
        if self.constraint.dim() != n {
            return Err(Error::DimensionMismatch { expected: n, got: self.constraint.dim() });
        }
        if self.start.dim() != n {
            return Err(Error::DimensionMismatch { expected: n, got: self.start.dim() });
        }
        if let Goal::Config(qg) = &self.goal {
            if qg.dim() != n {
                return Err(Error::DimensionMismatch { expected: n, got: qg.dim() });
            }
        }
        if self.k_max == 0 {
            return Err(Error::InvalidModel("k_max must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.goal_bias) {
            return Err(Error::InvalidModel(format!(
                "goal_bias must be in [0, 1], got {}",
                self.goal_bias
            )));
        }
        if !(self.step_size > 0.0) || !(self.connect_tol > 0.0) {
            return Err(Error::InvalidModel("step_size and connect_tol must be > 0".into()));
        }
        if !(self.resolution > 0.0) || !(self.epsilon_valid > 0.0) {
            return Err(Error::InvalidModel("resolution and epsilon_valid must be > 0".into()));
        }
        Ok(())
    }
}

/// Deterministic work counters for one run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PlanStats {
    /// Sampling-loop iterations consumed.
    pub iterations: usize,
    /// Inner projection iterations across all projections.
    pub proj_iterations: u64,
    /// Interpolated states examined by edge and state validation.
    pub states_checked: u64,
    /// Tree nodes visited by nearest-neighbor scans.
    pub nearest_visits: u64,
}

/// Outcome of one planning run.
#[derive(Clone, Debug)]
pub struct PlanResult {
    /// Waypoints from start to goal; empty on failure.
    pub path: Vec<JointConfig>,
    pub success: bool,
    /// Collision-free tree insertions across both trees (roots excluded).
    pub vertices: usize,
    /// Measured wall-clock seconds.
    pub wall_time: f64,
    /// Sum of Euclidean joint-space distances between adjacent waypoints.
    pub path_length: f64,
    pub stats: PlanStats,
}

/// Sum of adjacent Euclidean distances along a path.
pub fn path_length(path: &[JointConfig]) -> f64 {
    path.windows(2).map(|w| (&w[1].q - &w[0].q).norm()).sum()
}

/// Uniform draw inside the joint limits.
pub fn uniform_sample(arm: &ArmModel, rng: &mut impl Rng) -> JointConfig {
    JointConfig::new(DVector::from_fn(arm.dof(), |i, _| {
        rng.gen_range(arm.joint_limits[i][0]..arm.joint_limits[i][1])
    }))
}

/// Index of the tree node closest to `q` in joint space; ties go to the
/// lowest index.
pub fn nearest_node(tree: &PlanningTree, q: &JointConfig) -> usize {
    let qs = q.q.as_slice();
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, chunk) in tree.flat.chunks_exact(tree.dim).enumerate() {
        let mut s = 0.0;
        for (a, b) in chunk.iter().zip(qs) {
            let d = a - b;
            s += d * d;
        }
        if s < best_d {
            best_d = s;
            best = i;
        }
    }
    best
}

fn project_counted(
    q: &JointConfig,
    request: &PlanRequest,
    stats: &mut PlanStats,
) -> Option<JointConfig> {
    match project(q, &request.constraint, Some(&request.arm.joint_limits), &request.projection) {
        Ok(p) => {
            stats.proj_iterations += p.iterations as u64;
            Some(p.q)
        }
        Err(_) => {
            // A rejected sample still cost the full iteration budget.
            stats.proj_iterations += request.projection.max_iters as u64;
            None
        }
    }
}

fn segment_ok(
    a: &JointConfig,
    b: &JointConfig,
    request: &PlanRequest,
    stats: &mut PlanStats,
) -> bool {
    let (ok, checked) = segment_valid_counted(
        &request.arm,
        a,
        b,
        &request.env,
        &request.constraint,
        request.resolution,
        request.epsilon_valid,
    );
    stats.states_checked += checked;
    ok
}

/// Grow the tree from `from_index` toward `q_target` in projected steps.
/// Every accepted node is appended with a parent link; extension stops on
/// reaching the target, projection failure, an invalid segment, or when a
/// step makes no progress toward the target. Returns the last accepted
/// index, which is `from_index` when nothing was added.
pub fn constrained_extend(
    tree: &mut PlanningTree,
    from_index: usize,
    q_target: &JointConfig,
    request: &PlanRequest,
    stats: &mut PlanStats,
) -> usize {
    let mut current = from_index;
    let mut cur_cfg = tree.config(current).clone();
    let mut dist = crate::kinematics::dist_sq(&q_target.q, &cur_cfg.q).sqrt();
    // Safety valve against asymptotic creep; unreachable for sane inputs.
    let cap = ((dist / request.step_size).ceil() as usize) * 8 + 64;
    for _ in 0..cap {
        if dist <= 1e-9 {
            break;
        }
        let step = request.step_size.min(dist);
        let cand = JointConfig::new(&cur_cfg.q + (&q_target.q - &cur_cfg.q) * (step / dist));
        let Some(projected) = project_counted(&cand, request, stats) else {
            break;
        };
        let new_dist = crate::kinematics::dist_sq(&q_target.q, &projected.q).sqrt();
        if new_dist >= dist - 1e-12 {
            break;
        }
        if !segment_ok(&cur_cfg, &projected, request, stats) {
            break;
        }
        current = tree.push(projected.clone(), current);
        cur_cfg = projected;
        dist = new_dist;
    }
    current
}

/// True iff `a` and `b` are within the joining distance and the straight
/// segment between them validates under the constraint and collision
/// discretization.
pub fn connect(a: &JointConfig, b: &JointConfig, request: &PlanRequest, stats: &mut PlanStats) -> bool {
    if crate::kinematics::dist_sq(&a.q, &b.q).sqrt() > request.connect_tol {
        return false;
    }
    segment_ok(a, b, request, stats)
}

/// Join the two trees into a start-to-goal path: the start-rooted tree's
/// root-to-join walk, then the goal-rooted tree's join-to-root walk. Tree
/// swapping is undone via the root kinds, so orientation is always
/// start to goal.
pub fn extract_path(
    tree_a: &PlanningTree,
    tree_b: &PlanningTree,
    join_a: usize,
    join_b: usize,
) -> Vec<JointConfig> {
    debug_assert_ne!(tree_a.root_kind(), tree_b.root_kind());
    let (s_tree, s_join, g_tree, g_join) = if tree_a.root_kind() == RootKind::Start {
        (tree_a, join_a, tree_b, join_b)
    } else {
        (tree_b, join_b, tree_a, join_a)
    };
    let mut path = s_tree.walk_to_root(s_join);
    path.reverse();
    let tail = g_tree.walk_to_root(g_join);
    let skip_dup = tail.first().map_or(false, |t| Some(t) == path.last());
    path.extend(tail.into_iter().skip(usize::from(skip_dup)));
    path
}

/// Walk from `from` to `to` in projected steps, returning all waypoints
/// including both endpoints, or `None` if the walk fails validation or
/// stalls before reaching `to`.
fn constrained_walk(
    from: &JointConfig,
    to: &JointConfig,
    request: &PlanRequest,
    stats: &mut PlanStats,
) -> Option<Vec<JointConfig>> {
    let mut out = vec![from.clone()];
    let mut cur = from.clone();
    let mut dist = crate::kinematics::dist_sq(&to.q, &cur.q).sqrt();
    let cap = ((dist / request.step_size).ceil() as usize) * 8 + 64;
    for _ in 0..cap {
        if dist <= 1e-9 {
            break;
        }
        let step = request.step_size.min(dist);
        let cand = JointConfig::new(&cur.q + (&to.q - &cur.q) * (step / dist));
        let projected = project_counted(&cand, request, stats)?;
        let new_dist = crate::kinematics::dist_sq(&to.q, &projected.q).sqrt();
        if new_dist >= dist - 1e-12 {
            return None;
        }
        if !segment_ok(&cur, &projected, request, stats) {
            return None;
        }
        out.push(projected.clone());
        cur = projected;
        dist = new_dist;
    }
    if dist > 1e-9 {
        return None;
    }
    if (&out.last().unwrap().q - &to.q).norm() > 0.0 {
        // Land exactly on the target waypoint.
        out.push(to.clone());
    }
    Some(out)
}

/// Randomized constrained shortcutting: pick two non-adjacent waypoints,
/// rebuild the projected segment between them, and splice it in when it
/// validates and is strictly shorter. Endpoints never change and the
/// total length never increases.
pub fn simplify(
    path: &[JointConfig],
    request: &PlanRequest,
    rng: &mut impl Rng,
    stats: &mut PlanStats,
) -> Vec<JointConfig> {
    let mut pts = path.to_vec();
    for _ in 0..request.simplify_shortcuts {
        if pts.len() < 3 {
            break;
        }
        let i = rng.gen_range(0..pts.len() - 2);
        let j = rng.gen_range(i + 2..pts.len());
        let Some(walk) = constrained_walk(&pts[i], &pts[j], request, stats) else {
            continue;
        };
        let old_len = path_length(&pts[i..=j]);
        let new_len = path_length(&walk);
        if new_len < old_len - 1e-12 {
            let middle: &[JointConfig] = if walk.len() >= 2 { &walk[1..walk.len() - 1] } else { &[] };
            let mut next = Vec::with_capacity(pts.len());
            next.extend_from_slice(&pts[..=i]);
            next.extend_from_slice(middle);
            next.extend_from_slice(&pts[j..]);
            pts = next;
        }
    }
    pts
}

/// A goal configuration produced from a TSR.
#[derive(Clone, Debug)]
pub struct GoalSample {
    pub q: JointConfig,
    pub attempts_used: usize,
    pub proj_iterations: u64,
}

/// Sample a displacement uniformly inside the TSR bounds, pin an equality
/// TSR at the resulting pose, and project a random seed configuration onto
/// it. Accepts the first collision-free configuration that also meets the
/// path constraint tolerance.
pub fn sample_goal_from_tsr(
    tsr: &TsrConstraint,
    arm: &ArmModel,
    env: &Environment,
    constraint: &ConstraintSet,
    rng: &mut impl Rng,
    attempts: usize,
    projection: &ProjectionParams,
) -> Result<GoalSample> {
    if attempts == 0 {
        return Err(Error::InvalidModel("attempts must be >= 1".into()));
    }
    let mut proj_iterations = 0u64;
    for attempt in 1..=attempts {
        let mut d = [0.0; 3];
        for (i, slot) in d.iter_mut().enumerate() {
            let [lo, hi] = tsr.bounds[i];
            *slot = if hi > lo { rng.gen_range(lo..hi) } else { lo };
        }
        let eq_target = tsr.target_pose.compose(&crate::kinematics::PlanarPose::new(d[0], d[1], d[2]));
        let goal_tsr = TsrConstraint::equality(eq_target, tsr.ee_offset);
        let f_goal = ConstraintSet::tsr(arm, goal_tsr);
        let seed_cfg = uniform_sample(arm, rng);
        match project(&seed_cfg, &f_goal, Some(&arm.joint_limits), projection) {
            Ok(p) => {
                proj_iterations += p.iterations as u64;
                if is_collision_free(arm, &p.q, env)
                    && constraint.residual_norm_at(&p.q.q) <= projection.epsilon
                {
                    return Ok(GoalSample { q: p.q, attempts_used: attempt, proj_iterations });
                }
            }
            Err(_) => {
                proj_iterations += projection.max_iters as u64;
            }
        }
    }
    Err(Error::GoalSampling { attempts })
}

enum SamplerKind<'a> {
    Gmm(&'a GmmSampler),
    Uniform,
}

/// Plan with samples drawn from the region-guided mixture.
pub fn plan(request: &PlanRequest, gmm: &GmmSampler) -> Result<PlanResult> {
    if gmm.dim() != request.arm.dof() {
        return Err(Error::DimensionMismatch { expected: request.arm.dof(), got: gmm.dim() });
    }
    plan_with_sampler(request, SamplerKind::Gmm(gmm))
}

/// Same skeleton with uniform sampling over the joint limits.
pub fn baseline_plan(request: &PlanRequest) -> Result<PlanResult> {
    plan_with_sampler(request, SamplerKind::Uniform)
}

fn intake(
    label: &str,
    q: &JointConfig,
    request: &PlanRequest,
    stats: &mut PlanStats,
) -> Result<JointConfig> {
    let fail = |msg: String| -> Error {
        if label == "start" {
            Error::InvalidStart(msg)
        } else {
            Error::InvalidGoal(msg)
        }
    };
    let res_norm = request.constraint.residual_norm_at(&q.q);
    let projected = if res_norm <= request.projection.epsilon {
        q.clone()
    } else {
        // Pull slightly off-manifold states back; anything that moves more
        // than 0.1 rad is rejected as a bad input.
        let p = project(q, &request.constraint, Some(&request.arm.joint_limits), &request.projection)
            .map_err(|e| fail(format!("{label} projection failed: {e}")))?;
        stats.proj_iterations += p.iterations as u64;
        if (&p.q.q - &q.q).norm() > 0.1 {
            return Err(fail(format!("{label} is {:.3} rad off the constraint manifold", (&p.q.q - &q.q).norm())));
        }
        p.q
    };
    if !is_collision_free(&request.arm, &projected, &request.env) {
        return Err(fail(format!("{label} configuration is in collision")));
    }
    stats.states_checked += 1;
    Ok(projected)
}

/// Resolve the query endpoints exactly as `plan` does: project the start
/// at intake and either intake the goal configuration or sample one from
/// the goal TSR. Returns the endpoints and the work spent doing so.
pub fn resolve_query(request: &PlanRequest) -> Result<(JointConfig, JointConfig, PlanStats)> {
    request.validate()?;
    let mut stats = PlanStats::default();
    let q_s = intake("start", &request.start, request, &mut stats)?;
    let q_g = match &request.goal {
        Goal::Config(qg) => intake("goal", qg, request, &mut stats)?,
        Goal::Tsr(tsr) => {
            let mut goal_rng = ChaCha8Rng::seed_from_u64(mix_seed(request.seed, GOAL_RNG_SALT));
            let gs = sample_goal_from_tsr(
                tsr,
                &request.arm,
                &request.env,
                &request.constraint,
                &mut goal_rng,
                request.goal_attempts,
                &request.projection,
            )?;
            stats.proj_iterations += gs.proj_iterations;
            gs.q
        }
    };
    Ok((q_s, q_g, stats))
}

fn plan_with_sampler(request: &PlanRequest, sampler: SamplerKind<'_>) -> Result<PlanResult> {
    let t0 = Instant::now();
    let (q_s, q_g, mut stats) = resolve_query(request)?;

    if (&q_s.q - &q_g.q).norm() <= 1e-12 {
        return Ok(PlanResult {
            path: vec![q_s],
            success: true,
            vertices: 0,
            wall_time: t0.elapsed().as_secs_f64(),
            path_length: 0.0,
            stats,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(request.seed, LOOP_RNG_SALT));
    let mut tree_a = PlanningTree::new(q_s.clone(), RootKind::Start);
    let mut tree_b = PlanningTree::new(q_g.clone(), RootKind::Goal);
    // The goal-biased draw always aims at the true goal configuration.
    let bias_component = match &sampler {
        SamplerKind::Gmm(g) => g.nearest_component(&q_g.q),
        SamplerKind::Uniform => 0,
    };

    let over_budget = |t0: &Instant| {
        request.time_budget.map_or(false, |budget| t0.elapsed().as_secs_f64() > budget)
    };

    for iter in 1..=request.k_max {
        stats.iterations = iter;
        if over_budget(&t0) {
            break;
        }
        let biased = request.goal_bias > 0.0 && rng.gen::<f64>() < request.goal_bias;
        let q_rand = match &sampler {
            SamplerKind::Gmm(g) => {
                if biased {
                    g.sample_component(bias_component, &mut rng)
                } else {
                    g.sample(&mut rng)
                }
            }
            SamplerKind::Uniform => {
                if biased {
                    q_g.clone()
                } else {
                    uniform_sample(&request.arm, &mut rng)
                }
            }
        };

        if let Some(q_proj) = project_counted(&q_rand, request, &mut stats) {
            stats.nearest_visits += (tree_a.len() + tree_b.len()) as u64;
            let near_a = nearest_node(&tree_a, &q_proj);
            let reach_a = constrained_extend(&mut tree_a, near_a, &q_proj, request, &mut stats);
            let near_b = nearest_node(&tree_b, &q_proj);
            let reach_b = constrained_extend(&mut tree_b, near_b, &q_proj, request, &mut stats);
            if connect(tree_a.config(reach_a), tree_b.config(reach_b), request, &mut stats) {
                let raw = extract_path(&tree_a, &tree_b, reach_a, reach_b);
                let path = simplify(&raw, request, &mut rng, &mut stats);
                let vertices = tree_a.len() + tree_b.len() - 2;
                return Ok(PlanResult {
                    path_length: path_length(&path),
                    success: true,
                    vertices,
                    wall_time: t0.elapsed().as_secs_f64(),
                    path,
                    stats,
                });
            }
        }
        std::mem::swap(&mut tree_a, &mut tree_b);
    }

    Ok(PlanResult {
        path: Vec::new(),
        success: false,
        vertices: tree_a.len() + tree_b.len() - 2,
        wall_time: t0.elapsed().as_secs_f64(),
        path_length: 0.0,
        stats,
    })
}
