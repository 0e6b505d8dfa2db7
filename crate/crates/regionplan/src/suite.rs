//! Deterministic generation of the constrained benchmark suite.
//!
//! Each scenario is a 7-link planar arm holding its end-effector heading
//! fixed (an orientation-equality TSR) while threading between circle
//! obstacles. Codebooks are fitted from unconstrained paths planned in the
//! same environment, mirroring a sampler trained on unconstrained motion,
//! and every scenario is probe-planned with all variants before it is
//! accepted.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::bench::{run_scenario, Variant};
use crate::constraints::TsrConstraint;
use crate::environment::{
    is_collision_free, min_clearance, segment_valid, ConstraintSpec, Environment, GoalSpec,
    Obstacle, PlannerConfig, Scenario,
};
use crate::error::{Error, Result};
use crate::kinematics::{fk_raw, wrap_angle, ArmModel, JointConfig, PlanarPose};
use crate::mix_seed;
use crate::planner::{baseline_plan, uniform_sample, Goal, PlanRequest};
use crate::regions::fit_codebook;

/// Suite generation settings.
#[derive(Clone, Copy, Debug)]
pub struct SuiteSpec {
    pub scenarios: usize,
    pub seed: u64,
    /// Unconstrained training paths per scenario codebook.
    pub training_paths: usize,
    /// Codebook size.
    pub regions: usize,
}

impl Default for SuiteSpec {
    fn default() -> Self {
        SuiteSpec { scenarios: 20, seed: 7, training_paths: 40, regions: 24 }
    }
}

fn benchmark_arm() -> ArmModel {
    ArmModel::uniform(7, 0.22, 2.9, 0.02).expect("static arm model")
}

/// Pick a configuration whose heading sum hits `theta_star` exactly, is
/// inside the joint limits, and keeps `margin` clearance from obstacles.
fn sample_manifold_config(
    arm: &ArmModel,
    env: &Environment,
    theta_star: f64,
    margin: f64,
    rng: &mut ChaCha8Rng,
) -> Option<JointConfig> {
    let n = arm.dof();
    'tries: for _ in 0..400 {
        let mut q = uniform_sample(arm, rng);
        let partial: f64 = q.q.iter().take(n - 1).sum();
        let base = wrap_angle(theta_star - partial);
        let [lo, hi] = arm.joint_limits[n - 1];
        let mut last = None;
        for k in [-1.0, 0.0, 1.0] {
            let cand = base + 2.0 * PI * k;
            if cand >= lo && cand <= hi {
                last = Some(cand);
                break;
            }
        }
        let Some(last) = last else { continue 'tries };
        q.q[n - 1] = last;
        if min_clearance(arm, &q, env) >= margin {
            return Some(q);
        }
    }
    None
}

fn sample_obstacles(arm: &ArmModel, rng: &mut ChaCha8Rng) -> Vec<Obstacle> {
    let reach = arm.reach();
    (0..3)
        .map(|_| {
            let radius = rng.gen_range(0.08..0.16);
            // Keep the base clear so the first link can always move.
            let r = rng.gen_range(0.35 * reach..0.75 * reach);
            let phi = rng.gen_range(-PI..PI);
            Obstacle::Circle { center: [r * phi.cos(), r * phi.sin()], radius }
        })
        .collect()
}

/// Plan unconstrained paths between random collision-free pairs and fit a
/// codebook on their waypoints.
fn build_codebook_paths(
    arm: &ArmModel,
    env: &Environment,
    count: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<Vec<JointConfig>> {
    let mut paths = Vec::with_capacity(count);
    let mut guard = 0;
    while paths.len() < count && guard < count * 20 {
        guard += 1;
        let a = uniform_sample(arm, rng);
        let b = uniform_sample(arm, rng);
        if !is_collision_free(arm, &a, env) || !is_collision_free(arm, &b, env) {
            continue;
        }
        let request = PlanRequest {
            arm: arm.clone(),
            env: env.clone(),
            constraint: crate::constraints::ConstraintSet::unconstrained(arm.dof()),
            start: a,
            goal: Goal::Config(b),
            k_max: 400,
            goal_bias: 0.1,
            step_size: 0.3,
            connect_tol: 0.3,
            seed: rng.gen(),
            projection: Default::default(),
            resolution: 0.05,
            epsilon_valid: 1e-3,
            goal_attempts: 32,
            simplify_shortcuts: 30,
            time_budget: Some(2.0),
        };
        if let Ok(res) = baseline_plan(&request) {
            if res.success && res.path.len() >= 2 {
                paths.push(res.path);
            }
        }
    }
    paths
}

fn scenario_file(dir: &Path, i: usize) -> PathBuf {
    dir.join(format!("scenario_{i:02}.json"))
}

/// Generate `spec.scenarios` solvable scenarios plus their codebooks into
/// `dir`, probing each with every planner variant. Returns the scenario
/// paths in suite order.
pub fn generate_suite(dir: &Path, spec: &SuiteSpec) -> Result<Vec<PathBuf>> {
    use rayon::prelude::*;
    std::fs::create_dir_all(dir)?;
    let arm = benchmark_arm();
    let paths: Vec<Result<PathBuf>> = (0..spec.scenarios)
        .into_par_iter()
        .map(|i| generate_one(dir, spec, &arm, i))
        .collect();
    paths.into_iter().collect()
}

fn generate_one(dir: &Path, spec: &SuiteSpec, arm: &ArmModel, i: usize) -> Result<PathBuf> {
    for attempt in 0..60u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(spec.seed, ((i as u64) << 8) | attempt));
        let theta_star = rng.gen_range(-PI..PI);
        let obstacles = sample_obstacles(arm, &mut rng);
        let env = Environment::new(obstacles.clone());
        let Some(start) = sample_manifold_config(arm, &env, theta_star, 0.03, &mut rng) else {
            continue;
        };
        let constraint = ConstraintSpec::Tsr(TsrConstraint::orientation(theta_star, 10.0));
        let f = constraint.build(arm);
        let mut goal_cfg = None;
        for _ in 0..60 {
            if let Some(g) = sample_manifold_config(arm, &env, theta_star, 0.03, &mut rng) {
                // Nontrivial queries only: far away and not solvable by the
                // straight joint-space segment.
                let far = (&g.q - &start.q).norm() >= 2.0;
                if far && !segment_valid(arm, &start, &g, &env, &f, 0.02, 1e-3) {
                    goal_cfg = Some(g);
                    break;
                }
            }
        }
        let Some(goal_cfg) = goal_cfg else { continue };

        // Every fourth scenario states its goal as a TSR region around the
        // goal pose instead of an explicit configuration.
        let goal = if i % 4 == 3 {
            let pose = fk_raw(arm, &goal_cfg.q);
            GoalSpec::Tsr(
                TsrConstraint::new(
                    PlanarPose::new(pose.x, pose.y, theta_star),
                    PlanarPose::identity(),
                    [[-0.05, 0.05], [-0.05, 0.05], [0.0, 0.0]],
                )
                .expect("static bounds"),
            )
        } else {
            GoalSpec::Config(goal_cfg.to_vec())
        };

        let paths = build_codebook_paths(arm, &env, spec.training_paths, &mut rng);
        if paths.len() < spec.training_paths {
            continue;
        }
        let codebook = match fit_codebook(&paths, spec.regions, rng.gen()) {
            Ok(cb) => cb,
            Err(_) => continue,
        };

        let scenario = Scenario {
            arm: arm.clone(),
            obstacles,
            constraint,
            start: start.to_vec(),
            goal,
            planner: PlannerConfig::default(),
            codebook: Some(format!("codebook_{i:02}.json")),
        };
        if scenario.validate().is_err() {
            continue;
        }

        let scenario_path = scenario_file(dir, i);
        let codebook_path = dir.join(format!("codebook_{i:02}.json"));
        codebook.save(&codebook_path)?;
        scenario.save(&scenario_path)?;

        // Probe: all three variants must solve it quickly from held-out
        // seeds, keeping the evaluation suite's runtime bounded.
        let solvable = [9001u64, 9002].iter().all(|&probe_seed| {
            Variant::all().iter().all(|&v| {
                run_scenario(&scenario, &scenario_path, v, probe_seed, Some(10.0))
                    .result
                    .as_ref()
                    .map_or(false, |r| r.success)
            })
        });
        if solvable {
            return Ok(scenario_path);
        }
        let _ = std::fs::remove_file(&scenario_path);
        let _ = std::fs::remove_file(&codebook_path);
    }
    Err(Error::Scenario(format!("could not generate a solvable scenario {i} after 60 attempts")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::load_scenario;

    #[test]
    fn generates_small_solvable_suite() {
        let dir = tempfile::tempdir().unwrap();
        let spec = SuiteSpec { scenarios: 2, seed: 11, training_paths: 12, regions: 10 };
        let paths = generate_suite(dir.path(), &spec).unwrap();
        assert_eq!(paths.len(), 2);
        for p in &paths {
            let sc = load_scenario(p).unwrap();
            assert!(matches!(sc.constraint, ConstraintSpec::Tsr(_)));
            assert!(sc.codebook_path(p).unwrap().exists());
        }
    }
}
