//! Full pipeline on one constrained problem: fit a codebook from
//! unconstrained paths, predict and optimize sampling regions, and run the
//! bidirectional constrained planner against the uniform baseline.
//!
//! ```text
//! cargo run --example plan_constrained
//! ```

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use regionplan::constraints::{ConstraintSet, TsrConstraint};
use regionplan::environment::{is_collision_free, Environment, Obstacle};
use regionplan::kinematics::ArmModel;
use regionplan::planner::{baseline_plan, plan, uniform_sample, Goal, PlanRequest};
use regionplan::regions::{fit_codebook, OptimizerParams};
use regionplan::sampling::{
    beam_search, build_gmm_from_latents, heuristic_scorer, optimize_sequence_regions,
};

fn main() {
    let n = 5;
    let arm = ArmModel::uniform(n, 0.3, 2.9, 0.02).unwrap();
    let env = Environment::new(vec![
        Obstacle::Circle { center: [0.6, 0.6], radius: 0.12 },
        Obstacle::Circle { center: [-0.5, 0.8], radius: 0.12 },
    ]);
    // Keep the end-effector heading fixed for the whole motion.
    let theta_star = 0.5;
    let constraint = ConstraintSet::tsr(&arm, TsrConstraint::orientation(theta_star, 10.0));

    // Find collision-free start and goal on the manifold: the last joint
    // absorbs the heading so the sum hits theta_star exactly.
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let sample_on_manifold = |rng: &mut ChaCha8Rng| loop {
        let mut q = uniform_sample(&arm, rng);
        let partial: f64 = q.q.iter().take(n - 1).sum();
        q.q[n - 1] = theta_star - partial;
        if arm.within_limits(&q.q) && is_collision_free(&arm, &q, &env) {
            return q;
        }
    };
    let q_s = sample_on_manifold(&mut rng);
    let q_g = loop {
        let g = sample_on_manifold(&mut rng);
        if (&g.q - &q_s.q).norm() > 2.0 {
            break g;
        }
    };

    // Codebook from unconstrained paths planned in the same environment.
    let mut paths = Vec::new();
    while paths.len() < 25 {
        let a = uniform_sample(&arm, &mut rng);
        let b = uniform_sample(&arm, &mut rng);
        if !is_collision_free(&arm, &a, &env) || !is_collision_free(&arm, &b, &env) {
            continue;
        }
        let req = PlanRequest {
            arm: arm.clone(),
            env: env.clone(),
            constraint: ConstraintSet::unconstrained(n),
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
        if let Ok(res) = baseline_plan(&req) {
            if res.success {
                paths.push(res.path);
            }
        }
    }
    let codebook = fit_codebook(&paths, 16, 5).unwrap();

    // Predict the region sequence and pull each region onto the manifold.
    let scorer = heuristic_scorer(&codebook, &q_s, &q_g, 0.25).unwrap();
    let h = beam_search(&scorer, 4, 24).unwrap();
    let opt = OptimizerParams { seed: 17, ..Default::default() };
    let latents = optimize_sequence_regions(&codebook, &h, &constraint, &opt);
    let gmm = build_gmm_from_latents(&codebook, &latents).unwrap();

    let request = PlanRequest {
        arm,
        env,
        constraint,
        start: q_s,
        goal: Goal::Config(q_g),
        k_max: 5000,
        goal_bias: 0.1,
        step_size: 0.2,
        connect_tol: 0.2,
        seed: 1,
        projection: Default::default(),
        resolution: 0.02,
        epsilon_valid: 1e-3,
        goal_attempts: 32,
        simplify_shortcuts: 100,
        time_budget: Some(30.0),
    };

    let guided = plan(&request, &gmm).unwrap();
    let uniform = baseline_plan(&request).unwrap();
    println!("predicted sequence: {:?}", h.indices());
    for (name, r) in [("region-guided", &guided), ("uniform", &uniform)] {
        println!(
            "{name:>14}: success={} vertices={} path_length={:.3} wall={:.3}s waypoints={}",
            r.success,
            r.vertices,
            r.path_length,
            r.wall_time,
            r.path.len()
        );
    }
}
