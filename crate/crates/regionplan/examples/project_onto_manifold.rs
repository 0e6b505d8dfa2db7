//! Project random configurations onto a constraint manifold.
//!
//! A 2-link arm must keep its end effector on the line y = 0. Random
//! configurations are pulled onto the manifold with the damped
//! least-squares projection operator.
//!
//! ```text
//! cargo run --example project_onto_manifold
//! ```

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use regionplan::constraints::{ConstraintSet, TsrConstraint};
use regionplan::kinematics::{forward_kinematics, ArmModel, JointConfig, PlanarPose};
use regionplan::projection::project;
use regionplan::projection::ProjectionParams;

fn main() {
    let arm = ArmModel::uniform(2, 1.0, std::f64::consts::PI, 0.01).unwrap();
    // Zero-width y row makes this an equality constraint on ee_y.
    let tsr = TsrConstraint::new(
        PlanarPose::identity(),
        PlanarPose::identity(),
        [[-10.0, 10.0], [0.0, 0.0], [-10.0, 10.0]],
    )
    .unwrap();
    let f = ConstraintSet::tsr(&arm, tsr);
    let params = ProjectionParams::default();

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    println!("{:>24} {:>10} {:>24} {:>12}", "q0", "iters", "projected q", "ee_y");
    for _ in 0..8 {
        let q0 = JointConfig::from_slice(&[rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)]);
        match project(&q0, &f, Some(&arm.joint_limits), &params) {
            Ok(p) => {
                let pose = forward_kinematics(&arm, &p.q).unwrap();
                println!(
                    "({:>+7.3}, {:>+7.3}) {:>10} ({:>+7.3}, {:>+7.3}) {:>12.2e}",
                    q0.q[0], q0.q[1], p.iterations, p.q.q[0], p.q.q[1], pose.y
                );
            }
            Err(e) => println!("({:>+7.3}, {:>+7.3})  failed: {e}", q0.q[0], q0.q[1]),
        }
    }
}
