//! Pull a sampling region toward the constraint manifold.
//!
//! One latent region decodes to a Gaussian over a 3-link arm's
//! configuration space. Gradient descent on the Monte-Carlo mean of
//! G(q) = |F(q)|^2 moves the region onto an end-effector orientation
//! constraint; samples drawn afterwards are much closer to the manifold.
//!
//! ```text
//! cargo run --example optimize_region
//! ```

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use regionplan::constraints::{ConstraintSet, TsrConstraint};
use regionplan::kinematics::ArmModel;
use regionplan::regions::{
    mc_loss, sample_eps_batch, update_distribution, Codebook, OptimizerParams,
};

fn main() {
    let n = 3;
    let arm = ArmModel::uniform(n, 0.4, 2.9, 0.02).unwrap();
    // Hold the end-effector heading at 0.9 rad.
    let f = ConstraintSet::tsr(&arm, TsrConstraint::orientation(0.9, 10.0));

    // A region centered well off the manifold, with broad spread.
    let z0 = Codebook::pack(
        &DVector::from_vec(vec![-0.8, 0.5, 0.4]),
        &DMatrix::zeros(n, n),
        &DVector::from_element(n, (0.4_f64).ln()),
    );
    let codebook = Codebook::new(n, vec![z0.clone()]).unwrap();

    let params = OptimizerParams { seed: 42, ..Default::default() };
    let update = update_distribution(&codebook, &z0, &f, &params).unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let eps = sample_eps_batch(&mut rng, 10_000, n);
    let before = mc_loss(&codebook, &z0, &f, &eps);
    let after = mc_loss(&codebook, &update.region, &f, &eps);

    let p0 = codebook.decode(&z0).unwrap();
    let p1 = codebook.decode(&update.region).unwrap();
    println!("gradient-descent iterations: {}", update.iterations);
    println!("mean G over 10k samples: {before:.5} -> {after:.5}");
    println!("heading sum of the mean:  {:+.4} -> {:+.4} (target 0.9)", p0.mu.sum(), p1.mu.sum());
    println!("covariance trace:         {:.4} -> {:.4}", p0.covariance().trace(), p1.covariance().trace());
}
