//! Predict a region sequence with beam search and sample its mixture.
//!
//! A codebook is fitted from synthetic paths, the distance-based scorer
//! predicts a goal-terminated index sequence for a query, and samples are
//! drawn from the resulting uniform-weight Gaussian mixture.
//!
//! ```text
//! cargo run --example predict_and_sample
//! ```

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use regionplan::kinematics::JointConfig;
use regionplan::regions::fit_codebook;
use regionplan::sampling::{beam_search, build_gmm, heuristic_scorer};

fn main() {
    // Training paths sweeping a 2D configuration box.
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let paths: Vec<Vec<JointConfig>> = (0..30)
        .map(|_| {
            let a = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
            let b = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
            (0..=10)
                .map(|i| {
                    let t = i as f64 / 10.0;
                    JointConfig::from_slice(&[
                        a[0] * (1.0 - t) + b[0] * t,
                        a[1] * (1.0 - t) + b[1] * t,
                    ])
                })
                .collect()
        })
        .collect();
    let codebook = fit_codebook(&paths, 12, 9).unwrap();
    println!("codebook: {} regions, goal token {}", codebook.len(), codebook.goal_token());

    let q_s = JointConfig::from_slice(&[-1.8, -1.6]);
    let q_g = JointConfig::from_slice(&[1.7, 1.5]);
    let scorer = heuristic_scorer(&codebook, &q_s, &q_g, 0.25).unwrap();
    let h = beam_search(&scorer, 4, 24).unwrap();
    println!("predicted sequence: {:?}", h.indices());
    for &i in h.region_indices() {
        let mu = codebook.decode_index(i).mu;
        println!("  region {i}: mean ({:+.2}, {:+.2})", mu[0], mu[1]);
    }

    let gmm = build_gmm(&codebook, &h).unwrap();
    println!("mixture: {} components, weight {:.3} each", gmm.len(), gmm.weight());
    for _ in 0..5 {
        let q = gmm.sample(&mut rng);
        println!(
            "  sample ({:+.2}, {:+.2})  log density {:+.2}",
            q.q[0],
            q.q[1],
            gmm.log_density(&q.q)
        );
    }
}
