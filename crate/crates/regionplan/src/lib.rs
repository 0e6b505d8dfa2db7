//! Region-guided constrained motion planning for planar serial arms.
//!
//! The toolkit plans joint-space paths that stay on a constraint manifold
//! `{q : F(q) = 0}` while avoiding workspace obstacles. Sampling is guided
//! by a codebook of latent regions, each decoding to a Gaussian over the
//! configuration space. For a query the toolkit:
//!
//! 1. predicts a region sequence with beam search over a pluggable scorer,
//! 2. optionally pulls each region toward the constraint manifold by
//!    stochastic gradient descent on the mean squared residual,
//! 3. builds a uniform-weight Gaussian mixture from the sequence, and
//! 4. runs a bidirectional tree planner whose samples are projected onto
//!    the manifold with a damped least-squares operator.
//!
//! A uniform-sampling baseline shares the planner skeleton so the two
//! strategies can be benchmarked head to head; see the `bench` module and
//! the `examples/` directory.

pub mod bench;
pub mod constraints;
pub mod environment;
pub mod error;
pub mod kinematics;
pub mod planner;
pub mod projection;
pub mod regions;
pub mod sampling;
pub mod suite;

pub use error::{Error, Result};

/// Derive an independent RNG seed from a base seed and a salt
/// (splitmix64 finalizer on both words).
pub(crate) fn mix_seed(seed: u64, salt: u64) -> u64 {
    fn splitmix(mut x: u64) -> u64 {
        x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = x;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    splitmix(seed ^ splitmix(salt))
}
