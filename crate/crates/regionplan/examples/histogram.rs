//! Before/after histograms of the region objective G for one scenario.
//!
//! For each region the scorer predicts, G samples are drawn before and
//! after the distribution update; regions far from the constraint
//! manifold move sharply toward it while already-close regions stay put.
//!
//! ```text
//! cargo run --example histogram
//! ```

use regionplan::bench::{emit_histogram, histogram_experiment};
use regionplan::environment::load_scenario;
use regionplan::suite::{generate_suite, SuiteSpec};

fn main() {
    let dir = std::env::temp_dir().join("regionplan_example_hist");
    let spec = SuiteSpec { scenarios: 1, seed: 33, training_paths: 15, regions: 12 };
    let files = generate_suite(&dir, &spec).unwrap();
    let scenario = load_scenario(&files[0]).unwrap();

    let report = histogram_experiment(&scenario, &files[0], &[0], 30).unwrap();
    println!("{:<16} {:>12} {:>12} {:>8}", "region", "mean G before", "after", "drop");
    for r in &report.regions {
        let drop = if r.mean_before > 0.0 {
            100.0 * (1.0 - r.mean_after / r.mean_before)
        } else {
            0.0
        };
        println!("{:<16} {:>12.5} {:>12.5} {:>7.1}%", r.label, r.mean_before, r.mean_after, drop);
    }

    let out = dir.join("hist.csv");
    emit_histogram(&report, &out).unwrap();
    println!("\nhistogram data: {}", out.display());
}
