//! Generate a miniature benchmark suite and compare all three planner
//! variants, writing the CSV and JSON reports.
//!
//! ```text
//! cargo run --example benchmark
//! ```

use regionplan::bench::{emit_report, run_suite, ReportFormat, Variant};
use regionplan::suite::{generate_suite, SuiteSpec};

fn main() {
    let dir = std::env::temp_dir().join("regionplan_example_suite");
    let spec = SuiteSpec { scenarios: 3, seed: 21, training_paths: 15, regions: 12 };
    println!("generating {} scenarios into {} ...", spec.scenarios, dir.display());
    let files = generate_suite(&dir, &spec).unwrap();

    let seeds: Vec<u64> = (0..5).collect();
    let report = run_suite(&files, &Variant::all(), &seeds, 30.0);

    println!("\n{:<10} {:>8} {:>10} {:>16} {:>14}", "variant", "trials", "accuracy", "median vertices", "median length");
    for s in &report.summaries {
        println!(
            "{:<10} {:>8} {:>9.1}% {:>16.1} {:>14.3}",
            s.variant,
            s.trials,
            100.0 * s.accuracy,
            s.median_vertices.unwrap_or(f64::NAN),
            s.median_path_length.unwrap_or(f64::NAN),
        );
    }

    let csv = dir.join("report.csv");
    let json = dir.join("report.json");
    emit_report(&report, ReportFormat::Csv, &csv).unwrap();
    emit_report(&report, ReportFormat::Json, &json).unwrap();
    println!("\nreports: {} and {}", csv.display(), json.display());
}
