use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use regionplan::bench::{
    emit_histogram, emit_report, histogram_experiment, run_scenario, run_suite, ReportFormat,
    Variant,
};
use regionplan::environment::load_scenario;
use regionplan::error::Error;
use regionplan::kinematics::JointConfig;
use regionplan::regions::fit_codebook;
use regionplan::suite::{generate_suite, SuiteSpec};

#[derive(Parser)]
#[command(name = "regionplan", version, about = "Region-guided constrained motion planning for planar arms")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Plan a single scenario and print the outcome.
    Plan {
        scenario: PathBuf,
        /// Planner variant: cvq, opt-cvq, or baseline.
        #[arg(long, default_value = "opt-cvq")]
        variant: Variant,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Override the scenario's sampling-iteration cap.
        #[arg(long = "K")]
        k: Option<usize>,
        /// Override the goal-bias probability.
        #[arg(long)]
        goal_bias: Option<f64>,
        /// Override the extension step size (radians).
        #[arg(long)]
        step_size: Option<f64>,
        /// Override the joining distance.
        #[arg(long)]
        connect_tol: Option<f64>,
        /// Override the projection tolerance.
        #[arg(long)]
        proj_eps: Option<f64>,
        /// Override the projection iteration cap.
        #[arg(long)]
        proj_max_iters: Option<usize>,
        /// Override the beam width of the sequence search.
        #[arg(long)]
        beam_width: Option<usize>,
        /// Override the maximum predicted sequence length.
        #[arg(long)]
        max_seq_len: Option<usize>,
        /// Wall-clock cutoff in seconds.
        #[arg(long)]
        cutoff: Option<f64>,
        /// Write the path as a JSON array of configuration arrays.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every scenario in a directory across variants and seeds.
    Bench {
        suite_dir: PathBuf,
        /// Number of seeds (0..N-1) per scenario and variant.
        #[arg(long, default_value_t = 5)]
        seeds: u64,
        /// Per-trial wall-clock cutoff in seconds.
        #[arg(long, default_value_t = 60.0)]
        cutoff: f64,
        /// CSV report path.
        #[arg(long)]
        out: PathBuf,
        /// Optional JSON report with wall-clock times and aggregates.
        #[arg(long)]
        json: Option<PathBuf>,
        /// Comma-separated variants to run (default: all three).
        #[arg(long, value_delimiter = ',')]
        variants: Option<Vec<Variant>>,
    },
    /// Emit before/after histogram data of the region objective G.
    Hist {
        scenario: PathBuf,
        /// Histogram CSV path.
        #[arg(long)]
        out: PathBuf,
        /// Number of seeds (0..N-1) to aggregate.
        #[arg(long, default_value_t = 1)]
        seeds: u64,
        #[arg(long, default_value_t = 40)]
        bins: usize,
    },
    /// Fit a codebook from a JSON file of training paths.
    FitCodebook {
        /// JSON array of paths, each an array of configuration arrays.
        paths: PathBuf,
        /// Number of codebook regions.
        #[arg(long)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Generate the constrained benchmark suite into a directory.
    GenSuite {
        out_dir: PathBuf,
        #[arg(long, default_value_t = 20)]
        scenarios: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
}

fn exit_code_for(err: &Error) -> ExitCode {
    match err {
        Error::Scenario(_)
        | Error::Json(_)
        | Error::Io(_)
        | Error::InvalidModel(_)
        | Error::DimensionMismatch { .. }
        | Error::InvalidStart(_)
        | Error::InvalidGoal(_) => ExitCode::from(2),
        _ => ExitCode::from(1),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}

fn scenario_files(dir: &Path) -> Result<Vec<PathBuf>, Error> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| {
            p.extension().map_or(false, |x| x == "json")
                && !p.file_name().map_or(false, |n| n.to_string_lossy().starts_with("codebook"))
        })
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::Scenario(format!("no scenario files in {}", dir.display())));
    }
    Ok(files)
}

fn run(command: Command) -> Result<ExitCode, Error> {
    match command {
        Command::Plan {
            scenario,
            variant,
            seed,
            k,
            goal_bias,
            step_size,
            connect_tol,
            proj_eps,
            proj_max_iters,
            beam_width,
            max_seq_len,
            cutoff,
            out,
        } => {
            let mut sc = load_scenario(&scenario)?;
            if let Some(v) = k {
                sc.planner.k = v;
            }
            if let Some(v) = goal_bias {
                sc.planner.goal_bias = v;
            }
            if let Some(v) = step_size {
                sc.planner.step_size = v;
            }
            if let Some(v) = connect_tol {
                sc.planner.connect_tol = Some(v);
            }
            if let Some(v) = proj_eps {
                sc.planner.proj_eps = v;
            }
            if let Some(v) = proj_max_iters {
                sc.planner.proj_max_iters = v;
            }
            if let Some(v) = beam_width {
                sc.planner.beam_width = v;
            }
            if let Some(v) = max_seq_len {
                sc.planner.max_seq_len = v;
            }
            sc.planner.validate()?;

            let outcome = run_scenario(&sc, &scenario, variant, seed, cutoff);
            if let Some(err) = outcome.error {
                return Err(err);
            }
            let result = outcome.result.expect("result present without error");
            println!(
                "variant={variant} seed={seed} success={} vertices={} path_length={:.4} wall_s={:.4} work_s={:.6}",
                result.success, result.vertices, result.path_length, outcome.wall_s, outcome.time_s
            );
            if let Some(out) = out {
                let path_json: Vec<Vec<f64>> = result.path.iter().map(JointConfig::to_vec).collect();
                std::fs::write(&out, serde_json::to_string_pretty(&path_json)?)?;
                println!("path written to {}", out.display());
            }
            Ok(if result.success { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }

        Command::Bench { suite_dir, seeds, cutoff, out, json, variants } => {
            let files = scenario_files(&suite_dir)?;
            let variants = variants.unwrap_or_else(|| Variant::all().to_vec());
            let seed_list: Vec<u64> = (0..seeds).collect();
            let report = run_suite(&files, &variants, &seed_list, cutoff);
            emit_report(&report, ReportFormat::Csv, &out)?;
            if let Some(json_path) = json {
                emit_report(&report, ReportFormat::Json, &json_path)?;
            }
            for s in &report.summaries {
                if s.trials == 0 {
                    continue;
                }
                println!(
                    "{:<9} trials={:<4} accuracy={:>6.1}% median_vertices={:.1} median_length={:.3}",
                    s.variant,
                    s.trials,
                    100.0 * s.accuracy,
                    s.median_vertices.unwrap_or(f64::NAN),
                    s.median_path_length.unwrap_or(f64::NAN),
                );
            }
            println!("report written to {}", out.display());
            Ok(ExitCode::SUCCESS)
        }

        Command::Hist { scenario, out, seeds, bins } => {
            let sc = load_scenario(&scenario)?;
            let seed_list: Vec<u64> = (0..seeds).collect();
            let report = histogram_experiment(&sc, &scenario, &seed_list, bins)?;
            emit_histogram(&report, &out)?;
            for r in &report.regions {
                println!("{}: mean G before={:.5} after={:.5}", r.label, r.mean_before, r.mean_after);
            }
            println!("histogram written to {}", out.display());
            Ok(ExitCode::SUCCESS)
        }

        Command::FitCodebook { paths, n, out, seed } => {
            let text = std::fs::read_to_string(&paths)?;
            let raw: Vec<Vec<Vec<f64>>> = serde_json::from_str(&text)?;
            let data: Vec<Vec<JointConfig>> = raw
                .into_iter()
                .map(|path| path.into_iter().map(JointConfig::from).collect())
                .collect();
            let codebook = fit_codebook(&data, n, seed)?;
            codebook.save(&out)?;
            println!(
                "codebook with {} regions (n = {}) written to {}",
                codebook.len(),
                codebook.config_dim(),
                out.display()
            );
            Ok(ExitCode::SUCCESS)
        }

        Command::GenSuite { out_dir, scenarios, seed } => {
            let spec = SuiteSpec { scenarios, seed, ..Default::default() };
            let files = generate_suite(&out_dir, &spec)?;
            println!("{} scenarios written to {}", files.len(), out_dir.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}
