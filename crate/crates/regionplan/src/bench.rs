//! Benchmark harness: runs scenario suites across planner variants,
//! computes success/time/vertex/length metrics, and emits the before/after
//! region-objective histogram data.
//!
//! The CSV `time_s` column is a deterministic work-model estimate computed
//! from operation counters, so reports reproduce byte for byte across
//! runs; measured wall-clock seconds are reported per trial in the JSON
//! output. The per-trial cutoff is enforced against the real clock,
//! checked once per planner iteration.

use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::environment::{load_scenario, Scenario};
use crate::error::{Error, Result};
use crate::mix_seed;
use crate::planner::{baseline_plan, plan, Goal, PlanRequest, PlanResult, PlanStats};
use crate::regions::{
    mc_loss, sample_eps_batch, Codebook, LatentRegion,
};
use crate::sampling::{
    beam_search, build_gmm_from_latents, heuristic_scorer, optimize_sequence_regions_with_stats,
    RegionSequence,
};

const OPT_RNG_SALT: u64 = 0x6F70_7469;
const HIST_RNG_SALT: u64 = 0x6869_7374;

/// Planner variants the harness compares.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variant {
    /// Region-guided sampling without the per-query region update.
    Cvq,
    /// Region-guided sampling with the per-query region update.
    OptCvq,
    /// Uniform sampling over the joint limits.
    Baseline,
}

impl Variant {
    pub fn all() -> [Variant; 3] {
        [Variant::Cvq, Variant::OptCvq, Variant::Baseline]
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Variant::Cvq => "cvq",
            Variant::OptCvq => "opt-cvq",
            Variant::Baseline => "baseline",
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cvq" => Ok(Variant::Cvq),
            "opt-cvq" => Ok(Variant::OptCvq),
            "baseline" => Ok(Variant::Baseline),
            other => Err(Error::InvalidModel(format!(
                "unknown variant '{other}' (expected cvq, opt-cvq, or baseline)"
            ))),
        }
    }
}

// Rough per-operation costs (seconds) for the deterministic time model.
const COST_PROJ_ITER: f64 = 1.5e-6;
const COST_STATE_CHECK: f64 = 6.0e-7;
const COST_LOOP_ITER: f64 = 3.0e-7;
const COST_OPT_SAMPLE: f64 = 1.2e-6;
const COST_NEAREST_VISIT: f64 = 5.0e-9;

fn work_time(stats: &PlanStats, opt_samples: u64) -> f64 {
    stats.proj_iterations as f64 * COST_PROJ_ITER
        + stats.states_checked as f64 * COST_STATE_CHECK
        + stats.iterations as f64 * COST_LOOP_ITER
        + stats.nearest_visits as f64 * COST_NEAREST_VISIT
        + opt_samples as f64 * COST_OPT_SAMPLE
}

/// One benchmark trial.
#[derive(Clone, Debug, Serialize)]
pub struct TrialRow {
    pub scenario: String,
    pub variant: String,
    pub seed: u64,
    pub success: bool,
    /// Deterministic work-model time, seconds.
    pub time_s: f64,
    pub vertices: usize,
    pub path_length: f64,
    /// Measured wall-clock seconds (JSON report only).
    pub wall_s: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Per-variant aggregates; medians and means of time, vertices, and length
/// are taken over successful trials.
#[derive(Clone, Debug, Serialize)]
pub struct VariantSummary {
    pub variant: String,
    pub trials: usize,
    pub successes: usize,
    pub accuracy: f64,
    pub median_time_s: Option<f64>,
    pub mean_time_s: Option<f64>,
    pub median_vertices: Option<f64>,
    pub mean_vertices: Option<f64>,
    pub median_path_length: Option<f64>,
    pub mean_path_length: Option<f64>,
    pub median_wall_s: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct BenchReport {
    pub rows: Vec<TrialRow>,
    pub summaries: Vec<VariantSummary>,
    pub load_errors: Vec<LoadError>,
}

#[derive(Clone, Debug, Serialize)]
pub struct LoadError {
    pub scenario: String,
    pub message: String,
}

fn median(sorted: &[f64]) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let n = sorted.len();
    Some(if n % 2 == 1 { sorted[n / 2] } else { 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]) })
}

fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}

fn summarize(variant: Variant, rows: &[TrialRow]) -> VariantSummary {
    let mine: Vec<&TrialRow> = rows.iter().filter(|r| r.variant == variant.as_str()).collect();
    let successes: Vec<&&TrialRow> = mine.iter().filter(|r| r.success).collect();
    let collect_sorted = |f: &dyn Fn(&TrialRow) -> f64| -> Vec<f64> {
        let mut v: Vec<f64> = successes.iter().map(|r| f(r)).collect();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v
    };
    let times = collect_sorted(&|r| r.time_s);
    let verts = collect_sorted(&|r| r.vertices as f64);
    let lens = collect_sorted(&|r| r.path_length);
    let walls = collect_sorted(&|r| r.wall_s);
    VariantSummary {
        variant: variant.as_str().to_string(),
        trials: mine.len(),
        successes: successes.len(),
        accuracy: if mine.is_empty() { 0.0 } else { successes.len() as f64 / mine.len() as f64 },
        median_time_s: median(&times),
        mean_time_s: mean(&times),
        median_vertices: median(&verts),
        mean_vertices: mean(&verts),
        median_path_length: median(&lens),
        mean_path_length: mean(&lens),
        median_wall_s: median(&walls),
    }
}

impl BenchReport {
    pub fn from_rows(rows: Vec<TrialRow>, load_errors: Vec<LoadError>) -> Self {
        let summaries = Variant::all().iter().map(|&v| summarize(v, &rows)).collect();
        BenchReport { rows, summaries, load_errors }
    }

    pub fn summary(&self, variant: Variant) -> &VariantSummary {
        self.summaries.iter().find(|s| s.variant == variant.as_str()).expect("all variants present")
    }

    /// Fixed-header CSV: one row per trial, deterministic fields only.
    pub fn csv(&self) -> String {
        let mut out = String::from("scenario,variant,seed,success,time_s,vertices,path_length\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.scenario, r.variant, r.seed, r.success, r.time_s, r.vertices, r.path_length
            ));
        }
        out
    }
}

/// Result of one trial, with full planner output when the pipeline ran.
#[derive(Debug)]
pub struct TrialOutcome {
    pub result: Option<PlanResult>,
    pub error: Option<Error>,
    /// Deterministic work-model time, seconds.
    pub time_s: f64,
    pub wall_s: f64,
}

/// Run one (scenario, variant, seed) trial with an optional wall-clock
/// cutoff covering the whole pipeline.
pub fn run_scenario(
    scenario: &Scenario,
    scenario_path: &Path,
    variant: Variant,
    seed: u64,
    cutoff_seconds: Option<f64>,
) -> TrialOutcome {
    let t0 = Instant::now();
    let mut pre_stats = PlanStats::default();
    let mut opt_samples = 0u64;

    let outcome = (|| -> Result<PlanResult> {
        let mut request = PlanRequest::from_scenario(scenario, seed)?;
        let (q_s, q_g, stats) = crate::planner::resolve_query(&request)?;
        pre_stats = stats;
        // Plan from the resolved endpoints; goal TSRs are sampled once here.
        request.start = q_s.clone();
        request.goal = Goal::Config(q_g.clone());

        match variant {
            Variant::Baseline => {
                request.time_budget = remaining_budget(&t0, cutoff_seconds)?;
                baseline_plan(&request)
            }
            Variant::Cvq | Variant::OptCvq => {
                let cb_path = scenario.codebook_path(scenario_path).ok_or_else(|| {
                    Error::Scenario("scenario has no codebook, required for region-guided variants".into())
                })?;
                let codebook = Codebook::load(&cb_path)?;
                let scorer = heuristic_scorer(&codebook, &q_s, &q_g, scenario.planner.temperature)?;
                let h = beam_search(&scorer, scenario.planner.beam_width, scenario.planner.max_seq_len)?;
                let latents: Vec<LatentRegion> = match variant {
                    Variant::OptCvq => {
                        let params =
                            scenario.planner.optimizer_params(mix_seed(seed, OPT_RNG_SALT));
                        let opt = optimize_sequence_regions_with_stats(
                            &codebook,
                            &h,
                            &request.constraint,
                            &params,
                        );
                        opt_samples = opt.total_iterations as u64 * params.n_mc as u64;
                        opt.latents
                    }
                    _ => h.region_indices().iter().map(|&i| codebook.region(i).clone()).collect(),
                };
                let gmm = build_gmm_from_latents(&codebook, &latents)?;
                request.time_budget = remaining_budget(&t0, cutoff_seconds)?;
                plan(&request, &gmm)
            }
        }
    })();

    let wall_s = t0.elapsed().as_secs_f64();
    match outcome {
        Ok(res) => {
            let mut total = res.stats;
            total.proj_iterations += pre_stats.proj_iterations;
            total.states_checked += pre_stats.states_checked;
            TrialOutcome { time_s: work_time(&total, opt_samples), wall_s, result: Some(res), error: None }
        }
        Err(err) => TrialOutcome {
            time_s: work_time(&pre_stats, opt_samples),
            wall_s,
            result: None,
            error: Some(err),
        },
    }
}

/// Remaining budget, or an error when the cutoff already elapsed.
fn remaining_budget(t0: &Instant, cutoff: Option<f64>) -> Result<Option<f64>> {
    match cutoff {
        None => Ok(None),
        Some(c) => {
            let left = c - t0.elapsed().as_secs_f64();
            if left <= 0.0 {
                Err(Error::Numeric("cutoff elapsed before planning started".into()))
            } else {
                Ok(Some(left))
            }
        }
    }
}

fn scenario_label(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| path.display().to_string())
}

/// Run every (scenario, variant, seed) combination. Trials run in
/// parallel; rows come back in deterministic (scenario, variant, seed)
/// order and scenarios that fail to load produce failure rows while the
/// suite continues.
pub fn run_suite(
    scenario_paths: &[PathBuf],
    variants: &[Variant],
    seeds: &[u64],
    cutoff_seconds: f64,
) -> BenchReport {
    let mut load_errors = Vec::new();
    let mut scenarios: Vec<Option<Scenario>> = Vec::with_capacity(scenario_paths.len());
    for path in scenario_paths {
        match load_scenario(path) {
            Ok(s) => scenarios.push(Some(s)),
            Err(e) => {
                load_errors.push(LoadError {
                    scenario: scenario_label(path),
                    message: e.to_string(),
                });
                scenarios.push(None);
            }
        }
    }

    let mut jobs = Vec::new();
    for (si, path) in scenario_paths.iter().enumerate() {
        for &variant in variants {
            for &seed in seeds {
                jobs.push((si, path.clone(), variant, seed));
            }
        }
    }

    let rows: Vec<TrialRow> = jobs
        .par_iter()
        .map(|(si, path, variant, seed)| {
            let label = scenario_label(path);
            match &scenarios[*si] {
                Some(scenario) => {
                    let out = run_scenario(scenario, path, *variant, *seed, Some(cutoff_seconds));
                    let (success, vertices, path_len) = match &out.result {
                        Some(r) => (r.success, r.vertices, r.path_length),
                        None => (false, 0, 0.0),
                    };
                    TrialRow {
                        scenario: label,
                        variant: variant.as_str().to_string(),
                        seed: *seed,
                        success,
                        time_s: out.time_s,
                        vertices,
                        path_length: path_len,
                        wall_s: out.wall_s,
                        error: out.error.map(|e| e.to_string()),
                    }
                }
                None => TrialRow {
                    scenario: label,
                    variant: variant.as_str().to_string(),
                    seed: *seed,
                    success: false,
                    time_s: 0.0,
                    vertices: 0,
                    path_length: 0.0,
                    wall_s: 0.0,
                    error: Some("scenario failed to load".into()),
                },
            }
        })
        .collect();

    BenchReport::from_rows(rows, load_errors)
}

/// Full planner outputs per trial, for validation beyond the report rows.
pub fn run_suite_detailed(
    scenario_paths: &[PathBuf],
    variants: &[Variant],
    seeds: &[u64],
    cutoff_seconds: f64,
) -> Vec<(String, Variant, u64, TrialOutcome)> {
    let mut jobs = Vec::new();
    for path in scenario_paths {
        for &variant in variants {
            for &seed in seeds {
                jobs.push((path.clone(), variant, seed));
            }
        }
    }
    jobs.par_iter()
        .map(|(path, variant, seed)| {
            let label = scenario_label(path);
            let out = match load_scenario(path) {
                Ok(scenario) => run_scenario(&scenario, path, *variant, *seed, Some(cutoff_seconds)),
                Err(e) => TrialOutcome { result: None, error: Some(e), time_s: 0.0, wall_s: 0.0 },
            };
            (label, *variant, *seed, out)
        })
        .collect()
}

/// Report output format.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

/// Write a benchmark report to disk.
pub fn emit_report(report: &BenchReport, format: ReportFormat, path: &Path) -> Result<()> {
    match format {
        ReportFormat::Csv => std::fs::write(path, report.csv())?,
        ReportFormat::Json => std::fs::write(path, serde_json::to_string_pretty(report)?)?,
    }
    Ok(())
}

/// Histogram of the region objective `G` before and after optimization,
/// for one predicted region.
#[derive(Clone, Debug, Serialize)]
pub struct RegionHistogram {
    /// `s<seed>_h<position>_r<codebook index>`.
    pub label: String,
    pub mean_before: f64,
    pub mean_after: f64,
    pub bin_edges: Vec<f64>,
    pub counts_before: Vec<usize>,
    pub counts_after: Vec<usize>,
    #[serde(skip)]
    pub samples_before: Vec<f64>,
    #[serde(skip)]
    pub samples_after: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct HistogramReport {
    pub regions: Vec<RegionHistogram>,
    pub samples_per_side: usize,
}

fn bin_counts(samples: &[f64], edges: &[f64]) -> Vec<usize> {
    let bins = edges.len() - 1;
    let mut counts = vec![0usize; bins];
    let lo = edges[0];
    let hi = edges[bins];
    let width = (hi - lo) / bins as f64;
    for &s in samples {
        let mut b = if width > 0.0 { ((s - lo) / width).floor() as isize } else { 0 };
        b = b.clamp(0, bins as isize - 1);
        counts[b as usize] += 1;
    }
    counts
}

/// For each region the scorer predicts on `scenario`, draw `G` samples
/// before and after the distribution update and bin them on shared edges.
pub fn histogram_experiment(
    scenario: &Scenario,
    scenario_path: &Path,
    seeds: &[u64],
    bins: usize,
) -> Result<HistogramReport> {
    const SAMPLES: usize = 10_000;
    if bins == 0 {
        return Err(Error::InvalidModel("bins must be >= 1".into()));
    }
    let cb_path = scenario
        .codebook_path(scenario_path)
        .ok_or_else(|| Error::Scenario("histogram experiment needs a codebook".into()))?;
    let codebook = Codebook::load(&cb_path)?;
    let f = scenario.constraint_set();
    let mut regions = Vec::new();

    for &seed in seeds {
        let request = PlanRequest::from_scenario(scenario, seed)?;
        let (q_s, q_g, _) = crate::planner::resolve_query(&request)?;
        let scorer = heuristic_scorer(&codebook, &q_s, &q_g, scenario.planner.temperature)?;
        let h: RegionSequence =
            beam_search(&scorer, scenario.planner.beam_width, scenario.planner.max_seq_len)?;
        let params = scenario.planner.optimizer_params(mix_seed(seed, OPT_RNG_SALT));
        let optimized = optimize_sequence_regions_with_stats(&codebook, &h, &f, &params);

        for (pos, &idx) in h.region_indices().iter().enumerate() {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(mix_seed(
                mix_seed(seed, HIST_RNG_SALT),
                idx as u64,
            ));
            use rand::SeedableRng;
            let eps_before = sample_eps_batch(&mut rng, SAMPLES, codebook.config_dim());
            let eps_after = sample_eps_batch(&mut rng, SAMPLES, codebook.config_dim());
            let before_region = codebook.region(idx);
            let g_of = |region: &LatentRegion, eps: &[nalgebra::DVector<f64>]| -> Vec<f64> {
                let params = codebook.decode(region).expect("codebook region");
                eps.iter()
                    .map(|e| f.g_at(&crate::regions::reparam_sample(&params, e).q))
                    .collect()
            };
            let samples_before = g_of(before_region, &eps_before);
            let samples_after = g_of(&optimized.latents[pos], &eps_after);
            let max_g = samples_before
                .iter()
                .chain(samples_after.iter())
                .cloned()
                .fold(0.0_f64, f64::max)
                .max(1e-12);
            let edges: Vec<f64> = (0..=bins).map(|i| i as f64 * max_g / bins as f64).collect();
            let counts_before = bin_counts(&samples_before, &edges);
            let counts_after = bin_counts(&samples_after, &edges);
            regions.push(RegionHistogram {
                label: format!("s{seed}_h{pos}_r{idx}"),
                mean_before: samples_before.iter().sum::<f64>() / SAMPLES as f64,
                mean_after: samples_after.iter().sum::<f64>() / SAMPLES as f64,
                bin_edges: edges,
                counts_before,
                counts_after,
                samples_before,
                samples_after,
            });
        }
    }
    Ok(HistogramReport { regions, samples_per_side: SAMPLES })
}

/// Histogram CSV: `region,bin_lo,bin_hi,count_before,count_after`.
pub fn emit_histogram(report: &HistogramReport, path: &Path) -> Result<()> {
    let mut out = String::from("region,bin_lo,bin_hi,count_before,count_after\n");
    for r in &report.regions {
        for b in 0..r.counts_before.len() {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.label,
                r.bin_edges[b],
                r.bin_edges[b + 1],
                r.counts_before[b],
                r.counts_after[b]
            ));
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Monte-Carlo mean of `G` for a region, used by tests and examples.
pub fn region_mean_g(
    codebook: &Codebook,
    region: &LatentRegion,
    f: &crate::constraints::ConstraintSet,
    samples: usize,
    seed: u64,
) -> f64 {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let eps = sample_eps_batch(&mut rng, samples, codebook.config_dim());
    mc_loss(codebook, region, f, &eps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::{ConstraintSpec, GoalSpec, PlannerConfig};
    use crate::kinematics::{ArmModel, JointConfig};

    fn trivial_scenario() -> Scenario {
        Scenario {
            arm: ArmModel::uniform(2, 0.5, 3.0, 0.02).unwrap(),
            obstacles: vec![],
            constraint: ConstraintSpec::None,
            start: vec![0.1, 0.2],
            goal: GoalSpec::Config(vec![0.9, -0.5]),
            planner: PlannerConfig { k: 2000, ..Default::default() },
            codebook: Some("cb.json".into()),
        }
    }

    fn write_trivial(dir: &Path) -> PathBuf {
        let sc = trivial_scenario();
        // Codebook with a handful of regions spanning the joint box.
        let paths: Vec<Vec<JointConfig>> = (0..6)
            .map(|i| {
                let t = i as f64 / 5.0;
                vec![
                    JointConfig::from_slice(&[t * 2.0 - 1.0, 0.3 * t]),
                    JointConfig::from_slice(&[t * 1.5 - 0.5, -0.4 * t]),
                ]
            })
            .collect();
        let cb = crate::regions::fit_codebook(&paths, 4, 3).unwrap();
        cb.save(&dir.join("cb.json")).unwrap();
        let p = dir.join("trivial.json");
        sc.save(&p).unwrap();
        p
    }

    #[test]
    fn suite_on_trivial_scenario_all_variants_succeed() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_trivial(dir.path());
        let report = run_suite(&[p], &Variant::all(), &[0], 60.0);
        assert_eq!(report.rows.len(), 3);
        for row in &report.rows {
            assert!(row.success, "{row:?}");
        }
        for v in Variant::all() {
            assert_eq!(report.summary(v).accuracy, 1.0);
        }
    }

    #[test]
    fn tiny_cutoff_fails_every_row() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_trivial(dir.path());
        let report = run_suite(&[p], &Variant::all(), &[0, 1], 0.000001);
        assert_eq!(report.rows.len(), 6);
        for row in &report.rows {
            assert!(!row.success);
        }
        for v in Variant::all() {
            assert_eq!(report.summary(v).accuracy, 0.0);
        }
    }

    #[test]
    fn load_failures_keep_suite_running() {
        let dir = tempfile::tempdir().unwrap();
        let good = write_trivial(dir.path());
        let bad = dir.path().join("broken.json");
        std::fs::write(&bad, "{").unwrap();
        let report = run_suite(&[bad, good], &[Variant::Baseline], &[0], 60.0);
        assert_eq!(report.rows.len(), 2);
        assert_eq!(report.load_errors.len(), 1);
        assert!(!report.rows[0].success);
        assert!(report.rows[1].success);
    }

    #[test]
    fn csv_shape_and_aggregate_consistency() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_trivial(dir.path());
        let report = run_suite(&[p], &Variant::all(), &[0, 1, 2], 60.0);
        let csv = report.csv();
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "scenario,variant,seed,success,time_s,vertices,path_length"
        );
        assert_eq!(csv.lines().count(), 1 + report.rows.len());

        // Aggregates recomputed from the emitted rows match exactly.
        for v in Variant::all() {
            let s = report.summary(v);
            let mut verts: Vec<f64> = csv
                .lines()
                .skip(1)
                .map(|l| l.split(',').collect::<Vec<_>>())
                .filter(|c| c[1] == v.as_str() && c[3] == "true")
                .map(|c| c[5].parse::<f64>().unwrap())
                .collect();
            verts.sort_by(|a, b| a.partial_cmp(b).unwrap());
            assert_eq!(median(&verts), s.median_vertices);
        }
    }

    #[test]
    fn empty_report_is_header_only() {
        let report = BenchReport::from_rows(vec![], vec![]);
        assert_eq!(report.csv(), "scenario,variant,seed,success,time_s,vertices,path_length\n");
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        emit_report(&report, ReportFormat::Csv, &p).unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap().lines().count(), 1);
    }

    #[test]
    fn json_roundtrip_preserves_aggregates() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_trivial(dir.path());
        let report = run_suite(&[p], &[Variant::Baseline], &[0, 1], 60.0);
        let p_json = dir.path().join("r.json");
        emit_report(&report, ReportFormat::Json, &p_json).unwrap();
        let text = std::fs::read_to_string(&p_json).unwrap();
        let value: serde_json::Value = serde_json::from_str(&text).unwrap();
        let s0 = &value["summaries"][2];
        assert_eq!(s0["variant"], "baseline");
        assert_eq!(s0["accuracy"], report.summary(Variant::Baseline).accuracy);
        assert_eq!(value["rows"].as_array().unwrap().len(), 2);
    }

    #[test]
    fn unconstrained_histograms_identical() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_trivial(dir.path());
        let sc = load_scenario(&p).unwrap();
        let report = histogram_experiment(&sc, &p, &[0], 10).unwrap();
        assert!(!report.regions.is_empty());
        for r in &report.regions {
            assert_eq!(r.counts_before, r.counts_after);
            assert_eq!(r.mean_before, 0.0);
            assert_eq!(r.mean_after, 0.0);
        }
    }

    #[test]
    fn variant_parsing() {
        assert_eq!("opt-cvq".parse::<Variant>().unwrap(), Variant::OptCvq);
        assert!("bogus".parse::<Variant>().is_err());
        assert_eq!(Variant::Cvq.to_string(), "cvq");
    }
}
