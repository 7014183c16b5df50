//! Multi-seed campaign harness: runs optimizer/benchmark grids and
//! aggregates evaluation counts and optimality gaps into report tables.

use crate::objective::{
    make_benchmark_from, target_level, BenchmarkConstants, BenchmarkFunction, CountingObjective,
    ObjectiveError,
};
use crate::optimizers::{
    run, OptimError, OptimizerKind, OptimizerSpec, RunResult, StopReason, StoppingRule,
    DEFAULT_ALPHA, DEFAULT_P_FIXED, DEFAULT_SAMPLE_CAP, DEFAULT_SLOPE_THRESHOLD,
    DEFAULT_SLOPE_WINDOW,
};
use crate::domain::RngStream;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::Write;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("campaign must list at least one benchmark and one optimizer")]
    EmptyCampaign,
    #[error("repetitions must be at least 1")]
    NoRepetitions,
    #[error("budget for '{0}' must be positive")]
    ZeroBudget(String),
    #[error("cannot summarize an empty result set")]
    EmptyResults,
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
    #[error(transparent)]
    Optim(#[from] OptimError),
    #[error("worker pool: {0}")]
    ThreadPool(String),
}

/// Which table of the experiment grid to reproduce.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CampaignMode {
    /// Fixed per-function budgets; `+` variants may stop early on slope.
    Table1,
    /// No budget; stop at the target level `g(theta)` (sample cap as safety).
    Table2,
}

fn default_repetitions() -> u32 {
    100
}
fn default_theta() -> f64 {
    0.99
}
fn default_slope_threshold() -> f64 {
    DEFAULT_SLOPE_THRESHOLD
}
fn default_window() -> u64 {
    DEFAULT_SLOPE_WINDOW
}
fn default_sample_cap() -> u64 {
    DEFAULT_SAMPLE_CAP
}
fn default_p_fixed() -> f64 {
    DEFAULT_P_FIXED
}
fn default_alpha() -> f64 {
    DEFAULT_ALPHA
}

/// Full description of a campaign; JSON-serializable for the CLI.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CampaignSpec {
    pub mode: CampaignMode,
    pub benchmarks: Vec<String>,
    pub optimizers: Vec<OptimizerKind>,
    #[serde(default = "default_repetitions")]
    pub repetitions: u32,
    #[serde(default)]
    pub base_seed: u64,
    /// Per-function evaluation budgets; missing entries fall back to
    /// [`default_budget`].
    #[serde(default)]
    pub budgets: BTreeMap<String, u64>,
    #[serde(default = "default_slope_threshold")]
    pub slope_threshold: f64,
    #[serde(default = "default_window")]
    pub window: u64,
    #[serde(default = "default_theta")]
    pub theta: f64,
    #[serde(default = "default_sample_cap")]
    pub sample_cap: u64,
    #[serde(default = "default_p_fixed")]
    pub p_fixed: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
}

/// Budget used when the campaign does not name one: the three published
/// budgets, 1000 for the rest.
pub fn default_budget(benchmark: &str) -> u64 {
    match benchmark {
        "holder" => 2000,
        "rastrigin" => 1000,
        "sphere" => 25,
        _ => 1000,
    }
}

impl CampaignSpec {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.benchmarks.is_empty() || self.optimizers.is_empty() {
            return Err(ExperimentError::EmptyCampaign);
        }
        if self.repetitions == 0 {
            return Err(ExperimentError::NoRepetitions);
        }
        for (name, &b) in &self.budgets {
            if b == 0 {
                return Err(ExperimentError::ZeroBudget(name.clone()));
            }
        }
        Ok(())
    }

    fn budget_for(&self, benchmark: &str) -> u64 {
        self.budgets
            .get(benchmark)
            .copied()
            .unwrap_or_else(|| default_budget(benchmark))
    }
}

/// Aggregate statistics for one (benchmark, optimizer) cell.
#[derive(Debug, Clone, Serialize)]
pub struct StatsRow {
    pub benchmark: String,
    pub optimizer: OptimizerKind,
    #[serde(flatten)]
    pub summary: Summary,
}

/// All cells of a campaign, in the listed benchmark-major order.
#[derive(Debug, Clone, Serialize)]
pub struct CampaignStats {
    pub rows: Vec<StatsRow>,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, std)
}

/// Aggregates of one result set, before benchmark/optimizer labeling.
#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub mean_evals: f64,
    pub std_evals: f64,
    pub mean_dmax: f64,
    pub std_dmax: f64,
    pub mean_samples: f64,
    /// Runs that hit the sample cap; excluded from the means above.
    pub n_capped: u32,
    pub stop_reasons: BTreeMap<String, u32>,
}

/// Sample mean and n-1 standard deviation of evaluation counts and
/// optimality gaps (`d_max` = known maximum minus best value found).
/// Capped runs are counted and excluded.
pub fn summarize(results: &[RunResult], bench: &BenchmarkFunction) -> Result<Summary, ExperimentError> {
    if results.is_empty() {
        return Err(ExperimentError::EmptyResults);
    }
    let mut reasons: BTreeMap<String, u32> = BTreeMap::new();
    for r in results {
        *reasons.entry(r.stop_reason.to_string()).or_insert(0) += 1;
    }
    let completed: Vec<&RunResult> = results
        .iter()
        .filter(|r| r.stop_reason != StopReason::SampleCap)
        .collect();
    let n_capped = (results.len() - completed.len()) as u32;
    let used: Vec<&RunResult> = if completed.is_empty() {
        results.iter().collect() // every run capped: report them honestly
    } else {
        completed
    };
    let evals: Vec<f64> = used.iter().map(|r| r.n_evals as f64).collect();
    let dmax: Vec<f64> = used
        .iter()
        .map(|r| bench.max_value() - r.best.value)
        .collect();
    for gap in &dmax {
        debug_assert!(*gap >= -1e-9, "best value exceeds known maximum: gap {gap}");
    }
    let samples: Vec<f64> = used.iter().map(|r| r.n_samples as f64).collect();
    let (mean_evals, std_evals) = mean_std(&evals);
    let (mean_dmax, std_dmax) = mean_std(&dmax);
    let (mean_samples, _) = mean_std(&samples);
    Ok(Summary {
        mean_evals,
        std_evals,
        mean_dmax,
        std_dmax,
        mean_samples,
        n_capped,
        stop_reasons: reasons,
    })
}

fn optimizer_spec_for(
    spec: &CampaignSpec,
    kind: OptimizerKind,
    bench: &BenchmarkFunction,
) -> OptimizerSpec {
    let mut opt = match kind {
        OptimizerKind::Prs => OptimizerSpec::prs(),
        OptimizerKind::Lipo => OptimizerSpec::lipo(bench.kappa()),
        OptimizerKind::LipoPlus => OptimizerSpec::lipo_plus(bench.kappa()),
        OptimizerKind::AdaLipo => OptimizerSpec::adalipo(spec.p_fixed),
        OptimizerKind::AdaLipoPlus => OptimizerSpec::adalipo_plus(),
        OptimizerKind::AdaLipoPlusNs => OptimizerSpec::adalipo_plus_ns(),
    };
    opt.alpha = spec.alpha;
    opt
}

fn stopping_rule_for(
    spec: &CampaignSpec,
    bench: &BenchmarkFunction,
    bench_name: &str,
) -> Result<StoppingRule, ExperimentError> {
    Ok(match spec.mode {
        CampaignMode::Table1 => StoppingRule::budget_with_slope(
            spec.budget_for(bench_name),
            spec.window,
            spec.slope_threshold,
        )
        .with_sample_cap(spec.sample_cap),
        CampaignMode::Table2 => {
            StoppingRule::target(target_level(bench, spec.theta)?).with_sample_cap(spec.sample_cap)
        }
    })
}

/// Runs the full campaign grid. Run `i` of every cell uses seed
/// `base_seed + i`; cells and runs are independent, so the grid is executed
/// on a `jobs`-wide worker pool and aggregated in deterministic order.
pub fn run_campaign(
    spec: &CampaignSpec,
    constants: &[BenchmarkConstants],
    jobs: usize,
) -> Result<CampaignStats, ExperimentError> {
    spec.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| ExperimentError::ThreadPool(e.to_string()))?;

    let mut cells = Vec::new();
    for bench_name in &spec.benchmarks {
        let bench = make_benchmark_from(constants, bench_name)?;
        for &kind in &spec.optimizers {
            cells.push((bench_name.clone(), bench.clone(), kind));
        }
    }

    let rows: Result<Vec<StatsRow>, ExperimentError> = pool.install(|| {
        cells
            .iter()
            .map(|(bench_name, bench, kind)| {
                let opt_spec = optimizer_spec_for(spec, *kind, bench);
                let stop = stopping_rule_for(spec, bench, bench_name)?;
                let results: Result<Vec<RunResult>, OptimError> = (0..spec.repetitions)
                    .into_par_iter()
                    .map(|i| {
                        let mut rng = RngStream::new(spec.base_seed + i as u64);
                        let mut counting = CountingObjective::new(bench);
                        run(&mut counting, &opt_spec, &stop, &mut rng)
                    })
                    .collect();
                let results = results?;
                Ok(StatsRow {
                    benchmark: bench_name.clone(),
                    optimizer: *kind,
                    summary: summarize(&results, bench)?,
                })
            })
            .collect()
    });
    Ok(CampaignStats { rows: rows? })
}

impl CampaignStats {
    /// CSV report, one row per (benchmark, optimizer) cell.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(
            out,
            "benchmark,optimizer,mean_evals,std_evals,mean_dmax,std_dmax,mean_samples,n_capped"
        )?;
        for row in &self.rows {
            writeln!(
                out,
                "{},{},{:.4},{:.4},{:.6},{:.6},{:.1},{}",
                row.benchmark,
                row.optimizer,
                row.summary.mean_evals,
                row.summary.std_evals,
                row.summary.mean_dmax,
                row.summary.std_dmax,
                row.summary.mean_samples,
                row.summary.n_capped
            )?;
        }
        Ok(())
    }

    /// Human-readable fixed-width table.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<12} {:<11} {:>9} {:>9} {:>12} {:>12} {:>14} {:>8}\n",
            "benchmark", "optimizer", "evals", "±std", "d_max", "±std", "samples", "capped"
        ));
        for row in &self.rows {
            out.push_str(&format!(
                "{:<12} {:<11} {:>9.1} {:>9.1} {:>12.4} {:>12.4} {:>14.1} {:>8}\n",
                row.benchmark,
                row.optimizer.to_string(),
                row.summary.mean_evals,
                row.summary.std_evals,
                row.summary.mean_dmax,
                row.summary.std_dmax,
                row.summary.mean_samples,
                row.summary.n_capped
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{EvaluatedPoint, Point, RunTrace};
    use crate::objective::make_benchmark;
    use approx::assert_relative_eq;

    fn fake_result(n_evals: u64, best_value: f64) -> RunResult {
        let mut trace = RunTrace::new();
        trace.push(1, 1, best_value);
        RunResult {
            best: EvaluatedPoint {
                point: Point::new(vec![0.0, 0.0]).unwrap(),
                value: best_value,
            },
            n_evals,
            n_samples: n_evals,
            stop_reason: StopReason::Budget,
            trace,
            kappa_final: None,
        }
    }

    #[test]
    fn summarize_single_result_has_zero_std() {
        let bench = make_benchmark("sphere").unwrap();
        let s = summarize(&[fake_result(10, -1.0)], &bench).unwrap();
        assert_eq!(s.mean_evals, 10.0);
        assert_eq!(s.std_evals, 0.0);
        assert_eq!(s.mean_dmax, 1.0);
        assert_eq!(s.n_capped, 0);
    }

    #[test]
    fn summarize_two_point_hand_computation() {
        let bench = make_benchmark("sphere").unwrap();
        let s = summarize(&[fake_result(10, -1.0), fake_result(20, -0.5)], &bench).unwrap();
        assert_eq!(s.mean_evals, 15.0);
        assert_relative_eq!(s.std_evals, 50f64.sqrt(), max_relative = 1e-12); // ~7.071
    }

    #[test]
    fn summarize_exact_optimum_gives_zero_gap() {
        let bench = make_benchmark("sphere").unwrap();
        assert_eq!(summarize(&[fake_result(5, 0.0)], &bench).unwrap().mean_dmax, 0.0);
    }

    #[test]
    fn summarize_empty_is_usage_error() {
        let bench = make_benchmark("sphere").unwrap();
        assert!(matches!(
            summarize(&[], &bench),
            Err(ExperimentError::EmptyResults)
        ));
    }

    #[test]
    fn default_budgets() {
        assert_eq!(default_budget("holder"), 2000);
        assert_eq!(default_budget("rastrigin"), 1000);
        assert_eq!(default_budget("sphere"), 25);
        assert_eq!(default_budget("himmelblau"), 1000);
    }

    fn small_spec() -> CampaignSpec {
        CampaignSpec {
            mode: CampaignMode::Table1,
            benchmarks: vec!["sphere".into()],
            optimizers: vec![OptimizerKind::Prs, OptimizerKind::Lipo],
            repetitions: 5,
            base_seed: 3,
            budgets: BTreeMap::new(),
            slope_threshold: DEFAULT_SLOPE_THRESHOLD,
            window: DEFAULT_SLOPE_WINDOW,
            theta: 0.99,
            sample_cap: DEFAULT_SAMPLE_CAP,
            p_fixed: DEFAULT_P_FIXED,
            alpha: DEFAULT_ALPHA,
        }
    }

    fn shipped_constants() -> Vec<BenchmarkConstants> {
        serde_json::from_str(include_str!("../assets/benchmarks.json")).unwrap()
    }

    #[test]
    fn campaign_is_reproducible() {
        let spec = small_spec();
        let constants = shipped_constants();
        let a = run_campaign(&spec, &constants, 1).unwrap();
        let b = run_campaign(&spec, &constants, 2).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn vanilla_kinds_exhaust_budget() {
        let spec = small_spec();
        let stats = run_campaign(&spec, &shipped_constants(), 1).unwrap();
        for row in &stats.rows {
            assert_eq!(row.summary.mean_evals, 25.0, "{}", row.optimizer);
            assert_eq!(row.summary.std_evals, 0.0);
            assert_eq!(row.summary.stop_reasons.get("budget"), Some(&5));
        }
    }

    #[test]
    fn csv_schema() {
        let spec = small_spec();
        let stats = run_campaign(&spec, &shipped_constants(), 1).unwrap();
        let mut buf = Vec::new();
        stats.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "benchmark,optimizer,mean_evals,std_evals,mean_dmax,std_dmax,mean_samples,n_capped"
        );
        assert_eq!(lines.count(), 2);
    }

    #[test]
    fn campaign_spec_json_round_trip() {
        let text = r#"{
            "mode": "table2",
            "benchmarks": ["sphere", "rastrigin"],
            "optimizers": ["lipo", "adalipo", "adalipo+ns"],
            "repetitions": 7,
            "base_seed": 11
        }"#;
        let spec: CampaignSpec = serde_json::from_str(text).unwrap();
        assert_eq!(spec.mode, CampaignMode::Table2);
        assert_eq!(spec.theta, 0.99);
        assert_eq!(spec.repetitions, 7);
        assert_eq!(spec.optimizers[2], OptimizerKind::AdaLipoPlusNs);
        let back = serde_json::to_string(&spec).unwrap();
        let again: CampaignSpec = serde_json::from_str(&back).unwrap();
        assert_eq!(again.base_seed, 11);
    }
}
