//! Command-line surface: single runs, campaigns, bound tables, and trace
//! export.
//!
//! Exit codes: 0 on success, 2 on usage errors, 1 on runtime failures.
//! Data streams carry only data; diagnostics go to stderr.

use crate::domain::RngStream;
use crate::experiments::{run_campaign, CampaignSpec};
use crate::objective::{
    load_benchmark_constants, make_benchmark_from, target_level, BenchmarkConstants,
    BenchmarkFunction, CountingObjective, Objective,
};
use crate::optimizers::{
    run, KappaMemory, OptimizerKind, OptimizerSpec, RunResult, StoppingRule, DEFAULT_ALPHA,
    DEFAULT_P_FIXED, DEFAULT_SAMPLE_CAP, DEFAULT_SLOPE_THRESHOLD, DEFAULT_SLOPE_WINDOW,
};
use crate::theory::cd_table;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use std::io::Write;
use std::path::PathBuf;

/// Base seed fallback when `--seed` is not given.
pub const SEED_ENV_VAR: &str = "LIPO_SEED";

#[derive(Debug)]
enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) => m,
        }
    }
}

fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

#[derive(Debug, Parser)]
#[command(
    name = "lipo",
    about = "Frugal global optimization for Lipschitz functions",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one optimization and print a JSON summary.
    Run(RunArgs),
    /// Run one optimization and write the per-evaluation trace CSV.
    Trace(RunArgs),
    /// Run a campaign from a JSON spec and report aggregate statistics.
    Bench(BenchArgs),
    /// Print the per-dimension rejection-bound constants C_d as CSV.
    Bound(BoundArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    /// prs, lipo, lipo+, adalipo, adalipo+, or adalipo+ns
    #[arg(long)]
    optimizer: String,
    /// himmelblau, holder, rastrigin, rosenbrock, sphere, or square
    #[arg(long)]
    benchmark: String,
    /// Maximum number of function evaluations.
    #[arg(long)]
    budget: Option<u64>,
    /// RNG seed (falls back to $LIPO_SEED, then 0).
    #[arg(long)]
    seed: Option<u64>,
    /// Override the benchmark's oracle Lipschitz constant.
    #[arg(long)]
    kappa: Option<f64>,
    /// Fixed exploration probability for adalipo.
    #[arg(long, default_value_t = DEFAULT_P_FIXED)]
    p: f64,
    /// Grid ratio of the Lipschitz-constant estimator.
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    /// Memory of the kappa estimator: "global", "last", or a window size in
    /// evaluations. Defaults to last for adalipo+ns and global otherwise.
    #[arg(long)]
    kappa_memory: Option<String>,
    /// Slope stopping threshold (candidate samples per evaluation).
    #[arg(long, default_value_t = DEFAULT_SLOPE_THRESHOLD)]
    slope_threshold: f64,
    /// Window (in evaluations) of the slope stopping rule.
    #[arg(long, default_value_t = DEFAULT_SLOPE_WINDOW)]
    window: u64,
    /// Enable the target stopping level g(theta); 0.99 is the usual setting.
    #[arg(long)]
    theta: Option<f64>,
    /// Hard cap on total candidate samples.
    #[arg(long, default_value_t = DEFAULT_SAMPLE_CAP)]
    sample_cap: u64,
    /// JSON file overriding the shipped benchmark constants.
    #[arg(long)]
    benchmarks_file: Option<PathBuf>,
    /// Write output here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// Campaign spec (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Worker pool width.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// JSON file overriding the shipped benchmark constants.
    #[arg(long)]
    benchmarks_file: Option<PathBuf>,
    /// Write the stats CSV here (the readable table always goes to stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BoundArgs {
    /// Comma-separated dimensions, e.g. 2,5,10,50.
    #[arg(long)]
    dims: String,
    /// delta/kappa ratio of the bound.
    #[arg(long, default_value_t = 1.0)]
    ratio: f64,
    /// Use the volume 2^d of the cube [-1,1]^d.
    #[arg(long)]
    cube: bool,
    /// Fixed domain volume when --cube is not given.
    #[arg(long, default_value_t = 1.0)]
    volume: f64,
    /// Write output here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// JSON summary of a single run.
#[derive(Debug, Serialize)]
struct RunSummary<'a> {
    optimizer: &'a str,
    benchmark: &'a str,
    seed: u64,
    n_evals: u64,
    n_samples: u64,
    stop_reason: String,
    best_value: f64,
    best_point: &'a [f64],
    kappa_final: Option<f64>,
}

fn resolve_seed(explicit: Option<u64>) -> Result<u64, CliError> {
    if let Some(seed) = explicit {
        return Ok(seed);
    }
    match std::env::var(SEED_ENV_VAR) {
        Ok(text) => text
            .parse::<u64>()
            .map_err(|_| usage(format!("{SEED_ENV_VAR} must be an unsigned integer, got '{text}'"))),
        Err(_) => Ok(0),
    }
}

fn load_constants(path: &Option<PathBuf>) -> Result<Vec<BenchmarkConstants>, CliError> {
    match path {
        None => Ok(crate::objective::shipped_benchmark_constants().to_vec()),
        Some(p) => load_benchmark_constants(p).map_err(runtime),
    }
}

fn write_output(out: &Option<PathBuf>, content: &str) -> Result<(), CliError> {
    match out {
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(content.as_bytes()).map_err(runtime)
        }
        Some(path) => std::fs::write(path, content).map_err(runtime),
    }
}

fn build_run(args: &RunArgs) -> Result<(BenchmarkFunction, OptimizerSpec, StoppingRule, u64), CliError> {
    let constants = load_constants(&args.benchmarks_file)?;
    let bench = make_benchmark_from(&constants, &args.benchmark).map_err(usage)?;
    let kind = OptimizerKind::parse(&args.optimizer).map_err(usage)?;
    let kappa = args.kappa.unwrap_or_else(|| bench.kappa());
    let mut spec = match kind {
        OptimizerKind::Prs => OptimizerSpec::prs(),
        OptimizerKind::Lipo => OptimizerSpec::lipo(kappa),
        OptimizerKind::LipoPlus => OptimizerSpec::lipo_plus(kappa),
        OptimizerKind::AdaLipo => OptimizerSpec::adalipo(args.p),
        OptimizerKind::AdaLipoPlus => OptimizerSpec::adalipo_plus(),
        OptimizerKind::AdaLipoPlusNs => OptimizerSpec::adalipo_plus_ns(),
    };
    spec.alpha = args.alpha;
    if let Some(mem) = &args.kappa_memory {
        spec.kappa_memory = match mem.as_str() {
            "global" => KappaMemory::Global,
            "last" => KappaMemory::LastRatio,
            n => KappaMemory::Window(n.parse::<usize>().map_err(|_| {
                usage(format!(
                    "--kappa-memory must be 'global', 'last', or a window size, got '{n}'"
                ))
            })?),
        };
    }
    spec.validate().map_err(usage)?;
    let target = match args.theta {
        Some(theta) => Some(target_level(&bench, theta).map_err(usage)?),
        None => None,
    };
    let stop = StoppingRule {
        budget: args.budget,
        sample_cap: args.sample_cap,
        slope_window: Some(args.window),
        slope_threshold: Some(args.slope_threshold),
        target_value: target,
    };
    stop.validate().map_err(usage)?;
    let seed = resolve_seed(args.seed)?;
    Ok((bench, spec, stop, seed))
}

fn execute_run(args: &RunArgs) -> Result<(BenchmarkFunction, RunResult, u64), CliError> {
    let (bench, spec, stop, seed) = build_run(args)?;
    let mut counting = CountingObjective::new(&bench);
    let mut rng = RngStream::new(seed);
    let result = run(&mut counting, &spec, &stop, &mut rng).map_err(runtime)?;
    Ok((bench, result, seed))
}

fn cmd_run(args: &RunArgs) -> Result<(), CliError> {
    let (bench, result, seed) = execute_run(args)?;
    let summary = RunSummary {
        optimizer: OptimizerKind::parse(&args.optimizer).map_err(usage)?.as_str(),
        benchmark: bench.name(),
        seed,
        n_evals: result.n_evals,
        n_samples: result.n_samples,
        stop_reason: result.stop_reason.to_string(),
        best_value: result.best.value,
        best_point: result.best.point.coords(),
        kappa_final: result.kappa_final,
    };
    let mut text = serde_json::to_string_pretty(&summary).map_err(runtime)?;
    text.push('\n');
    write_output(&args.out, &text)
}

fn cmd_trace(args: &RunArgs) -> Result<(), CliError> {
    let (_, result, _) = execute_run(args)?;
    let mut buf = Vec::new();
    result.trace.write_csv(&mut buf).map_err(runtime)?;
    write_output(&args.out, &String::from_utf8(buf).expect("csv is utf-8"))
}

fn cmd_bench(args: &BenchArgs) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| runtime(format!("{}: {e}", args.config.display())))?;
    let spec: CampaignSpec = serde_json::from_str(&text).map_err(usage)?;
    spec.validate().map_err(usage)?;
    let constants = load_constants(&args.benchmarks_file)?;
    let stats = run_campaign(&spec, &constants, args.jobs).map_err(runtime)?;
    print!("{}", stats.render_table());
    if args.out.is_some() {
        let mut buf = Vec::new();
        stats.write_csv(&mut buf).map_err(runtime)?;
        write_output(&args.out, &String::from_utf8(buf).expect("csv is utf-8"))?;
    }
    Ok(())
}

fn cmd_bound(args: &BoundArgs) -> Result<(), CliError> {
    let dims: Vec<u32> = args
        .dims
        .split(',')
        .map(|part| {
            part.trim()
                .parse::<u32>()
                .map_err(|_| usage(format!("--dims must be comma-separated integers, got '{part}'")))
        })
        .collect::<Result<_, _>>()?;
    if dims.is_empty() {
        return Err(usage("--dims must list at least one dimension"));
    }
    if args.ratio <= 0.0 {
        return Err(usage(format!("--ratio must be positive, got {}", args.ratio)));
    }
    let volume = |d: u32| {
        if args.cube {
            2f64.powi(d as i32)
        } else {
            args.volume
        }
    };
    let table = cd_table(&dims, args.ratio, volume).map_err(usage)?;
    let mut text = String::from("d,C_d\n");
    for (d, c) in table {
        // scientific notation, 6 significant digits
        text.push_str(&format!("{d},{c:.5e}\n"));
    }
    write_output(&args.out, &text)
}

/// Parses and dispatches; returns the process exit code.
pub fn main_from_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            // clap prints help/version to stdout with code 0, usage errors
            // to stderr with code 2
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let outcome = match &cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Trace(args) => cmd_trace(args),
        Command::Bench(args) => cmd_bench(args),
        Command::Bound(args) => cmd_bound(args),
    };
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("lipo: {}", e.message());
            e.exit_code()
        }
    }
}
