use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};

use picard_swarm::dynamics::{osculating_period, DynamicsError, StateVector};
use picard_swarm::io::{self, EphemerisFile, IoError, OracleSummary, RunConfigFile, RunReport};
use picard_swarm::oracle::{oracle_discrepancy, OracleConfig, OracleError};
use picard_swarm::propagator::{PropagationError, PropagationResult, StartMode};
use picard_swarm::runner::{self, BenchmarkOptions, ModeSelector, RunError, RunMode, RunRequest};
use picard_swarm::selftest::{run_selftest, SelftestOptions};
use picard_swarm::{augmentation::AugmentationError, cheb::SolveError, scenario};

const EXIT_INTERNAL: u8 = 1;
const EXIT_PARSE: u8 = 2;
const EXIT_COVERAGE: u8 = 3;
const EXIT_NOT_CONVERGED: u8 = 4;

#[derive(Parser)]
#[command(name = "picard-swarm", version, about = "Batch Picard-Chebyshev orbit propagation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Propagate a batch of initial conditions and write node samples.
    Propagate(PropagateArgs),
    /// Time execution modes across thread counts.
    Benchmark(BenchmarkArgs),
    /// Run the embedded verification suite.
    Selftest(SelftestArgs),
    /// Write a synthetic heliocentric batch and its ephemeris file.
    Generate(GenerateArgs),
}

#[derive(Args, Clone)]
struct InputArgs {
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Initial conditions CSV.
    #[arg(long, required_unless_present = "synthetic")]
    input: Option<PathBuf>,
    /// Central body and perturbers JSON.
    #[arg(long, required_unless_present = "synthetic")]
    ephemeris: Option<PathBuf>,
    /// Use this many synthetic heliocentric trajectories instead of --input/--ephemeris.
    #[arg(long, conflicts_with_all = ["input", "ephemeris"])]
    synthetic: Option<usize>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Propagation span in seconds (negative runs backward).
    #[arg(long, allow_hyphen_values = true)]
    duration: Option<f64>,
    #[arg(long)]
    groups: Option<usize>,
    #[arg(long)]
    nodes: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long = "max-iter")]
    max_iter: Option<usize>,
    #[arg(long, value_parser = parse_start)]
    start: Option<StartMode>,
    /// Abort the solve after this many seconds.
    #[arg(long)]
    timeout: Option<f64>,
}

#[derive(Args)]
struct PropagateArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, value_parser = parse_mode)]
    mode: Option<RunMode>,
    /// Worker count.
    #[arg(long, env = "PICARD_SWARM_THREADS")]
    threads: Option<usize>,
    /// Append each trajectory's discrepancy against the reference integrator.
    #[arg(long = "oracle-check")]
    oracle_check: bool,
    /// Also write the per-iteration error history.
    #[arg(long = "error-history")]
    error_history: bool,
}

#[derive(Args)]
struct BenchmarkArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Comma-separated worker counts.
    #[arg(long, value_delimiter = ',', env = "PICARD_SWARM_THREADS")]
    threads: Vec<usize>,
    /// Comma-separated modes; `augmented` means sequential at one thread, data-parallel above.
    #[arg(long, value_delimiter = ',')]
    modes: Vec<String>,
    #[arg(long)]
    repeat: Option<usize>,
}

#[derive(Args)]
struct SelftestArgs {
    #[arg(long, default_value_t = 64)]
    batch: usize,
    #[arg(long, default_value_t = 200)]
    nodes: usize,
    /// Corrupt the operators by this amount (negative control).
    #[arg(long = "perturb-matrices", hide = true)]
    perturb_matrices: Option<f64>,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, default_value_t = 64)]
    count: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn parse_mode(s: &str) -> Result<RunMode, String> {
    s.parse()
}

fn parse_start(s: &str) -> Result<StartMode, String> {
    match s.to_ascii_lowercase().as_str() {
        "warm" => Ok(StartMode::Warm),
        "cold" => Ok(StartMode::Cold),
        _ => Err(format!("unknown start mode '{s}' (warm|cold)")),
    }
}

struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl Failure {
    fn new(code: u8, error: impl Into<anyhow::Error>) -> Self {
        Self {
            code,
            error: error.into(),
        }
    }
}

fn io_failure(e: IoError) -> Failure {
    Failure::new(EXIT_PARSE, e)
}

fn write_failure(e: IoError) -> Failure {
    Failure::new(EXIT_INTERNAL, e)
}

fn propagation_code(e: &PropagationError) -> u8 {
    match e {
        PropagationError::Config(_) | PropagationError::Period(_) | PropagationError::Cheb(_) => EXIT_PARSE,
        PropagationError::Ephemeris { .. } => EXIT_COVERAGE,
        PropagationError::NotConverged { .. } | PropagationError::Timeout { .. } => EXIT_NOT_CONVERGED,
        PropagationError::Augmentation { source, .. } => match source {
            AugmentationError::InvalidPlan(_) => EXIT_PARSE,
            AugmentationError::Solve {
                source: SolveError::Divergence { .. } | SolveError::Timeout { .. },
                ..
            } => EXIT_NOT_CONVERGED,
            AugmentationError::Solve {
                source: SolveError::Dynamics { source: DynamicsError::Ephemeris(_), .. },
                ..
            } => EXIT_COVERAGE,
            _ => EXIT_INTERNAL,
        },
    }
}

fn run_failure(e: RunError) -> Failure {
    let code = match &e {
        RunError::Request(_) => EXIT_PARSE,
        RunError::Pool(_) => EXIT_INTERNAL,
        RunError::Timeout(_) => EXIT_NOT_CONVERGED,
        RunError::Propagation(p) => propagation_code(p),
    };
    Failure::new(code, e)
}

/// Everything a run needs, resolved from files, synthetic generation and flags.
struct Setup {
    file: RunConfigFile,
    ephemeris: EphemerisFile,
    states: Vec<StateVector>,
    duration: f64,
    timeout: Option<Duration>,
}

fn load_setup(args: &InputArgs) -> Result<Setup, Failure> {
    let mut file = match &args.config {
        Some(p) => RunConfigFile::from_reader(io::open(p).map_err(io_failure)?)
            .with_context(|| format!("reading {}", p.display()))
            .map_err(|e| Failure::new(EXIT_PARSE, e))?,
        None => RunConfigFile::default(),
    };
    let (states, ephemeris) = match args.synthetic {
        Some(n) => {
            if file.duration_s.is_none() && file.duration_periods.is_none() {
                file.duration_periods = Some(scenario::REFERENCE_ARC_PERIODS);
            }
            (
                scenario::synthetic_batch(n, args.seed),
                EphemerisFile::new(scenario::MU_SUN, scenario::inner_planets()),
            )
        }
        None => {
            let input = args.input.as_deref().expect("required by clap");
            let eph = args.ephemeris.as_deref().expect("required by clap");
            let states = io::read_batch_csv(io::open(input).map_err(io_failure)?)
                .map_err(|e| Failure::new(EXIT_PARSE, anyhow!("{}: {e}", input.display())))?;
            let ephemeris = EphemerisFile::from_reader(io::open(eph).map_err(io_failure)?)
                .map_err(|e| Failure::new(EXIT_PARSE, anyhow!("{}: {e}", eph.display())))?;
            (states, ephemeris)
        }
    };
    io::require_shared_epoch(&states).map_err(io_failure)?;

    if let Some(g) = args.groups {
        file.groups = Some(g);
        file.group_sizes = None;
    }
    if let Some(n) = args.nodes {
        file.n_nodes = n;
    }
    if let Some(t) = args.tol {
        file.tolerance = t;
    }
    if let Some(m) = args.max_iter {
        file.max_iterations = m;
    }
    if let Some(s) = args.start {
        file.start_mode = s;
    }
    if let Some(t) = args.timeout {
        file.timeout_s = Some(t);
    }
    let duration = match (args.duration, file.duration_s, file.duration_periods) {
        (Some(d), _, _) | (None, Some(d), _) => d,
        (None, None, Some(periods)) => {
            let rep = states.get(file.representative).ok_or_else(|| {
                Failure::new(EXIT_PARSE, anyhow!("representative index {} outside batch", file.representative))
            })?;
            periods
                * osculating_period(rep, ephemeris.central_mu)
                    .map_err(|e| Failure::new(EXIT_PARSE, anyhow!("duration_periods needs a bound orbit: {e}")))?
        }
        (None, None, None) => {
            return Err(Failure::new(
                EXIT_PARSE,
                anyhow!("no propagation span: pass --duration or set duration_s/duration_periods"),
            ))
        }
    };
    let timeout = match file.timeout_s {
        Some(t) if !(t >= 0.0 && t.is_finite()) => {
            return Err(Failure::new(EXIT_PARSE, anyhow!("timeout must be non-negative, got {t}")))
        }
        t => t.map(Duration::from_secs_f64),
    };
    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))
        .map_err(|e| Failure::new(EXIT_INTERNAL, e))?;
    Ok(Setup {
        file,
        ephemeris,
        states,
        duration,
        timeout,
    })
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn out_path(dir: &Path, configured: Option<&String>, default: &str) -> PathBuf {
    dir.join(configured.map_or(default, String::as_str))
}

fn oracle_check(result: &PropagationResult, setup: &Setup) -> Result<OracleSummary, Failure> {
    let dynamics = setup.file.force_model(&setup.ephemeris);
    let cfg = OracleConfig::default();
    let mut per_trajectory = Vec::with_capacity(result.trajectories.len());
    for (i, traj) in result.trajectories.iter().enumerate() {
        let d = oracle_discrepancy(&traj.to_states(), &dynamics, &cfg).map_err(|e| {
            let code = match e {
                OracleError::Dynamics(DynamicsError::Ephemeris(_)) => EXIT_COVERAGE,
                _ => EXIT_INTERNAL,
            };
            Failure::new(code, anyhow!("oracle check of trajectory {i}: {e}"))
        })?;
        per_trajectory.push(d.max());
    }
    Ok(OracleSummary {
        max_discrepancy: per_trajectory.iter().copied().fold(0.0, f64::max),
        per_trajectory,
    })
}

fn write_outputs(
    args: &PropagateArgs,
    setup: &Setup,
    result: &PropagationResult,
    report: &RunReport,
) -> Result<(), Failure> {
    let out = &args.input.out;
    let outputs = &setup.file.outputs;
    let disc = report.oracle.as_ref().map(|o| o.per_trajectory.as_slice());
    let results = out_path(out, outputs.results.as_ref(), "results.csv");
    io::write_results_csv(&result.trajectories, disc, io::create(&results).map_err(write_failure)?)
        .map_err(write_failure)?;
    let report_path = out_path(out, outputs.report.as_ref(), "report.json");
    report
        .to_writer(io::create(&report_path).map_err(write_failure)?)
        .map_err(write_failure)?;
    if args.error_history || outputs.error_history.is_some() {
        let path = out_path(out, outputs.error_history.as_ref(), "error_history.csv");
        io::write_error_history_csv(&result.reports, io::create(&path).map_err(write_failure)?)
            .map_err(write_failure)?;
    }
    log::info!("wrote {} and {}", results.display(), report_path.display());
    Ok(())
}

fn make_report(setup: &Setup, mode: RunMode, workers: usize, wall: Option<f64>, result: &PropagationResult) -> RunReport {
    RunReport {
        mode,
        workers,
        groups: result.grouping.n_groups(),
        group_sizes: result.grouping.group_sizes().to_vec(),
        n_trajectories: setup.states.len(),
        n_nodes: setup.file.n_nodes,
        tolerance: setup.file.tolerance,
        start_mode: setup.file.start_mode,
        segment_boundaries: result.plan.boundaries.clone(),
        wall_time_s: wall,
        max_iterations: result.max_iterations(),
        group_reports: result.reports.clone(),
        oracle: None,
    }
}

fn cmd_propagate(args: PropagateArgs) -> Result<(), Failure> {
    let setup = load_setup(&args.input)?;
    let mode = args.mode.unwrap_or(setup.file.mode);
    let workers = args.threads.or(setup.file.workers).unwrap_or_else(default_workers);
    let base = setup.file.propagation_config(&setup.ephemeris);
    let request = RunRequest {
        mode,
        workers,
        groups: setup.file.groups,
        timeout: setup.timeout,
    };
    let outcome = runner::run_batch(&setup.states, setup.duration, &base, &request);
    match outcome {
        Ok(outcome) => {
            let mut report = make_report(&setup, mode, workers, Some(outcome.wall_time_s), &outcome.result);
            if args.oracle_check {
                report.oracle = Some(oracle_check(&outcome.result, &setup)?);
            }
            write_outputs(&args, &setup, &outcome.result, &report)?;
            println!(
                "propagated {} trajectories in {:.3} s ({} group(s), max {} iterations){}",
                setup.states.len(),
                outcome.wall_time_s,
                report.groups,
                report.max_iterations,
                report
                    .oracle
                    .as_ref()
                    .map(|o| format!(", oracle discrepancy {:.3e}", o.max_discrepancy))
                    .unwrap_or_default()
            );
            Ok(())
        }
        Err(RunError::Propagation(PropagationError::NotConverged {
            segment,
            group,
            iterations,
            final_error,
            partial,
        })) => {
            let report = make_report(&setup, mode, workers, None, &partial);
            write_outputs(&args, &setup, &partial, &report)?;
            Err(Failure::new(
                EXIT_NOT_CONVERGED,
                anyhow!(
                    "segment {segment}, group {group} did not converge in {iterations} iterations \
                     (error {final_error:e}); partial results written"
                ),
            ))
        }
        Err(e) => Err(run_failure(e)),
    }
}

fn cmd_benchmark(args: BenchmarkArgs) -> Result<(), Failure> {
    let setup = load_setup(&args.input)?;
    let section = &setup.file.benchmark;
    let threads = if args.threads.is_empty() {
        section.threads.clone()
    } else {
        args.threads
    };
    let mode_names = if args.modes.is_empty() {
        section.modes.clone()
    } else {
        args.modes
    };
    let modes = mode_names
        .iter()
        .map(|m| m.parse::<ModeSelector>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| Failure::new(EXIT_PARSE, anyhow!(e)))?;
    if threads.contains(&0) {
        return Err(Failure::new(EXIT_PARSE, anyhow!("thread counts must be positive")));
    }
    let options = BenchmarkOptions {
        thread_counts: threads,
        modes,
        repeat: args.repeat.unwrap_or(section.repeat),
        groups: setup.file.groups,
        timeout: setup.timeout,
    };
    let base = setup.file.propagation_config(&setup.ephemeris);
    let report = runner::run_benchmark(&setup.states, setup.duration, &base, &options).map_err(run_failure)?;
    let rows = io::benchmark_rows(&report);
    let out = &args.input.out;
    let csv_path = out_path(out, setup.file.outputs.benchmark.as_ref(), "benchmark.csv");
    io::write_benchmark_csv(&rows, io::create(&csv_path).map_err(write_failure)?).map_err(write_failure)?;
    let json_path = out.join("benchmark.json");
    io::write_json(&report, io::create(&json_path).map_err(write_failure)?).map_err(write_failure)?;
    print!("{}", io::benchmark_table(&rows));
    println!(
        "{} trajectories, {} nodes, median of {} run(s) on {} ({} hardware threads)",
        report.n_trajectories, report.n_nodes, report.repeat, report.machine.arch, report.machine.available_parallelism
    );
    Ok(())
}

fn cmd_selftest(args: SelftestArgs) -> Result<(), Failure> {
    let opts = SelftestOptions {
        perturb_matrices: args.perturb_matrices,
        batch_size: args.batch,
        n_nodes: args.nodes,
        ..Default::default()
    };
    let outcomes = run_selftest(&opts);
    for p in &outcomes {
        println!("{} {:<22} {}", if p.passed { "PASS" } else { "FAIL" }, p.name, p.detail);
    }
    let failed = outcomes.iter().filter(|p| !p.passed).count();
    if failed > 0 {
        return Err(Failure::new(EXIT_INTERNAL, anyhow!("{failed} of {} properties failed", outcomes.len())));
    }
    Ok(())
}

fn cmd_generate(args: GenerateArgs) -> Result<(), Failure> {
    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))
        .map_err(|e| Failure::new(EXIT_INTERNAL, e))?;
    let states = scenario::synthetic_batch(args.count, args.seed);
    let ics = args.out.join("ics.csv");
    io::write_batch_csv(&states, io::create(&ics).map_err(write_failure)?).map_err(write_failure)?;
    let sys = args.out.join("sys.json");
    EphemerisFile::new(scenario::MU_SUN, scenario::inner_planets())
        .to_writer(io::create(&sys).map_err(write_failure)?)
        .map_err(write_failure)?;
    let run = args.out.join("run.json");
    let cfg = RunConfigFile {
        duration_periods: Some(scenario::REFERENCE_ARC_PERIODS),
        ..Default::default()
    };
    cfg.to_writer(io::create(&run).map_err(write_failure)?).map_err(write_failure)?;
    println!("wrote {}, {} and {}", ics.display(), sys.display(), run.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Propagate(a) => cmd_propagate(a),
        Command::Benchmark(a) => cmd_benchmark(a),
        Command::Selftest(a) => cmd_selftest(a),
        Command::Generate(a) => cmd_generate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
