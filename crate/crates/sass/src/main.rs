use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use sass::exit;
use sass::metrics_io::{curve_csv, metrics_csv, metrics_json};
use sass::oracle::{run_suite, SUITES};
use sass::scenario_file::{load_scenario, LoadError};
use sass::sweep::{parse_seed_range, sweep};
use sass::trace_io::{read_trace, write_trace, TraceError};
use sass::TRACE_DIR_ENV;
use sass_core::learning::adapt_loop;
use sass_core::metrics::metrics_from_trace;
use sass_core::mission::{run_with, RunOptions};
use sass_core::scenario::Scenario;

#[derive(Parser)]
#[command(name = "sass", version, about = "Run, sweep, replay and verify swarm scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one seed and report its metrics.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        seed: u64,
        /// Trace output path (default: $SASS_TRACE_DIR/<name>-<seed>.trace when set).
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Metrics output path; `.csv` writes CSV, anything else JSON.
        #[arg(long)]
        metrics: Option<PathBuf>,
    },
    /// Run an inclusive seed range and print per-seed CSV plus the aggregate.
    Sweep {
        #[arg(long)]
        scenario: PathBuf,
        /// Inclusive range `A..B`.
        #[arg(long)]
        seeds: String,
    },
    /// Render a trace as per-tick ASCII frames.
    Replay {
        #[arg(long)]
        trace: PathBuf,
    },
    /// Run the adaptive learning loop and write its curve as CSV.
    Learn {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        episodes: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        curve: PathBuf,
    },
    /// Run a brute-force verification suite.
    Oracle {
        /// One of assignment, paths, games, divergence, all.
        #[arg(long)]
        suite: String,
    },
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Failure { code, message: message.into() }
    }
}

impl From<LoadError> for Failure {
    fn from(e: LoadError) -> Self {
        let code = match e {
            LoadError::Io { .. } => exit::FAILURE,
            LoadError::Parse { .. } | LoadError::Validation { .. } => exit::VALIDATION,
        };
        Failure::new(code, e.to_string())
    }
}

impl From<TraceError> for Failure {
    fn from(e: TraceError) -> Self {
        let code = match e {
            TraceError::Io { .. } => exit::FAILURE,
            _ => exit::INTEGRITY,
        };
        Failure::new(code, e.to_string())
    }
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Failure::new(exit::FAILURE, format!("cannot create {}: {e}", dir.display())))?;
    }
    std::fs::write(path, contents).map_err(|e| Failure::new(exit::FAILURE, format!("cannot write {}: {e}", path.display())))
}

fn default_trace_path(sc: &Scenario, seed: u64) -> Option<PathBuf> {
    let dir = std::env::var_os(TRACE_DIR_ENV)?;
    Some(PathBuf::from(dir).join(format!("{}-{seed}.trace", sc.name)))
}

fn run(scenario: &Path, seed: u64, trace: Option<PathBuf>, metrics: Option<PathBuf>) -> Result<(), Failure> {
    let (sc, hash) = load_scenario(scenario)?;
    let report = run_with(&sc, seed, &RunOptions { scenario_hash: hash, ..RunOptions::default() })
        .map_err(|e| Failure::new(exit::FAILURE, e.to_string()))?;
    if metrics_from_trace(&report.trace) != report.metrics {
        return Err(Failure::new(exit::INTEGRITY, "metrics recomputed from the trace differ from the run"));
    }
    if let Some(path) = trace.or_else(|| default_trace_path(&sc, seed)) {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| Failure::new(exit::FAILURE, format!("cannot create {}: {e}", dir.display())))?;
        }
        write_trace(&path, &report.trace)?;
        eprintln!("trace written to {}", path.display());
    }
    let json = metrics_json(seed, &report.metrics);
    match metrics {
        Some(path) if path.extension().is_some_and(|e| e == "csv") => {
            write_file(&path, metrics_csv(&[(seed, report.metrics.clone())]).as_bytes())?
        }
        Some(path) => write_file(&path, format!("{json}\n").as_bytes())?,
        None => {}
    }
    println!("{json}");
    Ok(())
}

fn run_sweep(scenario: &Path, seeds: &str) -> Result<(), Failure> {
    let seeds = parse_seed_range(seeds).ok_or_else(|| Failure::new(exit::USAGE, format!("bad seed range `{seeds}`; expected A..B with A <= B")))?;
    let (sc, hash) = load_scenario(scenario)?;
    let result = sweep(&sc, hash, &seeds).map_err(|e| Failure::new(exit::FAILURE, e.to_string()))?;
    print!("{}", metrics_csv(&result.rows));
    let agg = serde_json::to_string(&result.aggregate).expect("aggregate serializes");
    eprintln!("aggregate: {agg}");
    Ok(())
}

fn learn(scenario: &Path, episodes: usize, seed: u64, curve: &Path) -> Result<(), Failure> {
    let (sc, _) = load_scenario(scenario)?;
    let out = adapt_loop(&sc, episodes, seed).map_err(|e| Failure::new(exit::VALIDATION, e.to_string()))?;
    write_file(curve, curve_csv(&out.curve).as_bytes())?;
    let wins = out.curve.iter().filter(|p| p.success).count();
    println!("{episodes} episodes, {wins} successful, curve written to {}", curve.display());
    Ok(())
}

fn oracle(suite: &str) -> Result<(), Failure> {
    let checks = run_suite(suite, 0)
        .ok_or_else(|| Failure::new(exit::USAGE, format!("unknown suite `{suite}`; expected one of {}, all", SUITES.join(", "))))?;
    let mut failed = 0;
    for c in &checks {
        println!("{} {} ({} cases)", if c.passed() { "PASS" } else { "FAIL" }, c.name, c.cases);
        for f in &c.failures {
            println!("    {f}");
        }
        failed += usize::from(!c.passed());
    }
    if failed > 0 {
        return Err(Failure::new(exit::FAILURE, format!("{failed} oracle check(s) failed")));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { exit::USAGE } else { exit::OK });
        }
    };
    let result = match cli.command {
        Command::Run { scenario, seed, trace, metrics } => run(&scenario, seed, trace, metrics),
        Command::Sweep { scenario, seeds } => run_sweep(&scenario, &seeds),
        Command::Replay { trace } => read_trace(&trace).map(|t| print!("{}", sass::replay::render(&t))).map_err(Failure::from),
        Command::Learn { scenario, episodes, seed, curve } => learn(&scenario, episodes, seed, &curve),
        Command::Oracle { suite } => oracle(&suite),
    };
    match result {
        Ok(()) => ExitCode::from(exit::OK),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
