//! Argument parsing and the end-to-end run of one subcommand.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};

use crate::artifacts::{write_all, RunManifest};
use crate::config::{resolve, ConfigFile, Engine, ExperimentId, Overrides};
use crate::error::{CliError, CliResult, EXIT_OK};
use crate::experiments;
use crate::report::emit_report;
use crate::runner::Runner;

/// Name of the progress file kept in the output directory until a run
/// completes.
pub const CHECKPOINT_FILE: &str = ".checkpoint.jsonl";

#[derive(Debug, Parser)]
#[command(name = "spinflux", version, about = "Seeded transfer, GHZ and tomography experiments on engineered qubit chains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Information-flux tables and the chain/XY-chain equivalence check.
    FluxDemo(RunArgs),
    /// Closed-system transfer fidelity curve.
    TransferIdeal(RunArgs),
    /// Disorder-averaged transfer and the classical-threshold scan.
    TransferDisorder(RunArgs),
    /// Disorder plus damping/dephasing, both rate assignments.
    TransferNoise(RunArgs),
    /// Fidelity surface over dephasing and damping rates.
    #[command(name = "sweep-2d")]
    Sweep2d(RunArgs),
    /// Damping-rate cut under both engines.
    SweepGammaCut(RunArgs),
    /// Collective-dephasing strength scan.
    CollectiveScan(RunArgs),
    /// GHZ generation, ideal and noisy.
    Ghz(RunArgs),
    /// Process tomography of the transfer channel.
    QptReport(RunArgs),
    /// Tabulate headline numbers from manifests (files or output directories).
    Report { paths: Vec<PathBuf> },
}

#[derive(Debug, Args)]
struct RunArgs {
    /// JSON file with any subset of the configuration fields.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Master seed (overrides the config file).
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    /// Worker threads (default: available cores).
    #[arg(long, value_name = "INT")]
    workers: Option<usize>,
    /// Output directory (default: results/<experiment>).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    engine: Option<Engine>,
    /// Continue an interrupted run from its checkpoint.
    #[arg(long, value_name = "TOKEN")]
    resume: Option<String>,
    /// Stop after computing this many work units (testing aid).
    #[arg(long, hide = true, value_name = "N")]
    stop_after: Option<usize>,
}

/// Parse `args` (including the program name), run, and return the exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let outcome = match cli.command {
        Command::Report { paths } => emit_report(&paths).map(|table| print!("{table}")),
        Command::FluxDemo(a) => execute(ExperimentId::FluxDemo, a),
        Command::TransferIdeal(a) => execute(ExperimentId::TransferIdeal, a),
        Command::TransferDisorder(a) => execute(ExperimentId::TransferDisorder, a),
        Command::TransferNoise(a) => execute(ExperimentId::TransferNoise, a),
        Command::Sweep2d(a) => execute(ExperimentId::Sweep2d, a),
        Command::SweepGammaCut(a) => execute(ExperimentId::SweepGammaCut, a),
        Command::CollectiveScan(a) => execute(ExperimentId::CollectiveScan, a),
        Command::Ghz(a) => execute(ExperimentId::Ghz, a),
        Command::QptReport(a) => execute(ExperimentId::QptReport, a),
    };
    match outcome {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn main_entry() -> i32 {
    run_cli(std::env::args_os())
}

fn execute(experiment: ExperimentId, args: RunArgs) -> CliResult<()> {
    let file = args.config.as_deref().map(ConfigFile::load).transpose()?;
    let flags = Overrides {
        seed: args.seed,
        out: args.out,
        engine: args.engine,
    };
    let cfg = resolve(experiment, file, &flags)?;
    let workers = match args.workers {
        Some(0) => return Err(CliError::Config("--workers must be at least 1".into())),
        Some(w) => w,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    let token = cfg.resume_token();
    if let Some(t) = &args.resume {
        if *t != token {
            return Err(CliError::Config(format!(
                "resume token {t} does not match this configuration (expected {token})"
            )));
        }
    }
    std::fs::create_dir_all(&cfg.out).map_err(|e| CliError::io(&cfg.out, e))?;
    let checkpoint = cfg.out.join(CHECKPOINT_FILE);
    let mut runner = Runner::with_checkpoint(&checkpoint, &token, args.resume.is_some(), args.stop_after)?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Resource(format!("cannot start {workers} worker threads: {e}")))?;
    let started_unix_s = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0.0, |d| d.as_secs_f64());
    let clock = Instant::now();
    let art = pool.install(|| experiments::run(&cfg, &mut runner))?;
    let resumed_units = runner.restored();
    runner.finish()?;

    let manifest = RunManifest {
        experiment: experiment.name().into(),
        config_digest: cfg.digest(),
        resume_token: token,
        rng_algorithm: spinflux::seeds::RNG_ALGORITHM.into(),
        master_seed: cfg.seed,
        software_version: env!("CARGO_PKG_VERSION").into(),
        workers,
        started_unix_s,
        wall_clock_s: clock.elapsed().as_secs_f64(),
        resumed_units,
        outputs: Default::default(),
        headlines: art.headlines.clone(),
        runs: art.runs.clone(),
        config: cfg.clone(),
    };
    let path = write_all(&cfg.out, &art, manifest)?;
    for line in &art.summary {
        println!("{line}");
    }
    println!();
    print!("{}", crate::report::headline_table(experiment.name(), &art.headlines));
    println!("wrote {}", display_dir(&path));
    Ok(())
}

fn display_dir(manifest: &Path) -> String {
    manifest.parent().unwrap_or(manifest).display().to_string()
}
