//! `freejump`: run hierarchy, simulation and property-check experiments from a
//! TOML config.
//!
//! Exit codes: 0 success, 1 I/O, 2 config, 3 divergence, 4 comparison verdict,
//! 5 failed checks.

mod commands;
mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

use commands::{Failure, Run, Timing};
use config::ExperimentConfig;

#[derive(Parser)]
#[command(name = "freejump", version, about = "Free jump dynamics: hierarchy solver, simulator and checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the correlation hierarchy and compare with exact propagation.
    Evolve(RunArgs),
    /// Run the particle ensemble and estimate correlation functions.
    Simulate(RunArgs),
    /// Run the property batteries and write one row per check.
    Checks(RunArgs),
    /// Tabulate the discretized jump kernel.
    KernelMake(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides output.path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for every seeded section; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long, env = "FREEJUMP_THREADS")]
    threads: Option<usize>,
    /// Suppress progress messages.
    #[arg(long)]
    quiet: bool,
}

#[derive(Serialize)]
struct OutputEntry {
    path: String,
    bytes: u64,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    config_path: String,
    config_sha256: Option<String>,
    threads: usize,
    status: &'static str,
    exit_code: u8,
    error: Option<String>,
    timings: Vec<Timing>,
    outputs: Vec<OutputEntry>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn inventory(dir: &Path, names: &[String]) -> Vec<OutputEntry> {
    names
        .iter()
        .filter_map(|name| {
            let bytes = fs::read(dir.join(name)).ok()?;
            Some(OutputEntry {
                path: name.clone(),
                bytes: bytes.len() as u64,
                sha256: sha256_hex(&bytes),
            })
        })
        .collect()
}

type Handler = fn(&ExperimentConfig, &mut Run) -> Result<(), Failure>;

/// Loads the config, writes the resolved echo and runs the command.
fn execute(args: &RunArgs, handler: Handler, run: &mut Run, config_hash: &mut Option<String>) -> Result<(), Failure> {
    let text = fs::read_to_string(&args.config)
        .map_err(|e| Failure::Config(format!("cannot read config {}: {e}", args.config.display())))?;
    let mut cfg = ExperimentConfig::parse(&text)?;
    if let Some(seed) = args.seed {
        cfg.override_seed(seed);
    }
    cfg.output.path = run.out.clone();
    let resolved = cfg.to_toml();
    *config_hash = Some(sha256_hex(resolved.as_bytes()));
    run.write("config.resolved.toml", &resolved)?;
    handler(&cfg, run)
}

/// Output directory from `--out`, else the config's output.path, else `out`.
fn output_dir(args: &RunArgs) -> PathBuf {
    if let Some(out) = &args.out {
        return out.clone();
    }
    fs::read_to_string(&args.config)
        .ok()
        .and_then(|text| ExperimentConfig::parse(&text).ok())
        .map(|cfg| cfg.output.path)
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, args, handler): (&'static str, &RunArgs, Handler) = match &cli.command {
        Command::Evolve(a) => ("evolve", a, commands::evolve),
        Command::Simulate(a) => ("simulate", a, commands::simulate),
        Command::Checks(a) => ("checks", a, commands::checks),
        Command::KernelMake(a) => ("kernel-make", a, commands::kernel_make),
    };

    let out = output_dir(args);
    if let Err(e) = fs::create_dir_all(&out) {
        eprintln!("error: cannot create output directory {}: {e}", out.display());
        return ExitCode::from(1);
    }
    let mut run = Run::new(out.clone(), args.quiet);
    let mut config_hash = None;
    let start = Instant::now();

    let result = match args.threads {
        Some(0) => Err(Failure::Config("--threads must be at least 1".into())),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| execute(args, handler, &mut run, &mut config_hash)),
            Err(e) => Err(Failure::Io(format!("cannot start thread pool: {e}"))),
        },
        None => execute(args, handler, &mut run, &mut config_hash),
    };
    run.timings.push(Timing {
        stage: "total".into(),
        seconds: start.elapsed().as_secs_f64(),
    });

    let exit_code = result.as_ref().err().map_or(0, Failure::exit_code);
    if let Err(e) = &result {
        eprintln!("error: {}", e.message());
    }
    let manifest = Manifest {
        tool: "freejump",
        version: env!("CARGO_PKG_VERSION"),
        command: name,
        config_path: args.config.display().to_string(),
        config_sha256: config_hash,
        threads: args.threads.unwrap_or_else(rayon::current_num_threads),
        status: if result.is_ok() { "ok" } else { "failed" },
        exit_code,
        error: result.as_ref().err().map(|e| e.message().to_string()),
        timings: run.timings.clone(),
        outputs: inventory(&out, &run.outputs),
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    if let Err(e) = fs::write(out.join("manifest.json"), text + "\n") {
        eprintln!("error: cannot write manifest: {e}");
        return ExitCode::from(if exit_code == 0 { 1 } else { exit_code });
    }
    if !args.quiet && result.is_ok() {
        eprintln!("{name}: done, outputs in {}", out.display());
    }
    ExitCode::from(exit_code)
}
