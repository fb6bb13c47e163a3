use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use serde_json::json;

use ivpb_core::config::load_config;
use ivpb_core::experiment::{run_command, Command};
use ivpb_core::Error;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Subcommand {
    /// Euler–Poisson reference trajectory.
    Euler,
    /// Hilbert expansion orders on the fluid reference.
    Cascade,
    /// Kinetic runs from well-prepared data, one per ε.
    Kinetic,
    /// ε-sweep with the remainder norms and fitted slopes.
    Sweep,
    /// Property suite.
    Verify,
}

impl From<Subcommand> for Command {
    fn from(s: Subcommand) -> Self {
        match s {
            Subcommand::Euler => Command::Euler,
            Subcommand::Cascade => Command::Cascade,
            Subcommand::Kinetic => Command::Kinetic,
            Subcommand::Sweep => Command::Sweep,
            Subcommand::Verify => Command::Verify,
        }
    }
}

/// Runs an ivpb experiment. IVPB_THREADS sets the worker count.
#[derive(Debug, Parser)]
#[command(name = "ivpb", version)]
struct Cli {
    #[arg(value_enum)]
    command: Subcommand,
    /// TOML config, or a manifest.json from an earlier run.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; created if missing.
    #[arg(long)]
    out: PathBuf,
}

const CONFIG_REJECTED: u8 = 2;
const RUNTIME_FAILURE: u8 = 1;

fn fail(code: u8, kind: &str, err: &Error) -> ExitCode {
    let key = match err {
        Error::Config { key, .. } => Some(key.as_str()),
        _ => None,
    };
    eprintln!("{}", json!({ "status": kind, "key": key, "error": err.to_string() }));
    ExitCode::from(code)
}

fn set_threads() -> Result<(), Error> {
    let Ok(raw) = std::env::var("IVPB_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| Error::config("IVPB_THREADS", format!("expected a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::config("IVPB_THREADS", e.to_string()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = set_threads() {
        return fail(CONFIG_REJECTED, "config_rejected", &e);
    }
    let cfg = match load_config(&cli.config) {
        Ok(cfg) => cfg,
        Err(e) => return fail(CONFIG_REJECTED, "config_rejected", &e),
    };
    match run_command(cli.command.into(), &cfg, &cli.out) {
        Ok(outcome) => {
            if let Some(report) = &outcome.verify {
                println!("{}", serde_json::to_string_pretty(report).expect("report serializes"));
            }
            eprintln!(
                "{}: {} artifacts in {} ({:.1} s)",
                outcome.manifest.command,
                outcome.manifest.artifacts.len(),
                cli.out.display(),
                outcome.manifest.wall_time_s
            );
            if outcome.passed {
                ExitCode::SUCCESS
            } else {
                let failures: Vec<_> = outcome.verify.iter().flat_map(|r| r.failures()).collect();
                eprintln!("{}", json!({ "status": "checks_failed", "failures": failures }));
                ExitCode::from(RUNTIME_FAILURE)
            }
        }
        Err(e @ Error::Config { .. }) => fail(CONFIG_REJECTED, "config_rejected", &e),
        Err(e) => fail(RUNTIME_FAILURE, "runtime_failure", &e),
    }
}
