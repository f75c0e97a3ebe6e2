//! `emergent verify|reduce|propagate|anomaly <file>`.
//!
//! Exit status: 0 when every check passes, 1 when a check fails, 2 on a usage
//! or parse error.

mod commands;
mod report;
mod sysfile;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use commands::Options;
use sysfile::{SystemFile, UsageError};

#[derive(Parser)]
#[command(name = "emergent", version, about = "Reduce 't Hooft systems and check the emergent quantum systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Seed for every sampled check.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Print the report as JSON.
    #[arg(long, global = true)]
    json: bool,
    /// Output path: the CSV for `propagate`, the JSON report otherwise.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Charge conservation, splitting identities, canonicity and gauge checks.
    Verify { file: PathBuf },
    /// Run the reduction and print the reduced Lagrangian and Hamiltonian.
    Reduce { file: PathBuf },
    /// Lattice propagator or partition function against its closed form.
    Propagate { file: PathBuf },
    /// Inverse-Jacobian coefficients and sliced-expansion checks.
    Anomaly { file: PathBuf },
}

fn limit_threads() -> Result<(), UsageError> {
    let Ok(v) = std::env::var("EQ_THREADS") else { return Ok(()) };
    let n: usize = v.trim().parse().map_err(|_| UsageError(format!("EQ_THREADS={v} is not a thread count")))?;
    // Ignore a pool that already exists; the cap is advisory.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    limit_threads()?;
    let start = Instant::now();
    let (file, cmd): (&PathBuf, fn(&SystemFile, &Options) -> Result<report::RunReport>) = match &cli.command {
        Command::Verify { file } => (file, commands::verify),
        Command::Reduce { file } => (file, commands::reduce),
        Command::Propagate { file } => (file, commands::propagate),
        Command::Anomaly { file } => (file, commands::anomaly),
    };
    let sys = SystemFile::load(file)?;
    let is_propagate = matches!(cli.command, Command::Propagate { .. });
    let opts = Options { seed: cli.seed, out: if is_propagate { cli.out.clone() } else { None } };
    let mut report = cmd(&sys, &opts)?;
    report.finish(start.elapsed());
    let json = serde_json::to_string_pretty(&report)?;
    if cli.json {
        println!("{json}");
    } else {
        print!("{}", report.render());
    }
    if let (Some(out), false) = (&cli.out, is_propagate) {
        std::fs::write(out, &json).with_context(|| format!("writing {}", out.display()))?;
    }
    Ok(report.passed())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
