//! `qbayes`: validate experiment documents, run commands, merge reports.

mod commands;
mod config;
mod error;
mod output;
mod report;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use qbayes::Tolerances;
use serde_json::{json, Value};

use crate::commands::{Command, Overrides};
use crate::config::{ExperimentConfig, Resolved};
use crate::error::CliError;
use crate::output::{Artifacts, Format};

#[derive(Parser)]
#[command(name = "qbayes", version, about = "Quantum Bayesian inference experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone, Copy)]
struct TolArgs {
    #[arg(long)]
    tol_herm: Option<f64>,
    #[arg(long)]
    tol_psd: Option<f64>,
    #[arg(long)]
    tol_norm: Option<f64>,
}

impl TolArgs {
    fn tolerances(self) -> Tolerances {
        let d = Tolerances::default();
        Tolerances {
            herm: self.tol_herm.unwrap_or(d.herm),
            psd: self.tol_psd.unwrap_or(d.psd),
            norm: self.tol_norm.unwrap_or(d.norm),
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Check every object of a config and print residuals.
    Validate {
        config: PathBuf,
        #[command(flatten)]
        tol: TolArgs,
    },
    /// Run one command on a config.
    Run {
        config: PathBuf,
        #[arg(value_enum)]
        command: Command,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long, default_value = "qbayes-out")]
        out_dir: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        #[command(flatten)]
        tol: TolArgs,
        #[arg(long, default_value_t = 1)]
        threads: usize,
        /// Also write the posterior states of simulated trajectories.
        #[arg(long)]
        with_states: bool,
    },
    /// Merge the run summaries in a directory into one table.
    Report { run_dir: PathBuf },
}

fn load(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    config::parse(&text)
}

fn validate(path: &Path, tol: TolArgs) -> Result<ExitCode, CliError> {
    let cfg = load(path)?;
    let reports = cfg.validate(&tol.tolerances());
    let mut all = true;
    for r in &reports {
        let pass = r.pass();
        all &= pass;
        println!("{} {}", if pass { "PASS" } else { "FAIL" }, r.object);
        for c in &r.checks {
            println!(
                "    {} {} residual={:.3e} tolerance={:.1e}",
                if c.pass { "ok  " } else { "FAIL" },
                c.check,
                c.residual,
                c.tolerance
            );
        }
        if let Some(e) = &r.error {
            println!("    error {}: {e}", e.name());
        }
    }
    Ok(if all { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

#[allow(clippy::too_many_arguments)]
fn run(
    path: &Path,
    command: Command,
    overrides: Overrides,
    out_dir: &Path,
    format: Format,
    tol: TolArgs,
    threads: usize,
) -> Result<ExitCode, CliError> {
    if threads == 0 {
        return Err(CliError::Usage("--threads must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    let start = Instant::now();
    let resolved = Resolved::new(load(path)?, tol.tolerances())?;
    let mut art = Artifacts::new(out_dir, format)?;
    let (seed, results) = commands::run(command, &resolved, &overrides, &mut art)?;
    let mut summary = json!({
        "command": command.name(),
        "seed": seed,
        "outputs": art.written,
        "results": results,
    });
    let mut persisted = serde_json::to_vec_pretty(&summary)?;
    persisted.push(b'\n');
    fs::write(out_dir.join(format!("{}.summary.json", command.name())), persisted)?;
    summary["elapsed_ms"] = Value::from(start.elapsed().as_millis() as u64);
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Validate { config, tol } => validate(&config, tol),
        Cmd::Run { config, command, seed, steps, alpha, out_dir, format, tol, threads, with_states } => {
            let overrides = Overrides { seed, steps, alpha, with_states };
            run(&config, command, overrides, &out_dir, format, tol, threads)
        }
        Cmd::Report { run_dir } => report::report(&run_dir).map(|table| {
            print!("{table}");
            ExitCode::SUCCESS
        }),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        ExitCode::from(e.exit_code() as u8)
    })
}
