use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use volpriv::harness::{lp_dump, run_bound_audit, run_timeseries, run_tradeoff};
use volpriv::ExperimentConfig;

#[derive(Parser)]
#[command(version, about = "Seeded privacy experiments on linear systems; writes CSV")]
struct Cli {
    /// Experiment config (TOML). Defaults apply when omitted.
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,
    /// Override the config's output directory.
    #[arg(short, long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Per-step attack time series for the configured mechanism.
    Simulate,
    /// Privacy-utility sweep over all mechanisms and budgets.
    Tradeoff,
    /// Bound and soundness audit with a pass/fail summary.
    Audit,
    /// Print one release LP as text.
    LpDump,
}

fn run(cli: Cli) -> volpriv::Result<bool> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(out) = cli.out {
        cfg.output_dir = out;
    }
    let dir = cfg.output_dir.clone();
    match cli.cmd {
        Cmd::Simulate => {
            let path = dir.join("timeseries.csv");
            run_timeseries(&cfg)?.write(&path)?;
            eprintln!("wrote {}", path.display());
        }
        Cmd::Tradeoff => {
            let path = dir.join("tradeoff.csv");
            run_tradeoff(&cfg)?.write(&path)?;
            eprintln!("wrote {}", path.display());
        }
        Cmd::Audit => {
            let (table, summary) = run_bound_audit(&cfg)?;
            let path = dir.join("audit.csv");
            table.write(&path)?;
            eprintln!("wrote {}", path.display());
            println!("{summary}");
            return Ok(summary.passed());
        }
        Cmd::LpDump => print!("{}", lp_dump(&cfg)?),
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
