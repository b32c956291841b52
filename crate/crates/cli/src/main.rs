//! hma: solve the curved Monge-Ampere equation on the Bolza surface and
//! exercise the metric pipeline built on top of it.
//!
//! Exit codes: 0 all checks pass, 1 one or more checks fail, 2 bad usage or
//! config, 3 pipeline failure (partial report still written), 4 convergence
//! order regression in `mms`.

mod commands;
mod config;
mod output;

use clap::{Parser, Subcommand};
use config::{Overrides, RunConfig};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "hma", version, about = "hyperbolic Monge-Ampere laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Config file; TOML unless the extension is .json
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Root directory for run outputs (default "runs")
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// RNG stream seed override
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,

    /// Grid spacing override
    #[arg(long, global = true, value_name = "H")]
    h: Option<f64>,

    /// Series truncation depth override
    #[arg(long = "L", global = true, value_name = "DEPTH")]
    depth: Option<usize>,

    /// Newton residual tolerance override
    #[arg(long, global = true, value_name = "TOL")]
    tol: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve for the configured seed, derive the metrics, write field tables
    Solve,
    /// Manufactured-solution convergence study on a disk patch
    Mms,
    /// Forward then inverse map over basis and random directions
    Roundtrip,
    /// Energy growth along rays of increasing seed norm
    Scan,
    /// Group sanity: relation residual, element counts, domain geometry
    GenGroup,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let ov = Overrides {
        h: cli.h,
        depth: cli.depth,
        tol: cli.tol,
        seed: cli.seed,
    };
    let cfg = match RunConfig::resolve(cli.config.as_deref(), cli.out.as_deref(), ov) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e:#}");
            return ExitCode::from(2);
        }
    };
    let dir = match output::run_dir(&cfg) {
        Ok(d) => d,
        Err(e) => {
            eprintln!("cannot create run directory: {e:#}");
            return ExitCode::from(3);
        }
    };
    let result = match cli.command {
        Command::Solve => commands::cmd_solve(&cfg, &dir),
        Command::Mms => commands::cmd_mms(&cfg, &dir),
        Command::Roundtrip => commands::cmd_roundtrip(&cfg, &dir),
        Command::Scan => commands::cmd_scan(&cfg, &dir),
        Command::GenGroup => commands::cmd_gen_group(&cfg, &dir),
    };
    let (report, code) = match result {
        Ok(pair) => pair,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(3);
        }
    };
    if let Err(e) = report.write(&dir) {
        eprintln!("cannot write report: {e:#}");
        return ExitCode::from(3);
    }
    print!("{}", report.summarize());
    println!("status: {}", report.status);
    if let Some(err) = &report.error {
        println!("error: {err}");
    }
    println!("report: {}", dir.join("report.json").display());
    ExitCode::from(u8::try_from(code).unwrap_or(3))
}
