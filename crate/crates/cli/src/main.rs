//! `condqed` command-line front end.

// `!(x > 0.0)` style checks are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::RunConfig;
use error::CliError;
use output::{Output, Report};

#[derive(Parser)]
#[command(name = "condqed", version, about = "Conditional dynamics and feedback in weakly driven cavity QED")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Weak-field steady state: λ, ζ₀, θ₀, g²(0), C₁, n₀.
    Steady(Common),
    /// Free g²(τ) on the configured grid.
    G2(Common),
    /// g²(τ) with the feedback pulse, next to the free trace.
    Capture(Common),
    /// Response at the first extremum inside the pulse for each step.
    Sweep(Common),
    /// Monte-Carlo trajectories, start-stop histogram and normalized g².
    Mc(Common),
    /// Density-matrix g²(τ) compared with the model.
    Oracle(Common),
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Overrides `mc.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Print the report as JSON and mirror every CSV as JSON.
    #[arg(long)]
    json: bool,
}

type Handler = fn(&RunConfig, &Output) -> Result<Report, CliError>;

fn execute(name: &str, args: &Common, handler: Handler) -> Result<(), CliError> {
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.mc.seed = seed;
    }
    let params = cfg.system_params()?;
    let echo = format!(
        "condqed {name} {}\nresolved: g = {} MHz, N = {}, kappa = {} MHz, gamma' = {} MHz, epsilon = {} MHz\n{}",
        env!("CARGO_PKG_VERSION"),
        params.g,
        params.n_atoms,
        params.kappa,
        params.gamma_prime,
        params.epsilon,
        cfg.to_toml()
    );
    let config_json = serde_json::to_value(&cfg).expect("configuration serializes");
    let out = Output::new(&args.out, args.json, echo, config_json)?;
    let report = handler(&cfg, &out)?;
    if args.json {
        println!("{}", serde_json::to_string_pretty(&report.to_json()).expect("report serializes"));
    } else {
        print!("{}", report.to_text());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, args, handler): (&str, &Common, Handler) = match &cli.command {
        Command::Steady(a) => ("steady", a, commands::steady),
        Command::G2(a) => ("g2", a, commands::g2),
        Command::Capture(a) => ("capture", a, commands::capture),
        Command::Sweep(a) => ("sweep", a, commands::sweep),
        Command::Mc(a) => ("mc", a, commands::mc),
        Command::Oracle(a) => ("oracle", a, commands::oracle),
    };
    match execute(name, args, handler) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
