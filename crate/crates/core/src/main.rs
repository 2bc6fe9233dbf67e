use std::path::PathBuf;
use std::process::ExitCode;

use affgebroid::cli::run;
use affgebroid::config::{parse_config, Overrides};
use clap::Parser;

/// Nonholonomic mechanics on Lie affgebroids: simulate, check, bracket, derive.
#[derive(Debug, Parser)]
#[command(name = "affgebroid", version)]
struct Args {
    /// JSON configuration file.
    #[arg(long)]
    config: PathBuf,
    /// simulate | check | bracket | derive (overrides run.command).
    #[arg(long)]
    command: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    step: Option<f64>,
    #[arg(long)]
    t0: Option<f64>,
    #[arg(long)]
    t1: Option<f64>,
    /// rk4 | rk45
    #[arg(long)]
    method: Option<String>,
    /// Project onto the constraint set after every step.
    #[arg(long)]
    project: bool,
    /// Integrate the Hamiltonian side.
    #[arg(long)]
    hamiltonian: bool,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("AFFGEBROID_LOG")).init();
    let args = Args::parse();
    let text = match std::fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", args.config.display());
            return ExitCode::from(2);
        }
    };
    let overrides = Overrides {
        command: args.command,
        out: args.out,
        seed: args.seed,
        step: args.step,
        t0: args.t0,
        t1: args.t1,
        method: args.method,
        project: args.project,
        hamiltonian: args.hamiltonian,
    };
    match parse_config(&text).and_then(|cfg| run(&cfg, &overrides)) {
        Ok(outcome) => {
            for f in &outcome.files {
                println!("{}", f.display());
            }
            if outcome.success {
                ExitCode::SUCCESS
            } else {
                eprintln!("error: one or more checks failed");
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
