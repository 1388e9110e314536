use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use semibandit_bic::harness::config::ExperimentConfig;
use semibandit_bic::harness::{execute, Command};
use semibandit_bic::Error;

const SEED_ENV: &str = "SEMIBANDIT_SEED";

#[derive(Parser)]
#[command(name = "semibandit-bic", version, about = "Incentive-compatible exploration experiments for combinatorial semi-bandits")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Compute the prior-dependent constants and write constants.json.
    Constants(Common),
    /// Simulate replicates and write round logs and regret curves.
    Run(Common),
    /// Run the configured checks; exits 1 if any fails.
    Verify(Common),
    /// Evaluate constants or regret over a parameter grid.
    Sweep(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Overrides both the config seed and SEMIBANDIT_SEED.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on this.
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

fn exit_code(e: &Error) -> u8 {
    if e.is_budget() {
        3
    } else if matches!(e, Error::BootstrapUnderfilled { .. }) {
        1
    } else {
        2
    }
}

fn run(command: Command, args: Common) -> Result<bool, Error> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if let Ok(s) = std::env::var(SEED_ENV) {
        cfg.seed = s
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("{SEED_ENV}={s:?} is not an unsigned integer")))?;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(n) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("cannot start {n} threads: {e}")))?;
    }
    let outcome = execute(command, cfg, &args.out)?;
    println!(
        "{}: wrote {} files to {}",
        command.as_str(),
        outcome.manifest.files.len() + 1,
        args.out.display()
    );
    if command == Command::Verify {
        println!("verification {}", if outcome.passed { "passed" } else { "FAILED" });
    }
    Ok(outcome.passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, args) = match cli.command {
        Cmd::Constants(a) => (Command::Constants, a),
        Cmd::Run(a) => (Command::Run, a),
        Cmd::Verify(a) => (Command::Verify, a),
        Cmd::Sweep(a) => (Command::Sweep, a),
    };
    match run(command, args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
