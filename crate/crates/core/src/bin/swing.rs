use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use swing_core::cli::{exit_code, run, Command, RunConfig};

#[derive(Parser)]
#[command(name = "swing", about = "Swing option valuation on scenario lattices")]
struct Args {
    #[command(subcommand)]
    command: Cmd,
    /// Flat key = value config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Override the number of time steps.
    #[arg(long, global = true)]
    steps: Option<usize>,
    /// Override the sampling seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Enumerate all lattice paths instead of sampling.
    #[arg(long, global = true)]
    exhaustive: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Value field, rollouts and exit times.
    Price,
    /// Run every invariant suite.
    Verify,
    /// Duality-gap study and optimal martingale trace.
    Dual,
    /// Marginal-value report against the stopping problems.
    Stopping,
    /// Binary-example regression bundle.
    Example,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let command = match args.command {
        Cmd::Price => Command::Price,
        Cmd::Verify => Command::Verify,
        Cmd::Dual => Command::Dual,
        Cmd::Stopping => Command::Stopping,
        Cmd::Example => Command::Example,
    };
    let result = (|| {
        let mut cfg = match &args.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(k) = args.steps {
            cfg.steps = k;
        }
        if let Some(s) = args.seed {
            cfg.seed = s;
        }
        cfg.exhaustive |= args.exhaustive;
        cfg.validate()?;
        let out = run(command, &cfg)?;
        out.write(&args.out)?;
        Ok(out)
    })();
    match result {
        Ok(out) => {
            print!("{}", out.summary);
            if out.failed {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
