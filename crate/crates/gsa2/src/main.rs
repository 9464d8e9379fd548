use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gsa2::report::error_json;
use gsa2::run::{run_file, Command, Overrides};

#[derive(Debug, Parser)]
#[command(name = "gsa2", version, about = "First- and second-level HSIC sensitivity analysis")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// First-level indices and independence tests under a target law.
    Gsa1(Common),
    /// Second-level indices from one shared sample (single loop).
    Gsa2(Common),
    /// Second-level indices with a fresh sample per drawn law (double loop).
    Gsa2Double(Common),
    /// Replicated estimates over a grid of sample sizes.
    Converge(Common),
    /// Single loop against double loop at equal simulation budget.
    Budget(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// TOML or JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Overrides `run.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `run.workers` and the GSA2_WORKERS variable.
    #[arg(long)]
    workers: Option<usize>,
    /// Overrides `run.out`.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, c) = match cli.command {
        Cmd::Gsa1(c) => (Command::Gsa1, c),
        Cmd::Gsa2(c) => (Command::Gsa2, c),
        Cmd::Gsa2Double(c) => (Command::Gsa2Double, c),
        Cmd::Converge(c) => (Command::Converge, c),
        Cmd::Budget(c) => (Command::Budget, c),
    };
    let overrides = Overrides { seed: c.seed, workers: c.workers, out: c.out };
    match run_file(command, &c.config, &overrides) {
        Ok(o) => {
            for w in &o.warnings {
                eprintln!("warning: input {}: {}", w.input, w.message);
            }
            println!("{}", o.out.join("report.json").display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprint!("{}", error_json(&e));
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
