use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use diskreeb::config::RunConfig;
use diskreeb::{commands, Failure};

/// Area-preserving disk maps, their Calabi invariants, and the Reeb flows
/// of their suspensions.
#[derive(Parser)]
#[command(name = "diskreeb", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a rotor construction; writes construction.json and packing.csv.
    Construct(Common),
    /// Contact volume, minimal period and systolic ratio; writes systolic.json.
    Systolic(Common),
    /// Generating function of a monotone map; writes genfun.json and genfun_w.csv.
    Genfun(Common),
    /// Run the invariant suite; writes verify.json.
    Verify(Common),
    /// Trace a suspension orbit; writes orbit.csv.
    Orbit(Common),
}

#[derive(Args)]
struct Common {
    /// JSON file with any of the flag values; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    flags: RunConfig,
}

impl Common {
    fn resolve(self) -> Result<RunConfig, Failure> {
        let base = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        Ok(base.overlay(self.flags))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (run, common): (fn(&RunConfig) -> Result<Vec<String>, Failure>, Common) = match cli.command {
        Command::Construct(c) => (commands::construct, c),
        Command::Systolic(c) => (commands::systolic, c),
        Command::Genfun(c) => (commands::genfun, c),
        Command::Verify(c) => (commands::verify, c),
        Command::Orbit(c) => (commands::orbit, c),
    };
    match common.resolve().and_then(|cfg| run(&cfg)) {
        Ok(lines) => {
            for l in lines {
                println!("{l}");
            }
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
