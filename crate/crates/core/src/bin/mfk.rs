use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mfk::harness::{self, Experiment, THREADS_ENV};

#[derive(Parser)]
#[command(
    name = "mfk",
    version,
    about = "Mild and particle solvers for McKean-Feynman-Kac equations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Run configuration (TOML).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output directory, overriding `output.dir`.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Master seed, overriding `particles.seed`.
    #[arg(long, global = true, value_name = "INT")]
    seed: Option<u64>,

    /// Worker threads.
    #[arg(long, global = true, value_name = "INT", env = THREADS_ENV)]
    threads: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Picard solve of the mild formulation.
    SolveMild,
    /// Weighted particles driven by the mild solution.
    SimulateFrozen,
    /// Self-consistent particles closed by a kernel density estimate.
    SimulateMckean,
    /// Mild solve against the preset's reference solution.
    Validate,
    /// Self-consistent particle errors over several particle counts.
    Sweep,
}

impl From<Command> for Experiment {
    fn from(c: Command) -> Self {
        match c {
            Command::SolveMild => Experiment::SolveMild,
            Command::SimulateFrozen => Experiment::SimulateFrozen,
            Command::SimulateMckean => Experiment::SimulateMckean,
            Command::Validate => Experiment::Validate,
            Command::Sweep => Experiment::Sweep,
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = harness::init_threads(cli.threads).and_then(|()| {
        let path = cli
            .config
            .ok_or_else(|| mfk::Error::Config("--config PATH is required".into()))?;
        harness::run_file(
            &path,
            Some(cli.command.into()),
            cli.out.as_deref(),
            cli.seed,
        )
    });
    match &result {
        Ok(outcome) => {
            for c in &outcome.report.checks {
                println!(
                    "{} {}: {:.6e} (limit {:.6e})",
                    if c.pass { "pass" } else { "FAIL" },
                    c.name,
                    c.value,
                    c.limit
                );
            }
        }
        Err(e) => eprintln!("error: {e}"),
    }
    ExitCode::from(harness::exit_code(&result) as u8)
}
