use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use insider_lab::config::{ExperimentConfig, Overrides};
use insider_lab::experiments::{ExperimentKind, RunError};
use insider_lab::LabFailure;

const EXIT_CHECKS_FAILED: u8 = 1;
const EXIT_INVALID: u8 = 2;
const EXIT_DIVERGED: u8 = 3;

#[derive(Parser)]
#[command(name = "insider-lab", version, about = "Monte Carlo checks for optimal control with insider information")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment config and write <out>/<kind>.csv and <out>/<kind>.json
    Run {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long = "n-paths")]
        n_paths: Option<usize>,
        #[arg(long)]
        out: Option<String>,
        /// Worker threads [all cores]; results do not depend on it
        #[arg(long)]
        workers: Option<usize>,
    },
    /// List experiment kinds with their fields, default sizes and CSV columns
    List,
}

fn list() {
    for kind in ExperimentKind::ALL {
        let (paths, steps) = kind.default_sizes();
        println!("{}", kind.name());
        println!("    {}", kind.description());
        println!("    defaults: n_paths {paths}, n_steps {steps}");
        for (field, about) in kind.fields() {
            println!("    {field}: {about}");
        }
        println!("    csv: {}", kind.csv_columns().join(","));
    }
}

fn run(config: PathBuf, overrides: Overrides, workers: Option<usize>) -> ExitCode {
    if workers == Some(0) {
        eprintln!("error: --workers must be at least 1");
        return ExitCode::from(EXIT_INVALID);
    }
    let config = match ExperimentConfig::load(&config, &overrides) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_INVALID);
        }
    };
    let outcome = match insider_lab::run(&config, workers) {
        Ok(o) => o,
        Err(LabFailure::Run(RunError::Numerical(m))) => {
            eprintln!("error: numerical divergence: {m}");
            return ExitCode::from(EXIT_DIVERGED);
        }
        Err(e @ LabFailure::Run(RunError::Invalid(_))) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_INVALID);
        }
        Err(e @ LabFailure::Io(_)) => {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    };
    for c in &outcome.report.checks {
        let mark = if c.pass { "PASS" } else { "FAIL" };
        match c.std_error {
            Some(se) => println!("{mark} {}: {:.6e} vs {:.6e} (se {se:.3e}, {})", c.name, c.value, c.target, c.rule),
            None => println!("{mark} {}: {:.6e} vs {:.6e} ({})", c.name, c.value, c.target, c.rule),
        }
    }
    println!("wrote {} and {}", outcome.csv_path.display(), outcome.json_path.display());
    if outcome.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_CHECKS_FAILED)
    }
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::List => {
            list();
            ExitCode::SUCCESS
        }
        Command::Run {
            config,
            seed,
            n_paths,
            out,
            workers,
        } => run(config, Overrides { seed, n_paths, out }, workers),
    }
}
