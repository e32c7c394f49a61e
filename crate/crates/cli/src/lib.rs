//! Config loading, experiment runners and output writers behind the
//! `insider-lab` binary.

pub mod config;
pub mod experiments;
pub mod output;

use std::path::{Path, PathBuf};

use config::ExperimentConfig;
use experiments::{run_experiment, Report, RunError};
use output::{write_outputs, Summary, BUILD_ID};

/// One finished run.
#[derive(Debug)]
pub struct Outcome {
    pub report: Report,
    pub csv_path: PathBuf,
    pub json_path: PathBuf,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.report.checks.iter().all(|c| c.pass)
    }
}

#[derive(Debug)]
pub enum LabFailure {
    Run(RunError),
    Io(std::io::Error),
}

impl std::fmt::Display for LabFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LabFailure::Run(e) => e.fmt(f),
            LabFailure::Io(e) => write!(f, "cannot write outputs: {e}"),
        }
    }
}

impl std::error::Error for LabFailure {}

/// Runs `config` on a pool of `workers` threads (all cores when `None`)
/// and writes `<out>/<kind>.csv` and `<out>/<kind>.json`. Results do not
/// depend on the number of workers.
pub fn run(config: &ExperimentConfig, workers: Option<usize>) -> Result<Outcome, LabFailure> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| LabFailure::Run(RunError::Invalid(format!("cannot start {workers:?} workers: {e}"))))?;
    let report = pool.install(|| run_experiment(config)).map_err(LabFailure::Run)?;
    let verdict = if report.checks.iter().all(|c| c.pass) { "pass" } else { "fail" };
    let summary = Summary {
        kind: config.kind.name(),
        build: BUILD_ID,
        verdict,
        config,
        checks: &report.checks,
        results: &report.results,
    };
    let (csv_path, json_path) =
        write_outputs(Path::new(config.out_dir()), config.kind.name(), &report.table.to_csv(), &summary)
            .map_err(LabFailure::Io)?;
    Ok(Outcome {
        report,
        csv_path,
        json_path,
    })
}
