//! Command-line experiment runner: `fpt <experiment> --config <path> [--n N] [--seed S] [--out DIR] [--workers W]`.
//!
//! Exit codes: 0 success, 2 configuration, 3 assumption violation,
//! 4 non-termination, 1 anything else. Errors are reported on stderr as JSON.

pub mod config;
pub mod run;

use std::path::PathBuf;

use clap::{Parser, ValueEnum};
use serde_json::json;

pub use config::{parse_config, parse_config_with, ExperimentConfig, Method, Overrides};
pub use run::{run_experiment, sample_problem, Artifacts, VERSION};

use crate::error::{FptError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExperimentName {
    Example1,
    Example2,
    Neuron,
    Benchmark,
    Sample,
}

impl ExperimentName {
    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentName::Example1 => "example1",
            ExperimentName::Example2 => "example2",
            ExperimentName::Neuron => "neuron",
            ExperimentName::Benchmark => "benchmark",
            ExperimentName::Sample => "sample",
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "fpt", version, about = "Exact first-passage time experiments")]
pub struct Args {
    pub experiment: ExperimentName,
    /// JSON config; defaults apply to every missing field.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Sample count (trials for `neuron`).
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads; 0 uses all cores. Results do not depend on it.
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
}

pub fn exit_code(e: &FptError) -> i32 {
    match e {
        FptError::Parameter(_)
        | FptError::Configuration(_)
        | FptError::Unsupported(_)
        | FptError::Domain(_)
        | FptError::Sequencing(_)
        | FptError::Data(_) => 2,
        FptError::Assumption { .. } | FptError::DiffusionSign { .. } => 3,
        FptError::NonTermination { .. } => 4,
        FptError::Inversion(_) | FptError::Io(_) => 1,
    }
}

pub fn error_json(e: &FptError) -> String {
    json!({ "error": e.kind(), "message": e.to_string(), "exit_code": exit_code(e) }).to_string()
}

pub fn resolve(args: &Args) -> Result<ExperimentConfig> {
    let text = match &args.config {
        Some(p) => std::fs::read_to_string(p)
            .map_err(|e| FptError::Configuration(format!("cannot read {}: {e}", p.display())))?,
        None => "{}".to_string(),
    };
    let ov = Overrides {
        experiment: Some(args.experiment.as_str().to_string()),
        n: args.n,
        seed: args.seed,
    };
    parse_config_with(&text, &ov)
}

/// Runs the CLI and returns the process exit code.
pub fn main_with(args: &Args) -> i32 {
    let outcome = resolve(args).and_then(|cfg| run_experiment(&cfg, &args.out, args.workers));
    match outcome {
        Ok(a) => {
            for f in &a.files {
                println!("{}", f.display());
            }
            0
        }
        Err(e) => {
            eprintln!("{}", error_json(&e));
            exit_code(&e)
        }
    }
}
