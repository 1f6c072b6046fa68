//! Command-line front-end: every subcommand is a thin deterministic wrapper
//! over `breathid_core`, configured by one JSON document plus flag overrides.

pub mod bench;
pub mod commands;
pub mod config;

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use thiserror::Error;

pub use config::{BenchConfig, Overrides, RunConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] breathid_core::Error),
    #[error("config {path:?}: {reason}")]
    Config { path: PathBuf, reason: String },
    #[error("{0}")]
    Args(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot open {path:?}: {source}")]
    Open { path: PathBuf, source: std::io::Error },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("thread pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.kind(),
            CliError::Config { .. } => "Config",
            CliError::Args(_) => "InvalidArgument",
            CliError::Io(_) | CliError::Open { .. } => "Io",
            CliError::Json(_) => "Json",
            CliError::Pool(_) => "ThreadPool",
        }
    }

    /// `{"error": kind, "message": text}`.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({ "error": self.kind(), "message": self.to_string() })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BlockArg {
    Ht,
    Ml,
    Both,
}

#[derive(Debug, Parser)]
#[command(name = "breathid", version, about = "Exhaled-breath biometric authentication pipeline")]
pub struct Cli {
    /// JSON run configuration; missing fields take their defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for the cohort, the evaluation trials and the benchmark.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Decision threshold in percent for the command's confirmation or identification step.
    #[arg(long, global = true)]
    pub eta_threshold: Option<f64>,
    /// Fusion weights for the HT and ML vectors, e.g. `0.3,0.7`.
    // Qualified path keeps clap from treating the list as repeated values.
    #[arg(long, global = true, value_parser = config::parse_weights)]
    pub weights: Option<::std::vec::Vec<f64>>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the synthetic cohort dataset and its manifest.
    Synth,
    /// Segment, validate and featurize every recording of the dataset.
    Features,
    /// Split, select features and build the pairwise model library.
    Enroll,
    /// Confirm a claimed identity from a user's held-out rows.
    Confirm {
        #[arg(long)]
        claim: String,
        /// Whose held-out rows to present (default: the claimant).
        #[arg(long)]
        subject: Option<String>,
        #[arg(long, value_enum, default_value = "both")]
        block: BlockArg,
    },
    /// Identify a user from their held-out rows with no claim.
    Identify {
        #[arg(long)]
        subject: String,
    },
    /// Repeated split-shuffle evaluation; writes JSON and CSV reports.
    Evaluate,
    /// Identification time against library size.
    BenchIdentify {
        /// Comma-separated library sizes, each `n choose 2`.
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<usize>>,
    },
}

impl Cli {
    pub fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            jobs: self.jobs,
            eta_threshold: self.eta_threshold,
            weights: self.weights.clone(),
        }
    }
}

/// Resolve the configuration and run the command inside a pool of the
/// configured size. Returns the report printed on stdout.
pub fn run(cli: &Cli) -> Result<serde_json::Value, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let overrides = cli.overrides();
    cfg.apply(&overrides)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = cfg.jobs {
        pool = pool.num_threads(j);
    }
    let pool = pool.build()?;
    let eta = overrides.eta_threshold;
    pool.install(|| match &cli.command {
        Command::Synth => commands::synth(&cfg),
        Command::Features => commands::features(&cfg),
        Command::Enroll => commands::enroll(&cfg),
        Command::Confirm {
            claim,
            subject,
            block,
        } => commands::confirm(&cfg, claim, subject.as_deref(), *block, eta),
        Command::Identify { subject } => commands::identify(&cfg, subject, eta),
        Command::Evaluate => commands::evaluate(&cfg, eta),
        Command::BenchIdentify { sizes } => {
            let mut b = cfg.bench.clone();
            if let Some(s) = sizes {
                b.sizes = s.clone();
            }
            bench::run(&b, &cfg.report_dir)
        }
    })
}
