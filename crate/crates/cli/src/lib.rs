//! Command-line driver for `bstraight`: argument parsing, run configuration
//! and JSON/CSV reports.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod report;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::commands::{Property, SimvolRequest};
use crate::config::{Format, RunConfig};
use crate::report::Outcome;

pub const EXIT_CONFIG: i32 = 64;
pub const EXIT_SIMPLEX_FILE: i32 = 65;
pub const EXIT_EXPRESSION: i32 = 3;
pub const EXIT_IO: i32 = 74;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("malformed simplex file: {0}")]
    SimplexFile(String),
    #[error("{0}")]
    Expression(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::SimplexFile(_) => EXIT_SIMPLEX_FILE,
            CliError::Expression(_) => EXIT_EXPRESSION,
            CliError::Io(_) => EXIT_IO,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "bstraight", version, about = "Barycentric straightening checks and simplicial-volume bounds")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// h2, h3, h4, h5 or h2xh2.
    #[arg(long)]
    pub model: Option<String>,
    /// Quadrature resolution (per-model default when omitted).
    #[arg(long)]
    pub grid_resolution: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 100)]
    pub samples: usize,
    #[arg(long)]
    pub tol_grad: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Radius of the ball around the basepoint that vertices are drawn from.
    #[arg(long, default_value_t = 3.0)]
    pub radius: f64,
    /// Points with J above this are reported as violations.
    #[arg(long)]
    pub cprime: Option<f64>,
    /// Output path; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

impl Common {
    pub fn run_config(&self, model: &str) -> Result<RunConfig, CliError> {
        let mut run = RunConfig::new(model)?;
        if let Some(r) = self.grid_resolution {
            run.grid_resolution = r;
        }
        run.seed = self.seed;
        run.samples = self.samples;
        if let Some(t) = self.tol_grad {
            run.tol_grad = t;
        }
        if let Some(m) = self.max_iter {
            run.max_iter = m;
        }
        run.radius = self.radius;
        run.cprime = self.cprime;
        run.out = self.out.clone();
        run.format = self.format;
        run.validate()?;
        Ok(run)
    }

    fn required_model(&self) -> Result<&str, CliError> {
        self.model.as_deref().ok_or_else(|| CliError::Config("--model is required".into()))
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check straightening properties on seeded samples.
    Verify {
        #[arg(long, value_enum, default_value_t = Property::All)]
        property: Property,
        #[command(flatten)]
        common: Common,
    },
    /// Scan |Jac| and J over seeded top-dimensional simplices.
    Jscan {
        /// Monte-Carlo samples per simplex volume; 0 skips volumes.
        #[arg(long, default_value_t = 0)]
        volume_samples: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Straighten a simplex on a lattice of its parameter domain.
    Straighten {
        #[arg(long)]
        simplex: PathBuf,
        /// Lattice points per edge.
        #[arg(long, default_value_t = 10)]
        grid: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Barycenter of a weighted sum of the vertices' densities.
    Barycenter {
        #[arg(long)]
        simplex: PathBuf,
        /// Non-negative weights, one per vertex; equal when omitted.
        #[arg(long, value_delimiter = ',')]
        weights: Option<Vec<f64>>,
        #[command(flatten)]
        common: Common,
    },
    /// Evaluate simplicial-volume bounds of a manifold expression.
    Simvol {
        expression: String,
        /// Target manifold for a degree bound.
        #[arg(long)]
        target: Option<String>,
        /// Override v_n, as DIM=VALUE.
        #[arg(long = "volume-constant")]
        volume_constants: Vec<String>,
        /// Override the product constant C(n), as DIM=VALUE.
        #[arg(long = "product-constant")]
        product_constants: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
}

/// Runs a parsed command. Returns the outcome with the requested output
/// destination and format.
pub fn run(cli: Cli) -> Result<(Outcome, Option<PathBuf>, Format), CliError> {
    match cli.command {
        Command::Verify { property, common } => {
            let run = common.run_config(common.required_model()?)?;
            Ok((commands::verify(&run, property)?, run.out, run.format))
        }
        Command::Jscan { volume_samples, common } => {
            let run = common.run_config(common.required_model()?)?;
            Ok((commands::jscan_command(&run, volume_samples)?, run.out, run.format))
        }
        Command::Straighten { simplex, grid, common } => {
            let (model, vertices) = commands::load_simplex(&simplex, common.model.as_deref())?;
            let run = common.run_config(&model.id())?;
            Ok((commands::straighten(&run, &simplex, vertices, grid)?, run.out, run.format))
        }
        Command::Barycenter { simplex, weights, common } => {
            let (model, vertices) = commands::load_simplex(&simplex, common.model.as_deref())?;
            let run = common.run_config(&model.id())?;
            Ok((commands::barycenter(&run, &simplex, vertices, weights)?, run.out, run.format))
        }
        Command::Simvol {
            expression,
            target,
            volume_constants,
            product_constants,
            out,
            format,
        } => {
            let mut req = SimvolRequest {
                expression,
                target,
                ..SimvolRequest::default()
            };
            req.constants.volume_constants = commands::parse_constants(&volume_constants)?;
            req.constants.product_constants = commands::parse_constants(&product_constants)?;
            Ok((commands::simvol_command(&req)?, out, format))
        }
    }
}

/// Caps the global worker pool from `BSTRAIGHT_THREADS`, if set.
pub fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("BSTRAIGHT_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|t| *t > 0)
        .ok_or_else(|| CliError::Config(format!("BSTRAIGHT_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Config(e.to_string()))
}
