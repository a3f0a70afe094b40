use std::path::PathBuf;

use bstraight::barycenter::SolverSettings;
use bstraight::model::Model;
use bstraight::quadrature::{build_grid, default_resolution, QuadratureGrid};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

/// Settings shared by every geometric command. Echoed into reports, so a
/// report can be replayed from its own `config` field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub model: String,
    /// Quadrature resolution; the per-model default when absent on input.
    pub grid_resolution: usize,
    pub seed: u64,
    pub tol_grad: f64,
    pub max_iter: usize,
    pub samples: usize,
    /// Vertex balls have this radius around the basepoint.
    pub radius: f64,
    pub cprime: Option<f64>,
    #[serde(skip)]
    pub out: Option<PathBuf>,
    #[serde(skip)]
    pub format: Format,
}

impl RunConfig {
    pub fn new(model: &str) -> Result<Self, CliError> {
        let m = parse_model(model)?;
        let solver = SolverSettings::default();
        Ok(Self {
            model: m.id(),
            grid_resolution: default_resolution(&m),
            seed: 0,
            tol_grad: solver.tol_grad,
            max_iter: solver.max_iter,
            samples: 100,
            radius: 3.0,
            cprime: None,
            out: None,
            format: Format::Json,
        })
    }

    pub fn validate(&self) -> Result<(), CliError> {
        parse_model(&self.model)?;
        let positive = [
            ("grid-resolution", self.grid_resolution as f64),
            ("tol-grad", self.tol_grad),
            ("max-iter", self.max_iter as f64),
            ("samples", self.samples as f64),
            ("radius", self.radius),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(CliError::Config(format!("--{name} must be positive, got {v}")));
            }
        }
        if let Some(c) = self.cprime {
            if !(c > 0.0) || !c.is_finite() {
                return Err(CliError::Config(format!("--cprime must be positive, got {c}")));
            }
        }
        Ok(())
    }

    pub fn model(&self) -> Result<Model, CliError> {
        parse_model(&self.model)
    }

    pub fn grid(&self) -> Result<QuadratureGrid, CliError> {
        build_grid(&self.model()?, self.grid_resolution, self.seed).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn solver(&self) -> SolverSettings {
        SolverSettings {
            tol_grad: self.tol_grad,
            max_iter: self.max_iter,
            ..SolverSettings::default()
        }
    }
}

pub fn parse_model(id: &str) -> Result<Model, CliError> {
    Model::from_id(id).map_err(|e| CliError::Config(e.to_string()))
}
