//! JSON run configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use charfred_core::diagnostics::ProfileRequest;
use charfred_core::{Expr, Grid, SystemSpec};

pub const SCHEMA_VERSION: u32 = 1;
/// Grid unknowns `n·(nx+1)·ny·nt` accepted by `solve` and `diagnose`.
pub const UNKNOWN_CAP: usize = 2_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    #[default]
    Auto,
    Neumann,
    Discrete,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub nx: usize,
    pub ny: usize,
    pub nt: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    #[serde(default)]
    pub method: Method,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

fn default_tol() -> f64 {
    1e-10
}

fn default_max_iter() -> usize {
    200
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { method: Method::Auto, tol: default_tol(), max_iter: default_max_iter() }
    }
}

/// An exact solution paired with the configured right-hand side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manufactured {
    pub solution: Vec<Expr>,
    /// Upper bound on the sup error of the computed solution.
    pub gate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub schema: u32,
    pub spec: SystemSpec,
    pub rhs: Vec<Expr>,
    pub grid: GridConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub diagnostics: Option<ProfileRequest>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub manufactured: Option<Manufactured>,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid configuration: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported schema {0}, expected {SCHEMA_VERSION}")]
    Schema(u32),
    #[error("{0}")]
    Invalid(String),
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        if cfg.schema != SCHEMA_VERSION {
            return Err(ConfigError::Schema(cfg.schema));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.into(), source })?;
        Self::from_json(&text)
    }

    /// Grid of the configured size with the spec's periods.
    pub fn grid(&self) -> Result<Grid, ConfigError> {
        let g = &self.grid;
        Grid::new(g.nx, g.ny, g.nt, self.spec.period_y, self.spec.period_t)
            .map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn unknowns(&self) -> usize {
        self.spec.n * (self.grid.nx + 1) * self.grid.ny * self.grid.nt
    }

    /// Checks that do not depend on the spec being valid.
    pub fn check(&self) -> Result<(), ConfigError> {
        if self.rhs.len() != self.spec.n {
            return Err(ConfigError::Invalid(format!(
                "rhs has {} expressions, spec has n = {}",
                self.rhs.len(),
                self.spec.n
            )));
        }
        if let Some(m) = &self.manufactured {
            if m.solution.len() != self.spec.n {
                return Err(ConfigError::Invalid("manufactured solution has the wrong length".into()));
            }
        }
        if !(self.solver.tol > 0.0) {
            return Err(ConfigError::Invalid("solver tol must be positive".into()));
        }
        if self.unknowns() > UNKNOWN_CAP {
            return Err(ConfigError::Invalid(format!(
                "{} unknowns exceed the cap of {UNKNOWN_CAP}",
                self.unknowns()
            )));
        }
        Ok(())
    }
}
