use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use unimetric::calculus::{Chart, QuadratureSpec};
use unimetric::Error;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Numeric(String),
    #[error("{0} check(s) failed")]
    VerifyFailed(usize),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::VerifyFailed(_) => 1,
            CliError::Numeric(_) => 2,
            CliError::Config(_) | CliError::Io(_) => 3,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidQuadrature(_)
            | Error::InvalidGrid(_)
            | Error::InvalidProfiles(_)
            | Error::InvalidBasis(_)
            | Error::IncompatibleLabels(_)
            | Error::DimensionMismatch { .. }
            | Error::ScaleBelowMinimum { .. } => CliError::Config(e.to_string()),
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "unimetric", version, about = "Metrics on moduli spaces from universal frames")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand, Serialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Damped metric tables for a moduli family.
    Metric(MetricArgs),
    /// Run a verification suite; exit 1 on any failure.
    Verify(VerifyArgs),
    /// Build a frame field for a U(1) connection on a grid.
    Reconstruct(ReconstructArgs),
    /// Write a bundled sample connection grid.
    Sample(SampleArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Adhm,
    Nr,
    Abelian,
    RigidGauge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Quad {
    Radial,
    Tensor,
    Mc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Recipe {
    Abelian,
    Nr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Eta {
    SelfDual,
    AntiSelfDual,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct MetricArgs {
    #[arg(long, value_enum, default_value = "adhm")]
    pub family: Family,
    /// Exponents of the damped g0 metric.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub alpha: Vec<f64>,
    /// Exponents of the damped g1 metric.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub beta: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "1", allow_hyphen_values = true)]
    pub rho: Vec<f64>,
    /// Instanton centre x1,x2,x3,x4.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub center: Vec<f64>,
    #[arg(long, value_enum, default_value = "radial")]
    pub quad: Quad,
    /// Nodes per axis (radial, tensor) or sample count (mc).
    #[arg(long)]
    pub nodes: Option<usize>,
    /// Half-width of a box chart; infinite chart when absent.
    #[arg(long = "L")]
    #[serde(rename = "L")]
    pub half_width: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Exit 1 when any closed-form relative error exceeds this.
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct VerifyArgs {
    /// frames, adhm-connection, nr-isotropy, nr-nonequivariance,
    /// abelian-reconstruction, projector-lemma, stacking, scaling-exponent or all
    pub suite: String,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long, default_value_t = 20240917)]
    pub seed: u64,
    /// 't Hooft symbol used as the reference connection (mutation fixture).
    #[arg(long, value_enum, default_value = "self-dual")]
    pub eta: Eta,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ReconstructArgs {
    /// Connection grid in the abelian grid JSON schema.
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "abelian")]
    pub recipe: Recipe,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SampleArgs {
    /// Spatial dimension of the bundled sample (2 or 3).
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

impl MetricArgs {
    pub fn quadrature(&self) -> Result<QuadratureSpec, CliError> {
        let chart = match self.half_width {
            Some(l) if !(l > 0.0) => return Err(CliError::Config(format!("--L must be positive, got {l}"))),
            Some(l) => Chart::Box(l),
            None => Chart::Infinite,
        };
        let spec = match self.quad {
            Quad::Radial => {
                if chart != Chart::Infinite {
                    return Err(CliError::Config("radial quadrature needs the infinite chart; drop --L".into()));
                }
                QuadratureSpec::radial(self.nodes.unwrap_or(200))
            }
            Quad::Tensor => QuadratureSpec::tensor(self.nodes.unwrap_or(32), chart),
            Quad::Mc => QuadratureSpec::monte_carlo(self.nodes.unwrap_or(200_000), chart, self.seed),
        };
        spec.validate(4)?;
        Ok(spec)
    }

    pub fn centre(&self) -> Result<[f64; 4], CliError> {
        match self.center.len() {
            0 => Ok([0.0; 4]),
            4 => Ok([self.center[0], self.center[1], self.center[2], self.center[3]]),
            n => Err(CliError::Config(format!("--center takes 4 coordinates, got {n}"))),
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.alpha.is_empty() && self.beta.is_empty() {
            return Err(CliError::Config("give at least one --alpha or --beta exponent".into()));
        }
        if let Some(&a) = self.alpha.iter().chain(&self.beta).find(|a| !(a.is_finite() && **a >= 0.0)) {
            return Err(CliError::Config(format!("damping exponents must be finite and >= 0, got {a}")));
        }
        if let Some(&r) = self.rho.iter().find(|r| !(r.is_finite() && **r > 0.0)) {
            return Err(CliError::Config(format!("--rho values must be positive, got {r}")));
        }
        if self.family == Family::Abelian {
            return Err(CliError::Config("the abelian family has no moduli; use `reconstruct`".into()));
        }
        if self.family == Family::Nr && self.quad == Quad::Radial {
            return Err(CliError::Config("NR frames live on a box chart; use --quad tensor|mc with --L".into()));
        }
        self.centre()?;
        self.quadrature()?;
        Ok(())
    }
}
