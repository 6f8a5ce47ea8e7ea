//! Command implementations behind the `cubicmm` binary. Every command returns
//! a [`Report`]; the binary only parses flags and writes the rendering.

pub mod checks;
pub mod commands;
pub mod report;

use cubicmm::curve::ModelParams;
use cubicmm::measures::QuadSettings;
use cubicmm::PrecisionContext;

pub use commands::{cmd_curve, cmd_density, cmd_domain, cmd_ortho, cmd_phi_field, cmd_verify};
pub use report::{Check, Report, Table};

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Suite {
    Fast,
    Full,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Measure {
    Mu1,
    Mu2,
}

/// Inputs shared by every command.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    /// Decimal strings, parsed at the working precision without a detour through f64.
    pub t0: String,
    pub t3: String,
    pub bits: usize,
    pub samples: Option<usize>,
    pub n: Option<usize>,
    pub format: Format,
    pub seed: u64,
    /// Gauss points per panel for integrals against the measures.
    pub quad_order: Option<usize>,
    /// Second-measure mesh radius in units of `x_star`.
    pub r_tail: Option<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            t0: "0.5".into(),
            t3: "0.25".into(),
            bits: 256,
            samples: None,
            n: None,
            format: Format::Json,
            seed: 1,
            quad_order: None,
            r_tail: None,
        }
    }
}

impl RunConfig {
    pub fn with_params(t0: &str, t3: &str) -> RunConfig {
        RunConfig { t0: t0.into(), t3: t3.into(), ..RunConfig::default() }
    }

    pub fn ctx(&self) -> Result<PrecisionContext, CliError> {
        PrecisionContext::new(self.bits).map_err(|_| CliError::Usage(format!("--bits must be at least 64 (got {})", self.bits)))
    }

    pub fn params(&self) -> Result<ModelParams, CliError> {
        self.params_at(self.ctx()?)
    }

    pub fn params_at(&self, ctx: PrecisionContext) -> Result<ModelParams, CliError> {
        Ok(ModelParams::from_decimal(&self.t0, &self.t3, ctx)?)
    }

    pub fn quad_settings(&self) -> QuadSettings {
        let mut q = QuadSettings::default();
        if let Some(o) = self.quad_order {
            q.order = o;
        }
        if let Some(r) = self.r_tail {
            q.r_tail_factor = r;
        }
        q
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error(transparent)]
    Compute(#[from] cubicmm::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_CHECK: i32 = 3;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use cubicmm::Error as E;
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Compute(E::InvalidParameters(_) | E::SupercriticalRegime { .. }) => EXIT_USAGE,
            CliError::Compute(E::CriticalRegime) => EXIT_USAGE,
            _ => EXIT_CHECK,
        }
    }
}
