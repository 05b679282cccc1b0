//! User-facing layer: CSV ingestion with scale transforms, analysis
//! orchestration, JSON/text reporting, and forest-plot SVG emission.

use thiserror::Error;

pub mod config;
pub mod ingest;
pub mod json_out;
pub mod report;
pub mod svg;

pub use config::{AnalysisConfig, Framework, InputScale, WeightSource};
pub use report::{run_analysis, Report};

/// Exit code for input and validation failures.
pub const EXIT_VALIDATION: i32 = 2;
/// Exit code for numerical non-convergence.
pub const EXIT_NONCONVERGENCE: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("missing required column '{0}'")]
    MissingColumn(&'static str),
    #[error("row {row}, column '{column}': {message}")]
    ParseError {
        row: usize,
        column: String,
        message: String,
    },
    #[error("row {row}: ratio-scale value {value} must be strictly positive to take its logarithm")]
    NonPositiveRatio { row: usize, value: f64 },
    #[error("{0}")]
    Data(#[from] sdma_core::DataError),
    #[error("{0}")]
    Classical(#[from] sdma_core::ClassicalError),
    #[error("{0}")]
    Bayes(#[from] sdma_core::BayesError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn io(path: impl Into<String>) -> impl FnOnce(std::io::Error) -> Self {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }

    /// Process exit code: 2 for input/validation problems, 3 for numerical
    /// non-convergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Classical(sdma_core::ClassicalError::NonConvergence(_)) => {
                EXIT_NONCONVERGENCE
            }
            CliError::Bayes(sdma_core::BayesError::QuadratureNonConvergence { .. }) => {
                EXIT_NONCONVERGENCE
            }
            _ => EXIT_VALIDATION,
        }
    }
}
