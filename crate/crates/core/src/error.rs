use std::path::PathBuf;

use thiserror::Error;

use crate::scoring::Parameter;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("format error: pixel {pixel_index} has value {value}, expected a class code in 0..=6")]
    Format { pixel_index: usize, value: u8 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("manifest error: {0}")]
    Manifest(String),

    #[error("shape error: {0}")]
    Shape(String),

    #[error("insufficient tissue: {parameter} has a zero denominator ({detail})")]
    InsufficientTissue {
        parameter: Parameter,
        detail: &'static str,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("input error: {0}")]
    Input(String),

    #[error("statistics error: {0}")]
    Statistics(String),

    #[error("degenerate agreement: expected agreement is 1, kappa is undefined")]
    DegenerateAgreement,

    #[error("Cox fit did not converge after {iterations} iterations: {diagnostic}")]
    Divergence { iterations: usize, diagnostic: String },

    #[error("ill-conditioned covariates: {0}")]
    Conditioning(String),

    #[error("capacity error: {0}")]
    Capacity(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by the inputs themselves (bad files, bad
    /// configuration), as opposed to a computation that could not complete.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Dimension(_)
                | Error::Format { .. }
                | Error::Parse(_)
                | Error::Manifest(_)
                | Error::Shape(_)
                | Error::Config(_)
                | Error::Input(_)
                | Error::Io { .. }
        )
    }
}
