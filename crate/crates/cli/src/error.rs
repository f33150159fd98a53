use std::path::Path;

use thiserror::Error;
use vprect::metrics::MetricsError;
use vprect::rectify::RectifyError;
use vprect::synth::SynthError;
use vprect::DetectError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: line {line}: {msg}")]
    Parse { path: String, line: u64, msg: String },
    #[error("unsupported image: {0}")]
    UnsupportedImage(String),
    #[error("cannot write output: {0}")]
    Output(String),
    #[error("no vanishing-point pair (failed gate: {gate}): {0}", gate = .0.gate())]
    Detect(#[from] DetectError),
    #[error("rectification failed: {0}")]
    Rectify(#[from] RectifyError),
    #[error("cannot fit warp canvas: {0}")]
    Canvas(String),
    #[error("{0}")]
    Synth(#[from] SynthError),
    #[error("evaluation failed: {0}")]
    Metrics(#[from] MetricsError),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    pub fn parse(path: &Path, line: u64, msg: String) -> Self {
        CliError::Parse {
            path: path.display().to_string(),
            line,
            msg,
        }
    }

    /// 0 success, 1 input/usage error, 2 algorithmic failure.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Detect(DetectError::InvalidConfig(_)) => 1,
            CliError::Detect(_) | CliError::Rectify(_) | CliError::Canvas(_) => 2,
            _ => 1,
        }
    }
}
