use thiserror::Error;

use crate::linalg::SolveError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid or inconsistent input description.
    #[error("configuration: {0}")]
    Config(String),

    #[error("degenerate PDN spec: layer {layer} produces no stripes inside the die")]
    DegenerateSpec { layer: String },

    #[error("geometry invariant violated: {0}")]
    Geometry(String),

    #[error("source {index} at ({x_um}, {y_um}) um is not electrically connected to any pad")]
    Connectivity { index: usize, x_um: f64, y_um: f64 },

    #[error("net {net} is degenerate: {pins} pin(s), need at least 2")]
    DegenerateNet { net: String, pins: usize },

    #[error("window grid does not cover the die")]
    Coverage,

    #[error("layer stacks differ: {0}")]
    LayerMismatch(String),

    #[error(transparent)]
    Solve(#[from] SolveError),

    /// The baseline handed to synthesis is not power-integrity clean.
    #[error("baseline fails verification: {ir_violations} IR violation(s), {em_violations} EM violation(s), max drop {max_drop_mv:.3} mV")]
    Precondition {
        ir_violations: usize,
        em_violations: usize,
        max_drop_mv: f64,
    },

    #[error("{0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// Short machine-parsable category used as the stderr prefix by the CLI.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Config(_) | Error::DegenerateSpec { .. } | Error::DegenerateNet { .. } => "config",
            Error::Geometry(_) => "geometry",
            Error::Connectivity { .. } => "connectivity",
            Error::Coverage => "coverage",
            Error::LayerMismatch(_) => "layers",
            Error::Solve(_) => "solver",
            Error::Precondition { .. } => "precondition",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }
}

fn at(path: &std::path::Path, e: std::io::Error) -> Error {
    Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

/// `fs::read_to_string` with the path in the error.
pub(crate) fn read_text(path: &std::path::Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| at(path, e))
}

pub(crate) fn read_bytes(path: &std::path::Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| at(path, e))
}
