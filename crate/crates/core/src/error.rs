use std::path::PathBuf;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("under-determined fit: {samples} usable samples for {params} parameters")]
    UnderDetermined { samples: usize, params: usize },

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("no real root for qp {qp}: vertex at ln(rate) = {vertex_log_rate}, qp = {vertex_qp}")]
    NoRealRoot {
        qp: f64,
        vertex_log_rate: f64,
        vertex_qp: f64,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("tiling error: {0}")]
    Tiling(String),

    #[error("value out of range: {0}")]
    Range(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("degenerate labels: parameter {index} has zero variance")]
    DegenerateLabels { index: usize },

    #[error("training diverged at epoch {epoch}: {detail}")]
    Diverged { epoch: usize, detail: String },

    #[error("unsupported image: {0}")]
    Unsupported(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
