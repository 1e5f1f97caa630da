use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("ghost layer of field is not populated")]
    GhostsNotFilled,

    #[error("unsupported order {order}: {reason}")]
    UnsupportedOrder { order: usize, reason: &'static str },

    #[error("fine grid has {fine} cells, which is not 3^k times the coarse {coarse}")]
    NotNested { fine: usize, coarse: usize },

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("invalid boundary conditions: {0}")]
    InvalidBoundary(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The solver produced a NaN or infinity.
    #[error("non-finite value in field {field} at cell {cell:?} (t = {t})")]
    NonFinite { field: usize, cell: Vec<usize>, t: f64 },

    /// A convergence-study row failed.
    #[error("run with m = {m} failed: {source}")]
    Study {
        m: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("config error at line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}
