use thiserror::Error;

pub type Result<T> = std::result::Result<T, PapmError>;

#[derive(Debug, Error)]
pub enum PapmError {
    #[error("malformed input in `{field}`: {message}")]
    Parse { field: String, message: String },

    #[error("point {index} at ({x}, {y}) lies outside the {width}x{height} image")]
    OutOfExtent {
        index: usize,
        x: f64,
        y: f64,
        width: u32,
        height: u32,
    },

    #[error("image extent must be positive, got `{field}` = {value}")]
    InvalidExtent { field: &'static str, value: i64 },

    #[error("bad map header: {0}")]
    BadHeader(String),

    #[error("map payload holds {found} values, header declares {expected}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("shape mismatch: {left_rows}x{left_cols} vs {right_rows}x{right_cols}")]
    ShapeMismatch {
        left_rows: usize,
        left_cols: usize,
        right_rows: usize,
        right_cols: usize,
    },

    #[error("invalid parameter `{name}`: {message}")]
    InvalidParameter { name: &'static str, message: String },

    #[error("degenerate measure: {0}")]
    DegenerateMeasure(&'static str),

    #[error("exact solver limited to n + m <= {limit}, got n + m = {found}")]
    InstanceTooLarge { limit: usize, found: usize },

    #[error("grid {rows}x{cols} is too small for {tiles}x{tiles} tiles")]
    GridTooSmall { rows: usize, cols: usize, tiles: usize },

    #[error("evaluation needs at least one record")]
    EmptyRecords,

    #[error("optimization diverged at step {step}: loss {loss} exceeds {limit}")]
    Diverged {
        step: usize,
        loss: f64,
        limit: f64,
        trace: Vec<f64>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl PapmError {
    pub(crate) fn invalid(name: &'static str, message: impl Into<String>) -> Self {
        PapmError::InvalidParameter {
            name,
            message: message.into(),
        }
    }
}
