use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("hazard calibration did not converge after {steps} bisection steps (last rate {last_rate:.4}, target {target:.4})")]
    Calibration {
        steps: usize,
        last_rate: f64,
        target: f64,
    },

    #[error("horizon {horizon}h outside data range (0, {max}h)")]
    Horizon { horizon: u64, max: u64 },

    #[error("training failed: {0}")]
    Training(String),

    #[error("feature schema mismatch: {0}")]
    Schema(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("both classes required, got {positives} positives and {negatives} negatives")]
    SingleClass { positives: usize, negatives: usize },

    #[error("empty grid: {0}")]
    EmptyGrid(String),

    #[error("grid cell ntree={ntree} mtry={mtry} samp={samp}: {source}")]
    Cell {
        ntree: usize,
        mtry: usize,
        samp: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{0}")]
    Invalid(String),

    #[error("malformed input: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
