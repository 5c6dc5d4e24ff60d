use thiserror::Error;

/// Errors surfaced by the beamforming library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("QoS targets are infeasible: {0}")]
    QosInfeasible(String),

    #[error("degenerate channel: {0}")]
    DegenerateChannel(String),

    #[error("solver failure: {0}")]
    NumericalFailure(String),

    #[error("no feasible randomized draw found in {0} trials")]
    RandomizationFailed(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
