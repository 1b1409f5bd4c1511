use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("lattice too large: {steps} steps exceeds cap of {cap}")]
    LatticeTooLarge { steps: usize, cap: usize },

    #[error("invalid lattice: {0}")]
    InvalidLattice(String),

    #[error("time {0} not on grid")]
    TimeNotOnGrid(f64),

    #[error("empty sequence of times")]
    EmptyTimes,

    #[error("lattice mismatch")]
    LatticeMismatch,

    #[error("grid mismatch: {0} vs {1} grid points")]
    GridMismatch(usize, usize),

    #[error("information tree mismatch")]
    TreeMismatch,

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("enumeration too large: {count:.3e} candidates exceeds cap of {cap:.0e}")]
    EnumerationTooLarge { count: f64, cap: f64 },

    #[error("pair not stochastically ordered")]
    PairNotOrdered,

    #[error("exact intractable, use MonteCarlo (n = {n} exceeds exact cap {cap})")]
    ExactIntractable { n: usize, cap: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
