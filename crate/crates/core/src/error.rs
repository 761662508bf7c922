use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("{what} is not positive definite")]
    NotPositiveDefinite { what: &'static str },

    #[error("energy {energy} is not above the gap constant a = {gap}")]
    EnergyBelowGap { energy: f64, gap: f64 },

    #[error("min-max hypothesis violated (smallest Q_E eigenvalue {q_min:e} at E = {probe})")]
    HypothesisViolated { q_min: f64, probe: f64 },

    #[error("no gap eigenvalue bracket for level {k} in ({lo}, {hi})")]
    NoBracket { k: usize, lo: f64, hi: f64 },

    #[error("no root of the scalar functional above {lo}")]
    NoRoot { lo: f64 },

    #[error("level index {k} out of range 1..={dim}")]
    LevelOutOfRange { k: usize, dim: usize },

    #[error("zero vector has no Rayleigh quotient")]
    ZeroVector,

    #[error("assembly failed: {0}")]
    Assembly(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
