use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("q={q} and r={r} are not coprime (gcd {gcd})")]
    NotCoprime { q: u32, r: u32, gcd: u32 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("trajectory became non-finite at t={time}")]
    NonFinite { time: f64 },

    #[error("probability ledger broken at t={time}: norm {norm} + absorbed {absorbed} deviates from 1 by {deviation:e}")]
    LedgerBroken {
        time: f64,
        norm: f64,
        absorbed: f64,
        deviation: f64,
    },

    #[error("wavepacket overlaps the absorber or grid edge: {0}")]
    PacketOutsideGrid(String),

    #[error("not enough samples: got {got}, need at least {need}")]
    TooFewSamples { got: usize, need: usize },

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("non-positive survival value {value} at t={time}")]
    NonPositive { time: f64, value: f64 },

    #[error("series did not converge after {terms} terms")]
    NoConvergence { terms: usize },

    #[error("fit did not converge after {iterations} iterations (best residual {residual:e})")]
    FitNotConverged { iterations: usize, residual: f64 },
}

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
