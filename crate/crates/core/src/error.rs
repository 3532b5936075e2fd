use thiserror::Error;

/// Errors raised by the scheduling library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("argument outside domain: {0}")]
    Domain(String),

    #[error("no sub-carrier assigned")]
    NoCarriers,

    #[error("total channel dispersion is zero")]
    ZeroDispersion,

    #[error("infeasible payload: M*C*n = {capacity_bits:.4} bits does not exceed tau = {payload_bits} bits")]
    InfeasiblePayload { capacity_bits: f64, payload_bits: u32 },

    #[error(
        "Lambert W argument -2*pi*exp(-4C'tau'/V) = -exp({log_magnitude:.6}) lies below -1/e; \
         the regime 4C'tau' >> V does not hold"
    )]
    LambertDomain { log_magnitude: f64 },

    #[error("AoI diverges: packet error rate is 1")]
    Divergent,

    #[error("configuration error: {0}")]
    Config(String),

    #[error("enumeration needs {count} schedules, above the bound of {bound}")]
    EnumerationBound { count: u128, bound: u128 },

    #[error("precondition violated: {0}")]
    Precondition(String),
}

pub type Result<T> = std::result::Result<T, Error>;
