use alloc::string::String;

/// Errors raised by the numerical kernels.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("modulus {0} is not admissible: primitive characters exist only for q not congruent to 2 mod 4")]
    Inadmissible(u64),
    #[error("coprimality condition violated: {0}")]
    NotCoprime(String),
    #[error("character {index} mod {modulus} is not primitive")]
    NotPrimitive { modulus: u64, index: usize },
    #[error("root number condition violated: {0}")]
    RootNumber(String),
    #[error("eigenvalue table too short: need lambda(n) up to {needed}, have {available}")]
    TableTooShort { needed: u64, available: u64 },
    #[error("eigenvalue data failed validation: {0}")]
    Validation(String),
    #[error("quadrature did not converge: achieved error {achieved:e}, requested {requested:e}")]
    Quadrature { achieved: f64, requested: f64 },
    #[error("work budget exceeded: {0}")]
    Budget(String),
    #[error("arithmetic overflow: {0}")]
    Overflow(String),
    #[error("unsupported kernel: {0}")]
    UnsupportedKernel(String),
    #[error("tail certificate failed: {0}")]
    TailCertificate(String),
}

pub type Result<T> = core::result::Result<T, Error>;

macro_rules! invalid {
    ($($arg:tt)*) => {
        $crate::Error::InvalidInput(alloc::format!($($arg)*))
    };
}
pub(crate) use invalid;
