use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid modulus {0}: counters need at least two values")]
    InvalidModulus(u64),

    #[error("modulus {view} does not divide counter modulus {modulus}")]
    NotADivisor { view: u64, modulus: u64 },

    #[error("k < 3: got {0} blocks")]
    TooFewBlocks(usize),

    #[error("resilience F = {target} must be below (f+1)*m = {limit}")]
    ResilienceTooHigh { target: u64, limit: u64 },

    #[error("resilience F = {target} must be below N/3 for N = {nodes}")]
    PhaseKingResilience { target: u64, nodes: u64 },

    #[error("inner resilience f = {f} must be below n/2 for n = {n}")]
    InnerResilience { n: u64, f: u64 },

    #[error("output modulus C = {0} must exceed 1")]
    OutputModulus(u64),

    #[error("inner modulus {inner} is not a multiple of 3(F+2)(2m)^k = {required}")]
    InnerModulus { inner: u64, required: u64 },

    #[error("value {value} outside [0, {bound})")]
    Domain { value: u64, bound: u64 },

    #[error("composition error: {0}")]
    Composition(String),

    #[error("sampling guard violated: F = {faults} must be below N/(3+gamma) = {limit:.3}")]
    SamplingGuard { faults: u64, limit: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("unknown adversary kind `{0}`")]
    UnknownAdversary(String),

    #[error("exhaustive enumeration of {size} joint states exceeds cap {cap}")]
    EnumerationCap { size: u128, cap: u128 },
}
