use thiserror::Error;

/// Errors shared across the crate.
///
/// Width mismatches between bit vectors of *known* equal width are treated as
/// programming errors and panic instead; `Error` covers fallible inputs:
/// user-supplied parameters, size caps and inconsistent configurations.
#[derive(Debug, Error)]
pub enum Error {
    #[error("bit-vector width {width} out of range (1..={max})")]
    InvalidWidth { width: u32, max: u32 },

    #[error("value {bits:#x} does not fit in {width} bits")]
    ValueOutOfRange { bits: u64, width: u32 },

    #[error("truth table with {k} input bits exceeds the k <= {max} cap")]
    TableTooLarge { k: u32, max: u32 },

    #[error("solution space has 2^{nullity} elements, above the enumeration cap {cap}")]
    EnumerationCap { nullity: u32, cap: u64 },

    #[error(
        "candidate sets still above cap {cap} after {retries} retries \
         (p reached {p_final}); per-component nullity {component_nullity:?}"
    )]
    AttackCap {
        cap: u64,
        retries: u32,
        p_final: u32,
        component_nullity: Vec<u32>,
    },

    #[error("S-box is not a permutation of 0..16")]
    NonBijectiveSbox,

    #[error("candidate set is empty; the trivial structure guarantees at least one entry")]
    EmptyCandidates,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
