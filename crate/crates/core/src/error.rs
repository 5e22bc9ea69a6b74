use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
#[non_exhaustive]
pub enum Error {
    // --- model construction ---
    #[error("configuration matrix is empty")]
    EmptyMatrix,
    #[error("configuration matrix has a zero {kind} at index {index}")]
    ZeroRowOrColumn { kind: &'static str, index: usize },
    #[error("the all-ones vector is not in the row span of the matrix")]
    OnesNotInRowspan,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("odds must be strictly positive (entry {0})")]
    NonPositiveOdds(usize),
    #[error("degree c'b = {0} is not a nonnegative integer")]
    NonIntegralDegree(String),

    // --- fiber oracle ---
    #[error("fiber exceeds the enumeration cap of {cap} elements")]
    FiberTooLarge { cap: u64 },
    #[error("table does not lie in the fiber of the given statistics")]
    NotInFiber,
    #[error("fiber is empty: statistics lie outside the semigroup")]
    EmptyFiber,

    // --- maximum likelihood ---
    #[error("marginal sums disagree with the stated total")]
    MarginalMismatch,
    #[error("total count is zero")]
    ZeroTotal,
    #[error("clique marginals are inconsistent: {0}")]
    InconsistentMarginals(String),
    #[error("separator marginal is zero while an incident clique marginal is positive")]
    ZeroSeparatorWithPositiveClique,
    #[error("denominator is zero in the closed-form estimate")]
    ZeroDenominator,
    #[error("configuration matrix has a negative entry; scaling requires A >= 0")]
    NegativeEntryInA,
    #[error("invalid decomposable structure: {0}")]
    InvalidStructure(String),

    // --- sampling ---
    #[error("estimator is not compatible with the model: {0}")]
    IncompatibleEstimator(String),
    #[error("estimator failed at an intermediate state: {0}")]
    EstimatorFailed(String),
    #[error("all transition probabilities vanished at an intermediate state")]
    DegenerateState,
    #[error("gave up after {0} discarded sample paths")]
    RetriesExhausted(u32),
    #[error("sufficient statistics are invalid: {0}")]
    InvalidB(String),
    #[error("sample path is inconsistent with the statistics")]
    InconsistentPath,
    #[error("move is not in the kernel of the configuration matrix")]
    MoveNotInKernel,

    // --- analysis ---
    #[error("expected cell value must be positive (entry {0})")]
    NonPositiveExpected(usize),
    #[error("input sequence is empty")]
    EmptyInput,
    #[error("sequence is constant; autocorrelation is undefined")]
    ConstantSequence,

    // --- presets / CLI surfaces ---
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
    #[error("no Markov basis available for this model")]
    NoBasisAvailable,
    #[error("table files do not match the model: {0}")]
    ModelMismatch(String),
    #[error("malformed input: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
