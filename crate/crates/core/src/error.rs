use thiserror::Error;

/// Unified error type for the whole crate.
///
/// Numerical verdicts (diverged, oscillating, inconclusive) are not errors;
/// they are ordinary values of [`crate::limits::LimitVerdict`]. Errors are
/// reserved for malformed inputs, violated preconditions, and internal
/// consistency failures that make a result meaningless.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A distance table or oracle violated a metric axiom. The message names
    /// the offending point pair or triple.
    #[error("metric axiom violation: {0}")]
    MetricAxiomViolation(String),

    /// The operation needs a capability (sampler, chart, ...) the space
    /// handle does not provide.
    #[error("capability missing: {0}")]
    CapabilityMissing(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("invalid normalizing sequence: {0}")]
    InvalidNormalizingSequence(String),

    /// The zero-distance relation failed near-transitivity, or a class map
    /// could not be resolved consistently.
    #[error("quotient inconsistency: {0}")]
    QuotientInconsistency(String),

    /// A quantity that must converge by construction did not.
    #[error("numerical anomaly: {0}")]
    NumericalAnomaly(String),

    /// No shadowing sequence exists in the target subspace. `floor` is the
    /// observed lower bound on d(z_n, Y)/r_n over the schedule tail.
    #[error("transfer failure for {member}: distance ratio bounded below by {floor:.6}")]
    TransferFailure { member: String, floor: f64 },

    /// Too few usable sphere samples to run a profile in either direction.
    #[error("insufficient geometry: {0}")]
    InsufficientGeometry(String),

    #[error("size limit exceeded: {0}")]
    SizeLimit(String),

    #[error("config error in {path}: {detail}")]
    Config { path: String, detail: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// CLI exit code class. Input and validation problems exit 3; everything
    /// else that reaches the top level is also a hard error (3) since
    /// inconclusive outcomes travel as verdicts, not errors.
    pub fn exit_code(&self) -> i32 {
        3
    }
}
