use crate::protocol::{RunOutcome, SiftedTallies};

pub type Result<T, E = QssError> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum QssError {
    #[error("{name} = {value} is outside its valid domain ({expected})")]
    Domain {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },

    /// Q_mu = 0 leaves error rates and the coin imbalance undefined.
    #[error("gain is zero; error rates are undefined")]
    DegenerateGain,

    /// The coin imbalance exceeded 1/2: the intensity is too large for the gain.
    #[error("coin imbalance {delta} exceeds 0.5 (mu = {mu}, Q = {gain})")]
    ImbalanceOutOfRange { delta: f64, mu: f64, gain: f64 },

    #[error("numerical degeneracy in {context}: {detail}")]
    Numerical {
        context: &'static str,
        detail: String,
    },

    #[error("round cap of {cap} reached before thresholds were met")]
    CapExceeded { cap: u64, partial: Box<RunOutcome> },

    #[error("record {index} has no detection; nothing to flip")]
    NoDetection { index: u64 },

    #[error("key lengths differ: {a}, {b}, {c}")]
    LengthMismatch { a: usize, b: usize, c: usize },

    #[error("line {line}: {message}")]
    MalformedLine { line: u64, message: String },

    #[error("line {line}: duplicate phase triple {triple:?}")]
    DuplicateTriple { line: u64, triple: [u8; 3] },

    #[error("phase triple {triple:?}: {reason}")]
    InconsistentPhase {
        triple: [u8; 3],
        reason: &'static str,
    },

    #[error("sifted set {set} is empty")]
    EmptySet { set: &'static str },

    #[error("expected {what} count {value} is below one")]
    ZeroCount { what: &'static str, value: f64 },

    #[error("every evaluated parameter point aborted (zero key length)")]
    AllAbort,

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl QssError {
    pub(crate) fn domain(name: &'static str, value: f64, expected: &'static str) -> Self {
        QssError::Domain {
            name,
            value,
            expected,
        }
    }

    /// Partial tallies carried by a cap-exceeded error.
    pub fn partial_tallies(&self) -> Option<&SiftedTallies> {
        match self {
            QssError::CapExceeded { partial, .. } => Some(&partial.tallies),
            _ => None,
        }
    }
}
