use thiserror::Error;

/// Errors raised across the crate. Variant names follow the operation
/// contracts; parse errors carry line/column positions.
#[derive(Debug, Error)]
pub enum Error {
    #[error("illegal Tietze move: {0}")]
    IllegalMove(String),
    #[error("graph is not connected")]
    Disconnected,
    #[error("generator name clash: {0}")]
    NameClash(String),
    #[error("edge sequence is not a loop: {0}")]
    NotALoop(String),
    #[error("edge lies in the spanning tree")]
    EdgeInTree,
    #[error("no valid extension to a signed permutation: {0}")]
    NoValidExtension(String),
    #[error("order exceeds bound {0}")]
    OrderExceedsBound(usize),
    #[error("closure exceeds bound {0}")]
    ClosureExceedsBound(usize),
    #[error("quotient map is not surjective")]
    NotSurjective,
    #[error("syllable word is not reduced")]
    NotReduced,
    #[error("exponent vector is not primitive (gcd {0})")]
    NotPrimitive(String),
    #[error("associated subgroup orbit is not a direct summand; finite-index saturation of index {0} required")]
    SaturationRequired(String),
    #[error("generator {0} occurs with mixed exponent signs")]
    MixedSigns(String),
    #[error("extensions do not commute: {0}")]
    ExtensionsDoNotCommute(String),
    #[error("invalid ranks: {0}")]
    InvalidRanks(String),
    #[error("tree diameter exceeds 4")]
    TreeDiameter,
    #[error("syntax error at line {line}, column {col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("semantic error at line {line}: {msg}")]
    Semantic { line: usize, msg: String },
    #[error("certificate check failed at step {step}: {msg}")]
    CertificateStep { step: usize, msg: String },
    #[error("{0}")]
    Other(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Exit-code class: 2 for mathematical/precondition rejections,
    /// 3 for parse errors, 1 for certificate failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Syntax { .. } | Error::Semantic { .. } | Error::Io(_) => 3,
            Error::CertificateStep { .. } => 1,
            _ => 2,
        }
    }
}
