use thiserror::Error;

pub type Result<T> = std::result::Result<T, MorseError>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MorseError {
    #[error("constraint gradient too small ({norm:.3e}) at the requested point")]
    Regularity { norm: f64 },

    #[error("projection onto the constraint set failed (residual {residual:.3e})")]
    ProjectionDivergence { residual: f64 },

    #[error("point is not critical: gradient norm {grad_norm:.3e}")]
    NotCritical { grad_norm: f64 },

    #[error("field is not antipodally invariant: |f(p) - f(-p)| = {defect:.3e}")]
    NotInvariant { defect: f64 },

    #[error("adaptive step collapsed to {h:.3e} at s = {s}")]
    StepCollapse { s: f64, h: f64 },

    #[error("trajectory left the domain at s = {s}")]
    EscapedDomain { s: f64 },

    #[error("decay fit needs at least {needed} tail samples, got {got}")]
    InsufficientTail { needed: usize, got: usize },

    #[error("critical point {label} is degenerate")]
    DegenerateCritical { label: String },

    #[error("trajectory left the normal chart (|y| = {norm:.3e})")]
    ChartOverflow { norm: f64 },

    #[error("count {count} from {source_label} to {target} does not split into orbits")]
    OddOrbit {
        source_label: String,
        target: String,
        count: usize,
    },

    #[error("no count supplied for the pair {source_label} -> {target}")]
    MissingPair { source_label: String, target: String },

    #[error("boundary squared is nonzero in degree {degree}")]
    NotAComplex { degree: usize },

    #[error("the zero class has no spectral number")]
    ZeroClass,

    #[error("chain identity fails in degree {degree}")]
    ChainIdentityFailure { degree: usize },

    #[error("energy bound violated: {detail}")]
    BoundViolation { detail: String },

    #[error("sequence is not Cauchy at member {member}: step {step:.3e} exceeds bound {bound:.3e}")]
    NotCauchy { member: usize, step: f64, bound: f64 },

    #[error("grid too coarse: {detail}")]
    GridTooCoarse { detail: String },

    #[error("singular value {value:.3e} within a factor 10 of threshold {threshold:.3e}")]
    ThresholdAmbiguity { value: f64, threshold: f64 },

    #[error("T * max|eigenvalue| = {product:.1} exceeds the overflow guard")]
    IllConditioned { product: f64 },

    #[error("non-generic data: {0}")]
    NonGeneric(String),

    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },

    #[error("unknown fixture `{0}`")]
    UnknownFixture(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for MorseError {
    fn from(e: std::io::Error) -> Self {
        MorseError::Io(e.to_string())
    }
}
