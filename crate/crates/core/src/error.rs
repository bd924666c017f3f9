use thiserror::Error;

/// Failure modes shared by every module. The `Display` text starts with a
/// stable kebab-case code so reports and scripts can match on it.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("grid-underresolved: {0}")]
    GridUnderresolved(String),
    #[error("field-not-compactly-supported: boundary layer sup {boundary:.3e} vs max {max:.3e}")]
    FieldNotCompactlySupported { boundary: f64, max: f64 },
    #[error("support-margin-too-small: margin {margin:.4} below kernel radius {radius:.4}")]
    SupportMarginTooSmall { margin: f64, radius: f64 },
    #[error("singular-point-outside-domain: {0}")]
    SingularPointOutsideDomain(String),
    #[error("domains-not-nested: {0}")]
    DomainsNotNested(String),
    #[error("zero-frequency")]
    ZeroFrequency,
    #[error("frame-radical-negative: h|xi| = {0:.6} >= 2")]
    FrameRadicalNegative(f64),
    #[error("linear-solve-failed: relative residual {residual:.3e} after {iterations} iterations")]
    LinearSolveFailed { residual: f64, iterations: usize },
    #[error("discrete-wellposedness-violated: {0}")]
    DiscreteWellposednessViolated(String),
    #[error("basis-underresolved: mode {mode} has {nodes:.1} nodes per oscillation")]
    BasisUnderresolved { mode: usize, nodes: f64 },
    #[error("gauge-not-boundary-vanishing: boundary sup {0:.3e}")]
    GaugeNotBoundaryVanishing(f64),
    #[error("coefficients-differ-outside-omega: sup difference {0:.3e}")]
    CoefficientsDifferOutsideOmega(f64),
    #[error("overflow-guard: |Re exponent| reaches {0:.2} > 60")]
    OverflowGuard(f64),
    #[error("frame-mismatch")]
    FrameMismatch,
    #[error("magnetic-parts-differ: sup difference {0:.3e}")]
    MagneticPartsDiffer(f64),
    #[error("field-not-closed: curl sup {curl:.3e} exceeds {tol:.3e}")]
    FieldNotClosed { curl: f64, tol: f64 },
    #[error("picard-diverged: step norms {0:?}")]
    PicardDiverged(Vec<f64>),
    #[error("zero-test-function")]
    ZeroTestFunction,
    #[error("coefficient-too-large: sup {0:.3} exceeds 4")]
    CoefficientTooLarge(f64),
    #[error("shape-mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid-argument: {0}")]
    InvalidArgument(String),
    #[error("format: {0}")]
    Format(String),
    #[error("io: {0}")]
    Io(String),
}

impl Error {
    /// The stable code prefix of the message.
    pub fn code(&self) -> String {
        let s = self.to_string();
        s.split(':').next().unwrap_or("").to_string()
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
