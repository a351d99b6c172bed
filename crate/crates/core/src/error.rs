use thiserror::Error;

/// Errors raised by the geometry engine.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum GeomError {
    #[error("axis mismatch: {0}")]
    AxisMismatch(String),

    #[error("singular frame at {0:?}")]
    SingularFrame(Vec<f64>),

    #[error("point {point:?} (stencil reach {reach:e}) leaves the chart box")]
    OutOfDomain { point: Vec<f64>, reach: f64 },

    #[error("metric is not positive definite at {0:?}")]
    DegenerateMetric(Vec<f64>),

    #[error("representation mismatch: {0}")]
    RepMismatch(String),

    #[error("span is not closed under the bracket (residual {0:e})")]
    NotSubalgebra(f64),

    #[error("complement is not ad-invariant (residual {0:e})")]
    NotInvariant(f64),

    #[error("pair is not reductive: {0}")]
    NotReductive(String),

    #[error("connection is not metric (residual {0:e})")]
    NotMetric(f64),

    #[error("tower depth mismatch: need {needed} entries, have {have}")]
    DepthMismatch { needed: usize, have: usize },

    #[error("unsupported total-space field: {0}")]
    UnsupportedFieldKind(String),

    #[error("unknown fixture `{0}`")]
    UnknownFixture(String),

    #[error("bad fixture parameters: {0}")]
    BadParameters(String),

    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, GeomError>;
