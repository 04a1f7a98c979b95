use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("quadrature did not converge within a budget of {budget} nodes")]
    QuadratureNonconvergence { budget: usize },
    #[error("degenerate form: density {value} at interior point ({x}, {y})")]
    DegenerateForm { x: f64, y: f64, value: f64 },
    #[error("invalid form: {0}")]
    InvalidForm(String),
    #[error("trajectory left the disk: |z| = {radius}")]
    Escape { radius: f64 },
    #[error("map does not fix the origin: |phi(0)| = {0}")]
    NotFixingOrigin(f64),
    #[error("angular unwrap failed near (r, theta) = ({r}, {theta}): increment {step} exceeds pi")]
    UnwrapFailure { r: f64, theta: f64, step: f64 },
    #[error("fixed-point mismatch: |phi(z0) - z0| = {0}")]
    FixedPointMismatch(f64),
    #[error("map is not radially monotone: D1R = {value} at (r, theta) = ({r}, {theta})")]
    NotMonotone { r: f64, theta: f64, value: f64 },
    #[error("1-form is not closed: curl residual {0}")]
    NonClosed(f64),
    #[error("hypothesis violated: {0}")]
    HypothesisViolation(String),
    #[error("parameter out of range: {0}")]
    ParameterOutOfRange(String),
    #[error("packing stalled at density {reached} below target {target}")]
    PackingTimeout { reached: f64, target: f64 },
    #[error("geometry violation: {0}")]
    GeometryViolation(String),
    #[error("nonpositive return time: min tau = {0}")]
    NonpositiveReturnTime(f64),
}
