use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("unknown model '{0}' (expected h2, h3, h4, h5 or h2xh2)")]
    UnknownModel(String),
    #[error("hyperbolic dimension {0} unsupported (2..=5)")]
    UnsupportedDimension(usize),
    #[error("expected {expected} ambient coordinates, got {got}")]
    WrongLength { expected: usize, got: usize },
    #[error("point is off the hyperboloid (residual {residual:e})")]
    NotOnHyperboloid { residual: f64 },
    #[error("vector is not tangent at the base point (residual {residual:e})")]
    NotTangent { residual: f64 },
    #[error("boundary point is not a normalised null vector (residual {residual:e})")]
    NotOnBoundary { residual: f64 },
    #[error("zero or non-finite boundary direction")]
    DegenerateDirection,
    #[error("isometry does not preserve the Minkowski form (residual {residual:e})")]
    NotAnIsometry { residual: f64 },
    #[error("isometry has {got} factor blocks, model needs {expected}")]
    IsometryShape { expected: usize, got: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeasureError {
    #[error("grid resolution {0} is below the minimum of 16")]
    ResolutionTooSmall(usize),
    #[error("quadrature scheme {scheme} is not available for {model}")]
    SchemeUnavailable { scheme: String, model: String },
    #[error("measures do not share one atom set")]
    MismatchedAtoms,
    #[error("coefficient count {coeffs} does not match measure count {measures}")]
    CountMismatch { coeffs: usize, measures: usize },
    #[error("squared coefficients sum to {0}, expected 1")]
    NotUnitCoefficients(f64),
    #[error("empty combination")]
    Empty,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("Newton iteration did not converge in {iterations} steps (gradient norm {gradient_norm:e})")]
    NonConvergence { iterations: usize, gradient_norm: f64 },
    #[error("degenerate Hessian: det K = {det:e}")]
    DegenerateHessian { det: f64 },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StraightenError {
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("simplex point has {got} coordinates, vertex tuple has {expected} vertices")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid spherical simplex point: {0}")]
    InvalidSimplexPoint(String),
    #[error("operation needs {needed}, got {got}")]
    Degree { needed: String, got: usize },
    #[error("face index {index} out of range for a {degree}-simplex")]
    FaceIndex { index: usize, degree: usize },
    #[error("homotopy parameter {0} outside [0, 1]")]
    HomotopyParameter(f64),
}
