use num_complex::Complex64;
use thiserror::Error;

/// Everything that can go wrong inside the solver stack.
#[derive(Debug, Clone, Error)]
pub enum FloquetError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("cut angle {0} has cos(theta) = 0; cuts must not be vertical")]
    VerticalCut(f64),

    #[error("square-root branch point hit at p = {0}")]
    SingularPoint(Complex64),

    #[error("near-pole system at z = {z} (pivot {pivot:.3e})")]
    NearPole { z: Complex64, pivot: f64 },

    #[error("degenerate case: {0}")]
    Degenerate(String),

    #[error("iteration did not converge: {0}")]
    NoConvergence(String),

    #[error("contour passes within {distance:.3e} of a singular point near {point}")]
    ContourTooClose { point: Complex64, distance: f64 },

    #[error("phase tracking ambiguous near {0}")]
    PhaseAmbiguity(Complex64),

    #[error("newton diverged: {0}")]
    Divergence(String),

    #[error("sheet mismatch: {0}")]
    SheetMismatch(String),

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("time stepping unstable: {0}")]
    Unstable(String),

    #[error("no zero found: {0}")]
    NotFound(String),

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for FloquetError {
    fn from(e: std::io::Error) -> Self {
        FloquetError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, FloquetError>;
