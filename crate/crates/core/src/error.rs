use num_complex::Complex64;
use thiserror::Error;

/// Failures reported by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("polynomial must have degree at least one")]
    DegreeTooLow,
    #[error("non-finite coefficient or argument")]
    NonFinite,
    #[error("root finder did not converge after {iterations} iterations (best residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("normalization violated: {0}")]
    Normalization(String),
    #[error("not univalent: f' vanishes at {witness} (|ζ| = {:.6})", witness.norm())]
    CriticalPoint { witness: Complex64 },
    #[error("not univalent: boundary self-intersects between θ = {theta1:.6} and θ = {theta2:.6}")]
    SelfIntersection { theta1: f64, theta2: f64 },
    #[error("point {z} is outside the closure of the domain")]
    OutsideClosure { z: Complex64 },
    #[error("point {z} is not in the exterior of the domain")]
    NotExterior { z: Complex64 },
    #[error("point {z} is not in the interior of the domain")]
    NotInterior { z: Complex64 },
    #[error("point {z} is outside the annulus of analyticity (|ζ| = {modulus:.6}, allowed half-width {delta:.6})")]
    OutsideAnnulus { z: Complex64, modulus: f64, delta: f64 },
    #[error("point {z} is within {distance:e} of the boundary")]
    NearBoundary { z: Complex64, distance: f64 },
    #[error("mixed interior/exterior pair is only handled by the area-integral oracle")]
    MixedPair,
    #[error("coincident points in four-variable transform")]
    CoincidentPoints,
    #[error("pole of the formula: {0}")]
    Pole(String),
    #[error("series diverges at {z} (tail ratio {ratio:.4})")]
    Divergent { z: Complex64, ratio: f64 },
    #[error("not finitely determined at truncation order {order}")]
    NotFinitelyDetermined { order: usize },
    #[error("nullspace of dimension {dim} at order {order}; reconstruction is ambiguous")]
    AmbiguousNullspace { order: usize, dim: usize },
    #[error("coefficient matrix is not positive definite (pivot {pivot:e} at index {index})")]
    Indefinite { index: usize, pivot: f64 },
    #[error("resultant undefined: {0}")]
    Undefined(String),
    #[error("root multiplicities cannot be resolved (roots {a} and {b} at distance {distance:e})")]
    Multiplicity { a: Complex64, b: Complex64, distance: f64 },
    #[error("degenerate degree collapse: {0}")]
    DegreeCollapse(String),
    #[error("kernel has a zero or pole at ({0}, {1})")]
    KernelSingular(String, String),
    #[error("Jacobian of the moment map is singular (det {det:e}); the resultant factor Res(f', f'*) vanishes")]
    SingularJacobian { det: f64 },
    #[error("Newton inversion stalled with moment residual {residual:e} after {iterations} iterations")]
    InversionFailed { iterations: usize, residual: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("schema violation: {0}")]
    Schema(String),
}

pub type Result<T> = std::result::Result<T, Error>;
