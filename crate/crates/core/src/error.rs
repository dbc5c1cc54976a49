use num_complex::Complex64;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("wavenumber must be positive, got {0}")]
    NonPositiveWavenumber(f64),

    #[error("wavenumber {0} is too close to the origin of the complex plane")]
    WavenumberAtOrigin(Complex64),

    #[error("invalid potential: {0}")]
    InvalidPotential(String),

    #[error("invalid medium: {0}")]
    InvalidMedium(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Sampled potential is too coarse for the requested wavenumber.
    #[error("sample spacing {dx} exceeds 1/{min_samples} of the local wavelength {wavelength}")]
    GridTooCoarse {
        dx: f64,
        wavelength: f64,
        min_samples: f64,
    },

    /// M22 vanishes, so the reflection and transmission amplitudes diverge.
    #[error("spectral singularity: |M22| = {m22_abs:e} at k = {k}")]
    SpectralSingularity { k: Complex64, m22_abs: f64 },

    /// Threshold gain is infinite (unit refractive index, zero reflectivity).
    #[error("infinite threshold gain: reflectivity vanishes for eta = {eta}")]
    InfiniteThreshold { eta: f64 },

    #[error("matrix is defective (eigenvector condition number {condition:e})")]
    Defective { condition: f64 },

    #[error("spectrum is not real: eigenvalue {eigenvalue}")]
    ComplexSpectrum { eigenvalue: Complex64 },

    #[error("metric operator is not positive definite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositive { min_eigenvalue: f64 },

    #[error("antilinear operator does not square to the identity (residual {residual:e})")]
    NotInvolution { residual: f64 },

    #[error("grid is not symmetric about the origin")]
    AsymmetricGrid,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("solver did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("argument principle counts {winding} zeros but refinement found {found}")]
    WindingMismatch { winding: i64, found: usize },

    #[error("zero of the function lies on the contour near {0}")]
    ZeroOnContour(Complex64),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}
