use num_complex::Complex64;
use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed profile config: {0}")]
    Parse(String),

    #[error("profile pieces do not partition [0,1]: {0}")]
    Domain(String),

    #[error("invalid profile: {0}")]
    InvalidProfile(String),

    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("operation requires {expected} geometry")]
    Geometry { expected: &'static str },

    #[error("integrand with 1/x weight is not integrable: first component is {value} at x = 0")]
    SingularIntegrand { value: Complex64 },

    #[error("|omega| = {modulus} lies outside the small-frequency disk of radius {bound}")]
    OutsideOmegaQ { modulus: f64, bound: f64 },

    #[error("omega = {omega} is on (or too close to) the forbidden set: |zeta| = {zeta_abs:e}")]
    OnLambda { omega: Complex64, zeta_abs: f64 },

    #[error("source term f vanishes identically; the forced base point cannot be built")]
    ZeroSource,

    #[error("pairing k1*c + k2 = {value} is numerically zero; linearization is not invertible")]
    NonInvertible { value: Complex64 },

    #[error("shooting system is singular (condition number {condition:e})")]
    SingularShooting { condition: f64 },

    #[error("fixed-point increments did not contract (last increments {history:?})")]
    NoContraction { history: Vec<f64> },

    #[error("chi2 is not nonnegative and nonzero on the grid: {0}")]
    DegenerateChi2(String),

    #[error("root window does not cover the disk |omega| <= {needed}")]
    Coverage { needed: f64 },

    #[error("spectral function is not real on the real axis (imaginary part {imag:e} at omega = {omega})")]
    NonRealProfile { omega: f64, imag: f64 },

    #[error("numerical invariant violated: {0}")]
    Invariant(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
