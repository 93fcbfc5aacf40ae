//! Numerics for second-harmonic generation transmission eigenvalues on `(0,1)`.

pub mod error;
pub mod forced;
pub mod io;
pub mod medium;
pub mod projection;
pub mod ode;
pub mod quad;
pub mod rootscan;
pub mod spectral;
pub mod xspace;

pub use error::{Error, Result};
pub use num_complex::Complex64;
