//! Finite-genus algebro-geometric backgrounds of the focusing NLS equation
//! and the scalar ingredients of their long-time leading-order asymptotics.
//!
//! The crate is organized around the pipeline
//!
//! ```text
//! BranchSet -> SurfaceGeometry -> PhaseModel -> StationaryPortrait
//!                    |                |              |
//!                  theta          background     cauchy (delta, g)
//!                                                    |
//!                                          special (Airy, PII, PC betas)
//!                                                    |
//!                                               asymptotics
//! ```
//!
//! with `verify` providing an independent PDE-residual checker and a
//! split-step evolver for desk-scale cross-checks.

pub mod asymptotics;
pub mod background;
pub mod cauchy;
pub mod error;
pub mod phase;
pub mod poly;
pub mod quad;
pub mod scattering;
pub mod special;
pub mod surface;
pub mod theta;
pub mod verify;

pub use error::{Error, Result};
pub use num_complex::Complex64;

/// Shorthand used throughout the crate.
pub(crate) fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// i as a `Complex64`.
pub(crate) const I: Complex64 = Complex64::new(0.0, 1.0);

/// 1 as a `Complex64`.
pub(crate) const ONE: Complex64 = Complex64::new(1.0, 0.0);
