//! Numerical pipeline for boundary null-controllability of the one-dimensional
//! linearized compressible Navier–Stokes system
//!
//! ```text
//! rho_t + rho_x + u_x = 0,      u_t - u_xx + u_x + rho_x = 0   on (0, 1),
//! rho(t, 0) = rho(t, 1) + p(t), u(t, 0) = u(t, 1) = 0,
//! ```
//!
//! controlled through the density jump `p(t)` (equivalently the Dirichlet
//! density `h(t) = rho(t, 1) + p(t)`).
//!
//! The crate is split along the pipeline:
//!
//! * [`spaces`]: periodic Sobolev spaces on the Fourier side, grid functions, quadrature.
//! * [`spectral`]: eigenvalues of the adjoint operator and closed-form eigenfunctions.
//! * [`basis`]: comparison families, quadratic closeness, Gram matrices and Riesz bounds.
//! * [`control`]: observation, moment targets, minimal-norm control synthesis.
//! * [`sim`]: finite-difference and modal simulators plus integral identities.
//!
//! [`expsum`] holds the exponential-sum representation shared by all of them:
//! every eigenfunction is a finite sum `sum c_j exp(z_j x)` and inner products
//! of such sums are integrated in closed form.

pub mod basis;
pub mod control;
pub mod error;
pub mod expsum;
pub mod sim;
pub mod spaces;
pub mod spectral;

pub use error::{Error, Result};
pub use expsum::ExpSum;
pub use num_complex::Complex64;
pub use spaces::{FourierVector, GridFunction, State};
pub use spectral::{Branch, EigenPair, ScalingParams, Spectrum};

/// Shorthand for building complex constants.
#[inline]
pub fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}
