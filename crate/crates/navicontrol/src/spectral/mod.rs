//! Eigenvalues and eigenfunctions of the adjoint operator
//! `A*(ξ, η) = (ξ' + η', η'' + η' + ξ')` with `ξ(0) = ξ(1)`, `η(0) = η(1) = 0`.
//!
//! With `μ = -λ` the eigenfunctions are exponential sums over the roots of
//! `m³ + μm² + 2μm + μ² = 0`, and eigenvalues are the zeros of a 3×3
//! determinant `Δ(μ)` built from those roots.

pub mod contour;
pub mod cubic;
pub mod det;
pub mod eigen;
pub mod fit;
pub mod newton;
pub mod params;
pub mod spectrum;

pub use contour::{count_zeros, ContourCount, ContourOptions, Rect};
pub use cubic::{cubic_roots, CubicRoots};
pub use det::{char_det, char_det_eval, char_det_normalized, char_fn_symmetric, Scaled};
pub use eigen::{
    boundary_rank_ratio, build_all, build_eigenfunction, eigen_residual, rayleigh_defect,
    EigenPair,
};
pub use fit::{asymptotic_fit, asymptotic_fit_range, FitReport};
pub use newton::{refine_root, refine_root_with, NewtonOptions, Objective, RootResult};
pub use params::{nondimensionalize, Dimensionless, ScalingParams};
pub use spectrum::{compute_spectrum, Branch, RootRecord, Spectrum, SpectrumConfig};
