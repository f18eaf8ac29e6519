use num_complex::Complex64;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("grid too coarse: {got} nodes, need at least {required}")]
    GridTooCoarse { required: usize, got: usize },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("function is not mean-zero (|c_0| = {c0:e}, max |c_m| = {max:e})")]
    NotMeanZero { c0: f64, max: f64 },

    #[error("mu = 0 is excluded (triple root of the characteristic cubic)")]
    ZeroMu,

    #[error("near-degenerate cubic roots at mu = {mu}: separation {separation:e}")]
    DegenerateRoots { mu: Complex64, separation: f64 },

    #[error("Newton did not converge after {iterations} iterations (last iterate {last}, residual {residual:e})")]
    NoConvergence {
        last: Complex64,
        residual: f64,
        iterations: usize,
    },

    #[error("Newton iterate {last} left the guard disc of radius {radius} around seed {seed}")]
    Diverged {
        seed: Complex64,
        last: Complex64,
        radius: f64,
    },

    #[error("function vanishes on a counting contour near {at}")]
    ZeroOnContour { at: Complex64 },

    #[error("argument-principle count does not match refined roots: {0}")]
    CountMismatch(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("boundary defect {defect:e} exceeds tolerance at mu = {mu}")]
    BoundaryDefect { mu: Complex64, defect: f64 },

    #[error("observation |xi(1)| = {value:e} below threshold at lambda = {lambda}")]
    ObservationDegenerate { lambda: Complex64, value: f64 },

    #[error("moment residual {residual:e} above tolerance (condition {condition:e})")]
    ResidualTooLarge { residual: f64, condition: f64 },

    #[error("targets are not conjugate-consistent at exponent {index} (defect {defect:e})")]
    ConjugateInconsistent { index: usize, defect: f64 },

    #[error("CFL violated: dt = {dt:e} > dx = {dx:e}; use at least M = {suggested_m} steps")]
    Cfl { dt: f64, dx: f64, suggested_m: usize },

    #[error("simulation diverged at step {step} (energy growth {growth:e})")]
    SimulationDiverged { step: usize, growth: f64 },

    #[error("ill-conditioned Gram system (condition {condition:e})")]
    IllConditioned { condition: f64 },
}
