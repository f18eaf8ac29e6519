//! Newton refinement of zeros of the characteristic function in the `μ` plane.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::det::{char_det_normalized, char_fn_symmetric, Scaled};
use crate::error::{Error, Result};

/// Which function of `μ` Newton's method drives to zero.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Objective {
    /// `Δ(μ)/μ²`.
    Normalized,
    /// `Δ(μ)/V(m)`, free of spurious zeros at merged roots.
    Symmetric,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NewtonOptions {
    /// Target for the relative determinant residual.
    pub tol: f64,
    pub max_iter: usize,
    /// Iterates farther than this from the seed abort the search.
    /// `None` uses `π · max(1, √|seed|)`.
    pub guard_radius: Option<f64>,
    pub objective: Objective,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 60,
            guard_radius: None,
            objective: Objective::Normalized,
        }
    }
}

/// Residual floor accepted when the iteration stagnates above `tol`.
pub const STAGNATION_FLOOR: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RootResult {
    pub mu: Complex64,
    /// `|f| / (max(1, |μ|) |f'|)` at the returned root.
    pub residual: f64,
    pub iterations: usize,
}

fn objective(obj: Objective, mu: Complex64) -> Result<Scaled> {
    match obj {
        Objective::Normalized => char_det_normalized(mu),
        Objective::Symmetric => char_fn_symmetric(mu),
    }
}

/// Value and central-difference derivative of the objective at `mu`, on the
/// scale of the value.
fn value_and_slope(obj: Objective, mu: Complex64) -> Result<(Complex64, Complex64)> {
    let f = objective(obj, mu)?;
    let h = 1e-6 * mu.norm().max(1.0);
    let fp = objective(obj, mu + h)?.rescaled_to(f.log_scale);
    let fm = objective(obj, mu - h)?.rescaled_to(f.log_scale);
    Ok((f.value, (fp - fm) / (2.0 * h)))
}

/// `|f| / (max(1, |μ|) · |f'|)`: the size of `f` relative to its local scale,
/// i.e. the relative length of the Newton correction.
fn scaled_residual(mu: Complex64, f: Complex64, df: Complex64) -> f64 {
    let den = mu.norm().max(1.0) * df.norm();
    if den == 0.0 || !den.is_finite() {
        f64::INFINITY
    } else {
        f.norm() / den
    }
}

/// Residual of `Δ(μ)/μ²` against its local scale.
pub fn root_residual(mu: Complex64) -> Result<f64> {
    let (f, df) = value_and_slope(Objective::Normalized, mu)?;
    Ok(scaled_residual(mu, f, df))
}

pub fn default_guard(seed: Complex64) -> f64 {
    std::f64::consts::PI * seed.norm().sqrt().max(1.0)
}

/// Newton's method with a central-difference derivative of step
/// `1e-6 · max(1, |μ|)`.
pub fn refine_root(seed: Complex64, tol: f64, max_iter: usize) -> Result<RootResult> {
    refine_root_with(
        seed,
        &NewtonOptions {
            tol,
            max_iter,
            ..NewtonOptions::default()
        },
    )
}

pub fn refine_root_with(seed: Complex64, opts: &NewtonOptions) -> Result<RootResult> {
    if !(opts.tol >= 1e-14) {
        return Err(Error::InvalidInput(format!(
            "Newton tolerance {} below 1e-14",
            opts.tol
        )));
    }
    let guard = opts.guard_radius.unwrap_or_else(|| default_guard(seed));
    let mut mu = seed;
    let mut best = (mu, f64::INFINITY);
    let mut stalled = 0;
    for it in 0..opts.max_iter {
        let (f, df) = value_and_slope(opts.objective, mu)?;
        let res = scaled_residual(mu, f, df);
        if res < best.1 {
            best = (mu, res);
            stalled = 0;
        } else {
            stalled += 1;
        }
        if res <= opts.tol {
            return Ok(RootResult {
                mu,
                residual: res,
                iterations: it,
            });
        }
        if stalled >= 3 {
            break;
        }
        if df.norm() == 0.0 || !df.norm().is_finite() {
            break;
        }
        let next = mu - f / df;
        if (next - seed).norm() > guard {
            return Err(Error::Diverged {
                seed,
                last: next,
                radius: guard,
            });
        }
        mu = next;
    }
    let (mu, res) = best;
    if res <= opts.tol.max(STAGNATION_FLOOR) {
        return Ok(RootResult {
            mu,
            residual: res,
            iterations: opts.max_iter,
        });
    }
    Err(Error::NoConvergence {
        last: mu,
        residual: res,
        iterations: opts.max_iter,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn parabolic_seed_converges() {
        let r = refine_root(c(100.0 * PI * PI, 0.0), 1e-12, 60).unwrap();
        assert!(r.residual <= 1e-12);
        assert!((r.mu.re - 986.210224971805).abs() < 1e-7);
    }

    #[test]
    fn hyperbolic_seed_converges() {
        let r = refine_root(c(1.0, 10.0 * PI), 1e-12, 60).unwrap();
        assert!((r.mu.re - 1.0).abs() <= 0.5);
        assert!(r.residual <= 1e-12);
    }

    #[test]
    fn guard_box_trips_between_windows() {
        let w = 10.5 * PI;
        let opts = NewtonOptions {
            guard_radius: Some(PI / 4.0),
            ..NewtonOptions::default()
        };
        assert!(matches!(
            refine_root_with(c(w * w, 0.0), &opts),
            Err(Error::Diverged { .. })
        ));
    }

    #[test]
    fn tolerance_floor_enforced() {
        assert!(refine_root(c(10.0, 0.0), 1e-15, 10).is_err());
    }
}
