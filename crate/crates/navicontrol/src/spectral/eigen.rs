//! Closed-form eigenfunctions `(ξ, η)` of the adjoint operator.

use nalgebra::Matrix3;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cubic::{cubic_roots, CubicRoots};
use super::spectrum::{Branch, RootRecord, Spectrum};
use crate::error::{Error, Result};
use crate::expsum::{ExpPair, ExpSum};
use crate::spaces::{GridFunction, State};

/// Relative boundary defect above which a root is considered inaccurate.
pub const BOUNDARY_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenPair {
    pub lambda: Complex64,
    pub mu: Complex64,
    pub branch: Branch,
    pub k: i64,
    pub roots: [Complex64; 3],
    /// `C_i`, with `C_3 = -(C_1 + C_2)`.
    pub eta_coeffs: [Complex64; 3],
    /// `1 + m_i²/μ`.
    pub xi_multipliers: [Complex64; 3],
    /// Scale applied to the raw coefficients.
    pub normalization: Complex64,
    /// `σ₂/σ₃` of the column-scaled boundary matrix.
    pub rank_ratio: f64,
}

impl EigenPair {
    pub fn eta(&self) -> ExpSum {
        ExpSum::from_terms(
            (0..3).map(|i| (self.normalization * self.eta_coeffs[i], self.roots[i])),
        )
    }

    pub fn xi(&self) -> ExpSum {
        ExpSum::from_terms((0..3).map(|i| {
            (
                self.normalization * self.xi_multipliers[i] * self.eta_coeffs[i],
                self.roots[i],
            )
        }))
    }

    /// `(ξ, η)`.
    pub fn pair(&self) -> ExpPair {
        ExpPair::new(self.xi(), self.eta())
    }

    /// `x ↦ (ξ, η)(1 - x)`: an eigenfunction of the forward operator for the
    /// same eigenvalue.
    pub fn forward_pair(&self) -> ExpPair {
        self.pair().reflected()
    }

    /// The observation `ξ(1)`.
    pub fn xi_at_one(&self) -> Complex64 {
        self.xi().eval(1.0)
    }

    pub fn norm(&self) -> f64 {
        self.pair().norm_sq().sqrt()
    }

    /// Same eigenfunction multiplied by `c`.
    pub fn rescaled(&self, c: Complex64) -> EigenPair {
        let mut out = self.clone();
        out.normalization *= c;
        out
    }

    pub fn sample(&self, n: usize) -> Result<State> {
        State::new(
            GridFunction::from_expsum(n, &self.xi())?,
            GridFunction::from_expsum(n, &self.eta())?,
        )
    }

    pub fn sample_forward(&self, n: usize) -> Result<State> {
        let f = self.forward_pair();
        State::new(
            GridFunction::from_expsum(n, &f.first)?,
            GridFunction::from_expsum(n, &f.second)?,
        )
    }
}

fn boundary_matrix(roots: &CubicRoots, mu: Complex64) -> Matrix3<Complex64> {
    let m = roots.m;
    let one = Complex64::new(1.0, 0.0);
    Matrix3::from_fn(|r, c| match r {
        0 => one,
        1 => m[c].exp(),
        _ => (one + m[c] * m[c] / mu) * (one - m[c].exp()),
    })
}

/// `σ₂/σ₃` of the boundary-condition matrix after scaling each column to unit
/// largest entry; a large ratio means a one-dimensional null space.
pub fn boundary_rank_ratio(mu: Complex64) -> Result<f64> {
    let roots = cubic_roots(mu)?;
    let mut a = boundary_matrix(&roots, mu);
    for c in 0..3 {
        let s = (0..3).map(|r| a[(r, c)].norm()).fold(0.0, f64::max);
        if s > 0.0 && s.is_finite() {
            for r in 0..3 {
                a[(r, c)] /= s;
            }
        }
    }
    let sv = a.singular_values();
    let mut s: Vec<f64> = sv.iter().copied().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    Ok(if s[2] == 0.0 { f64::INFINITY } else { s[1] / s[2] })
}

/// Eigenfunction for a refined `μ`, normalized to unit `L² × L²` norm with
/// `ξ(1)` real and positive.
pub fn build_eigenfunction(mu: Complex64, branch: Branch, k: i64) -> Result<EigenPair> {
    let roots = cubic_roots(mu)?;
    roots.require_distinct(mu)?;
    let m = roots.m;
    let e = m.map(|x| x.exp());
    let c1 = e[1] - e[2];
    let c2 = e[2] - e[0];
    let eta_coeffs = [c1, c2, -(c1 + c2)];
    let xi_multipliers = m.map(|x| 1.0 + x * x / mu);
    let mut pair = EigenPair {
        lambda: -mu,
        mu,
        branch,
        k,
        roots: m,
        eta_coeffs,
        xi_multipliers,
        normalization: Complex64::new(1.0, 0.0),
        rank_ratio: boundary_rank_ratio(mu)?,
    };
    let norm = pair.norm();
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(Error::Invariant(format!(
            "eigenfunction at mu = {mu} has norm {norm}"
        )));
    }
    pair.normalization = Complex64::new(1.0 / norm, 0.0);
    let x1 = pair.xi_at_one();
    if x1.norm() > 0.0 {
        pair.normalization *= x1.conj() / x1.norm();
    }
    let (_, bd) = eigen_residual(&pair, 64)?;
    let scale = boundary_scale(&pair);
    if bd > BOUNDARY_TOL * scale {
        return Err(Error::BoundaryDefect { mu, defect: bd });
    }
    Ok(pair)
}

/// Magnitude against which boundary defects are judged.
fn boundary_scale(p: &EigenPair) -> f64 {
    let xi = p.xi();
    let eta2 = p.eta().derivative().derivative();
    let mags = |s: &ExpSum, x: f64| -> f64 {
        s.terms.iter().map(|t| t.eval(x).norm()).sum::<f64>()
    };
    [mags(&xi, 0.0), mags(&xi, 1.0), mags(&eta2, 0.0) / p.mu.norm(), 1.0]
        .into_iter()
        .fold(0.0, f64::max)
}

pub fn build_from_record(r: &RootRecord) -> Result<EigenPair> {
    build_eigenfunction(r.mu(), r.branch, r.k)
}

/// All eigenpairs of a spectrum, in `Spectrum::records` order.
pub fn build_all(spec: &Spectrum) -> Result<Vec<EigenPair>> {
    spec.records().par_iter().map(build_from_record).collect()
}

/// Chebyshev points mapped to `[0, 1]`.
pub fn chebyshev_points(n: usize) -> Vec<f64> {
    (0..n)
        .map(|j| 0.5 * (1.0 - (std::f64::consts::PI * (j as f64 + 0.5) / n as f64).cos()))
        .collect()
}

/// `(ode_defect, boundary_defect)`: the largest pointwise residual of the two
/// eigen-equations over the norm of `(ξ, η)`, and
/// `|ξ(0) - ξ(1)| + |η(0)| + |η(1)|`.
pub fn eigen_residual(pair: &EigenPair, n_samples: usize) -> Result<(f64, f64)> {
    ode_residual_at(pair, pair.lambda, n_samples)
        .map(|ode| (ode, boundary_defect(pair)))
}

/// Same ODE residual with a detuned eigenvalue.
pub fn ode_residual_at(pair: &EigenPair, lambda: Complex64, n_samples: usize) -> Result<f64> {
    if n_samples < 16 {
        return Err(Error::InvalidInput(format!(
            "need at least 16 sample points, got {n_samples}"
        )));
    }
    let xi = pair.xi();
    let eta = pair.eta();
    let dxi = xi.derivative();
    let deta = eta.derivative();
    let ddeta = deta.derivative();
    let norm = pair.norm();
    let worst = chebyshev_points(n_samples)
        .into_iter()
        .map(|x| {
            let r1 = dxi.eval(x) + deta.eval(x) - lambda * xi.eval(x);
            let r2 = ddeta.eval(x) + deta.eval(x) + dxi.eval(x) - lambda * eta.eval(x);
            r1.norm().max(r2.norm())
        })
        .fold(0.0, f64::max);
    Ok(worst / norm)
}

pub fn boundary_defect(pair: &EigenPair) -> f64 {
    let xi = pair.xi();
    let eta = pair.eta();
    (xi.eval(0.0) - xi.eval(1.0)).norm() + eta.eval(0.0).norm() + eta.eval(1.0).norm()
}

/// `|η''(0) - η''(1)|` relative to the size of the `η''` terms.
pub fn second_derivative_defect(pair: &EigenPair) -> f64 {
    let d2 = pair.eta().derivative().derivative();
    let scale: f64 = d2.terms.iter().map(|t| t.coef.norm()).sum::<f64>().max(1e-300);
    (d2.eval(0.0) - d2.eval(1.0)).norm() / scale
}

/// `|Re λ + ‖η'‖² / (‖ξ‖² + ‖η‖²)|` with exact integrals.
pub fn rayleigh_defect(pair: &EigenPair) -> f64 {
    let q = pair.eta().derivative().norm_sq() / pair.pair().norm_sq();
    (pair.lambda.re + q).abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::newton::refine_root;
    use std::f64::consts::PI;

    fn para(k: i64) -> EigenPair {
        let r = refine_root(Complex64::new((k as f64 * PI).powi(2), 0.0), 1e-12, 60).unwrap();
        build_eigenfunction(Complex64::new(r.mu.re, 0.0), Branch::Parabolic, k).unwrap()
    }

    fn hyp(k: i64) -> EigenPair {
        let r = refine_root(Complex64::new(1.0, 2.0 * PI * k as f64), 1e-12, 60).unwrap();
        build_eigenfunction(r.mu, Branch::Hyperbolic, k).unwrap()
    }

    #[test]
    fn construction_identities() {
        let p = para(10);
        let c = p.eta_coeffs;
        assert_eq!(c[0] + c[1] + c[2], Complex64::new(0.0, 0.0));
        let s: Complex64 = (0..3).map(|i| c[i] * p.roots[i].exp()).sum();
        let scale: f64 = (0..3).map(|i| (c[i] * p.roots[i].exp()).norm()).sum();
        assert!(s.norm() <= 1e-12 * scale.max(c.iter().map(|x| x.norm()).sum()));
        assert!((p.norm() - 1.0).abs() < 1e-12);
        let x1 = p.xi_at_one();
        assert!(x1.re > 0.0 && x1.im.abs() < 1e-12 * x1.re);
    }

    #[test]
    fn parabolic_residuals() {
        let p = para(10);
        let (ode, bd) = eigen_residual(&p, 64).unwrap();
        assert!(ode <= 1e-9, "ode {ode}");
        assert!(bd <= 1e-8, "bd {bd}");
        assert!(rayleigh_defect(&p) <= 1e-8);
        assert!(p.rank_ratio >= 1e6);
    }

    #[test]
    fn detuning_is_detected() {
        let p = para(10);
        let ode = ode_residual_at(&p, p.lambda + 0.01, 64).unwrap();
        assert!(ode >= 1e-3, "{ode}");
    }

    #[test]
    fn hyperbolic_residuals() {
        let p = hyp(7);
        let (ode, bd) = eigen_residual(&p, 64).unwrap();
        assert!(bd <= 1e-9, "bd {bd}");
        assert!(ode <= 1e-8, "ode {ode}");
        assert!(rayleigh_defect(&p) <= 1e-7);
        assert!(second_derivative_defect(&p) <= 1e-8);
    }

    #[test]
    fn forward_pair_is_reflection() {
        let p = hyp(3);
        let f = p.forward_pair();
        for &x in &[0.0, 0.25, 0.9] {
            assert!((f.first.eval(x) - p.xi().eval(1.0 - x)).norm() < 1e-10);
        }
    }

    #[test]
    fn too_few_samples() {
        assert!(eigen_residual(&para(3), 8).is_err());
    }
}
