//! The characteristic determinant whose zeros are the eigenvalues `μ = -λ`.
//!
//! Values are carried as `value · exp(log_scale)` so that growing exponentials
//! `exp(m_i)` never overflow; the phase lives entirely in `value`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::cubic::{cubic_roots, CubicRoots};
use crate::error::Result;
use crate::expsum::expm1c;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scaled {
    pub value: Complex64,
    pub log_scale: f64,
}

impl Scaled {
    pub fn to_complex(self) -> Complex64 {
        self.value * self.log_scale.exp()
    }

    /// Re-expresses the value relative to another scale.
    pub fn rescaled_to(self, log_scale: f64) -> Complex64 {
        self.value * (self.log_scale - log_scale).exp()
    }

    /// `ln(value) + log_scale`, principal branch.
    pub fn ln(self) -> Complex64 {
        self.value.ln() + self.log_scale
    }
}

/// Determinant evaluation with the magnitudes needed for relative residuals.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetEval {
    pub roots: CubicRoots,
    /// `Δ(μ)`.
    pub det: Scaled,
    /// `Σ |terms of Δ|` on the same scale as `det`.
    pub magnitude: f64,
}

impl DetEval {
    /// `|Δ| / Σ|terms|`: the cancellation-relative size of the determinant.
    pub fn relative(&self) -> f64 {
        if self.magnitude == 0.0 {
            0.0
        } else {
            self.det.value.norm() / self.magnitude
        }
    }
}

/// `e^a - e^b` as `exp(s) · w` with `s = max(Re a, Re b)`.
fn exp_diff(a: Complex64, b: Complex64) -> (Complex64, f64) {
    let (hi, lo, sign) = if a.re >= b.re { (a, b, 1.0) } else { (b, a, -1.0) };
    let phase = Complex64::from_polar(1.0, hi.im);
    (-sign * phase * expm1c(lo - hi), hi.re)
}

/// Scaled `Δ(μ) = Σ_cyc m_i² (1 - e^{m_i})(e^{m_k} - e^{m_j})`, with
/// `(i, j, k)` running over the cyclic shifts of `(1, 2, 3)`.
pub fn char_det_eval(mu: Complex64) -> Result<DetEval> {
    let roots = cubic_roots(mu)?;
    let m = roots.m;
    let zero = Complex64::new(0.0, 0.0);
    let mut parts = [(zero, 0.0f64); 3];
    for i in 0..3 {
        let j = (i + 1) % 3;
        let k = (i + 2) % 3;
        // 1 - e^{m_i} = e^0 - e^{m_i}
        let (f1, s1) = exp_diff(zero, m[i]);
        let (f2, s2) = exp_diff(m[k], m[j]);
        parts[i] = (m[i] * m[i] * f1 * f2, s1.max(0.0) + s2);
    }
    let log_scale = parts.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let mut value = zero;
    let mut magnitude = 0.0;
    for (t, s) in parts {
        let term = t * (s - log_scale).exp();
        value += term;
        magnitude += term.norm();
    }
    Ok(DetEval {
        roots,
        det: Scaled { value, log_scale },
        magnitude,
    })
}

/// `Δ(μ)` as a plain complex number (may overflow for huge `|μ|`).
pub fn char_det(mu: Complex64) -> Result<Complex64> {
    Ok(char_det_eval(mu)?.det.to_complex())
}

/// `Δ(μ)/μ²`, the function Newton's method is run on.
pub fn char_det_normalized(mu: Complex64) -> Result<Scaled> {
    let e = char_det_eval(mu)?;
    Ok(Scaled {
        value: e.det.value / (mu * mu),
        log_scale: e.det.log_scale,
    })
}

/// `Δ(μ) / V(m1, m2, m3)` with the Vandermonde product
/// `V = (m1 - m2)(m2 - m3)(m3 - m1)`. Both are antisymmetric in the root
/// labels, so the quotient is label-free and analytic in `μ`; it keeps the
/// zeros of `Δ` except the spurious ones where two roots merge.
pub fn char_fn_symmetric(mu: Complex64) -> Result<Scaled> {
    let e = char_det_eval(mu)?;
    let m = e.roots.m;
    let v = (m[0] - m[1]) * (m[1] - m[2]) * (m[2] - m[0]);
    Ok(Scaled {
        value: e.det.value / v,
        log_scale: e.det.log_scale,
    })
}
