use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// `exp(w) - 1` without cancellation for small `|w|`.
pub fn expm1c(w: Complex64) -> Complex64 {
    let (a, b) = (w.re, w.im);
    let em1 = a.exp_m1();
    let half = (0.5 * b).sin();
    Complex64::new(em1 * b.cos() - 2.0 * half * half, a.exp() * b.sin())
}

/// `∫_0^len exp(z s) ds`, exact, stable near `z = 0`.
pub fn exp_integral(z: Complex64, len: f64) -> Complex64 {
    if z.norm() * len < 1e-300 {
        return Complex64::new(len, 0.0);
    }
    expm1c(z * len) / z
}

/// `∫_0^len exp(z s + c) ds`, evaluated from whichever endpoint carries the
/// larger exponent so that neither factor overflows on its own.
pub fn exp_integral_shifted(z: Complex64, c: Complex64, len: f64) -> Complex64 {
    if z.re <= 0.0 {
        c.exp() * exp_integral(z, len)
    } else {
        (z * len + c).exp() * exp_integral(-z, len)
    }
}

/// One term `coef * exp(rate * (x - origin))`. The origin is 0 or 1 and
/// keeps boundary layers at `x = 1` representable.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpTerm {
    pub coef: Complex64,
    pub rate: Complex64,
    #[serde(default)]
    pub origin: f64,
}

impl ExpTerm {
    pub fn eval(&self, x: f64) -> Complex64 {
        self.coef * (self.rate * (x - self.origin)).exp()
    }

    /// `∫_0^1 self * conj(other)`.
    fn inner(&self, other: &ExpTerm) -> Complex64 {
        let z = self.rate + other.rate.conj();
        let c = -self.rate * self.origin - other.rate.conj() * other.origin;
        self.coef * other.coef.conj() * exp_integral_shifted(z, c, 1.0)
    }
}

/// A finite exponential sum `f(x) = Σ coef_j exp(rate_j x)` on `[0, 1]`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ExpSum {
    pub terms: Vec<ExpTerm>,
}

impl ExpSum {
    pub fn new() -> Self {
        Self { terms: Vec::new() }
    }

    pub fn from_terms<I: IntoIterator<Item = (Complex64, Complex64)>>(it: I) -> Self {
        Self {
            terms: it
                .into_iter()
                .map(|(coef, rate)| ExpTerm {
                    coef,
                    rate,
                    origin: 0.0,
                })
                .collect(),
        }
    }

    /// `amp * sin(k π x)`.
    pub fn sine(k: f64, amp: f64) -> Self {
        let w = Complex64::new(0.0, k * std::f64::consts::PI);
        let c = Complex64::new(0.0, -0.5 * amp); // amp / (2i)
        Self::from_terms([(c, w), (-c, -w)])
    }

    pub fn push(&mut self, coef: Complex64, rate: Complex64) {
        self.terms.push(ExpTerm {
            coef,
            rate,
            origin: 0.0,
        });
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn eval(&self, x: f64) -> Complex64 {
        self.terms.iter().map(|t| t.eval(x)).sum()
    }

    pub fn derivative(&self) -> Self {
        Self {
            terms: self
                .terms
                .iter()
                .map(|t| ExpTerm {
                    coef: t.coef * t.rate,
                    ..*t
                })
                .collect(),
        }
    }

    pub fn scaled(&self, s: Complex64) -> Self {
        Self {
            terms: self
                .terms
                .iter()
                .map(|t| ExpTerm {
                    coef: t.coef * s,
                    ..*t
                })
                .collect(),
        }
    }

    pub fn plus(&self, other: &ExpSum) -> Self {
        let mut terms = self.terms.clone();
        terms.extend_from_slice(&other.terms);
        Self { terms }
    }

    pub fn minus(&self, other: &ExpSum) -> Self {
        self.plus(&other.scaled(Complex64::new(-1.0, 0.0)))
    }

    /// `x ↦ f(1 - x)`.
    pub fn reflected(&self) -> Self {
        Self {
            terms: self
                .terms
                .iter()
                .map(|t| ExpTerm {
                    coef: t.coef,
                    rate: -t.rate,
                    origin: 1.0 - t.origin,
                })
                .collect(),
        }
    }

    /// Pointwise complex conjugate.
    pub fn conj(&self) -> Self {
        Self {
            terms: self
                .terms
                .iter()
                .map(|t| ExpTerm {
                    coef: t.coef.conj(),
                    rate: t.rate.conj(),
                    origin: t.origin,
                })
                .collect(),
        }
    }

    /// `∫_0^1 f conj(g) dx`, integrated term by term in closed form.
    pub fn inner(&self, other: &ExpSum) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for a in &self.terms {
            for b in &other.terms {
                acc += a.inner(b);
            }
        }
        acc
    }

    pub fn norm_sq(&self) -> f64 {
        self.inner(self).re.max(0.0)
    }

    /// Fourier coefficient `c_m = ∫_0^1 exp(2πimx) f(x) dx`.
    pub fn fourier_coeff(&self, m: i64) -> Complex64 {
        let w = Complex64::new(0.0, 2.0 * std::f64::consts::PI * m as f64);
        self.terms
            .iter()
            .map(|t| t.coef * exp_integral_shifted(t.rate + w, -t.rate * t.origin, 1.0))
            .sum()
    }

    pub fn integral(&self) -> Complex64 {
        self.fourier_coeff(0)
    }
}

/// A pair of exponential sums `(first, second)`, e.g. `(ξ, η)` or `(ρ, u)`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ExpPair {
    pub first: ExpSum,
    pub second: ExpSum,
}

impl ExpPair {
    pub fn new(first: ExpSum, second: ExpSum) -> Self {
        Self { first, second }
    }

    /// `L² × L²` inner product, linear in `self`.
    pub fn inner(&self, other: &ExpPair) -> Complex64 {
        self.first.inner(&other.first) + self.second.inner(&other.second)
    }

    pub fn norm_sq(&self) -> f64 {
        self.first.norm_sq() + self.second.norm_sq()
    }

    pub fn scaled(&self, s: Complex64) -> Self {
        Self::new(self.first.scaled(s), self.second.scaled(s))
    }

    pub fn minus(&self, other: &ExpPair) -> Self {
        Self::new(self.first.minus(&other.first), self.second.minus(&other.second))
    }

    pub fn reflected(&self) -> Self {
        Self::new(self.first.reflected(), self.second.reflected())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn expm1c_matches_direct_form_away_from_zero() {
        let w = Complex64::new(0.7, -2.3);
        let d = w.exp() - 1.0;
        assert!((expm1c(w) - d).norm() < 1e-15);
        let tiny = Complex64::new(1e-12, 3e-13);
        assert!((expm1c(tiny) - tiny).norm() < 1e-24);
    }

    #[test]
    fn exp_integral_limits() {
        assert_eq!(exp_integral(Complex64::new(0.0, 0.0), 1.5).re, 1.5);
        let z = Complex64::new(-1.0, 0.0);
        assert!((exp_integral(z, 1.0).re - (1.0 - (-1.0f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn sine_inner_products() {
        let s1 = ExpSum::sine(1.0, 1.0);
        let s2 = ExpSum::sine(2.0, 1.0);
        assert!((s1.norm_sq() - 0.5).abs() < 1e-14);
        assert!(s1.inner(&s2).norm() < 1e-14);
        assert!((s1.eval(0.5).re - 1.0).abs() < 1e-15);
        // ∫ sin(πx) dx = 2/π
        assert!((s1.integral().re - 2.0 / PI).abs() < 1e-14);
    }

    #[test]
    fn reflection_is_an_involution() {
        let f = ExpSum::from_terms([
            (Complex64::new(1.0, 2.0), Complex64::new(-3.0, 1.0)),
            (Complex64::new(-0.5, 0.0), Complex64::new(0.2, -7.0)),
        ]);
        let g = f.reflected();
        for &x in &[0.0, 0.3, 0.8, 1.0] {
            assert!((g.eval(x) - f.eval(1.0 - x)).norm() < 1e-13);
        }
        assert!((g.reflected().eval(0.4) - f.eval(0.4)).norm() < 1e-13);
        assert!((g.inner(&g) - f.inner(&f)).norm() < 1e-12);
    }

    #[test]
    fn steep_layer_survives_reflection() {
        // exp(-5000 x) reflected is exp(-5000 (1 - x)); its norm is 1/sqrt(1e4).
        let f = ExpSum::from_terms([(Complex64::new(1.0, 0.0), Complex64::new(-5000.0, 0.0))]);
        let g = f.reflected();
        assert!((g.eval(1.0).re - 1.0).abs() < 1e-15);
        assert!((g.norm_sq() - 1e-4).abs() < 1e-18);
        assert!((g.integral().re - 2e-4).abs() < 1e-18);
        assert!(g.inner(&f).norm() < 1e-200);
    }
}
