//! Periodic Sobolev spaces on `(0, 1)` and grid-side quadrature.
//!
//! Fourier coefficients follow `c_m = ∫_0^1 exp(+2πimx) φ(x) dx`, so the
//! reconstruction is `φ = Σ c_m exp(-2πimx)`. Parseval still reads
//! `∫ φ conj(ψ) = Σ c_m(φ) conj(c_m(ψ))`.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expsum::ExpSum;

/// Relative threshold under which `c_0` counts as zero.
pub const MEAN_ZERO_TOL: f64 = 1e-12;

/// Mean-zero (optionally) periodic function on `(0, 1)` given by finitely many
/// Fourier coefficients, tagged with the Sobolev exponent it is measured in.
#[derive(Clone, Debug, PartialEq)]
pub struct FourierVector {
    pub coeffs: BTreeMap<i64, Complex64>,
    pub interval_length: f64,
    pub sobolev_exponent: f64,
    pub mean_zero: bool,
    pub truncation: usize,
}

impl FourierVector {
    /// Builds a vector from `(m, c_m)` pairs. With `mean_zero` set, a `c_0`
    /// below the relative threshold is zeroed; a larger one is rejected.
    pub fn new<I: IntoIterator<Item = (i64, Complex64)>>(
        modes: I,
        s: f64,
        mean_zero: bool,
    ) -> Result<Self> {
        let mut coeffs = BTreeMap::new();
        for (m, c) in modes {
            *coeffs.entry(m).or_insert(Complex64::new(0.0, 0.0)) += c;
        }
        let truncation = coeffs.keys().map(|m| m.unsigned_abs() as usize).max().unwrap_or(0);
        let mut v = Self {
            coeffs,
            interval_length: 1.0,
            sobolev_exponent: s,
            mean_zero,
            truncation,
        };
        if mean_zero {
            v.enforce_mean_zero()?;
        }
        Ok(v)
    }

    fn enforce_mean_zero(&mut self) -> Result<()> {
        let max = self.max_abs();
        let c0 = self.coeffs.get(&0).map(|c| c.norm()).unwrap_or(0.0);
        if c0 > MEAN_ZERO_TOL * max {
            return Err(Error::NotMeanZero { c0, max });
        }
        self.coeffs.remove(&0);
        Ok(())
    }

    /// Exact coefficients of an exponential sum for `|m| ≤ truncation`.
    pub fn from_expsum(f: &ExpSum, truncation: usize, s: f64, mean_zero: bool) -> Result<Self> {
        let t = truncation as i64;
        Self::new((-t..=t).map(|m| (m, f.fourier_coeff(m))), s, mean_zero)
    }

    pub fn coeff(&self, m: i64) -> Complex64 {
        self.coeffs.get(&m).copied().unwrap_or(Complex64::new(0.0, 0.0))
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.values().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn with_exponent(mut self, s: f64) -> Self {
        self.sobolev_exponent = s;
        self
    }

    /// `Σ c_m exp(-2πimx)`.
    pub fn eval(&self, x: f64) -> Complex64 {
        self.coeffs
            .iter()
            .map(|(&m, &c)| c * Complex64::new(0.0, -2.0 * PI * m as f64 * x).exp())
            .sum()
    }

    /// Same function as an exponential sum.
    pub fn to_expsum(&self) -> ExpSum {
        ExpSum::from_terms(
            self.coeffs
                .iter()
                .map(|(&m, &c)| (c, Complex64::new(0.0, -2.0 * PI * m as f64))),
        )
    }

    fn c0_is_zero(&self) -> bool {
        self.coeff(0).norm() <= MEAN_ZERO_TOL * self.max_abs()
    }
}

#[derive(Serialize, Deserialize)]
struct FourierVectorJson {
    s: f64,
    modes: Vec<(i64, f64, f64)>,
}

impl Serialize for FourierVector {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        FourierVectorJson {
            s: self.sobolev_exponent,
            modes: self.coeffs.iter().map(|(&m, c)| (m, c.re, c.im)).collect(),
        }
        .serialize(ser)
    }
}

impl<'de> Deserialize<'de> for FourierVector {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let j = FourierVectorJson::deserialize(de)?;
        let modes: Vec<_> = j
            .modes
            .into_iter()
            .map(|(m, re, im)| (m, Complex64::new(re, im)))
            .collect();
        let has_mean = modes.iter().any(|&(m, c)| m == 0 && c.norm() > 0.0);
        FourierVector::new(modes, j.s, !has_mean).map_err(serde::de::Error::custom)
    }
}

/// Complex samples on the uniform grid `x_i = i / N`, `i = 0..=N`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    n: usize,
    values: Vec<Complex64>,
}

impl GridFunction {
    pub fn new(values: Vec<Complex64>) -> Result<Self> {
        if values.len() < 9 {
            return Err(Error::GridTooCoarse {
                required: 9,
                got: values.len(),
            });
        }
        Ok(Self {
            n: values.len() - 1,
            values,
        })
    }

    pub fn from_fn<F: Fn(f64) -> Complex64>(n: usize, f: F) -> Result<Self> {
        Self::new((0..=n).map(|i| f(i as f64 / n as f64)).collect())
    }

    pub fn from_real_fn<F: Fn(f64) -> f64>(n: usize, f: F) -> Result<Self> {
        Self::from_fn(n, |x| Complex64::new(f(x), 0.0))
    }

    pub fn from_expsum(n: usize, f: &ExpSum) -> Result<Self> {
        Self::from_fn(n, |x| f.eval(x))
    }

    /// Number of intervals `N`.
    pub fn intervals(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn node(&self, i: usize) -> f64 {
        i as f64 / self.n as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.n).map(|i| self.node(i)).collect()
    }

    pub fn real_parts(&self) -> Vec<f64> {
        self.values.iter().map(|c| c.re).collect()
    }
}

/// State `(ρ, u)` (or `(σ, v)`) on one grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub rho: GridFunction,
    pub u: GridFunction,
}

impl State {
    pub fn new(rho: GridFunction, u: GridFunction) -> Result<Self> {
        if rho.intervals() != u.intervals() {
            return Err(Error::GridMismatch(format!(
                "rho has N = {}, u has N = {}",
                rho.intervals(),
                u.intervals()
            )));
        }
        Ok(Self { rho, u })
    }

    pub fn intervals(&self) -> usize {
        self.rho.intervals()
    }

    /// `L² × L²` inner product by the trapezoid rule.
    pub fn inner(&self, other: &State) -> Result<Complex64> {
        Ok(l2_inner(&self.rho, &other.rho)? + l2_inner(&self.u, &other.u)?)
    }
}

/// Trapezoid-rule Fourier coefficients `c_m`, `|m| ≤ M`, of the periodic
/// extension of `f`.
pub fn fourier_coeffs(f: &GridFunction, m_max: usize, s: f64) -> Result<FourierVector> {
    if m_max < 1 {
        return Err(Error::InvalidInput("mode cutoff must be at least 1".into()));
    }
    let n = f.intervals();
    if n < 4 * m_max {
        return Err(Error::GridTooCoarse {
            required: 4 * m_max + 1,
            got: n + 1,
        });
    }
    let v = f.values();
    // Periodic extension: the endpoint samples share one node.
    let mut samples = v[..n].to_vec();
    samples[0] = 0.5 * (v[0] + v[n]);
    let h = 1.0 / n as f64;
    let mm = m_max as i64;
    let modes = (-mm..=mm).map(|m| {
        let w = 2.0 * PI * m as f64 * h;
        let c: Complex64 = samples
            .iter()
            .enumerate()
            .map(|(i, &fi)| fi * Complex64::from_polar(1.0, w * i as f64))
            .sum();
        (m, c * h)
    });
    let mut out = FourierVector::new(modes, s, false)?;
    out.mean_zero = out.c0_is_zero();
    if out.mean_zero {
        out.coeffs.remove(&0);
    }
    out.truncation = m_max;
    Ok(out)
}

fn weight(m: i64, s: f64, homogeneous: bool) -> f64 {
    let q = 4.0 * PI * PI * (m as f64) * (m as f64);
    if homogeneous {
        q.powf(s)
    } else {
        (1.0 + q).powf(s)
    }
}

/// `(Σ_m w_m^s |c_m|²)^{1/2}` with `w_m = 1 + 4π²m²` or, homogeneous,
/// `w_m = 4π²m²` (mode 0 excluded, which requires `c_0 = 0`).
pub fn sobolev_norm(v: &FourierVector, s: f64, homogeneous: bool) -> Result<f64> {
    if homogeneous && !v.c0_is_zero() {
        return Err(Error::NotMeanZero {
            c0: v.coeff(0).norm(),
            max: v.max_abs(),
        });
    }
    let sum: f64 = v
        .coeffs
        .iter()
        .filter(|(&m, _)| !(homogeneous && m == 0))
        .map(|(&m, c)| weight(m, s, homogeneous) * c.norm_sqr())
        .sum();
    Ok(sum.sqrt())
}

/// `⟨ψ, φ⟩ = Σ_m c_m(ψ) conj(c_m(φ))`: linear in `ψ`, conjugate-linear in `φ`,
/// and equal to `∫ ψ conj(φ)` for square-integrable arguments.
pub fn dual_pairing(psi: &FourierVector, phi: &FourierVector) -> Result<Complex64> {
    for v in [psi, phi] {
        if !v.c0_is_zero() {
            return Err(Error::NotMeanZero {
                c0: v.coeff(0).norm(),
                max: v.max_abs(),
            });
        }
    }
    Ok(psi
        .coeffs
        .iter()
        .filter(|(&m, _)| m != 0)
        .map(|(&m, &c)| c * phi.coeff(m).conj())
        .sum())
}

/// Trapezoid approximation of `∫_0^1 f conj(g) dx`.
pub fn l2_inner(f: &GridFunction, g: &GridFunction) -> Result<Complex64> {
    if f.intervals() != g.intervals() {
        return Err(Error::GridMismatch(format!(
            "N = {} vs N = {}",
            f.intervals(),
            g.intervals()
        )));
    }
    let n = f.intervals();
    let (a, b) = (f.values(), g.values());
    let mut acc = 0.5 * (a[0] * b[0].conj() + a[n] * b[n].conj());
    for i in 1..n {
        acc += a[i] * b[i].conj();
    }
    Ok(acc / n as f64)
}

/// Trapezoid rule for real samples on a uniform grid with spacing `h`.
pub fn trapezoid(values: &[f64], h: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => h * (0.5 * (values[0] + values[n - 1]) + values[1..n - 1].iter().sum::<f64>()),
    }
}

/// Trapezoid rule for complex samples on a uniform grid with spacing `h`.
pub fn trapezoid_c(values: &[Complex64], h: f64) -> Complex64 {
    match values.len() {
        0 | 1 => Complex64::new(0.0, 0.0),
        n => h * (0.5 * (values[0] + values[n - 1]) + values[1..n - 1].iter().sum::<Complex64>()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn constant_and_single_mode_coefficients() {
        let one = GridFunction::from_real_fn(64, |_| 1.0).unwrap();
        let v = fourier_coeffs(&one, 8, 0.0).unwrap();
        assert!((v.coeff(0) - 1.0).norm() < 1e-14);
        assert!(!v.mean_zero);
        for m in 1..=8 {
            assert!(v.coeff(m).norm() < 1e-14 && v.coeff(-m).norm() < 1e-14);
        }
        let e = GridFunction::from_fn(64, |x| c(0.0, -2.0 * PI * x).exp()).unwrap();
        let v = fourier_coeffs(&e, 8, 0.0).unwrap();
        assert!((v.coeff(1) - 1.0).norm() < 1e-14);
        assert!(v.coeff(-1).norm() < 1e-14 && v.coeff(2).norm() < 1e-14);
    }

    #[test]
    fn sine_coefficients() {
        let f = GridFunction::from_real_fn(256, |x| (2.0 * PI * x).sin()).unwrap();
        let v = fourier_coeffs(&f, 16, 1.0).unwrap();
        assert!(v.mean_zero);
        assert!((v.coeff(1) - c(0.0, 0.5)).norm() < 1e-10);
        assert!((v.coeff(-1) - c(0.0, -0.5)).norm() < 1e-10);
        assert!(v.coeff(2).norm() < 1e-10);
    }

    #[test]
    fn too_coarse_grid_reports_minimum() {
        let f = GridFunction::from_real_fn(16, |x| x).unwrap();
        match fourier_coeffs(&f, 8, 0.0) {
            Err(Error::GridTooCoarse { required, .. }) => assert_eq!(required, 33),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn sobolev_norm_examples() {
        let v = FourierVector::new([(1, c(1.0, 0.0))], 1.0, true).unwrap();
        assert!((sobolev_norm(&v, 1.0, true).unwrap() - 2.0 * PI).abs() < 1e-12);
        let inv = (1.0 + 4.0 * PI * PI).powf(-0.5);
        assert!((sobolev_norm(&v, -1.0, false).unwrap() - inv).abs() < 1e-14);
        let w = FourierVector::new([(1, c(3.0, 0.0)), (-2, c(4.0, 0.0))], 0.0, true).unwrap();
        assert!((sobolev_norm(&w, 0.0, false).unwrap() - 5.0).abs() < 1e-14);
    }

    #[test]
    fn homogeneous_norm_rejects_mean() {
        let v = FourierVector::new([(0, c(1.0, 0.0)), (1, c(1.0, 0.0))], 1.0, false).unwrap();
        assert!(matches!(
            sobolev_norm(&v, 1.0, true),
            Err(Error::NotMeanZero { .. })
        ));
        assert!(FourierVector::new([(0, c(1.0, 0.0))], 0.0, true).is_err());
    }

    #[test]
    fn pairing_examples() {
        let e1 = FourierVector::new([(1, c(1.0, 0.0))], 0.0, true).unwrap();
        let e2 = FourierVector::new([(2, c(1.0, 0.0))], 0.0, true).unwrap();
        assert!((dual_pairing(&e1, &e1).unwrap() - 1.0).norm() < 1e-15);
        assert!(dual_pairing(&e1, &e2).unwrap().norm() < 1e-15);
    }

    #[test]
    fn l2_inner_examples() {
        let one = GridFunction::from_real_fn(512, |_| 1.0).unwrap();
        assert!((l2_inner(&one, &one).unwrap() - 1.0).norm() < 1e-14);
        let s = GridFunction::from_real_fn(512, |x| (PI * x).sin()).unwrap();
        assert!((l2_inner(&s, &one).unwrap().re - 2.0 / PI).abs() < 1e-5);
        let s2 = GridFunction::from_real_fn(512, |x| (2.0 * PI * x).sin()).unwrap();
        assert!((l2_inner(&s2, &s2).unwrap().re - 0.5).abs() < 1e-6);
    }

    #[test]
    fn json_round_trip() {
        let v = FourierVector::new([(1, c(0.0, 0.5)), (-1, c(0.0, -0.5))], 1.0, true).unwrap();
        let s = serde_json::to_string(&v).unwrap();
        assert_eq!(s, r#"{"s":1.0,"modes":[[-1,0.0,-0.5],[1,0.0,0.5]]}"#);
        let back: FourierVector = serde_json::from_str(&s).unwrap();
        assert_eq!(back, v);
    }

    #[test]
    fn mismatched_grids_are_rejected() {
        let a = GridFunction::from_real_fn(16, |x| x).unwrap();
        let b = GridFunction::from_real_fn(32, |x| x).unwrap();
        assert!(matches!(l2_inner(&a, &b), Err(Error::GridMismatch(_))));
        assert!(State::new(a, b).is_err());
    }
}
