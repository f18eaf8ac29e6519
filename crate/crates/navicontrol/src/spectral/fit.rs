//! Branch asymptotics: the corrections `c_k, d_k` (parabolic) and
//! `α_{1,k}, α_{2,k}` (hyperbolic) with their log-log decay rates.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::spectrum::Spectrum;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParabolicCorrection {
    pub k: i64,
    /// `Re(√μ_k) - kπ`.
    pub c: f64,
    /// `Im(√μ_k)`.
    pub d: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperbolicCorrection {
    pub k: i64,
    /// `λ = -1 - α₁ - i(2kπ + α₂)`.
    pub alpha1: f64,
    pub alpha2: f64,
    /// `|λ + 1 + 2ikπ|`.
    pub defect: f64,
}

/// Least-squares slope of `log|value|` against `log|k|`; `None` when some
/// value vanishes (a correction that is identically zero has no rate).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Slopes {
    pub c: Option<f64>,
    pub d: Option<f64>,
    pub alpha1: Option<f64>,
    pub alpha2: Option<f64>,
    pub defect: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub parabolic: Vec<ParabolicCorrection>,
    pub hyperbolic: Vec<HyperbolicCorrection>,
    /// `|k|` range the slopes were fitted over.
    pub fit_range: (i64, i64),
    pub slopes: Slopes,
    /// Largest modulus of any correction.
    pub max_abs: f64,
}

pub fn parabolic_correction(k: i64, lambda: Complex64) -> ParabolicCorrection {
    let w = (-lambda).sqrt() - k as f64 * PI;
    ParabolicCorrection { k, c: w.re, d: w.im }
}

pub fn hyperbolic_correction(k: i64, lambda: Complex64) -> HyperbolicCorrection {
    let kp = 2.0 * k as f64 * PI;
    HyperbolicCorrection {
        k,
        alpha1: -1.0 - lambda.re,
        alpha2: -lambda.im - kp,
        defect: (lambda + Complex64::new(1.0, kp)).norm(),
    }
}

/// Least-squares slope of `ln y` on `ln x` for the points with `x` in `[lo, hi]`.
pub fn loglog_slope(points: &[(f64, f64)], lo: f64, hi: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, _)| *x >= lo && *x <= hi)
        .copied()
        .collect();
    if pts.len() < 2 || pts.iter().any(|&(x, y)| !(x > 0.0 && y > 0.0)) {
        return None;
    }
    let n = pts.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for &(x, y) in &pts {
        let (lx, ly) = (x.ln(), y.ln());
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    let den = n * sxx - sx * sx;
    if den == 0.0 {
        None
    } else {
        Some((n * sxy - sx * sy) / den)
    }
}

/// Fits over the upper half of the common `|k|` range.
pub fn asymptotic_fit(spec: &Spectrum) -> Result<FitReport> {
    let top = spec
        .parabolic
        .keys()
        .max()
        .copied()
        .unwrap_or(0)
        .min(spec.hyperbolic.keys().map(|k| k.abs()).max().unwrap_or(0));
    let bottom = spec.k_min_p.max(spec.k_min_h);
    asymptotic_fit_range(spec, ((bottom + top) / 2, top))
}

pub fn asymptotic_fit_range(spec: &Spectrum, range: (i64, i64)) -> Result<FitReport> {
    let parabolic: Vec<_> = spec
        .parabolic
        .iter()
        .map(|(&k, r)| parabolic_correction(k, r.lambda))
        .collect();
    let hyperbolic: Vec<_> = spec
        .hyperbolic
        .iter()
        .map(|(&k, r)| hyperbolic_correction(k, r.lambda))
        .collect();
    let (lo, hi) = range;
    let np = parabolic.iter().filter(|c| c.k >= lo && c.k <= hi).count();
    let nh = hyperbolic
        .iter()
        .filter(|c| c.k > 0 && c.k >= lo && c.k <= hi)
        .count();
    if np < 10 || nh < 10 {
        return Err(Error::InvalidInput(format!(
            "asymptotic fit over k in [{lo}, {hi}] needs 10 consecutive indices per branch, \
             have {np} parabolic and {nh} hyperbolic"
        )));
    }
    let (lo, hi) = (lo as f64, hi as f64);
    let pslope = |f: &dyn Fn(&ParabolicCorrection) -> f64| {
        let pts: Vec<_> = parabolic.iter().map(|c| (c.k as f64, f(c).abs())).collect();
        loglog_slope(&pts, lo, hi)
    };
    let hslope = |f: &dyn Fn(&HyperbolicCorrection) -> f64| {
        let pts: Vec<_> = hyperbolic
            .iter()
            .map(|c| (c.k.abs() as f64, f(c).abs()))
            .collect();
        loglog_slope(&pts, lo, hi)
    };
    let slopes = Slopes {
        c: pslope(&|c| c.c),
        d: pslope(&|c| c.d),
        alpha1: hslope(&|c| c.alpha1),
        alpha2: hslope(&|c| c.alpha2),
        defect: hslope(&|c| c.defect),
    };
    let max_abs = parabolic
        .iter()
        .flat_map(|c| [c.c.abs(), c.d.abs()])
        .chain(hyperbolic.iter().flat_map(|c| [c.alpha1.abs(), c.alpha2.abs()]))
        .fold(0.0, f64::max);
    Ok(FitReport {
        parabolic,
        hyperbolic,
        fit_range: range,
        slopes,
        max_abs,
    })
}
