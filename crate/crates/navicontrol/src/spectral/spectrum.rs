//! The three eigenvalue families of the adjoint operator.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::contour::{count_zeros, ContourOptions, Rect};
use super::det::{char_fn_symmetric, Scaled};
use super::newton::{refine_root_with, root_residual, NewtonOptions, Objective};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Parabolic,
    Hyperbolic,
    Low,
}

impl Branch {
    pub fn name(self) -> &'static str {
        match self {
            Branch::Parabolic => "parabolic",
            Branch::Hyperbolic => "hyperbolic",
            Branch::Low => "low",
        }
    }
}

/// One refined eigenvalue with its search metadata.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RootRecord {
    pub branch: Branch,
    /// Branch index; for low-frequency roots the 1-based position in the list.
    pub k: i64,
    pub lambda: Complex64,
    pub residual: f64,
    pub iterations: usize,
    /// Root lies in its counting window (or in the low box).
    pub window_ok: bool,
    /// Argument-principle count of the window.
    pub window_count: i64,
}

impl RootRecord {
    pub fn mu(&self) -> Complex64 {
        -self.lambda
    }
}

/// A seed that did not produce a branch eigenvalue.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RejectedSeed {
    pub branch: Branch,
    pub k: i64,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumConfig {
    /// Parabolic indices `k`, inclusive.
    pub k_para: (i64, i64),
    /// Hyperbolic `|k|`, inclusive; both signs are searched.
    pub k_hyp: (i64, i64),
    /// Low-frequency box in the `λ` plane.
    pub low_box: Rect,
    pub newton: NewtonOptions,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        Self {
            k_para: (1, 60),
            k_hyp: (1, 60),
            low_box: default_low_box(),
            newton: NewtonOptions::default(),
        }
    }
}

pub fn default_low_box() -> Rect {
    Rect {
        re_min: -60.0,
        re_max: -1e-3,
        im_min: -25.0,
        im_max: 25.0,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub parabolic: BTreeMap<i64, RootRecord>,
    pub hyperbolic: BTreeMap<i64, RootRecord>,
    pub low: Vec<RootRecord>,
    pub k_min_p: i64,
    pub k_min_h: i64,
    pub low_box: Rect,
    /// Argument-principle count over the low box.
    pub low_count: i64,
    /// `max |Re λ^p_k + k²π²|`.
    pub c_p: f64,
    /// `max |k| · |λ^h_k + 1 + 2ikπ|`.
    pub c_h: f64,
    pub rejected: Vec<RejectedSeed>,
}

/// `R_k`: the window around `kπ` in the `√μ` plane.
pub fn parabolic_window(k: i64) -> Rect {
    let c = k as f64 * PI;
    Rect {
        re_min: c - PI / 2.0,
        re_max: c + PI / 2.0,
        im_min: -PI / 2.0,
        im_max: PI / 2.0,
    }
}

/// `S_k`: the window around `1 + 2ikπ` in the `μ` plane.
pub fn hyperbolic_window(k: i64) -> Rect {
    let c = 2.0 * k as f64 * PI;
    Rect {
        re_min: 1.0 - PI / 2.0,
        re_max: 1.0 + PI / 2.0,
        im_min: c - PI / 2.0,
        im_max: c + PI / 2.0,
    }
}

fn sym_mu(mu: Complex64) -> Result<Scaled> {
    char_fn_symmetric(mu)
}

fn sym_sqrt_plane(w: Complex64) -> Result<Scaled> {
    char_fn_symmetric(w * w)
}

fn sym_lambda_plane(l: Complex64) -> Result<Scaled> {
    char_fn_symmetric(-l)
}

/// Zero count of the characteristic function in `R_k` (in `√μ`).
pub fn parabolic_window_count(k: i64) -> Result<i64> {
    Ok(count_zeros(&sym_sqrt_plane, &parabolic_window(k), &ContourOptions::default())?.count)
}

/// Zero count of the characteristic function in `S_k` (in `μ`).
pub fn hyperbolic_window_count(k: i64) -> Result<i64> {
    Ok(count_zeros(&sym_mu, &hyperbolic_window(k), &ContourOptions::default())?.count)
}

/// Zero count in a `λ`-plane rectangle.
pub fn lambda_box_count(rect: &Rect) -> Result<i64> {
    Ok(count_zeros(&sym_lambda_plane, rect, &ContourOptions::default())?.count)
}

enum Seeded {
    Accepted(RootRecord),
    Rejected(RejectedSeed),
}

fn branch_seed(branch: Branch, k: i64, cfg: &SpectrumConfig) -> Result<Seeded> {
    let seed = match branch {
        Branch::Parabolic => Complex64::new((k as f64 * PI).powi(2), 0.0),
        _ => Complex64::new(1.0, 2.0 * k as f64 * PI),
    };
    let reject = |reason: String| Ok(Seeded::Rejected(RejectedSeed { branch, k, reason }));
    let root = match refine_root_with(seed, &cfg.newton) {
        Ok(r) => r,
        Err(e @ (Error::Diverged { .. } | Error::NoConvergence { .. })) => {
            return reject(e.to_string())
        }
        Err(e) => return Err(e),
    };
    let mut mu = root.mu;
    let mut residual = root.residual;
    if branch == Branch::Parabolic && mu.im.abs() <= 1e-9 * mu.norm() {
        let real = Complex64::new(mu.re, 0.0);
        let r = root_residual(real)?;
        if r <= residual.max(cfg.newton.tol) {
            mu = real;
            residual = r;
        }
    }
    let lambda = Complex64::new(-mu.re, -mu.im + 0.0);
    let (window_ok, window_count) = match branch {
        Branch::Parabolic => (
            parabolic_window(k).contains(mu.sqrt()),
            parabolic_window_count(k)?,
        ),
        _ => (hyperbolic_window(k).contains(mu), hyperbolic_window_count(k)?),
    };
    if !window_ok {
        return reject(format!("converged outside its window to lambda = {lambda}"));
    }
    if cfg.low_box.contains(lambda) {
        return reject(format!("lambda = {lambda} lies in the low-frequency box"));
    }
    if window_count != 1 {
        return Err(Error::CountMismatch(format!(
            "{} window k = {k} holds {window_count} zeros, expected 1",
            branch.name()
        )));
    }
    Ok(Seeded::Accepted(RootRecord {
        branch,
        k,
        lambda,
        residual,
        iterations: root.iterations,
        window_ok,
        window_count,
    }))
}

/// Keeps the longest run of accepted indices ending at the largest `|k|`;
/// `ks` is ordered by increasing `|k|`. Returns the smallest kept `|k|`.
fn contiguous_tail(
    branch: Branch,
    ks: &[i64],
    results: Vec<Seeded>,
    rejected: &mut Vec<RejectedSeed>,
) -> (BTreeMap<i64, RootRecord>, i64) {
    let mut by_k: BTreeMap<i64, Seeded> = ks.iter().copied().zip(results).collect();
    let mut k_min = i64::MAX;
    for &k in ks.iter().rev() {
        match by_k.get(&k) {
            Some(Seeded::Accepted(_)) => k_min = k.abs(),
            _ => break,
        }
    }
    let mut out = BTreeMap::new();
    for (k, s) in std::mem::take(&mut by_k) {
        match s {
            Seeded::Accepted(r) if k.abs() >= k_min => {
                out.insert(k, r);
            }
            Seeded::Accepted(r) => rejected.push(RejectedSeed {
                branch,
                k,
                reason: format!("isolated below the contiguous branch (lambda = {})", r.lambda),
            }),
            Seeded::Rejected(r) => rejected.push(r),
        }
    }
    (out, k_min)
}

/// Golden-ratio split fraction: keeps cell edges away from the real axis and
/// from previously used lines.
const SPLIT: f64 = 0.381_966_011_250_105;

fn search_cell(
    cell: Rect,
    count: i64,
    depth: u32,
    newton: &NewtonOptions,
    out: &mut Vec<(Complex64, f64, usize)>,
) -> Result<()> {
    if count <= 0 {
        return Ok(());
    }
    let opts = ContourOptions::default();
    if count == 1 {
        let est = count_zeros(&sym_lambda_plane, &cell, &opts)?.zero_sum;
        let seed = if cell.contains(est) { est } else { cell.center() };
        let nopts = NewtonOptions {
            guard_radius: Some(cell.diagonal()),
            objective: Objective::Symmetric,
            ..*newton
        };
        if let Ok(r) = refine_root_with(-seed, &nopts) {
            let lambda = -r.mu;
            if cell.contains_with(lambda, 1e-12 * cell.diagonal()) {
                out.push((lambda, r.residual, r.iterations));
                return Ok(());
            }
        }
    }
    if depth >= 40 {
        return Err(Error::CountMismatch(format!(
            "cell {cell:?} holds {count} zeros that could not be isolated"
        )));
    }
    let (a, b) = cell.split(SPLIT);
    let ca = count_zeros(&sym_lambda_plane, &a, &opts)?.count;
    let cb = count_zeros(&sym_lambda_plane, &b, &opts)?.count;
    if ca + cb != count || ca < 0 || cb < 0 {
        return Err(Error::CountMismatch(format!(
            "cell {cell:?} counts {count} but halves count {ca} + {cb}"
        )));
    }
    search_cell(a, ca, depth + 1, newton, out)?;
    search_cell(b, cb, depth + 1, newton, out)
}

/// Zeros in a `λ`-plane box, isolated by argument-principle bisection and
/// refined by Newton's method on the label-free characteristic function.
pub fn low_frequency_roots(rect: &Rect, newton: &NewtonOptions) -> Result<(Vec<RootRecord>, i64)> {
    if rect.re_max >= 0.0 {
        return Err(Error::InvalidInput(
            "low-frequency box must lie in Re(lambda) < 0".into(),
        ));
    }
    let total = lambda_box_count(rect)?;
    let mut found = Vec::new();
    search_cell(*rect, total, 0, newton, &mut found)?;
    if found.len() as i64 != total {
        return Err(Error::CountMismatch(format!(
            "low box counts {total} zeros but {} were refined",
            found.len()
        )));
    }
    found.sort_by(|a, b| {
        a.0.norm()
            .total_cmp(&b.0.norm())
            .then(a.0.im.total_cmp(&b.0.im))
    });
    let low = found
        .into_iter()
        .enumerate()
        .map(|(i, (lambda, residual, iterations))| {
            let lambda = if lambda.im.abs() <= 1e-9 * lambda.norm() {
                Complex64::new(lambda.re, 0.0)
            } else {
                lambda + 0.0
            };
            RootRecord {
                branch: Branch::Low,
                k: i as i64 + 1,
                lambda,
                residual,
                iterations,
                window_ok: true,
                window_count: 1,
            }
        })
        .collect();
    Ok((low, total))
}

pub fn compute_spectrum(cfg: &SpectrumConfig) -> Result<Spectrum> {
    let (p0, p1) = cfg.k_para;
    let (h0, h1) = cfg.k_hyp;
    if p0 < 1 || p1 < p0 || h0 < 1 || h1 < h0 {
        return Err(Error::InvalidInput(format!(
            "index ranges must be non-empty and positive: {p0}..={p1}, {h0}..={h1}"
        )));
    }
    let pks: Vec<i64> = (p0..=p1).collect();
    let hpos: Vec<i64> = (h0..=h1).collect();
    let hneg: Vec<i64> = (h0..=h1).map(|k| -k).collect();

    let run = |branch: Branch, ks: &[i64]| -> Result<Vec<Seeded>> {
        ks.par_iter().map(|&k| branch_seed(branch, k, cfg)).collect()
    };
    let para = run(Branch::Parabolic, &pks)?;
    let hp = run(Branch::Hyperbolic, &hpos)?;
    let hn = run(Branch::Hyperbolic, &hneg)?;
    let (low, low_count) = low_frequency_roots(&cfg.low_box, &cfg.newton)?;

    let mut rejected = Vec::new();
    let (parabolic, k_min_p) = contiguous_tail(Branch::Parabolic, &pks, para, &mut rejected);
    let (hyp_pos, kp) = contiguous_tail(Branch::Hyperbolic, &hpos, hp, &mut rejected);
    let (hyp_neg, kn) = contiguous_tail(Branch::Hyperbolic, &hneg, hn, &mut rejected);
    if parabolic.is_empty() || hyp_pos.is_empty() {
        return Err(Error::Invariant(
            "no branch eigenvalue accepted in the requested range".into(),
        ));
    }
    let k_min_h = kp.max(kn);
    let mut hyperbolic = BTreeMap::new();
    for (k, r) in hyp_pos.into_iter().chain(hyp_neg) {
        if k.abs() >= k_min_h {
            hyperbolic.insert(k, r);
        } else {
            rejected.push(RejectedSeed {
                branch: Branch::Hyperbolic,
                k,
                reason: "partner index -k not accepted".into(),
            });
        }
    }
    rejected.sort_by_key(|r| (r.branch, r.k));

    let c_p = parabolic
        .iter()
        .map(|(&k, r)| (r.lambda.re + (k as f64 * PI).powi(2)).abs())
        .fold(0.0, f64::max);
    let c_h = hyperbolic
        .iter()
        .map(|(&k, r)| k.abs() as f64 * (r.lambda + Complex64::new(1.0, 2.0 * k as f64 * PI)).norm())
        .fold(0.0, f64::max);

    let spec = Spectrum {
        parabolic,
        hyperbolic,
        low,
        k_min_p,
        k_min_h,
        low_box: cfg.low_box,
        low_count,
        c_p,
        c_h,
        rejected,
    };
    spec.check_invariants()?;
    Ok(spec)
}

impl Spectrum {
    /// All records: low, then parabolic by `k`, then hyperbolic by `k`.
    pub fn records(&self) -> Vec<RootRecord> {
        self.low
            .iter()
            .chain(self.parabolic.values())
            .chain(self.hyperbolic.values())
            .copied()
            .collect()
    }

    pub fn len(&self) -> usize {
        self.low.len() + self.parabolic.len() + self.hyperbolic.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Restriction to `k ≤ kp` parabolic and `|k| ≤ kh` hyperbolic roots
    /// (low roots always kept).
    pub fn truncated(&self, kp: i64, kh: i64) -> Spectrum {
        let mut s = self.clone();
        s.parabolic.retain(|&k, _| k <= kp);
        s.hyperbolic.retain(|&k, _| k.abs() <= kh);
        s
    }

    pub fn check_invariants(&self) -> Result<()> {
        let all = self.records();
        for r in &all {
            if r.lambda.re >= 0.0 {
                return Err(Error::Invariant(format!(
                    "{} k = {}: Re(lambda) = {} is not negative",
                    r.branch.name(),
                    r.k,
                    r.lambda.re
                )));
            }
            if r.lambda.norm() == 0.0 {
                return Err(Error::Invariant("lambda = 0 in the spectrum".into()));
            }
        }
        for (i, a) in all.iter().enumerate() {
            let partner = all
                .iter()
                .map(|b| (b.lambda - a.lambda.conj()).norm())
                .fold(f64::INFINITY, f64::min);
            if partner > 1e-8 * a.lambda.norm().max(1.0) {
                return Err(Error::Invariant(format!(
                    "conjugate of {} k = {} (lambda = {}) missing; nearest at {partner:e}",
                    a.branch.name(),
                    a.k,
                    a.lambda
                )));
            }
            for b in &all[i + 1..] {
                if (a.lambda - b.lambda).norm() <= 1e-6 {
                    return Err(Error::Invariant(format!(
                        "eigenvalues {} and {} are not distinct",
                        a.lambda, b.lambda
                    )));
                }
            }
        }
        Ok(())
    }

    /// Header `branch,k,re_lambda,im_lambda,residual,window_ok`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("branch,k,re_lambda,im_lambda,residual,window_ok\n");
        for r in self.records() {
            let _ = writeln!(
                s,
                "{},{},{:e},{:e},{:e},{}",
                r.branch.name(),
                r.k,
                r.lambda.re,
                r.lambda.im,
                r.residual,
                r.window_ok
            );
        }
        s
    }
}
