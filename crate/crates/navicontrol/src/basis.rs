//! Riesz-basis diagnostics: comparison families, quadratic closeness,
//! Gram matrices and their extreme eigenvalues.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expsum::{ExpPair, ExpSum};
use crate::spaces::{GridFunction, State};
use crate::spectral::fit::loglog_slope;
use crate::spectral::{Branch, EigenPair};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    /// `(0, 2i e^{-(1+x)/2} sin(kπ(1-x)))`, `k ≥ 1`.
    Psi,
    /// `(2i sgn(k) e^{-1/2 - i sgn(k)√|kπ|} e^{-2ikπx}, 0)`, `k ∈ ℤ`.
    PsiTilde,
}

fn sgn(k: i64) -> f64 {
    k.signum() as f64
}

/// Amplitude of the transport comparison function.
pub fn psi_tilde_amplitude(k: i64) -> Complex64 {
    let s = sgn(k);
    Complex64::new(0.0, 2.0 * s) * Complex64::new(-0.5, -s * (k.abs() as f64 * PI).sqrt()).exp()
}

/// Closed form of a comparison function as an exponential pair.
pub fn comparison_pair(k: i64, kind: FamilyKind) -> Result<ExpPair> {
    match kind {
        FamilyKind::Psi => {
            if k < 1 {
                return Err(Error::InvalidInput(format!(
                    "diffusive comparison family starts at k = 1, got {k}"
                )));
            }
            let w = Complex64::new(0.0, k as f64 * PI);
            let h = Complex64::new(-0.5, 0.0);
            // 2i e^{-1/2} e^{-x/2} sin(kπ(1-x))
            let second = ExpSum::from_terms([((h + w).exp(), h - w), (-(h - w).exp(), h + w)]);
            Ok(ExpPair::new(ExpSum::new(), second))
        }
        FamilyKind::PsiTilde => {
            let first = ExpSum::from_terms([(
                psi_tilde_amplitude(k),
                Complex64::new(0.0, -2.0 * k as f64 * PI),
            )]);
            Ok(ExpPair::new(first, ExpSum::new()))
        }
    }
}

/// Comparison function sampled on the uniform grid with `n` intervals.
pub fn comparison_family(k: i64, kind: FamilyKind, n: usize) -> Result<State> {
    let p = comparison_pair(k, kind)?;
    State::new(
        GridFunction::from_expsum(n, &p.first)?,
        GridFunction::from_expsum(n, &p.second)?,
    )
}

/// Least-squares scale `s` minimizing `Σ |s·a_i - b_i|²`.
fn match_scale(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    let num: Complex64 = a.iter().zip(b).map(|(x, y)| x.conj() * y).sum();
    let den: f64 = a.iter().map(|x| x.norm_sqr()).sum();
    num / den
}

/// Rescales an eigenpair to the normalization of its comparison function:
/// the diffusive pairs match the two oscillating coefficients of `η` to
/// those of `Ψ_k`, the transport pairs match the fast coefficient of `ξ` to
/// `Ψ̃_k`. Low-frequency pairs are returned unchanged.
pub fn comparison_normalized(pair: &EigenPair) -> EigenPair {
    let n = pair.normalization;
    match pair.branch {
        Branch::Parabolic => {
            let w = Complex64::new(0.0, pair.k as f64 * PI);
            let h = Complex64::new(-0.5, 0.0);
            let a = [n * pair.eta_coeffs[1], n * pair.eta_coeffs[2]];
            let b = [(h + w).exp(), -(h - w).exp()];
            pair.rescaled(match_scale(&a, &b))
        }
        Branch::Hyperbolic => {
            let a = [n * pair.xi_multipliers[0] * pair.eta_coeffs[0]];
            let b = [psi_tilde_amplitude(pair.k)];
            pair.rescaled(match_scale(&a, &b))
        }
        Branch::Low => pair.clone(),
    }
}

/// `‖Φ - Ψ‖²` for one pair in the comparison normalization.
pub fn closeness_term(pair: &EigenPair) -> Result<f64> {
    let kind = match pair.branch {
        Branch::Parabolic => FamilyKind::Psi,
        Branch::Hyperbolic => FamilyKind::PsiTilde,
        Branch::Low => {
            return Err(Error::InvalidInput(
                "low-frequency pairs have no comparison function".into(),
            ))
        }
    };
    let psi = comparison_pair(pair.k, kind)?;
    Ok(comparison_normalized(pair).pair().minus(&psi).norm_sq())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClosenessEntry {
    pub branch: Branch,
    pub k: i64,
    pub diff_sq: f64,
    pub cumsum: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClosenessReport {
    pub entries: Vec<ClosenessEntry>,
    pub parabolic_slope: Option<f64>,
    pub hyperbolic_slope: Option<f64>,
    /// `|k|` range of the slope fits.
    pub fit_range: (i64, i64),
}

impl ClosenessReport {
    /// Cumulative sum `S_K` of one branch (all stored `|k| ≤ K`).
    pub fn partial_sum(&self, branch: Branch, kmax: i64) -> f64 {
        self.entries
            .iter()
            .filter(|e| e.branch == branch && e.k.abs() <= kmax)
            .map(|e| e.diff_sq)
            .sum()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("branch,k,diff_sq,cumsum\n");
        for e in &self.entries {
            let _ = writeln!(s, "{},{},{:e},{:e}", e.branch.name(), e.k, e.diff_sq, e.cumsum);
        }
        s
    }
}

/// Per-`k` squared distances to the comparison families for `k ≤ kmax`
/// (`|k| ≤ kmax` on the transport branch) with cumulative sums and log-log
/// slopes over `fit_range`.
pub fn quadratic_closeness(
    pairs: &[EigenPair],
    kmax: i64,
    fit_range: (i64, i64),
) -> Result<ClosenessReport> {
    let mut para: BTreeMap<i64, &EigenPair> = BTreeMap::new();
    let mut hyp: BTreeMap<(i64, i64), &EigenPair> = BTreeMap::new();
    for p in pairs {
        match p.branch {
            Branch::Parabolic if p.k <= kmax => {
                para.insert(p.k, p);
            }
            Branch::Hyperbolic if p.k.abs() <= kmax => {
                hyp.insert((p.k.abs(), p.k), p);
            }
            _ => {}
        }
    }
    let (lo, hi) = fit_range;
    for k in lo.max(1)..=hi.min(kmax) {
        if !para.contains_key(&k) {
            return Err(Error::InvalidInput(format!("missing parabolic eigenpair k = {k}")));
        }
        for s in [k, -k] {
            if !hyp.contains_key(&(k, s)) {
                return Err(Error::InvalidInput(format!("missing hyperbolic eigenpair k = {s}")));
            }
        }
    }
    let ordered: Vec<&EigenPair> = para.values().chain(hyp.values()).copied().collect();
    let terms: Vec<f64> = ordered
        .par_iter()
        .map(|p| closeness_term(p))
        .collect::<Result<_>>()?;
    let mut entries = Vec::with_capacity(terms.len());
    let mut sums = [0.0f64; 2];
    for (p, d) in ordered.iter().zip(terms) {
        let i = usize::from(p.branch == Branch::Hyperbolic);
        sums[i] += d;
        entries.push(ClosenessEntry {
            branch: p.branch,
            k: p.k,
            diff_sq: d,
            cumsum: sums[i],
        });
    }
    let slope = |b: Branch| {
        let pts: Vec<(f64, f64)> = entries
            .iter()
            .filter(|e| e.branch == b)
            .map(|e| (e.k.abs() as f64, e.diff_sq))
            .collect();
        loglog_slope(&pts, lo as f64, hi as f64)
    };
    Ok(ClosenessReport {
        parabolic_slope: slope(Branch::Parabolic),
        hyperbolic_slope: slope(Branch::Hyperbolic),
        entries,
        fit_range,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct GramMatrix {
    pub matrix: DMatrix<Complex64>,
    /// `max |G - G*|` before symmetrization.
    pub hermitian_defect: f64,
}

fn symmetrize(mut g: DMatrix<Complex64>) -> GramMatrix {
    let n = g.nrows();
    let mut defect = 0.0f64;
    for i in 0..n {
        for j in i..n {
            let a = g[(i, j)];
            let b = g[(j, i)].conj();
            defect = defect.max((a - b).norm());
            let m = 0.5 * (a + b);
            g[(i, j)] = m;
            g[(j, i)] = m.conj();
        }
        g[(i, i)].im = 0.0;
    }
    GramMatrix {
        matrix: g,
        hermitian_defect: defect,
    }
}

fn assemble<F: Fn(usize, usize) -> Result<Complex64> + Sync>(n: usize, f: F) -> Result<DMatrix<Complex64>> {
    let entries: Vec<Complex64> = (0..n * n)
        .into_par_iter()
        .map(|idx| f(idx / n, idx % n))
        .collect::<Result<_>>()?;
    Ok(DMatrix::from_row_slice(n, n, &entries))
}

/// `G_jk = ⟨F_k, F_j⟩` in `L² × L²` by the trapezoid rule.
pub fn gram_matrix(family: &[State]) -> Result<GramMatrix> {
    if family.is_empty() {
        return Err(Error::InvalidInput("empty family".into()));
    }
    let n = family[0].intervals();
    if family.iter().any(|s| s.intervals() != n) {
        return Err(Error::GridMismatch("family members on different grids".into()));
    }
    let g = assemble(family.len(), |j, k| family[k].inner(&family[j]))?;
    Ok(symmetrize(g))
}

/// Same Gram matrix with exact exponential-sum integrals.
pub fn gram_matrix_exact(family: &[ExpPair]) -> Result<GramMatrix> {
    if family.is_empty() {
        return Err(Error::InvalidInput("empty family".into()));
    }
    let g = assemble(family.len(), |j, k| Ok(family[k].inner(&family[j])))?;
    Ok(symmetrize(g))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncationPoint {
    pub size: usize,
    pub min_eig: f64,
    pub max_eig: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GramReport {
    pub size: usize,
    pub min_eig: f64,
    pub max_eig: f64,
    /// `max/min`, infinite for a singular matrix.
    pub condition: f64,
    pub history: Vec<TruncationPoint>,
}

impl GramReport {
    /// Appends a larger truncation, keeping the earlier points.
    pub fn extend(&mut self, next: &GramReport) {
        self.size = next.size;
        self.min_eig = next.min_eig;
        self.max_eig = next.max_eig;
        self.condition = next.condition;
        self.history.extend_from_slice(&next.history);
    }

    /// Largest relative change of `min_eig` between consecutive truncations.
    pub fn min_eig_drift(&self) -> f64 {
        self.history
            .windows(2)
            .map(|w| (w[1].min_eig - w[0].min_eig).abs() / w[0].min_eig.abs().max(1e-300))
            .fold(0.0, f64::max)
    }
}

/// Extreme eigenvalues of a Hermitian matrix.
pub fn riesz_bounds(g: &DMatrix<Complex64>) -> GramReport {
    let eig = SymmetricEigen::new(g.clone()).eigenvalues;
    let min_eig = eig.iter().copied().fold(f64::INFINITY, f64::min);
    let max_eig = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let condition = if min_eig > 0.0 { max_eig / min_eig } else { f64::INFINITY };
    GramReport {
        size: g.nrows(),
        min_eig,
        max_eig,
        condition,
        history: vec![TruncationPoint {
            size: g.nrows(),
            min_eig,
            max_eig,
        }],
    }
}

/// Unit-normalized members of the union family: every low pair, diffusive
/// pairs with `k ≤ kmax` and transport pairs with `|k| ≤ kmax`.
pub fn union_family(pairs: &[EigenPair], kmax: i64) -> Vec<ExpPair> {
    pairs
        .iter()
        .filter(|p| match p.branch {
            Branch::Low => true,
            Branch::Parabolic => p.k <= kmax,
            Branch::Hyperbolic => p.k.abs() <= kmax,
        })
        .map(|p| {
            let f = p.pair();
            let n = f.norm_sq().sqrt();
            f.scaled(Complex64::new(1.0 / n, 0.0))
        })
        .collect()
}

/// Riesz bounds of the union family over increasing truncations.
pub fn union_gram_history(pairs: &[EigenPair], ks: &[i64]) -> Result<GramReport> {
    let mut report: Option<GramReport> = None;
    for &k in ks {
        let g = gram_matrix_exact(&union_family(pairs, k))?;
        let r = riesz_bounds(&g.matrix);
        match report.as_mut() {
            Some(acc) => acc.extend(&r),
            None => report = Some(r),
        }
    }
    report.ok_or_else(|| Error::InvalidInput("no truncation levels given".into()))
}
