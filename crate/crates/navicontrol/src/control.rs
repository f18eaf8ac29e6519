//! Observation, moment targets and minimal-norm control synthesis.
//!
//! For an adjoint eigenpair `Φ = (ξ, η)` with eigenvalue `λ`, the modal
//! coefficient `c(t) = ⟨U(t), Φ⟩` of the controlled state obeys
//! `c' = conj(λ) c + conj(ξ(1)) p`, so `c(T) = 0` is the moment equation
//!
//! ```text
//! -∫_0^T conj(e^{λ(T-t)}) p(t) dt = conj(e^{λT}) ⟨U0, Φ⟩ / conj(ξ(1)).
//! ```
//!
//! Controls are sought as `p(t) = w(t) Σ_j a_j e^{λ_j (T-t)}` with the
//! smooth window `w(t) = sin^{2n}(πt/T)` (`n = 0` gives the plain
//! minimal-`L²` control). The Gram matrix of the weighted exponentials is
//! known in closed form.

use std::f64::consts::PI;
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expsum::{exp_integral, expm1c, ExpSum};
use crate::spaces::{dual_pairing, l2_inner, trapezoid, trapezoid_c, FourierVector, GridFunction, State};
use crate::spectral::{Branch, EigenPair, Spectrum};

/// `|ξ(1)| / ‖Φ‖` below this is treated as a vanishing observation.
pub const OBSERVATION_TOL: f64 = 1e-12;

/// `B*Φ = ξ(1)`.
pub fn observation(pair: &EigenPair) -> Complex64 {
    pair.xi_at_one()
}

// ---------------------------------------------------------------------------
// Initial data

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Velocity {
    /// Closed form as an exponential sum; pairings are exact.
    Closed(ExpSum),
    /// Grid samples; pairings use the trapezoid rule.
    Grid(GridFunction),
}

impl Velocity {
    pub fn eval_on(&self, n: usize) -> Result<GridFunction> {
        match self {
            Velocity::Closed(f) => GridFunction::from_expsum(n, f),
            Velocity::Grid(g) if g.intervals() == n => Ok(g.clone()),
            Velocity::Grid(g) => Err(Error::GridMismatch(format!(
                "velocity sampled with N = {}, requested N = {n}",
                g.intervals()
            ))),
        }
    }

    fn inner(&self, eta: &ExpSum) -> Result<Complex64> {
        match self {
            Velocity::Closed(f) => Ok(f.inner(eta)),
            Velocity::Grid(g) => l2_inner(g, &GridFunction::from_expsum(g.intervals(), eta)?),
        }
    }

    fn is_real(&self) -> bool {
        match self {
            Velocity::Closed(f) => (0..=16).all(|i| {
                let v = f.eval(i as f64 / 16.0);
                v.im.abs() <= 1e-12 * v.norm().max(1.0)
            }),
            Velocity::Grid(g) => g.values().iter().all(|v| v.im == 0.0),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitialData {
    pub rho0: FourierVector,
    pub u0: Velocity,
}

impl InitialData {
    /// `(sin 2πx, sin πx)`.
    pub fn standard() -> Self {
        let half = Complex64::new(0.0, 0.5);
        Self {
            rho0: FourierVector::new([(1, half), (-1, -half)], 1.0, true)
                .expect("sin(2πx) is mean-zero"),
            u0: Velocity::Closed(ExpSum::sine(1.0, 1.0)),
        }
    }

    pub fn zero() -> Self {
        Self {
            rho0: FourierVector::new(std::iter::empty(), 1.0, true).expect("empty vector"),
            u0: Velocity::Closed(ExpSum::new()),
        }
    }

    pub fn to_state(&self, n: usize) -> Result<State> {
        State::new(
            GridFunction::from_fn(n, |x| self.rho0.eval(x))?,
            self.u0.eval_on(n)?,
        )
    }

    pub fn is_real(&self) -> bool {
        let rho_real = self
            .rho0
            .coeffs
            .iter()
            .all(|(&m, &c)| (self.rho0.coeff(-m) - c.conj()).norm() <= 1e-14 * c.norm().max(1e-300));
        rho_real && self.u0.is_real()
    }

    /// `⟨U0, Φ⟩ = ⟨ρ0, ξ⟩ + ⟨u0, η⟩`, conjugate-linear in `Φ`.
    pub fn pairing(&self, pair: &EigenPair) -> Result<Complex64> {
        let xi = pair.xi();
        let xi_modes = FourierVector::new(
            self.rho0
                .coeffs
                .keys()
                .filter(|&&m| m != 0)
                .map(|&m| (m, xi.fourier_coeff(m))),
            -self.rho0.sobolev_exponent,
            true,
        )?;
        Ok(dual_pairing(&self.rho0, &xi_modes)? + self.u0.inner(&pair.eta())?)
    }

    /// `‖U0‖` in `L² × L²` (density part from its Fourier coefficients).
    pub fn l2_norm(&self) -> Result<f64> {
        let rho: f64 = self.rho0.coeffs.values().map(|c| c.norm_sqr()).sum();
        let u = match &self.u0 {
            Velocity::Closed(f) => f.norm_sq(),
            Velocity::Grid(g) => l2_inner(g, g)?.re,
        };
        Ok((rho + u).sqrt())
    }
}

// ---------------------------------------------------------------------------
// Moment system

/// One exponent of the moment problem. `branch == None` marks the mean mode
/// `λ = 0` with eigenfunction `(1, 0)`, which enforces `∫ρ0 + ∫p = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Exponent {
    pub lambda: Complex64,
    pub branch: Option<Branch>,
    pub k: i64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentSystem {
    pub exponents: Vec<Exponent>,
    pub targets: Vec<Complex64>,
    pub horizon: f64,
    pub sobolev_exponent: f64,
    pub real_data: bool,
    pub warnings: Vec<String>,
}

impl MomentSystem {
    pub fn lambdas(&self) -> Vec<Complex64> {
        self.exponents.iter().map(|e| e.lambda).collect()
    }

    pub fn len(&self) -> usize {
        self.exponents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exponents.is_empty()
    }

    /// Index of the exponent closest to `conj(λ_i)`.
    fn partner(&self, i: usize) -> (usize, f64) {
        let target = self.exponents[i].lambda.conj();
        self.exponents
            .iter()
            .enumerate()
            .map(|(j, e)| (j, (e.lambda - target).norm()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("non-empty")
    }

    /// Exponents distinct and conjugate-closed; targets conjugate-consistent
    /// for real data.
    pub fn validate(&self) -> Result<()> {
        if self.exponents.len() != self.targets.len() {
            return Err(Error::InvalidInput("exponent and target counts differ".into()));
        }
        for i in 0..self.len() {
            let li = self.exponents[i].lambda;
            for e in &self.exponents[i + 1..] {
                if (e.lambda - li).norm() <= 1e-10 * li.norm().max(1.0) {
                    return Err(Error::Invariant(format!("repeated exponent {li}")));
                }
            }
            let (j, d) = self.partner(i);
            if d > 1e-8 * li.norm().max(1.0) {
                return Err(Error::Invariant(format!("exponent {li} has no conjugate partner")));
            }
            if self.real_data {
                let (a, b) = (self.targets[j], self.targets[i].conj());
                let defect = (a - b).norm();
                let scale = a.norm().max(b.norm());
                if defect > 1e-8 * scale.max(1e-300) && defect > 1e-300 {
                    return Err(Error::ConjugateInconsistent { index: i, defect });
                }
            }
        }
        Ok(())
    }

    pub fn targets_of(&self, branch: Branch) -> Vec<(i64, Complex64)> {
        self.exponents
            .iter()
            .zip(&self.targets)
            .filter(|(e, _)| e.branch == Some(branch))
            .map(|(e, &t)| (e.k, t))
            .collect()
    }
}

/// Moment targets for every pair plus the mean mode.
pub fn moment_targets(data: &InitialData, pairs: &[EigenPair], horizon: f64) -> Result<MomentSystem> {
    if !(horizon > 0.0) {
        return Err(Error::InvalidInput(format!("horizon must be positive, got {horizon}")));
    }
    if !data.rho0.mean_zero {
        return Err(Error::NotMeanZero {
            c0: data.rho0.coeff(0).norm(),
            max: data.rho0.max_abs(),
        });
    }
    let mut warnings = Vec::new();
    if horizon <= 1.0 {
        warnings.push(format!(
            "T = {horizon} does not exceed the transport time 1; the moment problem need not be solvable"
        ));
    }
    let per_pair: Vec<(Exponent, Complex64)> = pairs
        .par_iter()
        .map(|p| {
            let obs = observation(p);
            let rel = obs.norm() / p.norm();
            if !(rel > OBSERVATION_TOL) {
                return Err(Error::ObservationDegenerate {
                    lambda: p.lambda,
                    value: rel,
                });
            }
            let decay = (p.lambda * horizon).exp().conj();
            let target = decay * data.pairing(p)? / obs.conj();
            Ok((
                Exponent {
                    lambda: p.lambda,
                    branch: Some(p.branch),
                    k: p.k,
                },
                target,
            ))
        })
        .collect::<Result<_>>()?;
    let mean = Exponent {
        lambda: Complex64::new(0.0, 0.0),
        branch: None,
        k: 0,
    };
    let (mut exponents, mut targets): (Vec<_>, Vec<_>) = per_pair.into_iter().unzip();
    exponents.insert(0, mean);
    targets.insert(0, data.rho0.coeff(0));
    let ms = MomentSystem {
        exponents,
        targets,
        horizon,
        sobolev_exponent: data.rho0.sobolev_exponent,
        real_data: data.is_real(),
        warnings,
    };
    ms.validate()?;
    Ok(ms)
}

// ---------------------------------------------------------------------------
// Weighted exponential integrals

/// Control window `sin^{2n}(πt/T)`; `power = 0` is no window.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ControlWeight {
    pub power: u32,
}

impl Default for ControlWeight {
    fn default() -> Self {
        Self { power: 2 }
    }
}

impl ControlWeight {
    pub const NONE: ControlWeight = ControlWeight { power: 0 };

    pub fn eval(&self, t: f64, horizon: f64) -> f64 {
        (PI * t / horizon).sin().powi(2 * self.power as i32)
    }

    /// `sin^{2n}(x) = Σ_q w_q e^{iqx}` over even `q ∈ [-2n, 2n]`.
    pub fn fourier_terms(&self) -> Vec<(f64, f64)> {
        let n = self.power as i64;
        let mut binom = 1.0f64;
        let sign_n = if n % 2 == 0 { 1.0 } else { -1.0 };
        let scale = sign_n / 4f64.powi(n as i32);
        let mut out = Vec::with_capacity(2 * n as usize + 1);
        for j in 0..=2 * n {
            if j > 0 {
                binom = binom * (2 * n - j + 1) as f64 / j as f64;
            }
            let sj = if j % 2 == 0 { 1.0 } else { -1.0 };
            out.push(((2 * j - 2 * n) as f64, binom * sj * scale));
        }
        out
    }
}

/// `∫_0^T sin^{2n}(πs/T) e^{zs} ds`, exact.
pub fn weighted_exp_integral(power: u32, z: Complex64, horizon: f64) -> Complex64 {
    if power == 0 {
        return exp_integral(z, horizon);
    }
    let a = PI / horizon;
    let near = std::iter::once(z.norm())
        .chain((1..=power).flat_map(|j| {
            let w = Complex64::new(0.0, 2.0 * j as f64 * a);
            [(z - w).norm(), (z + w).norm()]
        }))
        .fold(f64::INFINITY, f64::min);
    if near < 0.5 * a {
        // Close to a removable singularity of the product formula.
        return ControlWeight { power }
            .fourier_terms()
            .into_iter()
            .map(|(q, w)| w * exp_integral(z + Complex64::new(0.0, q * a), horizon))
            .sum();
    }
    let mut den = z;
    let mut num = expm1c(z * horizon);
    for j in 1..=power {
        let jj = (2 * j) as f64;
        num *= (jj - 1.0) * jj * a * a;
        den *= z * z + jj * jj * a * a;
    }
    num / den
}

/// `G_jk = ∫_0^T w(t) conj(e^{λ_j(T-t)}) e^{λ_k(T-t)} dt`.
pub fn weighted_gram(lambdas: &[Complex64], horizon: f64, weight: ControlWeight) -> DMatrix<Complex64> {
    let n = lambdas.len();
    let entries: Vec<Complex64> = (0..n * n)
        .into_par_iter()
        .map(|idx| {
            let (j, k) = (idx / n, idx % n);
            weighted_exp_integral(weight.power, lambdas[j].conj() + lambdas[k], horizon)
        })
        .collect();
    let mut g = DMatrix::from_row_slice(n, n, &entries);
    for j in 0..n {
        g[(j, j)].im = 0.0;
        for k in j + 1..n {
            let m = 0.5 * (g[(j, k)] + g[(k, j)].conj());
            g[(j, k)] = m;
            g[(k, j)] = m.conj();
        }
    }
    g
}

/// Unweighted closed-form Gram `(e^{(conj λ_j + λ_k)T} - 1)/(conj λ_j + λ_k)`.
pub fn exponential_gram(lambdas: &[Complex64], horizon: f64) -> DMatrix<Complex64> {
    weighted_gram(lambdas, horizon, ControlWeight::NONE)
}

/// `D G D` with `D = diag(G_kk^{-1/2})`, and the diagonal of `D`.
pub fn column_normalized(g: &DMatrix<Complex64>) -> (DMatrix<Complex64>, Vec<f64>) {
    let d: Vec<f64> = (0..g.nrows()).map(|k| 1.0 / g[(k, k)].re.sqrt()).collect();
    let gn = DMatrix::from_fn(g.nrows(), g.ncols(), |j, k| g[(j, k)] * d[j] * d[k]);
    (gn, d)
}

fn singular_values(g: &DMatrix<Complex64>) -> Vec<f64> {
    let mut s: Vec<f64> = g.clone().singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Condition number of the column-normalized Gram.
pub fn gram_condition(lambdas: &[Complex64], horizon: f64, weight: ControlWeight) -> f64 {
    let (gn, _) = column_normalized(&weighted_gram(lambdas, horizon, weight));
    let s = singular_values(&gn);
    match (s.first(), s.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        _ => f64::INFINITY,
    }
}

// ---------------------------------------------------------------------------
// Control signals

/// A real boundary signal on `[0, T]`.
pub trait BoundarySignal: Sync {
    fn horizon(&self) -> f64;
    fn value(&self, t: f64) -> f64;

    fn sample(&self, m: usize) -> SampledSignal {
        let h = self.horizon() / m as f64;
        let times: Vec<f64> = (0..=m).map(|j| j as f64 * h).collect();
        let values = times.iter().map(|&t| self.value(t)).collect();
        SampledSignal { times, values }
    }
}

/// Samples on a uniform time grid, linearly interpolated in between.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampledSignal {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl SampledSignal {
    pub fn zero(horizon: f64, m: usize) -> Self {
        ZeroSignal { horizon }.sample(m)
    }

    pub fn step(&self) -> f64 {
        self.times[1] - self.times[0]
    }

    pub fn l2_norm(&self) -> f64 {
        let sq: Vec<f64> = self.values.iter().map(|v| v * v).collect();
        trapezoid(&sq, self.step()).sqrt()
    }

    pub fn integral(&self) -> f64 {
        trapezoid(&self.values, self.step())
    }

    pub fn to_csv(&self, header: &str) -> String {
        let mut s = format!("t,{header}\n");
        for (t, v) in self.times.iter().zip(&self.values) {
            let _ = writeln!(s, "{t:e},{v:e}");
        }
        s
    }
}

impl BoundarySignal for SampledSignal {
    fn horizon(&self) -> f64 {
        *self.times.last().unwrap_or(&0.0)
    }

    fn value(&self, t: f64) -> f64 {
        let n = self.times.len();
        if n == 0 {
            return 0.0;
        }
        if n == 1 || t <= self.times[0] {
            return self.values[0];
        }
        let h = self.step();
        let x = (t - self.times[0]) / h;
        let i = (x.floor() as usize).min(n - 2);
        let f = x - i as f64;
        if f >= 1.0 {
            return self.values[n - 1];
        }
        (1.0 - f) * self.values[i] + f * self.values[i + 1]
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ZeroSignal {
    pub horizon: f64,
}

impl BoundarySignal for ZeroSignal {
    fn horizon(&self) -> f64 {
        self.horizon
    }

    fn value(&self, _t: f64) -> f64 {
        0.0
    }
}

/// A signal given by a closure.
#[derive(Clone, Copy)]
pub struct FnSignal<F> {
    pub horizon: f64,
    pub f: F,
}

impl<F: Fn(f64) -> f64 + Sync> BoundarySignal for FnSignal<F> {
    fn horizon(&self) -> f64 {
        self.horizon
    }

    fn value(&self, t: f64) -> f64 {
        (self.f)(t)
    }
}

/// `p(t) = w(t) Σ_j a_j e^{λ_j (T-t)}` with its solve diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlSignal {
    pub horizon: f64,
    pub weight: ControlWeight,
    pub exponents: Vec<Complex64>,
    pub coeffs: Vec<Complex64>,
    pub times: Vec<f64>,
    pub samples: Vec<f64>,
    /// `target_k + (G a)_k`.
    pub residuals: Vec<Complex64>,
    pub max_residual: f64,
    /// Condition number of the column-normalized Gram.
    pub condition: f64,
    pub rank: usize,
    /// `max |Im p| / max |p|` over the samples before discarding `Im p`.
    pub imag_ratio: f64,
}

impl ControlSignal {
    pub fn zero(horizon: f64, m: usize) -> Self {
        let mut c = Self {
            horizon,
            weight: ControlWeight::NONE,
            exponents: Vec::new(),
            coeffs: Vec::new(),
            times: Vec::new(),
            samples: Vec::new(),
            residuals: Vec::new(),
            max_residual: 0.0,
            condition: 1.0,
            rank: 0,
            imag_ratio: 0.0,
        };
        c.resample(m);
        c
    }

    pub fn eval_complex(&self, t: f64) -> Complex64 {
        let s = self.horizon - t;
        let sum: Complex64 = self
            .exponents
            .iter()
            .zip(&self.coeffs)
            .map(|(&l, &a)| a * (l * s).exp())
            .sum();
        sum * self.weight.eval(t, self.horizon)
    }

    /// Recomputes the samples on `m + 1` uniform nodes.
    pub fn resample(&mut self, m: usize) {
        let h = self.horizon / m as f64;
        self.times = (0..=m).map(|j| j as f64 * h).collect();
        let vals: Vec<Complex64> = self.times.par_iter().map(|&t| self.eval_complex(t)).collect();
        let max = vals.iter().map(|v| v.re.abs()).fold(0.0, f64::max);
        let imax = vals.iter().map(|v| v.im.abs()).fold(0.0, f64::max);
        self.imag_ratio = if max > 0.0 { imax / max } else { 0.0 };
        self.samples = vals.iter().map(|v| v.re).collect();
    }

    pub fn sampled(&self) -> SampledSignal {
        SampledSignal {
            times: self.times.clone(),
            values: self.samples.clone(),
        }
    }

    /// `∫_0^t e^{α(t-s)} p(s) ds` in closed form (complex modal sum).
    pub fn convolve(&self, alpha: Complex64, t: f64) -> Complex64 {
        if t <= 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let a = PI / self.horizon;
        let terms = self.weight.fourier_terms();
        let mut acc = Complex64::new(0.0, 0.0);
        for (&l, &c) in self.exponents.iter().zip(&self.coeffs) {
            // ∫_0^t e^{α r} e^{λ(T-t+r)} w(t-r) dr, w(t-r) = Σ w_q e^{iqa(t-r)}
            let base = c * (l * (self.horizon - t)).exp();
            let mut inner = Complex64::new(0.0, 0.0);
            for &(q, wq) in &terms {
                let phase = Complex64::from_polar(1.0, q * a * t);
                inner += wq * phase * exp_integral(alpha + l - Complex64::new(0.0, q * a), t);
            }
            acc += base * inner;
        }
        acc
    }

    /// `∫_0^T p`, exact.
    pub fn integral(&self) -> f64 {
        self.exponents
            .iter()
            .zip(&self.coeffs)
            .map(|(&l, &a)| a * weighted_exp_integral(self.weight.power, l, self.horizon))
            .sum::<Complex64>()
            .re
    }

    /// `‖p‖_{L²(0,T)}`, exact.
    pub fn l2_norm(&self) -> f64 {
        let n = self.exponents.len();
        let mut acc = Complex64::new(0.0, 0.0);
        for j in 0..n {
            for k in 0..n {
                let z = self.exponents[j].conj() + self.exponents[k];
                acc += self.coeffs[j].conj()
                    * self.coeffs[k]
                    * weighted_exp_integral(2 * self.weight.power, z, self.horizon);
            }
        }
        acc.re.max(0.0).sqrt()
    }

    pub fn to_csv(&self) -> String {
        self.sampled().to_csv("p")
    }
}

impl BoundarySignal for ControlSignal {
    fn horizon(&self) -> f64 {
        self.horizon
    }

    fn value(&self, t: f64) -> f64 {
        self.eval_complex(t).re
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regularization {
    /// Drop singular values below `tol · σ_max`.
    TruncatedSvd { tol: f64 },
    /// Solve `(G*G + ε²I) b = G* rhs`.
    Ridge { eps: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub regularization: Regularization,
    pub weight: ControlWeight,
    /// Time samples `M` (the grid has `M + 1` nodes).
    pub samples: usize,
    /// Largest accepted algebraic residual.
    pub residual_tol: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            regularization: Regularization::TruncatedSvd { tol: 1e-10 },
            weight: ControlWeight::default(),
            samples: 4096,
            residual_tol: 1e-8,
        }
    }
}

/// Minimal weighted-norm control meeting every moment equation.
pub fn solve_moments(ms: &MomentSystem, opts: &SolveOptions) -> Result<ControlSignal> {
    ms.validate()?;
    let lambdas = ms.lambdas();
    let n = lambdas.len();
    let horizon = ms.horizon;
    if ms.targets.iter().all(|t| t.norm() == 0.0) || n == 0 {
        let mut c = ControlSignal::zero(horizon, opts.samples);
        c.weight = opts.weight;
        c.exponents = lambdas;
        c.coeffs = vec![Complex64::new(0.0, 0.0); n];
        c.residuals = vec![Complex64::new(0.0, 0.0); n];
        return Ok(c);
    }
    let g = weighted_gram(&lambdas, horizon, opts.weight);
    let (gn, d) = column_normalized(&g);
    let rhs = DVector::from_iterator(n, ms.targets.iter().zip(&d).map(|(t, dk)| -t * *dk));
    let svd = gn.clone().svd(true, true);
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let smin = svd.singular_values.iter().copied().fold(f64::INFINITY, f64::min);
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    let (b, rank) = match opts.regularization {
        Regularization::TruncatedSvd { tol } => {
            let u = svd.u.as_ref().expect("u computed");
            let vt = svd.v_t.as_ref().expect("v_t computed");
            let mut b = DVector::zeros(n);
            let mut rank = 0;
            for (i, &s) in svd.singular_values.iter().enumerate() {
                if s > tol * smax {
                    rank += 1;
                    let coef = u.column(i).dotc(&rhs) / s;
                    b += vt.row(i).adjoint() * coef;
                }
            }
            (b, rank)
        }
        Regularization::Ridge { eps } => {
            let gh = gn.adjoint();
            let lhs = &gh * &gn + DMatrix::identity(n, n) * Complex64::new(eps * eps, 0.0);
            let b = lhs
                .lu()
                .solve(&(&gh * &rhs))
                .ok_or(Error::IllConditioned { condition })?;
            (b, n)
        }
    };
    let coeffs: Vec<Complex64> = b.iter().zip(&d).map(|(bk, dk)| bk * *dk).collect();
    let a = DVector::from_vec(coeffs.clone());
    let ga = &g * &a;
    let residuals: Vec<Complex64> = ms.targets.iter().zip(ga.iter()).map(|(t, v)| t + v).collect();
    let max_residual = residuals.iter().map(|r| r.norm()).fold(0.0, f64::max);
    if !(max_residual <= opts.residual_tol) {
        return Err(Error::ResidualTooLarge {
            residual: max_residual,
            condition,
        });
    }
    let mut c = ControlSignal {
        horizon,
        weight: opts.weight,
        exponents: lambdas,
        coeffs,
        times: Vec::new(),
        samples: Vec::new(),
        residuals,
        max_residual,
        condition,
        rank,
        imag_ratio: 0.0,
    };
    c.resample(opts.samples);
    if ms.real_data && c.imag_ratio > 1e-8 {
        return Err(Error::Invariant(format!(
            "control has relative imaginary part {:e}",
            c.imag_ratio
        )));
    }
    Ok(c)
}

/// `r_k = target_k + ∫_0^T conj(e^{λ_k(T-t)}) p(t) dt` by the trapezoid rule
/// on the signal's own samples.
pub fn moment_residuals(p: &SampledSignal, ms: &MomentSystem) -> Result<Vec<Complex64>> {
    if p.times.len() < 1025 {
        return Err(Error::InvalidInput(format!(
            "need at least 1024 time intervals, got {}",
            p.times.len().saturating_sub(1)
        )));
    }
    let h = p.step();
    let horizon = ms.horizon;
    Ok(ms
        .exponents
        .par_iter()
        .zip(&ms.targets)
        .map(|(e, &target)| {
            let vals: Vec<Complex64> = p
                .times
                .iter()
                .zip(&p.values)
                .map(|(&t, &v)| (e.lambda * (horizon - t)).exp().conj() * v)
                .collect();
            target + trapezoid_c(&vals, h)
        })
        .collect())
}

/// `h(t_j) = ρ(t_j, 1) + p(t_j)`.
pub fn lift_to_dirichlet(p: &dyn BoundarySignal, trace: &SampledSignal) -> Result<SampledSignal> {
    if (p.horizon() - trace.horizon()).abs() > 1e-12 * p.horizon().max(1.0) {
        return Err(Error::GridMismatch(format!(
            "control horizon {} differs from trace horizon {}",
            p.horizon(),
            trace.horizon()
        )));
    }
    Ok(SampledSignal {
        times: trace.times.clone(),
        values: trace
            .times
            .iter()
            .zip(&trace.values)
            .map(|(&t, &r)| r + p.value(t))
            .collect(),
    })
}

// ---------------------------------------------------------------------------
// Diagnostics

/// `k|ξ(1)|` on diffusive pairs and `|ξ(1)|` on transport pairs, both in the
/// comparison normalization, with the max/min ratio of each band.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservationBands {
    pub parabolic: Vec<(i64, f64)>,
    pub hyperbolic: Vec<(i64, f64)>,
    pub parabolic_ratio: f64,
    pub hyperbolic_ratio: f64,
    /// Smallest `|ξ(1)|` over all unit-normalized pairs.
    pub min_unit: f64,
}

pub fn observation_bands(pairs: &[EigenPair], range: (i64, i64)) -> ObservationBands {
    use crate::basis::comparison_normalized;
    let (lo, hi) = range;
    let mut parabolic = Vec::new();
    let mut hyperbolic = Vec::new();
    for p in pairs {
        let ka = p.k.abs();
        if ka < lo || ka > hi {
            continue;
        }
        let v = observation(&comparison_normalized(p)).norm();
        match p.branch {
            Branch::Parabolic => parabolic.push((p.k, p.k as f64 * v)),
            Branch::Hyperbolic => hyperbolic.push((p.k, v)),
            Branch::Low => {}
        }
    }
    let ratio = |v: &[(i64, f64)]| {
        let max = v.iter().map(|x| x.1).fold(0.0, f64::max);
        let min = v.iter().map(|x| x.1).fold(f64::INFINITY, f64::min);
        if min > 0.0 { max / min } else { f64::INFINITY }
    };
    ObservationBands {
        parabolic_ratio: ratio(&parabolic),
        hyperbolic_ratio: ratio(&hyperbolic),
        min_unit: pairs
            .iter()
            .map(|p| observation(p).norm() / p.norm())
            .fold(f64::INFINITY, f64::min),
        parabolic,
        hyperbolic,
    }
}

/// Smallest `|λ^p_k - λ^p_j| / |k² - j²|` over distinct diffusive indices.
pub fn parabolic_gap_constant(spec: &Spectrum) -> f64 {
    let v: Vec<(i64, Complex64)> = spec.parabolic.iter().map(|(&k, r)| (k, r.lambda)).collect();
    let mut best = f64::INFINITY;
    for (i, &(k, a)) in v.iter().enumerate() {
        for &(j, b) in &v[i + 1..] {
            best = best.min((a - b).norm() / (k * k - j * j).abs() as f64);
        }
    }
    best
}

/// `max_k |m_{1,k}| e^{r k}` over the diffusive targets.
pub fn weighted_target_decay(ms: &MomentSystem, r: f64) -> Vec<(i64, f64)> {
    ms.targets_of(Branch::Parabolic)
        .into_iter()
        .map(|(k, t)| (k, t.norm() * (r * k as f64).exp()))
        .collect()
}

/// Partial sums `Σ_{|k| ≤ K} |m_{2,k}|²` over transport targets.
pub fn hyperbolic_partial_sum(ms: &MomentSystem, kmax: i64) -> f64 {
    ms.targets_of(Branch::Hyperbolic)
        .into_iter()
        .filter(|(k, _)| k.abs() <= kmax)
        .map(|(_, t)| t.norm_sqr())
        .sum()
}
