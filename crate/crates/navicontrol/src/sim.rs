//! Finite-difference and modal simulators, and the integral identities used
//! to validate them.
//!
//! Forward system on `(0, 1)`:
//!
//! ```text
//! ρ_t + ρ_x + u_x = 0,   u_t = u_xx - u_x - ρ_x,   u(0) = u(1) = 0,
//! ρ(t, 0) = ρ(t, 1) + p(t)        (auxiliary form)
//! ρ(t, 0) = h(t)                  (Dirichlet form)
//! ```
//!
//! Adjoint system, solved backward from `V(T)` in `τ = T - t`:
//!
//! ```text
//! σ_τ = σ_x + v_x + f,   v_τ = v_xx + v_x + σ_x + g,   σ(0) = σ(1),  v(0) = v(1) = 0.
//! ```
//!
//! Transport is explicit (Beam–Warming by default, first-order upwind on
//! request) with ghost values taken along characteristics; diffusion and the
//! velocity advection are Crank–Nicolson.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::control::{BoundarySignal, ControlSignal, InitialData, SampledSignal};
use crate::error::{Error, Result};
use crate::spaces::{trapezoid, GridFunction, State};
use crate::spectral::EigenPair;

/// Growth of the discrete norm beyond this factor aborts a run.
pub const DIVERGENCE_FACTOR: f64 = 1e6;

/// Largest accepted condition number of the modal reconstruction matrix.
pub const MODAL_CONDITION_LIMIT: f64 = 1e8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transport {
    Upwind1,
    BeamWarming,
}

impl Transport {
    pub fn name(self) -> &'static str {
        match self {
            Transport::Upwind1 => "upwind1",
            Transport::BeamWarming => "beam_warming",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Space intervals `N`.
    pub n: usize,
    /// Time steps `M`.
    pub m: usize,
    pub horizon: f64,
    pub transport: Transport,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n: 1024,
            m: 4096,
            horizon: 1.5,
            transport: Transport::BeamWarming,
        }
    }
}

impl SimConfig {
    pub fn new(n: usize, m: usize, horizon: f64) -> Self {
        Self {
            n,
            m,
            horizon,
            ..Self::default()
        }
    }

    pub fn dx(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.m as f64
    }

    /// Both grids refined by two.
    pub fn refined(&self) -> Self {
        Self {
            n: 2 * self.n,
            m: 2 * self.m,
            ..*self
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 8 {
            return Err(Error::GridTooCoarse {
                required: 8,
                got: self.n,
            });
        }
        if !(self.horizon > 0.0) || self.m == 0 {
            return Err(Error::InvalidInput(format!(
                "need T > 0 and M > 0, got T = {}, M = {}",
                self.horizon, self.m
            )));
        }
        if self.dt() > self.dx() * (1.0 + 1e-12) {
            return Err(Error::Cfl {
                dt: self.dt(),
                dx: self.dx(),
                suggested_m: (self.horizon * self.n as f64).ceil() as usize,
            });
        }
        Ok(())
    }

    fn times(&self) -> Vec<f64> {
        let dt = self.dt();
        (0..=self.m).map(|j| j as f64 * dt).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum System {
    ForwardAuxiliary,
    ForwardDirichlet,
    /// Stored in increasing `t`; `rho` holds `σ` and `u` holds `v`.
    Adjoint,
    Modal,
}

/// Real states at every time level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub system: System,
    pub config: SimConfig,
    pub times: Vec<f64>,
    pub rho: Vec<Vec<f64>>,
    pub u: Vec<Vec<f64>>,
}

impl Trajectory {
    fn zeros(system: System, config: SimConfig) -> Self {
        let levels = config.m + 1;
        let n = config.n + 1;
        Self {
            system,
            config,
            times: config.times(),
            rho: vec![vec![0.0; n]; levels],
            u: vec![vec![0.0; n]; levels],
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn state(&self, j: usize) -> Result<State> {
        State::new(
            GridFunction::from_real_fn(self.config.n, |x| self.rho[j][node(x, self.config.n)])?,
            GridFunction::from_real_fn(self.config.n, |x| self.u[j][node(x, self.config.n)])?,
        )
    }

    /// `(‖ρ‖² + ‖u‖²)^{1/2}` at level `j`.
    pub fn norm(&self, j: usize) -> f64 {
        (l2_sq(&self.rho[j]) + l2_sq(&self.u[j])).sqrt()
    }

    pub fn final_norm(&self) -> f64 {
        self.norm(self.len() - 1)
    }

    pub fn energy(&self, j: usize) -> f64 {
        0.5 * self.norm(j).powi(2)
    }

    /// Index of the level closest to `t`.
    pub fn level_at(&self, t: f64) -> usize {
        let j = (t / self.config.dt()).round() as usize;
        j.min(self.len() - 1)
    }

    /// Rows `t,x,re_rho,re_u` for every `stride`-th level and node.
    pub fn to_csv(&self, time_stride: usize, space_stride: usize) -> String {
        let (ts, xs) = (time_stride.max(1), space_stride.max(1));
        let mut s = String::from("t,x,re_rho,re_u\n");
        let dx = self.config.dx();
        let mut levels: Vec<usize> = (0..self.len()).step_by(ts).collect();
        if levels.last() != Some(&(self.len() - 1)) {
            levels.push(self.len() - 1);
        }
        for j in levels {
            for i in (0..=self.config.n).step_by(xs) {
                let _ = writeln!(
                    s,
                    "{:e},{:e},{:e},{:e}",
                    self.times[j],
                    i as f64 * dx,
                    self.rho[j][i],
                    self.u[j][i]
                );
            }
        }
        s
    }

    fn check_growth(&self, j: usize, scale: f64) -> Result<()> {
        let nrm = self.norm(j);
        if !nrm.is_finite() || nrm > DIVERGENCE_FACTOR * scale {
            return Err(Error::SimulationDiverged {
                step: j,
                growth: nrm / scale,
            });
        }
        Ok(())
    }
}

fn node(x: f64, n: usize) -> usize {
    ((x * n as f64).round() as usize).min(n)
}

fn l2_sq(v: &[f64]) -> f64 {
    let sq: Vec<f64> = v.iter().map(|a| a * a).collect();
    trapezoid(&sq, 1.0 / (v.len() - 1) as f64)
}

fn inner(a: &[f64], b: &[f64]) -> f64 {
    let p: Vec<f64> = a.iter().zip(b).map(|(x, y)| x * y).collect();
    trapezoid(&p, 1.0 / (a.len() - 1) as f64)
}

/// Adjoint right-hand sides `f`, `g` at every time level `t_j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SourceTerm {
    pub f: Vec<Vec<f64>>,
    pub g: Vec<Vec<f64>>,
}

impl SourceTerm {
    pub fn zero(cfg: &SimConfig) -> Self {
        let z = vec![vec![0.0; cfg.n + 1]; cfg.m + 1];
        Self { f: z.clone(), g: z }
    }

    pub fn from_fn<F: Fn(f64, f64) -> (f64, f64) + Sync>(cfg: &SimConfig, fg: F) -> Self {
        let dx = cfg.dx();
        let (f, g) = cfg
            .times()
            .par_iter()
            .map(|&t| (0..=cfg.n).map(|i| fg(t, i as f64 * dx)).unzip())
            .unzip();
        Self { f, g }
    }

    fn check(&self, cfg: &SimConfig) -> Result<()> {
        let ok = |v: &Vec<Vec<f64>>| v.len() == cfg.m + 1 && v.iter().all(|r| r.len() == cfg.n + 1);
        if ok(&self.f) && ok(&self.g) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "source term does not match N = {}, M = {}",
                cfg.n, cfg.m
            )))
        }
    }

    fn sup(&self) -> f64 {
        self.f
            .iter()
            .chain(&self.g)
            .flat_map(|r| r.iter())
            .fold(0.0, |a, b| a.max(b.abs()))
    }

    /// `(∬ f² + g²)^{1/2}`.
    pub fn l2_norm(&self, cfg: &SimConfig) -> f64 {
        let per: Vec<f64> = self.f.iter().zip(&self.g).map(|(f, g)| l2_sq(f) + l2_sq(g)).collect();
        trapezoid(&per, cfg.dt()).sqrt()
    }
}

// ---------------------------------------------------------------------------
// Kernels

/// Solves `a_i x_{i-1} + b_i x_i + c_i x_{i+1} = d_i` in place (Thomas).
fn tridiag(a: f64, b: f64, c: f64, d: &mut [f64], scratch: &mut Vec<f64>) {
    let n = d.len();
    scratch.clear();
    scratch.resize(n, 0.0);
    let mut beta = b;
    d[0] /= beta;
    for i in 1..n {
        scratch[i] = c / beta;
        beta = b - a * scratch[i];
        d[i] = (d[i] - a * d[i - 1]) / beta;
    }
    for i in (0..n - 1).rev() {
        d[i] -= scratch[i + 1] * d[i + 1];
    }
}

/// Centered derivative inside, one-sided second order at the ends.
fn derivative(v: &[f64], dx: f64, out: &mut [f64]) {
    let n = v.len() - 1;
    out[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * dx);
    out[n] = (3.0 * v[n] - 4.0 * v[n - 1] + v[n - 2]) / (2.0 * dx);
    for i in 1..n {
        out[i] = (v[i + 1] - v[i - 1]) / (2.0 * dx);
    }
}

/// Crank–Nicolson step for `w_t = w_xx + dir·w_x + s` with `w = 0` at both
/// ends; `src` holds the time-averaged source.
struct Diffusion {
    dt: f64,
    dx: f64,
    dir: f64,
    scratch: Vec<f64>,
    rhs: Vec<f64>,
}

impl Diffusion {
    fn new(cfg: &SimConfig, dir: f64) -> Self {
        Self {
            dt: cfg.dt(),
            dx: cfg.dx(),
            dir,
            scratch: Vec::new(),
            rhs: vec![0.0; cfg.n.saturating_sub(1)],
        }
    }

    fn step(&mut self, w: &mut [f64], src: &[f64]) {
        let n = w.len() - 1;
        let r = self.dt / (self.dx * self.dx);
        let q = self.dir * self.dt / (2.0 * self.dx);
        // L w_i = (w_{i+1} - 2 w_i + w_{i-1})/dx² + dir (w_{i+1} - w_{i-1})/(2dx)
        let lo = 0.5 * (r - q);
        let hi = 0.5 * (r + q);
        for i in 1..n {
            self.rhs[i - 1] = w[i] + lo * w[i - 1] - r * w[i] + hi * w[i + 1] + self.dt * src[i];
        }
        tridiag(-lo, 1.0 + r, -hi, &mut self.rhs, &mut self.scratch);
        w[0] = 0.0;
        w[n] = 0.0;
        w[1..n].copy_from_slice(&self.rhs);
    }
}

/// Boundary treatment of the explicit transport step, in the transport's
/// own direction of travel.
enum Inflow {
    /// `ρ_0 = ρ_N + jump`; ghost from the characteristic through `x = 1`.
    Periodic,
    /// `ρ_0 = value`.
    Dirichlet,
}

/// One explicit step of `w_t + w_x = -s` on nodes `1..=N` (rightward travel),
/// followed by the inflow update of node 0.
#[allow(clippy::too_many_arguments)]
fn transport_step(
    scheme: Transport,
    inflow: &Inflow,
    w: &[f64],
    s: &[f64],
    nu: f64,
    dt: f64,
    dx: f64,
    ghost_value: f64,
    new_inflow: f64,
    out: &mut [f64],
) {
    let n = w.len() - 1;
    let ghost = match inflow {
        Inflow::Periodic => w[n - 1] + ghost_value + dx * (s[0] - s[n]),
        Inflow::Dirichlet => ghost_value + dx * s[0],
    };
    let at = |i: isize| if i < 0 { ghost } else { w[i as usize] };
    for i in 1..=n {
        let ii = i as isize;
        let (w0, w1, w2) = (at(ii), at(ii - 1), at(ii - 2));
        out[i] = match scheme {
            Transport::Upwind1 => w0 - nu * (w0 - w1),
            Transport::BeamWarming => {
                w0 - 0.5 * nu * (3.0 * w0 - 4.0 * w1 + w2) + 0.5 * nu * nu * (w0 - 2.0 * w1 + w2)
            }
        } - dt * s[i];
    }
    out[0] = match inflow {
        Inflow::Periodic => out[n] + new_inflow,
        Inflow::Dirichlet => new_inflow,
    };
}

fn real_initial(u0: &State, cfg: &SimConfig) -> Result<(Vec<f64>, Vec<f64>)> {
    if u0.intervals() != cfg.n {
        return Err(Error::GridMismatch(format!(
            "initial state has N = {}, simulation N = {}",
            u0.intervals(),
            cfg.n
        )));
    }
    let mut u = u0.u.real_parts();
    u[0] = 0.0;
    u[cfg.n] = 0.0;
    Ok((u0.rho.real_parts(), u))
}

fn signal_sup(p: &dyn BoundarySignal, cfg: &SimConfig) -> f64 {
    cfg.times().iter().map(|&t| p.value(t).abs()).fold(0.0, f64::max)
}

fn forward(
    system: System,
    u0: &State,
    signal: &dyn BoundarySignal,
    cfg: &SimConfig,
) -> Result<Trajectory> {
    cfg.validate()?;
    let (rho0, vel0) = real_initial(u0, cfg)?;
    let mut traj = Trajectory::zeros(system, *cfg);
    let (n, dt, dx) = (cfg.n, cfg.dt(), cfg.dx());
    let nu = dt / dx;
    let inflow = match system {
        System::ForwardDirichlet => Inflow::Dirichlet,
        _ => Inflow::Periodic,
    };
    traj.rho[0] = rho0;
    traj.u[0] = vel0;
    if matches!(inflow, Inflow::Dirichlet) {
        traj.rho[0][0] = signal.value(0.0);
    }
    let scale = traj.norm(0) + signal_sup(signal, cfg) + f64::MIN_POSITIVE;
    let mut diffusion = Diffusion::new(cfg, -1.0);
    let (mut ux, mut rx_old, mut rx_new, mut src) =
        (vec![0.0; n + 1], vec![0.0; n + 1], vec![0.0; n + 1], vec![0.0; n + 1]);
    derivative(&traj.rho[0], dx, &mut rx_old);
    for j in 0..cfg.m {
        let t = traj.times[j];
        derivative(&traj.u[j], dx, &mut ux);
        let (done, rest) = traj.rho.split_at_mut(j + 1);
        transport_step(
            cfg.transport,
            &inflow,
            &done[j],
            &ux,
            nu,
            dt,
            dx,
            signal.value(t + dx),
            signal.value(traj.times[j + 1]),
            &mut rest[0],
        );
        derivative(&rest[0], dx, &mut rx_new);
        for i in 0..=n {
            src[i] = -0.5 * (rx_old[i] + rx_new[i]);
        }
        let mut next = traj.u[j].clone();
        diffusion.step(&mut next, &src);
        traj.u[j + 1] = next;
        std::mem::swap(&mut rx_old, &mut rx_new);
        traj.check_growth(j + 1, scale)?;
    }
    Ok(traj)
}

/// Auxiliary system with `ρ(t, 0) = ρ(t, 1) + p(t)`.
pub fn simulate_forward(u0: &State, p: &dyn BoundarySignal, cfg: &SimConfig) -> Result<Trajectory> {
    forward(System::ForwardAuxiliary, u0, p, cfg)
}

/// Dirichlet-controlled system with `ρ(t, 0) = h(t)`.
pub fn simulate_dirichlet(u0: &State, h: &dyn BoundarySignal, cfg: &SimConfig) -> Result<Trajectory> {
    forward(System::ForwardDirichlet, u0, h, cfg)
}

/// Adjoint system from terminal data `V(T)`, integrated backward.
pub fn simulate_adjoint(src: &SourceTerm, vt: &State, cfg: &SimConfig) -> Result<Trajectory> {
    cfg.validate()?;
    src.check(cfg)?;
    let (s_t, v_t) = real_initial(vt, cfg)?;
    let (n, m, dt, dx) = (cfg.n, cfg.m, cfg.dt(), cfg.dx());
    let nu = dt / dx;
    // Work in mirrored space y = 1 - x so the transport travels rightward.
    let mirror = |v: &[f64]| v.iter().rev().copied().collect::<Vec<f64>>();
    let mut traj = Trajectory::zeros(System::Adjoint, *cfg);
    traj.rho[m] = mirror(&s_t);
    traj.u[m] = mirror(&v_t);
    let scale = traj.norm(m) + src.sup() + f64::MIN_POSITIVE;
    let mut diffusion = Diffusion::new(cfg, -1.0);
    let (mut vy, mut sy_old, mut sy_new, mut s, mut gsrc) =
        (vec![0.0; n + 1], vec![0.0; n + 1], vec![0.0; n + 1], vec![0.0; n + 1], vec![0.0; n + 1]);
    derivative(&traj.rho[m], dx, &mut sy_old);
    for j in (1..=m).rev() {
        // In y: σ_τ + σ_y = -(v_y - f), v_τ = v_yy - v_y - σ_y + g.
        derivative(&traj.u[j], dx, &mut vy);
        let f = mirror(&src.f[j]);
        for i in 0..=n {
            s[i] = vy[i] - f[i];
        }
        let (head, tail) = traj.rho.split_at_mut(j);
        transport_step(
            cfg.transport,
            &Inflow::Periodic,
            &tail[0],
            &s,
            nu,
            dt,
            dx,
            0.0,
            0.0,
            &mut head[j - 1],
        );
        derivative(&head[j - 1], dx, &mut sy_new);
        let (g0, g1) = (mirror(&src.g[j]), mirror(&src.g[j - 1]));
        for i in 0..=n {
            gsrc[i] = -0.5 * (sy_old[i] + sy_new[i]) + 0.5 * (g0[i] + g1[i]);
        }
        let mut next = traj.u[j].clone();
        diffusion.step(&mut next, &gsrc);
        traj.u[j - 1] = next;
        std::mem::swap(&mut sy_old, &mut sy_new);
        traj.check_growth(j - 1, scale)?;
    }
    for j in 0..=m {
        traj.rho[j].reverse();
        traj.u[j].reverse();
    }
    Ok(traj)
}

// ---------------------------------------------------------------------------
// Traces and identities

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceKind {
    RhoAtOne,
    SigmaAtOne,
}

/// Samples of `ρ(·, 1)` (or `σ(·, 1)`) and their `L²(0, T)` norm.
pub fn boundary_trace(traj: &Trajectory, which: TraceKind) -> Result<(SampledSignal, f64)> {
    let expected = match which {
        TraceKind::RhoAtOne => matches!(
            traj.system,
            System::ForwardAuxiliary | System::ForwardDirichlet | System::Modal
        ),
        TraceKind::SigmaAtOne => traj.system == System::Adjoint,
    };
    if !expected {
        return Err(Error::InvalidInput(format!(
            "{which:?} requested from a {:?} trajectory",
            traj.system
        )));
    }
    let n = traj.config.n;
    let sig = SampledSignal {
        times: traj.times.clone(),
        values: traj.rho.iter().map(|r| r[n]).collect(),
    };
    let norm = sig.l2_norm();
    Ok((sig, norm))
}

/// Result of one transposition-identity evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TranspositionCheck {
    /// `∬ (ρ f + u g)`.
    pub source_pairing: f64,
    /// `⟨U0, V(0)⟩`.
    pub initial_pairing: f64,
    /// `∫ σ(t, 1) p(t) dt`.
    pub boundary_pairing: f64,
    pub defect: f64,
}

/// `|∬(ρf + ug) - ⟨U0, V(0)⟩ - ∫σ(·,1)p|` from one forward and one adjoint
/// solve with `V(T) = 0`.
pub fn transposition_defect(
    u0: &State,
    p: &dyn BoundarySignal,
    src: &SourceTerm,
    cfg: &SimConfig,
) -> Result<TranspositionCheck> {
    let zero = State::new(
        GridFunction::from_real_fn(cfg.n, |_| 0.0)?,
        GridFunction::from_real_fn(cfg.n, |_| 0.0)?,
    )?;
    let (fwd, adj) = rayon::join(
        || simulate_forward(u0, p, cfg),
        || simulate_adjoint(src, &zero, cfg),
    );
    let (fwd, adj) = (fwd?, adj?);
    let per: Vec<f64> = (0..fwd.len())
        .map(|j| inner(&fwd.rho[j], &src.f[j]) + inner(&fwd.u[j], &src.g[j]))
        .collect();
    let source_pairing = trapezoid(&per, cfg.dt());
    let initial_pairing = inner(&fwd.rho[0], &adj.rho[0]) + inner(&fwd.u[0], &adj.u[0]);
    let n = cfg.n;
    let bp: Vec<f64> = adj
        .times
        .iter()
        .zip(&adj.rho)
        .map(|(&t, s)| s[n] * p.value(t))
        .collect();
    let boundary_pairing = trapezoid(&bp, cfg.dt());
    Ok(TranspositionCheck {
        source_pairing,
        initial_pairing,
        boundary_pairing,
        defect: (source_pairing - initial_pairing - boundary_pairing).abs(),
    })
}

/// `|½∫x(ρ²(T) - ρ0²) + ½∫ρ²(t,1) - ½∬ρ² + ∬xρu_x|` for an auxiliary run.
pub fn weighted_energy_defect(traj: &Trajectory) -> Result<f64> {
    if traj.system != System::ForwardAuxiliary {
        return Err(Error::InvalidInput("weighted energy needs an auxiliary forward run".into()));
    }
    let n = traj.config.n;
    let dx = traj.config.dx();
    let x: Vec<f64> = (0..=n).map(|i| i as f64 * dx).collect();
    let weighted_sq = |r: &[f64]| {
        let v: Vec<f64> = r.iter().zip(&x).map(|(a, xi)| xi * a * a).collect();
        trapezoid(&v, dx)
    };
    let last = traj.len() - 1;
    let terminal = 0.5 * (weighted_sq(&traj.rho[last]) - weighted_sq(&traj.rho[0]));
    let per: Vec<(f64, f64, f64)> = traj
        .rho
        .par_iter()
        .zip(&traj.u)
        .map(|(r, u)| {
            let mut ux = vec![0.0; n + 1];
            derivative(u, dx, &mut ux);
            let cross: Vec<f64> = (0..=n).map(|i| x[i] * r[i] * ux[i]).collect();
            (r[n] * r[n], l2_sq(r), trapezoid(&cross, dx))
        })
        .collect();
    let dt = traj.config.dt();
    let col = |k: usize| {
        let v: Vec<f64> = per
            .iter()
            .map(|t| match k {
                0 => t.0,
                1 => t.1,
                _ => t.2,
            })
            .collect();
        trapezoid(&v, dt)
    };
    Ok((terminal + 0.5 * col(0) - 0.5 * col(1) + col(2)).abs())
}

/// `∫ρ²(t,1) / (‖ρ0‖² + ‖u0‖² + ‖p‖²)` for an auxiliary run.
pub fn hidden_regularity_ratio(traj: &Trajectory, p: &dyn BoundarySignal) -> Result<f64> {
    let (trace, tn) = boundary_trace(traj, TraceKind::RhoAtOne)?;
    let pn = p.sample(trace.times.len() - 1).l2_norm();
    let den = traj.norm(0).powi(2) + pn * pn;
    if den == 0.0 {
        return Ok(0.0);
    }
    Ok(tn * tn / den)
}

/// `∫ρ(T) - ∫ρ0 - ∫_0^T p` for an auxiliary run.
pub fn mass_balance_defect(traj: &Trajectory, p: &dyn BoundarySignal) -> f64 {
    let dx = traj.config.dx();
    let last = traj.len() - 1;
    let pv: Vec<f64> = traj.times.iter().map(|&t| p.value(t)).collect();
    trapezoid(&traj.rho[last], dx) - trapezoid(&traj.rho[0], dx) - trapezoid(&pv, traj.config.dt())
}

/// Largest relative `L²` distance between two trajectories on the coarser
/// grid (the finer one is subsampled).
pub fn trajectory_distance(coarse: &Trajectory, fine: &Trajectory) -> Result<f64> {
    let (nc, nf) = (coarse.config.n, fine.config.n);
    let (mc, mf) = (coarse.config.m, fine.config.m);
    if nf % nc != 0 || mf % mc != 0 {
        return Err(Error::GridMismatch(format!(
            "grids N = {nc}/{nf}, M = {mc}/{mf} are not nested"
        )));
    }
    let (sx, st) = (nf / nc, mf / mc);
    let mut worst = 0.0f64;
    let mut scale = 0.0f64;
    for j in 0..=mc {
        let (rf, uf) = (&fine.rho[j * st], &fine.u[j * st]);
        let dr: Vec<f64> = (0..=nc).map(|i| coarse.rho[j][i] - rf[i * sx]).collect();
        let du: Vec<f64> = (0..=nc).map(|i| coarse.u[j][i] - uf[i * sx]).collect();
        worst = worst.max((l2_sq(&dr) + l2_sq(&du)).sqrt());
        scale = scale.max(coarse.norm(j));
    }
    Ok(if scale > 0.0 { worst / scale } else { worst })
}

// ---------------------------------------------------------------------------
// Modal simulation

/// Exact modal evolution in the span of the retained eigenfunctions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModalRun {
    pub trajectory: Trajectory,
    /// `⟨U(t_j), Φ_l⟩` for the mean mode followed by every pair, per level.
    pub coefficients: Vec<Vec<Complex64>>,
    /// Condition number of `B_{lj} = ⟨Ψ_j, Φ_l⟩`.
    pub condition: f64,
    /// Largest `|Im U|` relative to `max |U|` over the reconstruction.
    pub imag_ratio: f64,
}

/// Evolves `c_l = ⟨U, Φ_l⟩` by `c_l' = conj(λ_l) c_l + conj(ξ_l(1)) p` and
/// reconstructs `U = Σ d_j Ψ_j` with `Ψ_j(x) = Φ_j(1 - x)`, `B d = c`.
/// The mean mode `(1, 0)` is always carried.
pub fn modal_simulate(
    data: &InitialData,
    p: &ControlSignal,
    pairs: &[EigenPair],
    cfg: &SimConfig,
) -> Result<ModalRun> {
    cfg.validate()?;
    let k = pairs.len() + 1;
    let mean_pair = crate::expsum::ExpPair::new(
        crate::ExpSum::from_terms([(Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0))]),
        crate::ExpSum::new(),
    );
    let adj: Vec<_> = std::iter::once(mean_pair.clone())
        .chain(pairs.iter().map(|q| q.pair()))
        .collect();
    let fwd: Vec<_> = std::iter::once(mean_pair)
        .chain(pairs.iter().map(|q| q.forward_pair()))
        .collect();
    let rows: Vec<Complex64> = (0..k * k)
        .into_par_iter()
        .map(|idx| fwd[idx % k].inner(&adj[idx / k]))
        .collect();
    let b = DMatrix::from_row_slice(k, k, &rows);
    let sv = b.clone().singular_values();
    let smax = sv.iter().copied().fold(0.0, f64::max);
    let smin = sv.iter().copied().fold(f64::INFINITY, f64::min);
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(condition <= MODAL_CONDITION_LIMIT) {
        return Err(Error::IllConditioned { condition });
    }
    let lu = b.lu();

    let lambdas: Vec<Complex64> = std::iter::once(Complex64::new(0.0, 0.0))
        .chain(pairs.iter().map(|q| q.lambda))
        .collect();
    let obs: Vec<Complex64> = std::iter::once(Complex64::new(1.0, 0.0))
        .chain(pairs.iter().map(|q| q.xi_at_one()))
        .collect();
    let mut c0 = vec![data.rho0.coeff(0)];
    for q in pairs {
        c0.push(data.pairing(q)?);
    }
    let has_control = !p.coeffs.is_empty();
    let times = cfg.times();
    let coefficients: Vec<Vec<Complex64>> = times
        .par_iter()
        .map(|&t| {
            (0..k)
                .map(|l| {
                    let a = lambdas[l].conj();
                    let mut c = (a * t).exp() * c0[l];
                    if has_control {
                        c += obs[l].conj() * p.convolve(a, t);
                    }
                    c
                })
                .collect()
        })
        .collect();

    let n = cfg.n;
    let samples: Vec<Vec<(Complex64, Complex64)>> = fwd
        .par_iter()
        .map(|f| {
            (0..=n)
                .map(|i| {
                    let x = i as f64 / n as f64;
                    (f.first.eval(x), f.second.eval(x))
                })
                .collect()
        })
        .collect();
    let levels: Vec<(Vec<f64>, Vec<f64>, f64, f64)> = coefficients
        .par_iter()
        .map(|c| {
            let d = lu
                .solve(&nalgebra::DVector::from_column_slice(c))
                .expect("LU of a well-conditioned matrix");
            let mut rho = vec![Complex64::new(0.0, 0.0); n + 1];
            let mut u = vec![Complex64::new(0.0, 0.0); n + 1];
            for (j, s) in samples.iter().enumerate() {
                for i in 0..=n {
                    rho[i] += d[j] * s[i].0;
                    u[i] += d[j] * s[i].1;
                }
            }
            let re_max = rho.iter().chain(&u).map(|z| z.re.abs()).fold(0.0, f64::max);
            let im_max = rho.iter().chain(&u).map(|z| z.im.abs()).fold(0.0, f64::max);
            (
                rho.iter().map(|z| z.re).collect(),
                u.iter().map(|z| z.re).collect(),
                re_max,
                im_max,
            )
        })
        .collect();
    let re_max = levels.iter().map(|l| l.2).fold(0.0, f64::max);
    let im_max = levels.iter().map(|l| l.3).fold(0.0, f64::max);
    let mut traj = Trajectory {
        system: System::Modal,
        config: *cfg,
        times,
        rho: Vec::with_capacity(levels.len()),
        u: Vec::with_capacity(levels.len()),
    };
    for (r, u, _, _) in levels {
        traj.rho.push(r);
        traj.u.push(u);
    }
    Ok(ModalRun {
        trajectory: traj,
        coefficients,
        condition,
        imag_ratio: if re_max > 0.0 { im_max / re_max } else { 0.0 },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thomas_solves_small_system() {
        // [[2,-1,0],[-1,2,-1],[0,-1,2]] x = [1,0,1] -> x = [1,1,1]
        let mut d = vec![1.0, 0.0, 1.0];
        tridiag(-1.0, 2.0, -1.0, &mut d, &mut Vec::new());
        for v in d {
            assert!((v - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn cfl_violation_suggests_steps() {
        let cfg = SimConfig::new(100, 100, 1.5);
        match cfg.validate() {
            Err(Error::Cfl { suggested_m, .. }) => assert_eq!(suggested_m, 150),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn zero_data_stays_zero() {
        let cfg = SimConfig::new(64, 128, 1.5);
        let zero = State::new(
            GridFunction::from_real_fn(64, |_| 0.0).unwrap(),
            GridFunction::from_real_fn(64, |_| 0.0).unwrap(),
        )
        .unwrap();
        let z = crate::control::ZeroSignal { horizon: 1.5 };
        for t in [
            simulate_forward(&zero, &z, &cfg).unwrap(),
            simulate_dirichlet(&zero, &z, &cfg).unwrap(),
            simulate_adjoint(&SourceTerm::zero(&cfg), &zero, &cfg).unwrap(),
        ] {
            assert!(t.rho.iter().chain(&t.u).flatten().all(|&v| v == 0.0));
        }
    }
}
