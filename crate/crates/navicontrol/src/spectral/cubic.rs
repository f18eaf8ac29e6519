//! Roots of the auxiliary cubic `m³ + μm² + 2μm + μ² = 0`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pairwise separation below `DEGENERATE_TOL · scale` marks a (near) double
/// root. A double root is only resolved to about `√ε ≈ 1.5e-8` relative, so
/// the flag sits a little above that floor.
pub const DEGENERATE_TOL: f64 = 1e-7;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CubicRoots {
    /// `m1 ≈ -μ + 1`, `m2 ≈ -1/2 - i√μ`, `m3 ≈ -1/2 + i√μ`.
    pub m: [Complex64; 3],
    /// Largest relative polynomial residual over the three roots.
    pub residual: f64,
    /// Smallest pairwise distance.
    pub separation: f64,
    pub degenerate: bool,
}

impl CubicRoots {
    /// Errors out when two roots (nearly) coincide.
    pub fn require_distinct(&self, mu: Complex64) -> Result<()> {
        if self.degenerate {
            return Err(Error::DegenerateRoots {
                mu,
                separation: self.separation,
            });
        }
        Ok(())
    }
}

pub fn poly(mu: Complex64, m: Complex64) -> Complex64 {
    ((m + mu) * m + 2.0 * mu) * m + mu * mu
}

fn dpoly(mu: Complex64, m: Complex64) -> Complex64 {
    (3.0 * m + 2.0 * mu) * m + 2.0 * mu
}

/// `|p(m)|` relative to the sum of the magnitudes of its four terms.
pub fn relative_residual(mu: Complex64, m: Complex64) -> f64 {
    let a = m.norm();
    let b = mu.norm();
    let scale = a * a * a + b * a * a + 2.0 * b * a + b * b;
    if scale == 0.0 {
        0.0
    } else {
        poly(mu, m).norm() / scale
    }
}

fn initial_guesses(mu: Complex64) -> [Complex64; 3] {
    if mu.norm() >= 4.0 {
        let s = mu.sqrt();
        let i = Complex64::i();
        [-mu + 1.0, -0.5 - i * s, -0.5 + i * s]
    } else {
        let r = 1.0 + mu.norm();
        let w = Complex64::new(0.4, 0.9);
        [w * r, w * w * r, w * w * w * r]
    }
}

fn durand_kerner(mu: Complex64) -> [Complex64; 3] {
    let mut z = initial_guesses(mu);
    let scale = 1.0 + mu.norm();
    for _ in 0..500 {
        let mut worst = 0.0f64;
        for i in 0..3 {
            let mut den = Complex64::new(1.0, 0.0);
            for j in 0..3 {
                if j != i {
                    den *= z[i] - z[j];
                }
            }
            if den.norm() == 0.0 {
                continue;
            }
            let step = poly(mu, z[i]) / den;
            z[i] -= step;
            worst = worst.max(step.norm());
        }
        if worst <= 1e-16 * scale {
            break;
        }
    }
    z
}

fn polish(mu: Complex64, mut m: Complex64) -> Complex64 {
    for _ in 0..4 {
        let d = dpoly(mu, m);
        if d.norm() == 0.0 {
            break;
        }
        let next = m - poly(mu, m) / d;
        if relative_residual(mu, next) < relative_residual(mu, m) {
            m = next;
        } else {
            break;
        }
    }
    m
}

/// The three roots with the asymptotic labeling. `μ = 0` (triple root) is rejected.
pub fn cubic_roots(mu: Complex64) -> Result<CubicRoots> {
    if mu.norm() == 0.0 {
        return Err(Error::ZeroMu);
    }
    if !(mu.re.is_finite() && mu.im.is_finite()) {
        return Err(Error::InvalidInput(format!("non-finite mu {mu}")));
    }
    let raw = durand_kerner(mu).map(|m| polish(mu, m));

    let t1 = -mu + 1.0;
    let i1 = (0..3)
        .min_by(|&a, &b| (raw[a] - t1).norm().total_cmp(&(raw[b] - t1).norm()))
        .unwrap();
    let rest: Vec<usize> = (0..3).filter(|&i| i != i1).collect();
    let t2 = -0.5 - Complex64::i() * mu.sqrt();
    let (i2, i3) = if (raw[rest[0]] - t2).norm() <= (raw[rest[1]] - t2).norm() {
        (rest[0], rest[1])
    } else {
        (rest[1], rest[0])
    };
    let m = [raw[i1], raw[i2], raw[i3]];

    let residual = m
        .iter()
        .map(|&r| relative_residual(mu, r))
        .fold(0.0, f64::max);
    let separation = (m[0] - m[1])
        .norm()
        .min((m[1] - m[2]).norm())
        .min((m[2] - m[0]).norm());
    let scale = m.iter().map(|r| r.norm()).fold(1.0, f64::max);
    Ok(CubicRoots {
        m,
        residual,
        separation,
        degenerate: separation < DEGENERATE_TOL * scale,
    })
}
