use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Physical constants of the steady state and pressure law `p(ρ) = a ρ^γ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingParams {
    pub q0: f64,
    pub v0: f64,
    pub nu: f64,
    pub a: f64,
    pub gamma: f64,
    pub length: f64,
}

/// Dimensionless groups of the rescaled system.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dimensionless {
    pub b: f64,
    pub delta: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl Default for ScalingParams {
    fn default() -> Self {
        Self {
            q0: 1.0,
            v0: 1.0,
            nu: 1.0,
            a: 1.0,
            gamma: 1.0,
            length: 1.0,
        }
    }
}

impl ScalingParams {
    pub fn validate(&self) -> Result<()> {
        let all = [self.q0, self.v0, self.nu, self.a, self.gamma, self.length];
        if all.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidInput(
                "scaling parameters must be finite and positive".into(),
            ));
        }
        if self.gamma < 1.0 {
            return Err(Error::InvalidInput("gamma must be at least 1".into()));
        }
        Ok(())
    }
}

/// Sound speed squared over the steady state, `aγQ0^{γ-3}`.
fn pressure_factor(p: &ScalingParams) -> f64 {
    p.a * p.gamma * p.q0.powf(p.gamma - 3.0)
}

pub fn nondimensionalize(p: &ScalingParams) -> Result<Dimensionless> {
    p.validate()?;
    let pf = pressure_factor(p);
    Ok(Dimensionless {
        b: p.q0 / p.v0 * pf.sqrt(),
        delta: p.q0 * p.v0 / p.nu,
        alpha: pf.powf(-0.5),
        beta: p.q0 * p.v0 * p.v0 / p.nu,
    })
}
