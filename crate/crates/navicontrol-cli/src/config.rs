//! Experiment configuration (JSON).

use std::path::{Path, PathBuf};

use navicontrol::control::{InitialData, Velocity};
use navicontrol::sim::Transport;
use navicontrol::{c64, ExpSum, FourierVector};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

/// Density modes `(m, re, im)` of `ρ0(x) = Σ c_m e^{-2πimx}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensitySpec {
    pub modes: Vec<(i64, f64, f64)>,
}

impl Default for DensitySpec {
    /// `sin(2πx)`.
    fn default() -> Self {
        Self {
            modes: vec![(1, 0.0, 0.5), (-1, 0.0, -0.5)],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum VelocitySpec {
    /// `sin(πx)`.
    SinPiX,
    /// `Σ a_j sin(jπx)` from `(j, a_j)`.
    SineModes { modes: Vec<(u32, f64)> },
}

impl Default for VelocitySpec {
    fn default() -> Self {
        VelocitySpec::SinPiX
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialDataSpec {
    pub rho0: DensitySpec,
    pub u0: VelocitySpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Control horizon `T`.
    pub horizon: f64,
    /// Sobolev exponent `s` of the density data.
    pub sobolev_exponent: f64,
    /// Diffusive modes constrained by the control.
    pub k_para: i64,
    /// Transport modes constrained by the control (each sign).
    pub k_hyp: i64,
    /// Largest `|k|` of the spectral and basis diagnostics.
    pub k_spectrum: i64,
    /// Space intervals of the finite-difference runs.
    pub n: usize,
    /// Time steps of the finite-difference runs.
    pub m: usize,
    pub newton_tol: f64,
    pub svd_tol: f64,
    pub residual_tol: f64,
    /// Exponent `n` of the control window `sin^{2n}(πt/T)`.
    pub weight_power: u32,
    pub transport: Transport,
    pub initial_data: InitialDataSpec,
    pub out_dir: PathBuf,
    /// Seed of the random smooth data used by the identity checks.
    pub seed: u64,
    /// Accept `s ≤ 1/2`.
    pub override_regularity_check: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            horizon: 1.5,
            sobolev_exponent: 1.0,
            k_para: 20,
            k_hyp: 20,
            k_spectrum: 64,
            n: 1024,
            m: 4096,
            newton_tol: 1e-12,
            svd_tol: 1e-10,
            residual_tol: 1e-8,
            weight_power: 2,
            transport: Transport::BeamWarming,
            initial_data: InitialDataSpec::default(),
            out_dir: PathBuf::from("navicontrol-out"),
            seed: 7,
            override_regularity_check: false,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))
    }

    /// Checks the hypotheses; `T ≤ 1` needs `override_time`.
    pub fn validate(&self, override_time: bool) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Usage(m));
        if !(self.horizon > 0.0) {
            return bad(format!("horizon must be positive, got {}", self.horizon));
        }
        if self.horizon <= 1.0 && !override_time {
            return bad(format!(
                "horizon {} does not exceed the transport time 1; pass --override-time-check to run anyway",
                self.horizon
            ));
        }
        if !(self.sobolev_exponent > 0.5) && !self.override_regularity_check {
            return bad(format!(
                "sobolev_exponent {} must exceed 1/2 (set override_regularity_check to run anyway)",
                self.sobolev_exponent
            ));
        }
        if self.k_para < 4 || self.k_hyp < 4 {
            return bad(format!("k_para and k_hyp must be at least 4, got {}/{}", self.k_para, self.k_hyp));
        }
        if self.k_spectrum < self.k_para.max(self.k_hyp).max(16) {
            return bad(format!(
                "k_spectrum {} must cover the control modes and at least 16",
                self.k_spectrum
            ));
        }
        if self.n < 64 || self.n % 4 != 0 {
            return bad(format!("n must be a multiple of 4 and at least 64, got {}", self.n));
        }
        if self.m % 4 != 0 || (self.horizon / self.m as f64) > 1.0 / self.n as f64 {
            return bad(format!(
                "m = {} violates dt <= dx or is not a multiple of 4 (need m >= {})",
                self.m,
                (self.horizon * self.n as f64).ceil()
            ));
        }
        for (name, v) in [
            ("newton_tol", self.newton_tol),
            ("svd_tol", self.svd_tol),
            ("residual_tol", self.residual_tol),
        ] {
            if !(v > 0.0) {
                return bad(format!("{name} must be positive"));
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON with the output directory blanked.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out_dir = PathBuf::new();
        let text = serde_json::to_string(&c).expect("config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    /// Hash of the fields the spectrum depends on.
    pub fn spectrum_hash(&self) -> String {
        let key = serde_json::json!({
            "k_spectrum": self.k_spectrum,
            "newton_tol": self.newton_tol,
        });
        hex::encode(Sha256::digest(key.to_string().as_bytes()))
    }

    pub fn initial_data(&self) -> Result<InitialData, CliError> {
        let rho0 = FourierVector::new(
            self.initial_data
                .rho0
                .modes
                .iter()
                .map(|&(m, re, im)| (m, c64(re, im))),
            self.sobolev_exponent,
            true,
        )
        .map_err(|e| CliError::Usage(format!("initial density: {e}")))?;
        let u0 = match &self.initial_data.u0 {
            VelocitySpec::SinPiX => ExpSum::sine(1.0, 1.0),
            VelocitySpec::SineModes { modes } => modes
                .iter()
                .fold(ExpSum::new(), |acc, &(j, a)| acc.plus(&ExpSum::sine(j as f64, a))),
        };
        Ok(InitialData {
            rho0,
            u0: Velocity::Closed(u0),
        })
    }
}
