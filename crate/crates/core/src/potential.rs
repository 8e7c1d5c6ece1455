//! Time-dependent potential of the modulated evanescent mirror under gravity.
//!
//! In reduced units the potential is `V(z, t) = z + M(z, t)` where the mirror
//! term `M` takes one of two forms:
//!
//! - oscillating mirror: `M = V0 exp[-κ (z - λ sin t)]`
//! - modulated intensity: `M = V0 exp(-κ z) (1 + κλ sin t)`
//!
//! Both are written as `M = scale(t) · V0 · exp(-κ z + shift(t))`, which is the
//! single evaluation path used by the classical and quantum solvers.

use std::sync::atomic::{AtomicBool, Ordering};

use serde::{Deserialize, Serialize};

use crate::scaling::DimensionlessParams;

/// Largest exponent passed to `exp`; beyond it the mirror term saturates.
pub const EXPONENT_CLAMP: f64 = 700.0;

static CLAMP_WARNED: AtomicBool = AtomicBool::new(false);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ModulationForm {
    /// `V0 exp[-κ(z - λ sin t)]`: the mirror surface oscillates with amplitude λ.
    #[default]
    MirrorOscillation,
    /// `V0 exp(-κz)(1 + κλ sin t)`: sinusoidal modulation of the intensity.
    IntensityModulation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PotentialSpec {
    pub v0: f64,
    pub kappa: f64,
    pub lambda_mod: f64,
    #[serde(default)]
    pub modulation_form: ModulationForm,
}

/// Drive-phase dependence of the mirror term at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveFactor {
    /// Added to the exponent `-κz`.
    pub shift: f64,
    /// Multiplies the exponential.
    pub scale: f64,
}

impl DriveFactor {
    pub const STATIC: DriveFactor = DriveFactor { shift: 0.0, scale: 1.0 };
}

impl PotentialSpec {
    pub fn new(v0: f64, kappa: f64, lambda_mod: f64) -> Self {
        PotentialSpec {
            v0,
            kappa,
            lambda_mod,
            modulation_form: ModulationForm::MirrorOscillation,
        }
    }

    pub fn from_params(d: &DimensionlessParams, form: ModulationForm) -> Self {
        PotentialSpec {
            v0: d.v0,
            kappa: d.kappa,
            lambda_mod: d.lambda_mod,
            modulation_form: form,
        }
    }

    pub fn with_form(self, modulation_form: ModulationForm) -> Self {
        PotentialSpec {
            modulation_form,
            ..self
        }
    }

    pub fn drive(&self, t: f64) -> DriveFactor {
        let s = t.sin();
        match self.modulation_form {
            ModulationForm::MirrorOscillation => DriveFactor {
                shift: self.kappa * self.lambda_mod * s,
                scale: 1.0,
            },
            ModulationForm::IntensityModulation => DriveFactor {
                shift: 0.0,
                scale: 1.0 + self.kappa * self.lambda_mod * s,
            },
        }
    }

    /// Mirror term `M(z, t)` for a precomputed drive factor.
    #[inline]
    pub fn mirror_with(&self, z: f64, drive: DriveFactor) -> f64 {
        let mut arg = -self.kappa * z + drive.shift;
        if arg > EXPONENT_CLAMP {
            if !CLAMP_WARNED.swap(true, Ordering::Relaxed) {
                log::warn!("mirror exponent {arg:.1} clamped to {EXPONENT_CLAMP} at z={z}");
            }
            arg = EXPONENT_CLAMP;
        }
        drive.scale * self.v0 * arg.exp()
    }

    pub fn mirror(&self, z: f64, t: f64) -> f64 {
        self.mirror_with(z, self.drive(t))
    }

    /// Full potential: gravity `z` plus the mirror term.
    pub fn potential(&self, z: f64, t: f64) -> f64 {
        z + self.mirror(z, t)
    }

    /// `-∂V/∂z = -1 + κ M(z, t)`.
    #[inline]
    pub fn force_with(&self, z: f64, drive: DriveFactor) -> f64 {
        -1.0 + self.kappa * self.mirror_with(z, drive)
    }

    pub fn force(&self, z: f64, t: f64) -> f64 {
        self.force_with(z, self.drive(t))
    }

    /// Position where the static mirror force balances gravity, `ln(κV0)/κ`.
    pub fn equilibrium_z(&self) -> f64 {
        (self.kappa * self.v0).ln() / self.kappa
    }

    /// Energy `p²/2 + V(z, t)` at the given instant.
    pub fn energy(&self, z: f64, p: f64, t: f64) -> f64 {
        0.5 * p * p + self.potential(z, t)
    }
}

/// Free functions mirroring the method API.
pub fn potential(spec: &PotentialSpec, z: f64, t: f64) -> f64 {
    spec.potential(z, t)
}

pub fn force(spec: &PotentialSpec, z: f64, t: f64) -> f64 {
    spec.force(z, t)
}
