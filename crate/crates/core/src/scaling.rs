//! Reduction of laboratory parameters to the dimensionless model.
//!
//! With drive frequency `ω`, gravity `g`, atomic mass `m` and evanescent decay
//! constant `k` (intensity `∝ e^{-2kz}`), the reduced quantities are
//!
//! ```text
//! V0 = ħ ω² Ω_eff / (4 m g²)     κ = 2 k g / ω²
//! λ  = ω² ε / (2 k g)            k̄ = ħ ω³ / (m g²)
//! ```
//!
//! so that `κ λ = ε` exactly.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Critical chaos parameter of the standard map, above which diffusion is global.
pub const K_CRITICAL: f64 = 0.9716;

/// Laboratory-frame parameters, SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    pub mass_kg: f64,
    pub gravity_m_s2: f64,
    #[serde(rename = "hbar_Js")]
    pub hbar_js: f64,
    pub drive_omega_rad_s: f64,
    /// Evanescent-wave decay constant `k` in 1/m.
    pub decay_k_inv_m: f64,
    /// Effective Rabi frequency `Ω_eff`.
    #[serde(default)]
    pub rabi_eff_rad_s: f64,
    /// Modulation amplitude `ε`.
    #[serde(default)]
    pub modulation_eps: f64,
}

impl PhysicalParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("mass_kg", self.mass_kg),
            ("gravity_m_s2", self.gravity_m_s2),
            ("hbar_Js", self.hbar_js),
            ("drive_omega_rad_s", self.drive_omega_rad_s),
            ("decay_k_inv_m", self.decay_k_inv_m),
        ];
        for (field, value) in positive {
            if !value.is_finite() || value <= 0.0 {
                return Err(Error::domain(field, format!("must be finite and > 0, got {value}")));
            }
        }
        for (field, value) in [
            ("rabi_eff_rad_s", self.rabi_eff_rad_s),
            ("modulation_eps", self.modulation_eps),
        ] {
            if !value.is_finite() || value < 0.0 {
                return Err(Error::domain(field, format!("must be finite and >= 0, got {value}")));
            }
        }
        Ok(())
    }
}

/// The four numbers that fully determine the reduced dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimensionlessParams {
    pub v0: f64,
    pub kappa: f64,
    pub lambda_mod: f64,
    pub kbar: f64,
}

impl DimensionlessParams {
    /// Reference point of all presets.
    pub const REFERENCE: DimensionlessParams = DimensionlessParams {
        v0: 60.0,
        kappa: 0.5,
        lambda_mod: 0.0,
        kbar: 4.0,
    };

    pub fn with_lambda(self, lambda_mod: f64) -> Self {
        DimensionlessParams { lambda_mod, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.v0.is_finite() || self.v0 < 0.0 {
            return Err(Error::domain("v0", format!("must be finite and >= 0, got {}", self.v0)));
        }
        if !self.kappa.is_finite() || self.kappa <= 0.0 {
            return Err(Error::domain(
                "kappa",
                format!("must be finite and > 0, got {}", self.kappa),
            ));
        }
        if !self.lambda_mod.is_finite() || self.lambda_mod < 0.0 {
            return Err(Error::domain(
                "lambda_mod",
                format!("must be finite and >= 0, got {}", self.lambda_mod),
            ));
        }
        if !self.kbar.is_finite() || self.kbar <= 0.0 {
            return Err(Error::domain(
                "kbar",
                format!("must be finite and > 0, got {}", self.kbar),
            ));
        }
        Ok(())
    }

    /// Equivalent relative intensity modulation `ε = κλ`.
    pub fn epsilon(&self) -> f64 {
        epsilon_for_lambda(self.lambda_mod, self.kappa)
    }
}

pub fn to_dimensionless(p: &PhysicalParams) -> Result<DimensionlessParams> {
    p.validate()?;
    let w2 = p.drive_omega_rad_s * p.drive_omega_rad_s;
    let g = p.gravity_m_s2;
    let mg2 = p.mass_kg * g * g;
    let k = p.decay_k_inv_m;

    let d = DimensionlessParams {
        v0: p.hbar_js * w2 * p.rabi_eff_rad_s / (4.0 * mg2),
        kappa: 2.0 * k * g / w2,
        lambda_mod: w2 * p.modulation_eps / (2.0 * k * g),
        kbar: p.hbar_js * w2 * p.drive_omega_rad_s / mg2,
    };

    let eps = d.epsilon();
    if (eps - p.modulation_eps).abs() > 1e-12 * p.modulation_eps.max(f64::MIN_POSITIVE) {
        return Err(Error::domain(
            "modulation_eps",
            format!("kappa*lambda = {eps} does not reproduce epsilon = {}", p.modulation_eps),
        ));
    }
    if !(d.v0.is_finite() && d.kappa.is_finite() && d.lambda_mod.is_finite() && d.kbar.is_finite()) {
        return Err(Error::domain("drive_omega_rad_s", "reduced parameters overflow"));
    }
    Ok(d)
}

/// Lower and upper modulation depths `(K_cr/4, √k̄/2)` bounding the localization window.
pub fn window_bounds(d: &DimensionlessParams) -> (f64, f64) {
    (lower_window_bound(), d.kbar.sqrt() / 2.0)
}

pub fn lower_window_bound() -> f64 {
    K_CRITICAL / 4.0
}

pub fn epsilon_for_lambda(lambda_mod: f64, kappa: f64) -> f64 {
    kappa * lambda_mod
}

/// Inverse of [`epsilon_for_lambda`].
pub fn lambda_for_epsilon(eps: f64, kappa: f64) -> f64 {
    eps / kappa
}
