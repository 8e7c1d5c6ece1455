//! Driven Schrödinger equation
//!
//! ```text
//! i k̄ ∂ψ/∂t = [p²/2 + z + M(z, t)] ψ,    p = -i k̄ ∂/∂z
//! ```
//!
//! on a uniform periodic grid, propagated with a spectral split-operator
//! scheme (see [`SplitOperator`]).

mod checkpoint;
mod propagator;

pub use checkpoint::{read_checkpoint, write_checkpoint, CHECKPOINT_MAGIC};
pub use propagator::{propagate, propagate_with, PotentialTiming, SplitOperator};

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{Histogram, Moments};
use crate::potential::PotentialSpec;
use crate::{Error, Result, DRIVE_PERIOD};

/// Absorbed probability above which a run is rejected as under-resolved.
pub const DEFAULT_MAX_ABSORBED: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridConfigRepr", into = "GridConfigRepr")]
pub struct GridConfig {
    pub z_min: f64,
    pub z_max: f64,
    /// Power of two.
    pub n_points: usize,
    /// Time steps per drive period, `dt = 2π / steps_per_period`.
    pub steps_per_period: usize,
    /// Width of the absorbing layer below `z_max`; 0 disables it.
    pub absorber_width: f64,
    /// Absorption rate at the outer edge of the layer.
    pub absorber_strength: f64,
    pub max_absorbed: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            z_min: -20.0,
            z_max: 800.0,
            n_points: 1 << 14,
            steps_per_period: 2000,
            absorber_width: 50.0,
            absorber_strength: 1.0,
            max_absorbed: DEFAULT_MAX_ABSORBED,
        }
    }
}

impl GridConfig {
    /// Extended grid for delocalized runs above the window.
    pub fn enlarged() -> Self {
        GridConfig {
            z_max: 3000.0,
            n_points: 1 << 16,
            ..Self::default()
        }
    }

    pub fn dz(&self) -> f64 {
        (self.z_max - self.z_min) / self.n_points as f64
    }

    pub fn dt(&self) -> f64 {
        DRIVE_PERIOD / self.steps_per_period as f64
    }

    pub fn z(&self, j: usize) -> f64 {
        self.z_min + j as f64 * self.dz()
    }

    /// Largest representable momentum `π k̄ / dz`.
    pub fn p_max(&self, kbar: f64) -> f64 {
        std::f64::consts::PI * kbar / self.dz()
    }

    pub fn validate(&self) -> Result<()> {
        if !self.n_points.is_power_of_two() || self.n_points < 16 {
            return Err(Error::domain(
                "n_points",
                format!("must be a power of two >= 16, got {}", self.n_points),
            ));
        }
        if !(self.z_min.is_finite() && self.z_max.is_finite() && self.z_max > self.z_min) {
            return Err(Error::domain("z_max", "grid extent must be finite with z_max > z_min"));
        }
        if self.steps_per_period == 0 {
            return Err(Error::domain("steps_per_period", "must be >= 1"));
        }
        if !(self.absorber_width >= 0.0) || self.z_max - self.z_min <= 10.0 * self.absorber_width {
            return Err(Error::domain(
                "absorber_width",
                "must be >= 0 and less than a tenth of the grid extent",
            ));
        }
        if !(self.absorber_strength > 0.0 && self.absorber_strength.is_finite()) {
            return Err(Error::domain("absorber_strength", "must be finite and > 0"));
        }
        if !(self.max_absorbed > 0.0) {
            return Err(Error::domain("max_absorbed", "must be > 0"));
        }
        Ok(())
    }

    pub fn geometry(&self) -> GridGeometry {
        GridGeometry {
            z_min: self.z_min,
            dz: self.dz(),
            n_points: self.n_points,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct GridConfigRepr {
    #[serde(default = "defaults::z_min")]
    z_min: f64,
    #[serde(default = "defaults::z_max")]
    z_max: f64,
    #[serde(default = "defaults::n_points")]
    n_points: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    steps_per_period: Option<usize>,
    #[serde(default = "defaults::absorber_width")]
    absorber_width: f64,
    #[serde(default = "defaults::absorber_strength")]
    absorber_strength: f64,
    #[serde(default = "defaults::max_absorbed")]
    max_absorbed: f64,
}

mod defaults {
    pub fn z_min() -> f64 {
        super::GridConfig::default().z_min
    }
    pub fn z_max() -> f64 {
        super::GridConfig::default().z_max
    }
    pub fn n_points() -> usize {
        super::GridConfig::default().n_points
    }
    pub fn absorber_width() -> f64 {
        super::GridConfig::default().absorber_width
    }
    pub fn absorber_strength() -> f64 {
        super::GridConfig::default().absorber_strength
    }
    pub fn max_absorbed() -> f64 {
        super::DEFAULT_MAX_ABSORBED
    }
}

impl TryFrom<GridConfigRepr> for GridConfig {
    type Error = Error;

    fn try_from(r: GridConfigRepr) -> Result<Self> {
        let time = crate::classical::IntegratorConfig::try_from_parts(r.dt, r.steps_per_period)?;
        let g = GridConfig {
            z_min: r.z_min,
            z_max: r.z_max,
            n_points: r.n_points,
            steps_per_period: time.steps_per_period,
            absorber_width: r.absorber_width,
            absorber_strength: r.absorber_strength,
            max_absorbed: r.max_absorbed,
        };
        g.validate()?;
        Ok(g)
    }
}

impl From<GridConfig> for GridConfigRepr {
    fn from(g: GridConfig) -> Self {
        GridConfigRepr {
            z_min: g.z_min,
            z_max: g.z_max,
            n_points: g.n_points,
            dt: Some(g.dt()),
            steps_per_period: Some(g.steps_per_period),
            absorber_width: g.absorber_width,
            absorber_strength: g.absorber_strength,
            max_absorbed: g.max_absorbed,
        }
    }
}

/// Position grid `z_j = z_min + j·dz`, `j = 0..n_points`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridGeometry {
    pub z_min: f64,
    pub dz: f64,
    pub n_points: usize,
}

impl GridGeometry {
    pub fn z(&self, j: usize) -> f64 {
        self.z_min + j as f64 * self.dz
    }

    /// Signed FFT frequency index of bin `m`.
    pub fn signed_index(&self, m: usize) -> i64 {
        let n = self.n_points;
        if m < n / 2 {
            m as i64
        } else {
            m as i64 - n as i64
        }
    }

    /// Momentum of FFT bin `m`: `k̄ · 2π m_signed / (n dz)`.
    pub fn momentum(&self, m: usize, kbar: f64) -> f64 {
        kbar * DRIVE_PERIOD * self.signed_index(m) as f64 / (self.n_points as f64 * self.dz)
    }

    pub fn dp(&self, kbar: f64) -> f64 {
        kbar * DRIVE_PERIOD / (self.n_points as f64 * self.dz)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Wavefunction {
    pub amplitudes: Vec<Complex64>,
    pub t: f64,
    /// Probability removed by the absorbing layer so far.
    pub norm_lost: f64,
    pub grid: GridGeometry,
}

impl Wavefunction {
    /// `Σ |ψ_j|² dz`.
    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>() * self.grid.dz
    }

    pub fn is_finite(&self) -> bool {
        self.amplitudes.iter().all(|a| a.re.is_finite() && a.im.is_finite())
    }

    /// `ψ̃(p_m) = dz/√(2πk̄) Σ_j ψ_j e^{-i p_m z_j / k̄}` up to a global phase, in FFT order.
    pub fn momentum_amplitudes(&self, kbar: f64) -> Vec<Complex64> {
        let mut buf = self.amplitudes.clone();
        FftPlanner::new().plan_fft_forward(buf.len()).process(&mut buf);
        let scale = self.grid.dz / (DRIVE_PERIOD * kbar).sqrt();
        buf.iter_mut().for_each(|a| *a *= scale);
        buf
    }

    /// Position and momentum moments, normalized by the remaining probability.
    pub fn moments(&self, kbar: f64) -> Moments {
        let momentum = self.momentum_amplitudes(kbar);
        moments_from(&self.amplitudes, &momentum, &self.grid, kbar)
    }

    /// `⟨p²/2 + V(z, t)⟩ / ⟨1⟩`.
    pub fn energy(&self, spec: &PotentialSpec, kbar: f64) -> f64 {
        let g = &self.grid;
        let norm_z: f64 = self.amplitudes.iter().map(|a| a.norm_sqr()).sum();
        let potential: f64 = self
            .amplitudes
            .iter()
            .enumerate()
            .map(|(j, a)| a.norm_sqr() * spec.potential(g.z(j), self.t))
            .sum::<f64>()
            / norm_z;
        let momentum = self.momentum_amplitudes(kbar);
        let norm_p: f64 = momentum.iter().map(|a| a.norm_sqr()).sum();
        let kinetic: f64 = momentum
            .iter()
            .enumerate()
            .map(|(m, a)| 0.5 * g.momentum(m, kbar).powi(2) * a.norm_sqr())
            .sum::<f64>()
            / norm_p;
        kinetic + potential
    }
}

pub(crate) fn moments_from(psi: &[Complex64], momentum: &[Complex64], g: &GridGeometry, kbar: f64) -> Moments {
    let (mut w, mut s1, mut s2) = (0.0, 0.0, 0.0);
    for (j, a) in psi.iter().enumerate() {
        let d = a.norm_sqr();
        let z = g.z(j);
        w += d;
        s1 += d * z;
        s2 += d * z * z;
    }
    let mean_z = s1 / w;
    let var_z = (s2 / w - mean_z * mean_z).max(0.0);

    let (mut wp, mut q1, mut q2) = (0.0, 0.0, 0.0);
    for (m, a) in momentum.iter().enumerate() {
        let d = a.norm_sqr();
        let p = g.momentum(m, kbar);
        wp += d;
        q1 += d * p;
        q2 += d * p * p;
    }
    let mean_p = q1 / wp;
    let var_p = (q2 / wp - mean_p * mean_p).max(0.0);
    Moments {
        mean_z,
        mean_p,
        var_z,
        var_p,
        norm: w * g.dz,
    }
}

/// Tail mass of a unit normal beyond `x` standard deviations.
fn normal_tail(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

/// Minimum-uncertainty packet `ψ ∝ exp[-(z - z₀)²/(4Δz²) + i p₀ z / k̄]`,
/// normalized to one, with `Δp = k̄ / (2Δz)`.
pub fn init_gaussian(
    center_z: f64,
    center_p: f64,
    dz_width: f64,
    grid: &GridConfig,
    kbar: f64,
) -> Result<Wavefunction> {
    grid.validate()?;
    if !(kbar > 0.0 && kbar.is_finite()) {
        return Err(Error::domain("kbar", "must be finite and > 0"));
    }
    if !(dz_width > 0.0 && dz_width.is_finite()) {
        return Err(Error::domain("dz_width", "must be finite and > 0"));
    }
    let lower_gap = (center_z - grid.z_min) / dz_width;
    let upper_gap = (grid.z_max - grid.absorber_width - center_z) / dz_width;
    let tail = normal_tail(lower_gap) + normal_tail(upper_gap);
    if lower_gap < 5.0 || upper_gap < 5.0 || tail > 1e-12 {
        return Err(Error::Config(format!(
            "initial packet at z={center_z} with width {dz_width} leaks off the grid (tail {tail:.2e})"
        )));
    }
    let dp = kbar / (2.0 * dz_width);
    if center_p.abs() + 8.0 * dp > grid.p_max(kbar) {
        return Err(Error::Config(format!(
            "initial momentum spread exceeds the grid cutoff {:.3}",
            grid.p_max(kbar)
        )));
    }
    let geometry = grid.geometry();
    let mut amplitudes: Vec<Complex64> = (0..grid.n_points)
        .map(|j| {
            let z = geometry.z(j);
            let x = z - center_z;
            Complex64::from_polar((-x * x / (4.0 * dz_width * dz_width)).exp(), center_p * x / kbar)
        })
        .collect();
    let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>() * geometry.dz;
    let s = 1.0 / norm.sqrt();
    amplitudes.iter_mut().for_each(|a| *a *= s);
    Ok(Wavefunction {
        amplitudes,
        t: 0.0,
        norm_lost: 0.0,
        grid: geometry,
    })
}

/// `P(z_j) = |ψ_j|²`, integrating to the remaining probability.
pub fn position_distribution(psi: &Wavefunction) -> Histogram {
    let g = &psi.grid;
    Histogram::from_density(
        (0..g.n_points).map(|j| g.z(j)).collect(),
        psi.amplitudes.iter().map(|a| a.norm_sqr()).collect(),
        g.dz,
    )
}

/// `P(p_m) = |ψ̃_m|²` on the momentum grid in ascending order.
pub fn momentum_distribution(psi: &Wavefunction, kbar: f64) -> Histogram {
    let g = &psi.grid;
    let amps = psi.momentum_amplitudes(kbar);
    let n = g.n_points;
    let order = (n / 2..n).chain(0..n / 2);
    let (centers, density) = order.map(|m| (g.momentum(m, kbar), amps[m].norm_sqr())).unzip();
    Histogram::from_density(centers, density, g.dp(kbar))
}
