use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::{moments_from, GridConfig, GridGeometry, Wavefunction};
use crate::diagnostics::{Moments, TimeSeriesRecord};
use crate::potential::{DriveFactor, ModulationForm, PotentialSpec};
use crate::{Error, Result};

/// Mirror phases per step below this size (radians) are dropped.
const NEGLIGIBLE_PHASE: f64 = 1e-18;

/// Instant at which the time-dependent potential of a step is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum PotentialTiming {
    /// `t + dt/2`: second order in `dt`.
    #[default]
    Midpoint,
    /// `t`: only first order; kept to test the convention.
    StepStart,
}

/// Strang-split propagator
///
/// ```text
/// ψ(t + dt) = e^{-i dt V(t_s)/(2k̄)} F⁻¹ e^{-i dt p²/(2k̄)} F e^{-i dt V(t_s)/(2k̄)} ψ(t)
/// ```
///
/// with `t_s` set by [`PotentialTiming`]. Between consecutive steps the
/// trailing and leading half potential phases are applied as one diagonal
/// factor, together with the absorbing mask. The gravity phase is tabulated;
/// the drive-dependent mirror phase is evaluated only on the grid points where
/// it exceeds `1e-18` rad per step.
pub struct SplitOperator {
    geometry: GridGeometry,
    kbar: f64,
    dt: f64,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
    work: Vec<Complex64>,
    /// `e^{-i dt p²/(2k̄)} / n` in FFT order.
    kinetic: Vec<Complex64>,
    /// `e^{-i dt z/k̄}`.
    gravity_full: Vec<Complex64>,
    /// `V0 e^{-κ z_j}` on the mirror region `j < mirror_end`.
    mirror_profile: Vec<f64>,
    /// Mirror drive factor `scale·e^{shift}` for each step of one period.
    drive: Vec<f64>,
    absorber_start: usize,
    /// Per-step survival amplitude on `j >= absorber_start`.
    mask: Vec<f64>,
    max_absorbed: f64,
}

impl SplitOperator {
    pub fn new(grid: &GridConfig, spec: &PotentialSpec, kbar: f64) -> Result<Self> {
        Self::with_timing(grid, spec, kbar, PotentialTiming::Midpoint)
    }

    pub fn with_timing(grid: &GridConfig, spec: &PotentialSpec, kbar: f64, timing: PotentialTiming) -> Result<Self> {
        grid.validate()?;
        if !(kbar > 0.0 && kbar.is_finite()) {
            return Err(Error::domain("kbar", "must be finite and > 0"));
        }
        let geometry = grid.geometry();
        let n = grid.n_points;
        let dt = grid.dt();

        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let scratch_len = forward.get_inplace_scratch_len().max(inverse.get_inplace_scratch_len());

        let kinetic = (0..n)
            .map(|m| {
                let p = geometry.momentum(m, kbar);
                Complex64::from_polar(1.0 / n as f64, -dt * p * p / (2.0 * kbar))
            })
            .collect();
        let gravity_full = (0..n)
            .map(|j| Complex64::from_polar(1.0, -dt * geometry.z(j) / kbar))
            .collect();

        let offset = match timing {
            PotentialTiming::Midpoint => 0.5,
            PotentialTiming::StepStart => 0.0,
        };
        let drive: Vec<f64> = (0..grid.steps_per_period)
            .map(|k| {
                let DriveFactor { shift, scale } = spec.drive((k as f64 + offset) * dt);
                match spec.modulation_form {
                    ModulationForm::MirrorOscillation => shift.exp(),
                    ModulationForm::IntensityModulation => scale,
                }
            })
            .collect();
        let drive_max = drive.iter().copied().fold(0.0, f64::max);
        let mirror_profile: Vec<f64> = (0..n)
            .map(|j| spec.mirror_with(geometry.z(j), DriveFactor::STATIC))
            .take_while(|&m| m * drive_max * dt / kbar > NEGLIGIBLE_PHASE)
            .collect();

        let (absorber_start, mask) = if grid.absorber_width > 0.0 {
            let z_a = grid.z_max - grid.absorber_width;
            let start = (0..n).find(|&j| geometry.z(j) >= z_a).unwrap_or(n);
            let mask = (start..n)
                .map(|j| {
                    let x = ((geometry.z(j) - z_a) / grid.absorber_width).clamp(0.0, 1.0);
                    let rate = grid.absorber_strength * 0.5 * (1.0 - (std::f64::consts::PI * x).cos());
                    (-rate * dt).exp()
                })
                .collect();
            (start, mask)
        } else {
            (n, Vec::new())
        };

        Ok(SplitOperator {
            geometry,
            kbar,
            dt,
            forward,
            inverse,
            scratch: vec![Complex64::default(); scratch_len],
            work: vec![Complex64::default(); n],
            kinetic,
            gravity_full,
            mirror_profile,
            drive,
            absorber_start,
            mask,
            max_absorbed: grid.max_absorbed,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Grid points on which the mirror phase is evaluated each step.
    pub fn mirror_points(&self) -> usize {
        self.mirror_profile.len()
    }

    fn check_compatible(&self, psi: &Wavefunction) -> Result<u64> {
        if psi.grid != self.geometry || psi.amplitudes.len() != self.geometry.n_points {
            return Err(Error::Config(
                "wavefunction grid does not match the propagator grid".into(),
            ));
        }
        let step = (psi.t / self.dt).round();
        if step < 0.0 || (step * self.dt - psi.t).abs() > 1e-9 * psi.t.abs().max(1.0) {
            return Err(Error::Config(format!(
                "wavefunction time {} is not on the step grid",
                psi.t
            )));
        }
        Ok(step as u64)
    }

    /// Multiply by `exp(-i w dt V/k̄)` with the mirror evaluated at drive factor `f`,
    /// for `w = 1/2` at the ends of a run of steps.
    fn half_potential(&self, psi: &mut [Complex64], f: f64) {
        let c = -0.5 * self.dt / self.kbar;
        for (j, a) in psi.iter_mut().enumerate() {
            let mirror = self.mirror_profile.get(j).map_or(0.0, |m| m * f);
            *a *= Complex64::cis(c * (self.geometry.z(j) + mirror));
        }
    }

    /// Trailing half phase at drive `fa` followed by leading half phase at `fb`.
    fn fused_potential(&self, psi: &mut [Complex64], fa: f64, fb: f64) {
        let c_grav = -self.dt / self.kbar;
        let c_mirror = -0.5 * self.dt / self.kbar * (fa + fb);
        let split = self.mirror_profile.len();
        let (near, far) = psi.split_at_mut(split);
        for (j, (a, m)) in near.iter_mut().zip(&self.mirror_profile).enumerate() {
            *a *= Complex64::cis(c_grav * self.geometry.z(j) + c_mirror * m);
        }
        for (a, g) in far.iter_mut().zip(&self.gravity_full[split..]) {
            *a *= g;
        }
    }

    /// Apply the absorbing mask; returns the removed probability.
    fn absorb(&self, psi: &mut [Complex64]) -> f64 {
        let mut lost = 0.0;
        for (a, m) in psi[self.absorber_start..].iter_mut().zip(&self.mask) {
            let before = a.norm_sqr();
            *a *= m;
            lost += before * (1.0 - m * m);
        }
        lost * self.geometry.dz
    }

    fn kinetic_step(&mut self, psi: &mut [Complex64]) {
        self.forward.process_with_scratch(psi, &mut self.scratch);
        for (a, k) in psi.iter_mut().zip(&self.kinetic) {
            *a *= k;
        }
        self.inverse.process_with_scratch(psi, &mut self.scratch);
    }

    /// Advance `n_steps` time steps.
    pub fn advance(&mut self, psi: &mut Wavefunction, n_steps: u64) -> Result<()> {
        let start = self.check_compatible(psi)?;
        if n_steps == 0 {
            return Ok(());
        }
        let period = self.drive.len();
        let mut k = (start % period as u64) as usize;
        let mut amps = std::mem::take(&mut psi.amplitudes);
        let mut lost = 0.0;

        self.half_potential(&mut amps, self.drive[k]);
        for i in 0..n_steps {
            self.kinetic_step(&mut amps);
            let current = self.drive[k];
            k = if k + 1 == period { 0 } else { k + 1 };
            if i + 1 < n_steps {
                self.fused_potential(&mut amps, current, self.drive[k]);
            } else {
                self.half_potential(&mut amps, current);
            }
            lost += self.absorb(&mut amps);
        }
        psi.amplitudes = amps;
        psi.t = (start + n_steps) as f64 * self.dt;
        psi.norm_lost += lost;

        if !psi.is_finite() {
            return Err(Error::WavefunctionBlowup { t: psi.t });
        }
        if psi.norm_lost > self.max_absorbed {
            return Err(Error::NormLoss {
                lost: psi.norm_lost,
                limit: self.max_absorbed,
                t: psi.t,
            });
        }
        Ok(())
    }

    pub fn moments(&mut self, psi: &Wavefunction) -> Moments {
        self.work.copy_from_slice(&psi.amplitudes);
        self.forward.process_with_scratch(&mut self.work, &mut self.scratch);
        let scale = self.geometry.dz / (crate::DRIVE_PERIOD * self.kbar).sqrt();
        self.work.iter_mut().for_each(|a| *a *= scale);
        moments_from(&psi.amplitudes, &self.work, &self.geometry, self.kbar)
    }
}

/// Propagate to `t_final`, recording moments at `psi.t` (when stroboscopic)
/// and every `record_every` drive periods. `observe` sees each recorded state.
#[allow(clippy::too_many_arguments)]
pub fn propagate_with(
    mut psi: Wavefunction,
    t_final: f64,
    grid: &GridConfig,
    spec: &PotentialSpec,
    kbar: f64,
    record_every: usize,
    timing: PotentialTiming,
    mut observe: impl FnMut(&Wavefunction, &Moments),
) -> Result<(Wavefunction, TimeSeriesRecord)> {
    if record_every == 0 {
        return Err(Error::domain("record_every", "must be >= 1"));
    }
    if !(t_final > psi.t) {
        return Err(Error::domain(
            "t_final",
            format!("{t_final} must exceed wavefunction time {}", psi.t),
        ));
    }
    let mut op = SplitOperator::with_timing(grid, spec, kbar, timing)?;
    let start = op.check_compatible(&psi)?;
    let per_period = grid.steps_per_period as u64;
    let end = (t_final / op.dt()).round() as u64;
    let mut record = TimeSeriesRecord::with_capacity(((end - start) / per_period) as usize / record_every + 2);

    let mut now = start;
    let mut next_period = start.div_ceil(per_period);
    let mut record_and_check = |op: &mut SplitOperator, psi: &Wavefunction, rec: &mut TimeSeriesRecord| -> Result<()> {
        let mut m = op.moments(psi);
        if !(m.norm.is_finite() && m.var_p.is_finite()) {
            return Err(Error::WavefunctionBlowup { t: psi.t });
        }
        let total = m.norm + psi.norm_lost;
        if (total - 1.0).abs() > 1e-8 {
            log::warn!("probability budget off by {:.2e} at t={:.3}", total - 1.0, psi.t);
        }
        m.norm = m.norm.min(1.0 + 1e-12);
        observe(psi, &m);
        rec.push(psi.t, m);
        Ok(())
    };
    if start % per_period == 0 {
        record_and_check(&mut op, &psi, &mut record)?;
        next_period += 1;
    }
    while now < end {
        let target = (next_period * per_period).min(end);
        op.advance(&mut psi, target - now)?;
        now = target;
        if now == next_period * per_period {
            let periods_done = next_period - start.div_ceil(per_period);
            if periods_done % record_every as u64 == 0 {
                record_and_check(&mut op, &psi, &mut record)?;
            }
            next_period += 1;
        }
    }
    Ok((psi, record))
}

pub fn propagate(
    psi: Wavefunction,
    t_final: f64,
    grid: &GridConfig,
    spec: &PotentialSpec,
    kbar: f64,
    record_every: usize,
) -> Result<(Wavefunction, TimeSeriesRecord)> {
    propagate_with(
        psi,
        t_final,
        grid,
        spec,
        kbar,
        record_every,
        PotentialTiming::Midpoint,
        |_, _| {},
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::init_gaussian;
    use crate::DRIVE_PERIOD;

    fn small_grid() -> GridConfig {
        GridConfig {
            z_min: -20.0,
            z_max: 300.0,
            n_points: 1 << 12,
            absorber_width: 25.0,
            ..GridConfig::default()
        }
    }

    #[test]
    fn unitary_without_absorber() {
        let grid = GridConfig {
            absorber_width: 0.0,
            ..small_grid()
        };
        let spec = PotentialSpec::new(60.0, 0.5, 0.8);
        let mut psi = init_gaussian(20.0, 0.0, 2.0, &grid, 4.0).unwrap();
        let mut op = SplitOperator::new(&grid, &spec, 4.0).unwrap();
        let n0 = psi.norm();
        op.advance(&mut psi, 1000).unwrap();
        assert!((psi.norm() - n0).abs() < 1e-12, "drift {}", psi.norm() - n0);
        assert_eq!(psi.norm_lost, 0.0);
    }

    #[test]
    fn chunked_equals_single_run() {
        let grid = small_grid();
        let spec = PotentialSpec::new(60.0, 0.5, 0.8);
        let psi0 = init_gaussian(20.0, 0.0, 2.0, &grid, 4.0).unwrap();
        let mut op = SplitOperator::new(&grid, &spec, 4.0).unwrap();
        let mut a = psi0.clone();
        op.advance(&mut a, 3000).unwrap();
        let mut b = psi0;
        op.advance(&mut b, 1234).unwrap();
        op.advance(&mut b, 1766).unwrap();
        let diff: f64 = a
            .amplitudes
            .iter()
            .zip(&b.amplitudes)
            .map(|(x, y)| (x - y).norm_sqr())
            .sum::<f64>()
            * grid.dz();
        assert!(diff.sqrt() < 1e-10, "diff {}", diff.sqrt());
        assert!((a.t - b.t).abs() < 1e-12);
    }

    #[test]
    fn mirror_region_is_small() {
        let spec = PotentialSpec::new(60.0, 0.5, 0.8);
        let op = SplitOperator::new(&GridConfig::default(), &spec, 4.0).unwrap();
        let z_end = -20.0 + op.mirror_points() as f64 * GridConfig::default().dz();
        assert!(z_end > 70.0 && z_end < 100.0, "mirror phase evaluated up to z={z_end}");
    }

    #[test]
    fn leakage_into_absorber_is_an_error() {
        // A fast upward packet reaches the absorber of a short grid.
        let grid = GridConfig {
            z_min: -20.0,
            z_max: 180.0,
            n_points: 1 << 12,
            absorber_width: 15.0,
            ..GridConfig::default()
        };
        let spec = PotentialSpec::new(60.0, 0.5, 0.0);
        let psi = init_gaussian(20.0, 18.0, 2.0, &grid, 4.0).unwrap();
        let err = propagate(psi, 30.0 * DRIVE_PERIOD, &grid, &spec, 4.0, 1).unwrap_err();
        assert!(matches!(err, Error::NormLoss { .. }), "{err}");
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn record_is_stroboscopic() {
        let grid = small_grid();
        let spec = PotentialSpec::new(60.0, 0.5, 0.5);
        let psi = init_gaussian(20.0, 0.0, 2.0, &grid, 4.0).unwrap();
        let (fin, rec) = propagate(psi, 10.5 * DRIVE_PERIOD, &grid, &spec, 4.0, 2).unwrap();
        rec.validate().unwrap();
        assert_eq!(rec.len(), 6);
        for (i, t) in rec.times.iter().enumerate() {
            assert!((t - 2.0 * i as f64 * DRIVE_PERIOD).abs() < 1e-9);
        }
        assert!((fin.t - 10.5 * DRIVE_PERIOD).abs() < 1e-9);
        assert!((fin.norm() + fin.norm_lost - 1.0).abs() < 1e-8);
    }
}
