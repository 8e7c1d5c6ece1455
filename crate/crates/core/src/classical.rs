//! Classical trajectories of the driven bouncer.
//!
//! The equations of motion `ż = p`, `ṗ = -1 + κ M(z, t)` are integrated with a
//! kick–drift–kick splitting of the extended phase space: a half kick with the
//! force at `t`, a drift that advances both `z` and `t`, and a half kick at
//! `t + dt`. The scheme is symplectic, second order and time-reversible. The
//! step is `dt = 2π/n` so that whole drive periods are integer step counts.
//!
//! Gaussian ensembles are drawn from a ChaCha8 stream (`rand_chacha`, seeded
//! with `seed_from_u64`) through the Box–Muller transform: each pair of 53-bit
//! uniforms yields one `(z, p)` sample. This mapping is part of the public
//! contract and does not change between versions.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{Moments, TimeSeriesRecord};
use crate::potential::{DriveFactor, PotentialSpec};
use crate::{Error, Result, DRIVE_PERIOD};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseState {
    pub z: f64,
    pub p: f64,
}

impl PhaseState {
    pub const fn new(z: f64, p: f64) -> Self {
        PhaseState { z, p }
    }

    pub fn is_finite(&self) -> bool {
        self.z.is_finite() && self.p.is_finite()
    }

    pub fn distance(&self, other: &PhaseState) -> f64 {
        (self.z - other.z).hypot(self.p - other.p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    pub states: Vec<PhaseState>,
    pub seed: u64,
    pub t: f64,
}

impl Ensemble {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn moments(&self) -> Moments {
        Moments::from_samples(self.states.iter().map(|s| (s.z, s.p)))
    }

    pub fn positions(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.z).collect()
    }

    pub fn momenta(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.p).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Scheme {
    /// Kick–drift–kick (Strang) splitting.
    #[default]
    SplitSymplectic2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "IntegratorConfigRepr", into = "IntegratorConfigRepr")]
pub struct IntegratorConfig {
    /// Steps per drive period; `dt = 2π / steps_per_period`.
    pub steps_per_period: usize,
    pub scheme: Scheme,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            steps_per_period: 2000,
            scheme: Scheme::SplitSymplectic2,
        }
    }
}

impl IntegratorConfig {
    pub fn with_steps(steps_per_period: usize) -> Result<Self> {
        if steps_per_period == 0 {
            return Err(Error::domain("steps_per_period", "must be >= 1"));
        }
        Ok(IntegratorConfig {
            steps_per_period,
            scheme: Scheme::SplitSymplectic2,
        })
    }

    /// Accepts `dt` only if it divides the drive period to machine precision.
    pub fn from_dt(dt: f64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::domain("dt", format!("must be finite and > 0, got {dt}")));
        }
        let n = (DRIVE_PERIOD / dt).round();
        if n < 1.0 || ((DRIVE_PERIOD / n) - dt).abs() > 1e-12 * dt {
            return Err(Error::domain("dt", format!("{dt} is not 2π/n for an integer n")));
        }
        Self::with_steps(n as usize)
    }

    pub fn dt(&self) -> f64 {
        DRIVE_PERIOD / self.steps_per_period as f64
    }

    /// Resolve a step given as `dt`, as a step count, or both (which must agree).
    pub fn try_from_parts(dt: Option<f64>, steps_per_period: Option<usize>) -> Result<Self> {
        match (steps_per_period, dt) {
            (Some(n), dt) => {
                let cfg = IntegratorConfig::with_steps(n)?;
                if let Some(dt) = dt {
                    if (cfg.dt() - dt).abs() > 1e-12 * dt {
                        return Err(Error::Config(format!("dt={dt} disagrees with steps_per_period={n}")));
                    }
                }
                Ok(cfg)
            }
            (None, Some(dt)) => IntegratorConfig::from_dt(dt),
            (None, None) => Ok(IntegratorConfig::default()),
        }
    }

    /// Whole steps closest to `t`.
    pub fn steps_for(&self, t: f64) -> u64 {
        (t / self.dt()).round().max(0.0) as u64
    }
}

#[derive(Serialize, Deserialize)]
struct IntegratorConfigRepr {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    steps_per_period: Option<usize>,
    #[serde(default)]
    scheme: Scheme,
}

impl TryFrom<IntegratorConfigRepr> for IntegratorConfig {
    type Error = Error;

    fn try_from(r: IntegratorConfigRepr) -> Result<Self> {
        Ok(IntegratorConfig {
            scheme: r.scheme,
            ..IntegratorConfig::try_from_parts(r.dt, r.steps_per_period)?
        })
    }
}

impl From<IntegratorConfig> for IntegratorConfigRepr {
    fn from(c: IntegratorConfig) -> Self {
        IntegratorConfigRepr {
            dt: Some(c.dt()),
            steps_per_period: Some(c.steps_per_period),
            scheme: c.scheme,
        }
    }
}

fn check(state: PhaseState, t: f64, particle: Option<usize>) -> Result<PhaseState> {
    if state.is_finite() {
        Ok(state)
    } else {
        Err(Error::Blowup {
            z: state.z,
            p: state.p,
            t,
            particle,
        })
    }
}

/// One kick–drift–kick step from time `t`.
pub fn step(state: PhaseState, t: f64, cfg: &IntegratorConfig, spec: &PotentialSpec) -> Result<PhaseState> {
    kick_drift_kick(state, t, cfg.dt(), spec)
}

/// Single step with a signed `dt`; a negative step exactly undoes a positive one.
pub fn kick_drift_kick(state: PhaseState, t: f64, dt: f64, spec: &PotentialSpec) -> Result<PhaseState> {
    let mut p = state.p + 0.5 * dt * spec.force(state.z, t);
    let z = state.z + dt * p;
    p += 0.5 * dt * spec.force(z, t + dt);
    check(PhaseState { z, p }, t + dt, None)
}

/// Integrator over the fixed step grid `t = k·dt`. The drive factors of one
/// period are tabulated once, and adjacent half kicks are merged.
#[derive(Debug, Clone)]
pub struct Propagator {
    spec: PotentialSpec,
    dt: f64,
    drive: Vec<DriveFactor>,
}

impl Propagator {
    pub fn new(spec: &PotentialSpec, cfg: &IntegratorConfig) -> Self {
        let n = cfg.steps_per_period;
        let dt = cfg.dt();
        let drive = (0..n).map(|k| spec.drive(k as f64 * dt)).collect();
        Propagator { spec: *spec, dt, drive }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps_per_period(&self) -> usize {
        self.drive.len()
    }

    /// Advance `n_steps` starting from step index `start_step` (time `start_step·dt`).
    pub fn advance(&self, state: PhaseState, start_step: u64, n_steps: u64) -> Result<PhaseState> {
        if n_steps == 0 {
            return Ok(state);
        }
        let n = self.drive.len();
        let dt = self.dt;
        let half = 0.5 * dt;
        let mut k = (start_step % n as u64) as usize;
        let PhaseState { mut z, mut p } = state;

        p += half * self.spec.force_with(z, self.drive[k]);
        for i in 0..n_steps {
            z += dt * p;
            k += 1;
            if k == n {
                k = 0;
                if !(z.is_finite() && p.is_finite()) {
                    break;
                }
            }
            let kick = if i + 1 == n_steps { half } else { dt };
            p += kick * self.spec.force_with(z, self.drive[k]);
        }
        check(PhaseState { z, p }, (start_step + n_steps) as f64 * dt, None)
    }
}

/// Draw `n` independent points with `z ~ N(center.z, dz²)` and `p ~ N(center.p, dp²)`.
pub fn sample_gaussian(center: PhaseState, dz: f64, dp: f64, n: usize, seed: u64) -> Result<Ensemble> {
    if n == 0 {
        return Err(Error::domain("n", "ensemble must contain at least one particle"));
    }
    if !(dz.is_finite() && dz > 0.0) {
        return Err(Error::domain("dz", format!("must be finite and > 0, got {dz}")));
    }
    if !(dp.is_finite() && dp > 0.0) {
        return Err(Error::domain("dp", format!("must be finite and > 0, got {dp}")));
    }
    if !center.is_finite() {
        return Err(Error::domain("center", "must be finite"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let states = (0..n)
        .map(|_| {
            let (a, b) = box_muller(&mut rng);
            PhaseState::new(center.z + dz * a, center.p + dp * b)
        })
        .collect();
    Ok(Ensemble { states, seed, t: 0.0 })
}

/// Uniform in `[0, 1)` with 53 random bits.
pub(crate) fn unit_uniform(rng: &mut impl RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn box_muller(rng: &mut impl RngCore) -> (f64, f64) {
    let u1 = 1.0 - unit_uniform(rng);
    let u2 = unit_uniform(rng);
    let r = (-2.0 * u1.ln()).sqrt();
    let (s, c) = (2.0 * std::f64::consts::PI * u2).sin_cos();
    (r * c, r * s)
}

/// Propagate an ensemble to `t_final`, recording moments at `e.t` and every
/// `record_every` drive periods after it. `observe` sees the ensemble at each
/// recorded time.
pub fn propagate_ensemble_with(
    e: &Ensemble,
    t_final: f64,
    cfg: &IntegratorConfig,
    spec: &PotentialSpec,
    record_every: usize,
    mut observe: impl FnMut(f64, &[PhaseState]),
) -> Result<(TimeSeriesRecord, Ensemble)> {
    if record_every == 0 {
        return Err(Error::domain("record_every", "must be >= 1"));
    }
    if !(t_final > e.t) {
        return Err(Error::domain(
            "t_final",
            format!("{t_final} must exceed ensemble time {}", e.t),
        ));
    }
    if e.is_empty() {
        return Err(Error::domain("ensemble", "empty"));
    }
    let prop = Propagator::new(spec, cfg);
    let dt = prop.dt();
    let per_period = cfg.steps_per_period as u64;
    let start = cfg.steps_for(e.t);
    if ((start as f64) * dt - e.t).abs() > 1e-9 * e.t.abs().max(1.0) {
        return Err(Error::Config(format!("ensemble time {} is not on the step grid", e.t)));
    }
    let end = cfg.steps_for(t_final);
    let chunk = per_period * record_every as u64;

    let mut states = e.states.clone();
    let mut record = TimeSeriesRecord::with_capacity(((end - start) / chunk + 2) as usize);
    let time_of = |step: u64| step as f64 * dt;

    // First recording point: the next stroboscopic time, or the start if it is one.
    let mut next = start.div_ceil(per_period) * per_period;
    let mut now = start;
    if next == start {
        record.push(time_of(now), Moments::from_samples(states.iter().map(|s| (s.z, s.p))));
        observe(time_of(now), &states);
        next += chunk;
    }
    while now < end {
        let target = next.min(end);
        let n_steps = target - now;
        states.par_iter_mut().enumerate().try_for_each(|(i, s)| -> Result<()> {
            *s = prop.advance(*s, now, n_steps).map_err(|err| match err {
                Error::Blowup { z, p, t, .. } => Error::Blowup {
                    z,
                    p,
                    t,
                    particle: Some(i),
                },
                other => other,
            })?;
            Ok(())
        })?;
        now = target;
        if now == next {
            record.push(time_of(now), Moments::from_samples(states.iter().map(|s| (s.z, s.p))));
            observe(time_of(now), &states);
            next += chunk;
        }
    }
    let out = Ensemble {
        states,
        seed: e.seed,
        t: time_of(end),
    };
    Ok((record, out))
}

pub fn propagate_ensemble(
    e: &Ensemble,
    t_final: f64,
    cfg: &IntegratorConfig,
    spec: &PotentialSpec,
    record_every: usize,
) -> Result<(TimeSeriesRecord, Ensemble)> {
    propagate_ensemble_with(e, t_final, cfg, spec, record_every, |_, _| {})
}

/// Stroboscopic samples at `t = 2πk`, `k = 0..=n_periods`, starting at `t = 0`.
pub fn poincare_section(
    state: PhaseState,
    n_periods: usize,
    cfg: &IntegratorConfig,
    spec: &PotentialSpec,
) -> Result<Vec<PhaseState>> {
    if n_periods == 0 {
        return Err(Error::domain("n_periods", "must be >= 1"));
    }
    check(state, 0.0, None)?;
    let prop = Propagator::new(spec, cfg);
    let per = cfg.steps_per_period as u64;
    let mut out = Vec::with_capacity(n_periods + 1);
    out.push(state);
    let mut s = state;
    for k in 0..n_periods as u64 {
        s = prop.advance(s, k * per, per)?;
        out.push(s);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(lambda: f64) -> PotentialSpec {
        PotentialSpec::new(60.0, 0.5, lambda)
    }

    #[test]
    fn equilibrium_is_fixed_point() {
        let spec = spec(0.0);
        let cfg = IntegratorConfig::default();
        let s0 = PhaseState::new(2.0 * 30f64.ln(), 0.0);
        let mut s = s0;
        for k in 0..1000 {
            let next = step(s, k as f64 * cfg.dt(), &cfg, &spec).unwrap();
            assert!((next.z - s.z).abs() < 1e-12 && (next.p - s.p).abs() < 1e-12);
            s = next;
        }
        let section = poincare_section(s0, 5, &cfg, &spec).unwrap();
        for pt in section {
            assert!((pt.z - s0.z).abs() < 1e-10 && pt.p.abs() < 1e-10);
        }
    }

    #[test]
    fn step_is_time_reversible() {
        let spec = spec(0.5);
        let cfg = IntegratorConfig::default();
        let dt = cfg.dt();
        let start = PhaseState::new(20.0, -2.0);
        let n = 20_000;
        let mut s = start;
        for k in 0..n {
            s = step(s, k as f64 * dt, &cfg, &spec).unwrap();
        }
        for k in (1..=n).rev() {
            s = kick_drift_kick(s, k as f64 * dt, -dt, &spec).unwrap();
        }
        assert!((s.z - start.z).abs() < 1e-9, "dz = {}", s.z - start.z);
        assert!((s.p - start.p).abs() < 1e-9, "dp = {}", s.p - start.p);
    }

    #[test]
    fn fused_propagator_matches_single_steps() {
        let spec = spec(0.8);
        let cfg = IntegratorConfig::default();
        let prop = Propagator::new(&spec, &cfg);
        let start = PhaseState::new(20.0, 0.5);
        let mut s = start;
        for k in 0..3000u64 {
            s = step(s, k as f64 * cfg.dt(), &cfg, &spec).unwrap();
        }
        let fused = prop.advance(start, 0, 3000).unwrap();
        assert!((fused.z - s.z).abs() < 1e-9 && (fused.p - s.p).abs() < 1e-9);
    }

    #[test]
    fn dt_must_divide_period() {
        assert!(IntegratorConfig::from_dt(DRIVE_PERIOD / 2000.0).is_ok());
        assert!(IntegratorConfig::from_dt(0.003).is_err());
        assert!(IntegratorConfig::from_dt(-1.0).is_err());
        let cfg: IntegratorConfig = serde_json::from_str(r#"{"dt": 0.0031415926535897933}"#).unwrap();
        assert_eq!(cfg.steps_per_period, 2000);
    }

    #[test]
    fn gaussian_sampler_is_deterministic() {
        let c = PhaseState::new(20.0, 0.0);
        let a = sample_gaussian(c, 2.0, 1.0, 100, 7).unwrap();
        let b = sample_gaussian(c, 2.0, 1.0, 100, 7).unwrap();
        assert_eq!(a, b);
        let d = sample_gaussian(c, 2.0, 1.0, 100, 8).unwrap();
        assert_ne!(a.states, d.states);
        assert!(matches!(sample_gaussian(c, 2.0, 1.0, 0, 7), Err(Error::Domain { .. })));
    }

    #[test]
    fn blowup_is_reported() {
        let cfg = IntegratorConfig::default();
        let s = PhaseState::new(f64::NAN, 0.0);
        assert!(matches!(step(s, 0.0, &cfg, &spec(0.5)), Err(Error::Blowup { .. })));
    }

    #[test]
    fn record_starts_at_initial_time() {
        let e = sample_gaussian(PhaseState::new(20.0, 0.0), 2.0, 1.0, 50, 1).unwrap();
        let (rec, fin) =
            propagate_ensemble(&e, 10.0 * DRIVE_PERIOD, &IntegratorConfig::default(), &spec(0.5), 2).unwrap();
        rec.validate().unwrap();
        assert_eq!(rec.len(), 6);
        assert_eq!(rec.times[0], 0.0);
        assert!((fin.t - 10.0 * DRIVE_PERIOD).abs() < 1e-9);
    }
}
