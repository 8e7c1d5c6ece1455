//! Chirikov–Taylor map approximation of the bouncer with an infinitely steep mirror:
//!
//! ```text
//! p' = p + K cos θ
//! θ' = θ + p'   (mod 2π)
//! ```
//!
//! with chaos parameter `K = 4λ`. Only the phase is wrapped; momentum diffuses.

use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classical::unit_uniform;
use crate::{Error, Result, DRIVE_PERIOD};

/// Map steps dropped before fitting the mean-square displacement.
pub const TRANSIENT_STEPS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapState {
    pub p: f64,
    /// Wall phase in `[0, 2π)`.
    pub theta: f64,
}

impl MapState {
    pub fn new(p: f64, theta: f64) -> Self {
        MapState {
            p,
            theta: wrap_phase(theta),
        }
    }
}

/// Reduce an angle to `[0, 2π)`.
pub fn wrap_phase(theta: f64) -> f64 {
    let w = theta.rem_euclid(DRIVE_PERIOD);
    // rem_euclid can round up to exactly 2π for tiny negative inputs.
    if w >= DRIVE_PERIOD {
        0.0
    } else {
        w
    }
}

pub fn map_step(s: MapState, k: f64) -> MapState {
    let p = s.p + k * s.theta.cos();
    MapState {
        p,
        theta: wrap_phase(s.theta + p),
    }
}

/// `K = 4λ`.
pub fn chaos_parameter(lambda_mod: f64) -> f64 {
    4.0 * lambda_mod
}

/// Quasi-linear diffusion constant `K²/2`.
pub fn quasilinear_diffusion(k: f64) -> f64 {
    0.5 * k * k
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffusionEstimate {
    /// Slope of the mean-square momentum displacement per map step.
    pub d_measured: f64,
    /// `K²/2`.
    pub d_ql: f64,
    /// `⟨(p_n - p_0)²⟩` for `n = 0..=n_steps`.
    pub msd: Vec<f64>,
}

/// Mean-square momentum displacement over orbits started uniformly in
/// `p_0, θ_0 ∈ [0, 2π)`, and its least-squares growth rate after the transient.
pub fn diffusion_coefficient(k: f64, n_orbits: usize, n_steps: usize, seed: u64) -> Result<DiffusionEstimate> {
    if !k.is_finite() {
        return Err(Error::domain("K", "must be finite"));
    }
    if n_orbits < 10 || n_steps < 10 {
        return Err(Error::Config(format!(
            "diffusion estimate needs >= 10 orbits and steps, got {n_orbits} x {n_steps}"
        )));
    }
    if n_steps < TRANSIENT_STEPS + 2 {
        return Err(Error::Config(format!(
            "fewer than 3 samples remain after the {TRANSIENT_STEPS}-step transient"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let starts: Vec<MapState> = (0..n_orbits)
        .map(|_| {
            let p = DRIVE_PERIOD * unit_uniform(&mut rng);
            let theta = DRIVE_PERIOD * unit_uniform(&mut rng);
            MapState::new(p, theta)
        })
        .collect();

    // Per-orbit squared displacements, reduced below in orbit order.
    let per_orbit: Vec<Vec<f64>> = starts
        .par_iter()
        .map(|&s0| {
            let mut s = s0;
            let mut out = Vec::with_capacity(n_steps + 1);
            out.push(0.0);
            for _ in 0..n_steps {
                s = map_step(s, k);
                let d = s.p - s0.p;
                out.push(d * d);
            }
            out
        })
        .collect();
    let mut msd = vec![0.0; n_steps + 1];
    for orbit in &per_orbit {
        for (acc, v) in msd.iter_mut().zip(orbit) {
            *acc += v;
        }
    }
    let inv = 1.0 / n_orbits as f64;
    msd.iter_mut().for_each(|v| *v *= inv);

    let xs: Vec<f64> = (TRANSIENT_STEPS..=n_steps).map(|n| n as f64).collect();
    let fit = crate::diagnostics::linear_fit(&xs, &msd[TRANSIENT_STEPS..])
        .ok_or_else(|| Error::Config("degenerate diffusion fit".into()))?;
    Ok(DiffusionEstimate {
        d_measured: fit.slope,
        d_ql: quasilinear_diffusion(k),
        msd,
    })
}

/// Momentum variance of an ensemble after each of `n_steps` map steps.
pub fn momentum_variance_series(k: f64, starts: &[MapState], n_steps: usize, stride: usize) -> Vec<(usize, f64)> {
    let mut states = starts.to_vec();
    let stride = stride.max(1);
    let mut out = Vec::with_capacity(n_steps / stride + 1);
    for n in 1..=n_steps {
        states.iter_mut().for_each(|s| *s = map_step(*s, k));
        if n % stride == 0 {
            let mean = states.iter().map(|s| s.p).sum::<f64>() / states.len() as f64;
            let var = states.iter().map(|s| (s.p - mean).powi(2)).sum::<f64>() / states.len() as f64;
            out.push((n, var));
        }
    }
    out
}

/// Finite-difference Jacobian determinant of the map at `s` (the phase wrap
/// is excluded by differencing the unwrapped angle).
pub fn jacobian_determinant(s: MapState, k: f64, h: f64) -> f64 {
    let unwrapped = |p: f64, theta: f64| {
        let p1 = p + k * theta.cos();
        (p1, theta + p1)
    };
    let (pp, tp) = unwrapped(s.p + h, s.theta);
    let (pm, tm) = unwrapped(s.p - h, s.theta);
    let (qp, up) = unwrapped(s.p, s.theta + h);
    let (qm, um) = unwrapped(s.p, s.theta - h);
    let dp_dp = (pp - pm) / (2.0 * h);
    let dt_dp = (tp - tm) / (2.0 * h);
    let dp_dt = (qp - qm) / (2.0 * h);
    let dt_dt = (up - um) / (2.0 * h);
    dp_dp * dt_dt - dp_dt * dt_dp
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn free_rotation_without_kick() {
        let s = map_step(MapState::new(1.3, 6.0), 0.0);
        assert_eq!(s.p, 1.3);
        assert!((s.theta - wrap_phase(7.3)).abs() < 1e-15);
    }

    #[test]
    fn kick_vanishes_at_quarter_phase() {
        let s = map_step(MapState::new(0.5, PI / 2.0), 3.0);
        assert!((s.p - 0.5).abs() < 1e-15);
        assert!((s.theta - (PI / 2.0 + 0.5)).abs() < 1e-15);
    }

    #[test]
    fn unit_kick_from_origin() {
        let s = map_step(MapState::new(0.0, 0.0), 1.0);
        assert_eq!((s.p, s.theta), (1.0, 1.0));
    }

    #[test]
    fn chaos_parameter_values() {
        assert!((chaos_parameter(0.24) - 0.96).abs() < 1e-15);
        assert_eq!(chaos_parameter(0.0), 0.0);
        assert_eq!(chaos_parameter(2.5), 10.0);
        assert_eq!(quasilinear_diffusion(chaos_parameter(0.5)), 2.0);
    }

    #[test]
    fn no_diffusion_without_kick() {
        let d = diffusion_coefficient(0.0, 100, 100, 1).unwrap();
        assert!(d.d_measured.abs() < 1e-6);
    }

    #[test]
    fn rejects_tiny_runs() {
        assert!(matches!(diffusion_coefficient(5.0, 5, 100, 1), Err(Error::Config(_))));
        assert!(matches!(diffusion_coefficient(5.0, 100, 11, 1), Err(Error::Config(_))));
    }

    #[test]
    fn strong_chaos_matches_correlated_prediction() {
        // Independent numpy Monte-Carlo (10⁴ orbits × 10³ steps) gives 32.4 at K = 10,
        // and the Rechester-White correction K²/2·(1 - 2J₂(K) + 2J₂(K)²) gives 31.
        let d = diffusion_coefficient(10.0, 10_000, 1000, 3).unwrap();
        assert!((d.d_measured - 32.4).abs() < 0.06 * 32.4, "D = {}", d.d_measured);
        // K = 5 sits near a zero of J₂, where the quasi-linear value holds.
        let d = diffusion_coefficient(5.0, 10_000, 1000, 3).unwrap();
        assert!((d.d_measured / d.d_ql - 1.0).abs() < 0.06, "D = {}", d.d_measured);
    }

    proptest! {
        #[test]
        fn phase_stays_wrapped(p in -50.0..50.0f64, theta in -20.0..20.0f64, k in 0.0..12.0f64) {
            let s = map_step(MapState::new(p, theta), k);
            prop_assert!(s.theta >= 0.0 && s.theta < DRIVE_PERIOD);
        }

        #[test]
        fn area_preserving(p in -10.0..10.0f64, theta in 0.0..std::f64::consts::TAU, k in 0.0..12.0f64) {
            let det = jacobian_determinant(MapState::new(p, theta), k, 1e-5);
            prop_assert!((det - 1.0).abs() < 1e-8, "det = {}", det);
        }
    }
}
