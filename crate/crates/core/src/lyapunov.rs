//! Maximal Lyapunov exponent by the two-trajectory (Benettin) method: a
//! companion orbit is kept at phase-space distance `d0` from the reference
//! orbit by rescaling the separation after every renormalization interval, and
//! the logarithmic stretching factors are averaged over time.

use serde::{Deserialize, Serialize};

use crate::classical::{IntegratorConfig, PhaseState, Propagator};
use crate::potential::PotentialSpec;
use crate::{Error, Result, DRIVE_PERIOD};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LyapunovConfig {
    /// Separation restored after each renormalization.
    pub d0: f64,
    /// Time between renormalizations; must be a whole number of steps.
    pub renorm_interval: f64,
    /// Integration length in drive periods.
    pub n_periods: usize,
    /// Exponents below this value classify the orbit as regular.
    pub zero_threshold: f64,
}

impl Default for LyapunovConfig {
    fn default() -> Self {
        LyapunovConfig {
            d0: 1e-8,
            renorm_interval: DRIVE_PERIOD,
            n_periods: 10_000,
            zero_threshold: 0.005,
        }
    }
}

impl LyapunovConfig {
    fn renorm_steps(&self, icfg: &IntegratorConfig) -> Result<u64> {
        if !(self.d0 > 0.0 && self.d0 < 1e-3) {
            return Err(Error::domain("d0", format!("must be in (0, 1e-3), got {}", self.d0)));
        }
        if self.n_periods == 0 {
            return Err(Error::domain("n_periods", "must be >= 1"));
        }
        let dt = icfg.dt();
        let steps = (self.renorm_interval / dt).round();
        if steps < 1.0 || (steps * dt - self.renorm_interval).abs() > 1e-9 * self.renorm_interval {
            return Err(Error::domain(
                "renorm_interval",
                format!("{} is not a multiple of dt = {dt}", self.renorm_interval),
            ));
        }
        Ok(steps as u64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovResult {
    pub exponent: f64,
    /// Running estimate `(t, L_t)` after each renormalization.
    pub convergence: Vec<(f64, f64)>,
    pub regular: bool,
}

pub fn lyapunov_exponent(
    start: PhaseState,
    cfg: &LyapunovConfig,
    icfg: &IntegratorConfig,
    spec: &PotentialSpec,
) -> Result<LyapunovResult> {
    if !start.is_finite() {
        return Err(Error::domain("start", "initial condition must be finite"));
    }
    let interval = cfg.renorm_steps(icfg)?;
    let total = cfg.n_periods as u64 * icfg.steps_per_period as u64;
    let prop = Propagator::new(spec, icfg);
    let dt = icfg.dt();

    let offset = cfg.d0 / std::f64::consts::SQRT_2;
    let mut reference = start;
    let mut companion = PhaseState::new(start.z + offset, start.p + offset);
    let mut log_sum = 0.0;
    let mut now = 0u64;
    let mut convergence = Vec::with_capacity((total / interval + 1) as usize);

    while now < total {
        let n = interval.min(total - now);
        reference = prop.advance(reference, now, n)?;
        companion = prop.advance(companion, now, n)?;
        now += n;
        let d = reference.distance(&companion);
        if d > 0.0 {
            log_sum += (d / cfg.d0).ln();
            let s = cfg.d0 / d;
            companion = PhaseState::new(
                reference.z + (companion.z - reference.z) * s,
                reference.p + (companion.p - reference.p) * s,
            );
        } else {
            // The orbits merged in floating point; restart the separation.
            companion = PhaseState::new(reference.z + offset, reference.p + offset);
        }
        let t = now as f64 * dt;
        convergence.push((t, log_sum / t));
    }
    let exponent = log_sum / (total as f64 * dt);
    Ok(LyapunovResult {
        exponent,
        convergence,
        regular: exponent < cfg.zero_threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrable_limit_has_zero_exponent() {
        let spec = PotentialSpec::new(60.0, 0.5, 0.0);
        let cfg = LyapunovConfig {
            n_periods: 2000,
            ..Default::default()
        };
        for start in [PhaseState::new(20.0, 0.0), PhaseState::new(40.0, -2.0)] {
            let r = lyapunov_exponent(start, &cfg, &IntegratorConfig::default(), &spec).unwrap();
            assert!(r.exponent < 0.005, "L = {}", r.exponent);
            assert!(r.regular);
            assert_eq!(r.convergence.len(), 2000);
        }
    }

    #[test]
    fn rejects_misaligned_interval() {
        let cfg = LyapunovConfig {
            renorm_interval: 1.0,
            ..Default::default()
        };
        let spec = PotentialSpec::new(60.0, 0.5, 0.5);
        let err = lyapunov_exponent(PhaseState::new(20.0, 0.0), &cfg, &IntegratorConfig::default(), &spec);
        assert!(matches!(
            err,
            Err(Error::Domain {
                field: "renorm_interval",
                ..
            })
        ));
    }
}
