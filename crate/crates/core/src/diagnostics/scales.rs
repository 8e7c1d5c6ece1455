use serde::{Deserialize, Serialize};

use super::{linear_fit, TimeSeriesRecord};
use crate::scaling::{window_bounds, DimensionlessParams};
use crate::{Error, Result, DRIVE_PERIOD};

/// Slope `D` of `Δp²(t)` after dropping the first `transient_periods` drive
/// periods, with the coefficient of determination of the linear fit.
pub fn diffusion_fit(rec: &TimeSeriesRecord, transient_periods: usize) -> Result<(f64, f64)> {
    let Some(&t0) = rec.times.first() else {
        return Err(Error::Config("empty record".into()));
    };
    let start = rec
        .times
        .partition_point(|&t| t < t0 + transient_periods as f64 * DRIVE_PERIOD - 1e-9);
    let xs = &rec.times[start..];
    let ys = &rec.var_p[start..];
    if xs.len() < 10 {
        return Err(Error::Config(format!(
            "diffusion fit needs >= 10 samples after the transient, found {}",
            xs.len()
        )));
    }
    let fit = linear_fit(xs, ys).ok_or_else(|| Error::Config("degenerate diffusion fit".into()))?;
    Ok((fit.slope, fit.r_squared))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EtaSample {
    pub t: f64,
    /// `Δz`, the position standard deviation.
    pub eta_from_z: f64,
    /// `Δp²`, the momentum variance.
    pub eta_from_p2: f64,
}

/// The two estimates of the effective temperature: for a Boltzmann state in a
/// linear potential `Δz = η = Δp²`.
pub fn boltzmann_eta(rec: &TimeSeriesRecord) -> Vec<EtaSample> {
    rec.times
        .iter()
        .zip(rec.var_z.iter().zip(&rec.var_p))
        .map(|(&t, (&vz, &vp))| EtaSample {
            t,
            eta_from_z: vz.max(0.0).sqrt(),
            eta_from_p2: vp,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoreticalScales {
    /// Quantum break time `D / k̄²`.
    pub t_break: f64,
    /// Localization length `8λ² / k̄²` from the quasi-linear diffusion constant.
    pub loc_length: f64,
    /// Localization length `D / k̄²` from the measured diffusion constant.
    pub loc_length_measured: f64,
    /// These are scaling estimates with unknown order-one prefactors.
    pub order_of_magnitude: bool,
}

pub fn theoretical_scales(d: &DimensionlessParams, d_measured: f64) -> Result<TheoreticalScales> {
    if !(d_measured >= 0.0) {
        return Err(Error::domain("D_measured", format!("must be >= 0, got {d_measured}")));
    }
    let k2 = d.kbar * d.kbar;
    Ok(TheoreticalScales {
        t_break: d_measured / k2,
        loc_length: 8.0 * d.lambda_mod * d.lambda_mod / k2,
        loc_length_measured: d_measured / k2,
        order_of_magnitude: true,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WindowClass {
    BelowWindow,
    InWindow,
    AboveWindow,
}

impl WindowClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            WindowClass::BelowWindow => "below",
            WindowClass::InWindow => "in",
            WindowClass::AboveWindow => "above",
        }
    }
}

/// `λ ≤ λ_l` is below the window, `λ_l < λ ≤ λ_u` inside it, `λ > λ_u` above.
pub fn classify_window(lambda_mod: f64, d: &DimensionlessParams) -> WindowClass {
    let (lower, upper) = window_bounds(d);
    if lambda_mod <= lower {
        WindowClass::BelowWindow
    } else if lambda_mod <= upper {
        WindowClass::InWindow
    } else {
        WindowClass::AboveWindow
    }
}

/// Growth rate of `var_p` over the final third of the record divided by its
/// growth rate over the first tenth. Small values mean the width saturated.
pub fn saturation_ratio(rec: &TimeSeriesRecord) -> Result<f64> {
    let n = rec.len();
    if n < 30 {
        return Err(Error::Config(format!("saturation check needs >= 30 samples, got {n}")));
    }
    let slope = |range: std::ops::Range<usize>| {
        linear_fit(&rec.times[range.clone()], &rec.var_p[range])
            .map(|f| f.slope)
            .ok_or_else(|| Error::Config("degenerate growth fit".into()))
    };
    let early = slope(0..n / 10)?;
    let late = slope(n - n / 3..n)?;
    if !(early > 0.0) {
        return Err(Error::Fit(format!("no initial growth of var_p (slope {early})")));
    }
    Ok(late / early)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::Moments;
    use proptest::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use rand_core::{RngCore, SeedableRng};

    fn record_from(var_p: impl Fn(f64) -> f64, n: usize) -> TimeSeriesRecord {
        let mut r = TimeSeriesRecord::default();
        for k in 0..n {
            let t = k as f64 * DRIVE_PERIOD;
            r.push(
                t,
                Moments {
                    mean_z: 0.0,
                    mean_p: 0.0,
                    var_z: 1.0,
                    var_p: var_p(t),
                    norm: 1.0,
                },
            );
        }
        r
    }

    #[test]
    fn synthetic_linear_growth() {
        let (d, r2) = diffusion_fit(&record_from(|t| 0.37 * t, 50), 5).unwrap();
        assert!((d - 0.37).abs() < 1e-12);
        assert!(r2 > 0.999_999);
        assert!(diffusion_fit(&record_from(|t| t, 12), 5).is_err());
    }

    #[test]
    fn cold_ensemble_has_zero_temperature() {
        let mut r = TimeSeriesRecord::default();
        r.push(0.0, Moments::from_samples(std::iter::repeat_n((20.0, 0.0), 10)));
        let eta = boltzmann_eta(&r);
        assert_eq!(eta[0].eta_from_z, 0.0);
        assert_eq!(eta[0].eta_from_p2, 0.0);
    }

    /// Direct sampling of `exp(-(p²/2 + z)/η)` on `z > 0` by inverse transforms.
    #[test]
    fn boltzmann_samples_satisfy_equality() {
        let eta = 5.0;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut u = || ((rng.next_u64() >> 11) as f64 + 0.5) / (1u64 << 53) as f64;
        let n = 200_000;
        let samples: Vec<(f64, f64)> = (0..n)
            .map(|_| {
                let z = -eta * u().ln();
                let r = (-2.0 * u().ln()).sqrt();
                let p = eta.sqrt() * r * (2.0 * std::f64::consts::PI * u()).cos();
                (z, p)
            })
            .collect();
        let mut rec = TimeSeriesRecord::default();
        rec.push(0.0, Moments::from_samples(samples.iter().copied()));
        let e = boltzmann_eta(&rec)[0];
        assert!((e.eta_from_z - eta).abs() < 0.05, "Δz = {}", e.eta_from_z);
        assert!((e.eta_from_p2 - eta).abs() < 0.1, "Δp² = {}", e.eta_from_p2);
    }

    #[test]
    fn scales_at_reference_point() {
        let d = DimensionlessParams::REFERENCE.with_lambda(0.8);
        let s = theoretical_scales(&d, 1.0).unwrap();
        assert!((s.loc_length - 0.32).abs() < 1e-12);
        assert!((s.t_break - 1.0 / 16.0).abs() < 1e-15);
        let zero = theoretical_scales(&d.with_lambda(0.0), 0.0).unwrap();
        assert_eq!((zero.t_break, zero.loc_length), (0.0, 0.0));
        let doubled = DimensionlessParams { kbar: 8.0, ..d };
        let s2 = theoretical_scales(&doubled, 1.0).unwrap();
        assert!((s2.t_break * 4.0 - s.t_break).abs() < 1e-15);
        assert!((s2.loc_length * 4.0 - s.loc_length).abs() < 1e-15);
        assert!(theoretical_scales(&d, -1.0).is_err());
    }

    #[test]
    fn saturation_of_growth() {
        let linear = record_from(|t| 0.5 * t, 100);
        assert!((saturation_ratio(&linear).unwrap() - 1.0).abs() < 1e-9);
        let saturating = record_from(|t| 10.0 * (1.0 - (-t / 50.0).exp()), 100);
        assert!(saturation_ratio(&saturating).unwrap() < 0.01);
        assert!(saturation_ratio(&record_from(|t| t, 20)).is_err());
    }

    #[test]
    fn window_classes() {
        let d = DimensionlessParams::REFERENCE;
        assert_eq!(classify_window(0.5, &d), WindowClass::InWindow);
        assert_eq!(classify_window(0.2, &d), WindowClass::BelowWindow);
        assert_eq!(classify_window(1.2, &d), WindowClass::AboveWindow);
        assert_eq!(classify_window(0.9716 / 4.0, &d), WindowClass::BelowWindow);
        assert_eq!(classify_window(1.0, &d), WindowClass::InWindow);
    }

    proptest! {
        #[test]
        fn classification_monotone(kbar in 0.01..100.0f64) {
            let d = DimensionlessParams { kbar, ..DimensionlessParams::REFERENCE };
            let mut rank = 0;
            let mut transitions = 0;
            for i in 0..2000 {
                let r = match classify_window(i as f64 * 0.005, &d) {
                    WindowClass::BelowWindow => 0,
                    WindowClass::InWindow => 1,
                    WindowClass::AboveWindow => 2,
                };
                prop_assert!(r >= rank);
                if r > rank { transitions += r - rank; }
                rank = r;
            }
            prop_assert!(transitions <= 2);
        }
    }
}
