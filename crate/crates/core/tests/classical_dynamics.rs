use fermi_core::classical::{poincare_section, propagate_ensemble, sample_gaussian, IntegratorConfig, PhaseState};
use fermi_core::diagnostics::diffusion_fit;
use fermi_core::experiments::{preset, run_classical};
use fermi_core::lyapunov::{lyapunov_exponent, LyapunovConfig};
use fermi_core::potential::PotentialSpec;
use fermi_core::DRIVE_PERIOD;

fn spec(lambda: f64) -> PotentialSpec {
    PotentialSpec::new(60.0, 0.5, lambda)
}

fn momentum_span(points: &[PhaseState]) -> f64 {
    let (lo, hi) = points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| {
        (lo.min(s.p), hi.max(s.p))
    });
    hi - lo
}

#[test]
fn atoms_rarely_penetrate_the_mirror() {
    let mut cfg = preset("fig2").unwrap();
    cfg.ensemble.n = 400;
    cfg.t_final = 100.0 * DRIVE_PERIOD;
    let run = run_classical(&cfg, 0.5).unwrap();
    assert!(
        run.max_fraction_below_mirror < 0.01,
        "{}",
        run.max_fraction_below_mirror
    );
}

#[test]
fn regular_orbit_stays_on_its_torus_while_chaotic_orbit_wanders() {
    let icfg = IntegratorConfig::default();
    let regular = poincare_section(PhaseState::new(20.0, 0.0), 10_000, &icfg, &spec(0.2)).unwrap();
    let chaotic = poincare_section(PhaseState::new(20.0, -2.0), 10_000, &icfg, &spec(0.5)).unwrap();
    let (r, c) = (momentum_span(&regular), momentum_span(&chaotic));
    assert!(r < 12.0, "regular span {r}");
    assert!(c > 2.0 * r, "chaotic span {c} vs regular {r}");
}

#[test]
fn static_mirror_does_not_diffuse() {
    let icfg = IntegratorConfig::default();
    let e = sample_gaussian(PhaseState::new(20.0, 0.0), 2.0, 1.0, 500, 3).unwrap();
    let (rec, _) = propagate_ensemble(&e, 200.0 * DRIVE_PERIOD, &icfg, &spec(0.0), 1).unwrap();
    let (d, _) = diffusion_fit(&rec, 10).unwrap();
    assert!(d.abs() < 1e-3, "D = {d}");
}

#[test]
fn bound_motion_has_vanishing_mean_momentum() {
    let icfg = IntegratorConfig::default();
    let e = sample_gaussian(PhaseState::new(20.0, 0.0), 2.0, 1.0, 500, 9).unwrap();
    let (rec, _) = propagate_ensemble(&e, 300.0 * DRIVE_PERIOD, &icfg, &spec(0.5), 1).unwrap();
    let running = rec.mean_p.iter().sum::<f64>() / rec.mean_p.len() as f64;
    assert!(running.abs() < 0.5, "time-averaged <p> = {running}");
}

#[test]
fn lyapunov_estimate_is_insensitive_to_renormalization() {
    let icfg = IntegratorConfig::default();
    let start = PhaseState::new(20.0, -2.0);
    let exponent = |cfg: &LyapunovConfig| lyapunov_exponent(start, cfg, &icfg, &spec(0.5)).unwrap();

    let base = LyapunovConfig {
        n_periods: 3000,
        ..LyapunovConfig::default()
    };
    let reference = exponent(&base);
    let smaller = exponent(&LyapunovConfig {
        d0: 0.5 * base.d0,
        ..base
    })
    .exponent;
    assert!(
        (smaller / reference.exponent - 1.0).abs() < 1e-3,
        "{smaller} vs {}",
        reference.exponent
    );

    let conv = &reference.convergence;
    assert_eq!(conv.len(), base.n_periods);
    assert!((conv.last().unwrap().1 - reference.exponent).abs() < 1e-12);
    assert!(conv.windows(2).all(|w| w[1].0 > w[0].0));

    let short = LyapunovConfig {
        n_periods: 200,
        ..LyapunovConfig::default()
    };
    let a = exponent(&short).exponent;
    let b = exponent(&LyapunovConfig {
        renorm_interval: 0.5 * short.renorm_interval,
        ..short
    })
    .exponent;
    assert!((a / b - 1.0).abs() < 0.02, "{a} vs {b}");
}
