use fermi_core::classical::{kick_drift_kick, sample_gaussian, PhaseState};
use fermi_core::diagnostics::{envelope, Histogram, Moments, TimeSeriesRecord};
use fermi_core::io::{read_record_csv, write_record_csv};
use fermi_core::potential::PotentialSpec;
use fermi_core::quantum::{init_gaussian, read_checkpoint, write_checkpoint, GridConfig};
use proptest::prelude::*;

fn grid() -> GridConfig {
    GridConfig {
        z_min: -20.0,
        z_max: 300.0,
        n_points: 1 << 12,
        absorber_width: 25.0,
        ..GridConfig::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn single_step_is_reversible(
        z in -2.0..80.0f64,
        p in -15.0..15.0f64,
        t in 0.0..100.0f64,
        lambda in 0.0..1.4f64,
    ) {
        let spec = PotentialSpec::new(60.0, 0.5, lambda);
        let dt = std::f64::consts::TAU / 2000.0;
        let fwd = kick_drift_kick(PhaseState::new(z, p), t, dt, &spec).unwrap();
        let back = kick_drift_kick(fwd, t + dt, -dt, &spec).unwrap();
        prop_assert!((back.z - z).abs() < 1e-10 * (1.0 + z.abs()));
        prop_assert!((back.p - p).abs() < 1e-10 * (1.0 + p.abs()));
    }

    #[test]
    fn sampler_depends_only_on_seed(seed in any::<u64>(), n in 1usize..200) {
        let c = PhaseState::new(20.0, 0.0);
        let a = sample_gaussian(c, 2.0, 1.0, n, seed).unwrap();
        let b = sample_gaussian(c, 2.0, 1.0, n, seed).unwrap();
        prop_assert_eq!(a.states, b.states);
    }

    #[test]
    fn histogram_integral_at_most_one(
        values in prop::collection::vec(-100.0..100.0f64, 1..500),
        lo in -120.0..0.0f64,
        span in 1.0..200.0f64,
        bins in 1usize..200,
    ) {
        let h = Histogram::from_samples(&values, lo, lo + span, bins).unwrap();
        prop_assert!(h.total() <= 1.0 + 1e-9);
        prop_assert!(h.density.iter().all(|&d| d >= 0.0));
    }

    #[test]
    fn envelope_brackets_series(values in prop::collection::vec(-50.0..50.0f64, 1..300), window in 0.5..40.0f64) {
        let series: Vec<(f64, f64)> = values.iter().enumerate().map(|(i, &v)| (i as f64, v)).collect();
        let env = envelope(&series, window);
        prop_assert_eq!(env.len(), series.len());
        for pt in env {
            prop_assert!(pt.upper >= pt.lower);
        }
    }

    #[test]
    fn variance_is_translation_invariant(
        pts in prop::collection::vec((-50.0..50.0f64, -10.0..10.0f64), 2..200),
        shift in -100.0..100.0f64,
    ) {
        let a = Moments::from_samples(pts.iter().copied());
        let b = Moments::from_samples(pts.iter().map(|&(z, p)| (z + shift, p - shift)));
        prop_assert!((a.var_z - b.var_z).abs() < 1e-8 * (1.0 + a.var_z));
        prop_assert!((a.var_p - b.var_p).abs() < 1e-8 * (1.0 + a.var_p));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn packet_widths_and_parseval(z0 in 30.0..200.0f64, p0 in -5.0..5.0f64, width in 1.0..4.0f64) {
        let kbar = 4.0;
        let psi = init_gaussian(z0, p0, width, &grid(), kbar).unwrap();
        let m = psi.moments(kbar);
        prop_assert!((m.var_z.sqrt() / width - 1.0).abs() < 1e-3);
        prop_assert!((m.var_p.sqrt() / (kbar / (2.0 * width)) - 1.0).abs() < 5e-3);
        prop_assert!((m.mean_z - z0).abs() < 1e-6);
        prop_assert!((m.mean_p - p0).abs() < 1e-6);
        let momentum_norm: f64 = psi
            .momentum_amplitudes(kbar)
            .iter()
            .map(|a| a.norm_sqr())
            .sum::<f64>()
            * psi.grid.dp(kbar);
        prop_assert!((momentum_norm - psi.norm()).abs() < 1e-10);
    }

    #[test]
    fn checkpoint_round_trip(z0 in 30.0..200.0f64, p0 in -5.0..5.0f64) {
        let psi = init_gaussian(z0, p0, 2.0, &grid(), 4.0).unwrap();
        let mut buf = Vec::new();
        write_checkpoint(&psi, &mut buf).unwrap();
        prop_assert_eq!(read_checkpoint(buf.as_slice()).unwrap(), psi);
    }

    #[test]
    fn record_csv_round_trip(rows in prop::collection::vec((-1e3..1e3f64, -1e2..1e2f64, 0.0..1e4f64, 0.0..1e4f64), 1..50)) {
        let mut rec = TimeSeriesRecord::default();
        for (k, &(mz, mp, vz, vp)) in rows.iter().enumerate() {
            rec.push(k as f64 * std::f64::consts::TAU, Moments { mean_z: mz, mean_p: mp, var_z: vz, var_p: vp, norm: 1.0 });
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("record.csv");
        write_record_csv(&path, &rec).unwrap();
        prop_assert_eq!(read_record_csv(&path).unwrap(), rec);
    }
}
