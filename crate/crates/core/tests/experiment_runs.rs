use std::fs;
use std::path::Path;

use fermi_core::experiments::{config_from_json, preset, run_experiment, ExperimentConfig, SWEEP_HEADER};
use fermi_core::DRIVE_PERIOD;

fn small_distribution_run(out: &Path) -> ExperimentConfig {
    let mut cfg = preset("fig4").unwrap();
    cfg.ensemble.n = 300;
    cfg.t_final = 20.0 * DRIVE_PERIOD;
    cfg.grid.n_points = 1 << 12;
    cfg.grid.z_max = 300.0;
    cfg.grid.absorber_width = 25.0;
    cfg.outputs = out.to_path_buf();
    cfg
}

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

#[test]
fn identical_configs_give_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let a = small_distribution_run(&dir.path().join("a"));
    let b = small_distribution_run(&dir.path().join("b"));
    run_experiment(&a).unwrap();
    run_experiment(&b).unwrap();
    let (fa, fb) = (csv_files(&a.outputs), csv_files(&b.outputs));
    assert!(fa.len() >= 4);
    assert_eq!(fa, fb);
}

#[test]
fn manifest_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let first = small_distribution_run(&dir.path().join("first"));
    let manifest = run_experiment(&first).unwrap();
    let text = fs::read_to_string(first.outputs.join("manifest.json")).unwrap();
    let mut again = config_from_json(&text).unwrap();
    assert_eq!(again, manifest.config);
    again.outputs = dir.path().join("again");
    run_experiment(&again).unwrap();
    assert_eq!(csv_files(&first.outputs), csv_files(&again.outputs));
}

#[test]
fn sweep_table_layout() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = preset("fig5").unwrap();
    cfg.ensemble.n = 200;
    cfg.t_final = 40.0 * DRIVE_PERIOD;
    cfg.sweep_lambdas = vec![0.1, 0.6];
    cfg.inset_lambdas = vec![0.6];
    for g in [&mut cfg.grid, &mut cfg.enlarged_grid] {
        g.n_points = 1 << 12;
        g.z_max = 300.0;
        g.absorber_width = 25.0;
    }
    cfg.outputs = dir.path().to_path_buf();
    run_experiment(&cfg).unwrap();
    let text = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(&header[..SWEEP_HEADER.len()], &SWEEP_HEADER);
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0][3], "below");
    assert_eq!(rows[1][3], "in");
    assert!(dir.path().join("quantum_momentum_lambda_0.60.csv").exists());
}
