//! Named, reproducible experiment presets and the modulation-strength sweep.
//!
//! Every run writes its CSV files and finally `manifest.json`, which carries the
//! fully resolved configuration, so feeding a manifest back reproduces the run.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classical::{
    poincare_section, propagate_ensemble_with, sample_gaussian, Ensemble, IntegratorConfig, PhaseState,
};
use crate::diagnostics::{
    boltzmann_eta, classify_window, diffusion_fit, envelope_periods, fit_exponential_with, fit_two_exponential_with,
    saturation_ratio, theoretical_scales, FitOptions, FitReport, Histogram, ProfileVerdict, TimeSeriesRecord,
    WindowClass,
};
use crate::io;
use crate::lyapunov::{lyapunov_exponent, LyapunovConfig, LyapunovResult};
use crate::potential::{ModulationForm, PotentialSpec};
use crate::quantum::{
    init_gaussian, momentum_distribution, position_distribution, propagate, GridConfig, Wavefunction,
};
use crate::scaling::DimensionlessParams;
use crate::{Error, Result, DRIVE_PERIOD};

pub const PRESETS: [&str; 6] = ["fig1a", "fig1b", "fig2", "fig3", "fig4", "fig5"];

pub const SWEEP_HEADER: [&str; 6] = [
    "lambda",
    "classical_varp",
    "quantum_varp",
    "window_class",
    "fit_verdict",
    "fit_r2",
];

/// Columns appended after [`SWEEP_HEADER`].
pub const SWEEP_EXTRA_HEADER: [&str; 6] = [
    "classical_varp_trailing",
    "quantum_varp_trailing",
    "fit_r2_exponential",
    "fit_r2_gaussian",
    "norm_lost",
    "error",
];

/// Final time of the reduced profile.
pub const REDUCED_T_FINAL: f64 = 800.0;

/// Gaussian cloud matching the initial wavepacket.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSpec {
    pub center_z: f64,
    pub center_p: f64,
    pub width_z: f64,
    /// Defaults to the minimum-uncertainty value `k̄ / (2 width_z)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width_p: Option<f64>,
    pub n: usize,
    pub seed: u64,
}

impl EnsembleSpec {
    pub fn width_p(&self, kbar: f64) -> f64 {
        self.width_p.unwrap_or(kbar / (2.0 * self.width_z))
    }

    pub fn sample(&self, kbar: f64) -> Result<Ensemble> {
        sample_gaussian(
            PhaseState::new(self.center_z, self.center_p),
            self.width_z,
            self.width_p(kbar),
            self.n,
            self.seed,
        )
    }
}

/// Which parts of an experiment execute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSelection {
    pub lyapunov: bool,
    pub poincare: bool,
    pub classical: bool,
    pub quantum: bool,
    pub envelopes: bool,
    pub distributions: bool,
    pub sweep: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisOptions {
    /// Drive periods skipped before the diffusion fit.
    pub transient_periods: usize,
    /// Lower edge of the classical position fit, which excludes the island
    /// around the starting point.
    pub position_fit_min: f64,
    /// Lower edge of the quantum two-exponential position fit; the density
    /// maximum when absent.
    pub quantum_position_fit_min: Option<f64>,
    pub histogram_bins: usize,
    /// Recorded periods averaged in the trailing-mean sweep columns.
    pub trailing_periods: usize,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            transient_periods: 10,
            position_fit_min: 40.0,
            quantum_position_fit_min: None,
            histogram_bins: 100,
            trailing_periods: 10,
        }
    }
}

fn one() -> usize {
    1
}

fn default_poincare_periods() -> usize {
    1000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub params: DimensionlessParams,
    #[serde(default)]
    pub modulation_form: ModulationForm,
    #[serde(default)]
    pub grid: GridConfig,
    /// Grid used for quantum runs above the localization window.
    #[serde(default = "GridConfig::enlarged")]
    pub enlarged_grid: GridConfig,
    #[serde(default)]
    pub integrator: IntegratorConfig,
    pub ensemble: EnsembleSpec,
    pub t_final: f64,
    /// Recording stride in drive periods.
    #[serde(default = "one")]
    pub record_every: usize,
    pub runs: RunSelection,
    #[serde(default)]
    pub lyapunov: LyapunovConfig,
    /// Initial conditions of the Lyapunov runs, also traced in the sections.
    #[serde(default)]
    pub starts: Vec<PhaseState>,
    /// Additional orbits drawn in the sections.
    #[serde(default)]
    pub poincare_starts: Vec<PhaseState>,
    #[serde(default = "default_poincare_periods")]
    pub poincare_periods: usize,
    #[serde(default)]
    pub sweep_lambdas: Vec<f64>,
    /// Sweep points whose quantum momentum distribution is saved.
    #[serde(default)]
    pub inset_lambdas: Vec<f64>,
    #[serde(default)]
    pub analysis: AnalysisOptions,
    #[serde(default)]
    pub outputs: PathBuf,
}

const FIG1_STARTS: [(f64, f64); 3] = [(20.0, 0.0), (20.0, -2.0), (40.0, -2.0)];

fn section_starts() -> Vec<PhaseState> {
    (1..=12).map(|k| PhaseState::new(5.0 * k as f64, 0.0)).collect()
}

/// The parameter set shared by every preset, at modulation strength `lambda`.
pub fn reference_params(lambda_mod: f64) -> DimensionlessParams {
    DimensionlessParams::REFERENCE.with_lambda(lambda_mod)
}

/// Modulation strengths `0.05, 0.10, …, 1.40`.
pub fn sweep_grid() -> Vec<f64> {
    (1..=28).map(|k| (k as f64 * 0.05 * 100.0).round() / 100.0).collect()
}

/// Resolve a preset name into a full configuration.
pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let ensemble = |n: usize| EnsembleSpec {
        center_z: 20.0,
        center_p: 0.0,
        width_z: 2.0,
        width_p: None,
        n,
        seed: 1,
    };
    let base = |lambda_mod: f64, n: usize, t_final: f64, runs: RunSelection| ExperimentConfig {
        name: name.to_string(),
        params: reference_params(lambda_mod),
        modulation_form: ModulationForm::MirrorOscillation,
        grid: GridConfig::default(),
        enlarged_grid: GridConfig::enlarged(),
        integrator: IntegratorConfig::default(),
        ensemble: ensemble(n),
        t_final,
        record_every: 1,
        runs,
        lyapunov: LyapunovConfig::default(),
        starts: Vec::new(),
        poincare_starts: Vec::new(),
        poincare_periods: default_poincare_periods(),
        sweep_lambdas: Vec::new(),
        inset_lambdas: Vec::new(),
        analysis: AnalysisOptions::default(),
        outputs: PathBuf::from("runs").join(name),
    };
    let fig1 = |lambda_mod: f64| ExperimentConfig {
        starts: FIG1_STARTS.iter().map(|&(z, p)| PhaseState::new(z, p)).collect(),
        poincare_starts: section_starts(),
        ..base(
            lambda_mod,
            1,
            DRIVE_PERIOD,
            RunSelection {
                lyapunov: true,
                poincare: true,
                ..RunSelection::default()
            },
        )
    };
    let widths = RunSelection {
        classical: true,
        quantum: true,
        ..RunSelection::default()
    };
    // 160 drive periods, so the last record coincides with the final state.
    let t_widths = 160.0 * DRIVE_PERIOD;
    let cfg = match name {
        "fig1a" => fig1(0.2),
        "fig1b" => fig1(0.5),
        "fig2" => base(0.5, 2000, t_widths, widths),
        "fig3" => base(
            0.5,
            2000,
            t_widths,
            RunSelection {
                envelopes: true,
                ..widths
            },
        ),
        "fig4" => base(
            0.8,
            10_000,
            2650.0,
            RunSelection {
                distributions: true,
                ..widths
            },
        ),
        "fig5" => ExperimentConfig {
            sweep_lambdas: sweep_grid(),
            inset_lambdas: vec![0.8, 1.2],
            ..base(
                0.8,
                2000,
                3200.0,
                RunSelection {
                    sweep: true,
                    ..RunSelection::default()
                },
            )
        },
        other => {
            return Err(Error::Config(format!(
                "unknown preset `{other}`; expected one of {}",
                PRESETS.join(", ")
            )))
        }
    };
    Ok(cfg)
}

/// Coarser grids and `t_final <= 800`, for continuous integration.
pub fn reduced(mut cfg: ExperimentConfig) -> ExperimentConfig {
    cfg.t_final = cfg.t_final.min(REDUCED_T_FINAL);
    cfg.grid.n_points = (cfg.grid.n_points / 2).max(1 << 10);
    cfg.enlarged_grid.n_points = (cfg.enlarged_grid.n_points / 2).max(1 << 10);
    cfg
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.grid.validate()?;
        self.enlarged_grid.validate()?;
        let e = &self.ensemble;
        if e.n == 0 {
            return Err(Error::domain("ensemble.n", "must be >= 1"));
        }
        if !(e.width_z > 0.0 && e.width_p(self.params.kbar) > 0.0) {
            return Err(Error::domain("ensemble.width_z", "widths must be > 0"));
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(Error::domain("t_final", "must be finite and > 0"));
        }
        if self.record_every == 0 {
            return Err(Error::domain("record_every", "must be >= 1"));
        }
        if self.runs == RunSelection::default() {
            return Err(Error::Config("no runs selected".into()));
        }
        if (self.runs.lyapunov || self.runs.poincare) && self.starts.is_empty() && self.poincare_starts.is_empty() {
            return Err(Error::Config("trajectory runs need at least one start".into()));
        }
        if self.runs.sweep && self.sweep_lambdas.is_empty() {
            return Err(Error::Config("sweep needs at least one lambda".into()));
        }
        if let Some(l) = self.sweep_lambdas.iter().find(|l| !(**l >= 0.0 && l.is_finite())) {
            return Err(Error::domain("sweep_lambdas", format!("{l} must be finite and >= 0")));
        }
        if (self.runs.envelopes || self.runs.distributions) && !(self.runs.classical && self.runs.quantum) {
            return Err(Error::Config(
                "envelopes and distributions need classical and quantum runs".into(),
            ));
        }
        Ok(())
    }

    pub fn spec(&self, lambda_mod: f64) -> PotentialSpec {
        PotentialSpec::from_params(&self.params.with_lambda(lambda_mod), self.modulation_form)
    }

    /// Default grid inside or below the window, enlarged grid above it.
    pub fn grid_for(&self, lambda_mod: f64) -> &GridConfig {
        match classify_window(lambda_mod, &self.params) {
            WindowClass::AboveWindow => &self.enlarged_grid,
            _ => &self.grid,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalRun {
    pub record: TimeSeriesRecord,
    pub ensemble: Ensemble,
    /// Largest fraction of particles below the mirror surface at any record.
    pub max_fraction_below_mirror: f64,
}

pub fn run_classical(cfg: &ExperimentConfig, lambda_mod: f64) -> Result<ClassicalRun> {
    let e = cfg.ensemble.sample(cfg.params.kbar)?;
    let mut below: f64 = 0.0;
    let (record, ensemble) = propagate_ensemble_with(
        &e,
        cfg.t_final,
        &cfg.integrator,
        &cfg.spec(lambda_mod),
        cfg.record_every,
        |_, states| {
            let n = states.iter().filter(|s| s.z < 0.0).count();
            below = below.max(n as f64 / states.len() as f64);
        },
    )
    .map_err(|e| e.in_run(format!("classical lambda={lambda_mod}")))?;
    Ok(ClassicalRun {
        record,
        ensemble,
        max_fraction_below_mirror: below,
    })
}

pub struct QuantumRun {
    pub record: TimeSeriesRecord,
    pub psi: Wavefunction,
}

pub fn run_quantum(cfg: &ExperimentConfig, lambda_mod: f64, grid: &GridConfig) -> Result<QuantumRun> {
    let e = &cfg.ensemble;
    let kbar = cfg.params.kbar;
    let run = || -> Result<QuantumRun> {
        let psi = init_gaussian(e.center_z, e.center_p, e.width_z, grid, kbar)?;
        let (psi, record) = propagate(psi, cfg.t_final, grid, &cfg.spec(lambda_mod), kbar, cfg.record_every)?;
        Ok(QuantumRun { record, psi })
    };
    run().map_err(|e| e.in_run(format!("quantum lambda={lambda_mod}")))
}

/// Position and momentum histograms of an ensemble over its full range.
pub fn classical_histograms(e: &Ensemble, bins: usize) -> Result<(Histogram, Histogram)> {
    let zs = e.positions();
    let ps = e.momenta();
    let z_lo = zs.iter().copied().fold(f64::INFINITY, f64::min).floor();
    let z_hi = zs.iter().copied().fold(f64::NEG_INFINITY, f64::max).floor() + 1.0;
    let p_max = ps.iter().fold(0.0f64, |m, p| m.max(p.abs())).floor() + 1.0;
    Ok((
        Histogram::from_samples(&zs, z_lo, z_hi, bins)?,
        Histogram::from_samples(&ps, -p_max, p_max, bins)?,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileComparison {
    pub verdict: ProfileVerdict,
    pub exponential: FitReport,
    pub gaussian: FitReport,
}

impl ProfileComparison {
    pub fn of(h: &Histogram) -> Result<Self> {
        let (verdict, exponential, gaussian) = ProfileVerdict::decide(h, &FitOptions::default())?;
        Ok(ProfileComparison {
            verdict,
            exponential,
            gaussian,
        })
    }

    pub fn verdict_r2(&self) -> f64 {
        match self.verdict {
            ProfileVerdict::Exponential => self.exponential.r_squared,
            ProfileVerdict::Gaussian => self.gaussian.r_squared,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DistributionFits {
    /// Exponential fit of the classical position density above `position_fit_min`.
    pub classical_position: Option<FitReport>,
    pub classical_momentum: Option<ProfileComparison>,
    pub quantum_momentum: Option<ProfileComparison>,
    /// Two-exponential fit of the quantum position density.
    pub quantum_position: Option<FitReport>,
    /// `-1/η` with `η` the final classical momentum variance.
    pub classical_barometric_slope: f64,
    pub errors: Vec<String>,
}

impl DistributionFits {
    /// Flat quantum slope relative to the classical barometric slope.
    pub fn flat_slope_ratio(&self) -> Option<f64> {
        let two = self.quantum_position.as_ref()?.two_exponential?;
        Some(two.flat_slope() / self.classical_barometric_slope)
    }
}

pub struct Distributions {
    pub classical_position: Histogram,
    pub classical_momentum: Histogram,
    pub quantum_position: Histogram,
    pub quantum_momentum: Histogram,
}

pub fn distributions(cfg: &ExperimentConfig, classical: &ClassicalRun, quantum: &QuantumRun) -> Result<Distributions> {
    let (cz, cp) = classical_histograms(&classical.ensemble, cfg.analysis.histogram_bins)?;
    Ok(Distributions {
        classical_position: cz,
        classical_momentum: cp,
        quantum_position: position_distribution(&quantum.psi),
        quantum_momentum: momentum_distribution(&quantum.psi, cfg.params.kbar),
    })
}

fn keep<T>(errors: &mut Vec<String>, label: &str, r: Result<T>) -> Option<T> {
    r.map_err(|e| errors.push(format!("{label}: {e}"))).ok()
}

/// Fit every distribution; individual failures are collected, not raised.
pub fn fit_distributions(cfg: &ExperimentConfig, d: &Distributions, classical_var_p: f64) -> DistributionFits {
    let mut errors = Vec::new();
    let classical_position = keep(
        &mut errors,
        "classical position",
        fit_exponential_with(
            &d.classical_position,
            &FitOptions::range(cfg.analysis.position_fit_min, f64::INFINITY),
        ),
    );
    let classical_momentum = keep(
        &mut errors,
        "classical momentum",
        ProfileComparison::of(&d.classical_momentum),
    );
    let quantum_momentum = keep(
        &mut errors,
        "quantum momentum",
        ProfileComparison::of(&d.quantum_momentum),
    );
    let z_from = cfg.analysis.quantum_position_fit_min.unwrap_or_else(|| {
        let h = &d.quantum_position;
        let i = (0..h.len()).fold(0, |best, i| if h.density[i] > h.density[best] { i } else { best });
        h.centers[i]
    });
    let quantum_position = keep(
        &mut errors,
        "quantum position",
        fit_two_exponential_with(&d.quantum_position, &FitOptions::range(z_from, f64::INFINITY)),
    );
    DistributionFits {
        classical_position,
        classical_momentum,
        quantum_momentum,
        quantum_position,
        classical_barometric_slope: -1.0 / classical_var_p,
        errors,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub lambda: f64,
    pub classical_varp: Option<f64>,
    pub quantum_varp: Option<f64>,
    pub window_class: WindowClass,
    pub fit_verdict: Option<ProfileVerdict>,
    pub fit_r2: Option<f64>,
    pub classical_varp_trailing: Option<f64>,
    pub quantum_varp_trailing: Option<f64>,
    pub fit_r2_exponential: Option<f64>,
    pub fit_r2_gaussian: Option<f64>,
    pub norm_lost: Option<f64>,
    pub error: Option<String>,
}

impl SweepRow {
    fn cells(&self) -> Vec<String> {
        let num = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        vec![
            self.lambda.to_string(),
            num(self.classical_varp),
            num(self.quantum_varp),
            self.window_class.as_str().to_string(),
            self.fit_verdict.map(|v| v.as_str().to_string()).unwrap_or_default(),
            num(self.fit_r2),
            num(self.classical_varp_trailing),
            num(self.quantum_varp_trailing),
            num(self.fit_r2_exponential),
            num(self.fit_r2_gaussian),
            num(self.norm_lost),
            self.error.clone().unwrap_or_default(),
        ]
    }
}

/// One sweep point; the quantum momentum distribution is returned alongside.
pub fn sweep_point(lambda_mod: f64, base: &ExperimentConfig) -> (SweepRow, Option<Histogram>) {
    let trailing = base.analysis.trailing_periods;
    let mut row = SweepRow {
        lambda: lambda_mod,
        classical_varp: None,
        quantum_varp: None,
        window_class: classify_window(lambda_mod, &base.params),
        fit_verdict: None,
        fit_r2: None,
        classical_varp_trailing: None,
        quantum_varp_trailing: None,
        fit_r2_exponential: None,
        fit_r2_gaussian: None,
        norm_lost: None,
        error: None,
    };
    let mut errors = Vec::new();
    match run_classical(base, lambda_mod) {
        Ok(c) => {
            row.classical_varp = c.record.last().map(|m| m.var_p);
            row.classical_varp_trailing = Some(c.record.trailing_mean_var_p(trailing));
        }
        Err(e) => errors.push(e.to_string()),
    }
    let mut inset = None;
    match run_quantum(base, lambda_mod, base.grid_for(lambda_mod)) {
        Ok(q) => {
            row.quantum_varp = q.record.last().map(|m| m.var_p);
            row.quantum_varp_trailing = Some(q.record.trailing_mean_var_p(trailing));
            row.norm_lost = Some(q.psi.norm_lost);
            let h = momentum_distribution(&q.psi, base.params.kbar);
            match ProfileComparison::of(&h) {
                Ok(c) => {
                    row.fit_verdict = Some(c.verdict);
                    row.fit_r2 = Some(c.verdict_r2());
                    row.fit_r2_exponential = Some(c.exponential.r_squared);
                    row.fit_r2_gaussian = Some(c.gaussian.r_squared);
                }
                Err(e) => errors.push(format!("quantum momentum fit: {e}")),
            }
            inset = Some(h);
        }
        Err(e) => errors.push(e.to_string()),
    }
    if !errors.is_empty() {
        row.error = Some(errors.join("; "));
    }
    (row, inset)
}

pub fn write_sweep_csv(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let header: Vec<&str> = SWEEP_HEADER.iter().chain(&SWEEP_EXTRA_HEADER).copied().collect();
    io::write_rows(path, &header, rows.iter().map(SweepRow::cells))
}

/// Run every sweep point and write the sweep CSV. Failures are recorded in
/// the row and the sweep continues.
pub fn run_sweep(lambdas: &[f64], base: &ExperimentConfig, out: &Path) -> Result<Vec<SweepRow>> {
    if let Some(l) = lambdas.iter().find(|l| !(**l >= 0.0 && l.is_finite())) {
        return Err(Error::domain("lambda", format!("{l} must be finite and >= 0")));
    }
    let rows: Vec<SweepRow> = lambdas.par_iter().map(|&l| sweep_point(l, base).0).collect();
    write_sweep_csv(out, &rows)?;
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub name: String,
    pub version: String,
    pub seed: u64,
    pub config: ExperimentConfig,
    pub wall_time_s: f64,
    /// Output files relative to the output directory.
    pub files: Vec<String>,
    pub summary: serde_json::Value,
}

pub const MANIFEST_FILE: &str = "manifest.json";

/// Accepts either a bare configuration or a manifest written by a previous run.
pub fn config_from_json(text: &str) -> Result<ExperimentConfig> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    let value = match value.get("config") {
        Some(c) if value.get("files").is_some() => c.clone(),
        _ => value,
    };
    serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))
}

/// Files written so far; removed again if the run fails.
struct Outputs {
    dir: PathBuf,
    written: Vec<String>,
}

impl Outputs {
    fn path(&mut self, name: &str) -> PathBuf {
        self.written.push(name.to_string());
        self.dir.join(name)
    }

    fn discard(&self) {
        for f in &self.written {
            let _ = fs::remove_file(self.dir.join(f));
        }
        let _ = fs::remove_file(self.dir.join(MANIFEST_FILE).with_extension("json.tmp"));
    }
}

fn lambda_tag(l: f64) -> String {
    format!("{l:.2}")
}

fn write_envelope(path: &Path, rec: &TimeSeriesRecord) -> Result<()> {
    let series = |col: &[f64]| -> Vec<(f64, f64)> { rec.times.iter().copied().zip(col.iter().copied()).collect() };
    let p = envelope_periods(&series(&rec.mean_p));
    let z = envelope_periods(&series(&rec.mean_z));
    io::write_rows(
        path,
        &["t", "mean_p_upper", "mean_p_lower", "mean_z_upper", "mean_z_lower"],
        p.iter()
            .zip(&z)
            .map(|(a, b)| vec![a.t, a.upper, a.lower, b.upper, b.lower]),
    )
}

fn record_summary(rec: &TimeSeriesRecord, transient: usize) -> serde_json::Value {
    let mut s = serde_json::Map::new();
    if let Some(m) = rec.last() {
        s.insert("final".into(), serde_json::to_value(m).unwrap_or_default());
    }
    if let Ok((d, r2)) = diffusion_fit(rec, transient) {
        s.insert("diffusion".into(), serde_json::json!({ "D": d, "r_squared": r2 }));
    }
    if let Ok(r) = saturation_ratio(rec) {
        s.insert("saturation_ratio".into(), r.into());
    }
    let mean_p = rec.mean_p.iter().sum::<f64>() / rec.len().max(1) as f64;
    s.insert("running_mean_p".into(), mean_p.into());
    serde_json::Value::Object(s)
}

fn execute(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<serde_json::Value> {
    let mut summary = serde_json::Map::new();
    let lambda = cfg.params.lambda_mod;

    if cfg.runs.lyapunov {
        let results: Vec<LyapunovResult> = cfg
            .starts
            .par_iter()
            .map(|&s| {
                lyapunov_exponent(s, &cfg.lyapunov, &cfg.integrator, &cfg.spec(lambda))
                    .map_err(|e| e.in_run(format!("lyapunov start=({}, {})", s.z, s.p)))
            })
            .collect::<Result<_>>()?;
        io::write_rows(
            &out.path("lyapunov.csv"),
            &["z0", "p0", "lambda", "L"],
            cfg.starts
                .iter()
                .zip(&results)
                .map(|(s, r)| vec![s.z, s.p, lambda, r.exponent]),
        )?;
        io::write_rows(
            &out.path("convergence.csv"),
            &["t", "L_t", "z0", "p0"],
            cfg.starts
                .iter()
                .zip(&results)
                .flat_map(|(s, r)| r.convergence.iter().map(move |&(t, l)| vec![t, l, s.z, s.p])),
        )?;
        summary.insert(
            "lyapunov".into(),
            serde_json::Value::Array(
                cfg.starts
                    .iter()
                    .zip(&results)
                    .map(|(s, r)| serde_json::json!({"z0": s.z, "p0": s.p, "L": r.exponent, "regular": r.regular}))
                    .collect(),
            ),
        );
    }

    if cfg.runs.poincare {
        let starts: Vec<PhaseState> = cfg.starts.iter().chain(&cfg.poincare_starts).copied().collect();
        let sections: Vec<Vec<PhaseState>> = starts
            .par_iter()
            .map(|&s| {
                poincare_section(s, cfg.poincare_periods, &cfg.integrator, &cfg.spec(lambda))
                    .map_err(|e| e.in_run(format!("poincare start=({}, {})", s.z, s.p)))
            })
            .collect::<Result<_>>()?;
        io::write_rows(
            &out.path("poincare.csv"),
            &["k", "z", "p", "z0", "p0"],
            starts.iter().zip(&sections).flat_map(|(s0, sec)| {
                sec.iter()
                    .enumerate()
                    .map(move |(k, s)| vec![k as f64, s.z, s.p, s0.z, s0.p])
            }),
        )?;
    }

    let classical = if cfg.runs.classical {
        let c = run_classical(cfg, lambda)?;
        io::write_record_csv(&out.path("classical_record.csv"), &c.record)?;
        let mut s = record_summary(&c.record, cfg.analysis.transient_periods);
        let eta = boltzmann_eta(&c.record);
        if let Some(last) = eta.last() {
            s["eta"] = serde_json::to_value(last).unwrap_or_default();
        }
        s["max_fraction_below_mirror"] = c.max_fraction_below_mirror.into();
        if let Some(d) = s.get("diffusion").and_then(|d| d["D"].as_f64()) {
            if let Ok(scales) = theoretical_scales(&cfg.params, d.max(0.0)) {
                s["scales"] = serde_json::to_value(scales).unwrap_or_default();
            }
        }
        summary.insert("classical".into(), s);
        Some(c)
    } else {
        None
    };

    let quantum = if cfg.runs.quantum {
        let q = run_quantum(cfg, lambda, cfg.grid_for(lambda))?;
        io::write_record_csv(&out.path("quantum_record.csv"), &q.record)?;
        let mut s = record_summary(&q.record, cfg.analysis.transient_periods);
        s["norm_lost"] = q.psi.norm_lost.into();
        summary.insert("quantum".into(), s);
        Some(q)
    } else {
        None
    };

    if let (Some(c), Some(q)) = (&classical, &quantum) {
        if cfg.runs.envelopes {
            write_envelope(&out.path("classical_envelope.csv"), &c.record)?;
            write_envelope(&out.path("quantum_envelope.csv"), &q.record)?;
        }
        if cfg.runs.distributions {
            let d = distributions(cfg, c, q)?;
            io::write_distribution_csv(&out.path("classical_position.csv"), &d.classical_position)?;
            io::write_distribution_csv(&out.path("classical_momentum.csv"), &d.classical_momentum)?;
            io::write_distribution_csv(&out.path("quantum_position.csv"), &d.quantum_position)?;
            io::write_distribution_csv(&out.path("quantum_momentum.csv"), &d.quantum_momentum)?;
            let var_p = c.ensemble.moments().var_p;
            let fits = fit_distributions(cfg, &d, var_p);
            io::write_json_atomic(&out.path("fits.json"), &fits)?;
            summary.insert("flat_slope_ratio".into(), fits.flat_slope_ratio().into());
        }
    }

    if cfg.runs.sweep {
        let points: Vec<(SweepRow, Option<Histogram>)> =
            cfg.sweep_lambdas.par_iter().map(|&l| sweep_point(l, cfg)).collect();
        let rows: Vec<SweepRow> = points.iter().map(|(r, _)| r.clone()).collect();
        write_sweep_csv(&out.path("sweep.csv"), &rows)?;
        for (row, h) in &points {
            let wanted = cfg.inset_lambdas.iter().any(|l| (l - row.lambda).abs() < 1e-9);
            if let (true, Some(h)) = (wanted, h) {
                let name = format!("quantum_momentum_lambda_{}.csv", lambda_tag(row.lambda));
                io::write_distribution_csv(&out.path(&name), h)?;
            }
        }
        let failed = rows.iter().filter(|r| r.error.is_some()).count();
        summary.insert("sweep_failures".into(), failed.into());
    }

    Ok(serde_json::Value::Object(summary))
}

/// Execute the selected runs, write outputs and the manifest.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunManifest> {
    cfg.validate()?;
    let dir = if cfg.outputs.as_os_str().is_empty() {
        PathBuf::from(".")
    } else {
        cfg.outputs.clone()
    };
    fs::create_dir_all(&dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    let started = Instant::now();
    let mut out = Outputs {
        dir: dir.clone(),
        written: Vec::new(),
    };
    log::info!("experiment {} -> {}", cfg.name, dir.display());
    let result = execute(cfg, &mut out).and_then(|summary| {
        let manifest = RunManifest {
            name: cfg.name.clone(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: cfg.ensemble.seed,
            config: cfg.clone(),
            wall_time_s: started.elapsed().as_secs_f64(),
            files: out.written.clone(),
            summary,
        };
        io::write_json_atomic(&dir.join(MANIFEST_FILE), &manifest)?;
        Ok(manifest)
    });
    if result.is_err() {
        out.discard();
    }
    result.map_err(|e| e.in_run(cfg.name.clone()))
}
