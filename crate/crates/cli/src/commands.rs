use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;

use fermi_core::classical::{poincare_section, propagate_ensemble, IntegratorConfig, PhaseState};
use fermi_core::diagnostics::{
    boltzmann_eta, classify_window, diffusion_fit, fit_exponential_with, fit_two_exponential_with, theoretical_scales,
    FitOptions, TimeSeriesRecord,
};
use fermi_core::experiments::{
    config_from_json, preset, reduced, reference_params, run_experiment, sweep_grid, EnsembleSpec, ExperimentConfig,
    ProfileComparison, RunSelection,
};
use fermi_core::io;
use fermi_core::lyapunov::{lyapunov_exponent, LyapunovConfig};
use fermi_core::potential::{ModulationForm, PotentialSpec};
use fermi_core::quantum::{
    init_gaussian, momentum_distribution, position_distribution, propagate, read_checkpoint, write_checkpoint,
    GridConfig,
};
use fermi_core::scaling::{to_dimensionless, window_bounds, DimensionlessParams, PhysicalParams};
use fermi_core::standard_map::{chaos_parameter, diffusion_coefficient};
use fermi_core::{Error, Result};

use crate::GlobalOpts;

fn io_error(context: impl Into<String>, source: std::io::Error) -> Error {
    Error::Io {
        context: context.into(),
        source,
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| io_error(format!("reading {}", path.display()), e))
}

fn load<T: DeserializeOwned + Default>(g: &GlobalOpts) -> Result<T> {
    match &g.config {
        Some(path) => {
            serde_json::from_str(&read_text(path)?).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
        }
        None => Ok(T::default()),
    }
}

fn out_dir(g: &GlobalOpts, fallback: &str) -> Result<PathBuf> {
    let dir = g.out_dir.clone().unwrap_or_else(|| PathBuf::from(fallback));
    fs::create_dir_all(&dir).map_err(|e| io_error(format!("creating {}", dir.display()), e))?;
    Ok(dir)
}

fn reference_ensemble() -> EnsembleSpec {
    preset("fig2").map(|c| c.ensemble).expect("built-in preset")
}

fn default_starts() -> Vec<PhaseState> {
    vec![
        PhaseState::new(20.0, 0.0),
        PhaseState::new(20.0, -2.0),
        PhaseState::new(40.0, -2.0),
    ]
}

fn spec_of(params: &DimensionlessParams, form: ModulationForm) -> PotentialSpec {
    PotentialSpec::from_params(params, form)
}

fn record_summary(rec: &TimeSeriesRecord) -> serde_json::Value {
    let mut s = json!({ "final": rec.last() });
    if let Ok((d, r2)) = diffusion_fit(rec, 10) {
        s["diffusion"] = json!({ "D": d, "r_squared": r2 });
    }
    s
}

#[derive(Serialize)]
struct Converted {
    #[serde(flatten)]
    params: DimensionlessParams,
    epsilon: f64,
    lambda_lower: f64,
    lambda_upper: f64,
    window_class: &'static str,
}

pub fn convert(g: &GlobalOpts) -> Result<()> {
    let path = g
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("convert needs --config <physical parameters JSON>".into()))?;
    let physical: PhysicalParams =
        serde_json::from_str(&read_text(path)?).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let params = to_dimensionless(&physical)?;
    let (lambda_lower, lambda_upper) = window_bounds(&params);
    let out = Converted {
        params,
        epsilon: params.epsilon(),
        lambda_lower,
        lambda_upper,
        window_class: classify_window(params.lambda_mod, &params).as_str(),
    };
    println!("{}", serde_json::to_string_pretty(&out)?);
    if g.out_dir.is_some() {
        io::write_json_atomic(&out_dir(g, ".")?.join("dimensionless.json"), &out)?;
    }
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassicalConfig {
    pub params: DimensionlessParams,
    pub modulation_form: ModulationForm,
    pub integrator: IntegratorConfig,
    pub ensemble: EnsembleSpec,
    pub t_final: f64,
    pub record_every: usize,
    /// Also write the final phase-space points.
    pub final_state: bool,
}

impl Default for ClassicalConfig {
    fn default() -> Self {
        ClassicalConfig {
            params: reference_params(0.5),
            modulation_form: ModulationForm::default(),
            integrator: IntegratorConfig::default(),
            ensemble: reference_ensemble(),
            t_final: 1000.0,
            record_every: 1,
            final_state: false,
        }
    }
}

pub fn classical(g: &GlobalOpts) -> Result<()> {
    let mut cfg: ClassicalConfig = load(g)?;
    if let Some(seed) = g.seed {
        cfg.ensemble.seed = seed;
    }
    cfg.params.validate()?;
    let dir = out_dir(g, "runs/classical")?;
    let e = cfg.ensemble.sample(cfg.params.kbar)?;
    let spec = spec_of(&cfg.params, cfg.modulation_form);
    let (rec, last) = propagate_ensemble(&e, cfg.t_final, &cfg.integrator, &spec, cfg.record_every)?;
    io::write_record_csv(&dir.join("classical_record.csv"), &rec)?;
    if cfg.final_state {
        io::write_rows(
            &dir.join("classical_final.csv"),
            &["z", "p"],
            last.states.iter().map(|s| vec![s.z, s.p]),
        )?;
    }
    let mut summary = record_summary(&rec);
    summary["eta"] = json!(boltzmann_eta(&rec).last());
    summary["config"] = serde_json::to_value(&cfg)?;
    io::write_json_atomic(&dir.join("classical_summary.json"), &summary)?;
    log::info!("wrote {} stroboscopic samples to {}", rec.len(), dir.display());
    Ok(())
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Packet {
    pub center_z: f64,
    pub center_p: f64,
    pub width_z: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuantumConfig {
    pub params: DimensionlessParams,
    pub modulation_form: ModulationForm,
    pub grid: GridConfig,
    pub packet: Packet,
    pub t_final: f64,
    pub record_every: usize,
    /// Write the final amplitudes to `wavefunction.bin`.
    pub checkpoint: bool,
    /// Continue from a previously written checkpoint instead of `packet`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub resume: Option<PathBuf>,
}

impl Default for QuantumConfig {
    fn default() -> Self {
        let e = reference_ensemble();
        QuantumConfig {
            params: reference_params(0.5),
            modulation_form: ModulationForm::default(),
            grid: GridConfig::default(),
            packet: Packet {
                center_z: e.center_z,
                center_p: e.center_p,
                width_z: e.width_z,
            },
            t_final: 1000.0,
            record_every: 1,
            checkpoint: false,
            resume: None,
        }
    }
}

pub fn quantum(g: &GlobalOpts) -> Result<()> {
    let cfg: QuantumConfig = load(g)?;
    cfg.params.validate()?;
    let dir = out_dir(g, "runs/quantum")?;
    let kbar = cfg.params.kbar;
    let psi = match &cfg.resume {
        Some(path) => {
            let f = fs::File::open(path).map_err(|e| io_error(format!("opening {}", path.display()), e))?;
            read_checkpoint(std::io::BufReader::new(f))?
        }
        None => init_gaussian(
            cfg.packet.center_z,
            cfg.packet.center_p,
            cfg.packet.width_z,
            &cfg.grid,
            kbar,
        )?,
    };
    let spec = spec_of(&cfg.params, cfg.modulation_form);
    let (psi, rec) = propagate(psi, cfg.t_final, &cfg.grid, &spec, kbar, cfg.record_every)?;
    io::write_record_csv(&dir.join("quantum_record.csv"), &rec)?;
    io::write_distribution_csv(&dir.join("quantum_position.csv"), &position_distribution(&psi))?;
    io::write_distribution_csv(&dir.join("quantum_momentum.csv"), &momentum_distribution(&psi, kbar))?;
    if cfg.checkpoint {
        io::write_bytes(&dir.join("wavefunction.bin"), |w| write_checkpoint(&psi, w))?;
    }
    let mut summary = record_summary(&rec);
    summary["norm_lost"] = json!(psi.norm_lost);
    summary["config"] = serde_json::to_value(&cfg)?;
    io::write_json_atomic(&dir.join("quantum_summary.json"), &summary)?;
    log::info!("t={:.1}, absorbed probability {:.2e}", psi.t, psi.norm_lost);
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LyapunovRunConfig {
    pub params: DimensionlessParams,
    pub modulation_form: ModulationForm,
    pub integrator: IntegratorConfig,
    pub lyapunov: LyapunovConfig,
    pub starts: Vec<PhaseState>,
    /// Modulation strengths to scan; empty means `params.lambda_mod` only.
    pub lambdas: Vec<f64>,
    /// Write the running estimates of every orbit.
    pub convergence: bool,
}

impl Default for LyapunovRunConfig {
    fn default() -> Self {
        LyapunovRunConfig {
            params: reference_params(0.5),
            modulation_form: ModulationForm::default(),
            integrator: IntegratorConfig::default(),
            lyapunov: LyapunovConfig::default(),
            starts: default_starts(),
            lambdas: Vec::new(),
            convergence: true,
        }
    }
}

pub fn lyapunov(g: &GlobalOpts) -> Result<()> {
    let cfg: LyapunovRunConfig = load(g)?;
    cfg.params.validate()?;
    let dir = out_dir(g, "runs/lyapunov")?;
    let lambdas = if cfg.lambdas.is_empty() {
        vec![cfg.params.lambda_mod]
    } else {
        cfg.lambdas.clone()
    };
    let jobs: Vec<(f64, PhaseState)> = lambdas
        .iter()
        .flat_map(|&l| cfg.starts.iter().map(move |&s| (l, s)))
        .collect();
    let results = jobs
        .par_iter()
        .map(|&(l, s)| {
            let spec = spec_of(&cfg.params.with_lambda(l), cfg.modulation_form);
            lyapunov_exponent(s, &cfg.lyapunov, &cfg.integrator, &spec)
                .map_err(|e| e.in_run(format!("lambda={l} start=({}, {})", s.z, s.p)))
        })
        .collect::<Result<Vec<_>>>()?;
    io::write_rows(
        &dir.join("lyapunov.csv"),
        &["z0", "p0", "lambda", "L"],
        jobs.iter()
            .zip(&results)
            .map(|((l, s), r)| vec![s.z, s.p, *l, r.exponent]),
    )?;
    if cfg.convergence {
        io::write_rows(
            &dir.join("convergence.csv"),
            &["t", "L_t", "z0", "p0", "lambda"],
            jobs.iter()
                .zip(&results)
                .flat_map(|((l, s), r)| r.convergence.iter().map(move |&(t, lt)| vec![t, lt, s.z, s.p, *l])),
        )?;
    }
    for ((l, s), r) in jobs.iter().zip(&results) {
        let kind = if r.regular { "regular" } else { "chaotic" };
        log::info!("lambda={l} ({}, {}): L={:.5} {kind}", s.z, s.p, r.exponent);
    }
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PoincareConfig {
    pub params: DimensionlessParams,
    pub modulation_form: ModulationForm,
    pub integrator: IntegratorConfig,
    pub starts: Vec<PhaseState>,
    pub n_periods: usize,
}

impl Default for PoincareConfig {
    fn default() -> Self {
        PoincareConfig {
            params: reference_params(0.5),
            modulation_form: ModulationForm::default(),
            integrator: IntegratorConfig::default(),
            starts: default_starts(),
            n_periods: 1000,
        }
    }
}

pub fn poincare(g: &GlobalOpts) -> Result<()> {
    let cfg: PoincareConfig = load(g)?;
    cfg.params.validate()?;
    let dir = out_dir(g, "runs/poincare")?;
    let spec = spec_of(&cfg.params, cfg.modulation_form);
    let sections = cfg
        .starts
        .par_iter()
        .map(|&s| poincare_section(s, cfg.n_periods, &cfg.integrator, &spec))
        .collect::<Result<Vec<_>>>()?;
    io::write_rows(
        &dir.join("poincare.csv"),
        &["k", "z", "p", "z0", "p0"],
        cfg.starts.iter().zip(&sections).flat_map(|(s0, sec)| {
            sec.iter()
                .enumerate()
                .map(move |(k, s)| vec![k as f64, s.z, s.p, s0.z, s0.p])
        }),
    )
}

#[derive(Args, Debug)]
pub struct MapArgs {
    /// Kick strength K.
    #[arg(long, conflicts_with = "lambda")]
    pub k: Option<f64>,
    /// Modulation strength; sets K = 4λ.
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long, default_value_t = 10_000)]
    pub orbits: usize,
    #[arg(long, default_value_t = 1000)]
    pub steps: usize,
}

pub fn map(g: &GlobalOpts, a: &MapArgs) -> Result<()> {
    let k = match (a.k, a.lambda) {
        (Some(k), _) => k,
        (None, Some(l)) => chaos_parameter(l),
        (None, None) => return Err(Error::Config("map needs --k or --lambda".into())),
    };
    let seed = g.seed.unwrap_or(1);
    let dir = out_dir(g, "runs/map")?;
    let est = diffusion_coefficient(k, a.orbits, a.steps, seed)?;
    io::write_rows(
        &dir.join("map_msd.csv"),
        &["n", "msd"],
        est.msd.iter().enumerate().map(|(n, &m)| vec![n as f64, m]),
    )?;
    let summary = json!({
        "K": k,
        "D_measured": est.d_measured,
        "D_ql": est.d_ql,
        "n_orbits": a.orbits,
        "n_steps": a.steps,
        "seed": seed,
    });
    io::write_json_atomic(&dir.join("map_summary.json"), &summary)?;
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    /// Stroboscopic record CSV.
    #[arg(long)]
    pub record: Option<PathBuf>,
    /// Position distribution CSV.
    #[arg(long)]
    pub position: Option<PathBuf>,
    /// Momentum distribution CSV.
    #[arg(long)]
    pub momentum: Option<PathBuf>,
    /// Samples behind counted histograms; 0 marks exact (quantum) densities.
    #[arg(long, default_value_t = 0)]
    pub samples: usize,
    /// Modulation strength, for the window class and theoretical scales.
    #[arg(long, default_value_t = 0.8)]
    pub lambda: f64,
    /// Lower end of the single-exponential position fit.
    #[arg(long)]
    pub position_fit_min: Option<f64>,
    /// Fit two exponentials to the position distribution.
    #[arg(long)]
    pub two_exponential: bool,
    #[arg(long, default_value_t = 10)]
    pub transient_periods: usize,
}

pub fn analyze(g: &GlobalOpts, a: &AnalyzeArgs) -> Result<()> {
    if a.record.is_none() && a.position.is_none() && a.momentum.is_none() {
        return Err(Error::Config(
            "analyze needs at least one of --record, --position, --momentum".into(),
        ));
    }
    let dir = out_dir(g, "runs/analyze")?;
    let params = reference_params(a.lambda);
    let mut fits = serde_json::Map::new();
    if let Some(path) = &a.position {
        let h = io::read_distribution_csv(path, a.samples)?;
        let lo = a.position_fit_min.unwrap_or(f64::NEG_INFINITY);
        let options = FitOptions::range(lo, f64::INFINITY);
        fits.insert(
            "position".into(),
            serde_json::to_value(fit_exponential_with(&h, &options)?)?,
        );
        if a.two_exponential {
            let two = fit_two_exponential_with(&h, &options)?;
            fits.insert("position_two_exponential".into(), serde_json::to_value(two)?);
        }
    }
    if let Some(path) = &a.momentum {
        let h = io::read_distribution_csv(path, a.samples)?;
        fits.insert("momentum".into(), serde_json::to_value(ProfileComparison::of(&h)?)?);
    }
    io::write_json_atomic(&dir.join("fits.json"), &fits)?;

    let mut scalars = json!({
        "lambda": a.lambda,
        "window_class": classify_window(a.lambda, &params).as_str(),
    });
    if let Some(path) = &a.record {
        let rec = io::read_record_csv(path)?;
        let (d, r2) = diffusion_fit(&rec, a.transient_periods)?;
        scalars["D"] = json!(d);
        scalars["D_r_squared"] = json!(r2);
        scalars["eta"] = json!(boltzmann_eta(&rec).last());
        let scales = theoretical_scales(&params, d.max(0.0))?;
        scalars["t_break"] = json!(scales.t_break);
        scalars["loc_length"] = json!(scales.loc_length);
        scalars["loc_length_measured"] = json!(scales.loc_length_measured);
        scalars["order_of_magnitude"] = json!(scales.order_of_magnitude);
    }
    io::write_json_atomic(&dir.join("scalars.json"), &scalars)?;
    println!("{}", serde_json::to_string_pretty(&scalars)?);
    Ok(())
}

#[derive(Args, Debug)]
pub struct ExperimentArgs {
    /// One of fig1a, fig1b, fig2, fig3, fig4, fig5. Optional when --config is given.
    pub preset: Option<String>,
    /// Shorter runs on coarser grids.
    #[arg(long)]
    pub reduced: bool,
}

fn resolve(g: &GlobalOpts, name: Option<&str>, fallback: &str, reduce: bool) -> Result<ExperimentConfig> {
    let mut cfg = match (&g.config, name) {
        (Some(path), _) => config_from_json(&read_text(path)?)?,
        (None, Some(name)) => preset(name)?,
        (None, None) => preset(fallback)?,
    };
    if reduce {
        cfg = reduced(cfg);
    }
    if let Some(seed) = g.seed {
        cfg.ensemble.seed = seed;
    }
    if let Some(dir) = &g.out_dir {
        cfg.outputs = dir.clone();
    }
    Ok(cfg)
}

pub fn experiment(g: &GlobalOpts, a: &ExperimentArgs) -> Result<()> {
    if a.preset.is_none() && g.config.is_none() {
        return Err(Error::Config("experiment needs a preset name or --config".into()));
    }
    let cfg = resolve(g, a.preset.as_deref(), "fig2", a.reduced)?;
    let manifest = run_experiment(&cfg)?;
    log::info!(
        "{}: {} files in {} ({:.1} s)",
        manifest.name,
        manifest.files.len(),
        cfg.outputs.display(),
        manifest.wall_time_s
    );
    Ok(())
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    /// Modulation strengths (comma separated); defaults to 0.05, 0.10, ..., 1.40.
    #[arg(long, value_delimiter = ',')]
    pub lambdas: Vec<f64>,
    /// Shorter runs on coarser grids.
    #[arg(long)]
    pub reduced: bool,
}

pub fn sweep(g: &GlobalOpts, a: &SweepArgs) -> Result<()> {
    let mut cfg = resolve(g, None, "fig5", a.reduced)?;
    cfg.runs = RunSelection {
        sweep: true,
        ..RunSelection::default()
    };
    cfg.sweep_lambdas = if a.lambdas.is_empty() {
        sweep_grid()
    } else {
        a.lambdas.clone()
    };
    if g.out_dir.is_none() && g.config.is_none() {
        cfg.outputs = PathBuf::from("runs/sweep");
    }
    let manifest = run_experiment(&cfg)?;
    let failures = manifest.summary["sweep_failures"].as_u64().unwrap_or(0);
    if failures > 0 {
        log::warn!("{failures} sweep points failed; see the error column of sweep.csv");
    }
    Ok(())
}
