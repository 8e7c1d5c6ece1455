//! Python bindings. Long-running calls release the interpreter lock.

use pyo3::create_exception;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use fermi_core::classical::{poincare_section, propagate_ensemble, sample_gaussian, IntegratorConfig, PhaseState};
use fermi_core::diagnostics::{
    classify_window, diffusion_fit, fit_exponential_with, fit_gaussian_with, fit_two_exponential_with,
    saturation_ratio, FitOptions, Histogram, TimeSeriesRecord,
};
use fermi_core::experiments::{config_from_json, preset as core_preset, run_experiment as core_run, ProfileComparison};
use fermi_core::lyapunov::{lyapunov_exponent, LyapunovConfig};
use fermi_core::potential::PotentialSpec;
use fermi_core::quantum::{init_gaussian, momentum_distribution, position_distribution, propagate, GridConfig};
use fermi_core::scaling::{to_dimensionless, window_bounds, DimensionlessParams, PhysicalParams};
use fermi_core::standard_map::diffusion_coefficient;
use fermi_core::Error;

create_exception!(fermi, ConfigError, PyValueError);
create_exception!(fermi, NumericalError, PyRuntimeError);

fn to_py(e: Error) -> PyErr {
    if e.is_numerical() {
        NumericalError::new_err(e.to_string())
    } else {
        ConfigError::new_err(e.to_string())
    }
}

fn json_to_py<'py>(py: Python<'py>, value: &impl serde::Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn json_from_py(obj: &Bound<'_, PyAny>) -> PyResult<String> {
    if let Ok(s) = obj.extract::<String>() {
        return Ok(s);
    }
    obj.py().import("json")?.call_method1("dumps", (obj,))?.extract()
}

/// Reduced model parameters.
#[pyclass(frozen, get_all, from_py_object)]
#[derive(Clone, Copy)]
struct Params {
    v0: f64,
    kappa: f64,
    lambda_mod: f64,
    kbar: f64,
}

impl From<DimensionlessParams> for Params {
    fn from(d: DimensionlessParams) -> Self {
        Params {
            v0: d.v0,
            kappa: d.kappa,
            lambda_mod: d.lambda_mod,
            kbar: d.kbar,
        }
    }
}

impl Params {
    fn core(&self) -> DimensionlessParams {
        DimensionlessParams {
            v0: self.v0,
            kappa: self.kappa,
            lambda_mod: self.lambda_mod,
            kbar: self.kbar,
        }
    }
}

#[pymethods]
impl Params {
    #[new]
    #[pyo3(signature = (v0=60.0, kappa=0.5, lambda_mod=0.0, kbar=4.0))]
    fn new(v0: f64, kappa: f64, lambda_mod: f64, kbar: f64) -> PyResult<Self> {
        let p = Params {
            v0,
            kappa,
            lambda_mod,
            kbar,
        };
        p.core().validate().map_err(to_py)?;
        Ok(p)
    }

    fn epsilon(&self) -> f64 {
        self.core().epsilon()
    }

    /// `(lambda_lower, lambda_upper)`.
    fn window(&self) -> (f64, f64) {
        window_bounds(&self.core())
    }

    fn window_class(&self) -> &'static str {
        classify_window(self.lambda_mod, &self.core()).as_str()
    }

    fn __repr__(&self) -> String {
        format!(
            "Params(v0={}, kappa={}, lambda_mod={}, kbar={})",
            self.v0, self.kappa, self.lambda_mod, self.kbar
        )
    }
}

/// Reduce laboratory parameters (SI units).
#[pyfunction]
#[pyo3(signature = (mass_kg, gravity_m_s2, hbar_js, drive_omega_rad_s, decay_k_inv_m, rabi_eff_rad_s=0.0, modulation_eps=0.0))]
fn convert(
    mass_kg: f64,
    gravity_m_s2: f64,
    hbar_js: f64,
    drive_omega_rad_s: f64,
    decay_k_inv_m: f64,
    rabi_eff_rad_s: f64,
    modulation_eps: f64,
) -> PyResult<Params> {
    let p = PhysicalParams {
        mass_kg,
        gravity_m_s2,
        hbar_js,
        drive_omega_rad_s,
        decay_k_inv_m,
        rabi_eff_rad_s,
        modulation_eps,
    };
    to_dimensionless(&p).map(Params::from).map_err(to_py)
}

#[pyclass(frozen)]
struct Potential {
    spec: PotentialSpec,
}

#[pymethods]
impl Potential {
    #[new]
    #[pyo3(signature = (v0=60.0, kappa=0.5, lambda_mod=0.0))]
    fn new(v0: f64, kappa: f64, lambda_mod: f64) -> Self {
        Potential {
            spec: PotentialSpec::new(v0, kappa, lambda_mod),
        }
    }

    fn potential(&self, z: f64, t: f64) -> f64 {
        self.spec.potential(z, t)
    }

    fn force(&self, z: f64, t: f64) -> f64 {
        self.spec.force(z, t)
    }

    fn energy(&self, z: f64, p: f64, t: f64) -> f64 {
        self.spec.energy(z, p, t)
    }
}

/// Stroboscopic moments, one entry per recorded drive period.
#[pyclass(frozen)]
struct Record {
    inner: TimeSeriesRecord,
}

#[pymethods]
impl Record {
    #[getter]
    fn times(&self) -> Vec<f64> {
        self.inner.times.clone()
    }
    #[getter]
    fn mean_z(&self) -> Vec<f64> {
        self.inner.mean_z.clone()
    }
    #[getter]
    fn mean_p(&self) -> Vec<f64> {
        self.inner.mean_p.clone()
    }
    #[getter]
    fn var_z(&self) -> Vec<f64> {
        self.inner.var_z.clone()
    }
    #[getter]
    fn var_p(&self) -> Vec<f64> {
        self.inner.var_p.clone()
    }
    #[getter]
    fn norm(&self) -> Vec<f64> {
        self.inner.norm.clone()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    /// `(D, r_squared)` of the linear growth of the momentum variance.
    #[pyo3(signature = (transient_periods=10))]
    fn diffusion_fit(&self, transient_periods: usize) -> PyResult<(f64, f64)> {
        diffusion_fit(&self.inner, transient_periods).map_err(to_py)
    }

    /// Late over early growth rate of the momentum variance.
    fn saturation_ratio(&self) -> PyResult<f64> {
        saturation_ratio(&self.inner).map_err(to_py)
    }
}

/// Probability density on uniform bins.
#[pyclass(frozen)]
struct Distribution {
    inner: Histogram,
}

fn options(lo: Option<f64>, hi: Option<f64>) -> FitOptions {
    match (lo, hi) {
        (None, None) => FitOptions::default(),
        (lo, hi) => FitOptions::range(lo.unwrap_or(f64::NEG_INFINITY), hi.unwrap_or(f64::INFINITY)),
    }
}

#[pymethods]
impl Distribution {
    #[new]
    #[pyo3(signature = (coords, density, samples=0))]
    fn new(coords: Vec<f64>, density: Vec<f64>, samples: usize) -> PyResult<Self> {
        if coords.len() < 2 || coords.len() != density.len() {
            return Err(ConfigError::new_err("need at least two bins and equal lengths"));
        }
        let width = coords[1] - coords[0];
        let mut inner = Histogram::from_density(coords, density, width);
        inner.samples = samples;
        inner.validate().map_err(to_py)?;
        Ok(Distribution { inner })
    }

    /// Bin samples into a counted histogram on `[lo, hi)`.
    #[staticmethod]
    fn from_samples(values: Vec<f64>, lo: f64, hi: f64, bins: usize) -> PyResult<Self> {
        Histogram::from_samples(&values, lo, hi, bins)
            .map(|inner| Distribution { inner })
            .map_err(to_py)
    }

    #[getter]
    fn coords(&self) -> Vec<f64> {
        self.inner.centers.clone()
    }
    #[getter]
    fn density(&self) -> Vec<f64> {
        self.inner.density.clone()
    }
    #[getter]
    fn bin_width(&self) -> f64 {
        self.inner.bin_width
    }

    fn total(&self) -> f64 {
        self.inner.total()
    }

    #[pyo3(signature = (lo=None, hi=None))]
    fn fit_exponential<'py>(&self, py: Python<'py>, lo: Option<f64>, hi: Option<f64>) -> PyResult<Bound<'py, PyAny>> {
        let r = fit_exponential_with(&self.inner, &options(lo, hi)).map_err(to_py)?;
        json_to_py(py, &r)
    }

    #[pyo3(signature = (lo=None, hi=None))]
    fn fit_gaussian<'py>(&self, py: Python<'py>, lo: Option<f64>, hi: Option<f64>) -> PyResult<Bound<'py, PyAny>> {
        let r = fit_gaussian_with(&self.inner, &options(lo, hi)).map_err(to_py)?;
        json_to_py(py, &r)
    }

    #[pyo3(signature = (lo=None, hi=None))]
    fn fit_two_exponential<'py>(
        &self,
        py: Python<'py>,
        lo: Option<f64>,
        hi: Option<f64>,
    ) -> PyResult<Bound<'py, PyAny>> {
        let r = fit_two_exponential_with(&self.inner, &options(lo, hi)).map_err(to_py)?;
        json_to_py(py, &r)
    }

    /// Exponential-versus-Gaussian verdict with both fits.
    fn profile<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        let r = ProfileComparison::of(&self.inner).map_err(to_py)?;
        json_to_py(py, &r)
    }
}

/// Propagate a Gaussian classical ensemble and return its stroboscopic record.
#[pyfunction]
#[pyo3(signature = (lambda_mod, t_final, n=2000, center_z=20.0, center_p=0.0, width_z=2.0, width_p=1.0, seed=1, steps_per_period=2000))]
#[allow(clippy::too_many_arguments)]
fn classical_ensemble(
    py: Python<'_>,
    lambda_mod: f64,
    t_final: f64,
    n: usize,
    center_z: f64,
    center_p: f64,
    width_z: f64,
    width_p: f64,
    seed: u64,
    steps_per_period: usize,
) -> PyResult<Record> {
    let cfg = IntegratorConfig::with_steps(steps_per_period).map_err(to_py)?;
    let spec = PotentialSpec::new(60.0, 0.5, lambda_mod);
    py.detach(|| {
        let e = sample_gaussian(PhaseState::new(center_z, center_p), width_z, width_p, n, seed)?;
        propagate_ensemble(&e, t_final, &cfg, &spec, 1)
    })
    .map(|(inner, _)| Record { inner })
    .map_err(to_py)
}

/// Maximal Lyapunov exponent (per unit time) of one trajectory.
#[pyfunction]
#[pyo3(signature = (z, p, lambda_mod, n_periods=10_000, d0=1e-8))]
fn lyapunov(py: Python<'_>, z: f64, p: f64, lambda_mod: f64, n_periods: usize, d0: f64) -> PyResult<f64> {
    let cfg = LyapunovConfig {
        n_periods,
        d0,
        ..LyapunovConfig::default()
    };
    let spec = PotentialSpec::new(60.0, 0.5, lambda_mod);
    py.detach(|| lyapunov_exponent(PhaseState::new(z, p), &cfg, &IntegratorConfig::default(), &spec))
        .map(|r| r.exponent)
        .map_err(to_py)
}

/// Stroboscopic `(z, p)` samples at whole drive periods.
#[pyfunction]
#[pyo3(signature = (z, p, lambda_mod, n_periods=1000))]
fn poincare(py: Python<'_>, z: f64, p: f64, lambda_mod: f64, n_periods: usize) -> PyResult<Vec<(f64, f64)>> {
    let spec = PotentialSpec::new(60.0, 0.5, lambda_mod);
    py.detach(|| poincare_section(PhaseState::new(z, p), n_periods, &IntegratorConfig::default(), &spec))
        .map(|pts| pts.into_iter().map(|s| (s.z, s.p)).collect())
        .map_err(to_py)
}

/// `(D_measured, D_quasilinear)` of the standard map.
#[pyfunction]
#[pyo3(signature = (k, n_orbits=10_000, n_steps=1000, seed=1))]
fn standard_map_diffusion(py: Python<'_>, k: f64, n_orbits: usize, n_steps: usize, seed: u64) -> PyResult<(f64, f64)> {
    py.detach(|| diffusion_coefficient(k, n_orbits, n_steps, seed))
        .map(|e| (e.d_measured, e.d_ql))
        .map_err(to_py)
}

/// Propagate a minimum-uncertainty packet. Returns the record, the final
/// position and momentum distributions, and the absorbed probability.
#[pyfunction]
#[pyo3(signature = (lambda_mod, t_final, center_z=20.0, center_p=0.0, width_z=2.0, kbar=4.0, z_max=800.0, n_points=16384, absorber_width=50.0))]
#[allow(clippy::too_many_arguments)]
fn quantum_packet(
    py: Python<'_>,
    lambda_mod: f64,
    t_final: f64,
    center_z: f64,
    center_p: f64,
    width_z: f64,
    kbar: f64,
    z_max: f64,
    n_points: usize,
    absorber_width: f64,
) -> PyResult<(Record, Distribution, Distribution, f64)> {
    let grid = GridConfig {
        z_max,
        n_points,
        absorber_width,
        ..GridConfig::default()
    };
    let spec = PotentialSpec::new(60.0, 0.5, lambda_mod);
    let (psi, rec) = py
        .detach(|| {
            let psi = init_gaussian(center_z, center_p, width_z, &grid, kbar)?;
            propagate(psi, t_final, &grid, &spec, kbar, 1)
        })
        .map_err(to_py)?;
    Ok((
        Record { inner: rec },
        Distribution {
            inner: position_distribution(&psi),
        },
        Distribution {
            inner: momentum_distribution(&psi, kbar),
        },
        psi.norm_lost,
    ))
}

/// Resolved configuration of a named preset.
#[pyfunction]
fn preset<'py>(py: Python<'py>, name: &str) -> PyResult<Bound<'py, PyAny>> {
    let cfg = core_preset(name).map_err(to_py)?;
    json_to_py(py, &cfg)
}

/// Run a configuration (dict or JSON text, or a manifest) and return the manifest.
#[pyfunction]
fn run_experiment<'py>(py: Python<'py>, config: &Bound<'py, PyAny>) -> PyResult<Bound<'py, PyDict>> {
    let cfg = config_from_json(&json_from_py(config)?).map_err(to_py)?;
    let manifest = py.detach(|| core_run(&cfg)).map_err(to_py)?;
    Ok(json_to_py(py, &manifest)?.cast_into::<PyDict>()?)
}

#[pymodule]
fn fermi(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("ConfigError", m.py().get_type::<ConfigError>())?;
    m.add("NumericalError", m.py().get_type::<NumericalError>())?;
    m.add("DRIVE_PERIOD", fermi_core::DRIVE_PERIOD)?;
    m.add_class::<Params>()?;
    m.add_class::<Potential>()?;
    m.add_class::<Record>()?;
    m.add_class::<Distribution>()?;
    m.add_function(wrap_pyfunction!(convert, m)?)?;
    m.add_function(wrap_pyfunction!(classical_ensemble, m)?)?;
    m.add_function(wrap_pyfunction!(lyapunov, m)?)?;
    m.add_function(wrap_pyfunction!(poincare, m)?)?;
    m.add_function(wrap_pyfunction!(standard_map_diffusion, m)?)?;
    m.add_function(wrap_pyfunction!(quantum_packet, m)?)?;
    m.add_function(wrap_pyfunction!(preset, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
