//! Derived quantities: widths, diffusion constants, the effective Boltzmann
//! temperature, distribution fits, theoretical scales and window classification.

mod envelope;
mod fit;
mod histogram;
mod record;
mod scales;

pub use envelope::{envelope, envelope_periods, EnvelopePoint, DEFAULT_ENVELOPE_PERIODS};
pub use fit::{
    fit_exponential, fit_exponential_with, fit_gaussian, fit_gaussian_with, fit_two_exponential,
    fit_two_exponential_with, linear_fit, DensityFloor, FitModel, FitOptions, FitReport, LineFit, ProfileVerdict,
    TwoExponentialParams,
};
pub use histogram::Histogram;
pub use record::{Moments, TimeSeriesRecord};
pub use scales::{
    boltzmann_eta, classify_window, diffusion_fit, saturation_ratio, theoretical_scales, EtaSample, TheoreticalScales,
    WindowClass,
};
