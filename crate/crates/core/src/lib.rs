//! Classical and quantum dynamics of the atom-optics Fermi accelerator: an atom
//! falling under gravity onto an evanescent-wave mirror whose position (or
//! intensity) is modulated periodically in time.
//!
//! All dynamics run in reduced units: positions in `g/ω²`, momenta in `mg/ω`,
//! time in drive phase `ωt`. The model is fixed by four numbers, the mirror
//! strength `V0`, its steepness `κ`, the modulation depth `λ` and the effective
//! Planck constant `k̄` (see [`scaling`]).
//!
//! - [`potential`]: time-dependent mirror potential and force.
//! - [`classical`]: symplectic trajectories, Gaussian ensembles, Poincaré sections.
//! - [`lyapunov`]: maximal Lyapunov exponent by two-trajectory renormalization.
//! - [`standard_map`]: the Chirikov–Taylor map approximation and its diffusion.
//! - [`quantum`]: split-operator propagation of the driven Schrödinger equation.
//! - [`diagnostics`]: widths, diffusion fits, distribution fits, window classification.
//! - [`experiments`]: reproducible presets and sweeps with CSV/JSON outputs.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classical;
pub mod diagnostics;
mod error;
pub mod experiments;
pub mod io;
pub mod lyapunov;
pub mod potential;
pub mod quantum;
pub mod scaling;
pub mod standard_map;

pub use error::{Error, Result};

/// One drive period in reduced time.
pub const DRIVE_PERIOD: f64 = 2.0 * std::f64::consts::PI;
