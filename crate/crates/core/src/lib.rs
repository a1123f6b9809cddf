//! Self-induced motion of a vortex filament and its linearized,
//! Schrodinger-like description.
//!
//! The crate carries the whole chain from the regularized Biot-Savart law
//! through the local induction approximation to the linear equation
//! `i psi_t = -(Gamma ln eps / 4 pi) psi''`, together with the effective
//! quantum-mechanical observables of the line (momentum, angular momentum,
//! energy, effective Planck constant and mass) and a path-integral
//! propagator for the resulting free particle.
//!
//! Module map:
//! - [`filament`]: grid, state, Kelvin waves, volume and normalization
//! - [`induction`]: Biot-Savart sum, local kernel and its log divergence, LIA velocity
//! - [`evolution`]: linear and nonlinear steppers, dispersion, validity horizon
//! - [`observables`]: momentum, angular momentum, energy, operator identities
//! - [`correspondence`]: plane waves, propagator kernels, wavepacket spreading
//! - [`config`], [`scenario`], [`output`]: the command-line surface

// `!(x > y)` is used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod correspondence;
pub mod error;
pub mod evolution;
pub mod filament;
pub mod induction;
pub mod observables;
pub mod output;
pub mod par;
pub mod quadrature;
pub mod scenario;
pub mod spectral;

pub use config::{load_config, load_config_for, ScenarioConfig, ScenarioKind};
pub use error::{Error, Result};
pub use filament::{make_kelvin_wave, FilamentState, FluidParams, KelvinWaveSpec, ZGrid};
pub use output::{write_outputs, RunRecord};
pub use par::Execution;
pub use scenario::run_scenario;
