//! Scenario configuration files.
//!
//! A configuration is a TOML document. Top-level `scenario` names the run
//! (it may be left out when the command line supplies it); every other
//! concern lives in its own table:
//!
//! ```toml
//! scenario = "evolve"
//!
//! [fluid]            # optional; defaults to preset = "unit"
//! preset = "helium4" # "unit" or "helium4"; explicit keys override it
//! density = 145.0
//!
//! [grid]
//! points = 64
//! length = 6.283185307179586
//!
//! [initial]
//! kind = "kelvin"    # kelvin | wavepacket | straight | file
//! amplitude = 0.1
//! mode = 1
//!
//! [solver]
//! dt = 1e-3
//! steps = 1000
//! scheme = "linear-spectral"   # or "nonlinear-rk4"
//!
//! [output]
//! every = 10         # keep every 10th step (the last step is always kept)
//! snapshots = "final"  # none | final | every
//! ```
//!
//! Scenario-specific tables are `[dispersion]`, `[validity]`, `[propagate]`
//! and `[biot_savart]`. Unknown keys anywhere are rejected, and every
//! numerical constraint is checked at load time.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::correspondence::{check_kernel_resolution, make_wavepacket, WavepacketSpec};
use crate::error::{Error, Result};
use crate::evolution::{nonlinear_stable_dt, Scheme, SolverConfig};
use crate::filament::{make_kelvin_wave, FilamentState, FluidParams, KelvinWaveSpec, ZGrid};
use crate::observables::EnergyMode;
use crate::output::read_snapshot;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    Evolve,
    Dispersion,
    Validity,
    Observables,
    Propagate,
    BiotSavartCompare,
    PhaseDivergence,
}

impl ScenarioKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioKind::Evolve => "evolve",
            ScenarioKind::Dispersion => "dispersion",
            ScenarioKind::Validity => "validity",
            ScenarioKind::Observables => "observables",
            ScenarioKind::Propagate => "propagate",
            ScenarioKind::BiotSavartCompare => "biot-savart-compare",
            ScenarioKind::PhaseDivergence => "phase-divergence",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FluidPreset {
    Unit,
    Helium4,
}

#[derive(Clone, Copy, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FluidSection {
    preset: Option<FluidPreset>,
    circulation: Option<f64>,
    density: Option<f64>,
    ln_epsilon: Option<f64>,
    core_radius: Option<f64>,
}

impl FluidSection {
    fn resolve(self) -> FluidParams {
        let base = match self.preset.unwrap_or(FluidPreset::Unit) {
            FluidPreset::Unit => FluidParams::unit(),
            FluidPreset::Helium4 => FluidParams::helium4(),
        };
        FluidParams {
            circulation: self.circulation.unwrap_or(base.circulation),
            density: self.density.unwrap_or(base.density),
            ln_epsilon: self.ln_epsilon.unwrap_or(base.ln_epsilon),
            core_radius: self.core_radius.unwrap_or(base.core_radius),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub points: usize,
    pub length: f64,
}

impl GridSpec {
    pub fn grid(&self) -> Result<ZGrid> {
        ZGrid::new(self.points, self.length)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialCondition {
    Kelvin {
        amplitude: f64,
        mode: i64,
        #[serde(default)]
        phase: f64,
    },
    Wavepacket {
        center: f64,
        width: f64,
        #[serde(default)]
        carrier: i64,
        #[serde(default = "one")]
        amplitude: f64,
    },
    Straight,
    /// A snapshot file as written by this tool (`z,re,im` columns).
    File {
        path: PathBuf,
    },
}

fn one() -> f64 {
    1.0
}

impl InitialCondition {
    pub fn build(&self, grid: ZGrid) -> Result<FilamentState> {
        match self {
            InitialCondition::Kelvin { amplitude, mode, phase } => {
                make_kelvin_wave(KelvinWaveSpec::new(*amplitude, *mode, *phase), grid)
            }
            InitialCondition::Wavepacket {
                center,
                width,
                carrier,
                amplitude,
            } => make_wavepacket(
                WavepacketSpec {
                    center: *center,
                    width: *width,
                    carrier: *carrier,
                    amplitude: *amplitude,
                },
                grid,
            ),
            InitialCondition::Straight => Ok(FilamentState::straight(grid)),
            InitialCondition::File { path } => read_snapshot(path, grid),
        }
    }

    pub fn kelvin_spec(&self) -> Option<KelvinWaveSpec> {
        match self {
            InitialCondition::Kelvin { amplitude, mode, phase } => Some(KelvinWaveSpec::new(*amplitude, *mode, *phase)),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SnapshotPolicy {
    #[default]
    None,
    Final,
    /// A snapshot at every kept row.
    Every,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default = "one_step")]
    pub every: usize,
    #[serde(default)]
    pub snapshots: SnapshotPolicy,
    #[serde(default = "default_energy")]
    pub energy: EnergyMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
}

fn one_step() -> usize {
    1
}

fn default_energy() -> EnergyMode {
    EnergyMode::Llia
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            every: 1,
            snapshots: SnapshotPolicy::None,
            energy: EnergyMode::Llia,
            dir: None,
        }
    }
}

/// Wavenumbers `k_min..=k_max` in `count` equal steps at fixed amplitude.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DispersionSpec {
    pub amplitude: f64,
    pub k_min: f64,
    pub k_max: f64,
    pub count: usize,
}

impl DispersionSpec {
    pub fn wavenumbers(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.k_min];
        }
        let step = (self.k_max - self.k_min) / (self.count - 1) as f64;
        (0..self.count).map(|i| self.k_min + step * i as f64).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValiditySpec {
    pub amplitude: f64,
    pub k: f64,
    /// Time horizon for the amplitude bound.
    pub horizon: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropagateSpec {
    pub slices: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BiotSavartSpec {
    #[serde(default = "one_step")]
    pub images: usize,
    #[serde(default = "four")]
    pub local_segments: usize,
}

fn four() -> usize {
    4
}

impl Default for BiotSavartSpec {
    fn default() -> Self {
        Self {
            images: 1,
            local_segments: 4,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    scenario: Option<ScenarioKind>,
    #[serde(default)]
    fluid: FluidSection,
    grid: Option<GridSpec>,
    initial: Option<InitialCondition>,
    solver: Option<SolverConfig>,
    #[serde(default)]
    output: OutputSpec,
    dispersion: Option<DispersionSpec>,
    validity: Option<ValiditySpec>,
    propagate: Option<PropagateSpec>,
    biot_savart: Option<BiotSavartSpec>,
}

/// A fully resolved and validated configuration.
///
/// Serializing it gives a document that loads back to the same value, with
/// the fluid parameters spelled out.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScenarioConfig {
    pub scenario: ScenarioKind,
    pub fluid: FluidParams,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial: Option<InitialCondition>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverConfig>,
    pub output: OutputSpec,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dispersion: Option<DispersionSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub validity: Option<ValiditySpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub propagate: Option<PropagateSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub biot_savart: Option<BiotSavartSpec>,
}

/// Parses and validates a configuration whose `scenario` key is required.
pub fn load_config(text: &str) -> Result<ScenarioConfig> {
    load(text, None)
}

/// Parses and validates a configuration for the given scenario. A `scenario`
/// key in the document must agree with it.
pub fn load_config_for(text: &str, scenario: ScenarioKind) -> Result<ScenarioConfig> {
    load(text, Some(scenario))
}

fn load(text: &str, requested: Option<ScenarioKind>) -> Result<ScenarioConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| Error::ConfigParse(e.to_string().trim_end().to_string()))?;
    let scenario = match (raw.scenario, requested) {
        (Some(a), Some(b)) if a != b => {
            return Err(invalid(
                "scenario",
                format!("document says `{}` but `{}` was requested", a.as_str(), b.as_str()),
            ))
        }
        (Some(a), _) => a,
        (None, Some(b)) => b,
        (None, None) => return Err(invalid("scenario", "missing; name the scenario to run")),
    };
    let config = ScenarioConfig {
        scenario,
        fluid: raw.fluid.resolve(),
        grid: raw.grid,
        initial: raw.initial,
        solver: raw.solver,
        output: raw.output,
        dispersion: raw.dispersion,
        validity: raw.validity,
        propagate: raw.propagate,
        biot_savart: raw.biot_savart,
    };
    config.validate()?;
    Ok(config)
}

fn invalid(field: &str, constraint: impl Into<String>) -> Error {
    Error::Validation {
        field: field.to_string(),
        constraint: constraint.into(),
    }
}

/// Attributes a module error to a config table.
fn in_section(section: &str, err: Error) -> Error {
    match err {
        Error::InvalidParameter { name, reason } => invalid(&format!("{section}.{name}"), reason),
        other => invalid(section, other.to_string()),
    }
}

fn required<'a, T>(value: &'a Option<T>, section: &str, scenario: ScenarioKind) -> Result<&'a T> {
    value.as_ref().ok_or_else(|| {
        invalid(
            section,
            format!("table is required by the `{}` scenario", scenario.as_str()),
        )
    })
}

impl ScenarioConfig {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    pub fn grid(&self) -> Result<ZGrid> {
        required(&self.grid, "grid", self.scenario)?.grid()
    }

    pub fn solver(&self) -> Result<&SolverConfig> {
        required(&self.solver, "solver", self.scenario)
    }

    /// The initial state; reads the snapshot file for `kind = "file"`.
    pub fn initial_state(&self) -> Result<FilamentState> {
        let grid = self.grid()?;
        required(&self.initial, "initial", self.scenario)?.build(grid)
    }

    fn validate(&self) -> Result<()> {
        use ScenarioKind::*;
        self.fluid.validate().map_err(|e| in_section("fluid", e))?;
        if self.output.every == 0 {
            return Err(invalid("output.every", "must be at least 1"));
        }
        let grid = match &self.grid {
            Some(g) => Some(g.grid().map_err(|e| in_section("grid", e))?),
            None => None,
        };
        if let Some(solver) = &self.solver {
            solver.validate().map_err(|e| in_section("solver", e))?;
            if solver.scheme == Scheme::NonlinearRk4 || self.scenario == PhaseDivergence {
                if let Some(g) = &grid {
                    let limit = nonlinear_stable_dt(g, &self.fluid, solver.dealias);
                    if solver.dt > limit {
                        return Err(invalid(
                            "solver.dt",
                            format!("{} exceeds the RK4 stability limit {limit:e} for this grid", solver.dt),
                        ));
                    }
                }
            }
        }

        let needs_state = matches!(
            self.scenario,
            Evolve | Observables | Propagate | BiotSavartCompare | PhaseDivergence
        );
        let mut state = None;
        if needs_state {
            let g = *required(&grid, "grid", self.scenario)?;
            let initial = required(&self.initial, "initial", self.scenario)?;
            // files are read at run time; everything else is built here to catch bad specs early
            if !matches!(initial, InitialCondition::File { .. }) {
                state = Some(initial.build(g).map_err(|e| in_section("initial", e))?);
            }
        }

        match self.scenario {
            Evolve => {
                required(&self.solver, "solver", self.scenario)?;
            }
            Observables => {}
            Dispersion => {
                let d = required(&self.dispersion, "dispersion", self.scenario)?;
                if !(d.amplitude >= 0.0 && d.amplitude.is_finite()) {
                    return Err(invalid("dispersion.amplitude", "must be >= 0 and finite"));
                }
                if !(d.k_min >= 0.0 && d.k_max >= d.k_min && d.k_max.is_finite()) {
                    return Err(invalid("dispersion.k_max", "need 0 <= k_min <= k_max, both finite"));
                }
                if d.count == 0 {
                    return Err(invalid("dispersion.count", "must be at least 1"));
                }
            }
            Validity => {
                let v = required(&self.validity, "validity", self.scenario)?;
                crate::evolution::characteristic_time(v.amplitude, v.k, &self.fluid)
                    .map_err(|e| in_section("validity", e))?;
                crate::evolution::llia_amplitude_bound(v.k, v.horizon, &self.fluid)
                    .map_err(|e| in_section("validity", e))?;
            }
            Propagate => {
                let solver = required(&self.solver, "solver", self.scenario)?;
                let p = required(&self.propagate, "propagate", self.scenario)?;
                if let (Some(g), Some(s)) = (&grid, &state) {
                    check_kernel_resolution(g, solver.dt, &self.fluid, s.volume(), p.slices)
                        .map_err(|e| in_section("propagate", e))?;
                }
            }
            BiotSavartCompare => {
                let g = grid.expect("checked above");
                let bs = self.biot_savart.unwrap_or_default();
                if 2 * bs.local_segments >= g.points() {
                    return Err(invalid(
                        "biot_savart.local_segments",
                        "window must be shorter than the grid",
                    ));
                }
                if let Some(s) = &state {
                    if s.volume() == 0.0 {
                        return Err(invalid("initial", "a straight line has no rotation to compare"));
                    }
                }
            }
            PhaseDivergence => {
                required(&self.solver, "solver", self.scenario)?;
                let initial = required(&self.initial, "initial", self.scenario)?;
                if initial.kelvin_spec().is_none() {
                    return Err(invalid("initial.kind", "phase divergence needs a kelvin wave"));
                }
            }
        }
        Ok(())
    }
}
