//! Runs a validated configuration and collects its [`RunRecord`].

use std::f64::consts::PI;
use std::time::Instant;

use crate::config::{ScenarioConfig, ScenarioKind, SnapshotPolicy};
use crate::correspondence::build_kernel;
use crate::error::{Error, Result};
use crate::evolution::{
    characteristic_time, dispersion, dispersion_sweep, llia_amplitude_bound, phase_divergence_experiment, step_linear,
    Stepper,
};
use crate::filament::FilamentState;
use crate::induction::{biot_savart_velocity_with, effective_log_factor, lia_velocity, BiotSavartOptions, Curve3D};
use crate::observables::{
    commutator_check, de_broglie_check, energy, hamiltonian_expectation, EnergyMode, ObservableSet,
};
use crate::output::{RunRecord, Snapshot};
use crate::par::Execution;
use crate::spectral::Spectral;

const OBSERVABLE_COLUMNS: [&str; 7] = ["t", "V", "p_z", "L_z", "H", "hbar_eff", "m_eff"];

pub fn run_scenario(config: &ScenarioConfig) -> Result<RunRecord> {
    let started = Instant::now();
    let mut record = match config.scenario {
        ScenarioKind::Evolve => evolve(config),
        ScenarioKind::Dispersion => dispersion_table(config),
        ScenarioKind::Validity => validity(config),
        ScenarioKind::Observables => observables(config),
        ScenarioKind::Propagate => propagate(config),
        ScenarioKind::BiotSavartCompare => biot_savart_compare(config),
        ScenarioKind::PhaseDivergence => phase_divergence(config),
    }
    .map_err(|source| Error::Scenario {
        context: format!("scenario `{}`", config.scenario.as_str()),
        source: Box::new(source),
    })?;
    record.wall_clock_seconds = started.elapsed().as_secs_f64();
    Ok(record)
}

fn observable_row(set: &ObservableSet) -> Vec<f64> {
    vec![set.t, set.volume, set.p_z, set.l_z, set.energy, set.hbar_eff, set.m_eff]
}

fn keep(step: usize, last: usize, every: usize) -> bool {
    step.is_multiple_of(every) || step == last
}

/// Largest change of `values` relative to `max(|first|, floor)`, or the
/// absolute change when both are zero.
fn drift(values: &[f64], floor: f64) -> f64 {
    let first = values.first().copied().unwrap_or(0.0);
    let scale = first.abs().max(floor);
    let scale = if scale == 0.0 { 1.0 } else { scale };
    values.iter().map(|v| (v - first).abs()).fold(0.0, f64::max) / scale
}

/// Momentum and angular momentum of a packet centred on zero are themselves
/// near zero, so their drifts are measured against one quantum: hbar_eff k_1
/// and hbar_eff.
fn record_drifts(record: &mut RunRecord, length: f64) {
    let hbar = record
        .column("hbar_eff")
        .and_then(|h| h.first().copied())
        .unwrap_or(0.0);
    let floors = [
        ("V", "drift_V", 0.0),
        ("p_z", "drift_p_z", hbar * 2.0 * std::f64::consts::PI / length),
        ("L_z", "drift_L_z", hbar),
        ("H", "drift_H", 0.0),
    ];
    for (column, key, floor) in floors {
        if let Some(values) = record.column(column) {
            record.set(key, drift(&values, floor));
        }
    }
}

fn evolve(config: &ScenarioConfig) -> Result<RunRecord> {
    let solver = config.solver()?;
    let params = &config.fluid;
    let initial = config.initial_state()?;
    let mut record = RunRecord::new(config.clone(), &OBSERVABLE_COLUMNS);
    let out = &config.output;

    let stepper = Stepper::new(initial.grid(), params, solver);
    let mut state = initial;
    for step in 0..=solver.steps {
        if step > 0 {
            state = stepper.step(&state, step)?;
        }
        if keep(step, solver.steps, out.every) {
            record.push_row(observable_row(&ObservableSet::measure(&state, params, out.energy)?));
            let snap = match out.snapshots {
                SnapshotPolicy::None => false,
                SnapshotPolicy::Final => step == solver.steps,
                SnapshotPolicy::Every => true,
            };
            if snap {
                record.snapshots.push(Snapshot {
                    step,
                    state: state.clone(),
                });
            }
        }
    }
    record.set("final_time", state.time());
    record_drifts(&mut record, state.grid().length());
    Ok(record)
}

fn dispersion_table(config: &ScenarioConfig) -> Result<RunRecord> {
    let spec = config.dispersion.expect("validated");
    let mut record = RunRecord::new(config.clone(), &["k", "omega_n", "omega_l"]);
    for p in dispersion_sweep(spec.amplitude, &spec.wavenumbers(), &config.fluid, Execution::default())? {
        record.push_row(vec![p.k, p.omega_nonlinear, p.omega_linear]);
    }
    record.set("amplitude", spec.amplitude);
    Ok(record)
}

fn validity(config: &ScenarioConfig) -> Result<RunRecord> {
    let spec = config.validity.expect("validated");
    let params = &config.fluid;
    let t0 = characteristic_time(spec.amplitude, spec.k, params)?;
    let bound = llia_amplitude_bound(spec.k, spec.horizon, params)?;
    let d = dispersion(spec.amplitude, spec.k, params)?;
    let mut record = RunRecord::new(
        config.clone(),
        &["amplitude", "k", "horizon", "characteristic_time", "amplitude_bound"],
    );
    record.push_row(vec![spec.amplitude, spec.k, spec.horizon, t0, bound]);
    record.set("characteristic_time", t0);
    record.set("amplitude_bound", bound);
    record.set("omega_l", d.omega_linear);
    record.set("omega_n", d.omega_nonlinear);
    record.set("amplitude_within_bound", spec.amplitude < bound);
    Ok(record)
}

fn observables(config: &ScenarioConfig) -> Result<RunRecord> {
    let params = &config.fluid;
    let state = config.initial_state()?;
    let set = ObservableSet::measure(&state, params, config.output.energy)?;
    let mut record = RunRecord::new(config.clone(), &OBSERVABLE_COLUMNS);
    record.push_row(observable_row(&set));

    record.set("energy_lia", energy(&state, params, EnergyMode::Lia));
    record.set("energy_llia", energy(&state, params, EnergyMode::Llia));
    record.set("lz_plus_hbar", set.l_z + set.hbar_eff);
    record.set("lia_coefficient", params.lia_coefficient());
    record.set("commutator_deviation", commutator_check(&state, params));
    // z psi is only smooth across the periodic seam when psi vanishes there
    let peak = state.psi().iter().map(|c| c.norm()).fold(0.0, f64::max);
    let seam = state.psi()[0].norm().max(state.psi()[state.psi().len() - 1].norm());
    record.set("seam_amplitude_ratio", if peak > 0.0 { seam / peak } else { 0.0 });
    if set.volume > 0.0 {
        record.set("hbar_over_two_mass", set.hbar_eff / (2.0 * set.m_eff));
        record.set("hamiltonian_expectation", hamiltonian_expectation(&state, params)?);
    }
    match de_broglie_check(&state, params) {
        Ok(c) => {
            record.set("de_broglie_gap", c.gap);
            record.set("free_particle_energy", c.momentum * c.momentum / (2.0 * set.m_eff));
        }
        Err(Error::NotSingleMode { fraction }) => {
            record.set("dominant_mode_fraction", fraction);
        }
        Err(e) => return Err(e),
    }
    Ok(record)
}

fn propagate(config: &ScenarioConfig) -> Result<RunRecord> {
    let solver = config.solver()?;
    let params = &config.fluid;
    let slices = config.propagate.expect("validated").slices;
    let initial = config.initial_state()?;
    let kernel = build_kernel(*initial.grid(), solver.dt, params, initial.volume(), slices)?;

    let mut columns = OBSERVABLE_COLUMNS.to_vec();
    columns.push("deviation");
    let mut record = RunRecord::new(config.clone(), &columns);
    let energy_mode = config.output.energy;
    let scale = initial
        .psi()
        .iter()
        .map(|c| c.norm())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);

    let mut by_kernel = initial.clone();
    let mut by_spectrum = initial;
    for step in 0..=solver.steps {
        if step > 0 {
            let psi = kernel.apply(by_kernel.psi());
            by_kernel = FilamentState::new(*by_kernel.grid(), psi, by_kernel.time() + solver.dt)?;
            by_spectrum = step_linear(&by_spectrum, params, solver.dt);
        }
        if keep(step, solver.steps, config.output.every) {
            let deviation = by_kernel
                .psi()
                .iter()
                .zip(by_spectrum.psi())
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max)
                / scale;
            let mut row = observable_row(&ObservableSet::measure(&by_kernel, params, energy_mode)?);
            row.push(deviation);
            record.push_row(row);
        }
    }
    if config.output.snapshots != SnapshotPolicy::None {
        record.snapshots.push(Snapshot {
            step: solver.steps,
            state: by_kernel,
        });
    }

    let grid = *kernel.grid();
    let band = (grid.points() / 3) as i64;
    let c = params.lia_coefficient();
    let eigenphase_error = (-band..=band)
        .map(|m| {
            let k = grid.wavenumber(m);
            let expected = num_complex::Complex64::from_polar(1.0, -c * k * k * solver.dt);
            (kernel.mode_eigenvalue(m) - expected).norm()
        })
        .fold(0.0, f64::max);
    record.set("slices", slices as i64);
    record.set("unitarity_defect", kernel.unitarity_defect());
    record.set("eigenphase_error", eigenphase_error);
    record.set(
        "max_deviation",
        record
            .column("deviation")
            .unwrap_or_default()
            .into_iter()
            .fold(0.0, f64::max),
    );
    record_drifts(&mut record, grid.length());
    Ok(record)
}

fn dominant_wavenumber(state: &FilamentState) -> f64 {
    let spectral = Spectral::for_grid(state.grid());
    let coeffs = spectral.forward(state.psi());
    let bin = (0..coeffs.len())
        .max_by(|&a, &b| coeffs[a].norm_sqr().total_cmp(&coeffs[b].norm_sqr()))
        .unwrap_or(0);
    spectral.wavenumbers()[bin].abs()
}

fn biot_savart_compare(config: &ScenarioConfig) -> Result<RunRecord> {
    let params = &config.fluid;
    let state = config.initial_state()?;
    let spec = config.biot_savart.unwrap_or_default();
    let opts = BiotSavartOptions {
        images: spec.images,
        local_segments: spec.local_segments,
        execution: Execution::default(),
    };
    let curve = Curve3D::from_state(&state);
    let bs = biot_savart_velocity_with(&curve, params, opts)?;
    let lia = lia_velocity(&state, params);

    let mut record = RunRecord::new(
        config.clone(),
        &["z", "bs_x", "bs_y", "bs_z", "lia_x", "lia_y", "lia_z", "cosine"],
    );
    for (j, (b, l)) in bs.velocities.iter().zip(&lia.velocities).enumerate() {
        let dot = b[0] * l[0] + b[1] * l[1] + b[2] * l[2];
        let nb = (b[0] * b[0] + b[1] * b[1] + b[2] * b[2]).sqrt();
        let nl = (l[0] * l[0] + l[1] * l[1] + l[2] * l[2]).sqrt();
        let cosine = if nb == 0.0 || nl == 0.0 { 1.0 } else { dot / (nb * nl) };
        record.push_row(vec![state.grid().z(j), b[0], b[1], b[2], l[0], l[1], l[2], cosine]);
    }
    let k = dominant_wavenumber(&state);
    let lambda = effective_log_factor(&state, &bs, params, k);
    let reference = (1.0 / (k * params.core_radius)).ln();
    record.set("k", k);
    record.set("min_cosine", bs.min_cosine_similarity(&lia));
    record.set("effective_log_factor", lambda);
    record.set("reference_log_factor", reference);
    record.set("log_factor_ratio", lambda / reference);
    Ok(record)
}

fn phase_divergence(config: &ScenarioConfig) -> Result<RunRecord> {
    let solver = config.solver()?;
    let params = &config.fluid;
    let grid = config.grid()?;
    let spec = config
        .initial
        .as_ref()
        .and_then(|i| i.kelvin_spec())
        .expect("validated");
    let series = phase_divergence_experiment(spec, grid, params, solver)?;

    let k = grid.wavenumber(spec.mode).abs();
    let d = dispersion(spec.amplitude, k, params)?;
    let gap_rate = d.omega_linear - d.omega_nonlinear;
    let mut record = RunRecord::new(
        config.clone(),
        &["t", "phase_l", "phase_n", "difference", "predicted_difference"],
    );
    for (step, p) in series.iter().enumerate() {
        if keep(step, series.len() - 1, config.output.every) {
            record.push_row(vec![
                p.t,
                p.phase_linear,
                p.phase_nonlinear,
                p.difference(),
                gap_rate * p.t,
            ]);
        }
    }
    record.set("omega_l", d.omega_linear);
    record.set("omega_n", d.omega_nonlinear);
    if let Ok(t0) = characteristic_time(spec.amplitude, k, params) {
        record.set("characteristic_time", t0);
    }
    // first crossing of pi/2, linearly interpolated between samples
    if let Some(i) = series.iter().position(|p| p.difference() >= 0.5 * PI) {
        let t = if i == 0 {
            0.0
        } else {
            let (a, b) = (&series[i - 1], &series[i]);
            a.t + (0.5 * PI - a.difference()) / (b.difference() - a.difference()) * (b.t - a.t)
        };
        record.set("crossing_time", t);
    }
    Ok(record)
}
