//! Time integration of the filament on a fixed periodic z-grid.
//!
//! Two equations are evolved:
//! - the full local-induction form `i psi_t = -c (psi' / sqrt(1 + |psi'|^2))'`
//!   with classical RK4 and spectral derivatives, and
//! - its linearization `i psi_t = -c psi''`, stepped exactly in Fourier space,
//!
//! where `c = Gamma ln(eps) / 4 pi`. Helical Kelvin waves are eigenmodes of
//! both, rotating at `omega_n = c k^2 / sqrt(1 + a^2 k^2)` and
//! `omega_l = c k^2` respectively.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filament::{make_kelvin_wave, FilamentState, FluidParams, KelvinWaveSpec, ZGrid};
use crate::par::{self, Execution};
use crate::quadrature::fit_line;
use crate::spectral::Spectral;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    NonlinearRk4,
    LinearSpectral,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub dt: f64,
    pub steps: usize,
    pub scheme: Scheme,
    /// 2/3-rule on the nonlinear flux; ignored by the linear scheme.
    #[serde(default = "default_dealias")]
    pub dealias: bool,
}

fn default_dealias() -> bool {
    true
}

impl SolverConfig {
    pub fn new(dt: f64, steps: usize, scheme: Scheme) -> Result<Self> {
        let c = Self {
            dt,
            steps,
            scheme,
            dealias: true,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::invalid(
                "dt",
                format!("must be positive and finite, got {}", self.dt),
            ));
        }
        if self.steps == 0 {
            return Err(Error::invalid("steps", "must be at least 1"));
        }
        Ok(())
    }

    pub fn total_time(&self) -> f64 {
        self.dt * self.steps as f64
    }
}

/// Largest RK4 step considered stable for the nonlinear equation on `grid`.
///
/// RK4 is stable on the imaginary axis up to `|lambda dt| = 2 sqrt 2`; the
/// stiffest linearized rate is `c k_max^2` with `k_max` the highest retained
/// mode. A 0.9 safety factor is applied.
pub fn nonlinear_stable_dt(grid: &ZGrid, params: &FluidParams, dealias: bool) -> f64 {
    let top = if dealias { grid.points() / 3 } else { grid.points() / 2 };
    let k_max = grid.wavenumber(top as i64);
    0.9 * 2.0 * 2f64.sqrt() / (params.lia_coefficient() * k_max * k_max)
}

/// Exact Fourier step of the linear equation: each coefficient picks up
/// `exp(-i omega_l(k) dt)`.
pub fn step_linear(state: &FilamentState, params: &FluidParams, dt: f64) -> FilamentState {
    LinearPropagator::new(state.grid(), params, dt).apply(state)
}

/// Cached phase factors for repeated linear steps of one size.
pub struct LinearPropagator {
    spectral: Arc<Spectral>,
    factors: Vec<Complex64>,
    dt: f64,
}

impl LinearPropagator {
    pub fn new(grid: &ZGrid, params: &FluidParams, dt: f64) -> Self {
        let spectral = Spectral::for_grid(grid);
        let c = params.lia_coefficient();
        let factors = spectral
            .wavenumbers()
            .iter()
            .map(|k| Complex64::from_polar(1.0, -c * k * k * dt))
            .collect();
        Self { spectral, factors, dt }
    }

    pub fn apply(&self, state: &FilamentState) -> FilamentState {
        let mut coeffs = self.spectral.forward(state.psi());
        coeffs.iter_mut().zip(&self.factors).for_each(|(c, f)| *c *= f);
        FilamentState::from_parts_unchecked(*state.grid(), self.spectral.inverse(&coeffs), state.time() + self.dt)
    }
}

/// Right-hand side `i c (psi' / sqrt(1 + |psi'|^2))'` of the nonlinear equation.
pub struct NonlinearRhs {
    spectral: Arc<Spectral>,
    coefficient: f64,
    dealias: bool,
}

impl NonlinearRhs {
    pub fn new(grid: &ZGrid, params: &FluidParams, dealias: bool) -> Self {
        Self {
            spectral: Spectral::for_grid(grid),
            coefficient: params.lia_coefficient(),
            dealias,
        }
    }

    pub fn eval(&self, psi: &[Complex64]) -> Vec<Complex64> {
        let s = &self.spectral;
        let slope = s.derivative(psi, 1);
        let flux: Vec<Complex64> = slope.iter().map(|p| p / (1.0 + p.norm_sqr()).sqrt()).collect();
        let mut coeffs = s.forward(&flux);
        if self.dealias {
            s.dealias(&mut coeffs);
        }
        s.differentiate_spectrum(&mut coeffs, 1);
        let i_c = Complex64::new(0.0, self.coefficient);
        s.inverse(&coeffs).into_iter().map(|v| v * i_c).collect()
    }

    fn rk4(&self, psi: &[Complex64], dt: f64) -> Vec<Complex64> {
        let axpy = |base: &[Complex64], k: &[Complex64], h: f64| -> Vec<Complex64> {
            base.iter().zip(k).map(|(b, k)| b + k * h).collect()
        };
        let k1 = self.eval(psi);
        let k2 = self.eval(&axpy(psi, &k1, 0.5 * dt));
        let k3 = self.eval(&axpy(psi, &k2, 0.5 * dt));
        let k4 = self.eval(&axpy(psi, &k3, dt));
        psi.iter()
            .enumerate()
            .map(|(j, p)| p + (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]) * (dt / 6.0))
            .collect()
    }
}

/// One classical RK4 step of the nonlinear equation.
pub fn step_nonlinear(state: &FilamentState, params: &FluidParams, dt: f64, dealias: bool) -> Result<FilamentState> {
    let rhs = NonlinearRhs::new(state.grid(), params, dealias);
    advance_nonlinear(&rhs, state, dt, 1)
}

fn advance_nonlinear(rhs: &NonlinearRhs, state: &FilamentState, dt: f64, step: usize) -> Result<FilamentState> {
    let next = FilamentState::from_parts_unchecked(*state.grid(), rhs.rk4(state.psi(), dt), state.time() + dt);
    if next.is_finite() {
        Ok(next)
    } else {
        Err(Error::BlowUp { step })
    }
}

/// Reusable stepper for either scheme.
pub enum Stepper {
    Linear(LinearPropagator),
    Nonlinear { rhs: NonlinearRhs, dt: f64 },
}

impl Stepper {
    pub fn new(grid: &ZGrid, params: &FluidParams, config: &SolverConfig) -> Self {
        match config.scheme {
            Scheme::LinearSpectral => Stepper::Linear(LinearPropagator::new(grid, params, config.dt)),
            Scheme::NonlinearRk4 => Stepper::Nonlinear {
                rhs: NonlinearRhs::new(grid, params, config.dealias),
                dt: config.dt,
            },
        }
    }

    /// Advances one step; `step` is the 1-based index used in blow-up errors.
    pub fn step(&self, state: &FilamentState, step: usize) -> Result<FilamentState> {
        match self {
            Stepper::Linear(p) => Ok(p.apply(state)),
            Stepper::Nonlinear { rhs, dt } => advance_nonlinear(rhs, state, *dt, step),
        }
    }
}

/// Runs `config.steps` steps, calling `observe` on the initial state and after
/// every step. Returns the final state.
pub fn evolve<F>(
    initial: &FilamentState,
    params: &FluidParams,
    config: &SolverConfig,
    mut observe: F,
) -> Result<FilamentState>
where
    F: FnMut(usize, &FilamentState),
{
    config.validate()?;
    let stepper = Stepper::new(initial.grid(), params, config);
    let mut state = initial.clone();
    observe(0, &state);
    for step in 1..=config.steps {
        state = stepper.step(&state, step)?;
        observe(step, &state);
    }
    Ok(state)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DispersionPoint {
    pub k: f64,
    pub omega_nonlinear: f64,
    pub omega_linear: f64,
    pub amplitude: f64,
}

pub fn dispersion(a: f64, k: f64, params: &FluidParams) -> Result<DispersionPoint> {
    if !(a >= 0.0 && a.is_finite()) {
        return Err(Error::invalid("amplitude", format!("must be >= 0, got {a}")));
    }
    if !(k >= 0.0 && k.is_finite()) {
        return Err(Error::invalid("k", format!("must be >= 0, got {k}")));
    }
    let omega_linear = params.lia_coefficient() * k * k;
    Ok(DispersionPoint {
        k,
        omega_nonlinear: omega_linear / (1.0 + a * a * k * k).sqrt(),
        omega_linear,
        amplitude: a,
    })
}

/// Dispersion points for many wavenumbers at one amplitude, in input order.
pub fn dispersion_sweep(a: f64, ks: &[f64], params: &FluidParams, exec: Execution) -> Result<Vec<DispersionPoint>> {
    par::map_slice(ks, exec, |&k| dispersion(a, k, params))
        .into_iter()
        .collect()
}

/// Time for the linear and nonlinear phases of a Kelvin wave to drift apart
/// by pi/2: `2 pi^2 / (k^2 Gamma ln(eps) (1 - 1/sqrt(1 + a^2 k^2)))`.
pub fn characteristic_time(a: f64, k: f64, params: &FluidParams) -> Result<f64> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::invalid(
            "amplitude",
            format!("must be > 0 for a finite horizon, got {a}"),
        ));
    }
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::invalid(
            "k",
            format!("must be > 0 for a finite horizon, got {k}"),
        ));
    }
    let ak2 = a * a * k * k;
    // 1 - 1/sqrt(1+u) without cancellation for small u
    let gap = ak2 / ((1.0 + ak2).sqrt() * (1.0 + (1.0 + ak2).sqrt()));
    Ok(2.0 * PI * PI / (k * k * params.circulation * params.ln_epsilon * gap))
}

/// Largest amplitude whose linear/nonlinear phase gap stays below pi/2 up to `horizon`:
/// `2 pi sqrt(X - pi^2) / (k (X - 2 pi^2))` with `X = k^2 T0 Gamma ln(eps)`.
pub fn llia_amplitude_bound(k: f64, horizon: f64, params: &FluidParams) -> Result<f64> {
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::invalid("k", format!("must be > 0, got {k}")));
    }
    let x = k * k * horizon * params.circulation * params.ln_epsilon;
    let threshold = 2.0 * PI * PI;
    if !(x > threshold) {
        return Err(Error::BoundPrecondition { value: x, threshold });
    }
    Ok(2.0 * PI * (x - PI * PI).sqrt() / (k * (x - threshold)))
}

/// Follows the argument of one Fourier coefficient across steps and reports
/// the accumulated rotation angle `-(arg(t) - arg(0))`, unwrapped.
#[derive(Clone, Debug)]
pub struct PhaseTracker {
    bin: usize,
    last: f64,
    unwrapped: f64,
    origin: f64,
}

impl PhaseTracker {
    /// Tracks the bin with the largest spectral power in `state`.
    pub fn dominant(state: &FilamentState) -> Self {
        let coeffs = Spectral::for_grid(state.grid()).forward(state.psi());
        let bin = (0..coeffs.len())
            .max_by(|&a, &b| coeffs[a].norm_sqr().total_cmp(&coeffs[b].norm_sqr()))
            .unwrap_or(0);
        let arg = coeffs[bin].arg();
        Self {
            bin,
            last: arg,
            unwrapped: arg,
            origin: arg,
        }
    }

    pub fn bin(&self) -> usize {
        self.bin
    }

    pub fn update(&mut self, state: &FilamentState) -> f64 {
        let coeffs = Spectral::for_grid(state.grid()).forward(state.psi());
        let arg = coeffs[self.bin].arg();
        let mut delta = arg - self.last;
        delta -= 2.0 * PI * (delta / (2.0 * PI)).round();
        self.unwrapped += delta;
        self.last = arg;
        self.rotation()
    }

    pub fn rotation(&self) -> f64 {
        -(self.unwrapped - self.origin)
    }
}

/// Rotation frequency of the dominant mode, from a least-squares fit of the
/// unwrapped phase over the whole run.
pub fn rotation_frequency(initial: &FilamentState, params: &FluidParams, config: &SolverConfig) -> Result<f64> {
    let mut tracker = PhaseTracker::dominant(initial);
    let mut ts = Vec::with_capacity(config.steps + 1);
    let mut phases = Vec::with_capacity(config.steps + 1);
    evolve(initial, params, config, |_, s| {
        ts.push(s.time());
        phases.push(tracker.update(s));
    })?;
    Ok(fit_line(&ts, &phases).0)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhasePoint {
    pub t: f64,
    pub phase_linear: f64,
    pub phase_nonlinear: f64,
}

impl PhasePoint {
    pub fn difference(&self) -> f64 {
        self.phase_linear - self.phase_nonlinear
    }
}

/// Evolves one Kelvin wave under both equations and samples the rotation
/// angle of each after every step (including t = 0).
pub fn phase_divergence_experiment(
    spec: KelvinWaveSpec,
    grid: ZGrid,
    params: &FluidParams,
    config: &SolverConfig,
) -> Result<Vec<PhasePoint>> {
    config.validate()?;
    let initial = make_kelvin_wave(spec, grid)?;
    let linear = LinearPropagator::new(&grid, params, config.dt);
    let rhs = NonlinearRhs::new(&grid, params, config.dealias);

    let mut lin_state = initial.clone();
    let mut non_state = initial.clone();
    let mut lin_track = PhaseTracker::dominant(&initial);
    let mut non_track = lin_track.clone();

    let mut series = Vec::with_capacity(config.steps + 1);
    series.push(PhasePoint {
        t: 0.0,
        phase_linear: 0.0,
        phase_nonlinear: 0.0,
    });
    if spec.amplitude == 0.0 {
        // no dominant mode to follow; both evolutions stay the straight line
        for step in 1..=config.steps {
            series.push(PhasePoint {
                t: step as f64 * config.dt,
                phase_linear: 0.0,
                phase_nonlinear: 0.0,
            });
        }
        return Ok(series);
    }
    for step in 1..=config.steps {
        lin_state = linear.apply(&lin_state);
        non_state = advance_nonlinear(&rhs, &non_state, config.dt, step)?;
        series.push(PhasePoint {
            t: step as f64 * config.dt,
            phase_linear: lin_track.update(&lin_state),
            phase_nonlinear: non_track.update(&non_state),
        });
    }
    Ok(series)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> ZGrid {
        ZGrid::new(n, 2.0 * PI).unwrap()
    }

    fn kelvin(a: f64, m: i64, n: usize) -> FilamentState {
        make_kelvin_wave(KelvinWaveSpec::new(a, m, 0.0), grid(n)).unwrap()
    }

    fn he4() -> FluidParams {
        FluidParams {
            circulation: 9.97e-8,
            density: 145.0,
            ln_epsilon: 0.8,
            core_radius: 1e-10,
        }
    }

    #[test]
    fn linear_step_is_exact_on_kelvin_waves() {
        let p = FluidParams::unit();
        let s = kelvin(0.1, 3, 64);
        let t = 2.5;
        let out = step_linear(&s, &p, t);
        let omega = p.lia_coefficient() * 9.0;
        for (j, c) in out.psi().iter().enumerate() {
            let expect = Complex64::from_polar(0.1, 3.0 * s.grid().z(j) - omega * t);
            assert!((c - expect).norm() < 1e-15, "{j}: {c} vs {expect}");
        }
        assert_eq!(out.time(), t);
    }

    #[test]
    fn linear_step_leaves_straight_line() {
        let s = FilamentState::straight(grid(32));
        let out = step_linear(&s, &FluidParams::unit(), 0.1);
        assert!(out.psi().iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn linear_step_is_unitary() {
        let g = grid(64);
        let psi: Vec<Complex64> = (0..64)
            .map(|j| Complex64::new((j as f64 * 0.37).sin(), (j as f64 * 1.3).cos() * 0.2))
            .collect();
        let mut s = FilamentState::new(g, psi, 0.0).unwrap();
        let n0 = s.norm_sqr();
        let prop = LinearPropagator::new(&g, &FluidParams::unit(), 0.01);
        for _ in 0..100 {
            let before = s.norm_sqr();
            s = prop.apply(&s);
            assert!((s.norm_sqr() - before).abs() / before < 1e-13);
        }
        assert!((s.norm_sqr() - n0).abs() / n0 < 1e-12);
    }

    #[test]
    fn nonlinear_straight_line_is_fixed_point() {
        let s = FilamentState::straight(grid(32));
        let out = step_nonlinear(&s, &FluidParams::unit(), 1e-3, true).unwrap();
        assert!(out.psi().iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn nonlinear_kelvin_wave_rotates_at_omega_n() {
        let p = FluidParams::unit();
        let s = kelvin(0.1, 1, 64);
        let config = SolverConfig::new(1e-3, 2000, Scheme::NonlinearRk4).unwrap();
        let measured = rotation_frequency(&s, &p, &config).unwrap();
        let expect = dispersion(0.1, 1.0, &p).unwrap().omega_nonlinear;
        assert!((expect - 0.063346).abs() < 1e-6);
        assert!((measured - expect).abs() / expect < 1e-6, "{measured} vs {expect}");
    }

    #[test]
    fn small_amplitude_recovers_linear_frequency() {
        let p = FluidParams::unit();
        let s = kelvin(1e-6, 1, 32);
        let config = SolverConfig::new(1e-2, 200, Scheme::NonlinearRk4).unwrap();
        let measured = rotation_frequency(&s, &p, &config).unwrap();
        let omega_l = p.lia_coefficient();
        assert!((omega_l - 0.063662).abs() < 1e-6);
        assert!((measured - omega_l).abs() / omega_l < 1e-9);
    }

    #[test]
    fn blow_up_is_reported_with_step() {
        let p = FluidParams::unit();
        let g = grid(64);
        let psi: Vec<Complex64> = (0..64)
            .map(|j| Complex64::new(0.3 * (15.0 * g.z(j)).cos(), 0.0))
            .collect();
        let s = FilamentState::new(g, psi, 0.0).unwrap();
        // the flux is bounded, so only an overflowing step can produce infinities
        let config = SolverConfig {
            dt: 1e306,
            steps: 5,
            scheme: Scheme::NonlinearRk4,
            dealias: false,
        };
        let err = evolve(&s, &p, &config, |_, _| {}).unwrap_err();
        assert!(matches!(err, Error::BlowUp { step } if step >= 1), "{err}");
    }

    #[test]
    fn dispersion_values() {
        let d = dispersion(0.0, 5000.0, &he4()).unwrap();
        assert!((d.omega_linear - 0.158678).abs() < 1e-6, "{}", d.omega_linear);
        assert_eq!(d.omega_linear, d.omega_nonlinear);
        let d = dispersion(1e-4, 5000.0, &he4()).unwrap();
        assert!((d.omega_nonlinear - 0.141926).abs() < 1e-6, "{}", d.omega_nonlinear);
        let z = dispersion(0.3, 0.0, &he4()).unwrap();
        assert_eq!((z.omega_linear, z.omega_nonlinear), (0.0, 0.0));
        assert!(dispersion(-1.0, 1.0, &he4()).is_err());
    }

    #[test]
    fn characteristic_time_he4() {
        let t0 = characteristic_time(1e-4, 5000.0, &he4()).unwrap();
        assert!((t0 - 93.77).abs() / 93.77 < 1e-3, "{t0}");
        assert!((10.0..=100.0).contains(&t0));
        let small = characteristic_time(1e-6, 5000.0, &he4()).unwrap();
        assert!((small - 7.9e5).abs() / 7.9e5 < 0.01, "{small}");
        let mut doubled = he4();
        doubled.circulation *= 2.0;
        let half = characteristic_time(1e-4, 5000.0, &doubled).unwrap();
        assert!((half - t0 / 2.0).abs() <= 1e-15 * t0);
        assert!(characteristic_time(0.0, 5000.0, &he4()).is_err());
        assert!(characteristic_time(1e-4, 0.0, &he4()).is_err());
    }

    #[test]
    fn amplitude_bound_he4() {
        let bound = llia_amplitude_bound(5000.0, 100.0, &he4()).unwrap();
        assert!((bound - 9.629e-5).abs() / 9.629e-5 < 1e-3, "{bound}");
        assert!(bound > 1e-6 && bound < 1e-4);
        // the bound inverts the horizon formula
        let back = characteristic_time(bound, 5000.0, &he4()).unwrap();
        assert!((back - 100.0).abs() < 1e-9, "{back}");
    }

    #[test]
    fn amplitude_bound_edges() {
        let p = FluidParams::unit();
        let k = 1.0;
        let horizon_at = |x: f64| x / (k * k * p.circulation * p.ln_epsilon);
        let edge = llia_amplitude_bound(k, horizon_at(2.0 * PI * PI * (1.0 + 1e-9)), &p).unwrap();
        assert!(edge > 1e6, "{edge}");
        let err = llia_amplitude_bound(k, horizon_at(2.0 * PI * PI), &p).unwrap_err();
        assert!(matches!(err, Error::BoundPrecondition { .. }));
        assert!(err.to_string().contains("19.7"), "{err}");
    }

    #[test]
    fn zero_amplitude_phase_gap_is_zero() {
        let config = SolverConfig::new(0.01, 50, Scheme::NonlinearRk4).unwrap();
        let series = phase_divergence_experiment(
            KelvinWaveSpec::new(0.0, 1, 0.0),
            grid(16),
            &FluidParams::unit(),
            &config,
        )
        .unwrap();
        assert_eq!(series.len(), 51);
        assert!(series.iter().all(|p| p.difference() == 0.0));
    }

    #[test]
    fn phase_gap_grows_at_frequency_difference() {
        let p = FluidParams::unit();
        let (a, k) = (0.2, 1.0);
        let config = SolverConfig::new(0.05, 400, Scheme::NonlinearRk4).unwrap();
        let series = phase_divergence_experiment(KelvinWaveSpec::new(a, 1, 0.0), grid(16), &p, &config).unwrap();
        let ts: Vec<f64> = series.iter().map(|s| s.t).collect();
        let gaps: Vec<f64> = series.iter().map(|s| s.difference()).collect();
        let d = dispersion(a, k, &p).unwrap();
        let expect = d.omega_linear - d.omega_nonlinear;
        let (slope, _) = fit_line(&ts, &gaps);
        assert!((slope - expect).abs() / expect < 1e-6, "{slope} vs {expect}");
    }

    #[test]
    fn stable_dt_allows_paper_setting() {
        let dt = nonlinear_stable_dt(&grid(64), &FluidParams::unit(), false);
        assert!(dt > 1e-3);
    }
}
