//! The filament as a free quantum particle of mass `m_eff` with Planck
//! constant `hbar_eff`: plane waves, the free propagator and its discretized
//! path-integral kernel, and Gaussian wavepacket spreading.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::{LinearPropagator, Scheme, SolverConfig};
use crate::filament::{FilamentState, FluidParams, ZGrid};
use crate::observables::{effective_hbar, effective_mass};
use crate::par::{self, Execution};
use crate::spectral::{signed_mode, Spectral};

/// `<z|p> = exp(i p z / hbar) / sqrt(2 pi hbar)`.
pub fn plane_wave_overlap(p: f64, z: f64, hbar_eff: f64) -> Result<Complex64> {
    if !(hbar_eff > 0.0 && hbar_eff.is_finite()) {
        return Err(Error::invalid("hbar_eff", format!("must be positive, got {hbar_eff}")));
    }
    Ok(Complex64::from_polar(
        1.0 / (2.0 * PI * hbar_eff).sqrt(),
        p * z / hbar_eff,
    ))
}

/// Rebuilds a state from its plane-wave components,
/// `psi(z) = sum_m <z|p_m> dp <p_m|psi>` with `<p_m|psi> = sum_j <p_m|z_j> psi_j dz`,
/// by direct summation over all grid momenta `p_m = hbar k_m`.
pub fn reconstruct_via_plane_waves(state: &FilamentState, hbar_eff: f64) -> Result<Vec<Complex64>> {
    let grid = state.grid();
    let n = grid.points();
    let dz = grid.spacing();
    let dp = hbar_eff * 2.0 * PI / grid.length();
    let momenta: Vec<f64> = (0..n).map(|b| hbar_eff * grid.wavenumber(signed_mode(b, n))).collect();
    let mut amplitudes = Vec::with_capacity(n);
    for &p in &momenta {
        let mut a = Complex64::new(0.0, 0.0);
        for (j, psi) in state.psi().iter().enumerate() {
            a += plane_wave_overlap(p, grid.z(j), hbar_eff)?.conj() * psi * dz;
        }
        amplitudes.push(a);
    }
    (0..n)
        .map(|j| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (&p, a) in momenta.iter().zip(&amplitudes) {
                acc += plane_wave_overlap(p, grid.z(j), hbar_eff)? * a * dp;
            }
            Ok(acc)
        })
        .collect()
}

fn check_propagator_args(dt: f64, hbar_eff: f64, m_eff: f64) -> Result<()> {
    if dt == 0.0 || !dt.is_finite() {
        return Err(Error::invalid(
            "dt",
            format!("propagator needs a finite nonzero step, got {dt}"),
        ));
    }
    if !(hbar_eff > 0.0 && hbar_eff.is_finite()) {
        return Err(Error::invalid("hbar_eff", format!("must be positive, got {hbar_eff}")));
    }
    if !(m_eff > 0.0 && m_eff.is_finite()) {
        return Err(Error::invalid("m_eff", format!("must be positive, got {m_eff}")));
    }
    Ok(())
}

/// Free-particle propagator
/// `sqrt(m / (2 pi i hbar dt)) exp(i m (z_to - z_from)^2 / (2 hbar dt))`,
/// with `sqrt(i) = e^{i pi / 4}`.
pub fn analytic_propagator(z_from: f64, z_to: f64, dt: f64, hbar_eff: f64, m_eff: f64) -> Result<Complex64> {
    propagator_at(Complex64::new(z_to - z_from, 0.0), dt, hbar_eff, m_eff)
}

/// [`analytic_propagator`] continued to a complex displacement.
pub fn propagator_at(displacement: Complex64, dt: f64, hbar_eff: f64, m_eff: f64) -> Result<Complex64> {
    check_propagator_args(dt, hbar_eff, m_eff)?;
    let modulus = (m_eff / (2.0 * PI * hbar_eff * dt.abs())).sqrt();
    let prefactor = Complex64::from_polar(modulus, -dt.signum() * PI / 4.0);
    let alpha = m_eff / (2.0 * hbar_eff * dt);
    Ok(prefactor * (Complex64::i() * alpha * displacement * displacement).exp())
}

/// Fourier transform `int K(u) e^{-iku} du` of the propagator.
///
/// The integrand is entire, so the real line is moved through the
/// stationary point `u* = k / 2 alpha` onto `u* + e^{i pi/4} s` (rotated the
/// other way for negative steps), where it decays like `e^{-|alpha| s^2}`;
/// the trapezoid rule then converges geometrically.
fn propagator_transform(k: f64, dt: f64, hbar_eff: f64, m_eff: f64) -> Result<Complex64> {
    let alpha = m_eff / (2.0 * hbar_eff * dt);
    let centre = k / (2.0 * alpha);
    let direction = Complex64::from_polar(1.0, dt.signum() * PI / 4.0);
    let half_width = 9.0 / alpha.abs().sqrt();
    let nodes = 160;
    let h = half_width / nodes as f64;
    let mut sum = Complex64::new(0.0, 0.0);
    for i in -nodes..=nodes {
        let u = centre + direction * (i as f64 * h);
        let kernel = propagator_at(u, dt, hbar_eff, m_eff)?;
        sum += kernel * (Complex64::new(0.0, -k) * u).exp();
    }
    Ok(sum * direction * h)
}

/// Discrete propagator acting on grid samples: `psi_out[j'] = sum_j K[j'][j] psi[j]`.
#[derive(Clone, Debug, PartialEq)]
pub struct PropagatorKernel {
    grid: ZGrid,
    dt: f64,
    entries: Vec<Complex64>,
}

impl PropagatorKernel {
    pub fn grid(&self) -> &ZGrid {
        &self.grid
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Row-major `N x N` entries.
    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        self.entries[row * self.grid.points() + col]
    }

    pub fn apply(&self, psi: &[Complex64]) -> Vec<Complex64> {
        self.apply_with(psi, Execution::default())
    }

    pub fn apply_with(&self, psi: &[Complex64], exec: Execution) -> Vec<Complex64> {
        let n = self.grid.points();
        assert_eq!(psi.len(), n, "state and kernel live on different grids");
        par::map_range(n, exec, |row| {
            self.entries[row * n..(row + 1) * n]
                .iter()
                .zip(psi)
                .map(|(k, p)| k * p)
                .sum()
        })
    }

    /// Kernel of `self` followed by `after`.
    pub fn then(&self, after: &PropagatorKernel, exec: Execution) -> Result<PropagatorKernel> {
        if self.grid != after.grid {
            return Err(Error::invalid("kernel", "kernels live on different grids"));
        }
        let n = self.grid.points();
        let rows = par::map_range(n, exec, |row| {
            let mut out = vec![Complex64::new(0.0, 0.0); n];
            for (mid, a) in after.entries[row * n..(row + 1) * n].iter().enumerate() {
                for (o, b) in out.iter_mut().zip(&self.entries[mid * n..(mid + 1) * n]) {
                    *o += a * b;
                }
            }
            out
        });
        Ok(PropagatorKernel {
            grid: self.grid,
            dt: self.dt + after.dt,
            entries: rows.concat(),
        })
    }

    /// `max |<e_a, K^dagger K e_b> - delta_ab|` over unit plane waves with
    /// `|m| <= N/3`.
    pub fn unitarity_defect(&self) -> f64 {
        let n = self.grid.points();
        let band = (n / 3) as i64;
        let images: Vec<Vec<Complex64>> = (-band..=band).map(|m| self.apply(&self.plane_wave(m))).collect();
        let mut worst: f64 = 0.0;
        for (a, ka) in images.iter().enumerate() {
            for (b, kb) in images.iter().enumerate() {
                let inner: Complex64 = ka.iter().zip(kb).map(|(x, y)| x.conj() * y).sum();
                let target = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((inner - target).norm());
            }
        }
        worst
    }

    /// `<e_m, K e_m>` for the unit plane wave of mode `m`; its argument is the
    /// eigenphase of the mode.
    pub fn mode_eigenvalue(&self, mode: i64) -> Complex64 {
        let e = self.plane_wave(mode);
        let ke = self.apply(&e);
        e.iter().zip(&ke).map(|(x, y)| x.conj() * y).sum()
    }

    fn plane_wave(&self, mode: i64) -> Vec<Complex64> {
        let n = self.grid.points();
        let k = self.grid.wavenumber(mode);
        let norm = 1.0 / (n as f64).sqrt();
        (0..n)
            .map(|j| Complex64::from_polar(norm, k * self.grid.z(j)))
            .collect()
    }
}

/// Width `sqrt(hbar dt / m)` of the stationary-phase region of one slice.
pub fn stationary_phase_width(dt: f64, hbar_eff: f64, m_eff: f64) -> f64 {
    (hbar_eff * dt.abs() / m_eff).sqrt()
}

/// Checks the preconditions of [`build_kernel`] without building anything.
pub fn check_kernel_resolution(grid: &ZGrid, dt: f64, params: &FluidParams, volume: f64, slices: usize) -> Result<()> {
    if slices == 0 {
        return Err(Error::invalid("slices", "must be at least 1"));
    }
    if !(volume > 0.0 && volume.is_finite()) {
        return Err(Error::invalid("volume", format!("must be positive, got {volume}")));
    }
    let hbar = effective_hbar(params, volume);
    let mass = effective_mass(params, volume);
    check_propagator_args(dt, hbar, mass)?;
    let step = dt / slices as f64;

    let width = stationary_phase_width(step, hbar, mass);
    if width < 2.0 * grid.spacing() {
        return Err(Error::UnresolvedTimeStep {
            dt: step,
            reason: format!(
                "stationary-phase width {width:e} is below two grid spacings ({:e}); use fewer slices or a finer grid",
                2.0 * grid.spacing()
            ),
        });
    }
    let k_band = grid.wavenumber((grid.points() / 3) as i64);
    let travel = hbar * k_band * step.abs() / mass;
    if travel > 0.5 * grid.length() {
        return Err(Error::UnresolvedTimeStep {
            dt: step,
            reason: format!(
                "band-edge displacement {travel:e} exceeds half the period ({:e}); use more slices",
                0.5 * grid.length()
            ),
        });
    }
    Ok(())
}

/// Path-integral kernel over `dt`, composed of `slices` equal single-step
/// kernels.
///
/// Each single-step kernel is the free propagator projected onto the grid's
/// Fourier modes: `K[j'][j] = (1/N) sum_m e^{i k_m (z_j' - z_j)} U(k_m)` with
/// `U(k)` the numerically transformed [`analytic_propagator`]. A slice is
/// resolvable when its stationary-phase width is at least two grid spacings
/// and the classical displacement `hbar k dt / m` of the highest retained
/// mode (`|m| = N/3`) stays within half the period.
pub fn build_kernel(
    grid: ZGrid,
    dt: f64,
    params: &FluidParams,
    volume: f64,
    slices: usize,
) -> Result<PropagatorKernel> {
    build_kernel_with(grid, dt, params, volume, slices, Execution::default())
}

pub fn build_kernel_with(
    grid: ZGrid,
    dt: f64,
    params: &FluidParams,
    volume: f64,
    slices: usize,
    exec: Execution,
) -> Result<PropagatorKernel> {
    check_kernel_resolution(&grid, dt, params, volume, slices)?;
    let hbar = effective_hbar(params, volume);
    let mass = effective_mass(params, volume);
    let step = dt / slices as f64;

    let spectral = Spectral::for_grid(&grid);
    let transform: Vec<Complex64> = spectral
        .wavenumbers()
        .iter()
        .map(|&k| propagator_transform(k, step, hbar, mass))
        .collect::<Result<_>>()?;
    // first column of the circulant: c[d] = (1/N) sum_m e^{i k_m z_d} U(k_m)
    let column = spectral.inverse(&transform);
    let n = grid.points();
    let rows = par::map_range(n, exec, |row| {
        (0..n).map(|col| column[(row + n - col) % n]).collect::<Vec<_>>()
    });
    let single = PropagatorKernel {
        grid,
        dt: step,
        entries: rows.concat(),
    };

    let mut kernel = single.clone();
    for _ in 1..slices {
        kernel = kernel.then(&single, exec)?;
    }
    kernel.dt = dt;
    Ok(kernel)
}

/// Gaussian packet `A exp(-(z - z0)^2 / (4 sigma0^2)) e^{i k0 z}`, so that
/// `|psi|^2` has standard deviation `sigma0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WavepacketSpec {
    pub center: f64,
    pub width: f64,
    #[serde(default)]
    pub carrier: i64,
    #[serde(default = "unit_amplitude")]
    pub amplitude: f64,
}

fn unit_amplitude() -> f64 {
    1.0
}

/// Tail-to-peak ratio above which a packet counts as touching the seam.
pub const SEAM_TOLERANCE: f64 = 1e-12;

impl WavepacketSpec {
    pub fn new(center: f64, width: f64, carrier: i64) -> Self {
        Self {
            center,
            width,
            carrier,
            amplitude: 1.0,
        }
    }

    pub fn validate(&self, grid: &ZGrid) -> Result<()> {
        if !(self.width >= 4.0 * grid.spacing()) {
            return Err(Error::invalid(
                "width",
                format!("{} is below four grid spacings ({})", self.width, 4.0 * grid.spacing()),
            ));
        }
        if !(self.amplitude > 0.0 && self.amplitude.is_finite()) {
            return Err(Error::invalid(
                "amplitude",
                format!("must be positive, got {}", self.amplitude),
            ));
        }
        if self.carrier.abs() > grid.max_resolvable_mode() {
            return Err(Error::UnresolvableMode {
                mode: self.carrier,
                points: grid.points(),
                max: grid.max_resolvable_mode(),
            });
        }
        if !(self.center > 0.0 && self.center < grid.length()) {
            return Err(Error::invalid(
                "center",
                format!("must lie inside (0, {})", grid.length()),
            ));
        }
        let gap = self.center.min(grid.length() - self.center);
        let tail = (-gap * gap / (4.0 * self.width * self.width)).exp();
        if tail >= SEAM_TOLERANCE {
            return Err(Error::invalid(
                "center",
                format!("packet tail at the seam is {tail:e} of its peak"),
            ));
        }
        Ok(())
    }
}

pub fn make_wavepacket(spec: WavepacketSpec, grid: ZGrid) -> Result<FilamentState> {
    spec.validate(&grid)?;
    let k0 = grid.wavenumber(spec.carrier);
    let psi = (0..grid.points())
        .map(|j| {
            let z = grid.z(j);
            let d = z - spec.center;
            Complex64::from_polar(
                spec.amplitude * (-d * d / (4.0 * spec.width * spec.width)).exp(),
                k0 * z,
            )
        })
        .collect();
    FilamentState::new(grid, psi, 0.0)
}

/// Centroid and standard deviation of `z` weighted by `|psi|^2`.
pub fn packet_moments(state: &FilamentState) -> (f64, f64) {
    let grid = state.grid();
    let mut w = 0.0;
    let mut m1 = 0.0;
    for (j, c) in state.psi().iter().enumerate() {
        let p = c.norm_sqr();
        w += p;
        m1 += p * grid.z(j);
    }
    let mean = m1 / w;
    let var = state
        .psi()
        .iter()
        .enumerate()
        .map(|(j, c)| c.norm_sqr() * (grid.z(j) - mean).powi(2))
        .sum::<f64>()
        / w;
    (mean, var.sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct WavepacketPoint {
    pub t: f64,
    pub sigma: f64,
    pub sigma_analytic: f64,
    pub centroid: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WavepacketRun {
    pub points: Vec<WavepacketPoint>,
    /// Set when the run stopped early because the packet reached the seam.
    pub reached_seam: bool,
}

/// Free spreading of a Gaussian packet under the linear equation, against
/// `sigma^2(t) = sigma0^2 (1 + (hbar_eff t / (2 m_eff sigma0^2))^2)`.
pub fn wavepacket_benchmark(
    spec: WavepacketSpec,
    grid: ZGrid,
    params: &FluidParams,
    config: &SolverConfig,
) -> Result<WavepacketRun> {
    config.validate()?;
    if config.scheme != Scheme::LinearSpectral {
        return Err(Error::invalid(
            "scheme",
            "the wavepacket benchmark runs the linear equation only",
        ));
    }
    let initial = make_wavepacket(spec, grid)?;
    let volume = initial.volume();
    let spread = effective_hbar(params, volume) / (2.0 * effective_mass(params, volume));
    let s0 = spec.width;
    let analytic = |t: f64| s0 * (1.0 + (spread * t / (s0 * s0)).powi(2)).sqrt();

    let stepper = LinearPropagator::new(&grid, params, config.dt);
    let mut state = initial;
    let mut points = Vec::with_capacity(config.steps + 1);
    let mut reached_seam = false;
    for step in 0..=config.steps {
        if step > 0 {
            state = stepper.apply(&state);
        }
        let peak = state.psi().iter().map(|c| c.norm()).fold(0.0, f64::max);
        let edge = state.psi()[0].norm().max(state.psi()[grid.points() - 1].norm());
        if edge > SEAM_TOLERANCE * peak {
            reached_seam = true;
            break;
        }
        let (centroid, sigma) = packet_moments(&state);
        points.push(WavepacketPoint {
            t: state.time(),
            sigma,
            sigma_analytic: analytic(state.time()),
            centroid,
        });
    }
    Ok(WavepacketRun { points, reached_seam })
}
