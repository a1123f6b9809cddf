//! Grid, filament state and the fluid constants every other module consumes.
//!
//! A filament is stored as the complex displacement `psi = x + i y` of the
//! vortex line from the z-axis, sampled on a uniform periodic grid in z.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform periodic grid on `[0, L)`. `N` and `L` are canonical; the spacing
/// is derived from them.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ZGrid {
    points: usize,
    length: f64,
}

impl ZGrid {
    pub fn new(points: usize, length: f64) -> Result<Self> {
        if points < 8 || !points.is_multiple_of(2) {
            return Err(Error::invalid(
                "points",
                format!("grid needs an even point count >= 8, got {points}"),
            ));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::invalid(
                "length",
                format!("grid length must be positive and finite, got {length}"),
            ));
        }
        Ok(Self { points, length })
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.points as f64
    }

    pub fn z(&self, j: usize) -> f64 {
        j as f64 * self.spacing()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.points).map(|j| self.z(j)).collect()
    }

    pub fn wavenumber(&self, mode: i64) -> f64 {
        2.0 * PI * mode as f64 / self.length
    }

    /// Largest mode index a Kelvin wave may use (one below Nyquist).
    pub fn max_resolvable_mode(&self) -> i64 {
        self.points as i64 / 2 - 1
    }
}

/// Circulation, density, LIA log-factor and core radius, all SI.
///
/// `ln_epsilon` is the value of the logarithm itself. It is an independent
/// empirical constant and is never derived from `core_radius`, which only
/// enters the direct Biot-Savart sum.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FluidParams {
    pub circulation: f64,
    pub density: f64,
    pub ln_epsilon: f64,
    pub core_radius: f64,
}

impl FluidParams {
    pub fn new(circulation: f64, density: f64, ln_epsilon: f64, core_radius: f64) -> Result<Self> {
        let p = Self {
            circulation,
            density,
            ln_epsilon,
            core_radius,
        };
        p.validate()?;
        Ok(p)
    }

    /// Nondimensional test setting: Gamma = rho = 1, ln(eps) = 0.8, core radius 1e-4.
    pub fn unit() -> Self {
        Self {
            circulation: 1.0,
            density: 1.0,
            ln_epsilon: 0.8,
            core_radius: 1e-4,
        }
    }

    /// Superfluid He-4 numbers. Density (145 kg/m^3) and core radius (1 Angstrom)
    /// are textbook values, not part of the model's inputs.
    pub fn helium4() -> Self {
        Self {
            circulation: 9.97e-8,
            density: 145.0,
            ln_epsilon: 0.8,
            core_radius: 1e-10,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("circulation", self.circulation),
            ("density", self.density),
            ("ln_epsilon", self.ln_epsilon),
            ("core_radius", self.core_radius),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(name, format!("must be positive and finite, got {v}")));
            }
        }
        Ok(())
    }

    /// `Gamma ln(eps) / 4 pi`, the coefficient of the linear equation.
    pub fn lia_coefficient(&self) -> f64 {
        self.circulation * self.ln_epsilon / (4.0 * PI)
    }
}

/// Helical Kelvin wave `a exp(i (k z + phase))` with `k = 2 pi m / L`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KelvinWaveSpec {
    pub amplitude: f64,
    pub mode: i64,
    pub phase: f64,
}

impl KelvinWaveSpec {
    pub fn new(amplitude: f64, mode: i64, phase: f64) -> Self {
        Self { amplitude, mode, phase }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FilamentState {
    grid: ZGrid,
    psi: Vec<Complex64>,
    time: f64,
}

impl FilamentState {
    pub fn new(grid: ZGrid, psi: Vec<Complex64>, time: f64) -> Result<Self> {
        if psi.len() != grid.points() {
            return Err(Error::invalid(
                "psi",
                format!("expected {} samples, got {}", grid.points(), psi.len()),
            ));
        }
        if let Some(j) = psi.iter().position(|c| !(c.re.is_finite() && c.im.is_finite())) {
            return Err(Error::invalid("psi", format!("sample {j} is not finite")));
        }
        Ok(Self { grid, psi, time })
    }

    pub fn straight(grid: ZGrid) -> Self {
        Self {
            grid,
            psi: vec![Complex64::new(0.0, 0.0); grid.points()],
            time: 0.0,
        }
    }

    pub(crate) fn from_parts_unchecked(grid: ZGrid, psi: Vec<Complex64>, time: f64) -> Self {
        debug_assert_eq!(psi.len(), grid.points());
        Self { grid, psi, time }
    }

    pub fn grid(&self) -> &ZGrid {
        &self.grid
    }

    pub fn psi(&self) -> &[Complex64] {
        &self.psi
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn with_time(mut self, time: f64) -> Self {
        self.time = time;
        self
    }

    pub fn is_finite(&self) -> bool {
        self.psi.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    /// Discrete `sum |psi_j|^2 dz`.
    pub fn norm_sqr(&self) -> f64 {
        self.psi.iter().map(|c| c.norm_sqr()).sum::<f64>() * self.grid.spacing()
    }

    /// Volume of the tube swept by rotating the line about the z-axis,
    /// `V = pi * sum |psi_j|^2 dz`.
    pub fn volume(&self) -> f64 {
        PI * self.norm_sqr()
    }

    /// Rescales to `sqrt(pi / V) psi`, which has unit discrete 2-norm.
    pub fn normalized(&self) -> Result<Self> {
        let v = self.volume();
        if v <= 0.0 {
            return Err(Error::ZeroVolume("normalization"));
        }
        let scale = (PI / v).sqrt();
        Ok(self.map(|c| c * scale))
    }

    pub fn mean(&self) -> Complex64 {
        self.psi.iter().sum::<Complex64>() / self.psi.len() as f64
    }

    /// Moves the line's central axis onto the z-axis (zero discrete mean).
    pub fn recentered(&self) -> Self {
        let mean = self.mean();
        self.map(|c| c - mean)
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        Self {
            grid: self.grid,
            psi: self.psi.iter().map(|&c| f(c)).collect(),
            time: self.time,
        }
    }

    /// Pointwise sum of two states on the same grid; keeps `self`'s time.
    pub fn superpose(&self, other: &FilamentState) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::invalid("grid", "states live on different grids"));
        }
        Ok(Self {
            grid: self.grid,
            psi: self.psi.iter().zip(&other.psi).map(|(a, b)| a + b).collect(),
            time: self.time,
        })
    }
}

pub fn make_kelvin_wave(spec: KelvinWaveSpec, grid: ZGrid) -> Result<FilamentState> {
    let max = grid.max_resolvable_mode();
    if spec.mode.abs() > max {
        return Err(Error::UnresolvableMode {
            mode: spec.mode,
            points: grid.points(),
            max,
        });
    }
    if !(spec.amplitude.is_finite() && spec.amplitude >= 0.0) {
        return Err(Error::invalid(
            "amplitude",
            format!("must be >= 0, got {}", spec.amplitude),
        ));
    }
    let k = grid.wavenumber(spec.mode);
    let psi = (0..grid.points())
        .map(|j| Complex64::from_polar(spec.amplitude, k * grid.z(j) + spec.phase))
        .collect();
    Ok(FilamentState::from_parts_unchecked(grid, psi, 0.0))
}
