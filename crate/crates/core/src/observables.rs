//! Conserved quantities of the filament and the quantum-like operators built
//! from them.
//!
//! Everything is measured relative to the straight line along z. With
//! `V = pi * sum |psi|^2 dz` the swept volume, the effective Planck constant
//! is `hbar_eff = Gamma rho V / 2 pi` and the effective mass is
//! `m_eff = rho V / ln(eps)`, so that `hbar_eff / (2 m_eff) = Gamma ln(eps) / 4 pi`
//! is the coefficient of the linear equation.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filament::{FilamentState, FluidParams};
use crate::spectral::Spectral;

/// Relative size of the imaginary part of the momentum sum that is tolerated
/// before the state is declared corrupted.
pub const MOMENTUM_RESIDUAL_TOL: f64 = 1e-10;

/// Fraction of spectral power the dominant mode must carry for a state to
/// count as a single Kelvin wave.
pub const SINGLE_MODE_FRACTION: f64 = 0.999;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnergyMode {
    /// Arclength form, including the straight-line baseline.
    Lia,
    /// Quadratic form with the baseline removed.
    Llia,
}

pub fn effective_hbar(params: &FluidParams, volume: f64) -> f64 {
    params.circulation * params.density * volume / (2.0 * PI)
}

pub fn effective_mass(params: &FluidParams, volume: f64) -> f64 {
    params.density * volume / params.ln_epsilon
}

/// `p_z = -i (Gamma rho / 2) sum conj(psi) psi' dz`.
///
/// The spectral derivative is anti-Hermitian, so the sum is real up to
/// rounding for every finite state. An imaginary part above
/// [`MOMENTUM_RESIDUAL_TOL`] relative to `sum |psi| |psi'| dz`, or a
/// non-finite sum, is reported as an error.
pub fn momentum_z(state: &FilamentState, params: &FluidParams) -> Result<f64> {
    let d = Spectral::for_grid(state.grid()).derivative(state.psi(), 1);
    let mut sum = Complex64::new(0.0, 0.0);
    let mut scale = 0.0;
    for (p, dp) in state.psi().iter().zip(&d) {
        sum += p.conj() * dp;
        scale += p.norm() * dp.norm();
    }
    if scale == 0.0 {
        return Ok(0.0);
    }
    // -i * sum: the real part of the result comes from Im(sum)
    let residual = sum.re.abs() / scale;
    if !(residual <= MOMENTUM_RESIDUAL_TOL) {
        return Err(Error::ImaginaryResidual { residual });
    }
    Ok(0.5 * params.circulation * params.density * sum.im * state.grid().spacing())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DeBroglieCheck {
    pub momentum: f64,
    pub predicted: f64,
    pub gap: f64,
}

/// Compares `p_z` with `hbar_eff k` for the dominant mode of a single Kelvin wave.
pub fn de_broglie_check(state: &FilamentState, params: &FluidParams) -> Result<DeBroglieCheck> {
    let spectral = Spectral::for_grid(state.grid());
    let coeffs = spectral.forward(state.psi());
    let total: f64 = coeffs.iter().map(|c| c.norm_sqr()).sum();
    let (bin, peak) = coeffs
        .iter()
        .map(|c| c.norm_sqr())
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap_or((0, 0.0));
    let fraction = if total > 0.0 { peak / total } else { 0.0 };
    if fraction <= SINGLE_MODE_FRACTION {
        return Err(Error::NotSingleMode { fraction });
    }
    let k = spectral.wavenumbers()[bin];
    let momentum = momentum_z(state, params)?;
    let predicted = effective_hbar(params, state.volume()) * k;
    Ok(DeBroglieCheck {
        momentum,
        predicted,
        gap: (momentum - predicted).abs() / momentum.abs(),
    })
}

/// Largest pointwise deviation of `([z, p] - i hbar_eff) psi`, divided by
/// `hbar_eff * max |psi|`, with `p = -i hbar_eff d/dz` applied spectrally.
///
/// `z` is the grid coordinate in `[0, L)`, which is not periodic; only test
/// functions that vanish near the seam give a small result. A zero state
/// reports 0.
pub fn commutator_check(state: &FilamentState, params: &FluidParams) -> f64 {
    let peak = state.psi().iter().map(|c| c.norm()).fold(0.0, f64::max);
    if peak == 0.0 {
        return 0.0;
    }
    let hbar = effective_hbar(params, state.volume());
    let grid = state.grid();
    let spectral = Spectral::for_grid(grid);
    let minus_i_hbar = Complex64::new(0.0, -hbar);

    let p_psi: Vec<Complex64> = spectral
        .derivative(state.psi(), 1)
        .into_iter()
        .map(|d| minus_i_hbar * d)
        .collect();
    let z_psi: Vec<Complex64> = state.psi().iter().enumerate().map(|(j, &c)| c * grid.z(j)).collect();
    let p_z_psi = spectral.derivative(&z_psi, 1);

    let deviation = (0..grid.points())
        .map(|j| {
            let commutator = p_psi[j] * grid.z(j) - minus_i_hbar * p_z_psi[j];
            (commutator - Complex64::new(0.0, hbar) * state.psi()[j]).norm()
        })
        .fold(0.0, f64::max);
    deviation / (hbar * peak)
}

/// `L_z = -(Gamma rho / 2) sum |psi|^2 dz`, which is `-hbar_eff`.
pub fn angular_momentum_z(state: &FilamentState, params: &FluidParams) -> f64 {
    -0.5 * params.circulation * params.density * state.norm_sqr()
}

pub fn energy(state: &FilamentState, params: &FluidParams, mode: EnergyMode) -> f64 {
    let d = Spectral::for_grid(state.grid()).derivative(state.psi(), 1);
    let base = params.density * params.circulation * params.circulation * params.ln_epsilon / (4.0 * PI);
    let dz = state.grid().spacing();
    match mode {
        EnergyMode::Lia => base * d.iter().map(|c| (1.0 + c.norm_sqr()).sqrt()).sum::<f64>() * dz,
        EnergyMode::Llia => 0.5 * base * d.iter().map(|c| c.norm_sqr()).sum::<f64>() * dz,
    }
}

/// `H psi` with `H = -(rho V Gamma^2 ln(eps) / 8 pi^2) d^2/dz^2` and `V`
/// taken from the state itself.
pub fn hamiltonian_apply(state: &FilamentState, params: &FluidParams) -> Result<Vec<Complex64>> {
    let v = state.volume();
    if v <= 0.0 {
        return Err(Error::ZeroVolume("the Hamiltonian"));
    }
    Ok(hamiltonian_apply_at_volume(state, params, v))
}

/// `H psi` with the volume frozen at `volume`, which makes `H` linear in psi.
pub fn hamiltonian_apply_at_volume(state: &FilamentState, params: &FluidParams, volume: f64) -> Vec<Complex64> {
    let coef = -params.density * volume * params.circulation * params.circulation * params.ln_epsilon / (8.0 * PI * PI);
    Spectral::for_grid(state.grid())
        .derivative(state.psi(), 2)
        .into_iter()
        .map(|c| c * coef)
        .collect()
}

/// `<psi_n | H | psi_n>` for the unit-norm state `psi_n = sqrt(pi / V) psi`.
/// Equals [`energy`] in the LLIA mode.
pub fn hamiltonian_expectation(state: &FilamentState, params: &FluidParams) -> Result<f64> {
    let h_psi = hamiltonian_apply(state, params)?;
    let scale = PI / state.volume();
    let inner: Complex64 = state.psi().iter().zip(&h_psi).map(|(p, h)| p.conj() * h).sum();
    Ok(inner.re * scale * state.grid().spacing())
}

/// Atomic data of a quantized superfluid vortex.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuantizedVortexParams {
    pub atom_mass: f64,
    pub atom_count: u32,
    pub planck: f64,
}

impl QuantizedVortexParams {
    pub const PLANCK: f64 = 6.62607015e-34;
    pub const HELIUM4_MASS: f64 = 6.6464731e-27;

    pub fn helium4(atom_count: u32) -> Self {
        Self {
            atom_mass: Self::HELIUM4_MASS,
            atom_count,
            planck: Self::PLANCK,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.atom_mass > 0.0 && self.atom_mass.is_finite()) {
            return Err(Error::invalid(
                "atom_mass",
                format!("must be positive, got {}", self.atom_mass),
            ));
        }
        if self.atom_count == 0 {
            return Err(Error::invalid("atom_count", "must be at least 1"));
        }
        if !(self.planck > 0.0 && self.planck.is_finite()) {
            return Err(Error::invalid(
                "planck",
                format!("must be positive, got {}", self.planck),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct QuantizedConstants {
    pub circulation: f64,
    pub density: f64,
    pub hbar_eff: f64,
    pub m_eff: f64,
}

/// `Gamma = h / m`, `rho = n m / V`, `hbar_eff = n h / 2 pi`, `m_eff = n m / ln(eps)`.
pub fn quantized_vortex_constants(
    qv: QuantizedVortexParams,
    volume: f64,
    ln_epsilon: f64,
) -> Result<QuantizedConstants> {
    qv.validate()?;
    if !(volume > 0.0 && volume.is_finite()) {
        return Err(Error::invalid("volume", format!("must be positive, got {volume}")));
    }
    if !(ln_epsilon > 0.0 && ln_epsilon.is_finite()) {
        return Err(Error::invalid(
            "ln_epsilon",
            format!("must be positive, got {ln_epsilon}"),
        ));
    }
    let n = f64::from(qv.atom_count);
    Ok(QuantizedConstants {
        circulation: qv.planck / qv.atom_mass,
        density: n * qv.atom_mass / volume,
        hbar_eff: n * qv.planck / (2.0 * PI),
        m_eff: n * qv.atom_mass / ln_epsilon,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ObservableSet {
    pub t: f64,
    pub volume: f64,
    pub p_z: f64,
    pub l_z: f64,
    pub energy: f64,
    pub hbar_eff: f64,
    pub m_eff: f64,
}

impl ObservableSet {
    pub fn measure(state: &FilamentState, params: &FluidParams, mode: EnergyMode) -> Result<Self> {
        let volume = state.volume();
        Ok(Self {
            t: state.time(),
            volume,
            p_z: momentum_z(state, params)?,
            l_z: angular_momentum_z(state, params),
            energy: energy(state, params, mode),
            hbar_eff: effective_hbar(params, volume),
            m_eff: effective_mass(params, volume),
        })
    }
}
