//! Self-induced velocity of a vortex filament.
//!
//! Three levels of description live here:
//! - the regularized Biot-Savart sum over a discretized periodic curve,
//! - the local integrand near a field point (Taylor-expanded curve) and the
//!   logarithmic divergence of its integral, and
//! - the local induction law driven by spectral z-derivatives of `psi`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::filament::{FilamentState, FluidParams};
use crate::par::{self, Execution};
use crate::quadrature::{adaptive_simpson, fit_line};
use crate::spectral::Spectral;

pub type Vec3 = [f64; 3];

fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Single-valued curve `(x(z), y(z), z)` continued periodically in z.
#[derive(Clone, Debug, PartialEq)]
pub struct Curve3D {
    nodes: Vec<Vec3>,
    period: f64,
}

impl Curve3D {
    pub fn new(nodes: Vec<Vec3>, period: f64) -> Result<Self> {
        if nodes.len() < 8 {
            return Err(Error::invalid(
                "nodes",
                format!("need at least 8 nodes, got {}", nodes.len()),
            ));
        }
        if !(period.is_finite() && period > 0.0) {
            return Err(Error::invalid("period", format!("must be positive, got {period}")));
        }
        if nodes.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::invalid("nodes", "coordinates must be finite"));
        }
        for (i, w) in nodes.windows(2).enumerate() {
            if w[1][2] <= w[0][2] {
                return Err(Error::invalid(
                    "nodes",
                    format!(
                        "z must increase strictly; node {} at z = {} follows z = {}",
                        i + 1,
                        w[1][2],
                        w[0][2]
                    ),
                ));
            }
        }
        let first = nodes[0][2];
        let last = nodes[nodes.len() - 1][2];
        if last >= first + period {
            return Err(Error::invalid("nodes", "curve spans more than one period in z"));
        }
        Ok(Self { nodes, period })
    }

    /// The filament `psi` placed at its grid nodes.
    pub fn from_state(state: &FilamentState) -> Self {
        let grid = state.grid();
        let nodes = state
            .psi()
            .iter()
            .enumerate()
            .map(|(j, c)| [c.re, c.im, grid.z(j)])
            .collect();
        Self {
            nodes,
            period: grid.length(),
        }
    }

    pub fn nodes(&self) -> &[Vec3] {
        &self.nodes
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    /// Node `j` of the periodic continuation, any integer `j`.
    fn node(&self, j: i64) -> Vec3 {
        let n = self.nodes.len() as i64;
        let wraps = j.div_euclid(n);
        let p = self.nodes[j.rem_euclid(n) as usize];
        [p[0], p[1], p[2] + wraps as f64 * self.period]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VelocityField {
    pub velocities: Vec<Vec3>,
}

impl VelocityField {
    pub fn len(&self) -> usize {
        self.velocities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.velocities.is_empty()
    }

    /// `v_x + i v_y` at each point.
    pub fn transverse(&self) -> Vec<Complex64> {
        self.velocities.iter().map(|v| Complex64::new(v[0], v[1])).collect()
    }

    /// Smallest pointwise cosine similarity against another field.
    /// Points where either velocity vanishes count as aligned.
    pub fn min_cosine_similarity(&self, other: &VelocityField) -> f64 {
        self.velocities
            .iter()
            .zip(&other.velocities)
            .map(|(a, b)| {
                let na = dot(*a, *a).sqrt();
                let nb = dot(*b, *b).sqrt();
                if na == 0.0 || nb == 0.0 {
                    1.0
                } else {
                    dot(*a, *b) / (na * nb)
                }
            })
            .fold(1.0, f64::min)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct BiotSavartOptions {
    /// Periods summed on each side of the period centred on the target node.
    pub images: usize,
    /// Segments on each side of the target whose contribution is integrated
    /// analytically on the local osculating curve instead of by the midpoint
    /// rule. Zero gives the plain polygon sum.
    pub local_segments: usize,
    pub execution: Execution,
}

impl Default for BiotSavartOptions {
    fn default() -> Self {
        Self {
            images: 1,
            local_segments: 4,
            execution: Execution::default(),
        }
    }
}

pub fn biot_savart_velocity(curve: &Curve3D, params: &FluidParams) -> Result<VelocityField> {
    biot_savart_velocity_with(curve, params, BiotSavartOptions::default())
}

/// Regularized Biot-Savart velocity at every node.
///
/// The kernel is `dl x R / (|R|^2 + sigma^2)^{3/2}` with `sigma` the core
/// radius. Far segments are evaluated at their midpoints over a window of
/// `2 * images + 1` periods centred on the target, so the window respects
/// the symmetry of the curve about each node. The `local_segments` nearest
/// segments on each side are replaced by the exact integral of the same
/// kernel along the osculating parabola at the target,
///
/// `(t x s'') / (2 |t|^3) [G(h+) + G(h-)]`, `G(h) = asinh(h|t|/sigma) - h|t| / sqrt(h^2 |t|^2 + sigma^2)`,
///
/// with `t = (x', y', 1)` and `s'' = (x'', y'', 0)` from three-point
/// differences. This keeps the core resolved when `sigma` is far below the
/// node spacing.
///
/// Every target uses a fixed summation order, so results do not depend on
/// the execution policy.
pub fn biot_savart_velocity_with(
    curve: &Curve3D,
    params: &FluidParams,
    opts: BiotSavartOptions,
) -> Result<VelocityField> {
    let n = curve.nodes.len() as i64;
    let local = opts.local_segments as i64;
    if 2 * local >= n {
        return Err(Error::invalid(
            "local_segments",
            format!("{local} per side does not fit on a {n}-node curve"),
        ));
    }
    for s in 0..n {
        let dl = sub(curve.node(s + 1), curve.node(s));
        if dot(dl, dl) == 0.0 {
            return Err(Error::DegenerateSegment { index: s as usize });
        }
    }

    // segment window q in [i - reach, i + reach) around target i
    let reach = n / 2 + opts.images as i64 * n;
    let first = -reach;
    let segments: Vec<(Vec3, Vec3)> = (first..n + reach)
        .map(|s| {
            let a = curve.node(s);
            let b = curve.node(s + 1);
            let mid = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1]), 0.5 * (a[2] + b[2])];
            (sub(b, a), mid)
        })
        .collect();

    let sigma = params.core_radius;
    let sigma2 = sigma * sigma;
    let prefactor = params.circulation / (4.0 * PI);

    let velocities = par::map_range(curve.nodes.len(), opts.execution, |i| {
        let i = i as i64;
        let target = curve.nodes[i as usize];
        let mut acc = [0.0; 3];
        let mut add = |q: i64| {
            let (dl, mid) = &segments[(q - first) as usize];
            let r = sub(target, *mid);
            let denom = (dot(r, r) + sigma2).powf(1.5);
            let c = cross(*dl, r);
            acc[0] += c[0] / denom;
            acc[1] += c[1] / denom;
            acc[2] += c[2] / denom;
        };
        (i - reach..i - local).for_each(&mut add);
        (i + local..i + reach).for_each(&mut add);

        if local > 0 {
            let near = local_self_induction(curve, i, local, sigma);
            for d in 0..3 {
                acc[d] += near[d];
            }
        }
        [acc[0] * prefactor, acc[1] * prefactor, acc[2] * prefactor]
    });
    Ok(VelocityField { velocities })
}

/// Smoothed-kernel integral over the `local` segments on each side of node
/// `i`, along the osculating parabola (without the `Gamma / 4 pi` factor).
fn local_self_induction(curve: &Curve3D, i: i64, local: i64, sigma: f64) -> Vec3 {
    let p = curve.node(i);
    let prev = curve.node(i - 1);
    let next = curve.node(i + 1);
    let h1 = p[2] - prev[2];
    let h2 = next[2] - p[2];
    let mut t = [0.0, 0.0, 1.0];
    let mut s2 = [0.0; 3];
    for d in 0..2 {
        // nonuniform three-point first and second derivatives
        t[d] = (-h2 / (h1 * (h1 + h2))) * prev[d] + ((h2 - h1) / (h1 * h2)) * p[d] + (h1 / (h2 * (h1 + h2))) * next[d];
        s2[d] = 2.0 * (prev[d] / (h1 * (h1 + h2)) - p[d] / (h1 * h2) + next[d] / (h2 * (h1 + h2)));
    }
    let tn = dot(t, t).sqrt();
    let g = |h: f64| {
        let w = h * tn;
        (w / sigma).asinh() - w / (w * w + sigma * sigma).sqrt()
    };
    let behind = p[2] - curve.node(i - local)[2];
    let ahead = curve.node(i + local)[2] - p[2];
    let weight = (g(behind) + g(ahead)) / (2.0 * tn.powi(3));
    let b = cross(t, s2);
    [b[0] * weight, b[1] * weight, b[2] * weight]
}

/// Derivatives of `x(z)` and `y(z)` at the field point, where the curve is
/// expressed relative to that point (so `x(0) = y(0) = 0`).
/// Index 0, 1, 2 hold the first, second and third derivative.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LocalDerivatives {
    pub x: [f64; 3],
    pub y: [f64; 3],
}

impl LocalDerivatives {
    fn eval(d: &[f64; 3], z: f64) -> f64 {
        z * (d[0] + z * (d[1] / 2.0 + z * d[2] / 6.0))
    }

    /// `X = x/z` and `X'` for the Taylor polynomial.
    fn reduced(d: &[f64; 3], z: f64) -> (f64, f64) {
        (d[0] + z * (d[1] / 2.0 + z * d[2] / 6.0), d[1] / 2.0 + z * d[2] / 3.0)
    }
}

/// Biot-Savart integrand per unit z near the field point, using the cubic
/// Taylor curve through the origin.
///
/// Components are `(z y' - y, x - z x', x' y - y' x) / |R|^3` with
/// `R = (x, y, z)`; the pole part of the first component is
/// `y''/(2|z|) [1 + x'^2 + y'^2]^{-3/2}`, even in z.
pub fn kernel_f(local: &LocalDerivatives, z: f64) -> Result<Vec3> {
    if z == 0.0 {
        return Err(Error::KernelPole);
    }
    let x = LocalDerivatives::eval(&local.x, z);
    let y = LocalDerivatives::eval(&local.y, z);
    let r3 = (x * x + y * y + z * z).powf(1.5);
    // with x = z X(z): z x' - x = z^2 X', x' y - y' x = z^2 (X' Y - Y' X);
    // written this way the O(z) slope terms never cancel numerically
    let (bx, dbx) = LocalDerivatives::reduced(&local.x, z);
    let (by, dby) = LocalDerivatives::reduced(&local.y, z);
    let z2 = z * z;
    Ok([z2 * dby / r3, -z2 * dbx / r3, z2 * (dbx * by - dby * bx) / r3])
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PolarityGeometry {
    pub curvature_xx: f64,
    pub curvature_yy: f64,
    pub slope_x: f64,
    pub slope_y: f64,
}

impl PolarityGeometry {
    /// Limit of the fitted slope as the cutoff shrinks.
    pub fn analytic_prefactor(&self) -> f64 {
        self.curvature_yy * (1.0 + self.slope_x.powi(2) + self.slope_y.powi(2)).powf(-1.5)
    }

    fn local(&self) -> LocalDerivatives {
        LocalDerivatives {
            x: [self.slope_x, self.curvature_xx, 0.0],
            y: [self.slope_y, self.curvature_yy, 0.0],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PolarityFit {
    pub slope: f64,
    pub intercept: f64,
    /// `(ln(l/sigma), integral)` pairs that entered the fit.
    pub samples: Vec<(f64, f64)>,
}

/// Integrates the x-component of [`kernel_f`] over `[-l, -sigma] U [sigma, l]`
/// for each cutoff and fits the result linearly against `ln(l/sigma)`.
pub fn polarity_slope(geometry: PolarityGeometry, l: f64, sigmas: &[f64]) -> Result<PolarityFit> {
    if sigmas.len() < 4 {
        return Err(Error::invalid(
            "sigmas",
            format!("need at least 4 cutoffs, got {}", sigmas.len()),
        ));
    }
    if sigmas.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
        return Err(Error::invalid("sigmas", "cutoffs must be positive"));
    }
    let increasing = sigmas.windows(2).all(|w| w[1] > w[0]);
    let decreasing = sigmas.windows(2).all(|w| w[1] < w[0]);
    if !(increasing || decreasing) {
        return Err(Error::invalid("sigmas", "cutoff list must be strictly monotone"));
    }
    let max_sigma = sigmas.iter().cloned().fold(f64::MIN, f64::max);
    if !(l > max_sigma) {
        return Err(Error::invalid(
            "l",
            format!("must exceed the largest cutoff {max_sigma}, got {l}"),
        ));
    }

    let local = geometry.local();
    // Both half-lines in the log variable t = ln z, where the integrand
    // z (f(z) + f(-z)) is bounded.
    let integrand = |t: f64| {
        let z = t.exp();
        let plus = kernel_f(&local, z).map(|f| f[0]).unwrap_or(0.0);
        let minus = kernel_f(&local, -z).map(|f| f[0]).unwrap_or(0.0);
        z * (plus + minus)
    };
    let samples: Vec<(f64, f64)> = sigmas
        .iter()
        .map(|&s| {
            let value = adaptive_simpson(&integrand, s.ln(), l.ln(), 1e-13);
            ((l / s).ln(), value)
        })
        .collect();
    let (xs, ys): (Vec<f64>, Vec<f64>) = samples.iter().cloned().unzip();
    let (slope, intercept) = fit_line(&xs, &ys);
    Ok(PolarityFit {
        slope,
        intercept,
        samples,
    })
}

/// Local induction velocity at every grid point:
/// `(Gamma ln eps / 4 pi) [-y'', x'', y'' x' - x'' y'] / (1 + x'^2 + y'^2)^{3/2}`
/// with spectral z-derivatives.
pub fn lia_velocity(state: &FilamentState, params: &FluidParams) -> VelocityField {
    let spectral = Spectral::for_grid(state.grid());
    let (d1, d2) = spectral.first_and_second(state.psi());
    let c = params.lia_coefficient();
    let velocities = d1
        .iter()
        .zip(&d2)
        .map(|(p1, p2)| {
            let scale = c / (1.0 + p1.norm_sqr()).powf(1.5);
            [-p2.im * scale, p2.re * scale, (p2.im * p1.re - p2.re * p1.im) * scale]
        })
        .collect();
    VelocityField { velocities }
}

/// Axial drift rate of the material points,
/// `c Im(psi'' conj(psi')) / (1 + |psi'|^2)^{3/2}`.
///
/// Identical to the z-component of [`lia_velocity`]; the fixed-grid
/// evolution absorbs it, so it is reported as a diagnostic only.
pub fn axial_drift_rate(state: &FilamentState, params: &FluidParams) -> Vec<f64> {
    lia_velocity(state, params).velocities.iter().map(|v| v[2]).collect()
}

/// Rotation rate of a helix `a e^{ikz}` under a velocity field, expressed as
/// the log-factor `Lambda` in `omega = (Gamma k^2 / 4 pi) Lambda / (1 + a^2 k^2)^{3/2}`.
///
/// The rate is `-Im(v_perp / psi)` averaged over the nodes.
pub fn effective_log_factor(state: &FilamentState, field: &VelocityField, params: &FluidParams, k: f64) -> f64 {
    let omega = state
        .psi()
        .iter()
        .zip(field.transverse())
        .map(|(p, v)| -(v / p).im)
        .sum::<f64>()
        / state.psi().len() as f64;
    let a2 = state.psi().iter().map(|c| c.norm_sqr()).sum::<f64>() / state.psi().len() as f64;
    omega * (1.0 + a2 * k * k).powf(1.5) * 4.0 * PI / (params.circulation * k * k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filament::{make_kelvin_wave, KelvinWaveSpec, ZGrid};

    fn helix(a: f64, points: usize) -> FilamentState {
        make_kelvin_wave(KelvinWaveSpec::new(a, 1, 0.0), ZGrid::new(points, 2.0 * PI).unwrap()).unwrap()
    }

    #[test]
    fn straight_line_induces_nothing() {
        let g = ZGrid::new(64, 2.0 * PI).unwrap();
        let s = FilamentState::straight(g);
        let bs = biot_savart_velocity(&Curve3D::from_state(&s), &FluidParams::unit()).unwrap();
        assert!(bs.velocities.iter().flatten().all(|v| *v == 0.0));
        let lia = lia_velocity(&s, &FluidParams::unit());
        assert!(lia.velocities.iter().flatten().all(|v| *v == 0.0));
    }

    #[test]
    fn helix_velocity_is_symmetric() {
        // Helical symmetry fixes the magnitude and kills the component along
        // the principal normal; the tangential part is O(ak), not zero.
        let a = 0.001;
        let s = helix(a, 128);
        let curve = Curve3D::from_state(&s);
        let bs = biot_savart_velocity(&curve, &FluidParams::unit()).unwrap();
        let spectral = Spectral::for_grid(s.grid());
        let tangent = spectral.derivative(s.psi(), 1);
        let m0 = dot(bs.velocities[0], bs.velocities[0]).sqrt();
        for ((v, t), p) in bs.velocities.iter().zip(&tangent).zip(s.psi()) {
            let m = dot(*v, *v).sqrt();
            assert!((m - m0).abs() / m0 < 1e-9);
            let normal = [-p.re / a, -p.im / a, 0.0];
            assert!(dot(*v, normal).abs() / m < 1e-9);
            let t3 = [t.re, t.im, 1.0];
            let cos = dot(*v, t3) / (m * dot(t3, t3).sqrt());
            assert!(cos.abs() < a, "tangential fraction {cos}");
        }
    }

    #[test]
    fn sequential_and_parallel_sums_match_bitwise() {
        let s = helix(0.01, 96);
        let curve = Curve3D::from_state(&s);
        let p = FluidParams::unit();
        let a = biot_savart_velocity_with(
            &curve,
            &p,
            BiotSavartOptions {
                images: 2,
                execution: Execution::Sequential,
                ..Default::default()
            },
        )
        .unwrap();
        let b = biot_savart_velocity_with(
            &curve,
            &p,
            BiotSavartOptions {
                images: 2,
                execution: Execution::Parallel,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn refinement_converges_with_unresolved_core() {
        let p = FluidParams::unit();
        let lam = |n| {
            let s = helix(0.01, n);
            let f = biot_savart_velocity(&Curve3D::from_state(&s), &p).unwrap();
            effective_log_factor(&s, &f, &p, 1.0)
        };
        let (coarse, fine) = (lam(256), lam(512));
        assert!((coarse - fine).abs() / fine < 1e-2, "{coarse} vs {fine}");
    }

    #[test]
    fn oversized_local_window_is_rejected() {
        let s = helix(0.01, 16);
        let opts = BiotSavartOptions {
            local_segments: 8,
            ..Default::default()
        };
        assert!(biot_savart_velocity_with(&Curve3D::from_state(&s), &FluidParams::unit(), opts).is_err());
    }

    #[test]
    fn curve_validation() {
        let ok: Vec<Vec3> = (0..8).map(|j| [0.0, 0.0, j as f64]).collect();
        assert!(Curve3D::new(ok.clone(), 8.0).is_ok());
        assert!(Curve3D::new(ok[..7].to_vec(), 8.0).is_err());
        let mut bad = ok.clone();
        bad.swap(2, 3);
        assert!(Curve3D::new(bad, 8.0).is_err());
        assert!(Curve3D::new(ok, 7.0).is_err());
    }

    #[test]
    fn lia_helix_is_uniform_rotation() {
        let a = 0.1;
        let s = helix(a, 64);
        let p = FluidParams::unit();
        let v = lia_velocity(&s, &p);
        let c = p.lia_coefficient();
        let d = (1.0 + a * a).powf(1.5);
        for (psi, (vt, full)) in s.psi().iter().zip(v.transverse().iter().zip(&v.velocities)) {
            let expect = Complex64::new(0.0, c) * (-psi) / d;
            assert!((vt - expect).norm() < 1e-14);
            assert!((full[2] - a * a * c / d).abs() < 1e-15);
        }
        let ratio0 = v.transverse()[0] / s.psi()[0];
        for (vt, psi) in v.transverse().iter().zip(s.psi()) {
            assert!(((vt / psi) - ratio0).norm() / ratio0.norm() < 1e-10);
        }
        let drift = axial_drift_rate(&s, &p);
        assert!(drift.iter().all(|d| (d - v.velocities[0][2]).abs() < 1e-15));
    }

    #[test]
    fn lia_linear_regime_scales_with_amplitude() {
        let p = FluidParams::unit();
        let v1 = lia_velocity(&helix(0.001, 64), &p).transverse()[0].norm();
        let v2 = lia_velocity(&helix(0.002, 64), &p).transverse()[0].norm();
        assert!((v2 / v1 - 2.0).abs() / 2.0 < 0.005);
    }

    #[test]
    fn kernel_on_straight_line_vanishes() {
        let local = LocalDerivatives::default();
        for z in [-1.0, -0.1, 0.3, 2.0] {
            assert_eq!(kernel_f(&local, z).unwrap(), [0.0, 0.0, 0.0]);
        }
        assert!(matches!(kernel_f(&local, 0.0), Err(Error::KernelPole)));
    }

    #[test]
    fn kernel_on_parabola() {
        // x = 0, y = z^2/2 at z = 0.1: y = 0.005, y' = 0.1,
        // f_i = (0.01 - 0.005) / (0.01 + 0.000025)^{3/2}
        let local = LocalDerivatives {
            x: [0.0; 3],
            y: [0.0, 1.0, 0.0],
        };
        let f = kernel_f(&local, 0.1).unwrap();
        let expect = 0.005 / 0.010025f64.powf(1.5);
        assert!((f[0] - expect).abs() < 1e-12 * expect);
        assert!((f[0] - 4.98130).abs() < 1e-4);
        assert_eq!(f[1], 0.0);
        assert_eq!(f[2], 0.0);
    }

    #[test]
    fn kernel_pole_part_is_even() {
        // Pure curvature plus a cubic term: the 1/|z| part is symmetric,
        // the cubic contributes an antisymmetric O(1) remainder.
        let local = LocalDerivatives {
            x: [0.0; 3],
            y: [0.0, 1.0, 0.6],
        };
        for z in [1e-4, 1e-3, 1e-2] {
            let fp = kernel_f(&local, z).unwrap()[0];
            let fm = kernel_f(&local, -z).unwrap()[0];
            assert!((fp - 0.5 / z).abs() < 1.0, "pole part at {z}: {fp}");
            assert!((fp - fm).abs() < 1.0);
            assert!(((fp - fm) - 2.0 * 0.6 / 3.0).abs() < 0.05, "odd remainder {}", fp - fm);
        }
    }

    #[test]
    fn polarity_rejects_bad_cutoffs() {
        let g = PolarityGeometry {
            curvature_xx: 0.0,
            curvature_yy: 1.0,
            slope_x: 0.0,
            slope_y: 0.0,
        };
        assert!(polarity_slope(g, 1.0, &[1e-3, 1e-4, 1e-5]).is_err());
        assert!(polarity_slope(g, 1.0, &[1e-3, 1e-5, 1e-4, 1e-6]).is_err());
        assert!(polarity_slope(g, 1e-4, &[1e-3, 1e-4, 1e-5, 1e-6]).is_err());
        assert!(polarity_slope(g, 1.0, &[1e-3, 1e-4, 1e-5, 1e-6]).is_ok());
    }

    #[test]
    fn tilted_tangent_matches_raw_components() {
        let local = LocalDerivatives {
            x: [1.0, 0.5, 0.2],
            y: [0.5, 1.0, -0.3],
        };
        let z: f64 = 0.3;
        let (x, xp) = (z + 0.25 * z * z + 0.2 * z.powi(3) / 6.0, 1.0 + 0.5 * z + 0.1 * z * z);
        let (y, yp) = (0.5 * z + 0.5 * z * z - 0.05 * z.powi(3), 0.5 + z - 0.15 * z * z);
        let r3 = (x * x + y * y + z * z).powf(1.5);
        let raw = [(z * yp - y) / r3, (x - z * xp) / r3, (y * xp - x * yp) / r3];
        let f = kernel_f(&local, z).unwrap();
        for c in 0..3 {
            assert!((f[c] - raw[c]).abs() < 1e-12, "component {c}: {} vs {}", f[c], raw[c]);
        }
    }

    #[test]
    fn polarity_with_slope_converges_quickly() {
        let g = PolarityGeometry {
            curvature_xx: 0.5,
            curvature_yy: 1.0,
            slope_x: 1.0,
            slope_y: 0.5,
        };
        let fit = polarity_slope(g, 0.05, &[1e-4, 3e-5, 1e-5, 3e-6, 1e-6]).unwrap();
        assert!((fit.slope / g.analytic_prefactor() - 1.0).abs() < 1e-6, "{}", fit.slope);
    }
}
