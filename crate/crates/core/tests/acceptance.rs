//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.
//!
//! Reference values are either closed forms evaluated here or independent
//! quadratures written out in this file.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use num_complex::Complex64;

use vortexline::correspondence::{build_kernel, wavepacket_benchmark, WavepacketSpec};
use vortexline::evolution::{
    characteristic_time, dispersion, evolve, phase_divergence_experiment, rotation_frequency, Scheme, SolverConfig,
};
use vortexline::induction::{
    biot_savart_velocity, effective_log_factor, lia_velocity, polarity_slope, Curve3D, PolarityGeometry,
};
use vortexline::observables::{
    angular_momentum_z, commutator_check, effective_hbar, effective_mass, energy, hamiltonian_expectation, momentum_z,
    quantized_vortex_constants, EnergyMode, ObservableSet, QuantizedVortexParams,
};
use vortexline::quadrature::adaptive_simpson;
use vortexline::{make_kelvin_wave, FilamentState, FluidParams, KelvinWaveSpec, ZGrid};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn unit() -> FluidParams {
    FluidParams::new(1.0, 1.0, 0.8, 1e-4).unwrap()
}

fn two_pi_grid(n: usize) -> ZGrid {
    ZGrid::new(n, 2.0 * PI).unwrap()
}

fn kelvin(a: f64, m: i64, n: usize) -> FilamentState {
    make_kelvin_wave(KelvinWaveSpec::new(a, m, 0.0), two_pi_grid(n)).unwrap()
}

fn helium() -> FluidParams {
    FluidParams::new(9.97e-8, 145.0, 0.8, 1e-10).unwrap()
}

fn he4_characteristic_time() -> Outcome {
    let t0 = characteristic_time(1e-4, 5000.0, &helium()).map_err(|e| e.to_string())?;
    check(
        rel(t0, 93.77) < 1e-3 && (10.0..=100.0).contains(&t0),
        format!("T0 = {t0:.4} s (target 93.77 s +/- 0.1%, band 10-100 s)"),
    )
}

fn dispersion_split() -> Outcome {
    let p = unit();
    let s = kelvin(0.1, 1, 64);
    let d = dispersion(0.1, 1.0, &p).map_err(|e| e.to_string())?;
    // closed forms: c = 0.8 / 4 pi, omega_n = c / sqrt(1.01)
    let c = 0.8 / (4.0 * PI);
    let (wn, wl) = (c / 1.01f64.sqrt(), c);
    let cfg_n = SolverConfig::new(1e-3, 2000, Scheme::NonlinearRk4).unwrap();
    let cfg_l = SolverConfig::new(1e-3, 2000, Scheme::LinearSpectral).unwrap();
    let measured_n = rotation_frequency(&s, &p, &cfg_n).map_err(|e| e.to_string())?;
    let measured_l = rotation_frequency(&s, &p, &cfg_l).map_err(|e| e.to_string())?;
    let (en, el) = (rel(measured_n, wn), rel(measured_l, wl));
    check(
        en < 1e-6 && el < 1e-12 && rel(d.omega_nonlinear, wn) < 1e-15,
        format!("nonlinear {measured_n:.9} (rel err {en:.1e}), linear {measured_l:.12} (rel err {el:.1e})"),
    )
}

fn phase_divergence() -> Outcome {
    let p = unit();
    let grid = two_pi_grid(32);
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    // mode 4 on a 2 pi period: k = 4
    for a in [0.025, 0.075, 0.125] {
        let k = 4.0;
        let t0 = characteristic_time(a, k, &p).map_err(|e| e.to_string())?;
        let dt = 0.05;
        let cfg = SolverConfig::new(dt, (1.2 * t0 / dt).ceil() as usize, Scheme::NonlinearRk4).unwrap();
        let series =
            phase_divergence_experiment(KelvinWaveSpec::new(a, 4, 0.0), grid, &p, &cfg).map_err(|e| e.to_string())?;
        let i = series
            .iter()
            .position(|q| q.difference() >= 0.5 * PI)
            .ok_or_else(|| format!("ak = {}: gap never reached pi/2", a * k))?;
        let (lo, hi) = (&series[i - 1], &series[i]);
        let crossing = lo.t + (0.5 * PI - lo.difference()) / (hi.difference() - lo.difference()) * (hi.t - lo.t);
        let err = rel(crossing, t0);
        worst = worst.max(err);
        parts.push(format!("ak={:.1}: {crossing:.3} vs T0 {t0:.3}", a * k));
    }
    check(
        worst < 0.02,
        format!("{} (worst {worst:.1e}, limit 2%)", parts.join("; ")),
    )
}

fn conservation() -> Outcome {
    let p = unit();
    let g = two_pi_grid(64);
    let mixed = make_kelvin_wave(KelvinWaveSpec::new(0.1, 1, 0.0), g)
        .unwrap()
        .superpose(&make_kelvin_wave(KelvinWaveSpec::new(0.04, -3, 0.7), g).unwrap())
        .unwrap()
        .superpose(&make_kelvin_wave(KelvinWaveSpec::new(0.02, 7, 2.1), g).unwrap())
        .unwrap();
    let first = ObservableSet::measure(&mixed, &p, EnergyMode::Llia).map_err(|e| e.to_string())?;
    let mut linear_worst: f64 = 0.0;
    let cfg = SolverConfig::new(1e-3, 10_000, Scheme::LinearSpectral).unwrap();
    let mut failure = None;
    evolve(&mixed, &p, &cfg, |_, s| {
        match ObservableSet::measure(s, &p, EnergyMode::Llia) {
            Ok(o) => {
                for (a, b) in [
                    (o.volume, first.volume),
                    (o.p_z, first.p_z),
                    (o.l_z, first.l_z),
                    (o.energy, first.energy),
                ] {
                    linear_worst = linear_worst.max(rel(a, b));
                }
            }
            Err(e) => failure = Some(e.to_string()),
        }
    })
    .map_err(|e| e.to_string())?;
    if let Some(e) = failure {
        return Err(e);
    }

    let mut nonlinear_worst: f64 = 0.0;
    for a in [0.1, 0.5] {
        let helix = kelvin(a, 1, 64);
        let v0 = helix.volume();
        let cfg = SolverConfig::new(1e-3, 1000, Scheme::NonlinearRk4).unwrap();
        evolve(&helix, &p, &cfg, |_, s| {
            nonlinear_worst = nonlinear_worst.max(rel(s.volume(), v0))
        })
        .map_err(|e| e.to_string())?;
    }
    check(
        linear_worst < 1e-10 && nonlinear_worst < 1e-6,
        format!("linear 1e4 steps: worst drift of V, p_z, L_z, H {linear_worst:.1e}; nonlinear 1e3 steps (ak 0.1, 0.5): V drift {nonlinear_worst:.1e}"),
    )
}

/// `(x dy - y dx)` around the helix by a trapezoid polygon with `n` points.
fn loop_integral_oracle(a: f64, k: f64, n: usize) -> f64 {
    let dz = 2.0 * PI / n as f64;
    let at = |j: usize| {
        let z = j as f64 * dz;
        (a * (k * z).cos(), a * (k * z).sin())
    };
    (0..n)
        .map(|j| {
            let (x0, y0) = at(j);
            let (x1, y1) = at(j + 1);
            0.5 * ((x0 + x1) * (y1 - y0) - (y0 + y1) * (x1 - x0))
        })
        .sum()
}

fn operator_identities() -> Outcome {
    let p = unit();
    let mut worst: f64 = 0.0;
    for m in 1..=3 {
        let s = kelvin(0.1, m, 64);
        let k = m as f64;
        let v = s.volume();
        let hbar = effective_hbar(&p, v);
        let mass = effective_mass(&p, v);
        let pz = momentum_z(&s, &p).map_err(|e| e.to_string())?;
        let lz = angular_momentum_z(&s, &p);
        let e = energy(&s, &p, EnergyMode::Llia);
        let expect = hamiltonian_expectation(&s, &p).map_err(|e| e.to_string())?;
        let omega_l = p.lia_coefficient() * k * k;
        for err in [
            rel(pz, hbar * k),
            rel(lz, -hbar),
            rel(e, hbar * omega_l),
            rel(e, pz * pz / (2.0 * mass)),
            rel(expect, e),
        ] {
            worst = worst.max(err);
        }
    }
    let s = kelvin(0.1, 1, 64);
    let pz = momentum_z(&s, &p).map_err(|e| e.to_string())?;
    let h = energy(&s, &p, EnergyMode::Llia);
    let pz_oracle = 0.5 * loop_integral_oracle(0.1, 1.0, 200_000);
    // |psi'|^2 = (ak)^2 integrated by a 2e5-point midpoint rule
    let n = 200_000;
    let dz = 2.0 * PI / n as f64;
    let grad: f64 = (0..n)
        .map(|j| {
            let z = (j as f64 + 0.5) * dz;
            (Complex64::i() * Complex64::from_polar(0.1, z)).norm_sqr() * dz
        })
        .sum();
    let h_oracle = 0.8 / (8.0 * PI) * grad;
    let ok = worst < 1e-10
        && (pz - 0.0314159).abs() < 1e-7
        && (h - 0.002).abs() < 1e-12
        && rel(pz, pz_oracle) < 1e-8
        && rel(h, h_oracle) < 1e-10;
    check(
        ok,
        format!("worst identity gap {worst:.1e}; p_z = {pz:.7} (loop oracle {pz_oracle:.7}); H = {h:.6} (quadrature {h_oracle:.6})"),
    )
}

fn commutator() -> Outcome {
    let n = 256;
    let l = 2.0 * PI;
    let g = ZGrid::new(n, l).unwrap();
    let w = l / 20.0;
    let psi = (0..n)
        .map(|j| {
            let z = g.z(j) - l / 2.0;
            Complex64::new((-z * z / (2.0 * w * w)).exp(), 0.0)
        })
        .collect();
    let s = FilamentState::new(g, psi, 0.0).unwrap();
    let d = commutator_check(&s, &unit());
    check(
        d < 1e-8,
        format!("max relative deviation {d:.1e} on N = {n} (limit 1e-8)"),
    )
}

fn polarity() -> Outcome {
    let sigmas = [1e-4, 3e-5, 1e-5, 3e-6, 1e-6];
    let l = 0.05;
    let mut worst: f64 = 0.0;
    let mut flat: f64 = 0.0;
    for curvature in [0.0, 0.1, 0.5, 1.0, 2.0] {
        for slope in [0.0, 0.5, 1.0] {
            let g = PolarityGeometry {
                curvature_xx: 0.5 * curvature,
                curvature_yy: curvature,
                slope_x: slope,
                slope_y: 0.5 * slope,
            };
            let fit = polarity_slope(g, l, &sigmas).map_err(|e| e.to_string())?;
            // y'' (1 + x'^2 + y'^2)^{-3/2}
            let expected = curvature / (1.0 + 1.25 * slope * slope).powf(1.5);
            if curvature == 0.0 {
                flat = flat.max(fit.slope.abs());
            } else {
                worst = worst.max(rel(fit.slope, expected));
            }
        }
    }
    check(
        worst < 1e-2 && flat < 1e-6,
        format!("worst relative slope error {worst:.1e} over 12 geometries; zero curvature |slope| {flat:.1e}"),
    )
}

/// Smoothed Biot-Savart rotation rate of the node at z = 0 of the helix
/// `a e^{ikz}`, integrated directly over `|u| <= reach`, as a log factor.
fn continuous_helix_log_factor(a: f64, k: f64, sigma: f64, reach: f64) -> f64 {
    let point = [a, 0.0, 0.0];
    let velocity = |u: f64, comp: usize| {
        let s = [a * (k * u).cos(), a * (k * u).sin(), u];
        let ds = [-a * k * (k * u).sin(), a * k * (k * u).cos(), 1.0];
        let r = [point[0] - s[0], point[1] - s[1], point[2] - s[2]];
        let c = [
            ds[1] * r[2] - ds[2] * r[1],
            ds[2] * r[0] - ds[0] * r[2],
            ds[0] * r[1] - ds[1] * r[0],
        ];
        c[comp] / (r[0] * r[0] + r[1] * r[1] + r[2] * r[2] + sigma * sigma).powf(1.5)
    };
    // panels graded geometrically away from the node
    let mut edges = vec![0.0];
    let mut e = sigma;
    while e < reach {
        edges.push(e);
        e *= 4.0;
    }
    edges.push(reach);
    let integrate = |comp: usize| {
        let f = |u: f64| velocity(u, comp) + velocity(-u, comp);
        edges
            .windows(2)
            .map(|w| adaptive_simpson(&f, w[0], w[1], 1e-10))
            .sum::<f64>()
    };
    let vy = integrate(1) / (4.0 * PI);
    // psi(0) = a, so omega = -Im(v_perp / psi) = -v_y / a
    let omega = -vy / a;
    omega * (1.0 + a * a * k * k).powf(1.5) * 4.0 * PI / (k * k)
}

fn biot_savart_vs_lia() -> Outcome {
    let p = unit();
    let s = kelvin(0.01, 1, 512);
    let curve = Curve3D::from_state(&s);
    let bs = biot_savart_velocity(&curve, &p).map_err(|e| e.to_string())?;
    let lia = lia_velocity(&s, &p);
    let cos = bs.min_cosine_similarity(&lia);
    let lambda = effective_log_factor(&s, &bs, &p, 1.0);
    let reference = (1.0 / p.core_radius).ln();
    let oracle = continuous_helix_log_factor(0.01, 1.0, p.core_radius, 3.0 * PI);
    let ratio = lambda / reference;
    check(
        cos > 0.999 && (0.5..=2.0).contains(&ratio) && rel(lambda, oracle) < 1e-2,
        format!(
            "min cosine {cos:.7}; log factor {lambda:.4} vs ln(1/k sigma) {reference:.4} (ratio {ratio:.3}); continuous quadrature {oracle:.4} (gap {:.1e})",
            rel(lambda, oracle)
        ),
    )
}

fn path_integral() -> Outcome {
    let p = unit();
    let g = two_pi_grid(128);
    let dt = 0.5;
    let v = kelvin(0.1, 1, 128).volume();
    let kernel = build_kernel(g, dt, &p, v, 4).map_err(|e| e.to_string())?;
    let band = 128 / 3;
    let mut phase_err: f64 = 0.0;
    for m in -band..=band {
        let k = g.wavenumber(m);
        let eig = kernel.mode_eigenvalue(m);
        let expected = -p.lia_coefficient() * k * k * dt;
        // compare on the circle: the phase is only defined modulo 2 pi
        let diff = (eig / eig.norm() * Complex64::from_polar(1.0, -expected)).arg().abs();
        phase_err = phase_err.max(diff);
    }

    let t = 0.25 / p.lia_coefficient();
    let steps = 400;
    let cfg = SolverConfig::new(t / steps as f64, steps, Scheme::LinearSpectral).unwrap();
    let run = wavepacket_benchmark(
        WavepacketSpec::new(10.0, 0.5, 0),
        ZGrid::new(256, 20.0).unwrap(),
        &p,
        &cfg,
    )
    .map_err(|e| e.to_string())?;
    // sigma^2(t) = sigma0^2 (1 + (c t / sigma0^2)^2) with c = Gamma ln(eps) / 4 pi
    let c = 0.8 / (4.0 * PI);
    let mut spread_err: f64 = 0.0;
    for pt in &run.points {
        let analytic = 0.5 * (1.0 + (c * pt.t / 0.25).powi(2)).sqrt();
        spread_err = spread_err.max(rel(pt.sigma, analytic));
    }
    let last = run.points.last().ok_or("empty packet run")?;
    check(
        phase_err < 1e-6 && spread_err < 1e-4 && !run.reached_seam && (last.sigma - 0.5 * std::f64::consts::SQRT_2).abs() < 1e-4,
        format!(
            "eigenphase error {phase_err:.1e} over {} modes; packet sigma({:.3}) = {:.6}, worst spreading error {spread_err:.1e}",
            2 * band + 1,
            last.t,
            last.sigma
        ),
    )
}

fn ulps(a: f64, b: f64) -> u64 {
    (a.to_bits() as i64 - b.to_bits() as i64).unsigned_abs()
}

fn quantized_vortex() -> Outcome {
    let h = 6.62607015e-34;
    let m = 6.6464731e-27;
    let hbar = h / (2.0 * PI);
    let mut worst = 0;
    let mut gamma = 0.0;
    for n in 1..=10u32 {
        let qv = QuantizedVortexParams {
            atom_mass: m,
            atom_count: n,
            planck: h,
        };
        let c = quantized_vortex_constants(qv, 1e-12, 0.8).map_err(|e| e.to_string())?;
        worst = worst.max(ulps(c.hbar_eff, f64::from(n) * hbar));
        gamma = c.circulation;
    }
    let three_figures = format!("{gamma:.2e}") == "9.97e-8";
    check(
        three_figures && worst <= 1,
        format!("Gamma = h/m = {gamma:.5e} m^2/s; hbar_eff vs n hbar worst {worst} ulp for n = 1..10"),
    )
}

fn convergence_order() -> Outcome {
    let p = unit();
    let g = two_pi_grid(32);
    let s = make_kelvin_wave(KelvinWaveSpec::new(0.2, 1, 0.0), g)
        .unwrap()
        .superpose(&make_kelvin_wave(KelvinWaveSpec::new(0.1, 2, 0.5), g).unwrap())
        .unwrap()
        .superpose(&make_kelvin_wave(KelvinWaveSpec::new(0.05, -3, 1.0), g).unwrap())
        .unwrap();
    let t = 2.0;
    let run = |dt: f64| {
        let cfg = SolverConfig::new(dt, (t / dt).round() as usize, Scheme::NonlinearRk4).unwrap();
        evolve(&s, &p, &cfg, |_, _| {}).map_err(|e| e.to_string())
    };
    let base = 0.1;
    let reference = run(base / 16.0)?;
    let mut errors = Vec::new();
    for dt in [base, base / 2.0, base / 4.0] {
        let out = run(dt)?;
        errors.push(
            out.psi()
                .iter()
                .zip(reference.psi())
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max),
        );
    }
    let orders: Vec<f64> = errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    check(
        orders.iter().all(|q| (q - 4.0).abs() <= 0.2),
        format!(
            "errors {:.2e}, {:.2e}, {:.2e}; orders {:.3}, {:.3}",
            errors[0], errors[1], errors[2], orders[0], orders[1]
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("He-4 characteristic time", he4_characteristic_time),
        ("dispersion split", dispersion_split),
        ("phase divergence at T0", phase_divergence),
        ("conservation suite", conservation),
        ("operator identities", operator_identities),
        ("commutator", commutator),
        ("polarity diagnostic", polarity),
        ("Biot-Savart vs LIA", biot_savart_vs_lia),
        ("path-integral equivalence", path_integral),
        ("quantized-vortex algebra", quantized_vortex),
        ("nonlinear convergence order", convergence_order),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let outcome = run();
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  {:>2}  {name}: {detail} [{secs:.2} s]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {:>2}  {name}: {detail} [{secs:.2} s]", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
