//! Periodic Fourier machinery shared by the steppers and observables.
//!
//! Conventions: `forward` is the unnormalized DFT, `inverse` carries the
//! 1/N factor, so `inverse(forward(x)) == x`. Bin `i` holds the signed mode
//! index `i` for `i <= N/2` and `i - N` above it; the Nyquist bin is reported
//! as `+N/2` and its odd-order derivatives are zeroed.

use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::filament::ZGrid;

pub struct Spectral {
    points: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    wavenumbers: Vec<f64>,
}

thread_local! {
    static PLANS: RefCell<HashMap<(usize, u64), Arc<Spectral>>> = RefCell::new(HashMap::new());
}

impl Spectral {
    pub fn new(grid: &ZGrid) -> Self {
        let n = grid.points();
        let mut planner = FftPlanner::new();
        let dk = 2.0 * std::f64::consts::PI / grid.length();
        let wavenumbers = (0..n).map(|i| signed_mode(i, n) as f64 * dk).collect();
        Self {
            points: n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
            wavenumbers,
        }
    }

    /// Plans are cached per thread, keyed by grid shape.
    pub fn for_grid(grid: &ZGrid) -> Arc<Spectral> {
        let key = (grid.points(), grid.length().to_bits());
        PLANS.with(|plans| {
            plans
                .borrow_mut()
                .entry(key)
                .or_insert_with(|| Arc::new(Spectral::new(grid)))
                .clone()
        })
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn wavenumbers(&self) -> &[f64] {
        &self.wavenumbers
    }

    pub fn forward(&self, values: &[Complex64]) -> Vec<Complex64> {
        let mut buf = values.to_vec();
        self.forward.process(&mut buf);
        buf
    }

    pub fn inverse(&self, coeffs: &[Complex64]) -> Vec<Complex64> {
        let mut buf = coeffs.to_vec();
        self.inverse.process(&mut buf);
        let scale = 1.0 / self.points as f64;
        buf.iter_mut().for_each(|c| *c *= scale);
        buf
    }

    /// Multiplies the spectrum by `(ik)^order` in place.
    pub fn differentiate_spectrum(&self, coeffs: &mut [Complex64], order: u32) {
        let nyquist = self.points / 2;
        for (i, (c, &k)) in coeffs.iter_mut().zip(&self.wavenumbers).enumerate() {
            if i == nyquist && order % 2 == 1 {
                *c = Complex64::new(0.0, 0.0);
            } else {
                *c *= Complex64::new(0.0, k).powu(order);
            }
        }
    }

    pub fn derivative(&self, values: &[Complex64], order: u32) -> Vec<Complex64> {
        let mut coeffs = self.forward(values);
        self.differentiate_spectrum(&mut coeffs, order);
        self.inverse(&coeffs)
    }

    /// First and second derivative from a single forward transform.
    pub fn first_and_second(&self, values: &[Complex64]) -> (Vec<Complex64>, Vec<Complex64>) {
        let coeffs = self.forward(values);
        let mut d1 = coeffs.clone();
        let mut d2 = coeffs;
        self.differentiate_spectrum(&mut d1, 1);
        self.differentiate_spectrum(&mut d2, 2);
        (self.inverse(&d1), self.inverse(&d2))
    }

    /// 2/3-rule: zero every bin with |m| > N/3.
    pub fn dealias(&self, coeffs: &mut [Complex64]) {
        let cutoff = (self.points / 3) as i64;
        for (i, c) in coeffs.iter_mut().enumerate() {
            if signed_mode(i, self.points).abs() > cutoff {
                *c = Complex64::new(0.0, 0.0);
            }
        }
    }

    /// Bin holding signed mode `m`.
    pub fn bin_of(&self, mode: i64) -> usize {
        mode.rem_euclid(self.points as i64) as usize
    }
}

pub fn signed_mode(bin: usize, points: usize) -> i64 {
    if bin <= points / 2 {
        bin as i64
    } else {
        bin as i64 - points as i64
    }
}
