//! Uniform periodic grids and FFT-based derivatives.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{require_positive, Error, Result};

/// Uniform periodic grid `x_i = x_min + i * dx`, `dx = length / n`.
///
/// The right end point `x_min + length` is identified with `x_min`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub n: usize,
    pub x_min: f64,
    pub length: f64,
}

impl Grid {
    pub fn new(n: usize, x_min: f64, length: f64) -> Result<Self> {
        let grid = Self { n, x_min, length };
        grid.validate()?;
        Ok(grid)
    }

    /// Grid symmetric about the origin, `[-length/2, length/2)`.
    pub fn centered(n: usize, length: f64) -> Result<Self> {
        Self::new(n, -0.5 * length, length)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 4 {
            return Err(Error::InvalidParameter {
                name: "n",
                reason: format!("need at least 4 grid points, got {}", self.n),
            });
        }
        if !self.x_min.is_finite() {
            return Err(Error::InvalidParameter { name: "x_min", reason: "must be finite".into() });
        }
        require_positive("length", self.length)
    }

    #[inline]
    pub fn dx(&self) -> f64 {
        self.length / self.n as f64
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.x(i)).collect()
    }

    /// Signed angular wavenumbers in FFT order.
    pub fn wavenumbers(&self) -> Vec<f64> {
        let dk = 2.0 * PI / self.length;
        (0..self.n)
            .map(|j| {
                let j = j as isize;
                let n = self.n as isize;
                let m = if j <= (n - 1) / 2 { j } else { j - n };
                m as f64 * dk
            })
            .collect()
    }

    /// Largest resolved wavenumber, `pi / dx`.
    pub fn nyquist(&self) -> f64 {
        PI / self.dx()
    }

    /// Rectangle rule, which is the trapezoid rule on a periodic grid.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        debug_assert_eq!(f.len(), self.n);
        f.iter().sum::<f64>() * self.dx()
    }

    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        (0..self.n).map(|i| f(self.x(i))).collect()
    }
}

/// FFT plans and wavenumbers for one grid.
#[derive(Clone)]
pub struct Spectral {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    k: Vec<f64>,
}

impl fmt::Debug for Spectral {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Spectral").field("n", &self.n).finish()
    }
}

impl Spectral {
    pub fn new(grid: &Grid) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n: grid.n,
            forward: planner.plan_fft_forward(grid.n),
            inverse: planner.plan_fft_inverse(grid.n),
            k: grid.wavenumbers(),
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn wavenumbers(&self) -> &[f64] {
        &self.k
    }

    pub fn forward(&self, buf: &mut [Complex64]) {
        self.forward.process(buf);
    }

    /// Normalised inverse transform.
    pub fn inverse(&self, buf: &mut [Complex64]) {
        self.inverse.process(buf);
        let scale = 1.0 / self.n as f64;
        for z in buf.iter_mut() {
            *z *= scale;
        }
    }

    /// Multiply the transform of `buf` by `multiplier(k)` in place.
    pub fn apply_multiplier(&self, buf: &mut [Complex64], multiplier: impl Fn(f64) -> Complex64) {
        self.forward(buf);
        for (z, &k) in buf.iter_mut().zip(&self.k) {
            *z *= multiplier(k);
        }
        self.inverse(buf);
    }

    fn derivative_factor(&self, j: usize, order: u32) -> Complex64 {
        // The Nyquist mode has no sign, odd derivatives of it are dropped.
        if order % 2 == 1 && self.n.is_multiple_of(2) && j == self.n / 2 {
            return Complex64::new(0.0, 0.0);
        }
        Complex64::new(0.0, self.k[j]).powu(order)
    }

    pub fn derivative_complex(&self, f: &[Complex64], order: u32) -> Vec<Complex64> {
        let mut buf = f.to_vec();
        self.forward(&mut buf);
        for (j, z) in buf.iter_mut().enumerate() {
            *z *= self.derivative_factor(j, order);
        }
        self.inverse(&mut buf);
        buf
    }

    /// Several derivatives of a complex field from a single forward transform.
    pub fn derivatives_complex(&self, f: &[Complex64], orders: &[u32]) -> Vec<Vec<Complex64>> {
        let mut spectrum = f.to_vec();
        self.forward(&mut spectrum);
        orders
            .iter()
            .map(|&order| {
                let mut buf: Vec<Complex64> =
                    spectrum.iter().enumerate().map(|(j, z)| z * self.derivative_factor(j, order)).collect();
                self.inverse(&mut buf);
                buf
            })
            .collect()
    }

    pub fn derivative(&self, f: &[f64], order: u32) -> Vec<f64> {
        let buf: Vec<Complex64> = f.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.derivative_complex(&buf, order).into_iter().map(|z| z.re).collect()
    }

    pub fn derivatives(&self, f: &[f64], orders: &[u32]) -> Vec<Vec<f64>> {
        let buf: Vec<Complex64> = f.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.derivatives_complex(&buf, orders).into_iter().map(|d| d.into_iter().map(|z| z.re).collect()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wavenumbers_are_in_fft_order() {
        let g = Grid::new(8, 0.0, 2.0 * PI).unwrap();
        let k = g.wavenumbers();
        assert_eq!(k, vec![0.0, 1.0, 2.0, 3.0, -4.0, -3.0, -2.0, -1.0]);
    }

    #[test]
    fn spectral_derivative_of_trig_is_exact() {
        let g = Grid::new(64, 0.0, 2.0 * PI).unwrap();
        let s = Spectral::new(&g);
        let f = g.sample(|x| (3.0 * x).sin());
        let d = s.derivatives(&f, &[1, 2, 3, 4]);
        for i in 0..g.n {
            let x = g.x(i);
            assert!((d[0][i] - 3.0 * (3.0 * x).cos()).abs() < 1e-12);
            assert!((d[1][i] + 9.0 * (3.0 * x).sin()).abs() < 1e-11);
            assert!((d[2][i] + 27.0 * (3.0 * x).cos()).abs() < 1e-10);
            assert!((d[3][i] - 81.0 * (3.0 * x).sin()).abs() < 1e-9);
        }
    }

    #[test]
    fn derivative_of_constant_vanishes_and_sums_to_zero() {
        let g = Grid::centered(32, 10.0).unwrap();
        let s = Spectral::new(&g);
        let d = s.derivative(&vec![2.5; 32], 1);
        assert!(d.iter().all(|v| v.abs() < 1e-14));
        let f = g.sample(|x| (-x * x).exp());
        let total: f64 = s.derivative(&f, 1).iter().sum();
        assert!(total.abs() < 1e-13);
    }

    #[test]
    fn rejects_degenerate_grids() {
        assert!(Grid::new(2, 0.0, 1.0).is_err());
        assert!(Grid::new(16, 0.0, -1.0).is_err());
        assert!(Grid::new(16, f64::NAN, 1.0).is_err());
    }
}
