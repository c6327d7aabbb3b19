//! Reusable FFT plans over 1D/2D periodic grids.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::Result;
use crate::grid::GridSpec;

pub struct SpectralPlan {
    dim: usize,
    n0: usize,
    n1: usize,
    fwd: [Arc<dyn Fft<f64>>; 2],
    inv: [Arc<dyn Fft<f64>>; 2],
    scratch: Vec<Complex64>,
    k: [Vec<f64>; 2],
}

impl SpectralPlan {
    pub fn new(spec: &GridSpec) -> Result<Self> {
        spec.require_spectral()?;
        let (n0, n1) = spec.shape();
        let mut planner = FftPlanner::new();
        let fwd = [planner.plan_fft_forward(n0), planner.plan_fft_forward(n1)];
        let inv = [planner.plan_fft_inverse(n0), planner.plan_fft_inverse(n1)];
        let k0 = (0..n0).map(|j| spec.wavenumber(0, j)).collect();
        let k1 = if spec.dim() == 2 {
            (0..n1).map(|j| spec.wavenumber(1, j)).collect()
        } else {
            vec![0.0]
        };
        Ok(Self { dim: spec.dim(), n0, n1, fwd, inv, scratch: vec![Complex64::default(); n0 * n1], k: [k0, k1] })
    }

    pub fn len(&self) -> usize {
        self.n0 * self.n1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Wavenumbers along `axis`, in FFT bin order.
    pub fn wavenumbers(&self, axis: usize) -> &[f64] {
        &self.k[axis]
    }

    /// `|k|²` at flat spectral index `idx`.
    pub fn k_squared(&self, idx: usize) -> f64 {
        let (i, j) = (idx / self.n1, idx % self.n1);
        self.k[0][i].powi(2) + if self.dim == 2 { self.k[1][j].powi(2) } else { 0.0 }
    }

    /// Whether any wavenumber component at `idx` exceeds `frac * kmax[axis]`.
    pub fn beyond_fraction(&self, idx: usize, kmax: &[f64], frac: f64) -> bool {
        let (i, j) = (idx / self.n1, idx % self.n1);
        self.k[0][i].abs() > frac * kmax[0] || (self.dim == 2 && self.k[1][j].abs() > frac * kmax[1])
    }

    /// Unnormalised forward transform in place.
    pub fn forward(&mut self, data: &mut [Complex64]) {
        self.apply(data, true);
    }

    /// Inverse transform in place, including the `1/N` factor.
    pub fn inverse(&mut self, data: &mut [Complex64]) {
        self.apply(data, false);
        let s = 1.0 / self.len() as f64;
        for v in data.iter_mut() {
            *v *= s;
        }
    }

    fn apply(&mut self, data: &mut [Complex64], forward: bool) {
        let plans = if forward { &self.fwd } else { &self.inv };
        if self.dim == 1 {
            plans[0].process(data);
            return;
        }
        let (n0, n1) = (self.n0, self.n1);
        plans[1].process(data);
        for i in 0..n0 {
            for j in 0..n1 {
                self.scratch[j * n0 + i] = data[i * n1 + j];
            }
        }
        plans[0].process(&mut self.scratch);
        for j in 0..n1 {
            for i in 0..n0 {
                data[i * n1 + j] = self.scratch[j * n0 + i];
            }
        }
    }

    /// Gradient components and Laplacian of `values`.
    pub fn gradient_and_laplacian(
        &mut self,
        values: &[Complex64],
    ) -> (Vec<Vec<Complex64>>, Vec<Complex64>) {
        let mut hat = values.to_vec();
        self.forward(&mut hat);
        let mut grads = Vec::with_capacity(self.dim);
        for axis in 0..self.dim {
            let n = if axis == 0 { self.n0 } else { self.n1 };
            let mut g = hat.clone();
            for (idx, v) in g.iter_mut().enumerate() {
                let j = if axis == 0 { idx / self.n1 } else { idx % self.n1 };
                *v = if j == n / 2 {
                    Complex64::default()
                } else {
                    *v * Complex64::new(0.0, self.k[axis][j])
                };
            }
            self.inverse(&mut g);
            grads.push(g);
        }
        for (idx, v) in hat.iter_mut().enumerate() {
            *v *= -self.k_squared(idx);
        }
        self.inverse(&mut hat);
        (grads, hat)
    }
}
