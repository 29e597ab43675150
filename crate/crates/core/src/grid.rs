//! Periodic uniform grid on the torus `(L·T)^d` with Fourier transforms,
//! spectral differential operators, quadrature and low-pass projections.
//!
//! Spectral coefficients are normalized so that
//! `f(x) = Σ_k f̂_k exp(i k·x)`, i.e. the forward transform divides by the
//! number of grid points. With this convention the mean of a field is its
//! zero-mode coefficient and `∫|f|² dx = |Ω| Σ_k |f̂_k|²`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Spectral coefficients in the flat row-major layout of the grid.
pub type Spectrum = Vec<Complex64>;

pub struct TorusGrid {
    dim: usize,
    n: usize,
    side_length: f64,
    len: usize,
    forward_plan: Arc<dyn Fft<f64>>,
    inverse_plan: Arc<dyn Fft<f64>>,
    modes: Vec<[i64; 3]>,
    k_squared: Vec<f64>,
    dealias_keep: Vec<bool>,
}

impl fmt::Debug for TorusGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TorusGrid")
            .field("dim", &self.dim)
            .field("points_per_axis", &self.n)
            .field("side_length", &self.side_length)
            .finish()
    }
}

impl PartialEq for TorusGrid {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.n == other.n && self.side_length == other.side_length
    }
}

impl TorusGrid {
    pub fn new(dim: usize, points_per_axis: usize, side_length: f64) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::config("grid.dim", format!("must be 1, 2 or 3 (got {dim})")));
        }
        if points_per_axis < 8 || !points_per_axis.is_multiple_of(2) {
            return Err(Error::config(
                "grid.points_per_axis",
                format!("must be an even integer >= 8 (got {points_per_axis})"),
            ));
        }
        if !(side_length.is_finite() && side_length > 0.0) {
            return Err(Error::config(
                "grid.side_length",
                format!("must be positive and finite (got {side_length})"),
            ));
        }
        let n = points_per_axis;
        let len = n.pow(dim as u32);
        let mut planner = FftPlanner::new();
        let forward_plan = planner.plan_fft_forward(n);
        let inverse_plan = planner.plan_fft_inverse(n);

        let scale = 2.0 * PI / side_length;
        let mut modes = Vec::with_capacity(len);
        let mut k_squared = Vec::with_capacity(len);
        let mut dealias_keep = Vec::with_capacity(len);
        for flat in 0..len {
            let mut mode = [0i64; 3];
            let mut rem = flat;
            for axis in (0..dim).rev() {
                let i = rem % n;
                rem /= n;
                mode[axis] = signed_index(i, n);
            }
            let k2: f64 = mode.iter().map(|&m| (m as f64 * scale).powi(2)).sum();
            let keep = mode.iter().all(|&m| 3 * m.unsigned_abs() < n as u64);
            modes.push(mode);
            k_squared.push(k2);
            dealias_keep.push(keep);
        }

        Ok(Self {
            dim,
            n,
            side_length,
            len,
            forward_plan,
            inverse_plan,
            modes,
            k_squared,
            dealias_keep,
        })
    }

    /// Default `2π` side length.
    pub fn periodic(dim: usize, points_per_axis: usize) -> Result<Self> {
        Self::new(dim, points_per_axis, 2.0 * PI)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points_per_axis(&self) -> usize {
        self.n
    }

    pub fn side_length(&self) -> f64 {
        self.side_length
    }

    /// Total number of grid points, `points_per_axis^dim`.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn cell_volume(&self) -> f64 {
        (self.side_length / self.n as f64).powi(self.dim as i32)
    }

    /// `|Ω| = side_length^dim`.
    pub fn volume(&self) -> f64 {
        self.side_length.powi(self.dim as i32)
    }

    pub fn spacing(&self) -> f64 {
        self.side_length / self.n as f64
    }

    /// Index of the Nyquist mode along each axis.
    pub fn nyquist(&self) -> usize {
        self.n / 2
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.n.pow((self.dim - 1 - axis) as u32)
    }

    /// Integer wavevector (mode index per axis) of a flat spectral index.
    pub fn mode(&self, flat: usize) -> [i64; 3] {
        self.modes[flat]
    }

    /// Physical wavenumber `2π m / L` along `axis` for a flat spectral index.
    pub fn wavenumber(&self, flat: usize, axis: usize) -> f64 {
        self.modes[flat][axis] as f64 * 2.0 * PI / self.side_length
    }

    pub fn k_squared(&self, flat: usize) -> f64 {
        self.k_squared[flat]
    }

    /// Largest absolute mode index of a flat spectral index (sup-norm).
    pub fn mode_sup(&self, flat: usize) -> u64 {
        self.modes[flat].iter().map(|m| m.unsigned_abs()).max().unwrap_or(0)
    }

    pub fn is_nyquist_along(&self, flat: usize, axis: usize) -> bool {
        self.modes[flat][axis] == -(self.n as i64 / 2)
    }

    /// Flat spectral index of an integer wavevector (negative modes wrap).
    pub fn flat_index_of_mode(&self, mode: &[i64]) -> usize {
        let n = self.n as i64;
        mode.iter()
            .take(self.dim)
            .fold(0usize, |acc, &m| acc * self.n + m.rem_euclid(n) as usize)
    }

    /// Physical coordinates of a grid point.
    pub fn point(&self, flat: usize) -> [f64; 3] {
        let h = self.spacing();
        let mut x = [0.0; 3];
        let mut rem = flat;
        for axis in (0..self.dim).rev() {
            x[axis] = (rem % self.n) as f64 * h;
            rem /= self.n;
        }
        x
    }

    /// Samples a function of position on every grid point.
    pub fn sample<F: Fn([f64; 3]) -> f64>(&self, f: F) -> Vec<f64> {
        (0..self.len).map(|i| f(self.point(i))).collect()
    }

    fn check_len(&self, found: usize) -> Result<()> {
        if found == self.len {
            Ok(())
        } else {
            Err(Error::Shape {
                expected: self.len,
                found,
            })
        }
    }

    fn check_axis(&self, axis: usize) -> Result<()> {
        if axis < self.dim {
            Ok(())
        } else {
            Err(Error::Axis {
                axis,
                dim: self.dim,
            })
        }
    }

    fn transform_axes(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        let n = self.n;
        let mut scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];
        let mut line = vec![Complex64::default(); n];
        for axis in 0..self.dim {
            let stride = self.stride(axis);
            if stride == 1 {
                plan.process_with_scratch(data, &mut scratch);
                continue;
            }
            let block = stride * n;
            for outer in (0..data.len()).step_by(block) {
                for inner in 0..stride {
                    let base = outer + inner;
                    for (j, slot) in line.iter_mut().enumerate() {
                        *slot = data[base + j * stride];
                    }
                    plan.process_with_scratch(&mut line, &mut scratch);
                    for (j, value) in line.iter().enumerate() {
                        data[base + j * stride] = *value;
                    }
                }
            }
        }
    }

    pub(crate) fn forward_raw(&self, values: &[f64]) -> Spectrum {
        let mut data: Spectrum = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.transform_axes(&mut data, &self.forward_plan);
        let inv = 1.0 / self.len as f64;
        for c in &mut data {
            *c *= inv;
        }
        data
    }

    pub(crate) fn backward_raw(&self, spectrum: &[Complex64]) -> Vec<f64> {
        let mut data = spectrum.to_vec();
        self.transform_axes(&mut data, &self.inverse_plan);
        data.into_iter().map(|c| c.re).collect()
    }

    /// Forward transform of real grid values.
    pub fn transform_forward(&self, values: &[f64]) -> Result<Spectrum> {
        self.check_len(values.len())?;
        Ok(self.forward_raw(values))
    }

    /// Inverse transform; the imaginary part of the result is discarded.
    pub fn transform_backward(&self, spectrum: &[Complex64]) -> Result<Vec<f64>> {
        self.check_len(spectrum.len())?;
        Ok(self.backward_raw(spectrum))
    }

    pub(crate) fn multiply_raw<F>(&self, values: &[f64], multiplier: F) -> Vec<f64>
    where
        F: Fn(usize) -> Complex64,
    {
        let mut spec = self.forward_raw(values);
        for (flat, c) in spec.iter_mut().enumerate() {
            *c *= multiplier(flat);
        }
        self.backward_raw(&spec)
    }

    /// Symbol of `∂/∂x_axis`; the Nyquist mode along `axis` is zeroed.
    pub(crate) fn derivative_symbol(&self, flat: usize, axis: usize) -> Complex64 {
        if self.is_nyquist_along(flat, axis) {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(0.0, self.wavenumber(flat, axis))
        }
    }

    pub(crate) fn derivative_raw(&self, values: &[f64], axis: usize) -> Vec<f64> {
        self.multiply_raw(values, |flat| self.derivative_symbol(flat, axis))
    }

    pub(crate) fn gradient_raw(&self, values: &[f64]) -> Vec<Vec<f64>> {
        let spec = self.forward_raw(values);
        (0..self.dim)
            .map(|axis| {
                let shifted: Spectrum = spec
                    .iter()
                    .enumerate()
                    .map(|(flat, c)| c * self.derivative_symbol(flat, axis))
                    .collect();
                self.backward_raw(&shifted)
            })
            .collect()
    }

    pub(crate) fn laplacian_power_raw(&self, values: &[f64], p: u32) -> Vec<f64> {
        let sign = if p.is_multiple_of(2) { 1.0 } else { -1.0 };
        self.multiply_raw(values, |flat| {
            Complex64::new(sign * self.k_squared[flat].powi(p as i32), 0.0)
        })
    }

    pub(crate) fn dealias_raw(&self, values: &[f64]) -> Vec<f64> {
        let mut spec = self.forward_raw(values);
        for (c, &keep) in spec.iter_mut().zip(&self.dealias_keep) {
            if !keep {
                *c = Complex64::new(0.0, 0.0);
            }
        }
        self.backward_raw(&spec)
    }

    pub(crate) fn galerkin_raw(&self, values: &[f64], cutoff: usize) -> Vec<f64> {
        let mut spec = self.forward_raw(values);
        for (flat, c) in spec.iter_mut().enumerate() {
            if self.mode_sup(flat) > cutoff as u64 {
                *c = Complex64::new(0.0, 0.0);
            }
        }
        self.backward_raw(&spec)
    }

    /// Whether the 2/3 rule keeps this mode.
    pub fn dealias_keeps(&self, flat: usize) -> bool {
        self.dealias_keep[flat]
    }

    /// Spectral partial derivative along `axis`.
    pub fn derivative(&self, values: &[f64], axis: usize) -> Result<Vec<f64>> {
        self.check_len(values.len())?;
        self.check_axis(axis)?;
        Ok(self.derivative_raw(values, axis))
    }

    pub fn gradient(&self, values: &[f64]) -> Result<Vec<Vec<f64>>> {
        self.check_len(values.len())?;
        Ok(self.gradient_raw(values))
    }

    /// `Δ^p` in one spectral pass, multiplying by `(-|k|²)^p`; `1 <= p <= 5`.
    pub fn laplacian_power(&self, values: &[f64], p: u32) -> Result<Vec<f64>> {
        self.check_len(values.len())?;
        if !(1..=5).contains(&p) {
            return Err(Error::Domain(format!("laplacian power must be in 1..=5, got {p}")));
        }
        Ok(self.laplacian_power_raw(values, p))
    }

    pub fn laplacian(&self, values: &[f64]) -> Result<Vec<f64>> {
        self.laplacian_power(values, 1)
    }

    /// Low-pass projection keeping modes whose largest absolute index is at
    /// most `cutoff`. `cutoff = 0` returns the mean; `cutoff >= N/2` is the
    /// identity.
    pub fn galerkin_project(&self, values: &[f64], cutoff: usize) -> Result<Vec<f64>> {
        self.check_len(values.len())?;
        Ok(self.galerkin_raw(values, cutoff))
    }

    /// 2/3-rule truncation: zeroes every mode with `3|m_i| >= N` on some axis.
    pub fn dealias(&self, values: &[f64]) -> Result<Vec<f64>> {
        self.check_len(values.len())?;
        Ok(self.dealias_raw(values))
    }

    pub(crate) fn integrate_raw(&self, values: &[f64]) -> f64 {
        self.cell_volume() * values.iter().sum::<f64>()
    }

    /// Uniform Riemann sum; exact for trigonometric polynomials resolved by the grid.
    pub fn integrate(&self, values: &[f64]) -> Result<f64> {
        self.check_len(values.len())?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("integrand"));
        }
        Ok(self.integrate_raw(values))
    }

    /// `‖f‖²_{H^s} = |Ω| Σ_k (1+|k|²)^s |f̂_k|²`.
    pub fn sobolev_norm_sq(&self, values: &[f64], s: u32) -> Result<f64> {
        self.check_len(values.len())?;
        let spec = self.forward_raw(values);
        Ok(self.volume()
            * spec
                .iter()
                .enumerate()
                .map(|(flat, c)| (1.0 + self.k_squared[flat]).powi(s as i32) * c.norm_sqr())
                .sum::<f64>())
    }
}

fn signed_index(i: usize, n: usize) -> i64 {
    if i < n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}
