//! Periodic truncation of the real line and the spectral bookkeeping on it.
//!
//! The line is replaced by the torus `[-L, L)` sampled at `N` points
//! `x_j = -L + j dx`, `dx = 2L/N`. Spectral coefficients are stored in FFT
//! order: slot `i` holds mode `m = i` for `i < N/2` and `m = i - N` otherwise,
//! with wavenumber `xi_m = pi m / L`. Slot `N/2` is the Nyquist mode.
//!
//! Normalization: the forward DFT is unnormalized and the inverse divides by
//! `N`. The continuum transform `F(xi) = int f(x) e^{-i x xi} dx` is
//! approximated by `dx * c_m` up to the unimodular phase `(-1)^m`, so that
//!
//! ```text
//! sum_j |f_j|^2 dx = (dx / N) sum_m |c_m|^2          (Parseval)
//! int |F|^2 dxi   ~= dx^2 dxi sum_m |c_m|^2 = 2 pi ||f||_{L^2}^2
//! ```
//!
//! All norm formulas in [`crate::norms`] use the second form, i.e. they carry
//! the grid measure `dxi = pi / L`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft;

/// Smallest accepted number of grid points.
pub const MIN_POINTS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    half_length: f64,
    n_points: usize,
}

impl Grid {
    /// Build the grid `[-L, L)` with `N` points; `N` must be a power of two.
    pub fn new(half_length: f64, n_points: usize) -> Result<Self> {
        if !(half_length.is_finite() && half_length > 0.0) {
            return Err(Error::Config(format!("half length must be positive, got {half_length}")));
        }
        if n_points < MIN_POINTS || !n_points.is_power_of_two() {
            return Err(Error::Config(format!(
                "point count must be a power of two >= {MIN_POINTS}, got {n_points}"
            )));
        }
        Ok(Self { half_length, n_points })
    }

    pub fn half_length(&self) -> f64 {
        self.half_length
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.half_length / self.n_points as f64
    }

    /// Wavenumber spacing `pi / L`.
    pub fn dxi(&self) -> f64 {
        PI / self.half_length
    }

    pub fn x(&self, j: usize) -> f64 {
        -self.half_length + j as f64 * self.dx()
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.n_points).map(|j| self.x(j)).collect()
    }

    pub fn mode(&self, i: usize) -> i64 {
        fft::signed_mode(i, self.n_points)
    }

    pub fn wavenumber(&self, i: usize) -> f64 {
        self.mode(i) as f64 * self.dxi()
    }

    /// Wavenumbers in storage (FFT) order.
    pub fn wavenumbers(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| self.wavenumber(i)).collect()
    }

    /// Wavenumbers sorted ascending, `-N/2 .. N/2-1`.
    pub fn sorted_wavenumbers(&self) -> Vec<f64> {
        let half = (self.n_points / 2) as i64;
        (-half..half).map(|m| m as f64 * self.dxi()).collect()
    }

    pub fn nyquist_index(&self) -> usize {
        self.n_points / 2
    }

    /// Largest resolved |xi| (the Nyquist wavenumber).
    pub fn max_wavenumber(&self) -> f64 {
        (self.n_points / 2) as f64 * self.dxi()
    }

    /// Storage slot of the signed mode `m`.
    pub fn slot(&self, m: i64) -> usize {
        let n = self.n_points as i64;
        m.rem_euclid(n) as usize
    }

    /// Same grid with twice the points on the same interval.
    pub fn refined(&self) -> Grid {
        Grid { half_length: self.half_length, n_points: 2 * self.n_points }
    }

    pub fn check_same(&self, other: &Grid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "(L={}, N={}) vs (L={}, N={})",
                self.half_length, self.n_points, other.half_length, other.n_points
            )))
        }
    }
}

/// Real samples of a field on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalField {
    grid: Grid,
    values: Vec<f64>,
}

impl PhysicalField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_points() {
            return Err(Error::GridMismatch(format!(
                "expected {} samples, got {}",
                grid.n_points(),
                values.len()
            )));
        }
        if let Some(j) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite sample at index {j}")));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        Self { values: vec![0.0; grid.n_points()], grid }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(grid, grid.xs().into_iter().map(f).collect())
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// `sqrt(sum |f_j|^2 dx)`.
    pub fn l2_norm(&self) -> f64 {
        (self.values.iter().map(|v| v * v).sum::<f64>() * self.grid.dx()).sqrt()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn to_spectral(&self) -> SpectralField {
        let mut buf: Vec<Complex64> = self.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        fft::forward(&mut buf);
        SpectralField { grid: self.grid, coeffs: buf }
    }
}

/// DFT coefficients in FFT order (see the module docs for normalization).
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    grid: Grid,
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn new(grid: Grid, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.n_points() {
            return Err(Error::GridMismatch(format!(
                "expected {} coefficients, got {}",
                grid.n_points(),
                coeffs.len()
            )));
        }
        Ok(Self { grid, coeffs })
    }

    pub fn zeros(grid: Grid) -> Self {
        Self { coeffs: vec![Complex64::new(0.0, 0.0); grid.n_points()], grid }
    }

    /// Field whose only nonzero coefficient is `amplitude` at signed mode `m`.
    pub fn single_mode(grid: Grid, m: i64, amplitude: Complex64) -> Self {
        let mut s = Self::zeros(grid);
        let slot = grid.slot(m);
        s.coeffs[slot] = amplitude;
        s
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Complex64> {
        self.coeffs
    }

    /// Inverse transform; the imaginary part is discarded, so the input is
    /// expected to be Hermitian.
    pub fn to_physical(&self) -> PhysicalField {
        let values = self.to_complex_samples().into_iter().map(|c| c.re).collect();
        PhysicalField { grid: self.grid, values }
    }

    pub fn to_complex_samples(&self) -> Vec<Complex64> {
        let mut buf = self.coeffs.clone();
        fft::inverse(&mut buf);
        buf
    }

    /// Multiply coefficient `i` by `symbol(xi_i)`.
    pub fn apply_symbol(&self, symbol: impl Fn(f64) -> Complex64) -> SpectralField {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| c * symbol(self.grid.wavenumber(i)))
            .collect();
        SpectralField { grid: self.grid, coeffs }
    }

    /// Same as [`apply_symbol`](Self::apply_symbol) for real multipliers.
    pub fn apply_real_symbol(&self, symbol: impl Fn(f64) -> f64) -> SpectralField {
        self.apply_symbol(|xi| Complex64::new(symbol(xi), 0.0))
    }

    pub fn scale(&self, c: Complex64) -> SpectralField {
        SpectralField { grid: self.grid, coeffs: self.coeffs.iter().map(|v| v * c).collect() }
    }

    pub fn add(&self, other: &SpectralField) -> Result<SpectralField> {
        self.grid.check_same(&other.grid)?;
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect();
        Ok(SpectralField { grid: self.grid, coeffs })
    }

    pub fn sub(&self, other: &SpectralField) -> Result<SpectralField> {
        self.grid.check_same(&other.grid)?;
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a - b).collect();
        Ok(SpectralField { grid: self.grid, coeffs })
    }

    /// Continuum `L^2_xi` norm with the grid measure: `dx sqrt(dxi sum |c|^2)`.
    pub fn l2_xi(&self) -> f64 {
        let s: f64 = self.coeffs.iter().map(|c| c.norm_sqr()).sum();
        self.grid.dx() * (self.grid.dxi() * s).sqrt()
    }

    /// Physical `L^2_x` norm via Parseval.
    pub fn l2_x(&self) -> f64 {
        let s: f64 = self.coeffs.iter().map(|c| c.norm_sqr()).sum();
        (s * self.grid.dx() / self.grid.n_points() as f64).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Largest deviation from `c(-xi) = conj(c(xi))`, Nyquist excluded.
    pub fn hermitian_defect(&self) -> f64 {
        let n = self.grid.n_points();
        (1..n)
            .filter(|&i| i != n / 2)
            .map(|i| (self.coeffs[i] - self.coeffs[n - i].conj()).norm())
            .fold(self.coeffs[0].im.abs(), f64::max)
    }

    /// Inverse-transform mass `||F^{-1} c||_{L^1_x} = dx sum_j |ifft(c)_j|`.
    pub fn l1_of_inverse(&self) -> f64 {
        self.to_complex_samples().iter().map(|v| v.norm()).sum::<f64>() * self.grid.dx()
    }
}

/// `(i xi)^order`; the Nyquist mode is zeroed for odd orders.
pub fn derivative(field: &SpectralField, order: u32) -> SpectralField {
    let grid = *field.grid();
    let nyq = grid.nyquist_index();
    let mut out = field.clone();
    for (i, c) in out.coeffs.iter_mut().enumerate() {
        if order % 2 == 1 && i == nyq {
            *c = Complex64::new(0.0, 0.0);
            continue;
        }
        *c *= Complex64::new(0.0, grid.wavenumber(i)).powu(order);
    }
    out
}

/// Hilbert transform, symbol `-i sgn(xi)` with `sgn(0) = 0` and the Nyquist
/// mode zeroed.
pub fn hilbert(field: &SpectralField) -> SpectralField {
    let grid = *field.grid();
    let nyq = grid.nyquist_index();
    let mut out = field.clone();
    for (i, c) in out.coeffs.iter_mut().enumerate() {
        let xi = grid.wavenumber(i);
        *c = if i == nyq || xi == 0.0 {
            Complex64::new(0.0, 0.0)
        } else {
            *c * Complex64::new(0.0, -xi.signum())
        };
    }
    out
}
