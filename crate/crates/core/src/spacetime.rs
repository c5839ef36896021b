//! Space-time sampling and the joint `(xi, tau)` transform.
//!
//! Samples live on `x_j` (the spatial [`Grid`]) times `t_n = t0 + n dt`,
//! `dt = T / M`, stored row-major with one row per time level. The joint
//! transform stores `C[n][m]` at `(xi_m, tau_n)`, `tau_n = 2 pi n' / T` with
//! `n'` the signed mode of slot `n`. The continuum transform is
//! approximated by `dx dt C` (up to unimodular phases), so
//!
//! ```text
//! ||F u||_{L^2_{xi,tau}} ~= dx dt sqrt(dxi dtau sum |C|^2)
//! F^{-1}[g](x_j, t_n)    ~= ifft2(g / (dx dt))
//! ```

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::dyadic::DyadicSymbol;
use crate::error::{Error, Result};
use crate::evolution::omega;
use crate::fft;
use crate::grid::Grid;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpaceTimeGrid {
    space: Grid,
    t0: f64,
    duration: f64,
    n_times: usize,
}

impl SpaceTimeGrid {
    pub fn new(space: Grid, t0: f64, duration: f64, n_times: usize) -> Result<Self> {
        if !(duration.is_finite() && duration > 0.0) || !t0.is_finite() {
            return Err(Error::Config(format!("bad time window start={t0}, length={duration}")));
        }
        if n_times < 2 || !n_times.is_power_of_two() {
            return Err(Error::Config(format!("time count must be a power of two >= 2, got {n_times}")));
        }
        Ok(Self { space, t0, duration, n_times })
    }

    pub fn space(&self) -> &Grid {
        &self.space
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn n_times(&self) -> usize {
        self.n_times
    }

    pub fn n_points(&self) -> usize {
        self.space.n_points()
    }

    pub fn dt(&self) -> f64 {
        self.duration / self.n_times as f64
    }

    pub fn dtau(&self) -> f64 {
        2.0 * PI / self.duration
    }

    pub fn t(&self, n: usize) -> f64 {
        self.t0 + n as f64 * self.dt()
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.n_times).map(|n| self.t(n)).collect()
    }

    pub fn frequency(&self, n: usize) -> f64 {
        fft::signed_mode(n, self.n_times) as f64 * self.dtau()
    }

    pub fn max_frequency(&self) -> f64 {
        (self.n_times / 2) as f64 * self.dtau()
    }

    pub fn len(&self) -> usize {
        self.n_times * self.space.n_points()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn check_same(&self, other: &SpaceTimeGrid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch("space-time grids differ".into()))
        }
    }
}

/// Real samples `u(x_j, t_n)`, row `n`, column `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeField {
    grid: SpaceTimeGrid,
    values: Vec<f64>,
}

impl SpaceTimeField {
    pub fn new(grid: SpaceTimeGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!("expected {} samples, got {}", grid.len(), values.len())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite space-time sample".into()));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: SpaceTimeGrid) -> Self {
        Self { values: vec![0.0; grid.len()], grid }
    }

    pub fn from_fn(grid: SpaceTimeGrid, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let xs = grid.space().xs();
        let mut values = Vec::with_capacity(grid.len());
        for n in 0..grid.n_times() {
            let t = grid.t(n);
            values.extend(xs.iter().map(|&x| f(x, t)));
        }
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &SpaceTimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, n: usize) -> &[f64] {
        let w = self.grid.n_points();
        &self.values[n * w..(n + 1) * w]
    }

    /// Multiply every time row by `weight(t)`.
    pub fn weight_in_time(&self, weight: impl Fn(f64) -> f64) -> SpaceTimeField {
        let w = self.grid.n_points();
        let mut values = self.values.clone();
        for (n, row) in values.chunks_exact_mut(w).enumerate() {
            let c = weight(self.grid.t(n));
            row.iter_mut().for_each(|v| *v *= c);
        }
        SpaceTimeField { grid: self.grid, values }
    }

    pub fn to_spectral(&self) -> SpaceTimeSpectral {
        let mut buf: Vec<Complex64> = self.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        fft::forward_2d(&mut buf, self.grid.n_times(), self.grid.n_points());
        SpaceTimeSpectral { grid: self.grid, coeffs: buf }
    }
}

/// Joint transform coefficients, row `n` = `tau_n`, column `m` = `xi_m`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeSpectral {
    grid: SpaceTimeGrid,
    coeffs: Vec<Complex64>,
}

/// Which variable a dyadic symbol acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Frequency,
    /// `tau - omega(xi)`.
    Modulation,
    /// Plain `tau`.
    Time,
}

impl SpaceTimeSpectral {
    pub fn new(grid: SpaceTimeGrid, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(Error::GridMismatch(format!("expected {} coefficients, got {}", grid.len(), coeffs.len())));
        }
        Ok(Self { grid, coeffs })
    }

    pub fn zeros(grid: SpaceTimeGrid) -> Self {
        Self { coeffs: vec![Complex64::new(0.0, 0.0); grid.len()], grid }
    }

    /// Coefficients `c(xi, tau)` sampled from a function of the continuum
    /// variables; `c` is the raw coefficient (continuum value / (dx dt)).
    pub fn from_fn(grid: SpaceTimeGrid, f: impl Fn(f64, f64) -> Complex64) -> Self {
        let mut s = Self::zeros(grid);
        s.map_in_place(|xi, tau, _| f(xi, tau));
        s
    }

    pub fn grid(&self) -> &SpaceTimeGrid {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn at(&self, n: usize, m: usize) -> Complex64 {
        self.coeffs[n * self.grid.n_points() + m]
    }

    /// Visit `(xi, tau, coefficient)` for every slot.
    pub fn for_each(&self, mut f: impl FnMut(f64, f64, Complex64)) {
        let w = self.grid.n_points();
        let xis = self.grid.space().wavenumbers();
        for (n, row) in self.coeffs.chunks_exact(w).enumerate() {
            let tau = self.grid.frequency(n);
            for (c, &xi) in row.iter().zip(&xis) {
                f(xi, tau, *c);
            }
        }
    }

    pub fn map_in_place(&mut self, mut f: impl FnMut(f64, f64, Complex64) -> Complex64) {
        let w = self.grid.n_points();
        let xis = self.grid.space().wavenumbers();
        let grid = self.grid;
        for (n, row) in self.coeffs.chunks_exact_mut(w).enumerate() {
            let tau = grid.frequency(n);
            for (c, &xi) in row.iter_mut().zip(&xis) {
                *c = f(xi, tau, *c);
            }
        }
    }

    pub fn map(&self, f: impl FnMut(f64, f64, Complex64) -> Complex64) -> SpaceTimeSpectral {
        let mut out = self.clone();
        out.map_in_place(f);
        out
    }

    pub fn multiply(&self, symbol: impl Fn(f64, f64) -> Complex64) -> SpaceTimeSpectral {
        self.map(|xi, tau, c| c * symbol(xi, tau))
    }

    pub fn scale(&self, s: Complex64) -> SpaceTimeSpectral {
        self.map(|_, _, c| c * s)
    }

    pub fn add(&self, other: &SpaceTimeSpectral) -> Result<SpaceTimeSpectral> {
        self.grid.check_same(&other.grid)?;
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect();
        Ok(SpaceTimeSpectral { grid: self.grid, coeffs })
    }

    pub fn sub(&self, other: &SpaceTimeSpectral) -> Result<SpaceTimeSpectral> {
        self.grid.check_same(&other.grid)?;
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a - b).collect();
        Ok(SpaceTimeSpectral { grid: self.grid, coeffs })
    }

    /// `dx dt sqrt(dxi dtau sum |C|^2)`.
    pub fn l2(&self) -> f64 {
        self.measure() * self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Factor converting `sqrt(sum |C|^2)` into the continuum `L^2_{xi,tau}` norm.
    pub fn measure(&self) -> f64 {
        let g = &self.grid;
        g.space().dx() * g.dt() * (g.space().dxi() * g.dtau()).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Inverse joint transform, complex samples (row = time).
    pub fn to_complex_samples(&self) -> Vec<Complex64> {
        let mut buf = self.coeffs.clone();
        fft::inverse_2d(&mut buf, self.grid.n_times(), self.grid.n_points());
        buf
    }

    /// Inverse joint transform; the imaginary part is dropped.
    pub fn to_physical(&self) -> SpaceTimeField {
        let values = self.to_complex_samples().into_iter().map(|c| c.re).collect();
        SpaceTimeField { grid: self.grid, values }
    }

    /// Pointwise multiplication by a dyadic symbol along `axis`.
    pub fn project(&self, symbol: DyadicSymbol, axis: Axis) -> SpaceTimeSpectral {
        self.map(|xi, tau, c| {
            let v = match axis {
                Axis::Frequency => xi,
                Axis::Modulation => tau - omega(xi),
                Axis::Time => tau,
            };
            c * symbol.eval(v)
        })
    }

    /// Largest `|C|` at points where `inside(xi, tau)` is false, relative to
    /// the largest `|C|` overall.
    pub fn leakage(&self, inside: impl Fn(f64, f64) -> bool) -> f64 {
        let top = self.max_abs();
        if top == 0.0 {
            return 0.0;
        }
        let mut worst: f64 = 0.0;
        self.for_each(|xi, tau, c| {
            if !inside(xi, tau) {
                worst = worst.max(c.norm());
            }
        });
        worst / top
    }
}
