//! Initial data and forcing families.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::grid::{Grid, PhysicalField, SpectralField};
use crate::norms::refined_sobolev_norm;
use crate::spacetime::{SpaceTimeField, SpaceTimeGrid};

/// Width of the default Gaussian `a e^{-x^2 / w^2}`.
pub const DEFAULT_WIDTH: f64 = 2.0;

pub fn gaussian(grid: Grid, amplitude: f64, width: f64) -> Result<PhysicalField> {
    if !(width > 0.0) {
        return Err(Error::Config(format!("Gaussian width must be positive, got {width}")));
    }
    PhysicalField::from_fn(grid, |x| amplitude * (-(x / width).powi(2)).exp())
}

/// Rescales `phi` so that its reported `H̃^0` norm equals `target`.
pub fn scale_to_refined_norm(phi: &PhysicalField, target: f64) -> Result<PhysicalField> {
    let n = refined_sobolev_norm(&phi.to_spectral(), 0.0)?.total;
    if n == 0.0 {
        return Err(Error::Degenerate("cannot rescale zero data".into()));
    }
    let s = target / n;
    PhysicalField::new(*phi.grid(), phi.values().iter().map(|v| v * s).collect())
}

/// Default small data: Gaussian of width [`DEFAULT_WIDTH`] with reported
/// `H̃^0` norm `delta / 2`.
pub fn default_data(grid: Grid, delta: f64) -> Result<PhysicalField> {
    if !(delta > 0.0) {
        return Err(Error::Config(format!("delta must be positive, got {delta}")));
    }
    scale_to_refined_norm(&gaussian(grid, 1.0, DEFAULT_WIDTH)?, delta / 2.0)
}

/// Real random data with Gaussian coefficients on `|xi| <= xi_max`, tapered
/// by `e^{-(xi / xi_max)^2}`, unit `L^2` norm.
pub fn random_band_limited(grid: Grid, xi_max: f64, seed: u64) -> Result<PhysicalField> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = grid.n_points();
    let mut c = vec![Complex64::default(); n];
    for m in 0..grid.nyquist_index() as i64 {
        let xi = m as f64 * grid.dxi();
        if xi > xi_max {
            break;
        }
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = if m == 0 { 0.0 } else { rng.sample(StandardNormal) };
        let v = Complex64::new(re, im) * (-(xi / xi_max).powi(2)).exp();
        c[grid.slot(m)] = v;
        if m > 0 {
            c[grid.slot(-m)] = v.conj();
        }
    }
    let field = SpectralField::new(grid, c)?.to_physical();
    let norm = field.l2_norm();
    if norm == 0.0 {
        return Err(Error::Degenerate("random data vanished".into()));
    }
    PhysicalField::new(grid, field.values().iter().map(|v| v / norm).collect())
}

/// Gaussian `a e^{-(x - c)^2 / w^2}` with `w` in `[1, 4)`, `c` in `[-2, 2)`
/// and `|a|` in `[1/2, 2)` of random sign.
pub fn random_gaussian(grid: Grid, seed: u64) -> Result<PhysicalField> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = rng.gen_range(1.0..4.0);
    let c = rng.gen_range(-2.0..2.0);
    let a = rng.gen_range(0.5..2.0) * if rng.gen::<bool>() { 1.0 } else { -1.0 };
    PhysicalField::from_fn(grid, |x| a * (-((x - c) / w).powi(2)).exp())
}

/// `count` random Gaussians with seeds `seed, seed + 1, ...`.
pub fn gaussian_family(grid: Grid, count: usize, seed: u64) -> Result<Vec<(u64, PhysicalField)>> {
    (0..count as u64).map(|i| Ok((seed + i, random_gaussian(grid, seed + i)?))).collect()
}

/// Space-time forcing `eta0(t / 2) (p(x) cos(a t) + q(x) sin(a t))` with
/// independent random Gaussian profiles and `a` uniform in `[0, 8)`.
pub fn random_forcing(grid: SpaceTimeGrid, seed: u64) -> Result<SpaceTimeField> {
    let space = *grid.space();
    let p = random_gaussian(space, seed.wrapping_mul(2))?;
    let q = random_gaussian(space, seed.wrapping_mul(2).wrapping_add(1))?;
    let a = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed).gen_range(0.0..8.0);
    let mut values = Vec::with_capacity(grid.len());
    for n in 0..grid.n_times() {
        let t = grid.t(n);
        let env = crate::dyadic::eta0(t / 2.0);
        let (s, c) = (a * t).sin_cos();
        values.extend(p.values().iter().zip(q.values()).map(|(pv, qv)| env * (pv * c + qv * s)));
    }
    SpaceTimeField::new(grid, values)
}

/// `count` forcings with seeds `seed, seed + 1, ...`.
pub fn forcing_family(grid: SpaceTimeGrid, count: usize, seed: u64) -> Result<Vec<(u64, SpaceTimeField)>> {
    (0..count as u64).map(|i| Ok((seed + i, random_forcing(grid, seed + i)?))).collect()
}
