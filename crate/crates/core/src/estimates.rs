//! Empirical ratio tracking for the uniform linear and bilinear estimates.
//!
//! Every study reports `LHS / RHS` with both sides taken from the reported
//! (upper-bound) norms; a bounded ratio is evidence, not a verification.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::dyadic::{chi, chi_range, eta, eta0, eta_leq, eta_range};
use crate::error::{Error, Result};
use crate::evolution::{check_epsilon, duhamel, free_multiplier, linear_symbol, omega, DuhamelRule};
use crate::fft;
use crate::grid::{PhysicalField, SpectralField};
use crate::norms::{fsigma_norm, nsigma_norm, refined_sobolev_norm, zk_norm, BourgainOptions, NormBreakdown};
use crate::spacetime::{SpaceTimeField, SpaceTimeGrid, SpaceTimeSpectral};
use crate::stats::{log_log_fit, median, spearman};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioSample {
    pub seed: u64,
    pub epsilon: f64,
    pub sigma: f64,
    /// Study-specific integer tag (block index, `j_1`, ...).
    pub param: i32,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatioStudy {
    pub estimate_id: String,
    pub family: String,
    pub grid: String,
    /// Sorted descending.
    pub epsilons: Vec<f64>,
    pub sigmas: Vec<f64>,
    pub samples: Vec<RatioSample>,
    /// Notices for excluded inputs.
    pub skipped: Vec<String>,
}

/// Uniformity fingerprint for one `sigma`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudySummary {
    pub estimate_id: String,
    pub sigma: f64,
    pub count: usize,
    pub max: f64,
    pub median: f64,
    /// `(epsilon, max ratio)` per epsilon.
    pub max_by_epsilon: Vec<(f64, f64)>,
    /// Largest over smallest of the per-epsilon maxima.
    pub spread: f64,
    /// Slope of `log(max ratio)` against `log(epsilon)` over `epsilon > 0`.
    pub slope: Option<f64>,
}

/// Outlier and trend fingerprint for one `sigma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RatioFingerprint {
    pub count: usize,
    pub median: f64,
    pub max: f64,
    pub max_over_median: f64,
    /// Spearman correlation of the ratio with `param`; `None` when `param`
    /// is constant.
    pub rank_correlation: Option<f64>,
}

fn check_epsilons(eps: &[f64]) -> Result<()> {
    if eps.is_empty() {
        return Err(Error::Config("epsilon list is empty".into()));
    }
    for &e in eps {
        check_epsilon(e)?;
    }
    if eps.windows(2).any(|w| w[0] <= w[1]) {
        return Err(Error::Config("epsilon list must be strictly descending".into()));
    }
    Ok(())
}

fn sample(seed: u64, epsilon: f64, sigma: f64, param: i32, lhs: f64, rhs: f64) -> Result<RatioSample> {
    let ratio = lhs / rhs;
    if !(ratio.is_finite() && ratio > 0.0) {
        return Err(Error::Domain(format!("ratio {lhs}/{rhs} is not finite and positive (seed {seed}, eps {epsilon})")));
    }
    Ok(RatioSample { seed, epsilon, sigma, param, lhs, rhs, ratio })
}

impl RatioStudy {
    pub fn ratios(&self, sigma: f64) -> Vec<f64> {
        self.samples.iter().filter(|s| s.sigma == sigma).map(|s| s.ratio).collect()
    }

    pub fn summary(&self, sigma: f64) -> Option<StudySummary> {
        let rows: Vec<&RatioSample> = self.samples.iter().filter(|s| s.sigma == sigma).collect();
        if rows.is_empty() {
            return None;
        }
        let ratios: Vec<f64> = rows.iter().map(|s| s.ratio).collect();
        let max_by_epsilon: Vec<(f64, f64)> = self
            .epsilons
            .iter()
            .filter_map(|&e| {
                rows.iter().filter(|s| s.epsilon == e).map(|s| s.ratio).reduce(f64::max).map(|m| (e, m))
            })
            .collect();
        let hi = max_by_epsilon.iter().map(|p| p.1).fold(0.0, f64::max);
        let lo = max_by_epsilon.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
        let positive: Vec<(f64, f64)> = max_by_epsilon.iter().copied().filter(|p| p.0 > 0.0).collect();
        let slope = if positive.len() >= 2 {
            let (x, y): (Vec<f64>, Vec<f64>) = positive.into_iter().unzip();
            log_log_fit(&x, &y).map(|f| f.slope)
        } else {
            None
        };
        Some(StudySummary {
            estimate_id: self.estimate_id.clone(),
            sigma,
            count: rows.len(),
            max: ratios.iter().copied().fold(0.0, f64::max),
            median: median(&ratios).unwrap_or(f64::NAN),
            max_by_epsilon,
            spread: hi / lo,
            slope,
        })
    }

    pub fn fingerprint(&self, sigma: f64) -> Option<RatioFingerprint> {
        let (params, ratios): (Vec<f64>, Vec<f64>) =
            self.samples.iter().filter(|s| s.sigma == sigma).map(|s| (s.param as f64, s.ratio)).unzip();
        let med = median(&ratios)?;
        let max = ratios.iter().copied().fold(0.0, f64::max);
        Some(RatioFingerprint {
            count: ratios.len(),
            median: med,
            max,
            max_over_median: max / med,
            rank_correlation: spearman(&params, &ratios),
        })
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# schema=v1")?;
        writeln!(w, "# family={} grid={}", self.family, self.grid)?;
        for s in &self.skipped {
            writeln!(w, "# skipped: {s}")?;
        }
        writeln!(w, "estimate_id,seed,epsilon,sigma,ratio,param,lhs,rhs")?;
        for s in &self.samples {
            writeln!(w, "{},{},{},{},{},{},{},{}", self.estimate_id, s.seed, s.epsilon, s.sigma, s.ratio, s.param, s.lhs, s.rhs)?;
        }
        Ok(())
    }

    /// One JSON record per sigma.
    pub fn write_summary<W: Write>(&self, mut w: W) -> Result<()> {
        let summaries: Vec<StudySummary> = self.sigmas.iter().filter_map(|&s| self.summary(s)).collect();
        let body = serde_json::to_string_pretty(&summaries).map_err(|e| Error::Parse(e.to_string()))?;
        writeln!(w, "{body}")?;
        Ok(())
    }
}

/// Shared settings for the linear ratio studies.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearStudyConfig {
    pub grid: SpaceTimeGrid,
    pub epsilons: Vec<f64>,
    pub sigmas: Vec<f64>,
    pub opts: BourgainOptions,
}

impl LinearStudyConfig {
    fn validate(&self) -> Result<usize> {
        check_epsilons(&self.epsilons)?;
        if self.sigmas.iter().any(|s| !(*s >= 0.0)) || self.sigmas.is_empty() {
            return Err(Error::Config("sigma list must be nonempty and nonnegative".into()));
        }
        let g = &self.grid;
        let origin = -g.t0() / g.dt();
        if origin.fract() != 0.0 || origin < 2.0 || origin > (g.n_times() - 3) as f64 {
            return Err(Error::Config("time grid must contain t = 0 as an interior node".into()));
        }
        if g.t0() > -1.6 || g.t0() + g.duration() < 1.6 + g.dt() {
            return Err(Error::Config("time window must contain the support [-1.6, 1.6] of the cutoff".into()));
        }
        Ok(origin as usize)
    }

    fn describe(&self) -> String {
        let g = &self.grid;
        format!(
            "L={};N={};t0={};T={};M={};k_y={}",
            g.space().half_length(),
            g.n_points(),
            g.t0(),
            g.duration(),
            g.n_times(),
            self.opts.k_y
        )
    }
}

/// `psi(t) W_eps(|t|) phi` on the space-time grid, `psi = eta0`.
pub fn windowed_free_solution(phi: &SpectralField, grid: SpaceTimeGrid, eps: f64) -> Result<SpaceTimeField> {
    phi.grid().check_same(grid.space())?;
    let xis = grid.space().wavenumbers();
    let mut values = Vec::with_capacity(grid.len());
    for n in 0..grid.n_times() {
        let t = grid.t(n);
        let psi = eta0(t);
        if psi == 0.0 {
            values.extend(std::iter::repeat(0.0).take(grid.n_points()));
            continue;
        }
        let row = SpectralField::new(
            *phi.grid(),
            phi.coeffs().iter().zip(&xis).map(|(c, &xi)| c * free_multiplier(xi, t, eps)).collect(),
        )?
        .to_physical();
        values.extend(row.values().iter().map(|v| psi * v));
    }
    SpaceTimeField::new(grid, values)
}

/// `psi(t) int_0^t W_eps(t - s) u(s) ds` with `W_eps(r) = e^{i r omega - |r| eps xi^2}`.
pub fn windowed_duhamel(u: &SpaceTimeField, eps: f64) -> Result<SpaceTimeField> {
    let grid = *u.grid();
    let space = *grid.space();
    let origin = -grid.t0() / grid.dt();
    if origin.fract() != 0.0 || origin < 2.0 || origin as usize + 2 >= grid.n_times() {
        return Err(Error::Config("time grid must contain t = 0 as an interior node".into()));
    }
    let origin = origin as usize;
    let xis = space.wavenumbers();
    let rows: Vec<Vec<Complex64>> = (0..grid.n_times())
        .map(|n| Ok(PhysicalField::new(space, u.row(n).to_vec())?.to_spectral().into_coeffs()))
        .collect::<Result<_>>()?;
    // last node reached by the cutoff on each side
    let reach = |dir: f64| {
        let mut m = 0;
        while m + 1 < grid.n_times() && {
            let n = origin as f64 + dir * (m + 1) as f64;
            n >= 0.0 && (n as usize) < grid.n_times() && eta0(grid.t(n as usize)) > 0.0
        } {
            m += 1;
        }
        (m + 1).max(2)
    };
    let mut out = vec![vec![Complex64::default(); space.n_points()]; grid.n_times()];
    // forward in time
    let fwd = reach(1.0).min(grid.n_times() - 1 - origin);
    let lam: Vec<Complex64> = xis.iter().map(|&xi| linear_symbol(xi, eps)).collect();
    let forcing: Vec<Vec<Complex64>> = (0..=fwd).map(|i| rows[origin + i].clone()).collect();
    for (i, v) in duhamel(&lam, grid.dt(), &forcing, DuhamelRule::Exponential)?.into_iter().enumerate() {
        out[origin + i] = v;
    }
    // backward: I(-r) = -int_0^r W(-(r - q)) u(-q) dq, generator -i omega - eps xi^2
    let bwd = reach(-1.0).min(origin);
    let lam_b: Vec<Complex64> = xis.iter().map(|&xi| linear_symbol(-xi, eps)).collect();
    let forcing: Vec<Vec<Complex64>> = (0..=bwd).map(|i| rows[origin - i].clone()).collect();
    for (i, v) in duhamel(&lam_b, grid.dt(), &forcing, DuhamelRule::Exponential)?.into_iter().enumerate().skip(1) {
        out[origin - i] = v.into_iter().map(|c| -c).collect();
    }
    let mut values = Vec::with_capacity(grid.len());
    for (n, row) in out.into_iter().enumerate() {
        let psi = eta0(grid.t(n));
        if psi == 0.0 {
            values.extend(std::iter::repeat(0.0).take(space.n_points()));
            continue;
        }
        let phys = SpectralField::new(space, row)?.to_physical();
        values.extend(phys.values().iter().map(|v| psi * v));
    }
    SpaceTimeField::new(grid, values)
}

fn expand(
    seed: u64,
    eps: f64,
    lhs: &NormBreakdown,
    rhs: &NormBreakdown,
    sigmas: &[f64],
    param: i32,
) -> Result<Vec<RatioSample>> {
    sigmas.iter().map(|&s| sample(seed, eps, s, param, lhs.reweighted(s), rhs.reweighted(s))).collect()
}

/// `||psi W_eps(t) phi||_{F^sigma} / ||phi||_{H̃^sigma}` for each datum and epsilon.
pub fn free_estimate_study(data: &[(u64, PhysicalField)], cfg: &LinearStudyConfig) -> Result<RatioStudy> {
    cfg.validate()?;
    let mut skipped = Vec::new();
    let mut kept = Vec::new();
    for (seed, phi) in data {
        phi.grid().check_same(cfg.grid.space())?;
        let hat = phi.to_spectral();
        let rhs = refined_sobolev_norm(&hat, 0.0)?;
        if rhs.total == 0.0 {
            skipped.push(format!("seed {seed}: zero data"));
            continue;
        }
        kept.push((*seed, hat, rhs));
    }
    let cells: Vec<(usize, f64)> = (0..kept.len()).flat_map(|i| cfg.epsilons.iter().map(move |&e| (i, e))).collect();
    let rows = cells
        .par_iter()
        .map(|&(i, eps)| {
            let (seed, hat, rhs) = &kept[i];
            let u = windowed_free_solution(hat, cfg.grid, eps)?;
            let lhs = fsigma_norm(&u, 0.0, &cfg.opts)?;
            expand(*seed, eps, &lhs, rhs, &cfg.sigmas, 0)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RatioStudy {
        estimate_id: "free".into(),
        family: "random_band_limited".into(),
        grid: cfg.describe(),
        epsilons: cfg.epsilons.clone(),
        sigmas: cfg.sigmas.clone(),
        samples: rows.into_iter().flatten().collect(),
        skipped,
    })
}

/// `||psi int_0^t W_eps(t-s) u(s) ds||_{F^sigma} / ||u||_{N^sigma}`.
pub fn inhomogeneous_estimate_study(forcings: &[(u64, SpaceTimeField)], cfg: &LinearStudyConfig) -> Result<RatioStudy> {
    cfg.validate()?;
    let mut skipped = Vec::new();
    let mut kept = Vec::new();
    for (seed, u) in forcings {
        u.grid().check_same(&cfg.grid)?;
        let rhs = nsigma_norm(u, 0.0, &cfg.opts)?;
        if rhs.total == 0.0 {
            skipped.push(format!("seed {seed}: zero forcing"));
            continue;
        }
        kept.push((*seed, u, rhs));
    }
    let cells: Vec<(usize, f64)> = (0..kept.len()).flat_map(|i| cfg.epsilons.iter().map(move |&e| (i, e))).collect();
    let rows = cells
        .par_iter()
        .map(|&(i, eps)| {
            let (seed, u, rhs) = &kept[i];
            let v = windowed_duhamel(u, eps)?;
            let lhs = fsigma_norm(&v, 0.0, &cfg.opts)?;
            expand(*seed, eps, &lhs, rhs, &cfg.sigmas, 0)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RatioStudy {
        estimate_id: "inhomogeneous".into(),
        family: "random_forcing".into(),
        grid: cfg.describe(),
        epsilons: cfg.epsilons.clone(),
        sigmas: cfg.sigmas.clone(),
        samples: rows.into_iter().flatten().collect(),
        skipped,
    })
}

/// Discretization of the oscillatory kernel integrals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelOptions {
    /// Spacing of the `x` samples.
    pub dx: f64,
    /// Ratio of the FFT period to the width of the `x` window.
    pub refinement: usize,
    /// Number of sampled `tau` values.
    pub tau_samples: usize,
    /// Refinement stops once the value changes by less than this.
    pub tol: f64,
    pub max_doublings: usize,
}

impl Default for KernelOptions {
    fn default() -> Self {
        Self { dx: 0.125, refinement: 16, tau_samples: 33, tol: 5e-3, max_doublings: 5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelValue {
    pub value: f64,
    /// `x` window half-width and FFT length of the accepted resolution.
    pub window: f64,
    pub n_fft: usize,
}

/// `sum_x dx sup_tau |K(x, tau)|` with `K(., tau) = (1/2pi) int e^{i x s} m(s, tau) ds`,
/// `m` given in a shifted variable `s`, over `|x| <= window`.
fn l1_sup_kernel(
    taus: &[f64],
    window: f64,
    opts: &KernelOptions,
    symbol: &(dyn Fn(f64, f64) -> Complex64 + Sync),
) -> Result<(f64, usize)> {
    let period = 2.0 * window * opts.refinement as f64;
    let n = ((period / opts.dx).ceil() as usize).next_power_of_two();
    if n > 1 << 24 {
        return Err(Error::Resolution(format!("kernel needs {n} quadrature nodes")));
    }
    let dx = period / n as f64;
    let h = 2.0 * PI / period;
    if window * h > PI / 4.0 {
        return Err(Error::Resolution("phase change per step exceeds pi/4".into()));
    }
    let half = (window / dx).floor() as usize;
    let mut sup = vec![0.0f64; 2 * half + 1];
    let fft_inv = FftPlanner::<f64>::new().plan_fft_inverse(n);
    let mut buf = vec![Complex64::default(); n];
    for &tau in taus {
        for (i, b) in buf.iter_mut().enumerate() {
            let s = fft::signed_mode(i, n) as f64 * h;
            *b = symbol(s, tau);
        }
        fft_inv.process(&mut buf);
        let scale = h / (2.0 * PI);
        for (idx, slot) in sup.iter_mut().enumerate() {
            let j = idx as i64 - half as i64;
            let v = buf[j.rem_euclid(n as i64) as usize].norm() * scale;
            if v > *slot {
                *slot = v;
            }
        }
    }
    if sup.iter().any(|v| !v.is_finite()) {
        return Err(Error::Divergence("non-finite kernel value".into()));
    }
    Ok((dx * sup.iter().sum::<f64>(), n))
}

fn refine_kernel(
    taus: &[f64],
    window: f64,
    opts: &KernelOptions,
    symbol: &(dyn Fn(f64, f64) -> Complex64 + Sync),
) -> Result<KernelValue> {
    let (mut value, _) = l1_sup_kernel(taus, window, opts, symbol)?;
    let mut w = window;
    for _ in 0..opts.max_doublings {
        let (next, n) = l1_sup_kernel(taus, 2.0 * w, opts, symbol)?;
        let change = (next - value).abs() / next.abs().max(f64::MIN_POSITIVE);
        value = next;
        w *= 2.0;
        if change < opts.tol {
            return Ok(KernelValue { value, window: w, n_fft: n });
        }
    }
    Err(Error::Resolution(format!("kernel value not converged at window {w}")))
}

/// The smooth cutoffs give kernels with sub-exponential tails; windows
/// start here and are doubled until the value settles.
const MIN_WINDOW: f64 = 256.0;

fn log_samples(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![(lo * hi).sqrt()];
    }
    (0..n).map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64)).collect()
}

fn ratio_multiplier(xi: f64, tau: f64, eps: f64) -> Complex64 {
    let v = tau - omega(xi);
    let d = Complex64::new(v, -eps * xi * xi);
    if d.norm() == 0.0 {
        Complex64::new(1.0, 0.0)
    } else {
        Complex64::new(v, 0.0) / d
    }
}

/// `L^1_x L^infty_tau` norm of
/// `int e^{i x xi} (tau - omega)/(tau - omega - i eps xi^2) eta_{<=k}(tau - omega) chi_{[k-1,k+1]}(xi) dxi`
/// (with the `1/2pi` of the inverse transform), `k >= 1`.
pub fn multiplier_kernel(k: i32, eps: f64, opts: &KernelOptions) -> Result<KernelValue> {
    check_epsilon(eps)?;
    if !(1..=12).contains(&k) {
        return Err(Error::Config(format!("kernel index must lie in 1..=12, got {k}")));
    }
    // for tau < 0 only xi > 0 resonates; tau = -xi_c^2 with xi_c across the band
    let lo = 1.25 * 2f64.powi(k - 2);
    let hi = 1.6 * 2f64.powi(k + 1);
    let centers = log_samples(lo, hi, opts.tau_samples);
    let taus: Vec<f64> = centers.iter().map(|c| -c * c).collect();
    let decay = if eps > 0.0 { 8.0 / (eps * lo) } else { 0.0 };
    let window = decay.max(MIN_WINDOW);
    let symbol = move |s: f64, tau: f64| {
        let xc = (-tau).sqrt();
        let xi = xc + s;
        if xi <= 0.0 {
            return Complex64::default();
        }
        let cut = eta_leq(k, tau - omega(xi)) * chi_range(k - 1, k + 1, xi);
        if cut == 0.0 {
            return Complex64::default();
        }
        ratio_multiplier(xi, tau, eps) * cut
    };
    refine_kernel(&taus, window, opts, &symbol)
}

/// Low-frequency analogue: `int e^{i x xi} (tau - omega)/(tau - omega - i eps xi^2) chi_j(tau) eta_{[0,1]}(xi) dxi`.
pub fn multiplier_kernel_low(j: i32, eps: f64, opts: &KernelOptions) -> Result<KernelValue> {
    check_epsilon(eps)?;
    if !(-6..=12).contains(&j) {
        return Err(Error::Config(format!("modulation index must lie in -6..=12, got {j}")));
    }
    let lo = 1.25 * 2f64.powi(j - 1);
    let hi = 1.6 * 2f64.powi(j);
    let half = opts.tau_samples.div_ceil(2);
    let mut taus: Vec<f64> = log_samples(lo, hi, half).into_iter().map(|t| -t).collect();
    taus.extend(log_samples(lo, hi, half));
    let res = lo.sqrt().min(0.5);
    let decay = if eps > 0.0 { 8.0 / (eps * res) } else { 0.0 };
    let window = decay.max(MIN_WINDOW);
    let symbol = move |xi: f64, tau: f64| {
        let cut = chi(j, tau) * eta_range(0, 1, xi);
        if cut == 0.0 {
            return Complex64::default();
        }
        ratio_multiplier(xi, tau, eps) * cut
    };
    refine_kernel(&taus, window, opts, &symbol)
}

/// Kernel values for each `k` (`param = k`) and the low-frequency analogue
/// for each `j` (`param = -100 + j`), one row per epsilon; `ratio` is the
/// kernel value itself.
pub fn multiplier_kernel_study(ks: &[i32], low_js: &[i32], epsilons: &[f64], opts: &KernelOptions) -> Result<Vec<RatioStudy>> {
    check_epsilons(epsilons)?;
    let mut out = Vec::new();
    let groups: Vec<(String, i32, bool)> = ks
        .iter()
        .map(|&k| (format!("kernel;k={k}"), k, true))
        .chain(low_js.iter().map(|&j| (format!("kernel_low;j={j}"), j, false)))
        .collect();
    for (id, idx, high) in groups {
        let cells = epsilons
            .par_iter()
            .map(|&eps| {
                let v = if high { multiplier_kernel(idx, eps, opts) } else { multiplier_kernel_low(idx, eps, opts) };
                match v {
                    Ok(v) => Ok(Ok(sample(0, eps, 0.0, idx, v.value, 1.0)?)),
                    Err(Error::Resolution(msg)) => Ok(Err(format!("eps {eps}: {msg}"))),
                    Err(e) => Err(e),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let mut samples = Vec::new();
        let mut skipped = Vec::new();
        for c in cells {
            match c {
                Ok(s) => samples.push(s),
                Err(msg) => skipped.push(msg),
            }
        }
        out.push(RatioStudy {
            estimate_id: id,
            family: "kernel".into(),
            grid: format!("dx={};refinement={};tau_samples={}", opts.dx, opts.refinement, opts.tau_samples),
            epsilons: epsilons.to_vec(),
            sigmas: vec![0.0],
            samples,
            skipped,
        });
    }
    Ok(out)
}

/// Worst ratio `|K(x, tau)| / (C eps 2^k e^{-c eps 2^k |x|})` for the kernel
/// `K = F^{-1}_xi[-i eps tau / (tau + xi^2 - i eps xi^2)]` over
/// `-tau in [2^{2k-2}, 2^{2k+2}]` and `0 <= x <= 32 / (eps 2^k)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnvelopeCheck {
    pub k: i32,
    pub epsilon: f64,
    pub constant: f64,
    pub rate: f64,
    pub worst: f64,
    pub samples: usize,
}

/// The `xi` integral is truncated at `|xi| = 32 * 2^k` and evaluated by FFT
/// with period `128 / (eps 2^k)` in `x`.
pub fn dissipative_envelope(k: i32, eps: f64, constant: f64, rate: f64) -> Result<EnvelopeCheck> {
    check_epsilon(eps)?;
    if eps == 0.0 {
        return Err(Error::Config("the dissipative part vanishes at eps = 0".into()));
    }
    if !(1..=10).contains(&k) {
        return Err(Error::Config(format!("kernel index must lie in 1..=10, got {k}")));
    }
    let scale = eps * 2f64.powi(k);
    let xmax = 32.0 / scale;
    let ximax = 32.0 * 2f64.powi(k);
    let period = 4.0 * xmax;
    let h = 2.0 * PI / period;
    let n = ((2.0 * ximax / h).ceil() as usize).next_power_of_two().max(1024);
    if n > 1 << 24 {
        return Err(Error::Resolution(format!("envelope check needs {n} nodes")));
    }
    let dx = period / n as f64;
    let fft_inv = FftPlanner::<f64>::new().plan_fft_inverse(n);
    let last = (xmax / dx) as usize;
    let stride = (last / 256).max(1);
    let mut worst = 0.0f64;
    let mut samples = 0;
    let mut buf = vec![Complex64::default(); n];
    for tau_abs in log_samples(2f64.powi(2 * k - 2), 2f64.powi(2 * k + 2), 9) {
        let tau = -tau_abs;
        for (i, b) in buf.iter_mut().enumerate() {
            let xi = fft::signed_mode(i, n) as f64 * h;
            *b = Complex64::new(0.0, -eps * tau) / Complex64::new(tau + xi * xi, -eps * xi * xi);
        }
        fft_inv.process(&mut buf);
        for j in (0..=last).step_by(stride) {
            let x = j as f64 * dx;
            let v = buf[j].norm() * h / (2.0 * PI);
            let env = constant * scale * (-rate * scale * x).exp();
            worst = worst.max(v / env);
            samples += 1;
        }
    }
    Ok(EnvelopeCheck { k, epsilon: eps, constant, rate, worst, samples })
}

/// `(2 pi)^2 F[F^{-1} f F^{-1} g]`: the `(xi, tau)` convolution, refused when
/// the summed supports would wrap around the grid.
pub fn convolve(f: &SpaceTimeSpectral, g: &SpaceTimeSpectral) -> Result<SpaceTimeSpectral> {
    f.grid().check_same(g.grid())?;
    let grid = *f.grid();
    let extent = |c: &SpaceTimeSpectral| {
        let (mut xi_m, mut tau_m) = (0.0f64, 0.0f64);
        c.for_each(|xi, tau, v| {
            if v.norm() > 0.0 {
                xi_m = xi_m.max(xi.abs());
                tau_m = tau_m.max(tau.abs());
            }
        });
        (xi_m, tau_m)
    };
    let (a, b) = (extent(f), extent(g));
    let space = grid.space();
    if a.0 + b.0 >= space.max_wavenumber() || a.1 + b.1 >= grid.max_frequency() {
        return Err(Error::Config("convolution support exceeds the grid; enlarge N or M".into()));
    }
    let (rows, cols) = (grid.n_times(), grid.n_points());
    let mut p = f.coeffs().to_vec();
    let mut q = g.coeffs().to_vec();
    fft::inverse_2d(&mut p, rows, cols);
    fft::inverse_2d(&mut q, rows, cols);
    let mut prod: Vec<Complex64> = p.iter().zip(&q).map(|(x, y)| x * y).collect();
    fft::forward_2d(&mut prod, rows, cols);
    let s = 4.0 * PI * PI;
    prod.iter_mut().for_each(|v| *v *= s);
    SpaceTimeSpectral::new(grid, prod)
}

/// Random complex coefficients on the dyadic region `D_{k,j}`, shaped by
/// `eta_k(xi) eta_j(modulation)`.
pub fn dyadic_block(grid: SpaceTimeGrid, k: i32, j: i32, seed: u64) -> SpaceTimeSpectral {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut f = SpaceTimeSpectral::zeros(grid);
    f.map_in_place(|xi, tau, _| {
        let re: f64 = rng.gen_range(-1.0..1.0);
        let im: f64 = rng.gen_range(-1.0..1.0);
        let m = if k >= 1 { tau - omega(xi) } else { tau };
        Complex64::new(re, im) * (eta(k, xi) * eta(j, m))
    });
    f
}

/// `(2^k ||eta_k A_k^{-1} f1 * f2||_{Z_k}, ||f1||_{Z_k1} ||f2||_{Z_k2})`.
pub fn bilinear_sides(
    f1: &SpaceTimeSpectral,
    k1: i32,
    f2: &SpaceTimeSpectral,
    k2: i32,
    k: i32,
    opts: &BourgainOptions,
) -> Result<(f64, f64)> {
    let conv = convolve(f1, f2)?;
    let out = conv.map(|xi, tau, v| {
        let w = eta(k, xi);
        if w == 0.0 {
            return Complex64::default();
        }
        let a = if k >= 1 { Complex64::new(tau - omega(xi), 1.0) } else { Complex64::new(tau, 1.0) };
        v * w / a
    });
    let lhs = 2f64.powi(k) * zk_norm(&out, k, opts)?.total;
    let rhs = zk_norm(f1, k1, opts)?.total * zk_norm(f2, k2, opts)?.total;
    Ok((lhs, rhs))
}

/// Output and input frequency indices of a dyadic bilinear regime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Regime {
    pub k: i32,
    pub k1: i32,
    pub k2: i32,
}

impl Regime {
    pub fn id(&self) -> String {
        format!("bilinear;k={};k1={};k2={}", self.k, self.k1, self.k2)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BilinearConfig {
    pub grid: SpaceTimeGrid,
    pub samples: usize,
    /// Modulation indices are drawn from `0..=max_j`.
    pub max_j: i32,
    pub seed: u64,
    pub opts: BourgainOptions,
}

/// Ratios for random `D_{k1,j1} x D_{k2,j2}` data; `param = j1`.
pub fn bilinear_dyadic_study(regime: Regime, cfg: &BilinearConfig) -> Result<RatioStudy> {
    let Regime { k, k1, k2 } = regime;
    if k.min(k1).min(k2) < 0 || k.max(k1).max(k2) > k.min(k1).min(k2) + 30 {
        return Err(Error::Config(format!("regime {k},{k1},{k2} violates max <= min + 30")));
    }
    if cfg.max_j < 0 {
        return Err(Error::Config("max_j must be nonnegative".into()));
    }
    let draws: Vec<(u64, i32, i32)> = {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        (0..cfg.samples)
            .map(|_| (rng.gen::<u64>(), rng.gen_range(0..=cfg.max_j), rng.gen_range(0..=cfg.max_j)))
            .collect()
    };
    let rows = draws
        .par_iter()
        .map(|&(s, j1, j2)| {
            let f1 = dyadic_block(cfg.grid, k1, j1, s);
            let f2 = dyadic_block(cfg.grid, k2, j2, s ^ 0x9e37_79b9_7f4a_7c15);
            if f1.max_abs() == 0.0 || f2.max_abs() == 0.0 {
                return Ok(None);
            }
            let (lhs, rhs) = bilinear_sides(&f1, k1, &f2, k2, k, &cfg.opts)?;
            if lhs == 0.0 {
                return Ok(None);
            }
            Ok(Some(sample(s, 0.0, 0.0, j1, lhs, rhs)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let skipped = rows.iter().filter(|r| r.is_none()).count();
    let g = &cfg.grid;
    Ok(RatioStudy {
        estimate_id: regime.id(),
        family: format!("dyadic_block;max_j={}", cfg.max_j),
        grid: format!("L={};N={};T={};M={};k_y={}", g.space().half_length(), g.n_points(), g.duration(), g.n_times(), cfg.opts.k_y),
        epsilons: vec![0.0],
        sigmas: vec![0.0],
        samples: rows.into_iter().flatten().collect(),
        skipped: if skipped > 0 { vec![format!("{skipped} samples with empty support")] } else { Vec::new() },
    })
}

/// `d_x (u v)` on the space-time grid, by the spectral derivative.
pub fn derivative_of_product(u: &SpaceTimeField, v: &SpaceTimeField) -> Result<SpaceTimeSpectral> {
    u.grid().check_same(v.grid())?;
    let prod: Vec<f64> = u.values().iter().zip(v.values()).map(|(a, b)| a * b).collect();
    let w = SpaceTimeField::new(*u.grid(), prod)?.to_spectral();
    Ok(w.multiply(|xi, _| Complex64::new(0.0, xi)))
}

/// `||d_x(uv)||_{N^sigma} / (||u||_{F^sigma} ||v||_{F^0} + ||u||_{F^0} ||v||_{F^sigma})`.
pub fn full_bilinear_study(pairs: &[(u64, SpaceTimeField, SpaceTimeField)], sigmas: &[f64], opts: &BourgainOptions) -> Result<RatioStudy> {
    if sigmas.is_empty() || sigmas.iter().any(|s| !(*s >= 0.0)) {
        return Err(Error::Config("sigma list must be nonempty and nonnegative".into()));
    }
    let grid = match pairs.first() {
        Some(p) => *p.1.grid(),
        None => return Err(Error::Config("no input pairs".into())),
    };
    let rows = pairs
        .par_iter()
        .map(|(seed, u, v)| {
            let fu = fsigma_norm(u, 0.0, opts)?;
            let fv = fsigma_norm(v, 0.0, opts)?;
            if fu.total == 0.0 || fv.total == 0.0 {
                return Ok(Vec::new());
            }
            let w = derivative_of_product(u, v)?;
            let n = crate::norms::nsigma_norm_spectral(&w, 0.0, opts)?;
            sigmas
                .iter()
                .map(|&s| {
                    let rhs = fu.reweighted(s) * fv.reweighted(0.0) + fu.reweighted(0.0) * fv.reweighted(s);
                    sample(*seed, 0.0, s, 0, n.reweighted(s), rhs)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let skipped = rows.iter().filter(|r| r.is_empty()).count();
    Ok(RatioStudy {
        estimate_id: "full_bilinear".into(),
        family: "random_forcing".into(),
        grid: format!(
            "L={};N={};t0={};T={};M={};k_y={}",
            grid.space().half_length(),
            grid.n_points(),
            grid.t0(),
            grid.duration(),
            grid.n_times(),
            opts.k_y
        ),
        epsilons: vec![0.0],
        sigmas: sigmas.to_vec(),
        samples: rows.into_iter().flatten().collect(),
        skipped: if skipped > 0 { vec![format!("{skipped} pairs with a zero factor")] } else { Vec::new() },
    })
}

