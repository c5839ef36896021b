//! Dyadic space-time norms `X_k`, `Y_k`, `Z_k`, `Z̄_0` and the composite
//! `F^sigma`, `N^sigma`.
//!
//! Input coefficients follow [`crate::spacetime`]: `f ~ dx dt C`. The
//! frequency ladder below `k' = 1` and the modulation ladder below `j = 0`
//! are truncated at the grid spacings with the tail lumped into the lowest
//! block. Modulation blocks are taken as far as the `tau` grid reaches.

use num_complex::Complex64;

use super::{BlockId, BlockTerm, NormBreakdown, SumSplit, Witness};
use crate::dyadic::{eta, eta_leq, inhomogeneous_blocks, top_block, HomogeneousLadder};
use crate::error::{Error, Result};
use crate::evolution::omega;
use crate::fft;
use crate::spacetime::{SpaceTimeField, SpaceTimeGrid, SpaceTimeSpectral};

const SUPPORT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BourgainOptions {
    /// Smallest `k >= 1` at which `Z_k = X_k + Y_k`.
    pub k_y: i32,
}

impl Default for BourgainOptions {
    fn default() -> Self {
        Self { k_y: 5 }
    }
}

/// `beta_{k,j} = 1 + 2^{(j - 2k)/2}`.
pub fn beta(k: i32, j: i32) -> f64 {
    1.0 + 2f64.powf((j - 2 * k) as f64 / 2.0)
}

fn in_band(k: i32, xi: f64) -> bool {
    if k == 0 {
        xi.abs() <= 2.0
    } else {
        let a = xi.abs();
        a >= 2f64.powi(k - 1) && a <= 2f64.powi(k + 1)
    }
}

fn modulation(k: i32, xi: f64, tau: f64) -> f64 {
    if k >= 1 {
        tau - omega(xi)
    } else {
        tau
    }
}

fn check_band(f: &SpaceTimeSpectral, k: i32) -> Result<()> {
    if k < 0 {
        return Err(Error::Config(format!("frequency index must be >= 0, got {k}")));
    }
    let leak = f.leakage(|xi, _| in_band(k, xi));
    if leak > SUPPORT_TOL {
        return Err(Error::Support(format!("data not supported in frequency band {k} (relative leak {leak:.3e})")));
    }
    Ok(())
}

/// Largest modulation block that can be nonzero on the grid for band `k`.
fn modulation_cap(grid: &SpaceTimeGrid, k: i32) -> i32 {
    let w = if k >= 1 { grid.space().max_wavenumber().powi(2) } else { 0.0 };
    top_block(grid.max_frequency() + w) + 1
}

fn tau_ladder(grid: &SpaceTimeGrid) -> HomogeneousLadder {
    HomogeneousLadder::for_spacing(grid.dtau(), 0)
}

/// Per-candidate block energies of the `X` part. Candidate `c` sends the
/// modulations `eta_leq(c - 1)` to `Y`; `None` keeps everything in `X`.
struct XTable {
    k: i32,
    kmin: i32,
    /// `[candidate][block]`, block index `j` (k >= 1) or `j * nk + (k' - kmin)`.
    energy: Vec<Vec<f64>>,
}

impl XTable {
    fn build(f: &SpaceTimeSpectral, k: i32, candidates: &[Option<i32>]) -> Self {
        let grid = *f.grid();
        let cap = modulation_cap(&grid, k);
        let ladder = HomogeneousLadder::for_grid(grid.space());
        let nk = (ladder.max - ladder.min + 1) as usize;
        let width = if k >= 1 { cap as usize + 1 } else { (cap as usize + 1) * nk };
        let mut energy = vec![vec![0.0; width]; candidates.len()];
        let mut cuts = vec![0.0; candidates.len()];
        f.for_each(|xi, tau, c| {
            let e = c.norm_sqr();
            if e == 0.0 {
                return;
            }
            let m = modulation(k, xi, tau);
            for (cut, cand) in cuts.iter_mut().zip(candidates) {
                *cut = match cand {
                    None => 0.0,
                    Some(t) => eta_leq(t - 1, m),
                };
            }
            let mods = inhomogeneous_blocks(m);
            if k >= 1 {
                for &(j, w) in mods.as_slice() {
                    for (row, cut) in energy.iter_mut().zip(&cuts) {
                        let keep = w * (1.0 - cut);
                        row[j as usize] += e * keep * keep;
                    }
                }
            } else {
                let freqs = ladder.blocks(xi);
                for &(j, w) in mods.as_slice() {
                    for &(kp, v) in freqs.as_slice() {
                        let idx = j as usize * nk + (kp - ladder.min) as usize;
                        for (row, cut) in energy.iter_mut().zip(&cuts) {
                            let keep = w * v * (1.0 - cut);
                            row[idx] += e * keep * keep;
                        }
                    }
                }
            }
        });
        XTable { k, kmin: ladder.min, energy }
    }

    fn nk(&self) -> usize {
        if self.k >= 1 {
            1
        } else {
            (1 - self.kmin + 1) as usize
        }
    }

    /// Weighted blocks `(id, weight, L^2 mass)` of candidate `c`.
    fn blocks(&self, c: usize, measure: f64) -> Vec<BlockTerm> {
        let nk = self.nk();
        let mut out = Vec::new();
        for (idx, &e) in self.energy[c].iter().enumerate() {
            if e == 0.0 {
                continue;
            }
            let mass = measure * e.sqrt();
            if self.k >= 1 {
                let j = idx as i32;
                let weight = 2f64.powf(j as f64 / 2.0) * beta(self.k, j);
                out.push(BlockTerm { id: BlockId::J(j), weight, contribution: mass });
            } else {
                let j = (idx / nk) as i32;
                let kp = self.kmin + (idx % nk) as i32;
                let weight = 2f64.powf(j as f64 - kp as f64 / 2.0);
                out.push(BlockTerm { id: BlockId::Kj(kp, j), weight, contribution: mass });
            }
        }
        out
    }

    fn value(&self, c: usize, measure: f64) -> f64 {
        self.blocks(c, measure).iter().map(|b| b.weight * b.contribution).sum()
    }
}

/// `X_k` norm; `k = 0` uses the homogeneous frequency ladder.
pub fn xk_norm(f: &SpaceTimeSpectral, k: i32) -> Result<NormBreakdown> {
    check_band(f, k)?;
    let table = XTable::build(f, k, &[None]);
    let blocks = table.blocks(0, f.measure());
    let total = blocks.iter().map(|b| b.weight * b.contribution).sum();
    Ok(NormBreakdown { total, blocks, witness: None })
}

/// Per-`x` sums `sum_tau w(tau)^2 |G(x, tau)|^2` where `G` is the inverse
/// `xi` transform of `mult * C`, for each weight function in `weights`.
fn tau_row_sums(
    f: &SpaceTimeSpectral,
    mult: impl Fn(f64, f64) -> Complex64,
    weights: &dyn Fn(f64, &mut Vec<(usize, f64)>),
    n_weights: usize,
) -> Vec<Vec<f64>> {
    let grid = *f.grid();
    let n = grid.n_points();
    let xis = grid.space().wavenumbers();
    let mut sums = vec![vec![0.0; n]; n_weights];
    let mut row = vec![Complex64::default(); n];
    let mut active = Vec::with_capacity(4);
    for t in 0..grid.n_times() {
        let tau = grid.frequency(t);
        active.clear();
        weights(tau, &mut active);
        if active.is_empty() {
            continue;
        }
        let src = &f.coeffs()[t * n..(t + 1) * n];
        let mut any = false;
        for ((r, c), &xi) in row.iter_mut().zip(src).zip(&xis) {
            *r = if *c == Complex64::default() { Complex64::default() } else { c * mult(xi, tau) };
            any |= *r != Complex64::default();
        }
        if !any {
            continue;
        }
        fft::inverse(&mut row);
        for &(b, w) in &active {
            let w2 = w * w;
            for (s, v) in sums[b].iter_mut().zip(&row) {
                *s += w2 * v.norm_sqr();
            }
        }
    }
    sums
}

/// `dx sum_x sqrt(dt / M sum_tau ...)` from the row sums.
fn l1x_l2t(grid: &SpaceTimeGrid, sums: &[f64]) -> f64 {
    let c = grid.dt() / grid.n_times() as f64;
    grid.space().dx() * sums.iter().map(|s| (c * s).sqrt()).sum::<f64>()
}

fn yk_raw(f: &SpaceTimeSpectral, k: i32, cut: impl Fn(f64, f64) -> f64) -> f64 {
    let sums = tau_row_sums(
        f,
        |xi, tau| Complex64::new(tau - omega(xi), 1.0) * cut(xi, tau),
        &|_, out| out.push((0, 1.0)),
        1,
    );
    2f64.powf(-k as f64 / 2.0) * l1x_l2t(f.grid(), &sums[0])
}

/// Modulation blocks of `Y_0`: `2^j eta_j(tau)` for `j >= 1` and the
/// homogeneous `chi_j(tau)`, `j <= 0`, with unit weight.
fn y0_blocks(grid: &SpaceTimeGrid) -> (Vec<(i32, f64)>, HomogeneousLadder, i32) {
    let ladder = tau_ladder(grid);
    let cap = modulation_cap(grid, 0);
    let mut ids = Vec::new();
    for j in ladder.indices() {
        ids.push((j, 1.0));
    }
    for j in 1..=cap {
        ids.push((j, 2f64.powi(j)));
    }
    (ids, ladder, cap)
}

fn y0_raw(f: &SpaceTimeSpectral, cut: impl Fn(f64) -> f64) -> Vec<BlockTerm> {
    let grid = *f.grid();
    let (ids, ladder, _) = y0_blocks(&grid);
    let n_low = (ladder.max - ladder.min + 1) as usize;
    let weights = |tau: f64, out: &mut Vec<(usize, f64)>| {
        let c = cut(tau);
        if c == 0.0 {
            return;
        }
        for &(j, w) in ladder.blocks(tau).as_slice() {
            out.push(((j - ladder.min) as usize, w * c));
        }
        for &(j, w) in inhomogeneous_blocks(tau).as_slice() {
            if j >= 1 {
                out.push((n_low + j as usize - 1, w * c));
            }
        }
    };
    let sums = tau_row_sums(f, |_, _| Complex64::new(1.0, 0.0), &weights, ids.len());
    ids.iter()
        .zip(&sums)
        .filter(|(_, s)| s.iter().any(|&v| v > 0.0))
        .map(|(&(j, w), s)| BlockTerm { id: BlockId::J(j), weight: w, contribution: l1x_l2t(&grid, s) })
        .collect()
}

/// `Y_k`, `k >= 1`: `2^{-k/2} ||F^{-1}[(tau - omega + i) f]||_{L^1_x L^2_t}`.
pub fn yk_norm(f: &SpaceTimeSpectral, k: i32) -> Result<f64> {
    if k < 1 {
        return Err(Error::Config("Y_k is defined here for k >= 1; use y0_norm".into()));
    }
    check_band(f, k)?;
    let limit = 2f64.powi(k);
    let leak = f.leakage(|xi, tau| (tau - omega(xi)).abs() <= limit);
    if leak > SUPPORT_TOL {
        return Err(Error::Support(format!("Y_{k} data must have |tau - omega| <= 2^{k}")));
    }
    Ok(yk_raw(f, k, |_, _| 1.0))
}

pub fn y0_norm(f: &SpaceTimeSpectral) -> Result<NormBreakdown> {
    check_band(f, 0)?;
    let blocks = y0_raw(f, |_| 1.0);
    let total = blocks.iter().map(|b| b.weight * b.contribution).sum();
    Ok(NormBreakdown { total, blocks, witness: None })
}

/// `Z̄_0 = sum_j 2^j ||eta_j(tau) f||`.
pub fn zbar0_norm(f: &SpaceTimeSpectral) -> Result<f64> {
    check_band(f, 0)?;
    let cap = modulation_cap(f.grid(), 0) as usize;
    let mut e = vec![0.0; cap + 1];
    f.for_each(|_, tau, c| {
        let n = c.norm_sqr();
        if n > 0.0 {
            for &(j, w) in inhomogeneous_blocks(tau).as_slice() {
                e[j as usize] += n * w * w;
            }
        }
    });
    let m = f.measure();
    Ok(e.iter().enumerate().map(|(j, s)| 2f64.powi(j as i32) * m * s.sqrt()).sum())
}

fn sum_space(k: i32, opts: &BourgainOptions) -> bool {
    k == 0 || k >= opts.k_y
}

/// `Z_k`: `X_k` below the `k_Y` threshold, otherwise the smallest
/// `X_k(f_X) + Y_k(f_Y)` over the threshold splits
/// `f_Y = eta0((tau - omega) / 2^{j*-1}) f` and the pure assignments.
pub fn zk_norm(f: &SpaceTimeSpectral, k: i32, opts: &BourgainOptions) -> Result<NormBreakdown> {
    check_band(f, k)?;
    if !sum_space(k, opts) {
        return xk_norm(f, k).map(|mut b| {
            b.witness = Some(Witness::Sum(SumSplit::PureX));
            b
        });
    }
    let grid = *f.grid();
    let cap = modulation_cap(&grid, k);
    let top_threshold = if k >= 1 { k.min(cap + 1) } else { cap + 1 };
    let mut cands: Vec<Option<i32>> = vec![None];
    cands.extend((1..=top_threshold).map(Some));
    let table = XTable::build(f, k, &cands);
    let m = f.measure();
    let pure_y_ok = k == 0 || f.leakage(|xi, tau| (tau - omega(xi)).abs() <= 2f64.powi(k)) <= SUPPORT_TOL;

    let y_value = |cut: &dyn Fn(f64, f64) -> f64| -> f64 {
        if k >= 1 {
            yk_raw(f, k, cut)
        } else {
            y0_raw(f, |tau| cut(0.0, tau)).iter().map(|b| b.weight * b.contribution).sum()
        }
    };

    let mut summary = Vec::new();
    let mut best = (table.value(0, m), SumSplit::PureX);
    summary.push(BlockTerm { id: BlockId::PureX, weight: 1.0, contribution: best.0 });
    for (c, cand) in cands.iter().enumerate().skip(1) {
        let t = cand.expect("thresholds after the pure-X slot");
        let x = table.value(c, m);
        if x >= best.0 {
            summary.push(BlockTerm { id: BlockId::Threshold(t), weight: 1.0, contribution: f64::NAN });
            continue;
        }
        let y = y_value(&|xi, tau| eta_leq(t - 1, modulation(k, xi, tau)));
        let v = x + y;
        summary.push(BlockTerm { id: BlockId::Threshold(t), weight: 1.0, contribution: v });
        if v < best.0 {
            best = (v, SumSplit::Threshold(t));
        }
    }
    if pure_y_ok {
        let y = y_value(&|_, _| 1.0);
        summary.push(BlockTerm { id: BlockId::PureY, weight: 1.0, contribution: y });
        if y < best.0 {
            best = (y, SumSplit::PureY);
        }
    }
    summary.retain(|b| !b.contribution.is_nan());
    Ok(NormBreakdown { total: best.0, blocks: summary, witness: Some(Witness::Sum(best.1)) })
}

/// Split `(f_X, f_Y)` described by a sum-space witness.
pub fn zk_parts(f: &SpaceTimeSpectral, k: i32, split: SumSplit) -> (SpaceTimeSpectral, SpaceTimeSpectral) {
    let zero = SpaceTimeSpectral::zeros(*f.grid());
    match split {
        SumSplit::PureX => (f.clone(), zero),
        SumSplit::PureY => (zero, f.clone()),
        SumSplit::Threshold(t) => {
            let y = f.map(|xi, tau, c| c * eta_leq(t - 1, modulation(k, xi, tau)));
            let x = f.sub(&y).expect("same grid");
            (x, y)
        }
    }
}

fn composite(
    c: &SpaceTimeSpectral,
    sigma: f64,
    opts: &BourgainOptions,
    divide: bool,
) -> Result<NormBreakdown> {
    let kmax = top_block(c.grid().space().max_wavenumber());
    let mut blocks = Vec::new();
    let mut sq = 0.0;
    for k in 0..=kmax {
        let fk = c.map(|xi, tau, v| {
            let w = eta(k, xi);
            if w == 0.0 {
                return Complex64::default();
            }
            let v = v * w;
            if divide {
                let a = if k >= 1 { Complex64::new(tau - omega(xi), 1.0) } else { Complex64::new(tau, 1.0) };
                v / a
            } else {
                v
            }
        });
        if fk.max_abs() == 0.0 {
            continue;
        }
        let z = zk_norm(&fk, k, opts)?.total;
        let weight = 2f64.powf(sigma * k as f64);
        sq += (weight * z).powi(2);
        blocks.push(BlockTerm { id: BlockId::K(k), weight, contribution: z });
    }
    Ok(NormBreakdown { total: sq.sqrt(), blocks, witness: None })
}

/// `F^sigma`: the factor `(I - d_tau^2)` is applied as `(1 + t^2)` in time.
pub fn fsigma_norm(u: &SpaceTimeField, sigma: f64, opts: &BourgainOptions) -> Result<NormBreakdown> {
    let weighted = u.weight_in_time(|t| 1.0 + t * t);
    composite(&weighted.to_spectral(), sigma, opts, false)
}

/// `N^sigma`: block `k` is divided by `A_k` before the `Z_k` norm.
pub fn nsigma_norm(u: &SpaceTimeField, sigma: f64, opts: &BourgainOptions) -> Result<NormBreakdown> {
    composite(&u.to_spectral(), sigma, opts, true)
}

/// Same as [`nsigma_norm`] on transform coefficients.
pub fn nsigma_norm_spectral(c: &SpaceTimeSpectral, sigma: f64, opts: &BourgainOptions) -> Result<NormBreakdown> {
    composite(c, sigma, opts, true)
}

/// Same as [`fsigma_norm`] on the coefficients of `(1 + t^2) u`.
pub fn fsigma_norm_spectral(c: &SpaceTimeSpectral, sigma: f64, opts: &BourgainOptions) -> Result<NormBreakdown> {
    composite(c, sigma, opts, false)
}
