//! `B_0`: `inf_{f = g + h} ||F^{-1} g||_{L^1} + sum_{k' <= 1} 2^{-k'/2} ||chi_{k'} h||_{L^2}`.
//!
//! Solved over the raw coefficients of `g` on the modes `|xi| <= 2` by a
//! diagonally preconditioned primal-dual hybrid gradient iteration
//! (Chambolle–Pock). With `K1 g = dx ifft(g)` and
//! `K2_b g = dx sqrt(dxi) 2^{-b/2} chi_b g`, the cost is
//! `||K1 g||_1 + sum_b ||K2_b f - K2_b g||_2`. The best primal iterate is
//! returned, so the value is an upper bound for the discrete infimum.

use num_complex::Complex64;

use super::{BlockId, BlockTerm, NormBreakdown, Witness};
use crate::dyadic::HomogeneousLadder;
use crate::error::{Error, Result};
use crate::fft;
use crate::grid::{Grid, SpectralField};

const SUPPORT: f64 = 2.0;
const SUPPORT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct B0Options {
    pub max_iter: usize,
    /// Stop when the best cost improves by less than this (relative) over
    /// one check window.
    pub tol: f64,
    pub check_every: usize,
}

impl Default for B0Options {
    fn default() -> Self {
        Self { max_iter: 500, tol: 1e-6, check_every: 50 }
    }
}

struct Problem {
    grid: Grid,
    ladder: HomogeneousLadder,
    active: Vec<usize>,
    /// `d[b][a]`: diagonal of `K2_b` on active mode `a`.
    diag: Vec<Vec<f64>>,
}

impl Problem {
    fn new(grid: Grid) -> Self {
        let ladder = HomogeneousLadder::for_grid(&grid);
        let active: Vec<usize> = (0..grid.n_points()).filter(|&i| grid.wavenumber(i).abs() <= SUPPORT).collect();
        let base = grid.dx() * grid.dxi().sqrt();
        let diag = ladder
            .indices()
            .map(|b| {
                let w = base * 2f64.powf(-b as f64 / 2.0);
                active.iter().map(|&i| w * ladder.weight(b, grid.wavenumber(i))).collect()
            })
            .collect();
        Problem { grid, ladder, active, diag }
    }

    fn k1(&self, g: &[Complex64]) -> Vec<Complex64> {
        let mut buf = vec![Complex64::default(); self.grid.n_points()];
        for (a, &i) in self.active.iter().enumerate() {
            buf[i] = g[a];
        }
        fft::inverse(&mut buf);
        let dx = self.grid.dx();
        buf.iter_mut().for_each(|v| *v *= dx);
        buf
    }

    fn k1_adjoint(&self, p: &[Complex64]) -> Vec<Complex64> {
        let mut buf = p.to_vec();
        fft::forward(&mut buf);
        let s = self.grid.dx() / self.grid.n_points() as f64;
        self.active.iter().map(|&i| buf[i] * s).collect()
    }

    fn l1_part(&self, g: &[Complex64]) -> f64 {
        self.k1(g).iter().map(|v| v.norm()).sum()
    }

    fn block_parts(&self, f: &[Complex64], g: &[Complex64]) -> Vec<f64> {
        self.diag
            .iter()
            .map(|d| d.iter().zip(f.iter().zip(g)).map(|(w, (a, b))| (w * (a - b)).norm_sqr()).sum::<f64>().sqrt())
            .collect()
    }

    fn cost(&self, f: &[Complex64], g: &[Complex64]) -> f64 {
        self.l1_part(g) + self.block_parts(f, g).iter().sum::<f64>()
    }

    /// Weak-duality bound from the dual iterate: `p1` is corrected by the
    /// minimal-norm fix of the equality constraint, then everything is
    /// scaled into the unit balls.
    fn dual_bound(&self, f: &[Complex64], p1: &[Complex64], p2: &[Vec<Complex64>]) -> f64 {
        let n = self.grid.n_points();
        let k1p = self.k1_adjoint(p1);
        let mut r = vec![Complex64::default(); n];
        let mut value = 0.0;
        for (a, &i) in self.active.iter().enumerate() {
            r[i] = -k1p[a];
        }
        for (d, p) in self.diag.iter().zip(p2) {
            for (a, &i) in self.active.iter().enumerate() {
                let q = -p[a];
                r[i] += d[a] * q;
                value += (q.conj() * d[a] * f[a]).re;
            }
        }
        fft::inverse(&mut r);
        let s = n as f64 / self.grid.dx();
        let top = p1.iter().zip(&r).map(|(p, v)| (p + v * s).norm()).fold(1.0, f64::max);
        value / top
    }

    fn solve(&self, f: &[Complex64], opts: &B0Options) -> (Vec<Complex64>, f64) {
        let n_act = self.active.len();
        let zero = vec![Complex64::default(); n_act];
        let (c_f, c_0) = (self.cost(f, f), self.cost(f, &zero));
        let mut g = if c_f <= c_0 { f.to_vec() } else { zero };
        let mut best = g.clone();
        let mut best_cost = c_f.min(c_0);
        let mut lower: f64 = 0.0;
        if best_cost == 0.0 {
            return (best, 0.0);
        }
        let dx = self.grid.dx();
        let tau: Vec<f64> = (0..n_act).map(|a| 1.0 / (dx + self.diag.iter().map(|d| d[a]).sum::<f64>())).collect();
        let sigma1 = self.grid.n_points() as f64 / (dx * n_act as f64);
        // a single step per block keeps the dual update a Euclidean projection
        let sigma2: Vec<f64> = self.diag.iter().map(|d| 1.0 / d.iter().cloned().fold(f64::MIN_POSITIVE, f64::max)).collect();
        let mut p1 = vec![Complex64::default(); self.grid.n_points()];
        let mut p2 = vec![vec![Complex64::default(); n_act]; self.diag.len()];
        let mut g_bar = g.clone();
        let mut window_start = best_cost;
        for it in 1..=opts.max_iter {
            // dual ascent
            let kg = self.k1(&g_bar);
            for (p, v) in p1.iter_mut().zip(&kg) {
                let q = *p + sigma1 * v;
                let r = q.norm();
                *p = if r > 1.0 { q / r } else { q };
            }
            for ((d, p), s2) in self.diag.iter().zip(p2.iter_mut()).zip(&sigma2) {
                let mut q = vec![Complex64::default(); n_act];
                let mut r2 = 0.0;
                for a in 0..n_act {
                    q[a] = p[a] + (g_bar[a] - f[a]) * (s2 * d[a]);
                    r2 += q[a].norm_sqr();
                }
                let r = r2.sqrt();
                let s = if r > 1.0 { 1.0 / r } else { 1.0 };
                for a in 0..n_act {
                    p[a] = q[a] * s;
                }
            }
            // primal descent
            let mut grad = self.k1_adjoint(&p1);
            for (d, p) in self.diag.iter().zip(&p2) {
                for a in 0..n_act {
                    grad[a] += d[a] * p[a];
                }
            }
            for a in 0..n_act {
                let new = g[a] - tau[a] * grad[a];
                g_bar[a] = 2.0 * new - g[a];
                g[a] = new;
            }
            let c = self.cost(f, &g);
            if c < best_cost {
                best_cost = c;
                best.copy_from_slice(&g);
            }
            if it % opts.check_every == 0 {
                lower = lower.max(self.dual_bound(f, &p1, &p2));
                if window_start - best_cost <= opts.tol * window_start {
                    break;
                }
                window_start = best_cost;
            }
        }
        lower = lower.max(self.dual_bound(f, &p1, &p2));
        (best, lower)
    }
}

/// Cost of the split `g`, `h = f - g` (both full-grid coefficient vectors).
pub fn split_cost(f: &SpectralField, g: &SpectralField) -> Result<f64> {
    f.grid().check_same(g.grid())?;
    let pb = Problem::new(*f.grid());
    let fa: Vec<Complex64> = pb.active.iter().map(|&i| f.coeffs()[i]).collect();
    let ga: Vec<Complex64> = pb.active.iter().map(|&i| g.coeffs()[i]).collect();
    let outside: f64 = (0..f.grid().n_points())
        .filter(|i| !pb.active.contains(i))
        .map(|i| g.coeffs()[i].norm())
        .fold(0.0, f64::max);
    if outside > 0.0 {
        return Err(Error::Support("split component outside |xi| <= 2".into()));
    }
    Ok(pb.cost(&fa, &ga))
}

pub fn b0_norm(f: &SpectralField) -> Result<NormBreakdown> {
    b0_norm_with(f, &B0Options::default())
}

pub fn b0_norm_with(f: &SpectralField, opts: &B0Options) -> Result<NormBreakdown> {
    let grid = *f.grid();
    let pb = Problem::new(grid);
    let top = f.max_abs();
    let leak = (0..grid.n_points())
        .filter(|&i| grid.wavenumber(i).abs() > SUPPORT)
        .map(|i| f.coeffs()[i].norm())
        .fold(0.0, f64::max);
    if leak > SUPPORT_TOL * top.max(f64::MIN_POSITIVE) {
        return Err(Error::Domain(format!("B0 data not supported in |xi| <= 2 (relative leak {:.3e})", leak / top)));
    }
    if top == 0.0 {
        let mut out = NormBreakdown::zero();
        out.witness = Some(Witness::B0 { g: SpectralField::zeros(grid), h: SpectralField::zeros(grid), lower_bound: 0.0 });
        return Ok(out);
    }
    let scale = f.coeffs().iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    let fa: Vec<Complex64> = pb.active.iter().map(|&i| f.coeffs()[i] / scale).collect();
    let (ga, lower) = pb.solve(&fa, opts);
    let mut g = SpectralField::zeros(grid);
    let mut h = SpectralField::zeros(grid);
    for (a, &i) in pb.active.iter().enumerate() {
        g.coeffs_mut()[i] = ga[a] * scale;
        h.coeffs_mut()[i] = (fa[a] - ga[a]) * scale;
    }
    let l1 = pb.l1_part(&ga) * scale;
    let parts = pb.block_parts(&fa, &ga);
    let mut blocks = vec![BlockTerm { id: BlockId::G, weight: 1.0, contribution: l1 }];
    let mut total = l1;
    for (b, p) in pb.ladder.indices().zip(parts) {
        total += p * scale;
        blocks.push(BlockTerm { id: BlockId::H(b), weight: 2f64.powf(-b as f64 / 2.0), contribution: p * scale });
    }
    Ok(NormBreakdown { total, blocks, witness: Some(Witness::B0 { g, h, lower_bound: lower * scale }) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::PhysicalField;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    #[test]
    fn zero_and_support() {
        let g = Grid::new(8.0, 64).unwrap();
        assert_eq!(b0_norm(&SpectralField::zeros(g)).unwrap().total, 0.0);
        let high = SpectralField::single_mode(g, 10, Complex64::new(1.0, 0.0));
        assert!(matches!(b0_norm(&high), Err(Error::Domain(_))));
    }

    #[test]
    fn smooth_bump_bounded_by_l1() {
        let g = Grid::new(32.0, 512).unwrap();
        let phi = PhysicalField::from_fn(g, |x| (-x * x / 16.0).exp()).unwrap().to_spectral();
        let f = phi.apply_real_symbol(crate::dyadic::eta0);
        let r = b0_norm(&f).unwrap();
        assert!(r.total <= f.l1_of_inverse() * (1.0 + 1e-12));
        if let Some(Witness::B0 { g: wg, h: wh, .. }) = &r.witness {
            let sum = wg.add(wh).unwrap();
            for (a, b) in sum.coeffs().iter().zip(f.coeffs()) {
                assert!((a - b).norm() < 1e-12 * f.max_abs());
            }
            assert!((split_cost(&f, wg).unwrap() - r.total).abs() < 1e-10 * r.total);
        } else {
            panic!("missing witness");
        }
    }

    #[test]
    fn homogeneous() {
        let g = Grid::new(2.0 * PI, 16).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut f = SpectralField::zeros(g);
        for m in -4..=4 {
            f.coeffs_mut()[g.slot(m)] = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        }
        let a = b0_norm(&f).unwrap().total;
        for c in [-3.0, 1e-3, 250.0] {
            let b = b0_norm(&f.scale(Complex64::new(c, 0.0))).unwrap().total;
            assert!((b - c.abs() * a).abs() < 1e-10 * c.abs() * a, "c={c}");
        }
    }
}
