//! Norms on data and on space-time transforms.
//!
//! Every `L^2` norm in `xi` or `tau` carries the grid measure, see
//! [`crate::grid`] and [`crate::spacetime`] for the scalings.

mod b0;
mod bourgain;

use std::fmt;
use std::io::Write;

use crate::dyadic::{eta, eta0, top_block};
use crate::error::Result;
use crate::grid::SpectralField;

pub use b0::{b0_norm, b0_norm_with, split_cost, B0Options};
pub use bourgain::{
    beta, fsigma_norm, fsigma_norm_spectral, nsigma_norm, nsigma_norm_spectral, xk_norm, y0_norm, yk_norm, zbar0_norm, zk_norm, zk_parts, BourgainOptions,
};

/// Label of one term in a composite norm.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockId {
    /// Frequency block `k`.
    K(i32),
    /// Modulation block `j` of a frequency block.
    J(i32),
    /// Frequency-modulation pair `(k', j)`.
    Kj(i32, i32),
    /// Sum-space candidate with low modulations `< j*` sent to `Y`.
    Threshold(i32),
    PureX,
    PureY,
    /// `L^1` part of a `B_0` split.
    G,
    /// Homogeneous `L^2` part of a `B_0` split, block `k'`.
    H(i32),
}

impl fmt::Display for BlockId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BlockId::K(k) => write!(f, "k={k}"),
            BlockId::J(j) => write!(f, "j={j}"),
            BlockId::Kj(k, j) => write!(f, "k={k};j={j}"),
            BlockId::Threshold(j) => write!(f, "threshold={j}"),
            BlockId::PureX => write!(f, "pure_x"),
            BlockId::PureY => write!(f, "pure_y"),
            BlockId::G => write!(f, "g"),
            BlockId::H(k) => write!(f, "h;k={k}"),
        }
    }
}

/// Split of a sum-space element `f = f_X + f_Y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SumSplit {
    PureX,
    /// `f_Y = eta0(m / 2^{j-1}) f` with `m` the modulation variable.
    Threshold(i32),
    PureY,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Witness {
    /// Split `f = g + h` achieving the reported value, and a certified
    /// lower bound for the discrete infimum.
    B0 { g: SpectralField, h: SpectralField, lower_bound: f64 },
    Sum(SumSplit),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockTerm {
    pub id: BlockId,
    pub weight: f64,
    pub contribution: f64,
}

/// Per-block contributions of a norm together with the total.
#[derive(Debug, Clone, PartialEq)]
pub struct NormBreakdown {
    pub total: f64,
    pub blocks: Vec<BlockTerm>,
    pub witness: Option<Witness>,
}

impl NormBreakdown {
    pub fn zero() -> Self {
        Self { total: 0.0, blocks: Vec::new(), witness: None }
    }

    /// Total of a frequency-block breakdown recombined with weights `2^{sigma k}`.
    pub fn reweighted(&self, sigma: f64) -> f64 {
        self.blocks
            .iter()
            .filter_map(|b| match b.id {
                BlockId::K(k) => Some((2f64.powf(sigma * k as f64) * b.contribution).powi(2)),
                _ => None,
            })
            .sum::<f64>()
            .sqrt()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# schema=v1")?;
        writeln!(w, "block_id,weight,contribution")?;
        for b in &self.blocks {
            writeln!(w, "{},{},{}", b.id, b.weight, b.contribution)?;
        }
        writeln!(w, "total,,{}", self.total)?;
        Ok(())
    }
}

/// `H^sigma` norm `(int (1 + xi^2)^sigma |phi_hat|^2 dxi)^{1/2}`.
pub fn sobolev_norm(phi: &SpectralField, sigma: f64) -> f64 {
    let g = phi.grid();
    let s: f64 = phi
        .coeffs()
        .iter()
        .enumerate()
        .map(|(i, c)| (1.0 + g.wavenumber(i).powi(2)).powf(sigma) * c.norm_sqr())
        .sum();
    g.dx() * (g.dxi() * s).sqrt()
}

/// Refined norm `(||eta0 phi_hat||_{B_0}^2 + sum_k 2^{2 sigma k} ||eta_k phi_hat||^2)^{1/2}`.
pub fn refined_sobolev_norm(phi: &SpectralField, sigma: f64) -> Result<NormBreakdown> {
    refined_sobolev_norm_with(phi, sigma, &B0Options::default())
}

pub fn refined_sobolev_norm_with(phi: &SpectralField, sigma: f64, opts: &B0Options) -> Result<NormBreakdown> {
    let low = b0_norm_with(&phi.apply_real_symbol(eta0), opts)?;
    let mut blocks = vec![BlockTerm { id: BlockId::K(0), weight: 1.0, contribution: low.total }];
    let mut sq = low.total * low.total;
    for k in 1..=top_block(phi.grid().max_wavenumber()) {
        let part = phi.apply_real_symbol(|xi| eta(k, xi)).l2_xi();
        let weight = 2f64.powf(sigma * k as f64);
        sq += (weight * part).powi(2);
        blocks.push(BlockTerm { id: BlockId::K(k), weight, contribution: part });
    }
    Ok(NormBreakdown { total: sq.sqrt(), blocks, witness: low.witness })
}
