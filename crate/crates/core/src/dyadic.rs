//! Littlewood–Paley symbols.
//!
//! `eta0` is even, equal to 1 on `[-5/4, 5/4]`, 0 outside `[-8/5, 8/5]`, and
//! uses the smooth step `s(t) = e^{-1/t} / (e^{-1/t} + e^{-1/(1-t)})` on the
//! transition band. The homogeneous pieces are
//! `chi_l(xi) = eta0(xi / 2^l) - eta0(xi / 2^{l-1})`, supported in
//! `(5/8) 2^l <= |xi| <= (8/5) 2^l`, and the inhomogeneous ones are
//! `eta_l = chi_l` for `l >= 1`, `eta_l = 0` for `l < 0`.
//!
//! Rescaling by powers of two is exact in binary floating point, so `chi_l`
//! is a hard zero outside its support.

use crate::evolution::omega;
use crate::grid::{Grid, SpectralField};

const INNER: f64 = 1.25;
const OUTER: f64 = 1.6;

fn steep(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        (-1.0 / t).exp()
    }
}

/// C-infinity step from 0 at `t <= 0` to 1 at `t >= 1`.
pub fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        let a = steep(t);
        a / (a + steep(1.0 - t))
    }
}

pub fn eta0(xi: f64) -> f64 {
    let a = xi.abs();
    if a <= INNER {
        1.0
    } else if a >= OUTER {
        0.0
    } else {
        smooth_step((OUTER - a) / (OUTER - INNER))
    }
}

fn pow2(l: i32) -> f64 {
    2f64.powi(l)
}

pub fn chi(l: i32, xi: f64) -> f64 {
    (eta0(xi / pow2(l)) - eta0(xi / pow2(l - 1))).max(0.0)
}

pub fn eta(l: i32, xi: f64) -> f64 {
    match l {
        0 => eta0(xi),
        l if l > 0 => chi(l, xi),
        _ => 0.0,
    }
}

/// `sum_{l <= top} eta_l = eta0(xi / 2^top)` for `top >= 0`.
pub fn eta_leq(top: i32, xi: f64) -> f64 {
    if top < 0 {
        0.0
    } else {
        eta0(xi / pow2(top))
    }
}

pub fn eta_range(lo: i32, hi: i32, xi: f64) -> f64 {
    if hi < lo || hi < 0 {
        return 0.0;
    }
    let lo = lo.max(0);
    if lo == 0 {
        eta_leq(hi, xi)
    } else {
        (eta0(xi / pow2(hi)) - eta0(xi / pow2(lo - 1))).max(0.0)
    }
}

pub fn chi_range(lo: i32, hi: i32, xi: f64) -> f64 {
    if hi < lo {
        return 0.0;
    }
    (eta0(xi / pow2(hi)) - eta0(xi / pow2(lo - 1))).max(0.0)
}

/// A Littlewood–Paley multiplier.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DyadicSymbol {
    Eta0,
    Chi(i32),
    Eta(i32),
    EtaRange(i32, i32),
    EtaLeq(i32),
    ChiRange(i32, i32),
}

impl DyadicSymbol {
    pub fn eval(&self, xi: f64) -> f64 {
        match *self {
            DyadicSymbol::Eta0 => eta0(xi),
            DyadicSymbol::Chi(l) => chi(l, xi),
            DyadicSymbol::Eta(l) => eta(l, xi),
            DyadicSymbol::EtaRange(a, b) => eta_range(a, b, xi),
            DyadicSymbol::EtaLeq(b) => eta_leq(b, xi),
            DyadicSymbol::ChiRange(a, b) => chi_range(a, b, xi),
        }
    }
}

/// Up to three `(index, weight)` pairs with nonzero weight.
#[derive(Debug, Clone, Copy, Default)]
pub struct Blocks {
    items: [(i32, f64); 3],
    len: usize,
}

impl Blocks {
    fn push(&mut self, j: i32, w: f64) {
        if w > 0.0 {
            self.items[self.len] = (j, w);
            self.len += 1;
        }
    }

    pub fn as_slice(&self) -> &[(i32, f64)] {
        &self.items[..self.len]
    }
}

/// Index `j` with `(5/8) 2^j <= |v| < (5/8) 2^{j+1}`; the only `chi` blocks
/// that can be nonzero at `v` are `j - 1`, `j` and `j + 1`.
fn centre_index(v: f64) -> i32 {
    (v.abs() / 0.625).log2().floor() as i32
}

/// Nonzero inhomogeneous blocks `eta_j(v)`, `j >= 0`.
pub fn inhomogeneous_blocks(v: f64) -> Blocks {
    let mut b = Blocks::default();
    let e0 = eta0(v);
    b.push(0, e0);
    if e0 < 1.0 {
        let c = centre_index(v);
        for j in (c - 1)..=(c + 1) {
            if j >= 1 {
                b.push(j, chi(j, v));
            }
        }
    }
    b
}

/// Homogeneous ladder `chi_j`, `min <= j <= max`, where everything below
/// `min` (including the origin) is lumped into block `min`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HomogeneousLadder {
    pub min: i32,
    pub max: i32,
}

impl HomogeneousLadder {
    /// Ladder whose lowest block resolves a grid with spacing `spacing`:
    /// `min = ceil(log2(spacing)) - 1`.
    pub fn for_spacing(spacing: f64, max: i32) -> Self {
        let min = (spacing.log2().ceil() as i32 - 1).min(max);
        Self { min, max }
    }

    /// Frequency ladder of the low band on a spatial grid (`max = 1`).
    pub fn for_grid(grid: &Grid) -> Self {
        Self::for_spacing(grid.dxi(), 1)
    }

    pub fn weight(&self, j: i32, v: f64) -> f64 {
        if j < self.min || j > self.max {
            0.0
        } else if j == self.min {
            eta0(v / pow2(self.min))
        } else {
            chi(j, v)
        }
    }

    pub fn blocks(&self, v: f64) -> Blocks {
        let mut b = Blocks::default();
        let low = eta0(v / pow2(self.min));
        b.push(self.min, low);
        if low < 1.0 {
            let c = centre_index(v);
            for j in (c - 1)..=(c + 1) {
                if j > self.min && j <= self.max {
                    b.push(j, chi(j, v));
                }
            }
        }
        b
    }

    pub fn indices(&self) -> impl Iterator<Item = i32> {
        self.min..=self.max
    }
}

/// Highest `eta_j` block that is nonzero somewhere on `|v| <= v_max`.
pub fn top_block(v_max: f64) -> i32 {
    if v_max < 1.25 {
        0
    } else {
        // (5/8) 2^j < v_max
        let mut j = 1;
        while 0.625 * pow2(j + 1) < v_max {
            j += 1;
        }
        j
    }
}

/// `D_{k,j}`: frequency `|xi| in [2^{k-1}, 2^{k+1}]` and modulation
/// `tau - omega(xi)` (k >= 1) or `tau` (k <= 0) in `[-2, 2]` (j = 0) or
/// `|.| in [2^{j-1}, 2^{j+1}]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DyadicRegion {
    pub k: i32,
    pub j: u32,
}

impl DyadicRegion {
    pub fn contains(&self, xi: f64, tau: f64) -> bool {
        let a = xi.abs();
        if a < pow2(self.k - 1) || a > pow2(self.k + 1) {
            return false;
        }
        let m = if self.k >= 1 { tau - omega(xi) } else { tau };
        if self.j == 0 {
            m.abs() <= 2.0
        } else {
            let j = self.j as i32;
            m.abs() >= pow2(j - 1) && m.abs() <= pow2(j + 1)
        }
    }
}

/// Pointwise multiplication by a symbol on the frequency axis.
pub fn project(field: &SpectralField, symbol: DyadicSymbol) -> SpectralField {
    field.apply_real_symbol(|xi| symbol.eval(xi))
}
