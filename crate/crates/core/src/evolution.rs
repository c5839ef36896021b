//! BOB dynamics: `u_t - eps u_xx + H u_xx + u u_x = 0`.
//!
//! In Fourier variables `u_t = lambda(xi) u + N(u)` with
//! `lambda = i omega(xi) - eps xi^2`, `omega(xi) = -xi |xi|` and
//! `N(u) = -(i xi / 2) F(u^2)`.

use std::f64::consts::PI;
use std::io::{BufRead, Write};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{Grid, PhysicalField, SpectralField};

/// Upper bound on `dt * max |omega|` accepted by the time stepper.
pub const MAX_CFL: f64 = 10.0;

const CONTOUR_POINTS: usize = 32;

/// Dispersion relation `omega(xi) = -xi |xi|`.
pub fn omega(xi: f64) -> f64 {
    -xi * xi.abs()
}

/// Linear symbol `i omega(xi) - eps xi^2`.
pub fn linear_symbol(xi: f64, eps: f64) -> Complex64 {
    Complex64::new(-eps * xi * xi, omega(xi))
}

/// Free multiplier `exp(i t omega - |t| eps xi^2)`, defined for all real `t`.
pub fn free_multiplier(xi: f64, t: f64, eps: f64) -> Complex64 {
    Complex64::new(-t.abs() * eps * xi * xi, t * omega(xi)).exp()
}

pub fn check_epsilon(eps: f64) -> Result<()> {
    if (0.0..=1.0).contains(&eps) {
        Ok(())
    } else {
        Err(Error::Config(format!("viscosity must lie in [0, 1], got {eps}")))
    }
}

/// `W_eps(t)`, multiplication by `exp(t lambda(xi))`.
pub fn apply_semigroup(phi: &SpectralField, t: f64, eps: f64) -> Result<SpectralField> {
    check_epsilon(eps)?;
    if !t.is_finite() || (t < 0.0 && eps > 0.0) {
        return Err(Error::Domain(format!("semigroup time must be >= 0 when eps > 0, got t={t}")));
    }
    Ok(phi.apply_symbol(|xi| (linear_symbol(xi, eps) * t).exp()))
}

/// `dt * max |omega|` on `grid`.
pub fn cfl_number(grid: &Grid, dt: f64) -> f64 {
    dt * grid.max_wavenumber().powi(2)
}

/// Zero every mode with `|m| > N/3`.
pub fn dealias(grid: &Grid, coeffs: &mut [Complex64]) {
    let n = grid.n_points() as i64;
    for (i, c) in coeffs.iter_mut().enumerate() {
        if 3 * grid.mode(i).abs() > n {
            *c = Complex64::new(0.0, 0.0);
        }
    }
}

/// Dealiased `-(i xi / 2) F(u^2)` from the coefficients of `u`.
pub fn nonlinear_rhs(grid: &Grid, coeffs: &[Complex64]) -> Vec<Complex64> {
    let mut buf = coeffs.to_vec();
    dealias(grid, &mut buf);
    crate::fft::inverse(&mut buf);
    for v in buf.iter_mut() {
        *v = Complex64::new(v.re * v.re, 0.0);
    }
    crate::fft::forward(&mut buf);
    dealias(grid, &mut buf);
    for (i, v) in buf.iter_mut().enumerate() {
        *v *= Complex64::new(0.0, -0.5 * grid.wavenumber(i));
    }
    buf
}

/// `d/dx (u^2 / 2)` with the 2/3 rule applied to the product.
pub fn nonlinear_term(u: &PhysicalField) -> PhysicalField {
    let grid = *u.grid();
    let rhs = nonlinear_rhs(&grid, u.to_spectral().coeffs());
    let neg: Vec<Complex64> = rhs.into_iter().map(|c| -c).collect();
    SpectralField::new(grid, neg).expect("length preserved").to_physical()
}

/// Per-mode ETDRK4 coefficients for step `h`.
struct Etdrk4 {
    e: Vec<Complex64>,
    e2: Vec<Complex64>,
    q: Vec<Complex64>,
    f1: Vec<Complex64>,
    f2: Vec<Complex64>,
    f3: Vec<Complex64>,
}

impl Etdrk4 {
    fn new(grid: &Grid, eps: f64, h: f64) -> Self {
        let n = grid.n_points();
        let roots: Vec<Complex64> = (0..CONTOUR_POINTS)
            .map(|k| Complex64::from_polar(1.0, PI * (2 * k + 1) as f64 / CONTOUR_POINTS as f64))
            .collect();
        let mut s = Etdrk4 {
            e: Vec::with_capacity(n),
            e2: Vec::with_capacity(n),
            q: Vec::with_capacity(n),
            f1: Vec::with_capacity(n),
            f2: Vec::with_capacity(n),
            f3: Vec::with_capacity(n),
        };
        let inv = 1.0 / CONTOUR_POINTS as f64;
        for i in 0..n {
            let z = linear_symbol(grid.wavenumber(i), eps) * h;
            s.e.push(z.exp());
            s.e2.push((z / 2.0).exp());
            let (mut q, mut f1, mut f2, mut f3) = (Complex64::default(), Complex64::default(), Complex64::default(), Complex64::default());
            for root in &roots {
                let r = z + root;
                let er = r.exp();
                let r3 = r * r * r;
                q += ((r / 2.0).exp() - 1.0) / r;
                f1 += (-4.0 - r + er * (4.0 - 3.0 * r + r * r)) / r3;
                f2 += (2.0 + r + er * (r - 2.0)) / r3;
                f3 += (-4.0 - 3.0 * r - r * r + er * (4.0 - r)) / r3;
            }
            s.q.push(q * inv * h);
            s.f1.push(f1 * inv * h);
            s.f2.push(f2 * inv * h);
            s.f3.push(f3 * inv * h);
        }
        s
    }

    fn step(&self, grid: &Grid, v: &mut [Complex64], nonlinear: bool) {
        if !nonlinear {
            v.iter_mut().zip(&self.e).for_each(|(x, e)| *x *= e);
            return;
        }
        let nv = nonlinear_rhs(grid, v);
        let a: Vec<Complex64> = (0..v.len()).map(|i| self.e2[i] * v[i] + self.q[i] * nv[i]).collect();
        let na = nonlinear_rhs(grid, &a);
        let b: Vec<Complex64> = (0..v.len()).map(|i| self.e2[i] * v[i] + self.q[i] * na[i]).collect();
        let nb = nonlinear_rhs(grid, &b);
        let c: Vec<Complex64> =
            (0..v.len()).map(|i| self.e2[i] * a[i] + self.q[i] * (2.0 * nb[i] - nv[i])).collect();
        let nc = nonlinear_rhs(grid, &c);
        for i in 0..v.len() {
            v[i] = self.e[i] * v[i] + nv[i] * self.f1[i] + 2.0 * (na[i] + nb[i]) * self.f2[i] + nc[i] * self.f3[i];
        }
    }
}

/// Time-stepping parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveParams {
    pub epsilon: f64,
    pub horizon: f64,
    pub dt: f64,
    /// Number of stored intervals; snapshots are taken at `k T / snapshots`.
    pub snapshots: usize,
    /// Switching this off leaves the exact linear propagator.
    pub nonlinear: bool,
}

impl SolveParams {
    pub fn new(epsilon: f64, horizon: f64, dt: f64, snapshots: usize) -> Self {
        Self { epsilon, horizon, dt, snapshots, nonlinear: true }
    }

    pub fn linear_only(mut self) -> Self {
        self.nonlinear = false;
        self
    }

    /// Total step count, validated against the snapshot cadence.
    pub fn steps(&self) -> Result<usize> {
        check_epsilon(self.epsilon)?;
        if !(self.horizon > 0.0 && self.horizon <= 1.0) {
            return Err(Error::Config(format!("horizon must lie in (0, 1], got {}", self.horizon)));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if self.snapshots == 0 {
            return Err(Error::Config("snapshot count must be >= 1".into()));
        }
        let steps = (self.horizon / self.dt).round() as usize;
        if steps == 0 || (steps as f64 * self.dt - self.horizon).abs() > 1e-9 * self.horizon {
            return Err(Error::Config(format!("dt={} does not divide horizon {}", self.dt, self.horizon)));
        }
        if steps % self.snapshots != 0 {
            return Err(Error::Config(format!("{steps} steps cannot be split into {} snapshots", self.snapshots)));
        }
        Ok(steps)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverMeta {
    pub method: String,
    pub dt: f64,
    pub dealiased: bool,
    pub nonlinear: bool,
}

/// Snapshots `u(t_k)`, `t_k = k T / M`, `k = 0..=M`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub grid: Grid,
    pub epsilon: f64,
    pub times: Vec<f64>,
    pub snapshots: Vec<PhysicalField>,
    pub meta: SolverMeta,
}

impl Trajectory {
    pub fn spectral(&self) -> Vec<SpectralField> {
        self.snapshots.iter().map(|s| s.to_spectral()).collect()
    }

    pub fn final_state(&self) -> &PhysicalField {
        self.snapshots.last().expect("trajectory is never empty")
    }

    pub fn l2_norms(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.l2_norm()).collect()
    }

    /// `max_k ||u(t_k) - v(t_k)||_{L^2}`.
    pub fn sup_l2_distance(&self, other: &Trajectory) -> Result<f64> {
        self.grid.check_same(&other.grid)?;
        if self.times.len() != other.times.len() {
            return Err(Error::GridMismatch("snapshot counts differ".into()));
        }
        let mut worst: f64 = 0.0;
        for (a, b) in self.snapshots.iter().zip(&other.snapshots) {
            let d: f64 = a.values().iter().zip(b.values()).map(|(x, y)| (x - y) * (x - y)).sum();
            worst = worst.max((d * self.grid.dx()).sqrt());
        }
        Ok(worst)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# schema=v1")?;
        writeln!(
            w,
            "# method={} epsilon={} dt={} dealiased={} nonlinear={} half_length={} n_points={}",
            self.meta.method,
            self.epsilon,
            self.meta.dt,
            self.meta.dealiased,
            self.meta.nonlinear,
            self.grid.half_length(),
            self.grid.n_points()
        )?;
        write!(w, "t")?;
        for j in 0..self.grid.n_points() {
            write!(w, ",u{j}")?;
        }
        writeln!(w)?;
        for (t, s) in self.times.iter().zip(&self.snapshots) {
            write!(w, "{t}")?;
            for v in s.values() {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Trajectory> {
        let mut lines = r.lines();
        let mut next = || -> Result<String> {
            lines.next().ok_or_else(|| Error::Parse("truncated trajectory file".into()))?.map_err(Error::from)
        };
        let schema = next()?;
        if schema.trim() != "# schema=v1" {
            return Err(Error::Parse(format!("unsupported schema line '{schema}'")));
        }
        let meta_line = next()?;
        let body = meta_line
            .strip_prefix("# ")
            .ok_or_else(|| Error::Parse("missing metadata line".into()))?;
        let mut kv = std::collections::BTreeMap::new();
        for item in body.split_whitespace() {
            let (k, v) = item.split_once('=').ok_or_else(|| Error::Parse(format!("bad metadata '{item}'")))?;
            kv.insert(k.to_string(), v.to_string());
        }
        let get = |k: &str| kv.get(k).cloned().ok_or_else(|| Error::Parse(format!("metadata key '{k}' missing")));
        let num = |k: &str| -> Result<f64> { get(k)?.parse().map_err(|_| Error::Parse(format!("bad number for '{k}'"))) };
        let flag = |k: &str| -> Result<bool> { get(k)?.parse().map_err(|_| Error::Parse(format!("bad flag for '{k}'"))) };
        let n_points: usize = get("n_points")?.parse().map_err(|_| Error::Parse("bad n_points".into()))?;
        let grid = Grid::new(num("half_length")?, n_points)?;
        let meta = SolverMeta { method: get("method")?, dt: num("dt")?, dealiased: flag("dealiased")?, nonlinear: flag("nonlinear")? };
        let epsilon = num("epsilon")?;
        let _header = next()?;
        let mut times = Vec::new();
        let mut snapshots = Vec::new();
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut vals = line.split(',').map(|s| s.trim().parse::<f64>());
            let t = vals.next().ok_or_else(|| Error::Parse("empty row".into()))?.map_err(|_| Error::Parse("bad time".into()))?;
            let values: std::result::Result<Vec<f64>, _> = vals.collect();
            let values = values.map_err(|_| Error::Parse(format!("bad value in row t={t}")))?;
            times.push(t);
            snapshots.push(PhysicalField::new(grid, values)?);
        }
        if snapshots.is_empty() {
            return Err(Error::Parse("trajectory has no snapshots".into()));
        }
        Ok(Trajectory { grid, epsilon, times, snapshots, meta })
    }
}

fn check_growth(v: &[Complex64], initial: f64, t: f64) -> Result<()> {
    let s: f64 = v.iter().map(|c| c.norm_sqr()).sum();
    if !s.is_finite() {
        return Err(Error::Divergence(format!("non-finite state at t={t}")));
    }
    if initial > 0.0 && s.sqrt() > 1e3 * initial {
        return Err(Error::Divergence(format!("norm grew by more than 1e3 at t={t}")));
    }
    Ok(())
}

/// ETDRK4 solve of the BOB equation.
pub fn integrate(phi: &PhysicalField, params: &SolveParams) -> Result<Trajectory> {
    let grid = *phi.grid();
    let steps = params.steps()?;
    let cfl = cfl_number(&grid, params.dt);
    if cfl > MAX_CFL {
        return Err(Error::Config(format!("dt * max|omega| = {cfl:.3} exceeds {MAX_CFL}")));
    }
    let coeffs = Etdrk4::new(&grid, params.epsilon, params.dt);
    let every = steps / params.snapshots;
    let mut v = phi.to_spectral().into_coeffs();
    let initial = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    let mut times = vec![0.0];
    let mut snapshots = vec![phi.clone()];
    for s in 1..=steps {
        coeffs.step(&grid, &mut v, params.nonlinear);
        let t = s as f64 * params.dt;
        check_growth(&v, initial, t)?;
        if s % every == 0 {
            times.push(params.horizon * (s / every) as f64 / params.snapshots as f64);
            snapshots.push(SpectralField::new(grid, v.clone())?.to_physical());
        }
    }
    Ok(Trajectory {
        grid,
        epsilon: params.epsilon,
        times,
        snapshots,
        meta: SolverMeta { method: "etdrk4".into(), dt: params.dt, dealiased: true, nonlinear: params.nonlinear },
    })
}

/// Coefficients of `coarse` obtained from a field on the refined grid by
/// keeping the shared modes; the coarse Nyquist slot is zeroed.
pub fn restrict(fine: &SpectralField, coarse: &Grid) -> Result<SpectralField> {
    let fg = fine.grid();
    if fg.half_length() != coarse.half_length() || fg.n_points() < coarse.n_points() {
        return Err(Error::GridMismatch("restriction needs a finer grid on the same interval".into()));
    }
    let ratio = fg.n_points() as f64 / coarse.n_points() as f64;
    let half = (coarse.n_points() / 2) as i64;
    let mut out = SpectralField::zeros(*coarse);
    for m in (1 - half)..half {
        out.coeffs_mut()[coarse.slot(m)] = fine.coeffs()[fg.slot(m)] / ratio;
    }
    Ok(out)
}

/// Trigonometric interpolation of `coarse` onto `fine` (same interval).
pub fn prolong(coarse: &SpectralField, fine: &Grid) -> Result<SpectralField> {
    let cg = coarse.grid();
    if cg.half_length() != fine.half_length() || fine.n_points() < cg.n_points() {
        return Err(Error::GridMismatch("prolongation needs a finer grid on the same interval".into()));
    }
    let ratio = fine.n_points() as f64 / cg.n_points() as f64;
    let half = (cg.n_points() / 2) as i64;
    let mut out = SpectralField::zeros(*fine);
    for m in (1 - half)..half {
        out.coeffs_mut()[fine.slot(m)] = coarse.coeffs()[cg.slot(m)] * ratio;
    }
    Ok(out)
}

/// Step size used by the refined inviscid reference: `dt / 2`, halved
/// further until the refined grid passes the CFL check.
pub fn reference_dt(grid: &Grid, dt: f64) -> f64 {
    let fine = grid.refined();
    let mut h = dt / 2.0;
    while cfl_number(&fine, h) > MAX_CFL {
        h /= 2.0;
    }
    h
}

/// `S_eps(phi)`; for `eps = 0` the flow is computed on the doubled grid
/// with at most half the step and restricted back.
pub fn solution_map(phi: &PhysicalField, params: &SolveParams) -> Result<Trajectory> {
    if params.epsilon > 0.0 {
        return integrate(phi, params);
    }
    let grid = *phi.grid();
    let fine = grid.refined();
    let fine_phi = prolong(&phi.to_spectral(), &fine)?.to_physical();
    let fine_params = SolveParams { dt: reference_dt(&grid, params.dt), ..*params };
    let run = integrate(&fine_phi, &fine_params)?;
    let snapshots = run
        .snapshots
        .iter()
        .map(|s| Ok(restrict(&s.to_spectral(), &grid)?.to_physical()))
        .collect::<Result<Vec<_>>>()?;
    Ok(Trajectory {
        grid,
        epsilon: 0.0,
        times: run.times,
        snapshots,
        meta: SolverMeta { method: "etdrk4-refined".into(), ..run.meta },
    })
}

/// Quadrature for `I(t_i) = int_0^{t_i} e^{(t_i - s) L} g(s) ds` on a
/// uniform grid with exact exponentials.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DuhamelRule {
    /// Composite Simpson (3/8 rule on odd nodes).
    Simpson,
    /// Quadratic interpolation of `g` integrated against the exact kernel.
    Exponential,
}

/// `int_0^1 e^{w s} s^n ds` for `n = 0, 1, 2`.
fn exp_moments(w: Complex64) -> [Complex64; 3] {
    if w.norm() < 0.5 {
        let mut out = [Complex64::default(); 3];
        for (n, o) in out.iter_mut().enumerate() {
            let mut term = Complex64::new(1.0, 0.0);
            for k in 0..30 {
                *o += term / (n + k + 1) as f64;
                term *= w / (k + 1) as f64;
            }
        }
        out
    } else {
        let e = w.exp();
        [
            (e - 1.0) / w,
            (e * (w - 1.0) + 1.0) / (w * w),
            (e * (w * w - 2.0 * w + 2.0) - 2.0) / (w * w * w),
        ]
    }
}

/// Weights `int_0^len e^{z s} l_k(s) ds` for the Lagrange basis on `nodes`
/// (all in units of the step, `s` measured backwards from the right end).
fn product_weights(z: Complex64, nodes: [f64; 3], len: f64) -> [Complex64; 3] {
    let m = exp_moments(z * len);
    let moments = [m[0] * len, m[1] * len * len, m[2] * len * len * len];
    let mut w = [Complex64::default(); 3];
    for k in 0..3 {
        let (a, b) = match k {
            0 => (nodes[1], nodes[2]),
            1 => (nodes[0], nodes[2]),
            _ => (nodes[0], nodes[1]),
        };
        let d = (nodes[k] - a) * (nodes[k] - b);
        // (s - a)(s - b) / d = (ab - (a + b) s + s^2) / d
        w[k] = (moments[0] * (a * b) - moments[1] * (a + b) + moments[2]) / d;
    }
    w
}

/// Duhamel integrals of `forcing[i]` (coefficients at `t_i = i h`) under the
/// generator `lambda` (one entry per mode).
pub fn duhamel(
    lambda: &[Complex64],
    h: f64,
    forcing: &[Vec<Complex64>],
    rule: DuhamelRule,
) -> Result<Vec<Vec<Complex64>>> {
    let nt = forcing.len();
    if nt < 3 {
        return Err(Error::Config(format!("Duhamel quadrature needs at least 3 time nodes, got {nt}")));
    }
    let n = lambda.len();
    if forcing.iter().any(|g| g.len() != n) {
        return Err(Error::GridMismatch("forcing slices must match the generator length".into()));
    }
    let e1: Vec<Complex64> = lambda.iter().map(|l| (l * h).exp()).collect();
    let e2: Vec<Complex64> = lambda.iter().map(|l| (l * 2.0 * h).exp()).collect();
    let e3: Vec<Complex64> = lambda.iter().map(|l| (l * 3.0 * h).exp()).collect();
    // first interval, nodes t0, t1, t2 seen from t1
    let start: Vec<[Complex64; 3]> = lambda.iter().map(|l| product_weights(l * h, [1.0, 0.0, -1.0], 1.0)).collect();
    let (pair, single): (Vec<[Complex64; 3]>, Vec<[Complex64; 3]>) = match rule {
        DuhamelRule::Exponential => (
            lambda.iter().map(|l| product_weights(l * h, [2.0, 1.0, 0.0], 2.0)).collect(),
            lambda.iter().map(|l| product_weights(l * h, [2.0, 1.0, 0.0], 1.0)).collect(),
        ),
        DuhamelRule::Simpson => (Vec::new(), Vec::new()),
    };
    let zero = vec![Complex64::default(); n];
    let mut out = vec![zero; nt];
    for i in 1..nt {
        let mut cur = vec![Complex64::default(); n];
        if i == 1 {
            for m in 0..n {
                let w = &start[m];
                cur[m] = h * (w[0] * forcing[0][m] + w[1] * forcing[1][m] + w[2] * forcing[2][m]);
            }
        } else if i % 2 == 0 {
            let prev = &out[i - 2];
            for m in 0..n {
                let (g0, g1, g2) = (forcing[i - 2][m], forcing[i - 1][m], forcing[i][m]);
                let local = match rule {
                    DuhamelRule::Simpson => h / 3.0 * (e2[m] * g0 + 4.0 * e1[m] * g1 + g2),
                    DuhamelRule::Exponential => h * (pair[m][0] * g0 + pair[m][1] * g1 + pair[m][2] * g2),
                };
                cur[m] = e2[m] * prev[m] + local;
            }
        } else {
            match rule {
                DuhamelRule::Simpson => {
                    let prev = &out[i - 3];
                    for m in 0..n {
                        let s = e3[m] * forcing[i - 3][m]
                            + 3.0 * e2[m] * forcing[i - 2][m]
                            + 3.0 * e1[m] * forcing[i - 1][m]
                            + forcing[i][m];
                        cur[m] = e3[m] * prev[m] + 3.0 * h / 8.0 * s;
                    }
                }
                DuhamelRule::Exponential => {
                    let prev = &out[i - 1];
                    for m in 0..n {
                        let w = &single[m];
                        let local = w[0] * forcing[i - 2][m] + w[1] * forcing[i - 1][m] + w[2] * forcing[i][m];
                        cur[m] = e1[m] * prev[m] + h * local;
                    }
                }
            }
        }
        out[i] = cur;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PicardParams {
    pub epsilon: f64,
    pub horizon: f64,
    /// Number of time intervals on the shared grid.
    pub snapshots: usize,
    pub iterations: usize,
    pub rule: DuhamelRule,
}

/// Iterates `u_0 = W(t) phi`, `u_{n+1} = W(t) phi - (1/2) int_0^t W(t-s) (u_n^2)_x ds`.
///
/// Returns `iterations + 1` trajectories. An iterate whose sup-in-time
/// `L^2` norm exceeds ten times that of `u_0` is reported as divergence.
pub fn picard_solve(phi: &PhysicalField, params: &PicardParams) -> Result<Vec<Trajectory>> {
    check_epsilon(params.epsilon)?;
    if params.iterations == 0 {
        return Err(Error::Config("Picard needs at least one iteration".into()));
    }
    if !(params.horizon > 0.0 && params.horizon <= 1.0) {
        return Err(Error::Config(format!("horizon must lie in (0, 1], got {}", params.horizon)));
    }
    if params.snapshots < 2 {
        return Err(Error::Config("Picard needs at least 2 time intervals".into()));
    }
    let grid = *phi.grid();
    let h = params.horizon / params.snapshots as f64;
    let times: Vec<f64> = (0..=params.snapshots).map(|i| i as f64 * h).collect();
    let lambda: Vec<Complex64> = grid.wavenumbers().iter().map(|&xi| linear_symbol(xi, params.epsilon)).collect();
    let phi_hat = phi.to_spectral();
    let free: Vec<Vec<Complex64>> = times
        .iter()
        .map(|&t| phi_hat.coeffs().iter().zip(&lambda).map(|(c, l)| c * (l * t).exp()).collect())
        .collect();
    let sup_norm = |states: &[Vec<Complex64>]| {
        states.iter().map(|v| v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()).fold(0.0, f64::max)
    };
    let base = sup_norm(&free);
    let meta = SolverMeta {
        method: match params.rule {
            DuhamelRule::Simpson => "picard-simpson".into(),
            DuhamelRule::Exponential => "picard-exponential".into(),
        },
        dt: h,
        dealiased: true,
        nonlinear: true,
    };
    let wrap = |states: &[Vec<Complex64>]| -> Result<Trajectory> {
        let snapshots = states
            .iter()
            .map(|v| Ok(SpectralField::new(grid, v.clone())?.to_physical()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Trajectory { grid, epsilon: params.epsilon, times: times.clone(), snapshots, meta: meta.clone() })
    };
    let mut iterates = vec![wrap(&free)?];
    let mut current = free.clone();
    for n in 1..=params.iterations {
        let forcing: Vec<Vec<Complex64>> = current.iter().map(|v| nonlinear_rhs(&grid, v)).collect();
        let integral = duhamel(&lambda, h, &forcing, params.rule)?;
        let next: Vec<Vec<Complex64>> = free
            .iter()
            .zip(&integral)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + y).collect())
            .collect();
        let s = sup_norm(&next);
        if !s.is_finite() || (base > 0.0 && s > 10.0 * base) {
            return Err(Error::Divergence(format!("Picard iterate {n} grew beyond ten times the free solution")));
        }
        iterates.push(wrap(&next)?);
        current = next;
    }
    Ok(iterates)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid() -> Grid {
        Grid::new(PI, 32).unwrap()
    }

    #[test]
    fn semigroup_examples() {
        let g = grid();
        let phi = SpectralField::single_mode(g, 2, Complex64::new(1.0, 0.0));
        assert_eq!(apply_semigroup(&phi, 0.0, 0.3).unwrap(), phi);
        let t = 0.7;
        let w = apply_semigroup(&phi, t, 0.0).unwrap();
        let c = w.coeffs()[2];
        assert!((c - Complex64::from_polar(1.0, -4.0 * t)).norm() < 1e-15);
        let phi1 = SpectralField::single_mode(g, 1, Complex64::new(1.0, 0.0));
        let d = apply_semigroup(&phi1, 1.0, 1.0).unwrap();
        assert!((d.coeffs()[1].norm() - (-1.0f64).exp()).abs() < 1e-15);
        assert!(apply_semigroup(&phi, -0.1, 0.5).is_err());
        assert!(apply_semigroup(&phi, -0.1, 0.0).is_ok());
    }

    #[test]
    fn omega_is_odd() {
        for xi in [0.3, 1.0, 7.5] {
            assert_eq!(omega(-xi), -omega(xi));
        }
        assert_eq!(omega(2.0), -4.0);
    }

    #[test]
    fn nonlinear_examples() {
        let g = grid();
        let c = PhysicalField::from_fn(g, |_| 0.7).unwrap();
        assert!(nonlinear_term(&c).values().iter().all(|v| v.abs() < 1e-14));
        let s = PhysicalField::from_fn(g, f64::sin).unwrap();
        let out = nonlinear_term(&s);
        for (x, v) in g.xs().iter().zip(out.values()) {
            assert!((v - (2.0 * x).sin() / 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_data_stays_zero() {
        let g = Grid::new(16.0, 64).unwrap();
        let traj = integrate(&PhysicalField::zeros(g), &SolveParams::new(0.1, 0.5, 1.0 / 64.0, 8)).unwrap();
        assert!(traj.snapshots.iter().all(|s| s.values().iter().all(|&v| v == 0.0)));
        assert_eq!(traj.times.len(), 9);
    }

    #[test]
    fn linear_hook_matches_semigroup() {
        let g = Grid::new(16.0, 128).unwrap();
        let phi = PhysicalField::from_fn(g, |x| (-x * x / 4.0).exp() * (1.0 + x.sin())).unwrap();
        let p = SolveParams::new(0.05, 1.0, 1.0 / 128.0, 16).linear_only();
        let traj = integrate(&phi, &p).unwrap();
        for (t, s) in traj.times.iter().zip(&traj.snapshots) {
            let exact = apply_semigroup(&phi.to_spectral(), *t, 0.05).unwrap().to_physical();
            for (a, b) in s.values().iter().zip(exact.values()) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn rejects_bad_schedules() {
        let g = Grid::new(16.0, 64).unwrap();
        let z = PhysicalField::zeros(g);
        assert!(integrate(&z, &SolveParams::new(0.1, 1.5, 0.01, 1)).is_err());
        assert!(integrate(&z, &SolveParams::new(0.1, 1.0, 0.3, 1)).is_err());
        assert!(integrate(&z, &SolveParams::new(0.1, 1.0, 0.125, 3)).is_err());
        assert!(integrate(&z, &SolveParams::new(-0.1, 1.0, 0.125, 1)).is_err());
        // max|omega| = (32 pi / 16)^2 ~ 39.5
        assert!(integrate(&z, &SolveParams::new(0.0, 1.0, 0.5, 1)).is_err());
    }

    #[test]
    fn restrict_inverts_prolong() {
        let g = Grid::new(8.0, 32).unwrap();
        let f = PhysicalField::from_fn(g, |x| (-x * x).exp()).unwrap().to_spectral();
        let mut f0 = f.clone();
        f0.coeffs_mut()[16] = Complex64::default();
        let back = restrict(&prolong(&f, &g.refined()).unwrap(), &g).unwrap();
        for (a, b) in back.coeffs().iter().zip(f0.coeffs()) {
            assert!((a - b).norm() < 1e-13);
        }
    }

    #[test]
    fn product_weights_integrate_quadratics() {
        for z in [Complex64::new(0.0, 0.0), Complex64::new(-0.2, 0.3), Complex64::new(-3.0, 7.0)] {
            let w = product_weights(z, [2.0, 1.0, 0.0], 2.0);
            // integrate e^{z s} * s^2 over [0, 2] with nodes values 4, 1, 0
            let approx = w[0] * 4.0 + w[1] * 1.0;
            let exact = exp_moments(z * 2.0)[2] * 8.0;
            assert!((approx - exact).norm() < 1e-12 * (1.0 + exact.norm()));
        }
    }

    #[test]
    fn duhamel_rules_on_smooth_forcing() {
        // g(s) = cos(s), L = -1 + 2i; exact integral in closed form
        let l = Complex64::new(-1.0, 2.0);
        let h = 1.0 / 64.0;
        let nt = 65;
        let forcing: Vec<Vec<Complex64>> = (0..nt).map(|i| vec![Complex64::new((i as f64 * h).cos(), 0.0)]).collect();
        let exact = |t: f64| {
            // int_0^t e^{L(t-s)} cos s ds
            let i = Complex64::new(0.0, 1.0);
            let a = ((i * t).exp() - (l * t).exp()) / (i - l);
            let b = ((-i * t).exp() - (l * t).exp()) / (-i - l);
            (a + b) / 2.0
        };
        for rule in [DuhamelRule::Simpson, DuhamelRule::Exponential] {
            let out = duhamel(&[l], h, &forcing, rule).unwrap();
            for (i, v) in out.iter().enumerate() {
                assert!((v[0] - exact(i as f64 * h)).norm() < 1e-8, "{rule:?} at node {i}");
            }
        }
    }

    #[test]
    fn picard_zero_data() {
        let g = Grid::new(16.0, 64).unwrap();
        let p = PicardParams { epsilon: 0.1, horizon: 1.0, snapshots: 16, iterations: 3, rule: DuhamelRule::Simpson };
        let its = picard_solve(&PhysicalField::zeros(g), &p).unwrap();
        assert_eq!(its.len(), 4);
        assert!(its.iter().all(|t| t.snapshots.iter().all(|s| s.values().iter().all(|&v| v == 0.0))));
    }

    #[test]
    fn csv_round_trip() {
        let g = Grid::new(16.0, 64).unwrap();
        let phi = PhysicalField::from_fn(g, |x| 0.1 * (-x * x / 4.0).exp()).unwrap();
        let traj = integrate(&phi, &SolveParams::new(0.01, 0.25, 1.0 / 64.0, 4)).unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let back = Trajectory::read_csv(std::io::Cursor::new(buf)).unwrap();
        assert_eq!(back, traj);
    }

    proptest! {
        #[test]
        fn semigroup_law(t in 0.0f64..1.0, s in 0.0f64..1.0, eps in 0.0f64..1.0, seed in 0u64..1000) {
            let g = Grid::new(8.0, 32).unwrap();
            let coeffs: Vec<Complex64> = (0..32).map(|i| {
                let a = ((i as u64 * 7919 + seed) % 101) as f64 / 101.0;
                Complex64::new(a - 0.5, (a * 3.0).sin())
            }).collect();
            let phi = SpectralField::new(g, coeffs).unwrap();
            let a = apply_semigroup(&phi, t + s, eps).unwrap();
            let b = apply_semigroup(&apply_semigroup(&phi, t, eps).unwrap(), s, eps).unwrap();
            for (x, y) in a.coeffs().iter().zip(b.coeffs()) {
                prop_assert!((x - y).norm() <= 1e-12 * (1.0 + x.norm()));
            }
            if eps == 0.0 {
                prop_assert!((a.l2_xi() - phi.l2_xi()).abs() <= 1e-12 * phi.l2_xi());
            }
        }

        #[test]
        fn inviscid_isometry(t in 0.0f64..5.0, seed in 0u64..1000) {
            let g = Grid::new(8.0, 32).unwrap();
            let phi = PhysicalField::from_fn(g, |x| (x + seed as f64).sin() * (-x * x / 9.0).exp()).unwrap().to_spectral();
            let w = apply_semigroup(&phi, t, 0.0).unwrap();
            prop_assert!((w.l2_x() - phi.l2_x()).abs() <= 1e-12 * phi.l2_x());
        }
    }
}
