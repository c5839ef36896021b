//! Headline experiments: inviscid limit, Lipschitz continuity, scaling,
//! Picard convergence, energy balance and time-step order.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::dyadic::eta0;
use crate::error::{Error, Result};
use crate::evolution::{integrate, picard_solve, solution_map, DuhamelRule, PicardParams, SolveParams, Trajectory};
use crate::grid::{derivative, Grid, PhysicalField, SpectralField};
use crate::norms::{b0_norm, refined_sobolev_norm};
use crate::stats::{log_log_fit, LinearFit};

/// Minimum number of records for a fit.
pub const MIN_FIT_POINTS: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRecord {
    pub param: f64,
    pub measurement: f64,
    /// Values for the sweep's auxiliary columns, in order.
    pub aux: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub experiment_id: String,
    pub aux_names: Vec<String>,
    pub records: Vec<SweepRecord>,
    /// Log-log fit of measurement against param.
    pub fit: Option<LinearFit>,
    /// Free-form remarks, e.g. a divergence report.
    pub notes: Vec<String>,
}

impl SweepResult {
    /// Validates monotone parameters and nonnegative measurements.
    pub fn new(experiment_id: &str, aux_names: &[&str], records: Vec<SweepRecord>) -> Result<Self> {
        if records.iter().any(|r| !(r.measurement >= 0.0) || r.aux.len() != aux_names.len()) {
            return Err(Error::Config(format!("{experiment_id}: measurements must be nonnegative")));
        }
        let inc = records.windows(2).all(|w| w[1].param > w[0].param);
        let dec = records.windows(2).all(|w| w[1].param < w[0].param);
        if !(inc || dec) {
            return Err(Error::Config(format!("{experiment_id}: parameters must be strictly monotone")));
        }
        Ok(Self {
            experiment_id: experiment_id.into(),
            aux_names: aux_names.iter().map(|s| s.to_string()).collect(),
            records,
            fit: None,
            notes: Vec::new(),
        })
    }

    /// Adds the log-log fit when there are enough positive points.
    pub fn with_fit(mut self) -> Self {
        self.fit = if self.records.len() >= MIN_FIT_POINTS {
            let (x, y): (Vec<f64>, Vec<f64>) = self.records.iter().map(|r| (r.param, r.measurement)).unzip();
            log_log_fit(&x, &y)
        } else {
            None
        };
        self
    }

    pub fn params(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.param).collect()
    }

    pub fn measurements(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.measurement).collect()
    }

    pub fn aux(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.aux_names.iter().position(|n| n == name)?;
        Some(self.records.iter().map(|r| r.aux[i]).collect())
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# schema=v1")?;
        for n in &self.notes {
            writeln!(w, "# note: {n}")?;
        }
        write!(w, "experiment_id,param,measurement")?;
        for a in &self.aux_names {
            write!(w, ",{a}")?;
        }
        writeln!(w)?;
        for r in &self.records {
            write!(w, "{},{},{}", self.experiment_id, r.param, r.measurement)?;
            for a in &r.aux {
                write!(w, ",{a}")?;
            }
            writeln!(w)?;
        }
        match &self.fit {
            Some(f) => writeln!(w, "# summary: slope={} intercept={} r2={}", f.slope, f.intercept, f.r2)?,
            None => writeln!(w, "# summary: no fit")?,
        }
        Ok(())
    }
}

fn refined_distance(a: &PhysicalField, b: &PhysicalField, sigma: f64) -> Result<f64> {
    Ok(refined_sobolev_norm(&a.to_spectral().sub(&b.to_spectral())?, sigma)?.total)
}

/// `max_k ||u(t_k) - v(t_k)||_{H̃^sigma}` over shared snapshots.
pub fn sup_refined_distance(u: &Trajectory, v: &Trajectory, sigma: f64) -> Result<f64> {
    u.grid.check_same(&v.grid)?;
    if u.times.len() != v.times.len() {
        return Err(Error::GridMismatch("snapshot counts differ".into()));
    }
    let d = u
        .snapshots
        .par_iter()
        .zip(&v.snapshots)
        .map(|(a, b)| refined_distance(a, b, sigma))
        .collect::<Result<Vec<f64>>>()?;
    Ok(d.into_iter().fold(0.0, f64::max))
}

/// Time grid shared by the sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimeConfig {
    pub horizon: f64,
    pub dt: f64,
    pub snapshots: usize,
}

impl TimeConfig {
    pub fn params(&self, epsilon: f64) -> SolveParams {
        SolveParams::new(epsilon, self.horizon, self.dt, self.snapshots)
    }
}

/// `sup_t ||S_eps(phi) - S_0(phi)||_{H̃^sigma}` for each `eps`, against a
/// refined inviscid reference. Aux columns: the constant
/// `sup / (eps ||phi||_{H̃^2})` and `||phi||_{H̃^2}`.
pub fn inviscid_sweep(phi: &PhysicalField, sigma: f64, epsilons: &[f64], time: TimeConfig) -> Result<SweepResult> {
    if epsilons.is_empty() || epsilons.iter().any(|&e| !(e > 0.0 && e <= 1.0)) {
        return Err(Error::Config("inviscid sweep needs viscosities in (0, 1]".into()));
    }
    let reference = solution_map(phi, &time.params(0.0))?;
    let h2 = refined_sobolev_norm(&phi.to_spectral(), 2.0)?.total;
    let records = epsilons
        .par_iter()
        .map(|&eps| {
            let run = solution_map(phi, &time.params(eps))?;
            let d = sup_refined_distance(&run, &reference, sigma)?;
            let c = if h2 > 0.0 { d / (eps * h2) } else { 0.0 };
            Ok(SweepRecord { param: eps, measurement: d, aux: vec![c, h2] })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = SweepResult::new("inviscid_sweep", &["constant", "h2_norm"], records)?.with_fit();
    let m = out.measurements();
    let ordered = out.params().windows(2).zip(m.windows(2)).all(|(p, d)| (p[1] < p[0]) == (d[1] <= d[0]));
    if !ordered {
        out.notes.push("differences are not monotone in epsilon".into());
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LipschitzRecord {
    pub epsilon: f64,
    pub sigma: f64,
    /// `sup_t ||S(phi) - S(phi')||_{H̃^sigma}`.
    pub solution_distance: f64,
    /// `||phi - phi'||_{H̃^sigma}`.
    pub data_distance: f64,
    pub ratio: f64,
}

pub fn lipschitz_probe(
    phi: &PhysicalField,
    phi2: &PhysicalField,
    sigma: f64,
    epsilon: f64,
    time: TimeConfig,
) -> Result<LipschitzRecord> {
    phi.grid().check_same(phi2.grid())?;
    let data_distance = refined_distance(phi, phi2, sigma)?;
    if data_distance == 0.0 {
        return Err(Error::Degenerate("Lipschitz probe needs distinct data".into()));
    }
    let params = time.params(epsilon);
    let (a, b) = rayon::join(|| solution_map(phi, &params), || solution_map(phi2, &params));
    let solution_distance = sup_refined_distance(&a?, &b?, sigma)?;
    Ok(LipschitzRecord { epsilon, sigma, solution_distance, data_distance, ratio: solution_distance / data_distance })
}

/// Relative size of `|phi_lambda|` at the box edge above which a rescaled
/// profile counts as unrepresentable.
const EDGE_TOLERANCE: f64 = 1e-8;

/// `||phi_lambda||_{H̃^sigma} / ||phi||_{H̃^sigma}` for `phi_lambda(x) = lambda phi(lambda x)`.
/// Aux columns: the same ratio for the low-frequency `B_0` part, and the
/// raw rescaled norm.
pub fn scaling_check(
    grid: Grid,
    profile: impl Fn(f64) -> f64 + Sync,
    sigma: f64,
    lambdas: &[f64],
) -> Result<SweepResult> {
    if lambdas.iter().any(|&l| !(l > 0.0 && l <= 1.0)) {
        return Err(Error::Config("scaling factors must lie in (0, 1]".into()));
    }
    let edge = grid.half_length();
    let scaled = |lambda: f64| -> Result<SpectralField> {
        let f = PhysicalField::from_fn(grid, |x| lambda * profile(lambda * x))?;
        let peak = f.values().iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let tail = (lambda * profile(lambda * edge)).abs().max((lambda * profile(-lambda * edge)).abs());
        if peak == 0.0 {
            return Err(Error::Degenerate("zero profile".into()));
        }
        if tail > EDGE_TOLERANCE * peak {
            return Err(Error::Config(format!("scaling factor {lambda} spreads the profile past the box edge")));
        }
        let s = f.to_spectral();
        let top = s.coeffs()[grid.nyquist_index()].norm();
        if top > EDGE_TOLERANCE * s.max_abs() {
            return Err(Error::Config(format!("scaling factor {lambda} is not resolved at the Nyquist mode")));
        }
        Ok(s)
    };
    let base = scaled(1.0)?;
    let base_norm = refined_sobolev_norm(&base, sigma)?.total;
    let base_low = b0_norm(&base.apply_real_symbol(eta0))?.total;
    let records = lambdas
        .par_iter()
        .map(|&l| {
            let s = scaled(l)?;
            let n = refined_sobolev_norm(&s, sigma)?.total;
            let low = b0_norm(&s.apply_real_symbol(eta0))?.total;
            Ok(SweepRecord { param: l, measurement: n / base_norm, aux: vec![low / base_low, n] })
        })
        .collect::<Result<Vec<_>>>()?;
    SweepResult::new("scaling_check", &["b0_ratio", "norm"], records)
}

/// Differences below this fraction of `sup_t ||u_0||_{L^2}` are roundoff.
pub const PICARD_FLOOR: f64 = 1e-12;

/// Picard successive differences `d_n = sup_t ||u_n - u_{n-1}||_{L^2}`.
/// Aux columns: the refined `H̃^0` difference and `r_n = d_n / d_{n-1}`;
/// `r_1` and ratios with `d_n` below [`PICARD_FLOOR`] are NaN. Divergence
/// yields an empty result with a note.
pub fn picard_report(phi: &PhysicalField, params: &PicardParams) -> Result<SweepResult> {
    let iterates = match picard_solve(phi, params) {
        Ok(it) => it,
        Err(Error::Divergence(msg)) => {
            let mut out = SweepResult::new("picard_report", &["refined_difference", "ratio"], Vec::new())?;
            out.notes.push(format!("diverged: {msg}"));
            return Ok(out);
        }
        Err(e) => return Err(e),
    };
    let diffs = iterates
        .par_windows(2)
        .map(|w| Ok((w[1].sup_l2_distance(&w[0])?, sup_refined_distance(&w[1], &w[0], 0.0)?)))
        .collect::<Result<Vec<_>>>()?;
    let floor = PICARD_FLOOR * iterates[0].l2_norms().into_iter().fold(0.0, f64::max);
    let records = diffs
        .iter()
        .enumerate()
        .map(|(i, &(d, r))| {
            let ratio = if i == 0 || d <= floor { f64::NAN } else { d / diffs[i - 1].0 };
            SweepRecord { param: (i + 1) as f64, measurement: d, aux: vec![r, ratio] }
        })
        .collect();
    SweepResult::new("picard_report", &["refined_difference", "ratio"], records)
}

/// Default Picard parameters on a grid of `snapshots` intervals.
pub fn picard_params(epsilon: f64, horizon: f64, snapshots: usize, iterations: usize) -> PicardParams {
    PicardParams { epsilon, horizon, snapshots, iterations, rule: DuhamelRule::Exponential }
}

/// `||u(t_k)||^2` per snapshot with the balance residual
/// `d/dt ||u||^2 + 2 eps ||u_x||^2`, the derivative taken by the fourth-order
/// five-point stencil (one-sided near the ends). Aux columns: residual and
/// `||u_x||^2`.
pub fn energy_report(traj: &Trajectory) -> Result<SweepResult> {
    let m = traj.times.len();
    if m < 5 {
        return Err(Error::Config("energy report needs at least 5 snapshots".into()));
    }
    let h = traj.times[1] - traj.times[0];
    let e: Vec<f64> = traj.l2_norms().iter().map(|n| n * n).collect();
    let ex: Vec<f64> = traj
        .snapshots
        .par_iter()
        .map(|s| derivative(&s.to_spectral(), 1).l2_x().powi(2))
        .collect();
    let records = (0..m)
        .map(|k| {
            let d = match k {
                0 => (-25.0 * e[0] + 48.0 * e[1] - 36.0 * e[2] + 16.0 * e[3] - 3.0 * e[4]) / 12.0,
                1 => (-3.0 * e[0] - 10.0 * e[1] + 18.0 * e[2] - 6.0 * e[3] + e[4]) / 12.0,
                k if k == m - 2 => (3.0 * e[m - 1] + 10.0 * e[m - 2] - 18.0 * e[m - 3] + 6.0 * e[m - 4] - e[m - 5]) / 12.0,
                k if k == m - 1 => {
                    (25.0 * e[m - 1] - 48.0 * e[m - 2] + 36.0 * e[m - 3] - 16.0 * e[m - 4] + 3.0 * e[m - 5]) / 12.0
                }
                k => (e[k - 2] - 8.0 * e[k - 1] + 8.0 * e[k + 1] - e[k + 2]) / 12.0,
            } / h;
            SweepRecord { param: traj.times[k], measurement: e[k], aux: vec![d + 2.0 * traj.epsilon * ex[k], ex[k]] }
        })
        .collect();
    SweepResult::new("energy_report", &["residual", "gradient_sq"], records)
}

/// `max_k | ||u(t_k)||^2 / ||u(0)||^2 - 1 |`.
pub fn max_relative_drift(report: &SweepResult) -> f64 {
    let e = report.measurements();
    match e.first() {
        Some(&e0) if e0 > 0.0 => e.iter().map(|v| (v / e0 - 1.0).abs()).fold(0.0, f64::max),
        _ => 0.0,
    }
}

/// Temporal self-convergence: for `T / n` with each `n` in `divisions`,
/// the `L^2` distance between the final states at `T / n` and `T / (2n)`.
/// Aux columns: `n` and the maximal energy-balance residual of the run
/// stored at every step.
pub fn order_study(phi: &PhysicalField, epsilon: f64, horizon: f64, divisions: &[usize]) -> Result<SweepResult> {
    if divisions.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config("step counts must increase".into()));
    }
    let run = |n: usize| integrate(phi, &SolveParams::new(epsilon, horizon, horizon / n as f64, n));
    let records = divisions
        .par_iter()
        .map(|&n| {
            let (a, b) = rayon::join(|| run(n), || run(2 * n));
            let (a, b) = (a?, b?);
            let d = l2_distance(a.final_state(), b.final_state())?;
            let residual = energy_report(&a)?.aux("residual").unwrap_or_default().into_iter().map(f64::abs).fold(0.0, f64::max);
            Ok(SweepRecord { param: horizon / n as f64, measurement: d, aux: vec![n as f64, residual] })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult::new("order_study", &["steps", "max_residual"], records)?.with_fit())
}

fn l2_distance(a: &PhysicalField, b: &PhysicalField) -> Result<f64> {
    a.grid().check_same(b.grid())?;
    let sq: f64 = a.values().iter().zip(b.values()).map(|(x, y)| (x - y).powi(2)).sum();
    Ok((a.grid().dx() * sq).sqrt())
}
