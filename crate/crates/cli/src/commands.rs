//! Subcommand bodies. Each returns the files to write plus threshold checks;
//! nothing touches the disk until every computation has finished.

use std::fmt::Write as _;
use std::io::BufReader;

use bob_core::data::{forcing_family, gaussian, gaussian_family, random_band_limited, random_forcing, random_gaussian, scale_to_refined_norm};
use bob_core::estimates::{
    bilinear_dyadic_study, dissipative_envelope, free_estimate_study, full_bilinear_study, inhomogeneous_estimate_study,
    multiplier_kernel_study, BilinearConfig, KernelOptions, LinearStudyConfig, RatioStudy,
};
use bob_core::evolution::{solution_map, PicardParams, SolveParams, Trajectory};
use bob_core::experiments::{energy_report, inviscid_sweep, max_relative_drift, picard_report, TimeConfig};
use bob_core::grid::{Grid, PhysicalField};
use bob_core::norms::{refined_sobolev_norm, sobolev_norm, BourgainOptions};
use bob_core::spacetime::SpaceTimeGrid;
use bob_core::{Error, Result};

use crate::config::{DataKind, RunConfig};

/// Envelope constants `C` and `c` of the dissipative kernel check.
const ENVELOPE_CONSTANT: f64 = 2.0;
const ENVELOPE_RATE: f64 = 0.125;

#[derive(Debug, Default)]
pub struct Outcome {
    pub files: Vec<(String, Vec<u8>)>,
    /// `key = value` result lines for the summary.
    pub results: Vec<(String, String)>,
    /// Failed threshold checks.
    pub failures: Vec<String>,
    /// Set when the computation diverged but still produced a report.
    pub diverged: Option<String>,
}

impl Outcome {
    fn file(&mut self, name: &str, write: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<()> {
        let mut buf = Vec::new();
        write(&mut buf)?;
        self.files.push((name.into(), buf));
        Ok(())
    }

    fn result(&mut self, key: &str, value: impl ToString) {
        self.results.push((key.into(), value.to_string()));
    }

    fn check(&mut self, ok: bool, msg: String) {
        if !ok {
            self.failures.push(msg);
        }
    }
}

fn space_grid(cfg: &RunConfig) -> Result<Grid> {
    Grid::new(cfg.half_length, cfg.points)
}

pub fn initial_data(cfg: &RunConfig, grid: Grid) -> Result<PhysicalField> {
    match cfg.data {
        DataKind::Default => scale_to_refined_norm(&gaussian(grid, 1.0, cfg.width)?, cfg.delta / 2.0),
        DataKind::Gaussian => gaussian(grid, cfg.amplitude, cfg.width),
        DataKind::Random => random_gaussian(grid, cfg.seed),
        DataKind::BandLimited => scale_to_refined_norm(&random_band_limited(grid, cfg.xi_max, cfg.seed)?, cfg.delta / 2.0),
        DataKind::Zero => Ok(PhysicalField::zeros(grid)),
    }
}

fn time_config(cfg: &RunConfig) -> TimeConfig {
    TimeConfig { horizon: cfg.horizon, dt: cfg.dt, snapshots: cfg.snapshots }
}

fn norms_csv(traj: &Trajectory, sigma: f64, out: &mut Vec<u8>) -> Result<()> {
    use std::io::Write;
    let rows = traj
        .snapshots
        .iter()
        .map(|s| {
            let hat = s.to_spectral();
            Ok((s.l2_norm(), sobolev_norm(&hat, sigma), refined_sobolev_norm(&hat, sigma)?.total))
        })
        .collect::<Result<Vec<_>>>()?;
    writeln!(out, "# schema=v1")?;
    writeln!(out, "# sigma={sigma}")?;
    writeln!(out, "t,l2,sobolev,refined")?;
    for (t, (l2, h, r)) in traj.times.iter().zip(rows) {
        writeln!(out, "{t},{l2},{h},{r}")?;
    }
    Ok(())
}

pub fn solve(cfg: &RunConfig) -> Result<Outcome> {
    let grid = space_grid(cfg)?;
    let phi = initial_data(cfg, grid)?;
    let params = SolveParams::new(cfg.epsilon, cfg.horizon, cfg.dt, cfg.snapshots);
    params.steps()?;
    let run = solution_map(&phi, &params)?;
    let mut out = Outcome::default();
    out.file("trajectory.csv", |w| run.write_csv(w))?;
    out.file("norms.csv", |w| norms_csv(&run, cfg.sigma, w))?;
    if run.times.len() >= 5 {
        let energy = energy_report(&run)?;
        out.result("max_relative_drift", max_relative_drift(&energy));
        let residual = energy.aux("residual").unwrap_or_default().into_iter().map(f64::abs).fold(0.0, f64::max);
        out.result("max_energy_residual", residual);
        out.file("energy.csv", |w| energy.write_csv(w))?;
    }
    out.result("final_l2", run.final_state().l2_norm());
    Ok(out)
}

pub fn norms(cfg: &RunConfig) -> Result<Outcome> {
    let mut out = Outcome::default();
    let traj = if cfg.input.is_empty() {
        let phi = initial_data(cfg, space_grid(cfg)?)?;
        let b = refined_sobolev_norm(&phi.to_spectral(), cfg.sigma)?;
        out.file("breakdown.csv", |w| b.write_csv(w))?;
        Trajectory {
            grid: *phi.grid(),
            epsilon: cfg.epsilon,
            times: vec![0.0],
            snapshots: vec![phi],
            meta: bob_core::evolution::SolverMeta { method: "data".into(), dt: 0.0, dealiased: false, nonlinear: false },
        }
    } else {
        let f = std::fs::File::open(&cfg.input).map_err(|e| Error::Config(format!("cannot open input {}: {e}", cfg.input)))?;
        Trajectory::read_csv(BufReader::new(f))?
    };
    out.file("norms.csv", |w| norms_csv(&traj, cfg.sigma, w))?;
    out.result("snapshots", traj.times.len());
    Ok(out)
}

pub fn sweep_epsilon(cfg: &RunConfig) -> Result<Outcome> {
    let grid = space_grid(cfg)?;
    let phi = initial_data(cfg, grid)?;
    let time = time_config(cfg);
    time.params(0.0).steps()?;
    let sweep = inviscid_sweep(&phi, cfg.sigma, &cfg.epsilons, time)?;
    let mut out = Outcome::default();
    out.file("sweep.csv", |w| sweep.write_csv(w))?;
    match sweep.fit {
        Some(f) => {
            out.result("slope", f.slope);
            out.result("r2", f.r2);
            out.check(
                (f.slope - 1.0).abs() <= cfg.slope_tolerance && f.r2 >= cfg.min_r2,
                format!("inviscid rate slope {} (r2 {}) outside 1 +- {}", f.slope, f.r2, cfg.slope_tolerance),
            );
        }
        None => out.result("slope", "none"),
    }
    Ok(out)
}

pub fn picard(cfg: &RunConfig) -> Result<Outcome> {
    let grid = space_grid(cfg)?;
    let phi = initial_data(cfg, grid)?;
    let params = PicardParams {
        epsilon: cfg.epsilon,
        horizon: cfg.horizon,
        snapshots: cfg.snapshots,
        iterations: cfg.iterations,
        rule: cfg.picard_rule,
    };
    let report = picard_report(&phi, &params)?;
    let mut out = Outcome::default();
    out.file("picard.csv", |w| report.write_csv(w))?;
    if report.records.is_empty() {
        out.diverged = report.notes.first().cloned();
        return Ok(out);
    }
    let worst = report.aux("ratio").unwrap_or_default().into_iter().filter(|r| r.is_finite()).fold(0.0, f64::max);
    out.result("max_ratio", worst);
    out.check(worst <= cfg.max_contraction, format!("Picard ratio {worst} exceeds {}", cfg.max_contraction));
    Ok(out)
}

fn linear_config(cfg: &RunConfig) -> Result<LinearStudyConfig> {
    let space = Grid::new(cfg.st_half_length, cfg.st_points)?;
    Ok(LinearStudyConfig {
        grid: SpaceTimeGrid::new(space, cfg.st_t0, cfg.st_window, cfg.st_times)?,
        epsilons: cfg.epsilons.clone(),
        sigmas: cfg.sigmas.clone(),
        opts: BourgainOptions { k_y: cfg.k_y },
    })
}

fn emit_study(out: &mut Outcome, name: &str, study: &RatioStudy) -> Result<()> {
    out.file(&format!("{name}.csv"), |w| study.write_csv(w))?;
    out.file(&format!("{name}_summary.json"), |w| study.write_summary(w))
}

fn check_uniformity(out: &mut Outcome, cfg: &RunConfig, study: &RatioStudy) {
    for &s in &study.sigmas {
        let Some(sum) = study.summary(s) else { continue };
        let id = &study.estimate_id;
        out.result(&format!("{id};sigma={s};spread"), sum.spread);
        out.check(sum.spread < cfg.max_spread, format!("{id} sigma={s}: spread {} >= {}", sum.spread, cfg.max_spread));
        if let Some(slope) = sum.slope {
            out.result(&format!("{id};sigma={s};slope"), slope);
            out.check(slope.abs() < cfg.max_slope, format!("{id} sigma={s}: |slope| {} >= {}", slope.abs(), cfg.max_slope));
        }
    }
}

pub fn verify_linear(cfg: &RunConfig) -> Result<Outcome> {
    let lin = linear_config(cfg)?;
    let mut out = Outcome::default();
    for name in &cfg.linear_studies {
        match name.as_str() {
            "free" => {
                let data = gaussian_family(*lin.grid.space(), cfg.samples, cfg.seed)?;
                let study = free_estimate_study(&data, &lin)?;
                emit_study(&mut out, "free", &study)?;
                check_uniformity(&mut out, cfg, &study);
            }
            "inhomogeneous" => {
                let forcing = forcing_family(lin.grid, cfg.samples, cfg.seed)?;
                let study = inhomogeneous_estimate_study(&forcing, &lin)?;
                emit_study(&mut out, "inhomogeneous", &study)?;
                check_uniformity(&mut out, cfg, &study);
            }
            "kernel" => {
                let studies = multiplier_kernel_study(&cfg.kernel_ks, &[], &cfg.epsilons, &KernelOptions::default())?;
                for study in &studies {
                    let k = study.samples.first().map(|s| s.param).unwrap_or_default();
                    emit_study(&mut out, &format!("kernel_k{k}"), study)?;
                    let sum = study.summary(0.0);
                    if let Some(sum) = sum {
                        out.result(&format!("{};spread", study.estimate_id), sum.spread);
                        out.check(sum.spread < cfg.max_spread, format!("{}: spread {} >= {}", study.estimate_id, sum.spread, cfg.max_spread));
                    }
                }
            }
            "envelope" => {
                let cells: Vec<(i32, f64)> = cfg
                    .kernel_ks
                    .iter()
                    .flat_map(|&k| cfg.epsilons.iter().filter(|&&e| e > 0.0).map(move |&e| (k, e)))
                    .collect();
                let checks = cells
                    .iter()
                    .map(|&(k, e)| dissipative_envelope(k, e, ENVELOPE_CONSTANT, ENVELOPE_RATE))
                    .collect::<Result<Vec<_>>>()?;
                let mut text = String::from("# schema=v1\nk,epsilon,constant,rate,worst,samples\n");
                for c in &checks {
                    let _ = writeln!(text, "{},{},{},{},{},{}", c.k, c.epsilon, c.constant, c.rate, c.worst, c.samples);
                }
                out.files.push(("envelope.csv".into(), text.into_bytes()));
                let worst = checks.iter().map(|c| c.worst).fold(0.0, f64::max);
                out.result("envelope_worst", worst);
                out.check(worst <= 1.0, format!("kernel exceeds its envelope by factor {worst}"));
            }
            other => return Err(Error::Config(format!("unknown linear study '{other}'"))),
        }
    }
    Ok(out)
}

fn check_fingerprint(out: &mut Outcome, cfg: &RunConfig, study: &RatioStudy, sigma: f64) {
    let Some(f) = study.fingerprint(sigma) else { return };
    let id = format!("{};sigma={sigma}", study.estimate_id);
    out.result(&format!("{id};max_over_median"), f.max_over_median);
    out.check(
        f.max_over_median <= cfg.outlier_factor,
        format!("{id}: max/median {} > {}", f.max_over_median, cfg.outlier_factor),
    );
    if let Some(rho) = f.rank_correlation {
        out.result(&format!("{id};rank_correlation"), rho);
        out.check(rho.abs() < cfg.max_rank_correlation, format!("{id}: |rho| {} >= {}", rho.abs(), cfg.max_rank_correlation));
    }
}

pub fn verify_bilinear(cfg: &RunConfig) -> Result<Outcome> {
    let space = Grid::new(cfg.bl_half_length, cfg.bl_points)?;
    let grid = SpaceTimeGrid::new(space, cfg.bl_t0, cfg.bl_window, cfg.bl_times)?;
    let opts = BourgainOptions { k_y: cfg.k_y };
    let bc = BilinearConfig { grid, samples: cfg.bilinear_samples, max_j: cfg.max_j, seed: cfg.seed, opts };
    let mut out = Outcome::default();
    let mut all = String::new();
    for (i, r) in cfg.regimes.iter().enumerate() {
        let study = bilinear_dyadic_study(*r, &bc)?;
        let mut buf = Vec::new();
        study.write_csv(&mut buf)?;
        let text = String::from_utf8_lossy(&buf);
        // one file with a single header
        for line in text.lines() {
            if i > 0 && (line.starts_with("# schema") || line.starts_with("estimate_id,")) {
                continue;
            }
            let _ = writeln!(all, "{line}");
        }
        check_fingerprint(&mut out, cfg, &study, 0.0);
    }
    out.files.push(("bilinear_dyadic.csv".into(), all.into_bytes()));
    if cfg.pairs > 0 {
        let pairs = (0..cfg.pairs as u64)
            .map(|i| {
                let s = cfg.seed.wrapping_add(2 * i);
                Ok((s, random_forcing(grid, s)?, random_forcing(grid, s + 1)?))
            })
            .collect::<Result<Vec<_>>>()?;
        let study = full_bilinear_study(&pairs, &cfg.sigmas, &opts)?;
        emit_study(&mut out, "bilinear_full", &study)?;
        for &s in &cfg.sigmas {
            check_fingerprint(&mut out, cfg, &study, s);
        }
    }
    Ok(out)
}
