use bob_core::data::{forcing_family, gaussian_family, random_forcing};
use bob_core::dyadic::eta0;
use bob_core::estimates::*;
use bob_core::evolution::{linear_symbol, omega};
use bob_core::grid::{Grid, PhysicalField};
use bob_core::norms::{fsigma_norm, BourgainOptions};
use bob_core::spacetime::{SpaceTimeField, SpaceTimeGrid, SpaceTimeSpectral};
use num_complex::Complex64;
use proptest::prelude::*;

fn small_config(eps: Vec<f64>) -> LinearStudyConfig {
    let space = Grid::new(16.0, 64).unwrap();
    LinearStudyConfig {
        grid: SpaceTimeGrid::new(space, -4.0, 8.0, 512).unwrap(),
        epsilons: eps,
        sigmas: vec![0.0, 1.0],
        opts: BourgainOptions::default(),
    }
}

#[test]
fn epsilon_lists_are_validated() {
    let mut cfg = small_config(vec![0.1, 1.0]);
    let data = gaussian_family(*cfg.grid.space(), 1, 0).unwrap();
    assert!(free_estimate_study(&data, &cfg).is_err());
    cfg.epsilons = vec![2.0];
    assert!(free_estimate_study(&data, &cfg).is_err());
    cfg.epsilons = vec![];
    assert!(free_estimate_study(&data, &cfg).is_err());
}

#[test]
fn zero_data_is_skipped() {
    let cfg = small_config(vec![1.0, 0.01]);
    let space = *cfg.grid.space();
    let mut data = gaussian_family(space, 2, 5).unwrap();
    data.push((99, PhysicalField::zeros(space)));
    let s = free_estimate_study(&data, &cfg).unwrap();
    assert_eq!(s.samples.len(), 2 * 2 * 2);
    assert_eq!(s.skipped.len(), 1);
    assert!(s.samples.iter().all(|r| r.ratio.is_finite() && r.ratio > 0.0));
    let mut forcings = forcing_family(cfg.grid, 1, 3).unwrap();
    forcings.push((7, SpaceTimeField::zeros(cfg.grid)));
    let s = inhomogeneous_estimate_study(&forcings, &cfg).unwrap();
    assert_eq!(s.samples.len(), 4);
    assert_eq!(s.skipped.len(), 1);
}

#[test]
fn free_field_matches_direct_construction() {
    // a single real mode evolves as cos(xi0 x + omega(xi0) t) e^{-|t| eps xi0^2}
    let cfg = small_config(vec![0.0]);
    let space = *cfg.grid.space();
    let m = 8;
    let xi0 = m as f64 * space.dxi();
    let eps = 0.3;
    let phi = PhysicalField::from_fn(space, |x| (xi0 * x).cos()).unwrap();
    let u = windowed_free_solution(&phi.to_spectral(), cfg.grid, eps).unwrap();
    let direct = SpaceTimeField::from_fn(cfg.grid, |x, t| {
        eta0(t) * (xi0 * x + omega(xi0) * t).cos() * (-t.abs() * eps * xi0 * xi0).exp()
    })
    .unwrap();
    let diff = u.values().iter().zip(direct.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(diff < 1e-12, "{diff}");
    // the high mode gives a finite ratio at eps = 0
    let s = free_estimate_study(&[(0, phi)], &cfg).unwrap();
    assert!(s.samples.iter().all(|r| r.ratio.is_finite()));
}

#[test]
fn duhamel_matches_fine_quadrature() {
    let space = Grid::new(16.0, 32).unwrap();
    let grid = SpaceTimeGrid::new(space, -4.0, 8.0, 1024).unwrap();
    // even mode: the grid starts at x = -L, so odd slots pick up a sign
    let m = 4;
    let xi0 = m as f64 * space.dxi();
    let a = 2.5;
    let g = |t: f64| eta0(t / 2.0) * (a * t).cos();
    let u = SpaceTimeField::from_fn(grid, |x, t| g(t) * (xi0 * x).cos()).unwrap();
    for eps in [1.0, 1e-3] {
        let v = windowed_duhamel(&u, eps).unwrap();
        let spec_rows = |n: usize| PhysicalField::new(space, v.row(n).to_vec()).unwrap().to_spectral();
        for &t in &[-1.2, -0.5, 0.4, 1.1] {
            let n = ((t - grid.t0()) / grid.dt()).round() as usize;
            let t = grid.t(n);
            // oracle: midpoint rule with 20000 panels on the mode-m coefficient
            let lam = |s: f64| if t >= 0.0 { linear_symbol(xi0, eps) * s } else { linear_symbol(-xi0, eps) * s };
            let panels = 20000;
            let h = t.abs() / panels as f64;
            let mut acc = Complex64::default();
            for i in 0..panels {
                let r = (i as f64 + 0.5) * h;
                let s = if t >= 0.0 { r } else { -r };
                acc += lam(t.abs() - r).exp() * g(s) * h;
            }
            let expected = eta0(t) * if t >= 0.0 { acc } else { -acc } * 0.5;
            // coefficient of cos is half the DFT amplitude per slot
            let got = spec_rows(n).coeffs()[m] / space.n_points() as f64;
            assert!((got - expected).norm() < 1e-6, "eps={eps} t={t}: {got} vs {expected}");
        }
    }
}

#[test]
fn kernel_at_zero_epsilon_is_finite_and_converged() {
    let o = KernelOptions::default();
    let v = multiplier_kernel(4, 0.0, &o).unwrap();
    assert!(v.value.is_finite() && v.value > 0.0);
    assert!(multiplier_kernel(0, 0.1, &o).is_err());
    assert!(multiplier_kernel(4, 1.5, &o).is_err());
}

#[test]
fn envelope_matches_closed_form_peak() {
    // |F^{-1}(-i eps tau/(tau + (1 - i eps) xi^2))| = eps |tau|^{1/2} / (2 |1 - i eps|^{1/2}) e^{-Re(a)|x|};
    // the worst envelope ratio sits at x = 0, |tau| = 2^{2k+2}
    for (k, eps) in [(4, 1.0), (6, 0.1), (5, 0.01)] {
        let c = dissipative_envelope(k, eps, 2.0, 0.125).unwrap();
        let expected = 0.5 / (1.0 + eps * eps).powf(0.25);
        assert!((c.worst - expected).abs() < 0.02 * expected, "k={k} eps={eps}: {} vs {expected}", c.worst);
    }
    assert!(dissipative_envelope(4, 0.0, 2.0, 0.125).is_err());
}

fn brute_convolution(f: &SpaceTimeSpectral, g: &SpaceTimeSpectral) -> SpaceTimeSpectral {
    // (f * g)(xi, tau) = sum f(xi - xi', tau - tau') g(xi', tau') dxi' dtau', in raw coefficients
    let grid = *f.grid();
    let (rows, cols) = (grid.n_times(), grid.n_points());
    let meas = grid.space().dxi() * grid.dtau() * grid.space().dx() * grid.dt();
    let mut out = vec![Complex64::default(); rows * cols];
    for n in 0..rows {
        for m in 0..cols {
            let mut acc = Complex64::default();
            for n2 in 0..rows {
                for m2 in 0..cols {
                    let a = f.at((n + rows - n2) % rows, (m + cols - m2) % cols);
                    let b = g.at(n2, m2);
                    acc += a * b;
                }
            }
            out[n * cols + m] = acc * meas;
        }
    }
    SpaceTimeSpectral::new(grid, out).unwrap()
}

#[test]
fn convolution_agrees_with_brute_force() {
    let grid = SpaceTimeGrid::new(Grid::new(8.0, 64).unwrap(), -4.0, 8.0, 128).unwrap();
    let f = dyadic_block(grid, 1, 0, 1);
    let g = dyadic_block(grid, 1, 0, 2);
    let fast = convolve(&f, &g).unwrap();
    let slow = brute_convolution(&f, &g);
    let err = fast.sub(&slow).unwrap().max_abs() / slow.max_abs();
    assert!(err < 1e-12, "{err}");
    // both sides of the dyadic ratio from the brute-force product
    let opts = BourgainOptions::default();
    let (lhs, rhs) = bilinear_sides(&f, 1, &g, 1, 1, &opts).unwrap();
    let out = slow.map(|xi, tau, v| {
        let w = bob_core::dyadic::eta(1, xi);
        v * w / Complex64::new(tau - omega(xi), 1.0)
    });
    let lhs_slow = 2.0 * bob_core::norms::zk_norm(&out, 1, &opts).unwrap().total;
    let rhs_slow = bob_core::norms::zk_norm(&f, 1, &opts).unwrap().total * bob_core::norms::zk_norm(&g, 1, &opts).unwrap().total;
    assert!((lhs - lhs_slow).abs() < 1e-10 * lhs_slow);
    assert!((rhs - rhs_slow).abs() < 1e-12 * rhs_slow);
}

#[test]
fn wrapping_convolution_is_refused() {
    let grid = SpaceTimeGrid::new(Grid::new(8.0, 64).unwrap(), -4.0, 8.0, 64).unwrap();
    let f = dyadic_block(grid, 3, 0, 1);
    assert!(convolve(&f, &f).is_err());
    let cfg = BilinearConfig { grid, samples: 2, max_j: 0, seed: 0, opts: BourgainOptions::default() };
    assert!(bilinear_dyadic_study(Regime { k: 4, k1: 3, k2: 3 }, &cfg).is_err());
}

#[test]
fn full_bilinear_excludes_zero_factor() {
    let grid = SpaceTimeGrid::new(Grid::new(8.0, 32).unwrap(), -4.0, 8.0, 128).unwrap();
    let u = random_forcing(grid, 1).unwrap();
    let pairs = vec![(0, u.clone(), SpaceTimeField::zeros(grid)), (1, u.clone(), random_forcing(grid, 2).unwrap())];
    let s = full_bilinear_study(&pairs, &[0.0, 1.0], &BourgainOptions::default()).unwrap();
    assert_eq!(s.samples.len(), 2);
    assert_eq!(s.skipped.len(), 1);
    // u = v single bump: finite ratio
    let s = full_bilinear_study(&[(0, u.clone(), u)], &[0.0], &BourgainOptions::default()).unwrap();
    assert!(s.samples[0].ratio.is_finite());
}

#[test]
fn deterministic_replay() {
    let cfg = small_config(vec![1.0, 0.01]);
    let data = gaussian_family(*cfg.grid.space(), 2, 11).unwrap();
    let run = || {
        let s = free_estimate_study(&data, &cfg).unwrap();
        let mut out = Vec::new();
        s.write_csv(&mut out).unwrap();
        s.write_summary(&mut out).unwrap();
        out
    };
    let a = run();
    assert_eq!(a, run());
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("# schema=v1\n"));
    assert!(text.contains("estimate_id,seed,epsilon,sigma,ratio"));
    let grid = SpaceTimeGrid::new(Grid::new(8.0, 64).unwrap(), -4.0, 8.0, 256).unwrap();
    let bc = BilinearConfig { grid, samples: 3, max_j: 2, seed: 4, opts: BourgainOptions::default() };
    let r = Regime { k: 1, k1: 1, k2: 1 };
    assert_eq!(bilinear_dyadic_study(r, &bc).unwrap(), bilinear_dyadic_study(r, &bc).unwrap());
}

#[test]
fn summary_fingerprints() {
    let s = RatioStudy {
        estimate_id: "t".into(),
        family: "f".into(),
        grid: "g".into(),
        epsilons: vec![1.0, 0.1, 0.01],
        sigmas: vec![0.0],
        samples: [(1.0, 2.0), (0.1, 4.0), (0.01, 8.0), (0.01, 1.0)]
            .iter()
            .map(|&(e, r)| RatioSample { seed: 0, epsilon: e, sigma: 0.0, param: 0, lhs: r, rhs: 1.0, ratio: r })
            .collect(),
        skipped: vec![],
    };
    let sum = s.summary(0.0).unwrap();
    assert_eq!(sum.max, 8.0);
    assert_eq!(sum.spread, 4.0);
    assert!((sum.slope.unwrap() + 2f64.ln() / 10f64.ln()).abs() < 1e-12);
    assert_eq!(sum.median, 3.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(4))]
    #[test]
    fn ratios_are_scale_invariant(c in 0.01f64..100.0, seed in 0u64..50) {
        let cfg = small_config(vec![0.5]);
        let space = *cfg.grid.space();
        let data = gaussian_family(space, 1, seed).unwrap();
        let scaled: Vec<_> = data
            .iter()
            .map(|(s, p)| (*s, PhysicalField::new(space, p.values().iter().map(|v| c * v).collect()).unwrap()))
            .collect();
        let a = free_estimate_study(&data, &cfg).unwrap();
        let b = free_estimate_study(&scaled, &cfg).unwrap();
        for (x, y) in a.samples.iter().zip(&b.samples) {
            prop_assert!((x.ratio - y.ratio).abs() <= 1e-9 * x.ratio);
        }
        let grid = SpaceTimeGrid::new(Grid::new(8.0, 64).unwrap(), -4.0, 8.0, 256).unwrap();
        let f = dyadic_block(grid, 1, 1, seed);
        let g = dyadic_block(grid, 1, 0, seed + 1);
        let opts = BourgainOptions::default();
        let (l1, r1) = bilinear_sides(&f, 1, &g, 1, 1, &opts).unwrap();
        let fc = f.scale(Complex64::new(c, 0.0));
        let (l2, r2) = bilinear_sides(&fc, 1, &g, 1, 1, &opts).unwrap();
        prop_assert!((l1 / r1 - l2 / r2).abs() <= 1e-9 * l1 / r1);
    }
}

#[test]
fn free_window_is_checked() {
    let space = Grid::new(16.0, 64).unwrap();
    let cfg = LinearStudyConfig {
        grid: SpaceTimeGrid::new(space, -1.0, 2.0, 256).unwrap(),
        epsilons: vec![1.0],
        sigmas: vec![0.0],
        opts: BourgainOptions::default(),
    };
    let data = gaussian_family(space, 1, 0).unwrap();
    assert!(free_estimate_study(&data, &cfg).is_err());
    let u = fsigma_norm(&SpaceTimeField::zeros(cfg.grid), 0.0, &cfg.opts).unwrap();
    assert_eq!(u.total, 0.0);
}

#[test]
fn fingerprint_of_a_synthetic_study() {
    let sample = |param: i32, ratio: f64, sigma: f64| RatioSample { seed: 0, epsilon: 0.1, sigma, param, lhs: ratio, rhs: 1.0, ratio };
    let study = RatioStudy {
        estimate_id: "synthetic".into(),
        family: "none".into(),
        grid: "none".into(),
        epsilons: vec![0.1],
        sigmas: vec![0.0, 1.0],
        samples: vec![sample(1, 4.0, 0.0), sample(2, 2.0, 0.0), sample(3, 1.0, 0.0), sample(1, 1.0, 1.0)],
        skipped: vec![],
    };
    let f = study.fingerprint(0.0).unwrap();
    assert_eq!(f.count, 3);
    assert_eq!(f.median, 2.0);
    assert_eq!(f.max_over_median, 2.0);
    assert!((f.rank_correlation.unwrap() + 1.0).abs() < 1e-12);
    assert_eq!(study.fingerprint(1.0).unwrap().count, 1);
    assert!(study.fingerprint(2.0).is_none());
}
