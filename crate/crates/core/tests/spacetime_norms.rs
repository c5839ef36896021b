use bob_core::dyadic::{chi, eta, eta0};
use bob_core::evolution::omega;
use bob_core::grid::Grid;
use bob_core::norms::{
    beta, fsigma_norm, nsigma_norm_spectral, xk_norm, y0_norm, yk_norm, zbar0_norm, zk_norm, zk_parts, BlockId,
    BourgainOptions, SumSplit, Witness,
};
use bob_core::spacetime::{SpaceTimeField, SpaceTimeGrid, SpaceTimeSpectral};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn grid() -> SpaceTimeGrid {
    SpaceTimeGrid::new(Grid::new(16.0, 64).unwrap(), -8.0, 16.0, 1024).unwrap()
}

fn one() -> Complex64 {
    Complex64::new(1.0, 0.0)
}

/// Data in frequency band `k` whose modulation lies in `[lo, hi]` (both signs).
fn block_data(g: SpaceTimeGrid, k: i32, lo: f64, hi: f64, seed: u64) -> SpaceTimeSpectral {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut f = SpaceTimeSpectral::zeros(g);
    let vals: Vec<Complex64> = (0..g.len()).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
    let mut idx = 0;
    f.map_in_place(|xi, tau, _| {
        let v = vals[idx];
        idx += 1;
        let m = if k >= 1 { tau - omega(xi) } else { tau };
        if eta(k, xi) > 0.0 && m.abs() >= lo && m.abs() <= hi {
            v * eta(k, xi)
        } else {
            Complex64::default()
        }
    });
    f
}

fn normalize(f: &SpaceTimeSpectral) -> SpaceTimeSpectral {
    f.scale(one() / f.l2())
}

#[test]
fn zero_inputs() {
    let g = grid();
    let z = SpaceTimeSpectral::zeros(g);
    let o = BourgainOptions::default();
    assert_eq!(xk_norm(&z, 2).unwrap().total, 0.0);
    assert_eq!(xk_norm(&z, 0).unwrap().total, 0.0);
    assert_eq!(yk_norm(&z, 2).unwrap(), 0.0);
    assert_eq!(y0_norm(&z).unwrap().total, 0.0);
    assert_eq!(zk_norm(&z, 0, &o).unwrap().total, 0.0);
    assert_eq!(zbar0_norm(&z).unwrap(), 0.0);
    assert_eq!(fsigma_norm(&SpaceTimeField::zeros(g), 1.0, &o).unwrap().total, 0.0);
}

#[test]
fn beta_identities() {
    for k in 1..20 {
        assert_eq!(beta(k, 2 * k), 2.0);
        assert!(beta(k, 0) >= 1.0);
    }
    assert!((beta(40, 0) - 1.0).abs() < 1e-12);
}

#[test]
fn single_modulation_block() {
    let g = grid();
    for j in 1..=5 {
        let core = normalize(&block_data(g, 2, 0.8 * 2f64.powi(j), 1.25 * 2f64.powi(j), j as u64));
        let x = xk_norm(&core, 2).unwrap().total;
        let w = 2f64.powf(j as f64 / 2.0) * beta(2, j);
        assert!((x / w - 1.0).abs() < 1e-12, "j={j}: {x} vs {w}");
        let wide = normalize(&block_data(g, 2, 0.625 * 2f64.powi(j), 1.6 * 2f64.powi(j), 10 + j as u64));
        let r = xk_norm(&wide, 2).unwrap().total / w;
        assert!((0.5..=2.0).contains(&r), "j={j}: ratio {r}");
    }
}

#[test]
fn band_support_is_enforced() {
    let g = grid();
    let f = block_data(g, 1, 0.0, 1e9, 1);
    assert!(xk_norm(&f, 2).is_err());
    assert!(xk_norm(&f, 1).is_ok());
    let wide = block_data(g, 2, 0.0, 1e9, 1);
    assert!(yk_norm(&wide, 2).is_err());
}

#[test]
fn y0_separable() {
    let g = grid();
    let sp = *g.space();
    let a = |xi: f64| eta0(xi) * Complex64::new(1.0 + 0.3 * xi, -0.2 * xi * xi);
    let b = |tau: f64| Complex64::new((-tau * tau / 8.0).exp(), 0.1 * tau * (-tau * tau / 4.0).exp());
    let f = SpaceTimeSpectral::from_fn(g, |xi, tau| a(xi) * b(tau));
    let y = y0_norm(&f).unwrap();
    // ||F^{-1} a||_{L^1_x}: raw inverse of the xi factor
    let mut ax: Vec<Complex64> = sp.wavenumbers().iter().map(|&xi| a(xi)).collect();
    bob_core::fft::inverse(&mut ax);
    let l1 = sp.dx() * ax.iter().map(|v| v.norm()).sum::<f64>();
    for block in &y.blocks {
        let j = match block.id {
            BlockId::J(j) => j,
            _ => unreachable!(),
        };
        let ladder_low = bob_core::dyadic::HomogeneousLadder::for_spacing(g.dtau(), 0);
        let w = |tau: f64| if j >= 1 { eta(j, tau) } else { ladder_low.weight(j, tau) };
        let mut bt: Vec<Complex64> = (0..g.n_times()).map(|n| b(g.frequency(n)) * w(g.frequency(n))).collect();
        bob_core::fft::inverse(&mut bt);
        let l2 = (g.dt() * bt.iter().map(|v| v.norm_sqr()).sum::<f64>()).sqrt();
        assert!((block.contribution - l1 * l2).abs() < 1e-10 * (l1 * l2), "block {j}");
        let expect_w = if j >= 1 { 2f64.powi(j) } else { 1.0 };
        assert_eq!(block.weight, expect_w);
    }
}

#[test]
fn y0_low_modulation_weight_is_one() {
    let g = grid();
    let f = SpaceTimeSpectral::from_fn(g, |xi, tau| Complex64::new(eta0(xi) * chi(-1, tau), 0.0));
    let y = y0_norm(&f).unwrap();
    assert!(y.blocks.iter().all(|b| matches!(b.id, BlockId::J(j) if j <= 0)));
    assert!(y.blocks.iter().all(|b| b.weight == 1.0));
}

#[test]
fn zbar0_and_x0() {
    let g = grid();
    let f = normalize(&block_data(g, 0, 0.8 * 32.0, 1.25 * 32.0, 5));
    let z = zbar0_norm(&f).unwrap();
    assert!((z - 32.0).abs() < 1e-10);
    for seed in 0..5 {
        let f = block_data(g, 0, 0.0, 1e9, seed);
        let x0 = xk_norm(&f, 0).unwrap().total;
        assert!(zbar0_norm(&f).unwrap() <= 2f64.sqrt() * x0 * (1.0 + 1e-12));
    }
}

#[test]
fn zk_candidates() {
    let g = grid();
    let o = BourgainOptions { k_y: 2 };
    let high = block_data(g, 2, 0.8 * 64.0, 1.25 * 64.0, 3);
    let z = zk_norm(&high, 2, &o).unwrap();
    assert_eq!(z.witness, Some(Witness::Sum(SumSplit::PureX)));
    assert_eq!(z.total, xk_norm(&high, 2).unwrap().total);
    for seed in 0..4 {
        for k in [0, 2] {
            let f = block_data(g, k, 0.0, 1e9, seed);
            let z = zk_norm(&f, k, &o).unwrap();
            assert!(z.total <= xk_norm(&f, k).unwrap().total);
            if let Some(Witness::Sum(split)) = z.witness {
                let (fx, fy) = zk_parts(&f, k, split);
                let x = if fx.max_abs() > 0.0 { xk_norm(&fx, k).unwrap().total } else { 0.0 };
                let y = if k == 0 { y0_norm(&fy).unwrap().total } else { yk_norm(&fy, k).unwrap() };
                assert!((x + y - z.total).abs() < 1e-10 * z.total);
            }
        }
    }
}

#[test]
fn low_modulation_prefers_y() {
    let g = grid();
    let o = BourgainOptions { k_y: 2 };
    // nearly free wave: modulation below 1
    let f = block_data(g, 2, 0.0, 0.5, 8);
    let z = zk_norm(&f, 2, &o).unwrap();
    assert!(z.total <= xk_norm(&f, 2).unwrap().total);
    assert!(z.blocks.iter().any(|b| b.id == BlockId::PureY));
}

#[test]
fn frequency_localized_fsigma() {
    let g = grid();
    let sp = *g.space();
    let m = (4.0 / sp.dxi()).round();
    let xi0 = m * sp.dxi();
    let u = SpaceTimeField::from_fn(g, |x, t| eta0(t) * (xi0 * x).cos()).unwrap();
    let r = fsigma_norm(&u, 0.0, &BourgainOptions::default()).unwrap();
    let k0 = (xi0.log2()).round() as i32;
    for b in &r.blocks {
        if let BlockId::K(k) = b.id {
            if b.contribution <= 1e-10 * r.total {
                continue;
            }
            assert!((k - k0).abs() <= 1, "unexpected block {k}");
        }
    }
    assert!(r.total > 0.0);
}

#[test]
fn nsigma_on_high_modulation_block() {
    let g = grid();
    let o = BourgainOptions::default();
    let j = 6;
    let f = normalize(&block_data(g, 2, 0.8 * 64.0, 1.25 * 64.0, 4));
    let n = nsigma_norm_spectral(&f, 0.0, &o).unwrap().total;
    let weight = 2f64.powf(j as f64 / 2.0) * beta(2, j);
    let r = n / (2f64.powi(-j) * weight);
    assert!((0.5..=2.0).contains(&r), "ratio {r}");
}

#[test]
fn triangle_inequalities() {
    let g = grid();
    let o = BourgainOptions { k_y: 2 };
    for seed in 0..3 {
        for k in [0, 2] {
            let f = block_data(g, k, 0.0, 1e9, seed);
            let h = block_data(g, k, 0.0, 1e9, seed + 100);
            let s = f.add(&h).unwrap();
            let x = |v: &SpaceTimeSpectral| xk_norm(v, k).unwrap().total;
            assert!(x(&s) <= x(&f) + x(&h) + 1e-10);
            // shared candidate family: min over candidates of a sum of norms
            let z = |v: &SpaceTimeSpectral| zk_norm(v, k, &o).unwrap();
            let zs = z(&s).total;
            let zf = z(&f);
            let zh = z(&h);
            let mut best_pair = f64::INFINITY;
            for b in &zf.blocks {
                if let Some(c) = zh.blocks.iter().find(|c| c.id == b.id) {
                    best_pair = best_pair.min(b.contribution + c.contribution);
                }
            }
            assert!(zs <= best_pair * (1.0 + 1e-10), "k={k}: {zs} vs {best_pair}");
            if k == 0 {
                let y = |v: &SpaceTimeSpectral| y0_norm(v).unwrap().total;
                assert!(y(&s) <= y(&f) + y(&h) + 1e-10);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]
    #[test]
    fn homogeneity(c in -50.0f64..50.0, seed in 0u64..100) {
        prop_assume!(c.abs() > 1e-3);
        let g = SpaceTimeGrid::new(Grid::new(16.0, 32).unwrap(), -4.0, 8.0, 128).unwrap();
        let o = BourgainOptions { k_y: 1 };
        for k in [0, 1] {
            let f = block_data(g, k, 0.0, 1e9, seed);
            let cf = f.scale(Complex64::new(c, 0.0));
            let pairs = [
                (xk_norm(&f, k).unwrap().total, xk_norm(&cf, k).unwrap().total),
                (zk_norm(&f, k, &o).unwrap().total, zk_norm(&cf, k, &o).unwrap().total),
            ];
            for (a, b) in pairs {
                prop_assert!((b - c.abs() * a).abs() <= 1e-10 * c.abs() * a);
            }
        }
        let f0 = block_data(g, 0, 0.0, 1e9, seed);
        let a = y0_norm(&f0).unwrap().total;
        let b = y0_norm(&f0.scale(Complex64::new(c, 0.0))).unwrap().total;
        prop_assert!((b - c.abs() * a).abs() <= 1e-10 * c.abs() * a);
        prop_assert!((zbar0_norm(&f0.scale(Complex64::new(c, 0.0))).unwrap() - c.abs() * zbar0_norm(&f0).unwrap()).abs() <= 1e-10 * c.abs() * a);
    }
}
