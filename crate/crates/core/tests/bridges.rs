mod common;

use approx::assert_abs_diff_eq;
use kylelab_core::bridges::*;
use kylelab_core::diagnostics::ks_two_sample;
use kylelab_core::{RngStream, SamplePath, TimeGrid};
use rayon::prelude::*;

fn ensemble(n: u64, f: impl Fn(&RngStream) -> SamplePath + Sync, seed: u64) -> Vec<SamplePath> {
    let root = RngStream::new(seed, 0);
    (0..n).into_par_iter().map(|i| f(&root.child(i))).collect()
}

fn column(paths: &[SamplePath], k: usize) -> Vec<f64> {
    paths.iter().map(|p| p.at(k)).collect()
}

#[test]
fn zero_noise_bridges_are_zero() {
    let grid = TimeGrid::new(50).unwrap();
    let spec = BridgeSpec::new(0.0).unwrap();
    let b = SamplePath::new(grid, vec![0.0; grid.len()]).unwrap();
    assert!(bridge_from_brownian(&spec, &b).values().iter().all(|&x| x == 0.0));
    let x = bridge_sde_from_normals(&spec, grid, &vec![[0.0; 4]; grid.n_steps()]);
    assert!(x.values().iter().all(|&x| x == 0.0));
}

#[test]
fn anticipative_mean_and_covariance() {
    let grid = TimeGrid::new(100).unwrap();
    let spec = BridgeSpec::new(1.0).unwrap();
    let paths = ensemble(100_000, |s| sample_bridge_anticipative(&spec, grid, s), 1);
    let mid = column(&paths, 50);
    let se = (common::variance(&mid) / mid.len() as f64).sqrt();
    assert!((common::mean(&mid) - 0.5).abs() <= 3.0 * se);

    let spec = BridgeSpec::new(0.0).unwrap();
    let paths = ensemble(100_000, |s| sample_bridge_anticipative(&spec, grid, s), 2);
    let (c, se) = common::covariance_with_se(&column(&paths, 25), &column(&paths, 50));
    assert!((c - 0.125).abs() <= 3.0 * se, "cov {c} se {se}");
}

#[test]
fn sde_bridge_pins_and_spreads() {
    let grid = TimeGrid::new(200).unwrap();
    let spec = BridgeSpec::new(0.7).unwrap();
    let paths = ensemble(20_000, |s| sample_bridge_sde(&spec, grid, s), 3);
    assert!(paths.iter().all(|p| p.terminal() == 0.7));
    let mid: Vec<f64> = column(&paths, 100).iter().map(|x| x - 0.35).collect();
    let sq: Vec<f64> = mid.iter().map(|x| x * x).collect();
    let se = (common::variance(&sq) / sq.len() as f64).sqrt();
    assert!((common::mean(&sq) - 0.25).abs() <= 3.0 * se);
}

#[test]
fn sde_covariance_across_grid() {
    let grid = TimeGrid::new(40).unwrap();
    let spec = BridgeSpec::new(0.0).unwrap();
    let paths = ensemble(40_000, |s| sample_bridge_sde(&spec, grid, s), 4);
    for (i, j) in [(4, 10), (10, 20), (20, 30), (8, 36)] {
        let (c, se) = common::covariance_with_se(&column(&paths, i), &column(&paths, j));
        let (s, t) = (grid.t(i), grid.t(j));
        assert!((c - s * (1.0 - t)).abs() <= 3.0 * se, "({s}, {t})");
    }
}

#[test]
fn constructions_agree_in_law() {
    let grid = TimeGrid::new(100).unwrap();
    let spec = BridgeSpec::from_to(0.2, -0.4).unwrap();
    let a = ensemble(10_000, |s| sample_bridge_anticipative(&spec, grid, s), 5);
    let b = ensemble(10_000, |s| sample_bridge_sde(&spec, grid, s), 6);
    for k in [25, 50, 75] {
        assert!(!ks_two_sample(&column(&a, k), &column(&b, k)).unwrap().rejects(0.01));
    }
}

#[test]
fn normalised_gap_stays_bounded_under_refinement() {
    let spec = BridgeSpec::new(1.0).unwrap();
    let avg = |n: usize| {
        let grid = TimeGrid::new(n).unwrap();
        let paths = ensemble(4000, |s| sample_bridge_sde(&spec, grid, s), 7);
        let total: f64 = paths
            .iter()
            .map(|p| (0..n).map(|k| (1.0 - p.at(k)).abs() / (1.0 - grid.t(k))).sum::<f64>() / n as f64)
            .sum();
        total / paths.len() as f64
    };
    let (coarse, fine) = (avg(200), avg(400));
    assert!(coarse.is_finite() && fine.is_finite());
    assert!((fine / coarse - 1.0).abs() < 0.2, "{coarse} vs {fine}");
}

#[test]
fn brownian_h_transform() {
    let ht = HTransformDrift::brownian();
    assert_abs_diff_eq!(h_transform_drift(&ht, 0.5, 0.0, 1.0).unwrap(), 2.0, epsilon = 1e-12);
    assert_eq!(h_transform_drift(&ht, 0.3, 0.4, 0.4).unwrap(), 0.0);
    assert!(h_transform_drift(&ht, 1.0, 0.0, 1.0).is_err());
}

#[test]
fn ou_h_transform_matches_finite_differences() {
    let (kappa, sigma) = (1.0, 1.0);
    let ht = HTransformDrift::ornstein_uhlenbeck(kappa, sigma);
    for &(t, y, x) in &[(0.0, 0.0, 0.0), (0.0, 0.3, 1.0), (0.5, -0.2, 0.4), (0.9, 1.0, 0.8)] {
        let oracle = -kappa * y + sigma * sigma * common::ou_log_gradient_fd(kappa, sigma, 1.0 - t, y, x);
        let got = h_transform_drift(&ht, t, y, x).unwrap();
        assert_abs_diff_eq!(got, oracle, epsilon = 1e-6);
    }
}

#[test]
fn bessel_bridge_positivity_and_convergence() {
    let grid = TimeGrid::new(2000).unwrap();
    let paths = ensemble(1000, |s| sample_bessel3_bridge(1.0, grid, s).unwrap(), 8);
    let n = grid.n_steps();
    assert!(paths.iter().all(|p| p.values()[1..n].iter().all(|&x| x > 0.0)));
    let near = paths.iter().filter(|p| p.at(n - 1) < 0.1).count();
    assert!(near >= 990, "{near}");
    let tol = bessel_terminal_tolerance(grid);
    assert!(paths.iter().filter(|p| p.at(n - 1) < tol).count() >= 990);
}

#[test]
fn bessel_bridge_leaves_origin() {
    let grid = TimeGrid::new(500).unwrap();
    let paths = ensemble(200, |s| sample_bessel3_bridge(0.0, grid, s).unwrap(), 9);
    assert!(paths.iter().all(|p| p.at(1) > 0.0));
}
