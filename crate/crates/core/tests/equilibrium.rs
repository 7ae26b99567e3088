mod common;

use std::sync::OnceLock;

use kylelab_core::diagnostics::{brownian_increment_test, martingale_test, variance_curve_check};
use kylelab_core::equilibrium::*;
use kylelab_core::pricing::{PricingRule, TerminalValuation};

const STEPS: usize = 400;

fn market() -> &'static Market {
    static M: OnceLock<Market> = OnceLock::new();
    M.get_or_init(|| Market::new(&PricingRule::new(TerminalValuation::phi()).unwrap(), STEPS).unwrap())
}

fn config(conditioning: Conditioning, n_paths: usize, seed: u64) -> MarketConfig {
    MarketConfig {
        conditioning,
        n_paths,
        n_steps: STEPS,
        seed,
        ..Default::default()
    }
}

#[test]
fn unbounded_valuation_is_rejected() {
    let rule = PricingRule::new(TerminalValuation::Identity).unwrap();
    assert!(Market::new(&rule, STEPS).is_err());
}

#[test]
fn grid_mismatch_is_rejected() {
    let cfg = MarketConfig {
        n_steps: 800,
        ..config(Conditioning::Sampled, 10, 0)
    };
    assert!(simulate_static_equilibrium(market(), &cfg).is_err());
}

#[test]
fn bridge_reaches_the_valuation() {
    let cfg = config(Conditioning::Fixed { z: 0.0 }, 500, 1);
    let ens = simulate_static_equilibrium(market(), &cfg).unwrap();
    let f0 = 0.5;
    let close = ens
        .paths
        .iter()
        .filter(|p| (p.pre_terminal_price - f0).abs() < 0.05)
        .count();
    assert!(close >= 495, "{close}");
    assert!(ens.paths.iter().all(|p| *p.y.last().unwrap() == 0.0));
}

#[test]
fn terminal_gap_shrinks_with_refinement() {
    let rule = PricingRule::new(TerminalValuation::phi()).unwrap();
    let gap = |n: usize| {
        let m = Market::new(&rule, n).unwrap();
        let cfg = MarketConfig {
            n_steps: n,
            ..config(Conditioning::Fixed { z: 0.3 }, 400, 2)
        };
        simulate_static_equilibrium(&m, &cfg).unwrap().terminal_gap()
    };
    let (coarse, fine) = (gap(200), gap(800));
    assert!(fine < coarse, "{coarse} vs {fine}");
}

#[test]
fn equilibrium_wealth_attains_the_value_function() {
    let cfg = config(Conditioning::Fixed { z: 0.5 }, 2000, 3);
    let ens = simulate_static_equilibrium(market(), &cfg).unwrap();
    let bound = market().rule().psi(0.0, 0.0, common::phi_cdf(0.5)).unwrap();
    let w = ens.wealth_stats().unwrap();
    assert!(w.within(bound, 3.0), "{w:?} vs {bound}");
}

#[test]
fn deviations_fall_short_of_the_value_function() {
    let bound = market().rule().psi(0.0, 0.0, common::phi_cdf(0.5)).unwrap();
    for kind in [
        StrategyKind::ConstantRate { rate: 1.0 },
        StrategyKind::Jump { size: 0.5, time: 0.5 },
    ] {
        let ens = simulate_strategy(market(), &config(Conditioning::Fixed { z: 0.5 }, 2000, 4), kind).unwrap();
        let w = ens.wealth_stats().unwrap();
        assert!(w.mean < bound - 3.0 * w.std_err, "{kind:?}: {w:?} vs {bound}");
    }
}

#[test]
fn insider_wealth_degenerate_cases() {
    let prices = [0.3, 0.4, 0.45, 0.5];
    assert_eq!(insider_wealth(&[0.0; 4], &prices, 0.6, &[]), 0.0);
    assert_eq!(insider_wealth(&[0.0, 0.5, -1.0, 2.0], &[0.6; 4], 0.6, &[]), 0.0);
    // A jump at index 2 trades at the post-jump price.
    let w = insider_wealth(&[0.0, 0.0, 1.0, 1.0], &prices, 0.6, &[2]);
    assert!((w - (0.6 - 0.45)).abs() < 1e-15);
}

#[test]
fn sampled_ensemble_is_a_rational_market() {
    let cfg = MarketConfig {
        record_stride: 4,
        ..config(Conditioning::Sampled, 3000, 5)
    };
    let ens = simulate_static_equilibrium(market(), &cfg).unwrap();
    let grid = ens.record_grid();
    let y = ens.series(Series::Y);
    assert!(brownian_increment_test(&y, grid.dt(), 10, 0.01).unwrap().pass);
    assert!(
        martingale_test(&ens.series(Series::S), &[0.25, 0.5, 0.75], 0.01)
            .unwrap()
            .pass
    );
    let v = variance_curve_check(&ens.series(Series::Z), &y, &[0.0, 0.25, 0.5, 0.75], |t| 1.0 - t, 0.1).unwrap();
    assert!(v.pass, "{v:?}");
}

#[test]
fn fixed_signal_prices_drift() {
    let cfg = MarketConfig {
        record_stride: 4,
        ..config(Conditioning::Fixed { z: 1.0 }, 2000, 6)
    };
    let ens = simulate_static_equilibrium(market(), &cfg).unwrap();
    assert!(
        !martingale_test(&ens.series(Series::S), &[0.25, 0.5, 0.75], 0.01)
            .unwrap()
            .pass
    );
}

#[test]
fn dynamic_signal_keeps_an_edge() {
    let cfg = MarketConfig {
        signal: SignalKind::Dynamic { sigma: 0.5 },
        ..config(Conditioning::Sampled, 3000, 7)
    };
    let ens = simulate_dynamic_equilibrium(market(), &cfg).unwrap();
    let k = STEPS / 2;
    let dz: Vec<f64> = ens.paths.iter().map(|p| p.z[STEPS] - p.z[k]).collect();
    let dy: Vec<f64> = ens.paths.iter().map(|p| p.y[STEPS] - p.y[k]).collect();
    assert!(common::variance(&dz) < common::variance(&dy));
    let v = variance_curve_check(
        &ens.series(Series::Z),
        &ens.series(Series::Y),
        &[0.25, 0.5, 0.75],
        |t| 0.75 * (1.0 - t),
        0.1,
    )
    .unwrap();
    assert!(v.pass, "{v:?}");
}

#[test]
fn vanishing_signal_volatility_recovers_the_static_case() {
    let stat = simulate_static_equilibrium(market(), &config(Conditioning::Sampled, 2000, 8)).unwrap();
    let cfg = MarketConfig {
        signal: SignalKind::Dynamic { sigma: 1e-6 },
        ..config(Conditioning::Sampled, 2000, 9)
    };
    let dynm = simulate_dynamic_equilibrium(market(), &cfg).unwrap();
    let a = stat.wealth_stats().unwrap();
    let b = dynm.wealth_stats().unwrap();
    assert!((a.mean - b.mean).abs() <= 3.0 * (a.std_err.powi(2) + b.std_err.powi(2)).sqrt());
}

#[test]
fn zero_signal_bridge_without_noise_is_linear() {
    use kylelab_core::bridges::BridgeTransition;
    let tr = BridgeTransition::new(1.0, 0.0).unwrap();
    let (n, z) = (100, 0.8);
    let mut y = 0.0f64;
    for j in 0..n {
        let step = tr.step(j as f64 / n as f64, (j + 1) as f64 / n as f64, y, z, [0.0; 4]);
        assert_eq!(step.db, 0.0);
        y = step.y;
        assert!((y - z * (j + 1) as f64 / n as f64).abs() < 1e-12);
    }
}

#[test]
fn ensembles_are_reproducible() {
    let cfg = config(Conditioning::Sampled, 64, 10);
    let a = simulate_strategy(market(), &cfg, StrategyKind::KBridge { k: 2.0 }).unwrap();
    let b = simulate_strategy(market(), &cfg, StrategyKind::KBridge { k: 2.0 }).unwrap();
    assert_eq!(a, b);
}
