//! One function per subcommand. Each validates its parameters through the
//! core constructors, runs, and fills a [`RunResult`].

use std::path::Path;

use kylelab_core::bridges::{
    bessel_terminal_tolerance, sample_bessel3_bridge, sample_bridge_anticipative, sample_bridge_sde, BridgeSpec,
};
use kylelab_core::diagnostics::{
    bonferroni_critical, brownian_increment_test, martingale_test, variance_curve_check, MeanEstimate, TestSuite,
};
use kylelab_core::equilibrium::{simulate_strategy, StrategyKind};
use kylelab_core::filtering::{
    kalman_bucy_filter, mean_reverting_obs_filter, particle_filter, riccati_closed_form, KalmanBucyModel,
    MeanRevertingObsModel, ParticleFilterConfig, ScalarDiffusion,
};
use kylelab_core::risk_averse::{
    distributional_terminal_check, inventory_mean_reversion_stat, solve_risk_averse, RiskAverseConfig,
};
use kylelab_core::static_kyle::{information_value, simulate_static_round, solve_static_equilibrium, StaticMarket};
use kylelab_core::{
    Conditioning, Ensemble, Market, MarketConfig, PricingRule, RngStream, SamplePath, Series, SignalKind, TimeGrid,
};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::*;
use crate::error::{CliError, Result};
use crate::output::{config_hash, parse_csv, RunResult, Table};

/// Level and block count of the order-flow suites run on sampled ensembles.
const SUITE_LEVEL: f64 = 0.01;
const SUITE_BLOCKS: usize = 10;
const CHECKPOINTS: [f64; 3] = [0.25, 0.5, 0.75];
const VARIANCE_REL_TOL: f64 = 0.05;
/// Standard errors allowed between a Monte Carlo mean and its target.
const SE_BAND: f64 = 3.0;
const KS_TOL: f64 = 0.02;
const PARTICLE_RMSE_TOL: f64 = 0.05;
const RICCATI_TOL: f64 = 1e-6;

fn to_value<T: serde::Serialize>(p: &T) -> Value {
    serde_json::to_value(p).expect("config sections are plain data")
}

fn column_name(family: &str, path: usize, n_paths: usize) -> String {
    if n_paths == 1 {
        family.to_owned()
    } else {
        format!("{family}.{path}")
    }
}

pub fn static_kyle(cfg: &ExperimentConfig) -> Result<(Value, RunResult)> {
    let p = &cfg.static_kyle;
    let market = StaticMarket::new(p.mu, p.sigma_v, p.sigma_n)?;
    let eq = solve_static_equilibrium(&market);
    let value = information_value(&market);
    let mut res = RunResult::default();
    res.stat("lambda", eq.lambda);
    res.stat("beta", eq.beta);
    res.stat("a", eq.a);
    res.stat("alpha", eq.alpha);
    res.stat("information_value", value);
    if cfg.paths > 0 {
        let mc = simulate_static_round(&market, &eq, &RngStream::new(cfg.seed, 0), cfg.paths)?;
        let z = if mc.std_err > 0.0 {
            (mc.mean - value) / mc.std_err
        } else {
            0.0
        };
        res.stat("mean_profit", mc.mean);
        res.stat("profit_std_err", mc.std_err);
        res.stat("rounds", mc.n_draws);
        res.stat("profit_z", z);
        res.check(
            "profit matches information value",
            z.abs() <= SE_BAND,
            format!("z = {z:.3}"),
        );
    }
    Ok((to_value(p), res))
}

fn parse_series(names: &[String]) -> Result<Vec<Series>> {
    names
        .iter()
        .map(|n| {
            Series::ALL
                .into_iter()
                .find(|s| s.name() == n)
                .ok_or_else(|| CliError::Usage(format!("unknown series `{n}`; expected one of B, Z, theta, Y, S, W")))
        })
        .collect()
}

fn ensemble_table(ens: &Ensemble, series: &[Series]) -> Table {
    let mut table = Table::with_time(ens.record_grid().times().collect());
    let n = ens.paths.len();
    for (i, path) in ens.paths.iter().enumerate() {
        for s in series {
            table.push(column_name(s.name(), i, n), s.of(path).to_vec());
        }
    }
    table
}

fn suite_stats(res: &mut RunResult, key: &str, suite: &TestSuite) {
    res.stat(&format!("{key}_pass"), suite.pass);
    res.stat(&format!("{key}_max_abs_z"), suite.max_abs_z());
    res.stat(&format!("{key}_critical"), suite.critical);
}

/// Order-flow, martingale and posterior-variance diagnostics for a sampled
/// ensemble. Returns the suites that could be run, keyed by name.
fn sampled_diagnostics(ens: &Ensemble, sigma: f64, res: &mut RunResult) -> Vec<(&'static str, bool)> {
    let dt = ens.record_grid().dt();
    let s2 = sigma * sigma;
    let runs: [(&'static str, kylelab_core::Result<TestSuite>); 3] = [
        (
            "increments",
            brownian_increment_test(&ens.series(Series::Y), dt, SUITE_BLOCKS, SUITE_LEVEL),
        ),
        (
            "martingale",
            martingale_test(&ens.series(Series::S), &CHECKPOINTS, SUITE_LEVEL),
        ),
        (
            "variance_curve",
            variance_curve_check(
                &ens.series(Series::Z),
                &ens.series(Series::Y),
                &CHECKPOINTS,
                |t| (1.0 - s2) * (1.0 - t),
                VARIANCE_REL_TOL,
            ),
        ),
    ];
    let mut out = Vec::new();
    for (key, suite) in runs {
        match suite {
            Ok(suite) => {
                suite_stats(res, key, &suite);
                out.push((key, suite.pass));
            }
            Err(e) => res.stat(&format!("{key}_skipped"), e.to_string()),
        }
    }
    out
}

fn market_ensemble(
    cfg: &ExperimentConfig,
    valuation: &ValuationParams,
    signal: SignalKind,
    z: Option<f64>,
    stride: usize,
    kind: StrategyKind,
) -> Result<(PricingRule, Ensemble)> {
    let rule = PricingRule::new(valuation.build()?)?;
    let config = MarketConfig {
        signal,
        conditioning: z.map_or(Conditioning::Sampled, |z| Conditioning::Fixed { z }),
        n_steps: cfg.steps,
        n_paths: cfg.paths,
        seed: cfg.seed,
        record_stride: stride,
    };
    config.validate()?;
    kind.validate()?;
    let market = Market::new(&rule, cfg.steps)?;
    let ens = simulate_strategy(&market, &config, kind)?;
    Ok((rule, ens))
}

/// `None` for a single path, which has no standard error.
fn wealth_stats(ens: &Ensemble, res: &mut RunResult) -> Option<MeanEstimate> {
    res.stat("terminal_gap", ens.terminal_gap());
    let wealth = ens.wealth();
    if wealth.len() < 2 {
        res.stat("mean_wealth", wealth[0]);
        return None;
    }
    let w = MeanEstimate::from_samples(&wealth).expect("two or more finite samples");
    res.stat("mean_wealth", w.mean);
    res.stat("wealth_std_err", w.std_err);
    Some(w)
}

pub fn kyle(cfg: &ExperimentConfig) -> Result<(Value, RunResult)> {
    let p = &cfg.kyle;
    let series = parse_series(&p.series)?;
    let kind = p.strategy_kind();
    let (rule, ens) = market_ensemble(cfg, &p.valuation, SignalKind::Static, p.z, p.stride, kind)?;
    let mut res = RunResult::default();
    let w = wealth_stats(&ens, &mut res);
    let optimal = matches!(kind, StrategyKind::EquilibriumBridge | StrategyKind::KBridge { .. });
    match (p.z, w) {
        (Some(z), Some(w)) => {
            let bound = rule.psi(0.0, 0.0, rule.terminal().eval(z))?;
            let wz = w.z_against(bound);
            res.stat("psi_bound", bound);
            res.stat("wealth_z", wz);
            if optimal {
                res.check("wealth attains the bound", wz.abs() <= SE_BAND, format!("z = {wz:.3}"));
            } else {
                res.check("wealth falls below the bound", wz < -SE_BAND, format!("z = {wz:.3}"));
            }
        }
        (Some(_), None) => {}
        (None, _) => {
            let suites = sampled_diagnostics(&ens, 0.0, &mut res);
            if kind == StrategyKind::EquilibriumBridge {
                for (key, pass) in suites {
                    res.check(key, pass, format!("{key} suite at level {SUITE_LEVEL}"));
                }
            }
        }
    }
    res.table = Some(ensemble_table(&ens, &series));
    Ok((to_value(p), res))
}

pub fn dynamic(cfg: &ExperimentConfig) -> Result<(Value, RunResult)> {
    let p = &cfg.dynamic;
    let series = parse_series(&p.series)?;
    if !(p.sigma > 0.0 && p.sigma < 1.0) {
        return Err(invalid("sigma", format!("must lie in (0, 1), got {}", p.sigma)));
    }
    let signal = SignalKind::Dynamic { sigma: p.sigma };
    let (_, ens) = market_ensemble(
        cfg,
        &p.valuation,
        signal,
        p.z,
        p.stride,
        StrategyKind::EquilibriumBridge,
    )?;
    let mut res = RunResult::default();
    wealth_stats(&ens, &mut res);
    if p.z.is_none() {
        for (key, pass) in sampled_diagnostics(&ens, p.sigma, &mut res) {
            res.check(key, pass, format!("{key} suite"));
        }
    }
    res.table = Some(ensemble_table(&ens, &series));
    Ok((to_value(p), res))
}

fn column(paths: &[SamplePath], k: usize) -> Vec<f64> {
    paths.iter().map(|p| p.at(k)).collect()
}

pub fn bridge(cfg: &ExperimentConfig) -> Result<(Value, RunResult)> {
    let p = &cfg.bridge;
    let grid = TimeGrid::new(cfg.steps)?;
    if p.stride == 0 || !cfg.steps.is_multiple_of(p.stride) {
        return Err(invalid("stride", "must be positive and divide steps"));
    }
    if cfg.paths < 2 {
        return Err(invalid("paths", "need at least two paths"));
    }
    let root = RngStream::new(cfg.seed, 0);
    let spec = BridgeSpec::from_to(p.start, p.target)?;
    let paths: Vec<SamplePath> = (0..cfg.paths as u64)
        .map(|i| match p.kind {
            BridgeKind::Sde => Ok(sample_bridge_sde(&spec, grid, &root.child(i))),
            BridgeKind::Anticipative => Ok(sample_bridge_anticipative(&spec, grid, &root.child(i))),
            BridgeKind::Bessel => sample_bessel3_bridge(p.start, grid, &root.child(i)),
        })
        .collect::<kylelab_core::Result<_>>()?;
    let mut res = RunResult::default();
    let n = grid.n_steps();
    if p.kind == BridgeKind::Bessel {
        let interior_positive = paths
            .iter()
            .filter(|x| x.values()[1..n].iter().all(|&v| v > 0.0))
            .count();
        let tol = bessel_terminal_tolerance(grid);
        let near = paths.iter().filter(|x| x.terminal() < tol).count();
        let m = paths.len() as f64;
        res.stat("positive_share", interior_positive as f64 / m);
        res.stat("terminal_share", near as f64 / m);
        res.stat("terminal_tolerance", tol);
        res.check(
            "positive before the end",
            interior_positive == paths.len(),
            format!("{interior_positive} of {m}"),
        );
        res.check(
            "reaches zero",
            near as f64 >= 0.99 * m,
            format!("{near} of {m} below {tol:.3e}"),
        );
    } else {
        let gap = paths
            .iter()
            .map(|x| (x.terminal() - p.target).abs())
            .fold(0.0, f64::max);
        res.stat("max_terminal_gap", gap);
        res.check(
            "pinned at target",
            gap <= 1e-12 * p.target.abs().max(1.0),
            format!("max gap {gap:.3e}"),
        );
        let crit = bonferroni_critical(SUITE_LEVEL, 2 * CHECKPOINTS.len());
        let m = paths.len() as f64;
        for t in CHECKPOINTS {
            let xs = column(&paths, grid.index_of(t));
            let est = MeanEstimate::from_samples(&xs)?;
            let expect_mean = p.start + (p.target - p.start) * t;
            let expect_var = t * (1.0 - t);
            let mean_z = (est.mean - expect_mean) / (expect_var / m).sqrt();
            let var = est.std_err * est.std_err * m;
            let var_z = (var - expect_var) / (expect_var * (2.0 / (m - 1.0)).sqrt());
            res.stat(&format!("mean@{t}"), est.mean);
            res.stat(&format!("variance@{t}"), var);
            res.check(
                &format!("mean@{t}"),
                mean_z.abs() <= crit,
                format!("z = {mean_z:.3}, critical {crit:.3}"),
            );
            res.check(
                &format!("variance@{t}"),
                var_z.abs() <= crit,
                format!("z = {var_z:.3}, critical {crit:.3}"),
            );
        }
    }
    let rows: Vec<usize> = (0..=n).step_by(p.stride).collect();
    let mut table = Table::with_time(rows.iter().map(|&k| grid.t(k)).collect());
    for (i, x) in paths.iter().enumerate() {
        table.push(
            column_name("X", i, paths.len()),
            rows.iter().map(|&k| x.at(k)).collect(),
        );
    }
    res.table = Some(table);
    Ok((to_value(p), res))
}

fn rms(a: &[f64], b: &[f64]) -> f64 {
    (a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64).sqrt()
}

pub fn filter(cfg: &ExperimentConfig) -> Result<(Value, RunResult)> {
    let p = &cfg.filter;
    let grid = TimeGrid::new(cfg.steps)?;
    let root = RngStream::new(cfg.seed, 0);
    let mut res = RunResult::default();
    let mut table = Table::with_time(grid.times().collect());
    match p.model {
        FilterModel::KalmanBucy | FilterModel::Particle => {
            let model = KalmanBucyModel::new(p.a, p.c, p.prior_mean, p.prior_var)?;
            let (x, y) = model.simulate(grid, &root.child(0));
            let kb = kalman_bucy_filter(&model, &y)?;
            res.stat("final_mean", kb.mean.terminal());
            res.stat("final_variance", kb.variance.terminal());
            res.stat("state_rmse", rms(kb.mean.values(), x.values()));
            if let Ok(cf) = riccati_closed_form(&model) {
                let gap = grid
                    .times()
                    .zip(kb.variance.values())
                    .map(|(t, v)| (v - cf.variance(t)).abs())
                    .fold(0.0, f64::max);
                res.stat("variance_limit", cf.limit());
                res.stat("riccati_max_gap", gap);
                res.check(
                    "variance follows the Riccati solution",
                    gap < RICCATI_TOL,
                    format!("max gap {gap:.3e}"),
                );
            }
            table.push("X", x.values().to_vec());
            table.push("Y", y.values().to_vec());
            table.push("mean", kb.mean.values().to_vec());
            table.push("variance", kb.variance.values().to_vec());
            if p.model == FilterModel::Particle {
                let pf_config = ParticleFilterConfig {
                    n_particles: p.particles,
                    resample_fraction: p.resample_fraction,
                };
                let pf = particle_filter(&ScalarDiffusion::from(model), &pf_config, &root.child(1), &y)?;
                let err = rms(&pf.mean, kb.mean.values());
                res.stat("particle_rmse_vs_kalman", err);
                res.stat(
                    "particle_variance_max_gap",
                    pf.variance
                        .iter()
                        .zip(kb.variance.values())
                        .map(|(a, b)| (a - b).abs())
                        .fold(0.0, f64::max),
                );
                res.stat("min_ess", pf.ess.iter().copied().fold(f64::INFINITY, f64::min));
                res.stat("resamples", pf.resamples);
                res.check(
                    "particle mean tracks Kalman–Bucy",
                    err < PARTICLE_RMSE_TOL,
                    format!("rmse {err:.4}"),
                );
                table.push("pf_mean", pf.mean);
                table.push("pf_variance", pf.variance);
            }
        }
        FilterModel::MeanReverting => {
            let model = MeanRevertingObsModel::self_consistent(p.sigma, p.s0)?;
            let (x, y) = model.simulate(grid, &root.child(0))?;
            let out = mean_reverting_obs_filter(&model, &y)?;
            let s2 = p.sigma * p.sigma;
            let gap = grid
                .times()
                .zip(out.variance.values())
                .map(|(t, v)| (v - (p.s0 + (s2 - 1.0) * t)).abs())
                .fold(0.0, f64::max);
            res.stat("final_mean", out.mean.terminal());
            res.stat("final_variance", out.variance.terminal());
            res.stat("state_rmse", rms(out.mean.values(), x.values()));
            res.stat("variance_max_gap", gap);
            res.check(
                "variance equals s(t) − t",
                gap < RICCATI_TOL,
                format!("max gap {gap:.3e}"),
            );
            table.push("X", x.values().to_vec());
            table.push("Y", y.values().to_vec());
            table.push("mean", out.mean.values().to_vec());
            table.push("variance", out.variance.values().to_vec());
        }
    }
    res.table = Some(table);
    Ok((to_value(p), res))
}

pub fn riskaverse(cfg: &ExperimentConfig) -> Result<(Value, RunResult)> {
    let p = &cfg.riskaverse;
    let config = RiskAverseConfig {
        rho: p.rho,
        n_mm: p.n_mm,
        target_law: p.law.build(),
        n_paths: cfg.paths,
        n_steps: cfg.steps,
        damping: p.damping,
        max_iters: p.max_iters,
        tol_w1: p.tol_w1,
        map_knots: p.map_knots,
        seed: cfg.seed,
    };
    config.validate()?;
    let sol = solve_risk_averse(&config)?;
    let ks = distributional_terminal_check(&sol)?;
    let inv = inventory_mean_reversion_stat(&sol)?;
    let mut res = RunResult::default();
    let last = sol.residuals.last().copied().unwrap_or(f64::NAN);
    res.stat("converged", sol.converged);
    res.stat("iterations", sol.iterations);
    res.stat("w1_residual", last);
    res.stat("residuals", sol.residuals.clone());
    res.stat("ks_statistic", ks.statistic);
    res.stat("ks_p_value", ks.p_value);
    res.stat("inventory_correlation", inv.correlation);
    res.stat("inventory_z", inv.z);
    res.check(
        "converged",
        sol.converged,
        format!("{} iterations, residual {last:.3e}", sol.iterations),
    );
    res.check(
        "terminal law matches target",
        ks.statistic < KS_TOL,
        format!("KS {:.4}", ks.statistic),
    );
    if p.rho > 0.0 {
        res.check("inventory mean-reverts", inv.z < -SE_BAND, format!("z = {:.2}", inv.z));
    }
    Ok((to_value(p), res))
}

fn transpose(cols: &[&[f64]]) -> Vec<Vec<f64>> {
    cols.iter().map(|c| c.to_vec()).collect()
}

pub fn diagnose(cfg: &ExperimentConfig) -> Result<(Value, RunResult)> {
    let p = &cfg.diagnose;
    let path = p
        .input
        .as_deref()
        .ok_or_else(|| CliError::Usage("diagnose needs --input <PATH> or diagnose.input".into()))?;
    let bytes = std::fs::read(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let text = String::from_utf8(bytes.clone()).map_err(|e| CliError::Input {
        path: path.to_path_buf(),
        line: 0,
        message: e.to_string(),
    })?;
    let parsed = parse_csv(&text, path)?;
    let mut res = RunResult::default();
    res.stat("input", path.display().to_string());
    if let (Some(h), Some(c)) = (&parsed.config_hash, &parsed.config) {
        let intact = config_hash(c) == *h;
        res.stat("input_config_hash", h.clone());
        res.check("input record intact", intact, "stored hash matches stored config");
    }
    let table = &parsed.table;
    let family = |default: &str| -> Result<Vec<Vec<f64>>> {
        let name = p.series.as_deref().unwrap_or(default);
        let cols = table.family(name);
        if cols.is_empty() {
            return Err(input_error(path, format!("no `{name}` columns")));
        }
        Ok(transpose(&cols))
    };
    let suite = match p.test {
        DiagnoseTest::Bm => {
            let t = &table.columns[0];
            if t.len() < 2 {
                return Err(input_error(path, "need at least two rows".into()));
            }
            brownian_increment_test(&family("Y")?, t[1] - t[0], p.blocks, p.level)?
        }
        DiagnoseTest::Martingale => martingale_test(&family("S")?, &p.checkpoints, p.level)?,
        DiagnoseTest::Variance => {
            let z = transpose(&table.family("Z"));
            let y = family("Y")?;
            let s2 = p.sigma * p.sigma;
            variance_curve_check(&z, &y, &p.checkpoints, |t| (1.0 - s2) * (1.0 - t), p.rel_tol)?
        }
    };
    res.stat("suite", suite.name.clone());
    res.stat("n_stats", suite.stats.len());
    suite_stats(&mut res, "suite", &suite);
    let failures: Vec<&str> = suite.failures().map(|s| s.name.as_str()).collect();
    res.stat("failures", failures.clone());
    res.check(
        &suite.name,
        suite.pass,
        format!("max |z| {:.3}, critical {:.3}", suite.max_abs_z(), suite.critical),
    );
    let mut params = to_value(p);
    let obj = params.as_object_mut().expect("struct serialises to an object");
    obj.remove("input");
    obj.insert("input_sha256".into(), json!(hex::encode(Sha256::digest(&bytes))));
    Ok((params, res))
}

fn input_error(path: &Path, message: String) -> CliError {
    CliError::Input {
        path: path.to_path_buf(),
        line: 0,
        message,
    }
}

fn invalid(name: &'static str, reason: impl Into<String>) -> CliError {
    kylelab_core::Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
    .into()
}
