//! Equilibrium with risk-averse competitive market makers, solved as a fixed
//! point on the law of the terminal order flow `Y_1`:
//!
//! 1. given the current law of `Y_1`, set `H(1, ·) = Q_V ∘ F_{Y_1}`;
//! 2. price by the backward heat flow of that terminal map;
//! 3. simulate `dY = dβ − (ρ/2N)·Y·H_y(t, Y) dt` from `Y_0 = 0`;
//! 4. mix the new law of `Y_1` into the old one quantile by quantile.
//!
//! Every iteration reuses the same driving noise, and the terminal noise is
//! stratified (`β_1` of path `i` is the normal quantile at `(i + ½)/M`), so
//! the residual measures the map's movement rather than resampling noise.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bridges::BridgeTransition;
use crate::diagnostics::{ks_one_sample, KsResult};
use crate::error::{Error, Result};
use crate::pricing::{MonotoneInterp, PricingRule, TerminalValuation};
use crate::stoch::{norm_cdf, norm_quantile, RngStream, TimeGrid};

/// Quantile function supplied by the caller.
#[derive(Clone)]
pub struct CustomQuantile(Arc<dyn Fn(f64) -> f64 + Send + Sync>);

impl CustomQuantile {
    pub fn new(q: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self(Arc::new(q))
    }
}

impl fmt::Debug for CustomQuantile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("CustomQuantile(..)")
    }
}

/// Law of the asset value `V`, given through its quantile function.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TargetLaw {
    Gaussian {
        mean: f64,
        sd: f64,
    },
    Logistic {
        loc: f64,
        scale: f64,
    },
    Uniform {
        lo: f64,
        hi: f64,
    },
    #[serde(skip)]
    Custom(CustomQuantile),
}

impl Default for TargetLaw {
    fn default() -> Self {
        Self::Gaussian { mean: 0.0, sd: 1.0 }
    }
}

impl TargetLaw {
    pub fn quantile(&self, p: f64) -> f64 {
        match self {
            Self::Gaussian { mean, sd } => mean + sd * norm_quantile(p),
            Self::Logistic { loc, scale } => loc + scale * (p / (1.0 - p)).ln(),
            Self::Uniform { lo, hi } => lo + (hi - lo) * p,
            Self::Custom(q) => (q.0)(p),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            Self::Gaussian { mean, sd } => norm_cdf((x - mean) / sd),
            Self::Logistic { loc, scale } => 1.0 / (1.0 + (-(x - loc) / scale).exp()),
            Self::Uniform { lo, hi } => ((x - lo) / (hi - lo)).clamp(0.0, 1.0),
            Self::Custom(_) => {
                let (mut lo, mut hi) = (0.0, 1.0);
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if self.quantile(mid) <= x {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                0.5 * (lo + hi)
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Self::Gaussian { mean, sd } => mean.is_finite() && sd > 0.0 && sd.is_finite(),
            Self::Logistic { loc, scale } => loc.is_finite() && scale > 0.0 && scale.is_finite(),
            Self::Uniform { lo, hi } => lo.is_finite() && hi.is_finite() && lo < hi,
            Self::Custom(_) => true,
        };
        if !ok {
            return Err(Error::invalid("target_law", "parameters out of range"));
        }
        let mut prev = f64::NEG_INFINITY;
        for i in 1..1000 {
            let q = self.quantile(i as f64 / 1000.0);
            if !q.is_finite() || q < prev {
                return Err(Error::invalid(
                    "target_law",
                    "quantile function must be finite and nondecreasing",
                ));
            }
            prev = q;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RiskAverseConfig {
    /// Common risk aversion `ρ ≥ 0`.
    pub rho: f64,
    /// Number of market makers `N ≥ 1`.
    pub n_mm: u32,
    pub target_law: TargetLaw,
    pub n_paths: usize,
    pub n_steps: usize,
    /// Weight of the newly simulated law in each update, in `(0, 1]`.
    pub damping: f64,
    pub max_iters: usize,
    /// Stop once the Wasserstein-1 distance between successive laws of
    /// `Y_1` falls below this.
    pub tol_w1: f64,
    /// Probability levels carrying the terminal map.
    pub map_knots: usize,
    pub seed: u64,
}

impl Default for RiskAverseConfig {
    fn default() -> Self {
        Self {
            rho: 1.0,
            n_mm: 1,
            target_law: TargetLaw::default(),
            n_paths: 10_000,
            n_steps: TimeGrid::DEFAULT_STEPS,
            damping: 0.5,
            max_iters: 50,
            tol_w1: 1e-3,
            map_knots: 200,
            seed: 0,
        }
    }
}

impl RiskAverseConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho >= 0.0 && self.rho.is_finite()) {
            return Err(Error::invalid("rho", "must be finite and non-negative"));
        }
        if self.n_mm == 0 {
            return Err(Error::invalid("n_mm", "need at least one market maker"));
        }
        if self.n_paths < 100 {
            return Err(Error::invalid("n_paths", "need at least 100 paths"));
        }
        if self.n_steps < 10 || !self.n_steps.is_multiple_of(2) {
            return Err(Error::invalid("n_steps", "need an even number of at least 10 steps"));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::invalid("damping", "must lie in (0, 1]"));
        }
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters", "need at least one iteration"));
        }
        if self.map_knots < 2 {
            return Err(Error::invalid("map_knots", "need at least two knots"));
        }
        if !(self.tol_w1 > 0.0) {
            return Err(Error::invalid("tol_w1", "must be positive"));
        }
        self.target_law.validate()
    }
}

#[derive(Debug, Clone)]
pub struct RiskAverseSolution {
    /// `H(1, ·)`, nondecreasing.
    pub terminal_map: MonotoneInterp,
    pub pricing: PricingRule,
    /// Sorted simulated `Y_1` under `pricing`.
    pub y1_law: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Wasserstein-1 distance between the law fed into each iteration and
    /// the law it produced.
    pub residuals: Vec<f64>,
    pub target_law: TargetLaw,
    /// Per-path `Y_{1/2}` and `Y_1` of the returned simulation.
    pub y_mid: Vec<f64>,
    pub y_terminal: Vec<f64>,
}

/// `α̂ = −(ρ/2N)·y·z`.
pub fn optimal_projected_drift(rho: f64, n_mm: u32, y: f64, z_slope: f64) -> f64 {
    -(rho / (2.0 * n_mm as f64)) * y * z_slope
}

/// Mean absolute difference of two equally long sorted samples.
pub fn wasserstein1_sorted(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "equal sample sizes");
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64
}

fn plotting_positions(m: usize) -> impl Iterator<Item = f64> {
    (0..m).map(move |i| (i as f64 + 0.5) / m as f64)
}

/// Terminal map on the probability levels `p_j = (j + ½)/n_knots`: knots
/// `(F⁻¹_{Y_1}(p_j), Q_V(p_j))`, reading the empirical quantile off the
/// sorted sample `q` by linear interpolation. Beyond the outer knots the map
/// extends linearly. Repeated abscissae keep their first knot.
fn terminal_map(q: &[f64], law: &TargetLaw, n_knots: usize) -> Result<MonotoneInterp> {
    let m = q.len();
    let mut xs = Vec::with_capacity(n_knots);
    let mut ys = Vec::with_capacity(n_knots);
    for p in plotting_positions(n_knots) {
        let pos = (p * m as f64 - 0.5).clamp(0.0, (m - 1) as f64);
        let i = (pos.floor() as usize).min(m - 2);
        let u = pos - i as f64;
        let x = q[i] + u * (q[i + 1] - q[i]);
        if xs.last().is_none_or(|&last| x > last) {
            xs.push(x);
            ys.push(law.quantile(p));
        }
    }
    if xs.len() < 2 {
        return Err(Error::Degenerate("law of Y_1 collapsed to a point".into()));
    }
    MonotoneInterp::new(xs, ys)
}

/// `H_y` on a coarse time grid by a uniform `y` mesh, bilinear lookup.
struct SlopeTable {
    stride: usize,
    n_steps: usize,
    y_min: f64,
    dy: f64,
    ny: usize,
    rows: Vec<f64>,
}

impl SlopeTable {
    const STRIDE: usize = 5;
    const HALF_WIDTH: f64 = 8.0;
    const DY: f64 = 0.01;

    fn build(map: &MonotoneInterp, grid: TimeGrid) -> Result<Self> {
        let ny = (2.0 * Self::HALF_WIDTH / Self::DY).round() as usize + 1;
        let uniform = map.resample_uniform(-Self::HALF_WIDTH, Self::HALF_WIDTH, ny - 1)?;
        let rule = PricingRule::new(TerminalValuation::Interpolated(uniform))?;
        let n_rows = grid.n_steps().div_ceil(Self::STRIDE) + 1;
        let mut rows = vec![0.0; n_rows * ny];
        rows.par_chunks_mut(ny).enumerate().for_each(|(r, row)| {
            let t = (r * Self::STRIDE).min(grid.n_steps()) as f64 * grid.dt();
            for (j, v) in row.iter_mut().enumerate() {
                *v = rule.h_y(t, -Self::HALF_WIDTH + j as f64 * Self::DY);
            }
        });
        Ok(Self {
            stride: Self::STRIDE,
            n_steps: grid.n_steps(),
            y_min: -Self::HALF_WIDTH,
            dy: Self::DY,
            ny,
            rows,
        })
    }

    fn row_value(&self, r: usize, y: f64) -> f64 {
        let s = ((y - self.y_min) / self.dy).clamp(0.0, (self.ny - 1) as f64);
        let j = (s.floor() as usize).min(self.ny - 2);
        let u = s - j as f64;
        let base = r * self.ny + j;
        self.rows[base] + u * (self.rows[base + 1] - self.rows[base])
    }

    /// `H_y(t_k, y)`.
    fn at(&self, k: usize, y: f64) -> f64 {
        let r = k / self.stride;
        let r_next = r + 1;
        let t_r = r * self.stride;
        let t_next = (r_next * self.stride).min(self.n_steps);
        if k == t_r || r_next * self.ny >= self.rows.len() {
            return self.row_value(r, y);
        }
        let w = (k - t_r) as f64 / (t_next - t_r) as f64;
        (1.0 - w) * self.row_value(r, y) + w * self.row_value(r_next, y)
    }
}

struct Simulation {
    y_mid: Vec<f64>,
    y_terminal: Vec<f64>,
}

fn simulate(config: &RiskAverseConfig, grid: TimeGrid, map: &MonotoneInterp) -> Result<Simulation> {
    let c = config.rho / (2.0 * config.n_mm as f64);
    let table = if c > 0.0 {
        Some(SlopeTable::build(map, grid)?)
    } else {
        None
    };
    let root = RngStream::new(config.seed, 0);
    let n = grid.n_steps();
    let mid = n / 2;
    let dt = grid.dt();
    let tr = BridgeTransition::brownian();
    let m = config.n_paths;
    let (y_mid, y_terminal): (Vec<f64>, Vec<f64>) = (0..m)
        .into_par_iter()
        .map(|i| {
            let beta_1 = norm_quantile((i as f64 + 0.5) / m as f64);
            // Path m−1−i mirrors path i: same stream, negated draws.
            let mirror = i >= m.div_ceil(2);
            let sign = if mirror { -1.0 } else { 1.0 };
            let mut rng = root.child(if mirror { m - 1 - i } else { i } as u64).rng();
            let (mut beta, mut y, mut y_half) = (0.0, 0.0, 0.0);
            for k in 0..n {
                let z = tr.draw(&mut rng).map(|v| sign * v);
                let next = tr.step(grid.t(k), grid.t(k + 1), beta, beta_1, z).y;
                // Linearly implicit in Y: c·H_y ≥ 0, so any step size is stable.
                let damp = match &table {
                    Some(tab) => 1.0 + c * tab.at(k, y) * dt,
                    None => 1.0,
                };
                y = (y + (next - beta)) / damp;
                beta = next;
                if k + 1 == mid {
                    y_half = y;
                }
            }
            (y_half, y)
        })
        .unzip();
    if y_terminal.iter().any(|y| !y.is_finite()) {
        return Err(Error::NonFinite("simulated order flow"));
    }
    Ok(Simulation { y_mid, y_terminal })
}

fn sorted(v: &[f64]) -> Vec<f64> {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

/// Damped Picard iteration on the law of `Y_1`. Returns the first iterate
/// whose residual is below `tol_w1`, or the iterate with the smallest
/// residual flagged `converged = false`.
pub fn solve_risk_averse(config: &RiskAverseConfig) -> Result<RiskAverseSolution> {
    config.validate()?;
    let grid = TimeGrid::new(config.n_steps)?;
    let m = config.n_paths;
    let mut q: Vec<f64> = plotting_positions(m).map(norm_quantile).collect();
    let mut residuals = Vec::new();
    let mut best: Option<(f64, MonotoneInterp, Simulation, Vec<f64>, usize)> = None;
    let mut converged = false;
    for it in 1..=config.max_iters {
        let map = terminal_map(&q, &config.target_law, config.map_knots.min(m))?;
        let sim = simulate(config, grid, &map)?;
        let q_sim = sorted(&sim.y_terminal);
        let res = wasserstein1_sorted(&q, &q_sim);
        residuals.push(res);
        converged = res < config.tol_w1;
        for (old, new) in q.iter_mut().zip(&q_sim) {
            *old = (1.0 - config.damping) * *old + config.damping * new;
        }
        if best.as_ref().is_none_or(|b| res < b.0) {
            best = Some((res, map, sim, q_sim, it));
        }
        if converged {
            break;
        }
    }
    let (_, map, sim, y1_law, at) = best.expect("at least one iteration");
    let iterations = residuals.len();
    let pricing = PricingRule::new(TerminalValuation::Interpolated(map.clone()))?;
    Ok(RiskAverseSolution {
        terminal_map: map,
        pricing,
        y1_law,
        iterations: if converged { iterations } else { at },
        converged,
        residuals,
        target_law: config.target_law.clone(),
        y_mid: sim.y_mid,
        y_terminal: sim.y_terminal,
    })
}

/// KS distance between the law of `H(1, Y_1)` and the target law of `V`.
pub fn distributional_terminal_check(solution: &RiskAverseSolution) -> Result<KsResult> {
    let values: Vec<f64> = solution.y1_law.iter().map(|&y| solution.terminal_map.eval(y)).collect();
    ks_one_sample(&values, |x| solution.target_law.cdf(x))
}

/// Correlation between inventory at `t = ½` and its subsequent change.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InventoryStat {
    pub correlation: f64,
    /// Fisher z-score `atanh(r)·√(n − 3)`.
    pub z: f64,
    pub n: usize,
}

/// Sample correlation of `(Y_{1/2}, Y_1 − Y_{1/2})`; negative under mean
/// reversion of the market makers' inventory `−Y`.
pub fn inventory_mean_reversion_stat(solution: &RiskAverseSolution) -> Result<InventoryStat> {
    let n = solution.y_mid.len();
    if n < 4 {
        return Err(Error::Degenerate("too few paths for a correlation".into()));
    }
    let later: Vec<f64> = solution
        .y_terminal
        .iter()
        .zip(&solution.y_mid)
        .map(|(a, b)| a - b)
        .collect();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (ma, mb) = (mean(&solution.y_mid), mean(&later));
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (a, b) in solution.y_mid.iter().zip(&later) {
        sab += (a - ma) * (b - mb);
        saa += (a - ma).powi(2);
        sbb += (b - mb).powi(2);
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::Degenerate("constant inventory".into()));
    }
    let r = sab / (saa * sbb).sqrt();
    Ok(InventoryStat {
        correlation: r,
        z: r.atanh() * ((n - 3) as f64).sqrt(),
        n,
    })
}
