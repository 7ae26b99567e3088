//! Continuous-time Kyle market: the equilibrium bridge strategy with a static
//! or diffusing private signal, deliberately suboptimal strategies, and the
//! insider's terminal wealth.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bridges::BridgeTransition;
use crate::diagnostics::MeanEstimate;
use crate::error::{Error, Result};
use crate::pricing::{PriceTable, PricingRule};
use crate::stoch::{RngStream, TimeGrid};

/// Private signal of the insider.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SignalKind {
    /// `Z` revealed once at time 0.
    Static,
    /// `Z_t = Z_0 + σ·B^Z_t` with `Z_0 ~ N(0, 1 − σ²)`.
    Dynamic { sigma: f64 },
}

impl SignalKind {
    pub fn sigma(&self) -> f64 {
        match self {
            Self::Static => 0.0,
            Self::Dynamic { sigma } => *sigma,
        }
    }
}

/// Which measure the ensemble is drawn under: the insider's, with the signal
/// pinned, or the market makers', with the signal drawn per path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Conditioning {
    /// `Z_0 = z` on every path.
    Fixed {
        z: f64,
    },
    Sampled,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketConfig {
    pub signal: SignalKind,
    pub conditioning: Conditioning,
    pub n_steps: usize,
    pub n_paths: usize,
    pub seed: u64,
    /// Series are stored every `record_stride` steps; wealth always uses
    /// the full grid.
    pub record_stride: usize,
}

impl Default for MarketConfig {
    fn default() -> Self {
        Self {
            signal: SignalKind::Static,
            conditioning: Conditioning::Sampled,
            n_steps: TimeGrid::DEFAULT_STEPS,
            n_paths: 1000,
            seed: 0,
            record_stride: 1,
        }
    }
}

impl MarketConfig {
    pub const MIN_STEPS: usize = 100;

    pub fn validate(&self) -> Result<()> {
        if self.n_steps < Self::MIN_STEPS {
            return Err(Error::invalid("n_steps", format!("need at least {}", Self::MIN_STEPS)));
        }
        if self.n_paths == 0 {
            return Err(Error::invalid("n_paths", "need at least one path"));
        }
        if self.record_stride == 0 || !self.n_steps.is_multiple_of(self.record_stride) {
            return Err(Error::invalid("record_stride", "must be positive and divide n_steps"));
        }
        if let SignalKind::Dynamic { sigma } = self.signal {
            if !(0.0..1.0).contains(&sigma) {
                return Err(Error::invalid("sigma", format!("must lie in [0, 1), got {sigma}")));
            }
        }
        if let Conditioning::Fixed { z } = self.conditioning {
            if !z.is_finite() {
                return Err(Error::NonFinite("conditioning z"));
            }
        }
        Ok(())
    }

    pub fn record_grid(&self) -> TimeGrid {
        TimeGrid::new(self.n_steps / self.record_stride).expect("validated stride")
    }
}

/// Pricing rule together with its tabulation on the simulation grid.
/// Build once and share across ensembles with the same `n_steps`.
#[derive(Debug, Clone)]
pub struct Market {
    table: PriceTable,
}

impl Market {
    /// Requires a bounded, strictly increasing terminal valuation.
    pub fn new(rule: &PricingRule, n_steps: usize) -> Result<Self> {
        if !rule.terminal().is_bounded() {
            return Err(Error::invalid("terminal", "equilibrium runs need a bounded valuation"));
        }
        rule.terminal().check_monotone()?;
        Ok(Self {
            table: PriceTable::build(rule, TimeGrid::new(n_steps)?),
        })
    }

    pub fn rule(&self) -> &PricingRule {
        self.table.rule()
    }

    pub fn grid(&self) -> TimeGrid {
        self.table.grid()
    }

    pub fn table(&self) -> &PriceTable {
        &self.table
    }
}

/// Insider trading strategy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StrategyKind {
    /// `dY = dB + (Z_t − Y)/((1−σ²)(1−t)) dt`.
    EquilibriumBridge,
    /// `dY = dB + k(Z_t − Y)/(1−t) dt`.
    KBridge { k: f64 },
    /// `dθ = rate·dt`.
    ConstantRate { rate: f64 },
    /// Single block trade of `size` at `time`; holdings are otherwise flat.
    Jump { size: f64, time: f64 },
}

impl StrategyKind {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::EquilibriumBridge => Ok(()),
            Self::KBridge { k } if k > 0.0 && k.is_finite() => Ok(()),
            Self::KBridge { .. } => Err(Error::invalid("k", "must be positive")),
            Self::ConstantRate { rate } if rate.is_finite() => Ok(()),
            Self::ConstantRate { .. } => Err(Error::NonFinite("rate")),
            Self::Jump { size, time } => {
                if !size.is_finite() {
                    return Err(Error::NonFinite("jump size"));
                }
                if !(time > 0.0 && time < 1.0) {
                    return Err(Error::invalid("time", "jump time must lie in (0, 1)"));
                }
                Ok(())
            }
        }
    }
}

/// One simulated market path, sampled on the record grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathBundle {
    /// Noise-trader demand.
    pub b: Vec<f64>,
    pub z: Vec<f64>,
    /// Insider holdings.
    pub theta: Vec<f64>,
    /// Total order flow `θ + B`.
    pub y: Vec<f64>,
    pub s: Vec<f64>,
    /// Running insider wealth.
    pub w: Vec<f64>,
    /// `f(Z_1)`.
    pub valuation: f64,
    /// `H(1 − Δt, Y_{1−Δt})` on the full grid.
    pub pre_terminal_price: f64,
    /// Full-grid indices `j` at which holdings jump into `θ_j`.
    pub jump_steps: Vec<usize>,
}

impl PathBundle {
    pub fn wealth(&self) -> f64 {
        *self.w.last().expect("non-empty path")
    }
}

/// Named series of a [`PathBundle`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Series {
    B,
    Z,
    Theta,
    Y,
    S,
    W,
}

impl Series {
    pub const ALL: [Series; 6] = [Series::B, Series::Z, Series::Theta, Series::Y, Series::S, Series::W];

    pub fn name(&self) -> &'static str {
        match self {
            Series::B => "B",
            Series::Z => "Z",
            Series::Theta => "theta",
            Series::Y => "Y",
            Series::S => "S",
            Series::W => "W",
        }
    }

    pub fn of<'a>(&self, p: &'a PathBundle) -> &'a [f64] {
        match self {
            Series::B => &p.b,
            Series::Z => &p.z,
            Series::Theta => &p.theta,
            Series::Y => &p.y,
            Series::S => &p.s,
            Series::W => &p.w,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    pub config: MarketConfig,
    pub strategy: StrategyKind,
    pub paths: Vec<PathBundle>,
}

impl Ensemble {
    pub fn record_grid(&self) -> TimeGrid {
        self.config.record_grid()
    }

    pub fn series(&self, which: Series) -> Vec<&[f64]> {
        self.paths.iter().map(|p| which.of(p)).collect()
    }

    pub fn wealth(&self) -> Vec<f64> {
        self.paths.iter().map(PathBundle::wealth).collect()
    }

    pub fn wealth_stats(&self) -> Result<MeanEstimate> {
        MeanEstimate::from_samples(&self.wealth())
    }

    /// Mean of `|H(1 − Δt, Y) − f(Z_1)|`.
    pub fn terminal_gap(&self) -> f64 {
        self.paths
            .iter()
            .map(|p| (p.pre_terminal_price - p.valuation).abs())
            .sum::<f64>()
            / self.paths.len() as f64
    }
}

/// Left-point sum `Σ (f(Z_1) − S_j)(θ_{j+1} − θ_j)`; a trade listed in
/// `jump_steps` (landing at index `j + 1`) executes at the post-trade price
/// `S_{j+1}`.
pub fn insider_wealth(theta: &[f64], prices: &[f64], valuation: f64, jump_steps: &[usize]) -> f64 {
    running_wealth(theta, prices, valuation, jump_steps)
        .last()
        .copied()
        .unwrap_or(0.0)
}

fn running_wealth(theta: &[f64], prices: &[f64], valuation: f64, jump_steps: &[usize]) -> Vec<f64> {
    assert_eq!(theta.len(), prices.len(), "holdings and prices share a grid");
    let mut w = Vec::with_capacity(theta.len());
    let mut acc = 0.0;
    w.push(acc);
    for j in 0..theta.len().saturating_sub(1) {
        let price = if jump_steps.contains(&(j + 1)) {
            prices[j + 1]
        } else {
            prices[j]
        };
        acc += (valuation - price) * (theta[j + 1] - theta[j]);
        w.push(acc);
    }
    w
}

/// Equilibrium with a static signal.
pub fn simulate_static_equilibrium(market: &Market, config: &MarketConfig) -> Result<Ensemble> {
    if config.signal != SignalKind::Static {
        return Err(Error::invalid("signal", "static equilibrium needs a static signal"));
    }
    simulate_strategy(market, config, StrategyKind::EquilibriumBridge)
}

/// Equilibrium with a diffusing signal, `σ ∈ (0, 1)`.
pub fn simulate_dynamic_equilibrium(market: &Market, config: &MarketConfig) -> Result<Ensemble> {
    match config.signal {
        SignalKind::Dynamic { sigma } if sigma > 0.0 && sigma < 1.0 => {
            simulate_strategy(market, config, StrategyKind::EquilibriumBridge)
        }
        _ => Err(Error::invalid("signal", "dynamic equilibrium needs sigma in (0, 1)")),
    }
}

/// Runs `kind` against the market's pricing rule. Paths are generated in
/// parallel, each from its own substream, and collected in path order.
pub fn simulate_strategy(market: &Market, config: &MarketConfig, kind: StrategyKind) -> Result<Ensemble> {
    config.validate()?;
    kind.validate()?;
    if market.grid().n_steps() != config.n_steps {
        return Err(Error::invalid(
            "n_steps",
            format!(
                "market tabulated for {} steps, config asks for {}",
                market.grid().n_steps(),
                config.n_steps
            ),
        ));
    }
    let root = RngStream::new(config.seed, 0);
    let paths = (0..config.n_paths as u64)
        .into_par_iter()
        .map(|i| simulate_path(market, config, kind, &root.child(i)))
        .collect();
    Ok(Ensemble {
        config: *config,
        strategy: kind,
        paths,
    })
}

fn simulate_path(market: &Market, config: &MarketConfig, kind: StrategyKind, stream: &RngStream) -> PathBundle {
    let grid = market.grid();
    let n = grid.n_steps();
    let dt = grid.dt();
    let sigma = config.signal.sigma();
    let mut rng = stream.rng();
    let z0 = match config.conditioning {
        Conditioning::Fixed { z } => z,
        Conditioning::Sampled => {
            let sd = (1.0 - sigma * sigma).sqrt();
            sd * rng.sample::<f64, _>(StandardNormal)
        }
    };
    let mut b = vec![0.0; n + 1];
    let mut z = vec![z0; n + 1];
    let mut y = vec![0.0; n + 1];
    let mut jump_steps = Vec::new();

    match kind {
        StrategyKind::EquilibriumBridge | StrategyKind::KBridge { .. } => {
            let k = match kind {
                StrategyKind::KBridge { k } => k,
                _ => 1.0 / (1.0 - sigma * sigma),
            };
            let tr = BridgeTransition::new(k, sigma).expect("validated strategy");
            for j in 0..n {
                let step = tr.step(grid.t(j), grid.t(j + 1), y[j], z[j], tr.draw(&mut rng));
                y[j + 1] = step.y;
                z[j + 1] = step.target;
                b[j + 1] = b[j] + step.db;
            }
        }
        StrategyKind::ConstantRate { .. } | StrategyKind::Jump { .. } => {
            let sd = dt.sqrt();
            let jump_at = match kind {
                StrategyKind::Jump { time, .. } => ((time * n as f64).round() as usize).clamp(1, n - 1),
                _ => usize::MAX,
            };
            if jump_at != usize::MAX {
                jump_steps.push(jump_at);
            }
            for j in 0..n {
                b[j + 1] = b[j] + sd * rng.sample::<f64, _>(StandardNormal);
                z[j + 1] = z[j];
                if sigma > 0.0 {
                    z[j + 1] += sigma * sd * rng.sample::<f64, _>(StandardNormal);
                }
                let theta = match kind {
                    StrategyKind::ConstantRate { rate } => rate * grid.t(j + 1),
                    StrategyKind::Jump { size, .. } if j + 1 >= jump_at => size,
                    _ => 0.0,
                };
                y[j + 1] = theta + b[j + 1];
            }
        }
    }

    let table = market.table();
    let theta: Vec<f64> = y.iter().zip(&b).map(|(y, b)| y - b).collect();
    let s: Vec<f64> = (0..=n).map(|j| table.h(j, y[j])).collect();
    let valuation = market.rule().terminal().eval(z[n]);
    let w = running_wealth(&theta, &s, valuation, &jump_steps);
    let stride = config.record_stride;
    let pick = |v: &[f64]| v.iter().step_by(stride).copied().collect::<Vec<_>>();
    PathBundle {
        b: pick(&b),
        z: pick(&z),
        theta: pick(&theta),
        y: pick(&y),
        s: pick(&s),
        w: pick(&w),
        valuation,
        pre_terminal_price: s[n - 1],
        jump_steps,
    }
}
