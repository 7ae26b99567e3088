//! One-period Kyle market: closed-form linear equilibrium, Bayesian posterior
//! of the asset value given net order flow, and Monte Carlo profit checks.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stoch::RngStream;

/// `V ~ N(mu, sigma_v²)` and noise demand `ν ~ N(0, sigma_n²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StaticMarket {
    pub mu: f64,
    pub sigma_v: f64,
    pub sigma_n: f64,
}

impl StaticMarket {
    pub fn new(mu: f64, sigma_v: f64, sigma_n: f64) -> Result<Self> {
        if !mu.is_finite() {
            return Err(Error::NonFinite("mu"));
        }
        if !(sigma_v > 0.0 && sigma_v.is_finite()) {
            return Err(Error::invalid("sigma_v", "must be positive"));
        }
        if !(sigma_n > 0.0 && sigma_n.is_finite()) {
            return Err(Error::invalid("sigma_n", "must be positive"));
        }
        Ok(Self { mu, sigma_v, sigma_n })
    }
}

/// Linear equilibrium: price `a + λ·y`, insider order `α + β·v`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StaticEquilibrium {
    pub lambda: f64,
    pub beta: f64,
    pub a: f64,
    pub alpha: f64,
}

impl StaticEquilibrium {
    pub fn price(&self, y: f64) -> f64 {
        self.a + self.lambda * y
    }

    pub fn order(&self, v: f64) -> f64 {
        self.alpha + self.beta * v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PosteriorMoments {
    pub mean: f64,
    pub variance: f64,
}

/// `β = σ_n/σ_v`, `λ = σ_v/(2σ_n)`. A nonzero prior mean shifts the
/// intercepts to `a = μ`, `α = −βμ`.
pub fn solve_static_equilibrium(market: &StaticMarket) -> StaticEquilibrium {
    let beta = market.sigma_n / market.sigma_v;
    let lambda = market.sigma_v / (2.0 * market.sigma_n);
    StaticEquilibrium {
        lambda,
        beta,
        a: market.mu,
        // `+ 0.0` turns the −0 from μ = 0 into +0.
        alpha: -beta * market.mu + 0.0,
    }
}

/// Gaussian posterior of `V` given `Y = y` when the insider trades `eq.order(V)`.
///
/// The regression slope uses `eq.beta`, so the formula stays valid off
/// equilibrium (and degenerates to the prior as β → 0).
pub fn posterior_moments(y: f64, eq: &StaticEquilibrium, market: &StaticMarket) -> PosteriorMoments {
    let s2 = market.sigma_v * market.sigma_v;
    let n2 = market.sigma_n * market.sigma_n;
    let denom = eq.beta * eq.beta * s2 + n2;
    let slope = eq.beta * s2 / denom;
    PosteriorMoments {
        mean: market.mu + slope * (y - eq.alpha - eq.beta * market.mu),
        variance: s2 * n2 / denom,
    }
}

/// Ex-ante expected insider profit in equilibrium, `σ_v·σ_n/2`.
pub fn information_value(market: &StaticMarket) -> f64 {
    0.5 * market.sigma_v * market.sigma_n
}

/// Insider profit `θ·(v − price)` for one round with value `v` and noise `noise`.
pub fn round_profit(eq: &StaticEquilibrium, v: f64, noise: f64) -> f64 {
    let theta = eq.order(v);
    theta * (v - eq.price(theta + noise))
}

/// One simulated round of the static market.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StaticRound {
    pub value: f64,
    pub noise: f64,
    pub order: f64,
    pub net_order: f64,
    pub price: f64,
    pub profit: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfitStats {
    pub mean: f64,
    pub std_err: f64,
    pub n_draws: usize,
}

const BLOCK: usize = 1 << 14;

fn simulate_block(
    market: &StaticMarket,
    eq: &StaticEquilibrium,
    stream: RngStream,
    n: usize,
    mut sink: impl FnMut(StaticRound),
) {
    let mut rng = stream.rng();
    for _ in 0..n {
        let zv: f64 = StandardNormal.sample(&mut rng);
        let zn: f64 = StandardNormal.sample(&mut rng);
        let value = market.mu + market.sigma_v * zv;
        let noise = market.sigma_n * zn;
        let order = eq.order(value);
        let net_order = order + noise;
        let price = eq.price(net_order);
        sink(StaticRound {
            value,
            noise,
            order,
            net_order,
            price,
            profit: order * (value - price),
        });
    }
}

fn blocks(n_draws: usize) -> impl IndexedParallelIterator<Item = (u64, usize)> {
    let n_blocks = n_draws.div_ceil(BLOCK);
    (0..n_blocks)
        .into_par_iter()
        .map(move |b| (b as u64, BLOCK.min(n_draws - b * BLOCK)))
}

/// Draws `n_draws` rounds. Draws are grouped in fixed blocks with one child
/// stream each, so the output does not depend on the thread count.
pub fn sample_static_rounds(
    market: &StaticMarket,
    eq: &StaticEquilibrium,
    stream: &RngStream,
    n_draws: usize,
) -> Vec<StaticRound> {
    let chunks: Vec<Vec<StaticRound>> = blocks(n_draws)
        .map(|(b, n)| {
            let mut out = Vec::with_capacity(n);
            simulate_block(market, eq, stream.child(b), n, |r| out.push(r));
            out
        })
        .collect();
    chunks.into_iter().flatten().collect()
}

/// Mean insider profit and its standard error over `n_draws` rounds.
pub fn simulate_static_round(
    market: &StaticMarket,
    eq: &StaticEquilibrium,
    stream: &RngStream,
    n_draws: usize,
) -> Result<ProfitStats> {
    if n_draws == 0 {
        return Err(Error::invalid("n_draws", "need at least one draw"));
    }
    let sums: Vec<(f64, f64)> = blocks(n_draws)
        .map(|(b, n)| {
            let (mut s, mut s2) = (0.0, 0.0);
            simulate_block(market, eq, stream.child(b), n, |r| {
                s += r.profit;
                s2 += r.profit * r.profit;
            });
            (s, s2)
        })
        .collect();
    let (s, s2) = sums.iter().fold((0.0, 0.0), |acc, x| (acc.0 + x.0, acc.1 + x.1));
    let n = n_draws as f64;
    let mean = s / n;
    let var = if n_draws > 1 {
        ((s2 - n * mean * mean) / (n - 1.0)).max(0.0)
    } else {
        0.0
    };
    Ok(ProfitStats {
        mean,
        std_err: (var / n).sqrt(),
        n_draws,
    })
}
