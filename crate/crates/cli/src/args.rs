//! Command-line surface. Every flag is optional so that an unset flag never
//! masks a value from the config file; defaults live in
//! [`ExperimentConfig`](crate::config::ExperimentConfig) and in
//! `reference.toml`.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::*;

#[derive(Debug, Parser)]
#[command(name = "kylelab", version, about = "Kyle-model equilibrium experiments")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// TOML config file; flags override its values
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Root seed [default: 0]
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Simulated paths, or Monte Carlo rounds for static-kyle [default: 1000]
    #[arg(long, global = true)]
    pub paths: Option<usize>,
    /// Time steps on [0, 1] [default: 2000]
    #[arg(long, global = true)]
    pub steps: Option<usize>,
    /// Output file, replaced atomically [default: stdout]
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Output format [default: summary]
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Exit with status 2 if any scenario check fails
    #[arg(long, global = true)]
    pub assert: bool,
    /// Record wall time in the output; the file is then no longer reproducible
    #[arg(long, global = true)]
    pub timing: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// One-period market: closed-form equilibrium and Monte Carlo profit
    StaticKyle(StaticKyleArgs),
    /// Continuous-time market with a static signal
    Kyle(KyleArgs),
    /// Continuous-time market with a diffusing signal
    Dynamic(DynamicArgs),
    /// Brownian and Bessel-3 bridge ensembles
    Bridge(BridgeArgs),
    /// Kalman–Bucy, mean-reverting and particle filters on one sample path
    Filter(FilterArgs),
    /// Fixed-point solver for risk-averse market makers
    Riskaverse(RiskAverseArgs),
    /// Statistical tests on a stored CSV ensemble
    Diagnose(DiagnoseArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    StaticKyle,
    Kyle,
    Dynamic,
    Bridge,
    Filter,
    Riskaverse,
    Diagnose,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Self::StaticKyle => "static-kyle",
            Self::Kyle => "kyle",
            Self::Dynamic => "dynamic",
            Self::Bridge => "bridge",
            Self::Filter => "filter",
            Self::Riskaverse => "riskaverse",
            Self::Diagnose => "diagnose",
        }
    }
}

fn set<T>(dst: &mut T, src: Option<T>) {
    if let Some(v) = src {
        *dst = v;
    }
}

impl GlobalArgs {
    pub fn apply(&self, cfg: &mut ExperimentConfig) {
        set(&mut cfg.seed, self.seed);
        set(&mut cfg.paths, self.paths);
        set(&mut cfg.steps, self.steps);
        set(&mut cfg.format, self.format);
        if self.out.is_some() {
            cfg.out.clone_from(&self.out);
        }
        cfg.assert |= self.assert;
    }
}

impl Command {
    pub fn scenario(&self) -> Scenario {
        match self {
            Self::StaticKyle(_) => Scenario::StaticKyle,
            Self::Kyle(_) => Scenario::Kyle,
            Self::Dynamic(_) => Scenario::Dynamic,
            Self::Bridge(_) => Scenario::Bridge,
            Self::Filter(_) => Scenario::Filter,
            Self::Riskaverse(_) => Scenario::Riskaverse,
            Self::Diagnose(_) => Scenario::Diagnose,
        }
    }

    pub fn apply(&self, cfg: &mut ExperimentConfig) {
        match self {
            Self::StaticKyle(a) => a.apply(&mut cfg.static_kyle),
            Self::Kyle(a) => a.apply(&mut cfg.kyle),
            Self::Dynamic(a) => a.apply(&mut cfg.dynamic),
            Self::Bridge(a) => a.apply(&mut cfg.bridge),
            Self::Filter(a) => a.apply(&mut cfg.filter),
            Self::Riskaverse(a) => a.apply(&mut cfg.riskaverse),
            Self::Diagnose(a) => a.apply(&mut cfg.diagnose),
        }
    }
}

#[derive(Debug, Args)]
pub struct StaticKyleArgs {
    /// Prior mean of the asset value [default: 0]
    #[arg(long, allow_negative_numbers = true)]
    pub mu: Option<f64>,
    /// Standard deviation of the asset value [default: 1]
    #[arg(long)]
    pub sigma_v: Option<f64>,
    /// Standard deviation of noise-trader demand [default: 1]
    #[arg(long)]
    pub sigma_n: Option<f64>,
}

impl StaticKyleArgs {
    fn apply(&self, p: &mut StaticKyleParams) {
        set(&mut p.mu, self.mu);
        set(&mut p.sigma_v, self.sigma_v);
        set(&mut p.sigma_n, self.sigma_n);
    }
}

#[derive(Debug, Args)]
pub struct ValuationArgs {
    /// Terminal valuation f [default: phi]
    #[arg(long = "f", value_enum)]
    pub kind: Option<ValuationKind>,
    /// Lower bound for scaled-phi [default: 0]
    #[arg(long = "f-lower", allow_negative_numbers = true)]
    pub lower: Option<f64>,
    /// Upper bound for scaled-phi [default: 1]
    #[arg(long = "f-upper", allow_negative_numbers = true)]
    pub upper: Option<f64>,
    /// Amplitude for tanh [default: 1]
    #[arg(long = "f-amplitude")]
    pub amplitude: Option<f64>,
    /// Argument scale for scaled-phi and tanh [default: 1]
    #[arg(long = "f-scale")]
    pub scale: Option<f64>,
}

impl ValuationArgs {
    fn apply(&self, p: &mut ValuationParams) {
        set(&mut p.kind, self.kind);
        set(&mut p.lower, self.lower);
        set(&mut p.upper, self.upper);
        set(&mut p.amplitude, self.amplitude);
        set(&mut p.scale, self.scale);
    }
}

#[derive(Debug, Args)]
pub struct SignalArgs {
    /// Fix the insider's signal on every path [default: drawn per path]
    #[arg(long, allow_negative_numbers = true, conflicts_with = "sampled")]
    pub z: Option<f64>,
    /// Draw the signal per path even if the config fixes it
    #[arg(long)]
    pub sampled: bool,
    /// Record every n-th grid point in CSV output [default: 1]
    #[arg(long)]
    pub stride: Option<usize>,
    /// Series written to CSV, comma separated [default: B,Z,theta,Y,S,W]
    #[arg(long, value_delimiter = ',')]
    pub series: Option<Vec<String>>,
}

impl SignalArgs {
    fn apply(&self, z: &mut Option<f64>, stride: &mut usize, series: &mut Vec<String>) {
        if self.sampled {
            *z = None;
        } else if self.z.is_some() {
            *z = self.z;
        }
        set(stride, self.stride);
        set(series, self.series.clone());
    }
}

#[derive(Debug, Args)]
pub struct KyleArgs {
    #[command(flatten)]
    pub valuation: ValuationArgs,
    #[command(flatten)]
    pub signal: SignalArgs,
    /// Insider strategy [default: equilibrium]
    #[arg(long, value_enum)]
    pub strategy: Option<StrategyName>,
    /// Bridge intensity for k-bridge [default: 2]
    #[arg(long)]
    pub k: Option<f64>,
    /// Trading rate for constant [default: 1]
    #[arg(long, allow_negative_numbers = true)]
    pub rate: Option<f64>,
    /// Block size for jump [default: 0.5]
    #[arg(long, allow_negative_numbers = true)]
    pub jump_size: Option<f64>,
    /// Block time for jump [default: 0.5]
    #[arg(long)]
    pub jump_time: Option<f64>,
}

impl KyleArgs {
    fn apply(&self, p: &mut KyleParams) {
        self.valuation.apply(&mut p.valuation);
        self.signal.apply(&mut p.z, &mut p.stride, &mut p.series);
        set(&mut p.strategy, self.strategy);
        set(&mut p.k, self.k);
        set(&mut p.rate, self.rate);
        set(&mut p.jump_size, self.jump_size);
        set(&mut p.jump_time, self.jump_time);
    }
}

#[derive(Debug, Args)]
pub struct DynamicArgs {
    #[command(flatten)]
    pub valuation: ValuationArgs,
    #[command(flatten)]
    pub signal: SignalArgs,
    /// Signal volatility, in (0, 1) [default: 0.5]
    #[arg(long)]
    pub sigma: Option<f64>,
}

impl DynamicArgs {
    fn apply(&self, p: &mut DynamicParams) {
        self.valuation.apply(&mut p.valuation);
        self.signal.apply(&mut p.z, &mut p.stride, &mut p.series);
        set(&mut p.sigma, self.sigma);
    }
}

#[derive(Debug, Args)]
pub struct BridgeArgs {
    /// Construction [default: sde]
    #[arg(long, value_enum)]
    pub kind: Option<BridgeKind>,
    /// Value at t = 0 [default: 0]
    #[arg(long, allow_negative_numbers = true)]
    pub start: Option<f64>,
    /// Value at t = 1 [default: 0]
    #[arg(long, allow_negative_numbers = true)]
    pub target: Option<f64>,
    /// Record every n-th grid point in CSV output [default: 1]
    #[arg(long)]
    pub stride: Option<usize>,
}

impl BridgeArgs {
    fn apply(&self, p: &mut BridgeParams) {
        set(&mut p.kind, self.kind);
        set(&mut p.start, self.start);
        set(&mut p.target, self.target);
        set(&mut p.stride, self.stride);
    }
}

#[derive(Debug, Args)]
pub struct FilterArgs {
    /// Model [default: kalman-bucy]
    #[arg(long, value_enum)]
    pub model: Option<FilterModel>,
    /// Signal drift coefficient [default: -1]
    #[arg(long, allow_negative_numbers = true)]
    pub a: Option<f64>,
    /// Observation gain [default: 1]
    #[arg(long, allow_negative_numbers = true)]
    pub c: Option<f64>,
    /// Prior mean [default: 0]
    #[arg(long, allow_negative_numbers = true)]
    pub prior_mean: Option<f64>,
    /// Prior variance [default: 1]
    #[arg(long)]
    pub prior_var: Option<f64>,
    /// Signal volatility of the mean-reverting model [default: 0.5]
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Prior variance of the mean-reverting model [default: 1]
    #[arg(long)]
    pub s0: Option<f64>,
    /// Particle count [default: 10000]
    #[arg(long)]
    pub particles: Option<usize>,
    /// Resample when ESS drops below this share of particles [default: 0.5]
    #[arg(long)]
    pub resample_fraction: Option<f64>,
}

impl FilterArgs {
    fn apply(&self, p: &mut FilterParams) {
        set(&mut p.model, self.model);
        set(&mut p.a, self.a);
        set(&mut p.c, self.c);
        set(&mut p.prior_mean, self.prior_mean);
        set(&mut p.prior_var, self.prior_var);
        set(&mut p.sigma, self.sigma);
        set(&mut p.s0, self.s0);
        set(&mut p.particles, self.particles);
        set(&mut p.resample_fraction, self.resample_fraction);
    }
}

#[derive(Debug, Args)]
pub struct RiskAverseArgs {
    /// Risk aversion ρ ≥ 0 [default: 1]
    #[arg(long)]
    pub rho: Option<f64>,
    /// Number of market makers [default: 1]
    #[arg(long)]
    pub n_mm: Option<u32>,
    /// Target law of the asset value, standardised [default: gaussian]
    #[arg(long, value_enum)]
    pub law: Option<LawKind>,
    /// Damping of the law update, in (0, 1] [default: 0.5]
    #[arg(long)]
    pub damping: Option<f64>,
    /// Iteration cap [default: 50]
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Wasserstein-1 stopping tolerance [default: 0.001]
    #[arg(long)]
    pub tol_w1: Option<f64>,
    /// Knots of the terminal map [default: 200]
    #[arg(long)]
    pub map_knots: Option<usize>,
}

impl RiskAverseArgs {
    fn apply(&self, p: &mut RiskAverseParams) {
        set(&mut p.rho, self.rho);
        set(&mut p.n_mm, self.n_mm);
        if let Some(kind) = self.law {
            p.law = LawParams::standard(kind);
        }
        set(&mut p.damping, self.damping);
        set(&mut p.max_iters, self.max_iters);
        set(&mut p.tol_w1, self.tol_w1);
        set(&mut p.map_knots, self.map_knots);
    }
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    /// CSV ensemble written by kyle, dynamic or bridge
    #[arg(long, value_name = "PATH")]
    pub input: Option<PathBuf>,
    /// Test to run [default: bm]
    #[arg(long, value_enum)]
    pub test: Option<DiagnoseTest>,
    /// Column family to test [default: Y for bm, S for martingale]
    #[arg(long)]
    pub series: Option<String>,
    /// Family-wise significance level [default: 0.01]
    #[arg(long)]
    pub level: Option<f64>,
    /// Increment blocks for bm [default: 10]
    #[arg(long)]
    pub blocks: Option<usize>,
    /// Checkpoint times, comma separated [default: 0.25,0.5,0.75]
    #[arg(long, value_delimiter = ',')]
    pub checkpoints: Option<Vec<f64>>,
    /// Signal volatility for the variance curve [default: 0]
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Relative tolerance of the variance curve [default: 0.05]
    #[arg(long)]
    pub rel_tol: Option<f64>,
}

impl DiagnoseArgs {
    fn apply(&self, p: &mut DiagnoseParams) {
        if self.input.is_some() {
            p.input.clone_from(&self.input);
        }
        set(&mut p.test, self.test);
        if self.series.is_some() {
            p.series.clone_from(&self.series);
        }
        set(&mut p.level, self.level);
        set(&mut p.blocks, self.blocks);
        set(&mut p.checkpoints, self.checkpoints.clone());
        set(&mut p.sigma, self.sigma);
        set(&mut p.rel_tol, self.rel_tol);
    }
}
