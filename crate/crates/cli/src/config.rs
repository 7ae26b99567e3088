//! Experiment configuration. Values resolve as built-in defaults, then the
//! TOML file, then command-line flags.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use kylelab_core::equilibrium::StrategyKind;
use kylelab_core::pricing::TerminalValuation;
use kylelab_core::risk_averse::TargetLaw;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Csv,
    #[default]
    Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub paths: usize,
    pub steps: usize,
    pub out: Option<PathBuf>,
    pub format: Format,
    /// Exit with status 2 when a scenario check fails.
    pub assert: bool,
    #[serde(rename = "static-kyle")]
    pub static_kyle: StaticKyleParams,
    pub kyle: KyleParams,
    pub dynamic: DynamicParams,
    pub bridge: BridgeParams,
    pub filter: FilterParams,
    pub riskaverse: RiskAverseParams,
    pub diagnose: DiagnoseParams,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            paths: 1000,
            steps: 2000,
            out: None,
            format: Format::Summary,
            assert: false,
            static_kyle: Default::default(),
            kyle: Default::default(),
            dynamic: Default::default(),
            bridge: Default::default(),
            filter: Default::default(),
            riskaverse: Default::default(),
            diagnose: Default::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str, path: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::Config {
            path: path.to_path_buf(),
            message: e.to_string().trim_end().to_owned(),
        })
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text, path)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StaticKyleParams {
    pub mu: f64,
    pub sigma_v: f64,
    pub sigma_n: f64,
}

impl Default for StaticKyleParams {
    fn default() -> Self {
        Self {
            mu: 0.0,
            sigma_v: 1.0,
            sigma_n: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ValuationKind {
    /// Standard normal CDF.
    Phi,
    /// `lower + (upper − lower)·Φ(y/scale)`.
    ScaledPhi,
    /// `amplitude·tanh(y/scale)`.
    Tanh,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValuationParams {
    pub kind: ValuationKind,
    pub lower: f64,
    pub upper: f64,
    pub amplitude: f64,
    pub scale: f64,
}

impl Default for ValuationParams {
    fn default() -> Self {
        Self {
            kind: ValuationKind::Phi,
            lower: 0.0,
            upper: 1.0,
            amplitude: 1.0,
            scale: 1.0,
        }
    }
}

impl ValuationParams {
    pub fn build(&self) -> Result<TerminalValuation> {
        Ok(match self.kind {
            ValuationKind::Phi => TerminalValuation::phi(),
            ValuationKind::ScaledPhi => TerminalValuation::scaled_phi(self.lower, self.upper, self.scale)?,
            ValuationKind::Tanh => TerminalValuation::tanh(self.amplitude, self.scale)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum StrategyName {
    Equilibrium,
    KBridge,
    Constant,
    Jump,
}

fn all_series() -> Vec<String> {
    ["B", "Z", "theta", "Y", "S", "W"].map(String::from).to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KyleParams {
    /// Insider's signal; drawn per path when absent.
    pub z: Option<f64>,
    pub strategy: StrategyName,
    pub k: f64,
    pub rate: f64,
    pub jump_size: f64,
    pub jump_time: f64,
    pub stride: usize,
    pub series: Vec<String>,
    pub valuation: ValuationParams,
}

impl Default for KyleParams {
    fn default() -> Self {
        Self {
            z: None,
            strategy: StrategyName::Equilibrium,
            k: 2.0,
            rate: 1.0,
            jump_size: 0.5,
            jump_time: 0.5,
            stride: 1,
            series: all_series(),
            valuation: Default::default(),
        }
    }
}

impl KyleParams {
    pub fn strategy_kind(&self) -> StrategyKind {
        match self.strategy {
            StrategyName::Equilibrium => StrategyKind::EquilibriumBridge,
            StrategyName::KBridge => StrategyKind::KBridge { k: self.k },
            StrategyName::Constant => StrategyKind::ConstantRate { rate: self.rate },
            StrategyName::Jump => StrategyKind::Jump {
                size: self.jump_size,
                time: self.jump_time,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DynamicParams {
    pub sigma: f64,
    pub z: Option<f64>,
    pub stride: usize,
    pub series: Vec<String>,
    pub valuation: ValuationParams,
}

impl Default for DynamicParams {
    fn default() -> Self {
        Self {
            sigma: 0.5,
            z: None,
            stride: 1,
            series: all_series(),
            valuation: Default::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum BridgeKind {
    /// Drift `(target − x)/(1 − t)` integrated on the grid.
    Sde,
    /// `B_t − t·B_1` plus the straight line.
    Anticipative,
    /// Three-dimensional Bessel bridge to 0.
    Bessel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BridgeParams {
    pub kind: BridgeKind,
    pub start: f64,
    /// Ignored by the Bessel bridge, which always ends at 0.
    pub target: f64,
    pub stride: usize,
}

impl Default for BridgeParams {
    fn default() -> Self {
        Self {
            kind: BridgeKind::Sde,
            start: 0.0,
            target: 0.0,
            stride: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum FilterModel {
    KalmanBucy,
    MeanReverting,
    /// Bootstrap particle filter run alongside Kalman–Bucy on the linear model.
    Particle,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterParams {
    pub model: FilterModel,
    pub a: f64,
    pub c: f64,
    pub prior_mean: f64,
    pub prior_var: f64,
    pub sigma: f64,
    pub s0: f64,
    pub particles: usize,
    pub resample_fraction: f64,
}

impl Default for FilterParams {
    fn default() -> Self {
        Self {
            model: FilterModel::KalmanBucy,
            a: -1.0,
            c: 1.0,
            prior_mean: 0.0,
            prior_var: 1.0,
            sigma: 0.5,
            s0: 1.0,
            particles: 10_000,
            resample_fraction: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum LawKind {
    Gaussian,
    Logistic,
    Uniform,
}

/// Target law of the asset value. `a` and `b` are (mean, sd), (loc, scale)
/// or (lo, hi) depending on `kind`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LawParams {
    pub kind: LawKind,
    pub a: f64,
    pub b: f64,
}

impl Default for LawParams {
    fn default() -> Self {
        Self::standard(LawKind::Gaussian)
    }
}

impl LawParams {
    pub fn standard(kind: LawKind) -> Self {
        let (a, b) = match kind {
            LawKind::Uniform => (-1.0, 1.0),
            _ => (0.0, 1.0),
        };
        Self { kind, a, b }
    }

    pub fn build(&self) -> TargetLaw {
        match self.kind {
            LawKind::Gaussian => TargetLaw::Gaussian {
                mean: self.a,
                sd: self.b,
            },
            LawKind::Logistic => TargetLaw::Logistic {
                loc: self.a,
                scale: self.b,
            },
            LawKind::Uniform => TargetLaw::Uniform { lo: self.a, hi: self.b },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RiskAverseParams {
    pub rho: f64,
    pub n_mm: u32,
    pub law: LawParams,
    pub damping: f64,
    pub max_iters: usize,
    pub tol_w1: f64,
    pub map_knots: usize,
}

impl Default for RiskAverseParams {
    fn default() -> Self {
        Self {
            rho: 1.0,
            n_mm: 1,
            law: Default::default(),
            damping: 0.5,
            max_iters: 50,
            tol_w1: 1e-3,
            map_knots: 200,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum DiagnoseTest {
    /// Increment suite on the `Y` columns.
    Bm,
    /// Martingale suite on the `S` columns.
    Martingale,
    /// `E[(Z − Y_t)²]` against `(1 − σ²)(1 − t)`.
    Variance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnoseParams {
    pub input: Option<PathBuf>,
    pub test: DiagnoseTest,
    /// Column family to test; defaults to `Y` for bm and `S` for martingale.
    pub series: Option<String>,
    pub level: f64,
    pub blocks: usize,
    pub checkpoints: Vec<f64>,
    pub sigma: f64,
    pub rel_tol: f64,
}

impl Default for DiagnoseParams {
    fn default() -> Self {
        Self {
            input: None,
            test: DiagnoseTest::Bm,
            series: None,
            level: 0.01,
            blocks: 10,
            checkpoints: vec![0.25, 0.5, 0.75],
            sigma: 0.0,
            rel_tol: 0.05,
        }
    }
}
