//! Simulation and numerics for the continuous-time Kyle insider-trading
//! model: the one-period equilibrium, linear and nonlinear filters,
//! conditioned diffusions, heat-equation pricing rules, equilibrium
//! ensembles, statistical diagnostics and a fixed-point solver for
//! risk-averse market makers.
//!
//! All randomness flows through [`RngStream`]; ensembles derive one
//! substream per path and collect in path order, so results depend only on
//! the seed, never on the thread count.

// `!(x > 0.0)` is the idiom that also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bridges;
pub mod diagnostics;
pub mod equilibrium;
pub mod error;
pub mod filtering;
pub mod pricing;
pub mod risk_averse;
pub mod static_kyle;
pub mod stoch;

pub use equilibrium::{Conditioning, Ensemble, Market, MarketConfig, PathBundle, Series, SignalKind, StrategyKind};
pub use error::{Error, Result};
pub use pricing::{PriceTable, PricingRule, TerminalValuation};
pub use stoch::{RngStream, SamplePath, TimeGrid};
