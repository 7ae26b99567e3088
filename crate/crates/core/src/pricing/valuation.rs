use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::stoch::{norm_cdf, norm_pdf};

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Increasing piecewise-linear map through `(xs[i], ys[i])`, extended
/// linearly beyond the outer knots.
#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneInterp {
    xs: Vec<f64>,
    ys: Vec<f64>,
    slopes: Vec<f64>,
    // (x0, h) when the abscissae are equally spaced: O(1) lookup.
    uniform: Option<(f64, f64)>,
}

impl MonotoneInterp {
    /// Knots must be finite, `xs` strictly increasing and `ys` nondecreasing
    /// and not all equal.
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() != ys.len() || xs.len() < 2 {
            return Err(Error::invalid(
                "knots",
                "need at least two (x, y) pairs of equal length",
            ));
        }
        if xs.iter().chain(&ys).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("interpolation knots"));
        }
        if xs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("knots", "abscissae must be strictly increasing"));
        }
        if ys.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::invalid("knots", "ordinates must be nondecreasing"));
        }
        if ys[0] == ys[ys.len() - 1] {
            return Err(Error::Degenerate("constant interpolated map".into()));
        }
        let slopes = xs
            .windows(2)
            .zip(ys.windows(2))
            .map(|(x, y)| (y[1] - y[0]) / (x[1] - x[0]))
            .collect();
        let n = xs.len() - 1;
        let h = (xs[n] - xs[0]) / n as f64;
        let is_uniform = xs
            .iter()
            .enumerate()
            .all(|(i, &x)| (x - (xs[0] + i as f64 * h)).abs() <= 1e-9 * h);
        Ok(Self {
            uniform: is_uniform.then_some((xs[0], h)),
            xs,
            ys,
            slopes,
        })
    }

    /// Resamples `self` on `n + 1` equally spaced knots over `[lo, hi]`.
    pub fn resample_uniform(&self, lo: f64, hi: f64, n: usize) -> Result<Self> {
        let h = (hi - lo) / n as f64;
        let xs: Vec<f64> = (0..=n).map(|i| lo + i as f64 * h).collect();
        let ys = xs.iter().map(|&x| self.eval(x)).collect();
        Self::new(xs, ys)
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    fn segment(&self, x: f64) -> usize {
        let last = self.slopes.len() - 1;
        match self.uniform {
            Some((x0, h)) => (((x - x0) / h).floor().max(0.0) as usize).min(last),
            None => self.xs.partition_point(|&k| k <= x).saturating_sub(1).min(last),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let i = self.segment(x);
        self.ys[i] + self.slopes[i] * (x - self.xs[i])
    }

    /// Right derivative.
    pub fn slope(&self, x: f64) -> f64 {
        self.slopes[self.segment(x)]
    }
}

/// User-supplied valuation map.
#[derive(Clone)]
pub struct CustomValuation {
    pub name: String,
    f: RealFn,
    df: Option<RealFn>,
    bounds: Option<(f64, f64)>,
}

impl CustomValuation {
    pub fn new(
        name: impl Into<String>,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        bounds: Option<(f64, f64)>,
    ) -> Self {
        Self {
            name: name.into(),
            f: Arc::new(f),
            df: None,
            bounds,
        }
    }

    pub fn with_derivative(mut self, df: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.df = Some(Arc::new(df));
        self
    }
}

impl fmt::Debug for CustomValuation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomValuation")
            .field("name", &self.name)
            .field("has_derivative", &self.df.is_some())
            .field("bounds", &self.bounds)
            .finish()
    }
}

/// Terminal valuation `f(y)`: the price the market converges to when the
/// cumulative order flow ends at `y`.
#[derive(Debug, Clone)]
pub enum TerminalValuation {
    /// `f(y) = y`; unbounded.
    Identity,
    /// `f(y) = lower + (upper − lower)·Φ(y/scale)`.
    ScaledPhi {
        lower: f64,
        upper: f64,
        scale: f64,
    },
    /// `f(y) = amplitude·tanh(y/scale)`.
    Tanh {
        amplitude: f64,
        scale: f64,
    },
    Interpolated(MonotoneInterp),
    Custom(CustomValuation),
}

impl TerminalValuation {
    /// Standard normal CDF.
    pub fn phi() -> Self {
        Self::ScaledPhi {
            lower: 0.0,
            upper: 1.0,
            scale: 1.0,
        }
    }

    pub fn scaled_phi(lower: f64, upper: f64, scale: f64) -> Result<Self> {
        if !(lower.is_finite() && upper.is_finite() && lower < upper) {
            return Err(Error::invalid("bounds", "need finite lower < upper"));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::invalid("scale", "must be positive"));
        }
        Ok(Self::ScaledPhi { lower, upper, scale })
    }

    pub fn tanh(amplitude: f64, scale: f64) -> Result<Self> {
        if !(amplitude > 0.0 && amplitude.is_finite()) {
            return Err(Error::invalid("amplitude", "must be positive"));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::invalid("scale", "must be positive"));
        }
        Ok(Self::Tanh { amplitude, scale })
    }

    pub fn eval(&self, y: f64) -> f64 {
        match self {
            Self::Identity => y,
            Self::ScaledPhi { lower, upper, scale } => lower + (upper - lower) * norm_cdf(y / scale),
            Self::Tanh { amplitude, scale } => amplitude * (y / scale).tanh(),
            Self::Interpolated(m) => m.eval(y),
            Self::Custom(c) => (c.f)(y),
        }
    }

    /// `f'(y)` when known in closed form.
    pub fn derivative(&self, y: f64) -> Option<f64> {
        match self {
            Self::Identity => Some(1.0),
            Self::ScaledPhi { lower, upper, scale } => Some((upper - lower) * norm_pdf(y / scale) / scale),
            Self::Tanh { amplitude, scale } => {
                let c = (y / scale).cosh();
                Some(amplitude / (scale * c * c))
            }
            Self::Interpolated(m) => Some(m.slope(y)),
            Self::Custom(c) => c.df.as_ref().map(|d| d(y)),
        }
    }

    /// `(inf f, sup f)` when `f` is bounded.
    pub fn bounds(&self) -> Option<(f64, f64)> {
        match self {
            Self::Identity | Self::Interpolated(_) => None,
            Self::ScaledPhi { lower, upper, .. } => Some((*lower, *upper)),
            Self::Tanh { amplitude, .. } => Some((-amplitude, *amplitude)),
            Self::Custom(c) => c.bounds,
        }
    }

    pub fn is_bounded(&self) -> bool {
        self.bounds().is_some()
    }

    /// Strict increase on 1000 points of `[−8, 8]`. Equal neighbours are
    /// tolerated only where a bounded `f` has saturated to its bound in
    /// floating point.
    pub fn check_monotone(&self) -> Result<()> {
        let n = 1000;
        let grid = |i: usize| -8.0 + 16.0 * i as f64 / (n - 1) as f64;
        let saturated = |v: f64| match self.bounds() {
            Some((lo, hi)) => {
                let tol = 4.0 * f64::EPSILON * lo.abs().max(hi.abs()).max(1.0);
                v - lo <= tol || hi - v <= tol
            }
            None => false,
        };
        let mut prev = self.eval(grid(0));
        for i in 1..n {
            let y = grid(i);
            let v = self.eval(y);
            if !v.is_finite() {
                return Err(Error::NonFinite("terminal valuation"));
            }
            if v < prev || (v == prev && !saturated(v)) {
                return Err(Error::Domain(format!(
                    "terminal valuation is not strictly increasing near y = {y}"
                )));
            }
            prev = v;
        }
        Ok(())
    }
}
