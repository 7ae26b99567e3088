use std::fmt;
use std::sync::Arc;

use rand_distr::{Distribution, StandardNormal};

use super::{rk4_step, FilterOutput};
use crate::error::{Error, Result};
use crate::stoch::{RngStream, SamplePath, TimeGrid};

type TimeFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Hidden signal `X_t = X₀ + ∫σ(s) dW_s` with `X₀ ~ N(0, s0)`, observed through
/// `dY = dB + (X − Y)/f(t) dt`.
#[derive(Clone)]
pub struct MeanRevertingObsModel {
    sigma_fn: TimeFn,
    f_fn: TimeFn,
    s0: f64,
}

impl fmt::Debug for MeanRevertingObsModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MeanRevertingObsModel")
            .field("s0", &self.s0)
            .finish_non_exhaustive()
    }
}

impl MeanRevertingObsModel {
    pub fn new(
        sigma_fn: impl Fn(f64) -> f64 + Send + Sync + 'static,
        f_fn: impl Fn(f64) -> f64 + Send + Sync + 'static,
        s0: f64,
    ) -> Result<Self> {
        if !(s0 >= 0.0 && s0.is_finite()) {
            return Err(Error::invalid("s0", "prior variance must be non-negative"));
        }
        Ok(Self {
            sigma_fn: Arc::new(sigma_fn),
            f_fn: Arc::new(f_fn),
            s0,
        })
    }

    /// Constant signal volatility with the gain `f(t) = s(t) − t`, where
    /// `s(t) = s0 + σ²t`. Under this choice the conditional variance is
    /// exactly `s(t) − t`.
    pub fn self_consistent(sigma: f64, s0: f64) -> Result<Self> {
        let s2 = sigma * sigma;
        if s0 + s2 - 1.0 < -1e-12 {
            return Err(Error::invalid("s0", "s(t) − t must stay non-negative on [0, 1]"));
        }
        Self::new(move |_| sigma, move |t| s0 + s2 * t - t, s0)
    }

    pub fn sigma(&self, t: f64) -> f64 {
        (self.sigma_fn)(t)
    }

    pub fn gain(&self, t: f64) -> f64 {
        (self.f_fn)(t)
    }

    pub fn s0(&self) -> f64 {
        self.s0
    }

    /// `v' = σ²(t) − v²/f²(t)`, i.e. `f²v' + v² = σ²f²`.
    pub fn variance_rhs(&self, t: f64, v: f64) -> f64 {
        let s = self.sigma(t);
        let f = self.gain(t);
        s * s - v * v / (f * f)
    }

    fn check_gain(&self, grid: TimeGrid) -> Result<()> {
        let dt = grid.dt();
        for k in 0..grid.n_steps() {
            let t = grid.t(k);
            for tt in [t, t + 0.5 * dt] {
                let f = self.gain(tt);
                if !(f > 0.0 && f.is_finite()) {
                    return Err(Error::Domain(format!(
                        "observation gain f({tt}) = {f} must stay positive before t = 1"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Euler simulation of `(X, Y)`.
    pub fn simulate(&self, grid: TimeGrid, stream: &RngStream) -> Result<(SamplePath, SamplePath)> {
        self.check_gain(grid)?;
        let mut rng = stream.rng();
        let dt = grid.dt();
        let sd = dt.sqrt();
        let z0: f64 = StandardNormal.sample(&mut rng);
        let mut x = self.s0.sqrt() * z0;
        let mut y = 0.0;
        let mut xs = vec![x];
        let mut ys = vec![y];
        for k in 0..grid.n_steps() {
            let t = grid.t(k);
            let dw: f64 = StandardNormal.sample(&mut rng);
            let db: f64 = StandardNormal.sample(&mut rng);
            let y_next = y + (x - y) / self.gain(t) * dt + sd * db;
            x += self.sigma(t) * sd * dw;
            y = y_next;
            xs.push(x);
            ys.push(y);
        }
        Ok((SamplePath::new(grid, xs)?, SamplePath::new(grid, ys)?))
    }
}

/// Filter for [`MeanRevertingObsModel`].
///
/// Variance: RK4 on `f²v' + v² = σ²f²` from `v(0) = s0`. Mean:
/// `dX̂ = (v/f)·dN` with `dN = dY − (X̂ − Y)/f dt`. When `f(1) = 0` the
/// variance equation forces `v(1) = 0`, which is imposed directly since the
/// right-hand side is singular there.
pub fn mean_reverting_obs_filter(model: &MeanRevertingObsModel, observations: &SamplePath) -> Result<FilterOutput> {
    let grid = observations.grid();
    model.check_gain(grid)?;
    let dt = grid.dt();
    let y = observations.values();
    let n = grid.n_steps();
    let mut m = 0.0;
    let mut v = model.s0;
    let mut means = vec![m];
    let mut vars = vec![v];
    let mut innovations = Vec::with_capacity(n);
    for k in 0..n {
        let t = grid.t(k);
        let f = model.gain(t);
        let dn = (y[k + 1] - y[k]) - (m - y[k]) / f * dt;
        innovations.push(dn);
        m += v / f * dn;
        let f_end = model.gain(grid.t(k + 1));
        v = if k + 1 == n && f_end.abs() < 1e-12 {
            0.0
        } else {
            rk4_step(|s, v| model.variance_rhs(s, v), t, v, dt)
        };
        means.push(m);
        vars.push(v);
    }
    Ok(FilterOutput {
        mean: SamplePath::new(grid, means)?,
        variance: SamplePath::new(grid, vars)?,
        innovations,
    })
}
