//! Conditioned diffusions: Brownian bridges by the anticipative and the SDE
//! construction, the h-transform drift of a general scalar diffusion, and a
//! positivity-preserving sampler for the three-dimensional Bessel bridge.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stoch::{sample_brownian, RngStream, SamplePath, TimeGrid};

/// Bridge from `start` at `t = 0` to `target` at `t = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BridgeSpec {
    pub target: f64,
    pub start: f64,
}

impl BridgeSpec {
    pub const HORIZON: f64 = 1.0;

    pub fn new(target: f64) -> Result<Self> {
        Self::from_to(0.0, target)
    }

    pub fn from_to(start: f64, target: f64) -> Result<Self> {
        if !(start.is_finite() && target.is_finite()) {
            return Err(Error::NonFinite("bridge endpoints"));
        }
        Ok(Self { target, start })
    }
}

/// `X_t = start + B_t + (target − start − B_1)·t` for a given Brownian path.
pub fn bridge_from_brownian(spec: &BridgeSpec, brownian: &SamplePath) -> SamplePath {
    let grid = brownian.grid();
    let b1 = brownian.terminal();
    let values = grid
        .times()
        .zip(brownian.values())
        .map(|(t, &b)| spec.start + b + (spec.target - spec.start - b1) * t)
        .collect();
    SamplePath::new(grid, values).expect("finite bridge")
}

/// Anticipative construction: needs the terminal value of the driving noise.
pub fn sample_bridge_anticipative(spec: &BridgeSpec, grid: TimeGrid, stream: &RngStream) -> SamplePath {
    bridge_from_brownian(spec, &sample_brownian(grid, stream))
}

/// Exact one-step law of the k-bridge
/// `dY = dB + k·(T_t − Y)/(1 − t) dt`, where the target `T` is either fixed
/// (`target_vol = 0`) or moves as `dT = target_vol·dW` with `W ⟂ B`.
///
/// With `U = T − Y`, the integrating factor `(1 − t)^{−k}` gives
/// `U_t = U_s·ρ^k + ∫_s^t ((1−t)/(1−r))^k (target_vol·dW_r − dB_r)`,
/// `ρ = (1−t)/(1−s)`. Each noise contributes the Gaussian pair
/// `(ΔW, ∫φ dW)` which is sampled jointly, so the Brownian increment driving
/// the step is available alongside `Y`. The step into `t = 1` lands exactly
/// on the target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BridgeTransition {
    pub k: f64,
    pub target_vol: f64,
}

/// Result of one [`BridgeTransition`] step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BridgeStep {
    pub y: f64,
    pub target: f64,
    /// Increment of the driving Brownian motion `B` over the step.
    pub db: f64,
}

impl BridgeTransition {
    pub fn brownian() -> Self {
        Self {
            k: 1.0,
            target_vol: 0.0,
        }
    }

    pub fn new(k: f64, target_vol: f64) -> Result<Self> {
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::invalid("k", "bridge strength must be positive"));
        }
        if !(target_vol >= 0.0 && target_vol.is_finite()) {
            return Err(Error::invalid("target_vol", "must be non-negative"));
        }
        Ok(Self { k, target_vol })
    }

    /// Standard normals consumed per step.
    pub fn draws_per_step(&self) -> usize {
        if self.target_vol > 0.0 {
            4
        } else {
            2
        }
    }

    /// Moments `(decay, A, C)` of the step `[t0, t1]`: `decay = ρ^k`,
    /// `A = ∫φ dr`, `C = ∫φ² dr` with `φ(r) = ((1−t1)/(1−r))^k`.
    fn moments(&self, t0: f64, t1: f64) -> (f64, f64, f64) {
        let a = 1.0 - t0;
        let b = 1.0 - t1;
        if b <= 0.0 {
            return (0.0, 0.0, 0.0);
        }
        let ln_r = (b / a).ln();
        // (1 − ρ^m)/m, continuous through m = 0.
        let g = |m: f64| {
            if m.abs() < 1e-12 {
                -ln_r
            } else {
                -(m * ln_r).exp_m1() / m
            }
        };
        ((self.k * ln_r).exp(), b * g(self.k - 1.0), b * g(2.0 * self.k - 1.0))
    }

    /// Advances `(y, target)` from `t0` to `t1` using standard normal draws
    /// `z` (only the first [`draws_per_step`](Self::draws_per_step) are read).
    pub fn step(&self, t0: f64, t1: f64, y: f64, target: f64, z: [f64; 4]) -> BridgeStep {
        let dt = t1 - t0;
        let (decay, a, c) = self.moments(t0, t1);
        let resid_sd = (c - a * a / dt).max(0.0).sqrt();
        let sd = dt.sqrt();
        let db = sd * z[0];
        let int_b = a / dt * db + resid_sd * z[1];
        let mut u = (target - y) * decay - int_b;
        let mut target_next = target;
        if self.target_vol > 0.0 {
            let dw = sd * z[2];
            let int_w = a / dt * dw + resid_sd * z[3];
            u += self.target_vol * int_w;
            target_next += self.target_vol * dw;
        }
        BridgeStep {
            y: if t1 >= 1.0 { target_next } else { target_next - u },
            target: target_next,
            db,
        }
    }

    pub fn draw(&self, rng: &mut impl Rng) -> [f64; 4] {
        let mut z = [0.0; 4];
        for zi in z.iter_mut().take(self.draws_per_step()) {
            *zi = StandardNormal.sample(rng);
        }
        z
    }
}

/// SDE construction `dX = dB + (x − X)/(1 − t) dt`, stepped with the exact
/// Gaussian transition `N(X + Δ(x−X)/(1−t), Δ(1−t−Δ)/(1−t))`. The terminal
/// value equals the target exactly.
pub fn bridge_sde_from_normals(spec: &BridgeSpec, grid: TimeGrid, normals: &[[f64; 4]]) -> SamplePath {
    assert_eq!(normals.len(), grid.n_steps(), "one draw per step");
    let tr = BridgeTransition::brownian();
    let mut x = spec.start;
    let mut values = Vec::with_capacity(grid.len());
    values.push(x);
    for (k, z) in normals.iter().enumerate() {
        x = tr.step(grid.t(k), grid.t(k + 1), x, spec.target, *z).y;
        values.push(x);
    }
    SamplePath::new(grid, values).expect("finite bridge")
}

pub fn sample_bridge_sde(spec: &BridgeSpec, grid: TimeGrid, stream: &RngStream) -> SamplePath {
    let tr = BridgeTransition::brownian();
    let mut rng = stream.rng();
    let normals: Vec<[f64; 4]> = (0..grid.n_steps()).map(|_| tr.draw(&mut rng)).collect();
    bridge_sde_from_normals(spec, grid, &normals)
}

/// Transition density `p(t, y, z)` of a scalar diffusion and its derivative
/// in the starting point `y`.
pub trait TransitionDensity: Send + Sync {
    fn density(&self, t: f64, y: f64, z: f64) -> f64;
    fn density_dy(&self, t: f64, y: f64, z: f64) -> f64;
}

/// Standard Brownian motion.
#[derive(Debug, Clone, Copy, Default)]
pub struct BrownianDensity;

impl TransitionDensity for BrownianDensity {
    fn density(&self, t: f64, y: f64, z: f64) -> f64 {
        gaussian_pdf(z, y, t)
    }

    fn density_dy(&self, t: f64, y: f64, z: f64) -> f64 {
        gaussian_pdf(z, y, t) * (z - y) / t
    }
}

/// `dX = −κ·X dt + σ dB`.
#[derive(Debug, Clone, Copy)]
pub struct OrnsteinUhlenbeckDensity {
    pub kappa: f64,
    pub sigma: f64,
}

impl OrnsteinUhlenbeckDensity {
    fn moments(&self, t: f64, y: f64) -> (f64, f64) {
        let e = (-self.kappa * t).exp();
        let var = self.sigma * self.sigma * -(-2.0 * self.kappa * t).exp_m1() / (2.0 * self.kappa);
        (y * e, var)
    }
}

impl TransitionDensity for OrnsteinUhlenbeckDensity {
    fn density(&self, t: f64, y: f64, z: f64) -> f64 {
        let (m, v) = self.moments(t, y);
        gaussian_pdf(z, m, v)
    }

    fn density_dy(&self, t: f64, y: f64, z: f64) -> f64 {
        let (m, v) = self.moments(t, y);
        gaussian_pdf(z, m, v) * (z - m) / v * (-self.kappa * t).exp()
    }
}

fn gaussian_pdf(z: f64, mean: f64, var: f64) -> f64 {
    let d = z - mean;
    (-0.5 * d * d / var).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
}

type StateFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Base diffusion `dX = b(X) dt + σ(X) dB` together with its transition
/// density; conditioning on `X_1 = x` adds `σ²·p_y/p` to the drift.
#[derive(Clone)]
pub struct HTransformDrift {
    base_drift: StateFn,
    base_vol: StateFn,
    density: Arc<dyn TransitionDensity>,
}

impl fmt::Debug for HTransformDrift {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HTransformDrift").finish_non_exhaustive()
    }
}

impl HTransformDrift {
    pub fn new(
        base_drift: impl Fn(f64) -> f64 + Send + Sync + 'static,
        base_vol: impl Fn(f64) -> f64 + Send + Sync + 'static,
        density: impl TransitionDensity + 'static,
    ) -> Self {
        Self {
            base_drift: Arc::new(base_drift),
            base_vol: Arc::new(base_vol),
            density: Arc::new(density),
        }
    }

    pub fn brownian() -> Self {
        Self::new(|_| 0.0, |_| 1.0, BrownianDensity)
    }

    pub fn ornstein_uhlenbeck(kappa: f64, sigma: f64) -> Self {
        Self::new(
            move |y| -kappa * y,
            move |_| sigma,
            OrnsteinUhlenbeckDensity { kappa, sigma },
        )
    }

    pub fn density(&self) -> &dyn TransitionDensity {
        self.density.as_ref()
    }
}

/// Drift at `(t, y)` of the diffusion conditioned to sit at `x` at time 1:
/// `b(y) + σ²(y)·p_y(1−t, y, x)/p(1−t, y, x)`.
pub fn h_transform_drift(ht: &HTransformDrift, t: f64, y: f64, x: f64) -> Result<f64> {
    if !(t < 1.0) {
        return Err(Error::Domain(format!("h-transform drift needs t < 1, got {t}")));
    }
    let tau = 1.0 - t;
    let p = ht.density.density(tau, y, x);
    if !(p > 0.0 && p.is_finite()) {
        return Err(Error::Domain(format!(
            "transition density p({tau}, {y}, {x}) = {p} underflows"
        )));
    }
    let s = (ht.base_vol)(y);
    if !(s > 0.0) {
        return Err(Error::Domain(format!("base volatility {s} must be positive")));
    }
    Ok((ht.base_drift)(y) + s * s * ht.density.density_dy(tau, y, x) / p)
}

/// Three-dimensional Bessel bridge from `x_start` to 0:
/// `dX = dB + (1/X − X/(1−t)) dt`.
///
/// The `1/X` term is treated implicitly: each step solves
/// `X' = c + Δ/X'` for its positive root, with
/// `c = X − Δ·X/(1−t) + √Δ·ξ`, so every step stays strictly positive and a
/// start at 0 leaves the origin immediately.
pub fn sample_bessel3_bridge(x_start: f64, grid: TimeGrid, stream: &RngStream) -> Result<SamplePath> {
    if !(x_start >= 0.0 && x_start.is_finite()) {
        return Err(Error::invalid("x_start", "must be non-negative"));
    }
    let mut rng = stream.rng();
    let dt = grid.dt();
    let sd = dt.sqrt();
    let mut x = x_start;
    let mut values = Vec::with_capacity(grid.len());
    values.push(x);
    for k in 0..grid.n_steps() {
        let t = grid.t(k);
        let z: f64 = StandardNormal.sample(&mut rng);
        let c = x - dt * x / (1.0 - t) + sd * z;
        let disc = (c * c + 4.0 * dt).sqrt();
        // Cancellation-free positive root.
        x = if c >= 0.0 {
            0.5 * (c + disc)
        } else {
            2.0 * dt / (disc - c)
        };
        values.push(x);
    }
    SamplePath::new(grid, values)
}

/// Terminal tolerance `10·√Δt` for the Bessel bridge scheme.
pub fn bessel_terminal_tolerance(grid: TimeGrid) -> f64 {
    10.0 * grid.dt().sqrt()
}
