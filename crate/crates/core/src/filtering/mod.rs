//! Continuous-time filtering on a uniform grid: the Kalman–Bucy filter and its
//! Riccati variance, the filter for an observation that mean-reverts towards
//! the hidden signal, and a bootstrap particle filter for general scalar
//! diffusions.

mod kalman_bucy;
mod mean_reverting;
mod particle;

pub use kalman_bucy::{kalman_bucy_filter, riccati_closed_form, KalmanBucyModel, RiccatiClosedForm};
pub use mean_reverting::{mean_reverting_obs_filter, MeanRevertingObsModel};
pub use particle::{particle_filter, ParticleFilterConfig, ParticleOutput, ScalarDiffusion};

use crate::stoch::{SamplePath, TimeGrid};

/// Conditional mean and variance of the signal at one grid time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterState {
    pub t: f64,
    pub mean: f64,
    pub variance: f64,
}

/// Filter output on the observation grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterOutput {
    pub mean: SamplePath,
    pub variance: SamplePath,
    /// Innovation increments `dN_k = dY_k − ĥ_k·Δt`, one per step.
    pub innovations: Vec<f64>,
}

impl FilterOutput {
    pub fn grid(&self) -> TimeGrid {
        self.mean.grid()
    }

    pub fn state(&self, k: usize) -> FilterState {
        FilterState {
            t: self.grid().t(k),
            mean: self.mean.at(k),
            variance: self.variance.at(k),
        }
    }
}

/// Classical fourth-order Runge–Kutta step for a scalar ODE `y' = f(t, y)`.
pub fn rk4_step(f: impl Fn(f64, f64) -> f64, t: f64, y: f64, h: f64) -> f64 {
    let k1 = f(t, y);
    let k2 = f(t + 0.5 * h, y + 0.5 * h * k1);
    let k3 = f(t + 0.5 * h, y + 0.5 * h * k2);
    let k4 = f(t + h, y + h * k3);
    y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rk4_exponential() {
        let mut y = 1.0;
        let h = 0.01;
        for k in 0..100 {
            y = rk4_step(|_, y| y, k as f64 * h, y, h);
        }
        assert!((y - 1f64.exp()).abs() < 1e-9);
    }
}
