use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{rk4_step, FilterOutput};
use crate::error::{Error, Result};
use crate::stoch::{RngStream, SamplePath, TimeGrid};

/// Signal `dX = a·X dt + dB`, observation `dY = c·X dt + dW`, `X₀ ~ N(m, σ²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KalmanBucyModel {
    pub a: f64,
    pub c: f64,
    pub prior_mean: f64,
    pub prior_var: f64,
}

impl KalmanBucyModel {
    pub fn new(a: f64, c: f64, prior_mean: f64, prior_var: f64) -> Result<Self> {
        if !(a.is_finite() && c.is_finite() && prior_mean.is_finite()) {
            return Err(Error::NonFinite("Kalman–Bucy coefficients"));
        }
        if !(prior_var >= 0.0 && prior_var.is_finite()) {
            return Err(Error::invalid("prior_var", "must be non-negative"));
        }
        Ok(Self {
            a,
            c,
            prior_mean,
            prior_var,
        })
    }

    /// Right-hand side of the variance equation `v' = 1 + 2a·v − c²·v²`.
    pub fn riccati_rhs(&self, v: f64) -> f64 {
        1.0 + 2.0 * self.a * v - self.c * self.c * v * v
    }

    /// Euler simulation of the signal and observation paths.
    pub fn simulate(&self, grid: TimeGrid, stream: &RngStream) -> (SamplePath, SamplePath) {
        let mut rng = stream.rng();
        let dt = grid.dt();
        let sd = dt.sqrt();
        let z0: f64 = StandardNormal.sample(&mut rng);
        let mut x = self.prior_mean + self.prior_var.sqrt() * z0;
        let mut y = 0.0;
        let mut xs = Vec::with_capacity(grid.len());
        let mut ys = Vec::with_capacity(grid.len());
        xs.push(x);
        ys.push(y);
        for _ in 0..grid.n_steps() {
            let db: f64 = StandardNormal.sample(&mut rng);
            let dw: f64 = StandardNormal.sample(&mut rng);
            y += self.c * x * dt + sd * dw;
            x += self.a * x * dt + sd * db;
            xs.push(x);
            ys.push(y);
        }
        (
            SamplePath::new(grid, xs).expect("finite signal"),
            SamplePath::new(grid, ys).expect("finite observation"),
        )
    }
}

/// Kalman–Bucy filter on the observation grid.
///
/// The conditional variance follows the Riccati ODE (fourth-order
/// Runge–Kutta at grid resolution); the mean follows
/// `dX̂ = a·X̂ dt + c·v·dN` with innovation `dN = dY − c·X̂ dt`.
pub fn kalman_bucy_filter(model: &KalmanBucyModel, observations: &SamplePath) -> Result<FilterOutput> {
    let grid = observations.grid();
    let dt = grid.dt();
    let obs = observations.values();
    if obs.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("observations"));
    }
    let mut m = model.prior_mean;
    let mut v = model.prior_var;
    let mut means = Vec::with_capacity(grid.len());
    let mut vars = Vec::with_capacity(grid.len());
    let mut innovations = Vec::with_capacity(grid.n_steps());
    means.push(m);
    vars.push(v);
    for k in 0..grid.n_steps() {
        let dy = obs[k + 1] - obs[k];
        let dn = dy - model.c * m * dt;
        innovations.push(dn);
        m += model.a * m * dt + model.c * v * dn;
        v = rk4_step(|_, v| model.riccati_rhs(v), grid.t(k), v, dt);
        means.push(m);
        vars.push(v);
    }
    Ok(FilterOutput {
        mean: SamplePath::new(grid, means)?,
        variance: SamplePath::new(grid, vars)?,
        innovations,
    })
}

/// Closed-form solution `v(t) = (δβe^{λt} − γ)/(δe^{λt} + 1)` of the Riccati
/// equation, where `β > 0` and `−γ < 0` are the roots of `1 + 2ax − c²x²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiccatiClosedForm {
    pub beta: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub delta: f64,
}

impl RiccatiClosedForm {
    pub fn variance(&self, t: f64) -> f64 {
        let e = (-self.lambda * t).exp();
        // Divided through by e^{λt} so large t stays finite.
        (self.delta * self.beta - self.gamma * e) / (self.delta + e)
    }

    /// Steady state `v(∞)`.
    pub fn limit(&self) -> f64 {
        self.beta
    }
}

pub fn riccati_closed_form(model: &KalmanBucyModel) -> Result<RiccatiClosedForm> {
    let c2 = model.c * model.c;
    if c2 == 0.0 {
        return Err(Error::NoClosedForm(
            "c = 0: variance is linear, v(t) = σ² + t when a = 0",
        ));
    }
    let root = (model.a * model.a + c2).sqrt();
    let beta = (model.a + root) / c2;
    let gamma = (root - model.a) / c2;
    let s2 = model.prior_var;
    if (beta - s2).abs() <= 1e-15 * beta.max(1.0) {
        return Err(Error::NoClosedForm("prior variance equals the stationary root"));
    }
    Ok(RiccatiClosedForm {
        beta,
        gamma,
        lambda: c2 * (beta + gamma),
        delta: (s2 + gamma) / (beta - s2),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat_obs(n: usize) -> SamplePath {
        let g = TimeGrid::new(n).unwrap();
        SamplePath::new(g, vec![0.0; g.len()]).unwrap()
    }

    #[test]
    fn no_observation_information() {
        let model = KalmanBucyModel::new(0.0, 0.0, 0.3, 0.5).unwrap();
        let out = kalman_bucy_filter(&model, &flat_obs(100)).unwrap();
        for k in 0..=100 {
            let s = out.state(k);
            assert!((s.variance - (0.5 + s.t)).abs() < 1e-12);
            assert_eq!(s.mean, 0.3);
        }
    }

    #[test]
    fn stationary_variance_stays_put() {
        let model = KalmanBucyModel::new(0.0, 1.0, 0.0, 1.0).unwrap();
        let g = TimeGrid::new(200).unwrap();
        let (_, y) = model.simulate(g, &RngStream::new(3, 0));
        let out = kalman_bucy_filter(&model, &y).unwrap();
        assert!(out.variance.values().iter().all(|&v| (v - 1.0).abs() < 1e-14));
    }

    #[test]
    fn closed_form_roots() {
        let model = KalmanBucyModel::new(0.0, 1.0, 0.0, 2.0).unwrap();
        let cf = riccati_closed_form(&model).unwrap();
        assert!((cf.beta - 1.0).abs() < 1e-15);
        assert!((cf.gamma - 1.0).abs() < 1e-15);
        assert!((cf.lambda - 2.0).abs() < 1e-15);
        assert!((cf.variance(0.0) - 2.0).abs() < 1e-14);
        assert!((cf.variance(50.0) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn roots_solve_quadratic() {
        for &(a, c) in &[(-1.0, 2.0), (0.5, 0.3), (3.0, 1.0), (-2.0, 0.1)] {
            let m = KalmanBucyModel::new(a, c, 0.0, 0.25).unwrap();
            let cf = riccati_closed_form(&m).unwrap();
            assert!(cf.beta > 0.0 && cf.gamma > 0.0);
            assert!(m.riccati_rhs(cf.beta).abs() < 1e-10);
            assert!(m.riccati_rhs(-cf.gamma).abs() < 1e-10);
        }
    }

    #[test]
    fn prior_above_stationary_root() {
        // δ < −1 here; the denominator must not vanish.
        let m = KalmanBucyModel::new(0.0, 1.0, 0.0, 5.0).unwrap();
        let cf = riccati_closed_form(&m).unwrap();
        let mut prev = cf.variance(0.0);
        assert!((prev - 5.0).abs() < 1e-12);
        for k in 1..=1000 {
            let v = cf.variance(k as f64 * 0.01);
            assert!(v < prev && v > 1.0);
            prev = v;
        }
    }

    #[test]
    fn degenerate_cases() {
        assert!(matches!(
            riccati_closed_form(&KalmanBucyModel::new(0.0, 0.0, 0.0, 1.0).unwrap()),
            Err(Error::NoClosedForm(_))
        ));
        assert!(riccati_closed_form(&KalmanBucyModel::new(0.0, 1.0, 0.0, 1.0).unwrap()).is_err());
        assert!(KalmanBucyModel::new(0.0, 1.0, 0.0, -1.0).is_err());
    }
}
