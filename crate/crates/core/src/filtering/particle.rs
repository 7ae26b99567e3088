use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::KalmanBucyModel;
use crate::error::{Error, Result};
use crate::stoch::{RngStream, SamplePath, TimeGrid};

type StateFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Scalar signal `dX = b(X) dt + σ(X) dB` with `X₀ ~ N(m₀, v₀)`, observed as
/// `dY = h(X) dt + dW`.
#[derive(Clone)]
pub struct ScalarDiffusion {
    drift: StateFn,
    vol: StateFn,
    obs_gain: StateFn,
    pub prior_mean: f64,
    pub prior_var: f64,
}

impl fmt::Debug for ScalarDiffusion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarDiffusion")
            .field("prior_mean", &self.prior_mean)
            .field("prior_var", &self.prior_var)
            .finish_non_exhaustive()
    }
}

impl ScalarDiffusion {
    pub fn new(
        drift: impl Fn(f64) -> f64 + Send + Sync + 'static,
        vol: impl Fn(f64) -> f64 + Send + Sync + 'static,
        obs_gain: impl Fn(f64) -> f64 + Send + Sync + 'static,
        prior_mean: f64,
        prior_var: f64,
    ) -> Result<Self> {
        if !(prior_var >= 0.0 && prior_var.is_finite() && prior_mean.is_finite()) {
            return Err(Error::invalid("prior_var", "prior must be a finite Gaussian"));
        }
        Ok(Self {
            drift: Arc::new(drift),
            vol: Arc::new(vol),
            obs_gain: Arc::new(obs_gain),
            prior_mean,
            prior_var,
        })
    }

    pub fn drift(&self, x: f64) -> f64 {
        (self.drift)(x)
    }

    pub fn vol(&self, x: f64) -> f64 {
        (self.vol)(x)
    }

    pub fn obs_gain(&self, x: f64) -> f64 {
        (self.obs_gain)(x)
    }

    /// Euler simulation of signal and observation.
    pub fn simulate(&self, grid: TimeGrid, stream: &RngStream) -> Result<(SamplePath, SamplePath)> {
        let mut rng = stream.rng();
        let dt = grid.dt();
        let sd = dt.sqrt();
        let z0: f64 = StandardNormal.sample(&mut rng);
        let mut x = self.prior_mean + self.prior_var.sqrt() * z0;
        let mut y = 0.0;
        let mut xs = vec![x];
        let mut ys = vec![y];
        for _ in 0..grid.n_steps() {
            let db: f64 = StandardNormal.sample(&mut rng);
            let dw: f64 = StandardNormal.sample(&mut rng);
            y += self.obs_gain(x) * dt + sd * dw;
            x += self.drift(x) * dt + self.vol(x) * sd * db;
            xs.push(x);
            ys.push(y);
        }
        Ok((SamplePath::new(grid, xs)?, SamplePath::new(grid, ys)?))
    }
}

impl From<KalmanBucyModel> for ScalarDiffusion {
    fn from(m: KalmanBucyModel) -> Self {
        let (a, c) = (m.a, m.c);
        ScalarDiffusion::new(move |x| a * x, |_| 1.0, move |x| c * x, m.prior_mean, m.prior_var)
            .expect("validated Kalman–Bucy model")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParticleFilterConfig {
    pub n_particles: usize,
    /// Resample when the effective sample size falls below this fraction.
    pub resample_fraction: f64,
}

impl Default for ParticleFilterConfig {
    fn default() -> Self {
        Self {
            n_particles: 10_000,
            resample_fraction: 0.5,
        }
    }
}

/// Weighted posterior summary at each grid time.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleOutput {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    pub ess: Vec<f64>,
    pub resamples: usize,
    /// Steps at which the effective sample size dropped below 1% of the
    /// particle count.
    pub degeneracy_steps: Vec<usize>,
}

/// Bootstrap particle approximation of the filtering distribution.
///
/// Particles move by Euler steps of the signal and are reweighted by the
/// Girsanov likelihood of each observation increment,
/// `exp(h(x)·ΔY − ½h(x)²Δt)`; multinomial resampling fires when the
/// effective sample size drops below `resample_fraction · n_particles`.
pub fn particle_filter(
    model: &ScalarDiffusion,
    config: &ParticleFilterConfig,
    stream: &RngStream,
    observations: &SamplePath,
) -> Result<ParticleOutput> {
    let n = config.n_particles;
    if n < 100 {
        return Err(Error::invalid("n_particles", "need at least 100 particles"));
    }
    if !(config.resample_fraction > 0.0 && config.resample_fraction <= 1.0) {
        return Err(Error::invalid("resample_fraction", "must lie in (0, 1]"));
    }
    let grid = observations.grid();
    let dt = grid.dt();
    let sd = dt.sqrt();
    let obs = observations.values();
    let mut rng = stream.rng();

    let prior_sd = model.prior_var.sqrt();
    let mut particles: Vec<f64> = (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            model.prior_mean + prior_sd * z
        })
        .collect();
    let mut log_w = vec![0.0; n];
    let mut weights = vec![1.0 / n as f64; n];
    let mut scratch = vec![0.0; n];

    let mut out = ParticleOutput {
        mean: Vec::with_capacity(grid.len()),
        variance: Vec::with_capacity(grid.len()),
        ess: Vec::with_capacity(grid.len()),
        resamples: 0,
        degeneracy_steps: Vec::new(),
    };
    record(&particles, &weights, &mut out);

    for k in 0..grid.n_steps() {
        let dy = obs[k + 1] - obs[k];
        for (lw, &x) in log_w.iter_mut().zip(&particles) {
            let h = model.obs_gain(x);
            *lw += h * dy - 0.5 * h * h * dt;
        }
        for x in particles.iter_mut() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *x += model.drift(*x) * dt + model.vol(*x) * sd * z;
        }
        normalise(&log_w, &mut weights);
        let ess = effective_sample_size(&weights);
        if ess < 0.01 * n as f64 {
            out.degeneracy_steps.push(k + 1);
        }
        record(&particles, &weights, &mut out);
        if ess < config.resample_fraction * n as f64 {
            multinomial_resample(&mut particles, &weights, &mut scratch, &mut rng);
            log_w.iter_mut().for_each(|w| *w = 0.0);
            weights.iter_mut().for_each(|w| *w = 1.0 / n as f64);
            out.resamples += 1;
        }
    }
    Ok(out)
}

fn normalise(log_w: &[f64], weights: &mut [f64]) {
    let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for (w, &lw) in weights.iter_mut().zip(log_w) {
        *w = (lw - max).exp();
        total += *w;
    }
    weights.iter_mut().for_each(|w| *w /= total);
}

fn effective_sample_size(weights: &[f64]) -> f64 {
    1.0 / weights.iter().map(|w| w * w).sum::<f64>()
}

fn record(particles: &[f64], weights: &[f64], out: &mut ParticleOutput) {
    let mean: f64 = particles.iter().zip(weights).map(|(x, w)| w * x).sum();
    let var: f64 = particles
        .iter()
        .zip(weights)
        .map(|(x, w)| w * (x - mean) * (x - mean))
        .sum();
    out.mean.push(mean);
    out.variance.push(var);
    out.ess.push(effective_sample_size(weights));
}

/// Multinomial resampling by inverting the weight CDF at sorted uniforms.
fn multinomial_resample(particles: &mut [f64], weights: &[f64], scratch: &mut [f64], rng: &mut impl Rng) {
    let n = particles.len();
    let mut u: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    u.sort_by(f64::total_cmp);
    let mut cum = weights[0];
    let mut j = 0;
    for (i, &ui) in u.iter().enumerate() {
        while ui > cum && j + 1 < n {
            j += 1;
            cum += weights[j];
        }
        scratch[i] = particles[j];
    }
    particles.copy_from_slice(scratch);
}
