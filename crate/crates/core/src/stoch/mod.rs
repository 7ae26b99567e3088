//! Shared simulation substrate: time grids, seeded random streams, sample
//! paths, SDE stepping and Gauss–Hermite quadrature.

mod grid;
mod quadrature;
mod rng;
mod sde;

pub use grid::{SamplePath, TimeGrid};
pub use quadrature::{gauss_quadrature, GaussQuadrature};
pub use rng::RngStream;
pub use sde::{brownian_from_normals, euler_step, sample_brownian};

/// Standard normal CDF.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal density.
pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Standard normal quantile. Returns ±∞ at the endpoints.
pub fn norm_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let x = -std::f64::consts::SQRT_2 * statrs::function::erf::erfc_inv(2.0 * p);
    // erfc_inv alone is good to about 1e-11; one Newton step polishes it.
    let pdf = norm_pdf(x);
    if pdf > 0.0 {
        x - (norm_cdf(x) - p) / pdf
    } else {
        x
    }
}
