use rand_distr::{Distribution, StandardNormal};

use super::{RngStream, SamplePath, TimeGrid};
use crate::error::{ensure_finite, Error, Result};

/// Standard Brownian motion on `grid`, driven by the stream's normal draws.
pub fn sample_brownian(grid: TimeGrid, stream: &RngStream) -> SamplePath {
    let mut rng = stream.rng();
    let normals: Vec<f64> = (0..grid.n_steps()).map(|_| StandardNormal.sample(&mut rng)).collect();
    brownian_from_normals(grid, &normals)
}

/// Brownian path from standard normal draws `ξ_k`, increments `√Δt·ξ_k`.
///
/// Panics if `normals.len() != grid.n_steps()`.
pub fn brownian_from_normals(grid: TimeGrid, normals: &[f64]) -> SamplePath {
    assert_eq!(normals.len(), grid.n_steps(), "one draw per step");
    let sd = grid.dt().sqrt();
    let mut values = Vec::with_capacity(grid.len());
    let mut b = 0.0;
    values.push(b);
    for &z in normals {
        b += sd * z;
        values.push(b);
    }
    SamplePath::new(grid, values).expect("finite normals give a finite path")
}

/// One Euler–Maruyama step `x + drift·dt + vol·noise`, where `noise ~ N(0, dt)`
/// is supplied by the caller.
pub fn euler_step(x: f64, drift: f64, vol: f64, dt: f64, noise: f64) -> Result<f64> {
    ensure_finite(x, "euler state")?;
    ensure_finite(drift, "euler drift")?;
    ensure_finite(vol, "euler volatility")?;
    ensure_finite(noise, "euler noise")?;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid("dt", "must be positive and finite"));
    }
    Ok(x + drift * dt + vol * noise)
}
