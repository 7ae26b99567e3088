use rayon::prelude::*;

use super::PricingRule;
use crate::error::{Error, Result};
use crate::stoch::TimeGrid;

/// `H` and `H_y` tabulated at every time of a grid on a uniform `y` mesh,
/// read back by cubic Hermite interpolation. Queries outside the mesh fall
/// back to direct quadrature, and the terminal row is `f` itself.
#[derive(Debug, Clone)]
pub struct PriceTable {
    rule: PricingRule,
    grid: TimeGrid,
    y_min: f64,
    dy: f64,
    ny: usize,
    h: Vec<f64>,
    hy: Vec<f64>,
}

impl PriceTable {
    pub const HALF_WIDTH: f64 = 8.0;
    pub const DEFAULT_DY: f64 = 0.02;

    pub fn build(rule: &PricingRule, grid: TimeGrid) -> Self {
        Self::with_resolution(rule, grid, Self::HALF_WIDTH, Self::DEFAULT_DY).expect("default resolution is valid")
    }

    pub fn with_resolution(rule: &PricingRule, grid: TimeGrid, half_width: f64, dy: f64) -> Result<Self> {
        if !(half_width > 0.0 && dy > 0.0 && dy < half_width) {
            return Err(Error::invalid("dy", "need 0 < dy < half_width"));
        }
        let ny = (2.0 * half_width / dy).round() as usize + 1;
        let y_min = -half_width;
        let rows = grid.n_steps();
        let mut h = vec![0.0; rows * ny];
        let mut hy = vec![0.0; rows * ny];
        h.par_chunks_mut(ny)
            .zip(hy.par_chunks_mut(ny))
            .enumerate()
            .for_each(|(k, (hrow, hyrow))| {
                let t = grid.t(k);
                for j in 0..ny {
                    let y = y_min + j as f64 * dy;
                    hrow[j] = rule.h(t, y);
                    hyrow[j] = rule.h_y(t, y);
                }
            });
        Ok(Self {
            rule: rule.clone(),
            grid,
            y_min,
            dy,
            ny,
            h,
            hy,
        })
    }

    pub fn rule(&self) -> &PricingRule {
        &self.rule
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    fn locate(&self, y: f64) -> Option<(usize, f64)> {
        let s = (y - self.y_min) / self.dy;
        if !(s >= 0.0 && s < (self.ny - 1) as f64) {
            return None;
        }
        let j = s.floor() as usize;
        Some((j, s - j as f64))
    }

    /// `H(t_k, y)`.
    pub fn h(&self, k: usize, y: f64) -> f64 {
        if k >= self.grid.n_steps() {
            return self.rule.terminal().eval(y);
        }
        let Some((j, u)) = self.locate(y) else {
            return self.rule.h(self.grid.t(k), y);
        };
        let i = k * self.ny + j;
        let (p0, p1) = (self.h[i], self.h[i + 1]);
        let (m0, m1) = (self.hy[i] * self.dy, self.hy[i + 1] * self.dy);
        let u2 = u * u;
        let u3 = u2 * u;
        (2.0 * u3 - 3.0 * u2 + 1.0) * p0 + (u3 - 2.0 * u2 + u) * m0 + (-2.0 * u3 + 3.0 * u2) * p1 + (u3 - u2) * m1
    }

    /// `H_y(t_k, y)`, linear in `y` between mesh points.
    pub fn h_y(&self, k: usize, y: f64) -> f64 {
        if k >= self.grid.n_steps() {
            return self.rule.h_y(1.0, y);
        }
        let Some((j, u)) = self.locate(y) else {
            return self.rule.h_y(self.grid.t(k), y);
        };
        let i = k * self.ny + j;
        self.hy[i] + u * (self.hy[i + 1] - self.hy[i])
    }
}
