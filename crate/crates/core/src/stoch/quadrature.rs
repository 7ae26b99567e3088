use crate::error::{Error, Result};

/// Gauss–Hermite rule for expectations against the standard normal density:
/// `E[g(ξ)] ≈ Σ wᵢ g(nodeᵢ)`, exact for polynomials of degree `2·order − 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussQuadrature {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussQuadrature {
    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes.iter().copied().zip(self.weights.iter().copied())
    }

    /// `E[g(ξ)]` for `ξ ~ N(0, 1)`.
    pub fn expect(&self, mut g: impl FnMut(f64) -> f64) -> f64 {
        self.iter().map(|(x, w)| w * g(x)).sum()
    }
}

/// Builds the probabilists' Gauss–Hermite rule of the given order.
///
/// Roots of the orthonormal Hermite polynomials are found by Newton iteration
/// on the three-term recurrence, which keeps the tiny tail weights accurate
/// in relative terms.
pub fn gauss_quadrature(order: usize) -> Result<GaussQuadrature> {
    if order < 2 {
        return Err(Error::invalid("order", "quadrature order must be at least 2"));
    }
    let n = order;
    let nf = n as f64;
    let pim4 = std::f64::consts::PI.powf(-0.25);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut z = 0.0_f64;
    for i in 0..n.div_ceil(2) {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.855_75 * (2.0 * nf + 1.0).powf(-0.166_67),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..200 {
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    // Physicists' rule on e^{-u²} → probabilists' rule on N(0, 1).
    let scale = std::f64::consts::PI.sqrt();
    let mut pairs: Vec<(f64, f64)> = x
        .iter()
        .zip(&w)
        .map(|(&u, &wu)| (u * std::f64::consts::SQRT_2, wu / scale))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = pairs.iter().map(|p| p.1).sum();
    Ok(GaussQuadrature {
        nodes: pairs.iter().map(|p| p.0).collect(),
        weights: pairs.iter().map(|p| p.1 / total).collect(),
    })
}
