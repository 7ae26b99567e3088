//! Independent reference computations used as oracles by the integration
//! tests. Nothing here calls into the algorithms under test.

#![allow(dead_code)]

use std::f64::consts::{PI, SQRT_2};

pub fn phi_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

pub fn phi_cdf(x: f64) -> f64 {
    0.5 * erfc_oracle(-x / SQRT_2)
}

// Maclaurin core plus continued-fraction tail; independent of the library's
// erfc.
fn erfc_oracle(x: f64) -> f64 {
    if x < 0.0 {
        return 2.0 - erfc_oracle(-x);
    }
    if x < 2.5 {
        // erf by its Maclaurin series.
        let mut term = x;
        let mut sum = x;
        let x2 = x * x;
        for k in 1..200 {
            let n = k as f64;
            term *= -x2 / n;
            let add = term / (2.0 * n + 1.0);
            sum += add;
            if add.abs() <= 1e-17 * sum.abs() {
                break;
            }
        }
        1.0 - 2.0 / PI.sqrt() * sum
    } else {
        // Lentz evaluation of the Laplace continued fraction.
        let tiny = 1e-300;
        let mut f = x;
        let mut c = x;
        let mut d = 0.0;
        for k in 1..200 {
            let a = k as f64 / 2.0;
            d = x + a * d;
            d = if d.abs() < tiny { tiny } else { d };
            c = x + a / c;
            c = if c.abs() < tiny { tiny } else { c };
            d = 1.0 / d;
            let delta = c * d;
            f *= delta;
            if (delta - 1.0).abs() < 1e-16 {
                break;
            }
        }
        (-x * x).exp() / (f * PI.sqrt())
    }
}

/// Inverse of [`phi_cdf`] by bisection.
pub fn phi_quantile(p: f64) -> f64 {
    let (mut lo, mut hi) = (-40.0, 40.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if phi_cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Closed-form price for `f = Φ`: `E[Φ(y + √(1−t)ξ)] = Φ(y/√(2−t))`.
pub fn h_phi(t: f64, y: f64) -> f64 {
    phi_cdf(y / (2.0 - t).sqrt())
}

pub fn h_phi_y(t: f64, y: f64) -> f64 {
    let s = (2.0 - t).sqrt();
    phi_pdf(y / s) / s
}

/// `ξ(t, a)` for `f = Φ`.
pub fn xi_phi(t: f64, a: f64) -> f64 {
    (2.0 - t).sqrt() * phi_quantile(a)
}

/// Brute-force midpoint Riemann sums for the insider's value function with
/// `f = Φ`: `∫_{ξ(t,a)}^{x} (H(t,u) − a) du + ½∫_t^1 H_y(s, ξ(s,a)) ds`.
pub fn psi_phi_riemann(t: f64, x: f64, a: f64, n: usize) -> f64 {
    let xi = xi_phi(t, a);
    let h = (x - xi) / n as f64;
    let space: f64 = (0..n).map(|i| h_phi(t, xi + (i as f64 + 0.5) * h) - a).sum::<f64>() * h;
    // ξ(s,a) collapses the quantile once; the bisection is too slow per node.
    let q = phi_quantile(a);
    let ds = (1.0 - t) / n as f64;
    let time: f64 = (0..n)
        .map(|i| {
            let s = t + (i as f64 + 0.5) * ds;
            let r = (2.0 - s).sqrt();
            phi_pdf(q) / r
        })
        .sum::<f64>()
        * ds;
    space + 0.5 * time
}

/// Alternating best responses in the one-period market; returns `(λ, β)`.
pub fn static_best_response(sigma_v: f64, sigma_n: f64, lambda0: f64) -> (f64, f64) {
    let mut lambda = lambda0;
    let mut beta = 0.0;
    for _ in 0..10_000 {
        beta = 1.0 / (2.0 * lambda);
        let next = beta * sigma_v * sigma_v / (beta * beta * sigma_v * sigma_v + sigma_n * sigma_n);
        if (next - lambda).abs() < 1e-15 {
            lambda = next;
            break;
        }
        lambda = next;
    }
    (lambda, beta)
}

/// Posterior mean and variance of `V ~ N(μ, σ_v²)` given
/// `y = β(V − μ) + ν`, `ν ~ N(0, σ_n²)`, by trapezoidal integration of
/// the joint density.
pub fn bayes_posterior(y: f64, mu: f64, sigma_v: f64, sigma_n: f64, beta: f64) -> (f64, f64) {
    let n = 200_000;
    let lo = mu - 12.0 * sigma_v;
    let hi = mu + 12.0 * sigma_v;
    let h = (hi - lo) / n as f64;
    let (mut m0, mut m1, mut m2) = (0.0, 0.0, 0.0);
    for i in 0..=n {
        let v = lo + i as f64 * h;
        let w = if i == 0 || i == n { 0.5 } else { 1.0 };
        let e = beta * (v - mu);
        let dens = phi_pdf((v - mu) / sigma_v) * phi_pdf((y - e) / sigma_n) * w;
        m0 += dens;
        m1 += dens * v;
        m2 += dens * v * v;
    }
    let mean = m1 / m0;
    (mean, m2 / m0 - mean * mean)
}

/// Riccati `v' = 1 + 2a·v − c²v²` integrated by RK4 on a fine step.
pub fn riccati_rk4(a: f64, c: f64, v0: f64, t: f64) -> f64 {
    let f = |v: f64| 1.0 + 2.0 * a * v - c * c * v * v;
    let n = ((t / 1e-4).ceil() as usize).max(1);
    let h = t / n as f64;
    let mut v = v0;
    for _ in 0..n {
        let k1 = f(v);
        let k2 = f(v + 0.5 * h * k1);
        let k3 = f(v + 0.5 * h * k2);
        let k4 = f(v + h * k3);
        v += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    v
}

/// Ornstein–Uhlenbeck transition density `dX = −κX dt + σ dB`.
pub fn ou_density(kappa: f64, sigma: f64, t: f64, y: f64, z: f64) -> f64 {
    let m = y * (-kappa * t).exp();
    let v = sigma * sigma * (1.0 - (-2.0 * kappa * t).exp()) / (2.0 * kappa);
    (-(z - m).powi(2) / (2.0 * v)).exp() / (2.0 * PI * v).sqrt()
}

/// `p_y/p` of the OU density by central differences.
pub fn ou_log_gradient_fd(kappa: f64, sigma: f64, t: f64, y: f64, z: f64) -> f64 {
    let e = 1e-5;
    let up = ou_density(kappa, sigma, t, y + e, z);
    let dn = ou_density(kappa, sigma, t, y - e, z);
    (up - dn) / (2.0 * e) / ou_density(kappa, sigma, t, y, z)
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Sample covariance with the standard error of the product mean.
pub fn covariance_with_se(a: &[f64], b: &[f64]) -> (f64, f64) {
    let (ma, mb) = (mean(a), mean(b));
    let prods: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).collect();
    let c = mean(&prods);
    (c, (variance(&prods) / prods.len() as f64).sqrt())
}
