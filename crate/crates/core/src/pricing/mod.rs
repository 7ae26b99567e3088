//! Pricing rules `H(t, y) = E f(y + √(1−t)·ξ)`, the backward heat flow of a
//! terminal valuation `f`, with Kyle's lambda `H_y`, the level-set inverse
//! `ξ(t, a)` and the insider value function `Ψ^a(t, x)`.

mod table;
mod valuation;

pub use table::PriceTable;
pub use valuation::{CustomValuation, MonotoneInterp, TerminalValuation};

use crate::error::{Error, Result};
use crate::stoch::{gauss_quadrature, GaussQuadrature};

/// Pricing rule realized by Gauss–Hermite quadrature against `f`.
/// Immutable after construction.
#[derive(Debug, Clone)]
pub struct PricingRule {
    terminal: TerminalValuation,
    quadrature: GaussQuadrature,
}

impl PricingRule {
    pub const DEFAULT_ORDER: usize = 64;

    pub fn new(terminal: TerminalValuation) -> Result<Self> {
        Self::with_order(terminal, Self::DEFAULT_ORDER)
    }

    pub fn with_order(terminal: TerminalValuation, order: usize) -> Result<Self> {
        Ok(Self {
            terminal,
            quadrature: gauss_quadrature(order)?,
        })
    }

    pub fn terminal(&self) -> &TerminalValuation {
        &self.terminal
    }

    pub fn quadrature(&self) -> &GaussQuadrature {
        &self.quadrature
    }

    /// Open interval of attainable prices.
    pub fn range(&self) -> (f64, f64) {
        self.terminal.bounds().unwrap_or((f64::NEG_INFINITY, f64::INFINITY))
    }

    /// `H(t, y)`; equals `f(y)` at `t ≥ 1`.
    pub fn h(&self, t: f64, y: f64) -> f64 {
        if t >= 1.0 {
            return self.terminal.eval(y);
        }
        let sd = (1.0 - t).sqrt();
        self.quadrature.expect(|x| self.terminal.eval(y + sd * x))
    }

    /// Kyle's lambda `H_y(t, y)`. Uses `f'` when the valuation supplies it,
    /// otherwise a central difference with step `1e-5·(1 + |y|)`.
    pub fn h_y(&self, t: f64, y: f64) -> f64 {
        let sd = (1.0 - t).max(0.0).sqrt();
        if self.terminal.derivative(0.0).is_some() {
            if sd == 0.0 {
                return self.terminal.derivative(y).unwrap_or(f64::NAN);
            }
            return self
                .quadrature
                .expect(|x| self.terminal.derivative(y + sd * x).unwrap_or(f64::NAN));
        }
        let h = 1e-5 * (1.0 + y.abs());
        (self.h(t, y + h) - self.h(t, y - h)) / (2.0 * h)
    }

    /// `ξ(t, a)`: the unique `y` with `H(t, y) = a`.
    pub fn inverse_in_y(&self, t: f64, a: f64) -> Result<f64> {
        self.inverse_near(t, a, 0.0)
    }

    /// [`inverse_in_y`](Self::inverse_in_y) warm-started at `guess`.
    ///
    /// Expands a bracket around the guess, then runs Newton steps that fall
    /// back to bisection whenever they leave the bracket, so convergence
    /// rests on monotonicity alone.
    pub fn inverse_near(&self, t: f64, a: f64, guess: f64) -> Result<f64> {
        let (lo_f, hi_f) = self.range();
        let out_of_range = || Error::OutOfRange {
            value: a,
            lo: lo_f,
            hi: hi_f,
            t,
        };
        if !a.is_finite() || a <= lo_f || a >= hi_f {
            return Err(out_of_range());
        }
        let g = |y: f64| self.h(t, y) - a;
        let guess = if guess.is_finite() { guess } else { 0.0 };
        let (mut lo, mut hi) = (guess - 0.5, guess + 0.5);
        let mut step = 1.0;
        while g(lo) > 0.0 {
            lo -= step;
            step *= 2.0;
            if lo < -1e8 {
                return Err(out_of_range());
            }
        }
        step = 1.0;
        while g(hi) < 0.0 {
            hi += step;
            step *= 2.0;
            if hi > 1e8 {
                return Err(out_of_range());
            }
        }
        let tol = 2.0 * f64::EPSILON * (1.0 + a.abs());
        let mut y = guess.clamp(lo, hi);
        for _ in 0..200 {
            let v = g(y);
            if v.abs() <= tol {
                return Ok(y);
            }
            if v < 0.0 {
                lo = y;
            } else {
                hi = y;
            }
            let d = self.h_y(t, y);
            let newton = y - v / d;
            let next = if d > 0.0 && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if (next - y).abs() <= 4.0 * f64::EPSILON * (1.0 + y.abs())
                || hi - lo <= 4.0 * f64::EPSILON * (1.0 + y.abs())
            {
                return Ok(next);
            }
            y = next;
        }
        Ok(y)
    }

    /// Max over `ts × ys` of `|H_t + ½H_yy|` by central differences
    /// (`Δt = 1e-4`, `Δy = 1e-3`). Requires `t ≤ 0.99`.
    pub fn pde_residual(&self, ts: &[f64], ys: &[f64]) -> Result<f64> {
        const DT: f64 = 1e-4;
        const DY: f64 = 1e-3;
        let mut worst: f64 = 0.0;
        for &t in ts {
            if !(0.0..=0.99 + 1e-12).contains(&t) {
                return Err(Error::Domain(format!("residual needs t in [0, 0.99], got {t}")));
            }
            for &y in ys {
                let h_t = (self.h(t + DT, y) - self.h(t - DT, y)) / (2.0 * DT);
                let h_yy = (self.h(t, y + DY) - 2.0 * self.h(t, y) + self.h(t, y - DY)) / (DY * DY);
                worst = worst.max((h_t + 0.5 * h_yy).abs());
            }
        }
        Ok(worst)
    }

    /// Insider value function
    /// `Ψ^a(t, x) = ∫_{ξ(t,a)}^x (H(t,u) − a) du + ½∫_t^1 H_y(s, ξ(s,a)) ds`.
    ///
    /// The space integral is adaptive Simpson; the time integral is the
    /// midpoint rule on 1000 cells, Richardson-corrected against 500 cells.
    pub fn psi(&self, t: f64, x: f64, a: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::invalid("t", format!("must lie in [0, 1], got {t}")));
        }
        if !x.is_finite() {
            return Err(Error::NonFinite("psi state"));
        }
        let xi = self.inverse_in_y(t, a)?;
        let space = adaptive_simpson(&|u| self.h(t, u) - a, xi, x, 1e-13);
        if t == 1.0 {
            return Ok(space);
        }
        let fine = self.level_lambda_midpoint(t, a, xi, 1000)?;
        let coarse = self.level_lambda_midpoint(t, a, xi, 500)?;
        Ok(space + 0.5 * (fine + (fine - coarse) / 3.0))
    }

    fn level_lambda_midpoint(&self, t: f64, a: f64, xi_t: f64, n: usize) -> Result<f64> {
        let h = (1.0 - t) / n as f64;
        let mut xi = xi_t;
        let mut acc = 0.0;
        for i in 0..n {
            let s = t + (i as f64 + 0.5) * h;
            xi = self.inverse_near(s, a, xi)?;
            acc += self.h_y(s, xi);
        }
        Ok(acc * h)
    }
}

/// Adaptive Simpson on `[a, b]` (either orientation).
fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    if a == b {
        return 0.0;
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    recurse(f, a, b, fa, fm, fb, whole, tol, 40)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn phi_rule() -> PricingRule {
        PricingRule::new(TerminalValuation::phi()).unwrap()
    }

    #[test]
    fn identity_is_harmonic() {
        let r = PricingRule::new(TerminalValuation::Identity).unwrap();
        for &(t, y) in &[(0.0, 0.3), (0.5, -2.0), (1.0, 4.0)] {
            assert!((r.h(t, y) - y).abs() < 1e-13);
            assert!((r.h_y(t, y) - 1.0).abs() < 1e-13);
            assert!((r.inverse_in_y(t, y).unwrap() - y).abs() < 1e-12);
        }
    }

    #[test]
    fn simpson_polynomial() {
        let v = adaptive_simpson(&|x| x * x * x - x, 2.0, -1.0, 1e-12);
        assert!((v - (-(16.0 / 4.0 - 2.0) + (0.25 - 0.5))).abs() < 1e-12);
    }

    #[test]
    fn range_errors() {
        let r = phi_rule();
        for a in [0.0, 1.0, -0.1, f64::NAN] {
            assert!(matches!(r.inverse_in_y(0.5, a), Err(Error::OutOfRange { .. })));
        }
    }

    #[test]
    fn phi_symmetry() {
        let r = phi_rule();
        assert!((r.h(0.0, 0.0) - 0.5).abs() < 1e-15);
        assert!(r.inverse_in_y(0.0, 0.5).unwrap().abs() < 1e-12);
    }

    #[test]
    fn numeric_lambda_without_derivative() {
        let c = CustomValuation::new("cube-root-ish", |y: f64| y + 0.1 * y.tanh(), None);
        let r = PricingRule::new(TerminalValuation::Custom(c)).unwrap();
        let d = r.h_y(0.3, 0.2);
        let e = PricingRule::new(TerminalValuation::Custom(
            CustomValuation::new("same", |y: f64| y + 0.1 * y.tanh(), None)
                .with_derivative(|y: f64| 1.0 + 0.1 / y.cosh().powi(2)),
        ))
        .unwrap()
        .h_y(0.3, 0.2);
        assert!((d - e).abs() < 1e-8);
    }

    #[test]
    fn psi_terminal_boundary() {
        let r = phi_rule();
        let a = r.h(1.0, 0.4);
        assert!(r.psi(1.0, 0.4, a).unwrap().abs() < 1e-14);
        assert!(r.psi(1.0, 0.9, a).unwrap() > 0.0);
    }

    #[test]
    fn monotone_checks() {
        assert!(TerminalValuation::phi().check_monotone().is_ok());
        assert!(TerminalValuation::tanh(1.0, 0.5).unwrap().check_monotone().is_ok());
        let bad = CustomValuation::new("bump", |y: f64| (-y * y).exp(), Some((0.0, 1.0)));
        assert!(TerminalValuation::Custom(bad).check_monotone().is_err());
    }

    #[test]
    fn interp_uniform_and_general_agree() {
        let xs: Vec<f64> = (0..=40).map(|i| -2.0 + 0.1 * i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x: &f64| x.tanh()).collect();
        let u = MonotoneInterp::new(xs.clone(), ys.clone()).unwrap();
        let mut xs2 = xs;
        xs2[3] += 1e-3;
        let g = MonotoneInterp::new(xs2, ys).unwrap();
        for &x in &[-5.0, -1.95, 0.0, 0.33, 1.999, 2.0, 7.0] {
            let (a, b) = (u.eval(x), g.eval(x));
            if !(-1.8..=-1.6).contains(&x) {
                assert!((a - b).abs() < 1e-12, "{x}: {a} vs {b}");
            }
        }
        assert!((u.eval(3.0) - (2f64.tanh() + (2f64.tanh() - 1.9f64.tanh()) * 10.0)).abs() < 1e-12);
    }
}
