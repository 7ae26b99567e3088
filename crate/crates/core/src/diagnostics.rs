//! Ensemble statistics that turn equilibrium properties into pass/fail
//! decisions. Every test is a deterministic function of its inputs.
//!
//! Suites combine several z-scores; a suite passes iff every component is
//! below the Bonferroni-adjusted two-sided critical value of its level.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stoch::norm_quantile;

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanEstimate {
    pub mean: f64,
    pub std_err: f64,
    pub n: usize,
}

impl MeanEstimate {
    pub fn from_samples(xs: &[f64]) -> Result<Self> {
        let n = xs.len();
        if n < 2 {
            return Err(Error::Degenerate(format!("need at least two samples, got {n}")));
        }
        let (mean, var) = mean_var(xs);
        Ok(Self {
            mean,
            std_err: (var / n as f64).sqrt(),
            n,
        })
    }

    /// `(mean − target)/std_err`; 0 when both the gap and the error vanish.
    pub fn z_against(&self, target: f64) -> f64 {
        z_score(self.mean - target, self.std_err)
    }

    /// `|mean − target| ≤ k·std_err`.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.std_err
    }
}

/// One test statistic against its null value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStat {
    pub name: String,
    pub value: f64,
    pub expected: f64,
    pub std_err: f64,
    pub z: f64,
    pub pass: bool,
}

/// A family of [`EnsembleStat`]s decided jointly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestSuite {
    pub name: String,
    pub level: f64,
    pub critical: f64,
    pub stats: Vec<EnsembleStat>,
    pub pass: bool,
}

impl TestSuite {
    fn from_z_scores(name: &str, level: f64, mut stats: Vec<EnsembleStat>) -> Self {
        let critical = bonferroni_critical(level, stats.len());
        for s in &mut stats {
            s.pass = s.z.abs() <= critical;
        }
        Self {
            name: name.to_owned(),
            level,
            critical,
            pass: stats.iter().all(|s| s.pass),
            stats,
        }
    }

    pub fn max_abs_z(&self) -> f64 {
        self.stats.iter().map(|s| s.z.abs()).fold(0.0, f64::max)
    }

    pub fn failures(&self) -> impl Iterator<Item = &EnsembleStat> {
        self.stats.iter().filter(|s| !s.pass)
    }
}

/// Two-sided normal critical value at `level / m`.
pub fn bonferroni_critical(level: f64, m: usize) -> f64 {
    norm_quantile(1.0 - level / (2.0 * m.max(1) as f64))
}

fn check_level(level: f64) -> Result<()> {
    if level > 0.0 && level < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid("level", format!("must lie in (0, 1), got {level}")))
    }
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

fn z_score(gap: f64, se: f64) -> f64 {
    if se > 0.0 {
        gap / se
    } else if gap == 0.0 {
        0.0
    } else {
        gap.signum() * f64::INFINITY
    }
}

fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let cov = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / (a.len() as f64 - 1.0);
    cov / (va * vb).sqrt()
}

fn uniform_paths<P: AsRef<[f64]>>(paths: &[P], min_paths: usize) -> Result<usize> {
    if paths.len() < min_paths {
        return Err(Error::invalid(
            "paths",
            format!("need at least {min_paths} paths, got {}", paths.len()),
        ));
    }
    let len = paths[0].as_ref().len();
    if len < 2 || paths.iter().any(|p| p.as_ref().len() != len) {
        return Err(Error::invalid(
            "paths",
            "paths must share one grid of at least two points",
        ));
    }
    Ok(len)
}

type Weight = Box<dyn Fn(f64) -> f64>;

fn index_at(len: usize, t: f64) -> usize {
    ((t * (len - 1) as f64).round() as usize).min(len - 1)
}

/// Tests that paths on a uniform grid of spacing `dt` are standard Brownian
/// motions. Increments are pooled into `n_blocks` equal blocks; for each
/// block the cross-sectional mean (null 0) and variance (null `Δ`) are
/// tested, and the correlation of neighbouring blocks (null 0).
pub fn brownian_increment_test<P: AsRef<[f64]>>(
    paths: &[P],
    dt: f64,
    n_blocks: usize,
    level: f64,
) -> Result<TestSuite> {
    check_level(level)?;
    let len = uniform_paths(paths, 100)?;
    let steps = len - 1;
    if n_blocks < 2 || steps % n_blocks != 0 {
        return Err(Error::invalid(
            "n_blocks",
            format!("must be ≥ 2 and divide the {steps} steps"),
        ));
    }
    if !(dt > 0.0) {
        return Err(Error::invalid("dt", "must be positive"));
    }
    let width = steps / n_blocks;
    let delta = width as f64 * dt;
    let m = paths.len() as f64;
    let blocks: Vec<Vec<f64>> = (0..n_blocks)
        .map(|b| {
            paths
                .iter()
                .map(|p| {
                    let p = p.as_ref();
                    p[(b + 1) * width] - p[b * width]
                })
                .collect()
        })
        .collect();
    let mut stats = Vec::with_capacity(3 * n_blocks - 1);
    for (b, inc) in blocks.iter().enumerate() {
        let (mean, var) = mean_var(inc);
        if var == 0.0 {
            return Err(Error::Degenerate(format!("block {b} increments are constant")));
        }
        let se_mean = (delta / m).sqrt();
        stats.push(EnsembleStat {
            name: format!("mean[{b}]"),
            value: mean,
            expected: 0.0,
            std_err: se_mean,
            z: mean / se_mean,
            pass: false,
        });
        let se_var = delta * (2.0 / (m - 1.0)).sqrt();
        stats.push(EnsembleStat {
            name: format!("variance[{b}]"),
            value: var,
            expected: delta,
            std_err: se_var,
            z: (var - delta) / se_var,
            pass: false,
        });
    }
    for b in 0..n_blocks - 1 {
        let r = correlation(&blocks[b], &blocks[b + 1]);
        let se = 1.0 / m.sqrt();
        stats.push(EnsembleStat {
            name: format!("lag1[{b}]"),
            value: r,
            expected: 0.0,
            std_err: se,
            z: r / se,
            pass: false,
        });
    }
    Ok(TestSuite::from_z_scores("brownian-increments", level, stats))
}

/// Martingale test on price paths: `E[(S_t − S_s)·g(S_s)] = 0` for
/// consecutive checkpoint pairs `s < t` and `g ∈ {1, centered S_s,
/// sign(centered S_s)}`. Checkpoints are times in `(0, 1)` on the paths'
/// uniform grid.
pub fn martingale_test<P: AsRef<[f64]>>(paths: &[P], checkpoints: &[f64], level: f64) -> Result<TestSuite> {
    check_level(level)?;
    let len = uniform_paths(paths, 2)?;
    if checkpoints.len() < 2 {
        return Err(Error::invalid("checkpoints", "need at least two times"));
    }
    if checkpoints.windows(2).any(|w| !(w[0] < w[1])) || checkpoints.iter().any(|&c| !(c > 0.0 && c < 1.0)) {
        return Err(Error::invalid("checkpoints", "must increase strictly inside (0, 1)"));
    }
    let mut stats = Vec::new();
    for w in checkpoints.windows(2) {
        let (i, j) = (index_at(len, w[0]), index_at(len, w[1]));
        let s_s: Vec<f64> = paths.iter().map(|p| p.as_ref()[i]).collect();
        let gain: Vec<f64> = paths.iter().map(|p| p.as_ref()[j] - p.as_ref()[i]).collect();
        let centre = s_s.iter().sum::<f64>() / s_s.len() as f64;
        let weights: [(&str, Weight); 3] = [
            ("one", Box::new(|_| 1.0)),
            ("centered", Box::new(move |s| s - centre)),
            (
                "sign",
                Box::new(move |s| {
                    let d = s - centre;
                    if d == 0.0 {
                        0.0
                    } else {
                        d.signum()
                    }
                }),
            ),
        ];
        for (label, g) in weights.iter() {
            let xs: Vec<f64> = gain.iter().zip(&s_s).map(|(d, &s)| d * g(s)).collect();
            let est = MeanEstimate::from_samples(&xs)?;
            stats.push(EnsembleStat {
                name: format!("{label}[{}→{}]", w[0], w[1]),
                value: est.mean,
                expected: 0.0,
                std_err: est.std_err,
                z: est.z_against(0.0),
                pass: false,
            });
        }
    }
    Ok(TestSuite::from_z_scores("martingale", level, stats))
}

/// Cross-sectional `E[(Z_t − Y_t)²]` against `v(t)` at `times`; each point
/// passes iff it lies within `rel_tol·v(t)` of the curve.
pub fn variance_curve_check<P: AsRef<[f64]>, Q: AsRef<[f64]>>(
    z_paths: &[P],
    y_paths: &[Q],
    times: &[f64],
    v: impl Fn(f64) -> f64,
    rel_tol: f64,
) -> Result<TestSuite> {
    let len = uniform_paths(z_paths, 2)?;
    if uniform_paths(y_paths, 2)? != len || y_paths.len() != z_paths.len() {
        return Err(Error::invalid("paths", "Z and Y ensembles must be matched"));
    }
    let mut stats = Vec::with_capacity(times.len());
    for &t in times {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::invalid("times", format!("{t} outside [0, 1]")));
        }
        let k = index_at(len, t);
        let sq: Vec<f64> = z_paths
            .iter()
            .zip(y_paths)
            .map(|(z, y)| (z.as_ref()[k] - y.as_ref()[k]).powi(2))
            .collect();
        let est = MeanEstimate::from_samples(&sq)?;
        let expected = v(t);
        stats.push(EnsembleStat {
            name: format!("v({t})"),
            value: est.mean,
            expected,
            std_err: est.std_err,
            z: est.z_against(expected),
            pass: (est.mean - expected).abs() <= rel_tol * expected.abs(),
        });
    }
    Ok(TestSuite {
        name: "variance-curve".into(),
        level: rel_tol,
        critical: rel_tol,
        pass: stats.iter().all(|s| s.pass),
        stats,
    })
}

/// Kolmogorov–Smirnov statistic with its asymptotic p-value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

impl KsResult {
    pub fn rejects(&self, level: f64) -> bool {
        self.p_value < level
    }
}

/// `P(K > λ)` for the Kolmogorov distribution.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

fn ks_p_value(d: f64, n_eff: f64) -> f64 {
    let s = n_eff.sqrt();
    kolmogorov_sf((s + 0.12 + 0.11 / s) * d)
}

fn sorted(xs: &[f64]) -> Result<Vec<f64>> {
    if xs.iter().any(|x| x.is_nan()) {
        return Err(Error::NonFinite("KS sample"));
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// Two-sample KS test.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Degenerate("empty KS sample".into()));
    }
    let (a, b) = (sorted(a)?, sorted(b)?);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(KsResult {
        statistic: d,
        p_value: ks_p_value(d, na * nb / (na + nb)),
    })
}

/// One-sample KS test against a continuous CDF.
pub fn ks_one_sample(sample: &[f64], cdf: impl Fn(f64) -> f64) -> Result<KsResult> {
    if sample.is_empty() {
        return Err(Error::Degenerate("empty KS sample".into()));
    }
    let xs = sorted(sample)?;
    let n = xs.len() as f64;
    let d = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max);
    Ok(KsResult {
        statistic: d,
        p_value: ks_p_value(d, n),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kolmogorov_reference_points() {
        // Standard tabulated quantiles of the Kolmogorov distribution.
        assert!((kolmogorov_sf(1.3581) - 0.05).abs() < 2e-4);
        assert!((kolmogorov_sf(1.6276) - 0.01).abs() < 1e-4);
        assert_eq!(kolmogorov_sf(0.0), 1.0);
    }

    #[test]
    fn ks_identical_and_disjoint() {
        let a: Vec<f64> = (0..50).map(|i| i as f64).collect();
        let r = ks_two_sample(&a, &a).unwrap();
        assert_eq!(r.statistic, 0.0);
        let b: Vec<f64> = a.iter().map(|x| x + 100.0).collect();
        let r = ks_two_sample(&a, &b).unwrap();
        assert_eq!(r.statistic, 1.0);
        assert!(r.p_value < 1e-10);
    }

    #[test]
    fn constant_prices_pass_martingale() {
        let paths = vec![vec![0.3; 11]; 200];
        let s = martingale_test(&paths, &[0.25, 0.5, 0.75], 0.01).unwrap();
        assert!(s.pass);
    }

    #[test]
    fn constant_paths_are_degenerate() {
        let paths = vec![vec![1.0; 11]; 200];
        assert!(matches!(
            brownian_increment_test(&paths, 0.1, 10, 0.01),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn bonferroni_values() {
        assert!((bonferroni_critical(0.05, 1) - 1.959963984540054).abs() < 1e-12);
        assert!(bonferroni_critical(0.01, 29) > bonferroni_critical(0.01, 1));
    }
}
