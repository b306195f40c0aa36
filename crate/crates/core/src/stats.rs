//! Small statistical toolkit: streaming moments, regressions, normal and
//! Kolmogorov distributions, KS distances, binomial tails.

use serde::Serialize;
use statrs::distribution::{Binomial, ContinuousCDF, DiscreteCDF, Normal};

use crate::{Error, Result};

/// Mergeable running mean and variance (Welford / Chan).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct RunningStats {
    pub count: f64,
    pub mean: f64,
    m2: f64,
    pub min: f64,
    pub max: f64,
}

impl RunningStats {
    pub fn new() -> Self {
        RunningStats { count: 0.0, mean: 0.0, m2: 0.0, min: f64::INFINITY, max: f64::NEG_INFINITY }
    }

    pub fn push(&mut self, x: f64) {
        self.count += 1.0;
        let d = x - self.mean;
        self.mean += d / self.count;
        self.m2 += d * (x - self.mean);
        self.min = self.min.min(x);
        self.max = self.max.max(x);
    }

    pub fn merge(&mut self, other: &RunningStats) {
        if other.count == 0.0 {
            return;
        }
        if self.count == 0.0 {
            *self = *other;
            return;
        }
        let n = self.count + other.count;
        let d = other.mean - self.mean;
        self.mean += d * other.count / n;
        self.m2 += other.m2 + d * d * self.count * other.count / n;
        self.count = n;
        self.min = self.min.min(other.min);
        self.max = self.max.max(other.max);
    }

    /// Population variance.
    pub fn variance(&self) -> f64 {
        if self.count > 0.0 {
            (self.m2 / self.count).max(0.0)
        } else {
            0.0
        }
    }

    pub fn sample_variance(&self) -> f64 {
        if self.count > 1.0 {
            (self.m2 / (self.count - 1.0)).max(0.0)
        } else {
            0.0
        }
    }

    /// Standard error of the mean.
    pub fn standard_error(&self) -> f64 {
        if self.count > 1.0 {
            (self.sample_variance() / self.count).sqrt()
        } else {
            f64::INFINITY
        }
    }
}

impl FromIterator<f64> for RunningStats {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = RunningStats::new();
        for x in iter {
            s.push(x);
        }
        s
    }
}

/// Ordinary least squares `y ≈ a + b x`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LinearFit {
    pub intercept: f64,
    pub slope: f64,
    pub slope_se: f64,
    pub intercept_se: f64,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    weighted_linear_fit(x, y, &vec![1.0; x.len()])
}

/// Weighted least squares with weights `w_i = 1/σ_i²`; standard errors are
/// taken from the residual scatter when there are more than two points.
pub fn weighted_linear_fit(x: &[f64], y: &[f64], w: &[f64]) -> Result<LinearFit> {
    let n = x.len();
    if n < 2 || y.len() != n || w.len() != n {
        return Err(Error::InsufficientData);
    }
    let sw: f64 = w.iter().sum();
    let mx = x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let my = y.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let sxx: f64 = x.iter().zip(w).map(|(a, b)| b * (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData);
    }
    let sxy: f64 = x.iter().zip(y).zip(w).map(|((a, c), b)| b * (a - mx) * (c - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let (slope_se, intercept_se) = if n > 2 {
        let rss: f64 = x.iter().zip(y).zip(w).map(|((a, c), b)| b * (c - intercept - slope * a).powi(2)).sum();
        let s2 = rss / (n - 2) as f64;
        ((s2 / sxx).sqrt(), (s2 * (1.0 / sw + mx * mx / sxx)).sqrt())
    } else {
        (0.0, 0.0)
    };
    Ok(LinearFit { intercept, slope, slope_se, intercept_se })
}

/// Fits `y_n ≈ C θⁿ` on the positive entries and returns `θ`.
pub fn geometric_ratio(n: &[f64], y: &[f64]) -> Result<f64> {
    let (xs, ls): (Vec<f64>, Vec<f64>) = n.iter().zip(y).filter(|(_, &v)| v > 0.0).map(|(&a, &v)| (a, v.ln())).unzip();
    Ok(linear_fit(&xs, &ls)?.slope.exp())
}

/// Fits `y_n ≈ C n^β` on the positive entries and returns `β`.
pub fn power_law_exponent(n: &[f64], y: &[f64]) -> Result<f64> {
    let (xs, ls): (Vec<f64>, Vec<f64>) =
        n.iter().zip(y).filter(|(&a, &v)| v > 0.0 && a > 0.0).map(|(&a, &v)| (a.ln(), v.ln())).unzip();
    Ok(linear_fit(&xs, &ls)?.slope)
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-x / std::f64::consts::SQRT_2)
}

pub fn normal_quantile(p: f64) -> f64 {
    Normal::new(0.0, 1.0).expect("standard normal").inverse_cdf(p)
}

/// Kolmogorov survival function `Q(t) = 2 Σ_{k≥1} (−1)^{k−1} e^{−2k²t²}`.
pub fn kolmogorov_survival(t: f64) -> f64 {
    if t < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=200 {
        let term = (-2.0 * (k * k) as f64 * t * t).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-17 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Two-sample Kolmogorov–Smirnov statistic and asymptotic p-value.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InsufficientData);
    }
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (n, m) = (x.len(), y.len());
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < n && j < m {
        let v = if x[i] <= y[j] { x[i] } else { y[j] };
        while i < n && x[i] <= v {
            i += 1;
        }
        while j < m && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let ne = (n * m) as f64 / (n + m) as f64;
    let t = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    Ok(KsResult { statistic: d, p_value: kolmogorov_survival(t) })
}

/// `sup_t |F(t) − Φ((t − μ)/σ)|` for the discrete law with atoms `values`
/// and probabilities `weights`; both one-sided limits at each atom count.
pub fn ks_distance_to_normal(values: &[f64], weights: &[f64], mu: f64, sigma: f64) -> Result<f64> {
    if values.len() != weights.len() || values.is_empty() {
        return Err(Error::InsufficientData);
    }
    if sigma <= 0.0 {
        return Err(Error::SigmaZero);
    }
    let mut atoms: Vec<(f64, f64)> = values.iter().copied().zip(weights.iter().copied()).collect();
    atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = weights.iter().sum();
    let mut cdf = 0.0;
    let mut d = 0.0f64;
    let mut k = 0;
    while k < atoms.len() {
        let v = atoms[k].0;
        let phi = normal_cdf((v - mu) / sigma);
        d = d.max((cdf - phi).abs());
        while k < atoms.len() && atoms[k].0 == v {
            cdf += atoms[k].1 / total;
            k += 1;
        }
        d = d.max((cdf - phi).abs());
    }
    Ok(d)
}

/// Empirical version of [`ks_distance_to_normal`] with equal weights.
pub fn ks_sample_to_normal(sample: &[f64], mu: f64, sigma: f64) -> Result<f64> {
    ks_distance_to_normal(sample, &vec![1.0; sample.len()], mu, sigma)
}

/// `P(X ≤ k)` for `X ~ Bin(n, p)`.
pub fn binomial_cdf(n: u64, p: f64, k: u64) -> f64 {
    Binomial::new(p, n).expect("valid binomial").cdf(k)
}

/// Wilson score interval for `k` successes in `n` trials at normal quantile `z`.
pub fn wilson_interval(k: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let nf = n as f64;
    let p = k as f64 / nf;
    let denom = 1.0 + z * z / nf;
    let centre = (p + z * z / (2.0 * nf)) / denom;
    let half = z * (p * (1.0 - p) / nf + z * z / (4.0 * nf * nf)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Weighted `q`-quantile of a discrete law (lower quantile).
pub fn weighted_quantile(values: &[f64], weights: &[f64], q: f64) -> f64 {
    let mut atoms: Vec<(f64, f64)> = values.iter().copied().zip(weights.iter().copied()).collect();
    atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = weights.iter().sum();
    let mut acc = 0.0;
    for (v, w) in &atoms {
        acc += w / total;
        if acc >= q - 1e-15 {
            return *v;
        }
    }
    atoms.last().map(|a| a.0).unwrap_or(f64::NAN)
}

/// Freedman–Diaconis bin width `2·IQR·N^{-1/3}` with `N` the support size.
pub fn freedman_diaconis_width(values: &[f64], weights: &[f64], n_eff: f64) -> f64 {
    let iqr = weighted_quantile(values, weights, 0.75) - weighted_quantile(values, weights, 0.25);
    2.0 * iqr / n_eff.cbrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn running_stats_merge_matches_direct() {
        let xs: Vec<f64> = (0..100).map(|i| ((i * 37) % 17) as f64 * 0.3 - 2.0).collect();
        let all: RunningStats = xs.iter().copied().collect();
        let mut a: RunningStats = xs[..40].iter().copied().collect();
        let b: RunningStats = xs[40..].iter().copied().collect();
        a.merge(&b);
        assert!((a.mean - all.mean).abs() < 1e-12);
        assert!((a.variance() - all.variance()).abs() < 1e-12);
        let mean = xs.iter().sum::<f64>() / 100.0;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 100.0;
        assert!((all.variance() - var).abs() < 1e-12);
    }

    #[test]
    fn fits() {
        let x: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 - 0.5 * v).collect();
        let f = linear_fit(&x, &y).unwrap();
        assert!((f.slope + 0.5).abs() < 1e-12 && (f.intercept - 3.0).abs() < 1e-12);
        let g: Vec<f64> = x.iter().map(|v| 2.0 * 0.3f64.powf(*v)).collect();
        assert!((geometric_ratio(&x, &g).unwrap() - 0.3).abs() < 1e-12);
        let x1: Vec<f64> = (1..10).map(|i| i as f64).collect();
        let p: Vec<f64> = x1.iter().map(|v| 5.0 * v.powf(-0.5)).collect();
        assert!((power_law_exponent(&x1, &p).unwrap() + 0.5).abs() < 1e-12);
        assert!(linear_fit(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn normal_and_kolmogorov() {
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-16);
        assert!((normal_cdf(1.959963984540054) - 0.975).abs() < 1e-11);
        assert!((normal_quantile(0.975) - 1.959963984540054).abs() < 1e-9);
        // Kolmogorov distribution: Q(1.3581) ≈ 0.05
        assert!((kolmogorov_survival(1.3580986393225507) - 0.05).abs() < 1e-6);
    }

    #[test]
    fn ks_two_sample_behaviour() {
        let a: Vec<f64> = (0..500).map(|i| i as f64).collect();
        let r = ks_two_sample(&a, &a).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert!(r.p_value > 0.99);
        let b: Vec<f64> = a.iter().map(|x| x + 250.0).collect();
        let r = ks_two_sample(&a, &b).unwrap();
        assert!((r.statistic - 0.5).abs() < 1e-12);
        assert!(r.p_value < 1e-10);
    }

    #[test]
    fn ks_to_normal_for_point_mass() {
        let d = ks_distance_to_normal(&[0.0], &[1.0], 0.0, 1.0).unwrap();
        assert!((d - 0.5).abs() < 1e-15);
        assert!(matches!(ks_distance_to_normal(&[0.0], &[1.0], 0.0, 0.0), Err(Error::SigmaZero)));
    }

    #[test]
    fn binomial_and_wilson() {
        assert!((binomial_cdf(4, 0.5, 1) - 5.0 / 16.0).abs() < 1e-12);
        let (lo, hi) = wilson_interval(50, 100, 1.96);
        assert!(lo < 0.5 && hi > 0.5 && lo > 0.39 && hi < 0.61);
    }

    #[test]
    fn quantiles() {
        let v = [1.0, 2.0, 3.0, 4.0];
        let w = [1.0; 4];
        assert_eq!(weighted_quantile(&v, &w, 0.5), 2.0);
        assert_eq!(weighted_quantile(&v, &w, 0.75), 3.0);
        assert!((freedman_diaconis_width(&v, &w, 8.0) - 2.0).abs() < 1e-12);
    }
}
