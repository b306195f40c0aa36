use serde::Serialize;

use super::sphere::{sample_values, sphere_values};
use super::CountTable;
use crate::automaton::Automaton;
use crate::group::SubadditiveFunctional;
use crate::linalg::Matrix;
use crate::stats::{linear_fit, RunningStats};
use crate::{Error, Result};

/// Depths to evaluate: exhaustive ones and `(depth, samples)` Monte Carlo ones.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Schedule {
    pub exact: Vec<usize>,
    pub monte_carlo: Vec<(usize, usize)>,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitMethod {
    CountingExtrapolation,
    MarkovSimulation,
}

/// Sphere mean and variance of `φ` at one depth.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LimitPoint {
    pub n: usize,
    pub mean: f64,
    pub variance: f64,
    /// Standard error of `mean` (zero when exact).
    pub standard_error: f64,
    pub samples: Option<usize>,
}

/// Estimates of `Λ = lim m_n/n` and `σ² = lim v_n/n`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LimitEstimates {
    pub lambda: f64,
    pub standard_error: f64,
    pub sigma2: f64,
    pub sigma2_standard_error: f64,
    pub method: LimitMethod,
    /// Fit `m_n ≈ Λ n + c + d/n` over the exact depths.
    pub exact_fit: [f64; 3],
    /// Fit `v_n ≈ σ² n + b` over the exact depths.
    pub variance_fit: [f64; 2],
    pub points: Vec<LimitPoint>,
}

impl LimitEstimates {
    /// Mean predicted by the exact-depth fit.
    pub fn extrapolated_mean(&self, n: usize) -> f64 {
        let n = n as f64;
        self.exact_fit[0] * n + self.exact_fit[1] + self.exact_fit[2] / n
    }

    /// Estimates from an independent simulation.
    pub fn from_simulation(lambda: f64, standard_error: f64, sigma2: f64, sigma2_standard_error: f64) -> Self {
        LimitEstimates {
            lambda,
            standard_error,
            sigma2,
            sigma2_standard_error,
            method: LimitMethod::MarkovSimulation,
            exact_fit: [lambda, 0.0, 0.0],
            variance_fit: [sigma2, 0.0],
            points: Vec::new(),
        }
    }
}

/// Least squares for `y ≈ a·n + b + c/n`, with the standard error of `a`.
fn fit_with_correction(ns: &[f64], ys: &[f64]) -> Result<([f64; 3], f64)> {
    let k = ns.len();
    if k < 3 {
        return Err(Error::InsufficientData);
    }
    let rows: Vec<[f64; 3]> = ns.iter().map(|&n| [n, 1.0, 1.0 / n]).collect();
    let mut xtx = Matrix::zeros(3, 3);
    let mut xty = [0.0; 3];
    for (r, &y) in rows.iter().zip(ys) {
        for i in 0..3 {
            xty[i] += r[i] * y;
            for j in 0..3 {
                xtx[(i, j)] += r[i] * r[j];
            }
        }
    }
    let inv = xtx.inverse().ok_or(Error::InsufficientData)?;
    let beta = inv.mul_vec(&xty);
    let coef = [beta[0], beta[1], beta[2]];
    let se = if k > 3 {
        let rss: f64 = rows.iter().zip(ys).map(|(r, y)| (y - r[0] * coef[0] - r[1] * coef[1] - r[2] * coef[2]).powi(2)).sum();
        (rss / (k - 3) as f64 * inv[(0, 0)]).sqrt()
    } else {
        // exactly determined: the change from dropping the correction term
        let lin = linear_fit(&ns[k - 2..], &ys[k - 2..])?;
        (lin.slope - coef[0]).abs()
    };
    Ok((coef, se))
}

/// `Λ` by extrapolating exact sphere means `m_n = Λn + c + d/n`, refined by
/// Monte Carlo means at large depths; `σ²` from the linear trend of sphere
/// variances, refined the same way.
pub fn estimate_limits(
    aut: &Automaton,
    table: &CountTable,
    f: &SubadditiveFunctional,
    schedule: &Schedule,
) -> Result<LimitEstimates> {
    let mut exact: Vec<usize> = schedule.exact.iter().copied().filter(|&n| n > 0).collect();
    exact.sort_unstable();
    exact.dedup();
    if exact.len() < 3 {
        return Err(Error::InsufficientData);
    }
    let mut points = Vec::new();
    for &n in &exact {
        let s: RunningStats = sphere_values(aut, f, n)?.into_iter().collect();
        points.push(LimitPoint { n, mean: s.mean, variance: s.variance(), standard_error: 0.0, samples: None });
    }
    let ns: Vec<f64> = exact.iter().map(|&n| n as f64).collect();
    let ms: Vec<f64> = points.iter().map(|p| p.mean).collect();
    let vs: Vec<f64> = points.iter().map(|p| p.variance).collect();
    let (exact_fit, fit_se) = fit_with_correction(&ns, &ms)?;
    let vfit = linear_fit(&ns, &vs)?;
    let variance_fit = [vfit.slope, vfit.intercept];

    let mut lam_est = Vec::new();
    let mut sig_est = Vec::new();
    for (i, &(n, samples)) in schedule.monte_carlo.iter().enumerate() {
        if n == 0 || samples < 2 {
            continue;
        }
        let vals = sample_values(aut, table, f, n, samples, schedule.seed.wrapping_add(i as u64))?;
        let s: RunningStats = vals.into_iter().collect();
        points.push(LimitPoint {
            n,
            mean: s.mean,
            variance: s.sample_variance(),
            standard_error: s.standard_error(),
            samples: Some(samples),
        });
        let nf = n as f64;
        lam_est.push(((s.mean - exact_fit[1] - exact_fit[2] / nf) / nf, s.standard_error() / nf));
        let var_se = s.sample_variance() * (2.0 / (samples as f64 - 1.0)).sqrt();
        sig_est.push(((s.sample_variance() - variance_fit[1]) / nf, var_se / nf));
    }
    let combine = |est: &[(f64, f64)], fallback: (f64, f64)| -> (f64, f64) {
        if est.is_empty() {
            return fallback;
        }
        let w: Vec<f64> = est.iter().map(|(_, se)| 1.0 / (se * se).max(1e-300)).collect();
        let sw: f64 = w.iter().sum();
        let mean = est.iter().zip(&w).map(|((x, _), w)| x * w).sum::<f64>() / sw;
        (mean, (1.0 / sw).sqrt())
    };
    let (lambda, standard_error) = combine(&lam_est, (exact_fit[0], fit_se));
    // per-step rounding of the functional bounds how well Λ can be resolved
    let resolution = f64::EPSILON * (1.0 + f.lipschitz_constant(aut.alphabet()).unwrap_or(0.0));
    let standard_error = standard_error.hypot(resolution);
    let (sigma2, sigma2_standard_error) = combine(&sig_est, (vfit.slope.max(0.0), vfit.slope_se));
    Ok(LimitEstimates {
        lambda,
        standard_error,
        sigma2: sigma2.max(0.0),
        sigma2_standard_error,
        method: LimitMethod::CountingExtrapolation,
        exact_fit,
        variance_fit,
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtins;
    use crate::counting::build_count_table;
    use crate::group::GroupOracle;

    #[test]
    fn word_length_limits() {
        let aut = builtins::free_group_automaton(2);
        let t = build_count_table(&aut, 40);
        let f = SubadditiveFunctional::identity_word_length(GroupOracle::free(2).unwrap());
        let sched = Schedule { exact: vec![2, 3, 4, 5, 6], monte_carlo: vec![(40, 200)], seed: 1 };
        let e = estimate_limits(&aut, &t, &f, &sched).unwrap();
        assert!((e.lambda - 1.0).abs() < 1e-9);
        assert!(e.sigma2.abs() < 1e-9);
        assert_eq!(e.method, LimitMethod::CountingExtrapolation);
    }

    #[test]
    fn abs_homomorphism_has_zero_drift_in_signed_form() {
        let aut = builtins::free_group_automaton(2);
        let t = build_count_table(&aut, 8);
        let f = SubadditiveFunctional::homomorphism(aut.alphabet(), vec![1.0, -1.0, 0.0, 0.0]).unwrap();
        let sched = Schedule { exact: vec![2, 4, 6, 8], monte_carlo: vec![], seed: 0 };
        let e = estimate_limits(&aut, &t, &f, &sched).unwrap();
        assert!(e.lambda.abs() < 1e-9);
    }

    #[test]
    fn too_few_depths() {
        let aut = builtins::free_group_automaton(2);
        let t = build_count_table(&aut, 4);
        let f = SubadditiveFunctional::identity_word_length(GroupOracle::free(2).unwrap());
        let sched = Schedule { exact: vec![0, 2, 3], monte_carlo: vec![], seed: 0 };
        assert!(matches!(estimate_limits(&aut, &t, &f, &sched), Err(Error::InsufficientData)));
    }

    #[test]
    fn correction_fit_recovers_coefficients() {
        let ns: Vec<f64> = (2..10).map(|n| n as f64).collect();
        let ys: Vec<f64> = ns.iter().map(|n| 0.7 * n - 0.3 + 0.25 / n).collect();
        let (c, se) = fit_with_correction(&ns, &ys).unwrap();
        assert!((c[0] - 0.7).abs() < 1e-10 && (c[1] + 0.3).abs() < 1e-9 && (c[2] - 0.25).abs() < 1e-9);
        assert!(se < 1e-9);
    }

    #[test]
    fn standard_error_never_below_rounding() {
        let aut = builtins::free_group_automaton(2);
        let t = build_count_table(&aut, 8);
        let f = SubadditiveFunctional::identity_word_length(GroupOracle::free(2).unwrap());
        let sched = Schedule { exact: vec![2, 3, 4, 5, 6], monte_carlo: vec![], seed: 0 };
        let e = estimate_limits(&aut, &t, &f, &sched).unwrap();
        assert!(e.standard_error >= f64::EPSILON && e.standard_error < 1e-12, "{}", e.standard_error);
    }
}
