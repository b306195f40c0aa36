use rayon::prelude::*;
use serde::Serialize;

use super::{MarkovMatrixProcess, Product};
use crate::counting::LimitEstimates;
use crate::rng::stream_rng;
use crate::stats::{linear_fit, normal_cdf, wilson_interval, RunningStats};
use crate::{Error, Result};

/// Runs `trials` independent trajectories of length `n` (stream = trial
/// index) and collects `f(trial, run)` in trial order.
fn per_trial<T, F>(proc: &MarkovMatrixProcess, trials: usize, seed: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut dyn FnMut(usize, &mut dyn FnMut(usize, usize, &Product))) -> T + Sync,
{
    (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, i as u64);
            let mut runner = |n: usize, visit: &mut dyn FnMut(usize, usize, &Product)| proc.run(n, &mut rng, visit);
            f(&mut runner)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LyapunovSpectrum {
    /// `λ̂₁ ≥ … ≥ λ̂_d`.
    pub exponents: Vec<f64>,
    pub standard_errors: Vec<f64>,
    pub n: usize,
    pub trials: usize,
    /// `E_π[log |det X|]`, when the chain is irreducible.
    pub expected_log_det: Option<f64>,
}

impl LyapunovSpectrum {
    pub fn sum(&self) -> f64 {
        self.exponents.iter().sum()
    }
}

/// `λ̂_i` = trial mean of `log σᵢ(M_n)/n`.
pub fn lyapunov_spectrum(proc: &MarkovMatrixProcess, n: usize, trials: usize, seed: u64) -> Result<LyapunovSpectrum> {
    if n == 0 || trials < 2 {
        return Err(Error::InsufficientData);
    }
    if !proc.chain().is_irreducible() {
        return Err(Error::NotIrreducible);
    }
    let d = proc.dimension();
    let rows: Vec<Vec<f64>> = per_trial(proc, trials, seed, |run| {
        let mut last = Vec::new();
        run(n, &mut |k, _, p| {
            if k == n {
                last = p.cartan_vector();
            }
        });
        last.into_iter().map(|x| x / n as f64).collect()
    });
    let mut stats = vec![RunningStats::new(); d];
    for r in &rows {
        for (s, &x) in stats.iter_mut().zip(r) {
            s.push(x);
        }
    }
    Ok(LyapunovSpectrum {
        exponents: stats.iter().map(|s| s.mean).collect(),
        standard_errors: stats.iter().map(|s| s.standard_error()).collect(),
        n,
        trials,
        expected_log_det: proc.expected_log_det().ok(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GapRow {
    pub n: usize,
    pub mean: f64,
    pub standard_error: f64,
    /// `(ε, frequency of statistic < reference − ε, (1/n) log frequency)`.
    pub lower_tails: Vec<(f64, f64, Option<f64>)>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimplicityGap {
    /// Mean statistic at the largest `n`, used as the tail reference.
    pub reference: f64,
    pub rows: Vec<GapRow>,
}

/// Law of `(2 log‖M_n‖ − log‖∧²M_n‖)/n = (log σ₁ − log σ₂)/n` over an `n` grid,
/// with lower-tail frequencies at `reference − f·reference` for each `f` in
/// `eps_fractions`.
pub fn simplicity_gap(
    proc: &MarkovMatrixProcess,
    n_list: &[usize],
    trials: usize,
    eps_fractions: &[f64],
    seed: u64,
) -> Result<SimplicityGap> {
    if proc.dimension() < 2 {
        return Err(Error::InvalidArgument("the gap needs dimension at least 2".into()));
    }
    let mut ns: Vec<usize> = n_list.iter().copied().filter(|&n| n > 0).collect();
    ns.sort_unstable();
    ns.dedup();
    let n_max = *ns.last().ok_or(Error::InsufficientData)?;
    let values: Vec<Vec<f64>> = per_trial(proc, trials, seed, |run| {
        let mut out = Vec::with_capacity(ns.len());
        run(n_max, &mut |k, _, p| {
            if ns.binary_search(&k).is_ok() {
                out.push((2.0 * p.log_norm() - p.log_norm_wedge2()) / k as f64);
            }
        });
        out
    });
    let column = |j: usize| values.iter().map(|v| v[j]).collect::<Vec<f64>>();
    let last: RunningStats = column(ns.len() - 1).into_iter().collect();
    let reference = last.mean;
    let rows = ns
        .iter()
        .enumerate()
        .map(|(j, &n)| {
            let col = column(j);
            let s: RunningStats = col.iter().copied().collect();
            let lower_tails = eps_fractions
                .iter()
                .map(|&f| {
                    let eps = f * reference;
                    let freq = col.iter().filter(|&&x| x < reference - eps).count() as f64 / col.len() as f64;
                    (eps, freq, (freq > 0.0).then(|| freq.ln() / n as f64))
                })
                .collect();
            GapRow { n, mean: s.mean, standard_error: s.standard_error(), lower_tails }
        })
        .collect();
    Ok(SimplicityGap { reference, rows })
}

/// Statistic tracked by [`deviation_curve`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ProcessFunctional {
    LogNorm,
    Displacement,
}

impl ProcessFunctional {
    fn eval(self, p: &Product) -> Result<f64> {
        match self {
            ProcessFunctional::LogNorm => Ok(p.log_norm()),
            ProcessFunctional::Displacement => p.displacement(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DeviationRow {
    pub n: usize,
    pub exceedances: u64,
    pub trials: usize,
    pub frequency: f64,
    pub wilson_low: f64,
    pub wilson_high: f64,
    /// `(1/n) log frequency`.
    pub log_rate: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DeviationCurve {
    pub functional: ProcessFunctional,
    pub lambda_ref: f64,
    pub eps: f64,
    pub rows: Vec<DeviationRow>,
    /// Slope of `log frequency` against `n` over rows with hits.
    pub slope: Option<f64>,
    /// Set when the fitted slope is not negative.
    pub nonnegative_slope: bool,
}

/// Frequencies of `|φ(M_n) − nΛ_ref| ≥ nε` with Wilson 95% intervals.
pub fn deviation_curve(
    proc: &MarkovMatrixProcess,
    functional: ProcessFunctional,
    lambda_ref: f64,
    eps: f64,
    n_list: &[usize],
    trials: usize,
    seed: u64,
) -> Result<DeviationCurve> {
    let mut ns: Vec<usize> = n_list.iter().copied().filter(|&n| n > 0).collect();
    ns.sort_unstable();
    ns.dedup();
    let n_max = *ns.last().ok_or(Error::InsufficientData)?;
    let hits: Vec<Result<Vec<bool>>> = per_trial(proc, trials, seed, |run| {
        let mut out = Vec::with_capacity(ns.len());
        let mut err = None;
        run(n_max, &mut |k, _, p| {
            if ns.binary_search(&k).is_ok() {
                match functional.eval(p) {
                    Ok(v) => out.push((v - k as f64 * lambda_ref).abs() >= k as f64 * eps),
                    Err(e) => {
                        if err.is_none() {
                            err = Some(e)
                        }
                    }
                }
            }
        });
        match err {
            Some(e) => Err(e),
            None => Ok(out),
        }
    });
    let hits: Vec<Vec<bool>> = hits.into_iter().collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for (j, &n) in ns.iter().enumerate() {
        let k = hits.iter().filter(|h| h[j]).count() as u64;
        let freq = k as f64 / trials as f64;
        let (lo, hi) = wilson_interval(k, trials as u64, 1.959963984540054);
        rows.push(DeviationRow {
            n,
            exceedances: k,
            trials,
            frequency: freq,
            wilson_low: lo,
            wilson_high: hi,
            log_rate: (k > 0).then(|| freq.ln() / n as f64),
        });
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) =
        rows.iter().filter(|r| r.exceedances > 0).map(|r| (r.n as f64, r.frequency.ln())).unzip();
    let slope = linear_fit(&xs, &ys).ok().map(|f| f.slope);
    Ok(DeviationCurve { functional, lambda_ref, eps, rows, slope, nonnegative_slope: slope.is_some_and(|s| s >= 0.0) })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BerryEsseenRow {
    pub n: usize,
    /// `sup_t |F̂_n(t) − Φ(t/σ)|` over the grid.
    pub sup_distance: f64,
    /// `sup_distance · √n / log n`.
    pub scaled: f64,
}

/// Number of grid points for the Berry–Esseen supremum.
pub const BE_GRID: usize = 1000;

/// Empirical CDF of `(log‖M_n‖ − nΛ)/√n` against the centred Gaussian of
/// variance `σ²`, on a `t`-grid spanning `±5σ`.
pub fn berry_esseen_curve(
    proc: &MarkovMatrixProcess,
    lambda: f64,
    sigma: f64,
    n_list: &[usize],
    trials: usize,
    seed: u64,
) -> Result<Vec<BerryEsseenRow>> {
    if !(sigma > 0.0) {
        return Err(Error::SigmaZero);
    }
    let mut ns: Vec<usize> = n_list.iter().copied().filter(|&n| n > 1).collect();
    ns.sort_unstable();
    ns.dedup();
    let n_max = *ns.last().ok_or(Error::InsufficientData)?;
    let values: Vec<Vec<f64>> = per_trial(proc, trials, seed, |run| {
        let mut out = Vec::with_capacity(ns.len());
        run(n_max, &mut |k, _, p| {
            if ns.binary_search(&k).is_ok() {
                out.push((p.log_norm() - k as f64 * lambda) / (k as f64).sqrt());
            }
        });
        out
    });
    let grid: Vec<f64> = (0..BE_GRID).map(|i| -5.0 * sigma + 10.0 * sigma * i as f64 / (BE_GRID - 1) as f64).collect();
    Ok(ns
        .iter()
        .enumerate()
        .map(|(j, &n)| {
            let mut col: Vec<f64> = values.iter().map(|v| v[j]).collect();
            col.sort_by(f64::total_cmp);
            let m = col.len() as f64;
            let sup = grid
                .iter()
                .map(|&t| {
                    let f = col.partition_point(|&x| x <= t) as f64 / m;
                    (f - normal_cdf(t / sigma)).abs()
                })
                .fold(0.0, f64::max);
            let nf = n as f64;
            BerryEsseenRow { n, sup_distance: sup, scaled: sup * nf.sqrt() / nf.ln() }
        })
        .collect())
}

/// `S_n(t)` on the grid `t = i/grid`, `i = 0..=grid`, from `log‖M_k‖`,
/// `k = 1..n`, linearly interpolated between lattice points.
pub fn wiener_path(log_norm: &[f64], lambda: f64, sigma: f64, grid: usize) -> Result<Vec<(f64, f64)>> {
    if !(sigma > 0.0) {
        return Err(Error::SigmaZero);
    }
    if grid == 0 {
        return Err(Error::InvalidArgument("grid must be positive".into()));
    }
    let n = log_norm.len();
    let at = |k: usize| if k == 0 { 0.0 } else { log_norm[k - 1] - k as f64 * lambda };
    let scale = sigma * (n as f64).sqrt();
    Ok((0..=grid)
        .map(|i| {
            let t = i as f64 / grid as f64;
            let x = t * n as f64;
            let k = (x.floor() as usize).min(n);
            let frac = x - k as f64;
            let v = if k < n { at(k) + frac * (at(k + 1) - at(k)) } else { at(n) };
            (t, v / scale)
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WienerMarginals {
    pub times: Vec<f64>,
    pub means: Vec<f64>,
    /// Sample covariance matrix of `S_n(t)` across the times.
    pub covariance: Vec<Vec<f64>>,
    pub trials: usize,
    pub n: usize,
}

/// Sample covariance of `(S_n(t₁), …, S_n(t_k))` over trajectories.
pub fn wiener_marginals(
    proc: &MarkovMatrixProcess,
    n: usize,
    trials: usize,
    lambda: f64,
    sigma: f64,
    times: &[f64],
    seed: u64,
) -> Result<WienerMarginals> {
    if !(sigma > 0.0) {
        return Err(Error::SigmaZero);
    }
    if trials < 2 || n == 0 {
        return Err(Error::InsufficientData);
    }
    let scale = sigma * (n as f64).sqrt();
    let samples: Vec<Vec<f64>> = per_trial(proc, trials, seed, |run| {
        let mut prev = 0.0;
        let mut out = vec![0.0; times.len()];
        run(n, &mut |k, _, p| {
            let cur = p.log_norm() - k as f64 * lambda;
            for (o, &t) in out.iter_mut().zip(times) {
                let x = t * n as f64;
                if x > (k - 1) as f64 && x <= k as f64 {
                    let frac = x - (k - 1) as f64;
                    *o = (prev + frac * (cur - prev)) / scale;
                }
            }
            prev = cur;
        });
        out
    });
    let k = times.len();
    let tf = trials as f64;
    let means: Vec<f64> = (0..k).map(|j| samples.iter().map(|s| s[j]).sum::<f64>() / tf).collect();
    let covariance = (0..k)
        .map(|a| {
            (0..k)
                .map(|b| samples.iter().map(|s| (s[a] - means[a]) * (s[b] - means[b])).sum::<f64>() / (tf - 1.0))
                .collect()
        })
        .collect();
    Ok(WienerMarginals { times: times.to_vec(), means, covariance, trials, n })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LilReport {
    pub checkpoints: Vec<usize>,
    /// Per trajectory: running max of the statistic over all checkpoints.
    pub final_max: Vec<f64>,
    /// Per trajectory: running min.
    pub final_min: Vec<f64>,
}

impl LilReport {
    /// Fraction of trajectories whose running max lies in `[lo, hi]`.
    pub fn fraction_max_in(&self, lo: f64, hi: f64) -> f64 {
        self.final_max.iter().filter(|&&m| m >= lo && m <= hi).count() as f64 / self.final_max.len().max(1) as f64
    }
}

/// Geometric checkpoints `16 = c₀ < c₁ < … ≤ n` with ratio `ratio`, and `n`.
pub fn lil_checkpoints(n: usize, ratio: f64) -> Vec<usize> {
    let mut out = Vec::new();
    let mut c = 16usize;
    while c <= n {
        out.push(c);
        c = ((c as f64 * ratio).round() as usize).max(c + 1);
    }
    if out.last() != Some(&n) && n >= 16 {
        out.push(n);
    }
    out
}

/// `(log‖M_k‖ − kΛ)/√(2σ²k log log k)` at geometric checkpoints; running
/// extremes per trajectory.
#[allow(clippy::too_many_arguments)]
pub fn lil_statistic(
    proc: &MarkovMatrixProcess,
    n: usize,
    trials: usize,
    lambda: f64,
    sigma: f64,
    ratio: f64,
    seed: u64,
) -> Result<LilReport> {
    if n < 16 {
        return Err(Error::InvalidArgument("checkpoints start at 16".into()));
    }
    if !(ratio > 1.0) {
        return Err(Error::InvalidArgument("checkpoint ratio must exceed 1".into()));
    }
    let checkpoints = lil_checkpoints(n, ratio);
    let sigma2 = sigma * sigma;
    let extremes: Vec<(f64, f64)> = per_trial(proc, trials, seed, |run| {
        let (mut hi, mut lo) = (f64::NEG_INFINITY, f64::INFINITY);
        let mut next = 0;
        run(n, &mut |k, _, p| {
            if next < checkpoints.len() && checkpoints[next] == k {
                next += 1;
                let kf = k as f64;
                let denom = (2.0 * sigma2 * kf * kf.ln().ln()).sqrt();
                let s = if denom > 0.0 { (p.log_norm() - kf * lambda) / denom } else { 0.0 };
                hi = hi.max(s);
                lo = lo.min(s);
            }
        });
        (hi, lo)
    });
    Ok(LilReport {
        checkpoints,
        final_max: extremes.iter().map(|e| e.0).collect(),
        final_min: extremes.iter().map(|e| e.1).collect(),
    })
}

/// `Λ` and `σ²` by batch means: each trajectory of length `n` is cut into
/// blocks of `block` steps and the increments of `log‖M_k‖` over blocks
/// are pooled.
pub fn estimate_lambda_sigma(
    proc: &MarkovMatrixProcess,
    n: usize,
    trials: usize,
    block: usize,
    seed: u64,
) -> Result<LimitEstimates> {
    if block == 0 || n < 2 * block || trials == 0 {
        return Err(Error::InsufficientData);
    }
    let incs: Vec<Vec<f64>> = per_trial(proc, trials, seed, |run| {
        let mut out = Vec::with_capacity(n / block);
        let mut prev = 0.0;
        run(n, &mut |k, _, p| {
            if k % block == 0 {
                let cur = p.log_norm();
                out.push(cur - prev);
                prev = cur;
            }
        });
        out
    });
    // the first block carries the start-up transient
    let s: RunningStats = incs.iter().flat_map(|v| v.iter().skip(1).copied()).collect();
    let b = block as f64;
    let blocks = s.count;
    let sigma2 = s.sample_variance() / b;
    Ok(LimitEstimates::from_simulation(
        s.mean / b,
        s.standard_error() / b,
        sigma2,
        sigma2 * (2.0 / (blocks - 1.0)).sqrt(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use crate::markov::coin_diagonal_process;
    use crate::stats::binomial_cdf;
    use std::f64::consts::LN_2;

    fn diag_proc() -> MarkovMatrixProcess {
        MarkovMatrixProcess::single_state(Matrix::diag(&[2.0, 0.5])).unwrap()
    }

    #[test]
    fn deterministic_spectrum_and_gap() {
        let s = lyapunov_spectrum(&diag_proc(), 50, 4, 0).unwrap();
        assert!((s.exponents[0] - LN_2).abs() < 1e-12 && (s.exponents[1] + LN_2).abs() < 1e-12);
        let g = simplicity_gap(&diag_proc(), &[10, 20], 4, &[0.1, 0.2], 0).unwrap();
        for r in &g.rows {
            assert!((r.mean - 2.0 * LN_2).abs() < 1e-12);
            assert!(r.lower_tails.iter().all(|t| t.1 == 0.0));
        }
        let d3 = MarkovMatrixProcess::single_state(Matrix::diag(&[4.0, 2.0, 1.0])).unwrap();
        let g = simplicity_gap(&d3, &[40], 2, &[0.1], 0).unwrap();
        assert!((g.rows[0].mean - LN_2).abs() < 1e-12);
    }

    #[test]
    fn deterministic_deviation_and_lil() {
        let c = deviation_curve(&diag_proc(), ProcessFunctional::LogNorm, LN_2, 0.1, &[5, 10, 20], 10, 0).unwrap();
        assert!(c.rows.iter().all(|r| r.exceedances == 0));
        let l = lil_statistic(&diag_proc(), 1000, 3, LN_2, 1.0, 2f64.powf(0.25), 0).unwrap();
        assert!(l.final_max.iter().chain(&l.final_min).all(|v| v.abs() < 1e-9));
        let t = crate::markov::simulate(&diag_proc(), 100, 0, 0);
        let w = wiener_path(&t.log_norm, LN_2, 1.0, 10).unwrap();
        assert!(w.iter().all(|(_, v)| v.abs() < 1e-12));
        assert!(matches!(berry_esseen_curve(&diag_proc(), LN_2, 0.0, &[10], 10, 0), Err(Error::SigmaZero)));
    }

    #[test]
    fn coin_deviation_matches_binomial_tail() {
        // log‖M_n‖ = H·log 4 with H ~ Bin(n, ½); |H log4 − n log 2| ≥ nε ⇔ |H − n/2| ≥ nε/log 4
        let proc = coin_diagonal_process().unwrap();
        let n = 20usize;
        let eps = 0.3;
        let trials = 40000;
        let c = deviation_curve(&proc, ProcessFunctional::LogNorm, LN_2, eps, &[n], trials, 3).unwrap();
        let h = (n as f64) * eps / (4f64.ln());
        let lo = ((n as f64) / 2.0 - h).floor() as u64;
        let hi = ((n as f64) / 2.0 + h).ceil() as u64;
        let exact = binomial_cdf(n as u64, 0.5, lo) + (1.0 - binomial_cdf(n as u64, 0.5, hi - 1));
        let se = (exact * (1.0 - exact) / trials as f64).sqrt();
        assert!((c.rows[0].frequency - exact).abs() < 4.0 * se, "{} vs {exact}", c.rows[0].frequency);
    }

    #[test]
    fn wiener_path_endpoints() {
        let ln = vec![1.0, 2.5, 2.0, 4.0];
        let w = wiener_path(&ln, 0.5, 2.0, 8).unwrap();
        assert_eq!(w[0], (0.0, 0.0));
        assert!((w[8].1 - (4.0 - 2.0) / (2.0 * 2.0)).abs() < 1e-15);
        // t = 1/8 is halfway between k = 0 and k = 1
        assert!((w[1].1 - 0.5 * (1.0 - 0.5) / 4.0).abs() < 1e-15);
    }

    #[test]
    fn batch_means_on_coin() {
        let proc = coin_diagonal_process().unwrap();
        let e = estimate_lambda_sigma(&proc, 20000, 20, 1000, 1).unwrap();
        assert!((e.lambda - LN_2).abs() < 4.0 * e.standard_error);
        assert!((e.sigma2 - LN_2 * LN_2).abs() < 4.0 * e.sigma2_standard_error);
    }

    #[test]
    fn checkpoints_geometric() {
        let c = lil_checkpoints(100, 2.0);
        assert_eq!(c, vec![16, 32, 64, 100]);
    }
}
