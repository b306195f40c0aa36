use rayon::prelude::*;
use serde::Serialize;

use super::PattersonSullivan;
use crate::group::SubadditiveFunctional;
use crate::markov::{lil_checkpoints, WienerMarginals};
use crate::rng::stream_rng;
use crate::stats::{ks_sample_to_normal, linear_fit};
use crate::{Error, Result};

/// Parameters of a ray experiment.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RayConfig {
    pub length: usize,
    pub trials: usize,
    /// Caller-supplied drift `Λ`.
    pub lambda: f64,
    /// Caller-supplied `σ`; CLT, Wiener and LIL fields need `σ > 0`.
    pub sigma: f64,
    pub eps: Vec<f64>,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LlnRow {
    pub n: usize,
    /// Mean over rays of `φ(ξ_n)/n`.
    pub mean: f64,
    /// Median over rays of `|φ(ξ_n)/n − Λ|`.
    pub median_abs_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RayDeviationRow {
    pub eps: f64,
    pub n: usize,
    /// Fraction of rays with `|φ(ξ_n) − nΛ| ≥ nε`.
    pub frequency: f64,
}

/// Log-linear fit of `P(T > k)` for the entry time `T`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EntryTailFit {
    pub ratio: f64,
    pub r_squared: f64,
    pub points: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RayStatReport {
    pub config: RayConfig,
    pub lln: Vec<LlnRow>,
    pub deviations: Vec<RayDeviationRow>,
    /// Sup distance between `(φ(ξ_N) − NΛ)/(σ√N)` and `N(0,1)`.
    pub clt_ks: Option<f64>,
    pub wiener: Option<WienerMarginals>,
    pub lil_checkpoints: Vec<usize>,
    /// Per ray: running max of `(φ(ξ_k) − kΛ)/√(2σ²k log log k)`.
    pub lil_max: Option<Vec<f64>>,
    /// `(k, rays whose first maximal-component vertex is ξ_k)`.
    pub entry_histogram: Vec<(usize, usize)>,
    /// Rays that never entered a maximal component.
    pub entry_censored: usize,
    /// `None` when every ray enters at the same step.
    pub entry_tail: Option<EntryTailFit>,
    /// Set when `σ ≤ 0` and the normalized fields were skipped.
    pub sigma_error: Option<String>,
}

impl RayStatReport {
    pub fn csv(&self) -> String {
        let mut out = String::from("kind,n,eps,value\n");
        for r in &self.lln {
            out.push_str(&format!("lln_mean,{},,{:.12e}\n", r.n, r.mean));
            out.push_str(&format!("lln_median_abs_error,{},,{:.12e}\n", r.n, r.median_abs_error));
        }
        for r in &self.deviations {
            out.push_str(&format!("deviation,{},{},{:.12e}\n", r.n, r.eps, r.frequency));
        }
        if let Some(ks) = self.clt_ks {
            out.push_str(&format!("clt_ks,{},,{ks:.12e}\n", self.config.length));
        }
        if let Some(w) = &self.wiener {
            for (i, t) in w.times.iter().enumerate() {
                out.push_str(&format!("wiener_var,{},{t},{:.12e}\n", self.config.length, w.covariance[i][i]));
            }
        }
        if let Some(l) = &self.lil_max {
            let inside = l.iter().filter(|&&m| (0.5..=1.5).contains(&m)).count() as f64 / l.len().max(1) as f64;
            out.push_str(&format!("lil_fraction_in_band,{},,{inside:.12e}\n", self.config.length));
        }
        for (k, c) in &self.entry_histogram {
            out.push_str(&format!("entry_time,{k},,{c}\n"));
        }
        out
    }
}

/// Powers of 2 and of 10 up to `length`, and `length` itself.
pub fn ray_checkpoints(length: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut p = 1usize;
    while p <= length {
        out.push(p);
        p *= 2;
    }
    let mut p = 10usize;
    while p <= length {
        out.push(p);
        p *= 10;
    }
    out.push(length);
    out.retain(|&n| n > 0);
    out.sort_unstable();
    out.dedup();
    out
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Along-ray statistics of `φ(ξ_n)` for rays sampled from the
/// Patterson–Sullivan measure (ray `i` uses stream `i`).
pub fn ray_statistics(ps: &PattersonSullivan, f: &SubadditiveFunctional, cfg: &RayConfig) -> Result<RayStatReport> {
    let n = cfg.length;
    if n == 0 || cfg.trials == 0 {
        return Err(Error::InsufficientData);
    }
    let sigma_ok = cfg.sigma > 0.0;
    let lln_points = ray_checkpoints(n);
    let lil_points = if sigma_ok && n >= 16 { lil_checkpoints(n, 2f64.powf(0.25)) } else { Vec::new() };
    let times = [0.25, 0.5, 1.0];
    let wiener_points: Vec<usize> = times.iter().map(|t| ((t * n as f64).floor() as usize).max(1)).collect();
    let mut points: Vec<usize> = lln_points.iter().chain(&lil_points).chain(&wiener_points).copied().collect();
    points.sort_unstable();
    points.dedup();
    let pos = |k: usize| points.binary_search(&k).expect("checkpoint");

    let rays: Vec<Result<(Vec<f64>, Option<usize>)>> = (0..cfg.trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(cfg.seed, i as u64);
            let mut state = f.state();
            let mut v = ps.star();
            let mut entry = None;
            let mut values = Vec::with_capacity(points.len());
            let mut next = 0;
            for k in 1..=n {
                let (u, l) = ps.step(v, &mut rng);
                v = u;
                state.push(l)?;
                if entry.is_none() && ps.is_maximal(v) {
                    entry = Some(k);
                }
                if next < points.len() && points[next] == k {
                    values.push(state.value()?);
                    next += 1;
                }
            }
            Ok((values, entry))
        })
        .collect();
    let rays: Vec<(Vec<f64>, Option<usize>)> = rays.into_iter().collect::<Result<_>>()?;
    let trials = rays.len() as f64;

    let lln = lln_points
        .iter()
        .map(|&k| {
            let j = pos(k);
            let per: Vec<f64> = rays.iter().map(|(v, _)| v[j] / k as f64).collect();
            LlnRow {
                n: k,
                mean: per.iter().sum::<f64>() / trials,
                median_abs_error: median(per.iter().map(|x| (x - cfg.lambda).abs()).collect()),
            }
        })
        .collect();
    let mut deviations = Vec::new();
    for &eps in &cfg.eps {
        for &k in &lln_points {
            let j = pos(k);
            let hits = rays.iter().filter(|(v, _)| (v[j] - k as f64 * cfg.lambda).abs() >= k as f64 * eps).count();
            deviations.push(RayDeviationRow { eps, n: k, frequency: hits as f64 / trials });
        }
    }

    let (clt_ks, wiener, lil_max, sigma_error) = if sigma_ok {
        let scale = cfg.sigma * (n as f64).sqrt();
        let jn = pos(n);
        let terminal: Vec<f64> = rays.iter().map(|(v, _)| (v[jn] - n as f64 * cfg.lambda) / scale).collect();
        let ks = ks_sample_to_normal(&terminal, 0.0, 1.0)?;
        let samples: Vec<Vec<f64>> = rays
            .iter()
            .map(|(v, _)| wiener_points.iter().map(|&k| (v[pos(k)] - k as f64 * cfg.lambda) / scale).collect())
            .collect();
        let k = times.len();
        let means: Vec<f64> = (0..k).map(|a| samples.iter().map(|s| s[a]).sum::<f64>() / trials).collect();
        let covariance = (0..k)
            .map(|a| {
                (0..k)
                    .map(|b| {
                        samples.iter().map(|s| (s[a] - means[a]) * (s[b] - means[b])).sum::<f64>() / (trials - 1.0).max(1.0)
                    })
                    .collect()
            })
            .collect();
        let wiener = WienerMarginals { times: times.to_vec(), means, covariance, trials: rays.len(), n };
        let s2 = cfg.sigma * cfg.sigma;
        let lil: Vec<f64> = rays
            .iter()
            .map(|(v, _)| {
                lil_points
                    .iter()
                    .map(|&k| {
                        let kf = k as f64;
                        (v[pos(k)] - kf * cfg.lambda) / (2.0 * s2 * kf * kf.ln().ln()).sqrt()
                    })
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect();
        (Some(ks), Some(wiener), (!lil_points.is_empty()).then_some(lil), None)
    } else {
        (None, None, None, Some(Error::SigmaZero.to_string()))
    };

    let mut hist = std::collections::BTreeMap::new();
    let mut entry_censored = 0;
    for (_, e) in &rays {
        match e {
            Some(k) => *hist.entry(*k).or_insert(0usize) += 1,
            None => entry_censored += 1,
        }
    }
    let entry_histogram: Vec<(usize, usize)> = hist.into_iter().collect();
    let entry_tail = entry_tail_fit(&entry_histogram, rays.len());

    Ok(RayStatReport {
        config: cfg.clone(),
        lln,
        deviations,
        clt_ks,
        wiener,
        lil_checkpoints: lil_points,
        lil_max,
        entry_histogram,
        entry_censored,
        entry_tail,
        sigma_error,
    })
}

/// Fits `log P(T > k) ≈ a + k log θ` over the `k` with a positive tail.
fn entry_tail_fit(hist: &[(usize, usize)], total: usize) -> Option<EntryTailFit> {
    let max_k = hist.last()?.0;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for k in 1..max_k {
        let tail = hist.iter().filter(|(t, _)| *t > k).map(|(_, c)| c).sum::<usize>();
        if tail > 0 {
            xs.push(k as f64);
            ys.push((tail as f64 / total as f64).ln());
        }
    }
    if xs.len() < 2 {
        return None;
    }
    let fit = linear_fit(&xs, &ys).ok()?;
    let my = ys.iter().sum::<f64>() / ys.len() as f64;
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let ss_res: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - fit.intercept - fit.slope * x).powi(2)).sum();
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Some(EntryTailFit { ratio: fit.slope.exp(), r_squared, points: xs.len() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::automaton::{Automaton, Label, START};
    use crate::builtins;
    use crate::group::{Alphabet, GroupOracle};

    fn cfg(length: usize, trials: usize, lambda: f64, sigma: f64) -> RayConfig {
        RayConfig { length, trials, lambda, sigma, eps: vec![0.1], seed: 11 }
    }

    #[test]
    fn word_length_is_exactly_linear() {
        let aut = builtins::free_group_automaton(2);
        let ps = PattersonSullivan::new(&aut).unwrap();
        let f = SubadditiveFunctional::identity_word_length(GroupOracle::free(2).unwrap());
        let r = ray_statistics(&ps, &f, &cfg(64, 50, 1.0, 0.0)).unwrap();
        assert!(r.lln.iter().all(|row| row.mean == 1.0 && row.median_abs_error == 0.0));
        assert!(r.deviations.iter().all(|d| d.frequency == 0.0));
        assert!(r.clt_ks.is_none() && r.sigma_error.is_some());
        assert_eq!(r.entry_histogram, vec![(1, 50)]);
        assert!(r.entry_tail.is_none());
    }

    #[test]
    fn abs_homomorphism_concentrates_at_zero() {
        let aut = builtins::free_group_automaton(2);
        let ps = PattersonSullivan::new(&aut).unwrap();
        let f = SubadditiveFunctional::abs_homomorphism(aut.alphabet(), vec![1.0, -1.0, 0.0, 0.0]).unwrap();
        let r = ray_statistics(&ps, &f, &cfg(4096, 200, 0.0, 0.5)).unwrap();
        let last = r.lln.last().unwrap();
        assert!(last.mean < 0.05, "{last:?}");
        assert!(r.clt_ks.is_some());
    }

    #[test]
    fn transient_entry_has_geometric_tail() {
        // ∗ → t, t ↺ (letter a), t → maximal free-like block on {b, B} letters
        let alphabet = Alphabet::free(2).unwrap();
        let lab = |s: &str| Label::Letter(alphabet.lookup(s).unwrap());
        let v: Vec<String> = [START, "t", "b", "B"].iter().map(|s| s.to_string()).collect();
        let e = |f: &str, t: &str, l: &str| (f.to_string(), t.to_string(), lab(l));
        let edges = vec![
            e(START, "t", "a"),
            e("t", "t", "a"),
            e("t", "b", "b"),
            e("b", "b", "b"),
            e("b", "B", "B"),
            e("B", "B", "B"),
            e("B", "b", "b"),
        ];
        let aut = Automaton::new(alphabet, v, START, &edges, false).unwrap();
        let ps = PattersonSullivan::new(&aut).unwrap();
        let f = SubadditiveFunctional::homomorphism(aut.alphabet(), vec![1.0, -1.0, 0.0, 0.0]).unwrap();
        let r = ray_statistics(&ps, &f, &cfg(40, 4000, 0.0, 1.0)).unwrap();
        let fit = r.entry_tail.unwrap();
        // P(t → t) = q(t)/(λ q(t)) = ½ with λ = 2
        assert!((fit.ratio - 0.5).abs() < 0.05, "{fit:?}");
        assert!(fit.r_squared > 0.95);
    }

    #[test]
    fn checkpoints() {
        assert_eq!(ray_checkpoints(100), vec![1, 2, 4, 8, 10, 16, 32, 64, 100]);
        assert_eq!(ray_checkpoints(1), vec![1]);
    }
}
