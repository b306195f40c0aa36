use num_traits::ToPrimitive;
use rayon::prelude::*;
use serde::Serialize;

use super::{check_functional, fold_sphere, sample_sphere_uniform, CountTable, EXACT_LIMIT};
use crate::automaton::Automaton;
use crate::group::{LinearRepresentation, SubadditiveFunctional};
use crate::rng::stream_rng;
use crate::stats::{freedman_diaconis_width, RunningStats};
use crate::{Error, Result};

/// Monte Carlo work is split into chunks of this many draws, chunk `i` using
/// random stream `i`.
pub const MC_CHUNK: usize = 1024;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Exact,
    MonteCarlo { samples: usize, seed: u64 },
}

impl Mode {
    pub fn label(&self) -> &'static str {
        match self {
            Mode::Exact => "exact",
            Mode::MonteCarlo { .. } => "monte_carlo",
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            Mode::Exact => None,
            Mode::MonteCarlo { seed, .. } => Some(*seed),
        }
    }
}

/// Fixed bins `[origin + k·width, origin + (k+1)·width)`, `k < bins`; values
/// outside are clamped into the end bins.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HistogramSpec {
    pub origin: f64,
    pub width: f64,
    pub bins: usize,
}

impl HistogramSpec {
    /// Freedman–Diaconis bins covering the given law.
    pub fn freedman_diaconis(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InsufficientData);
        }
        let w = vec![1.0; values.len()];
        let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut width = freedman_diaconis_width(values, &w, values.len() as f64);
        if !(width > 0.0) {
            width = ((hi - lo) / 10.0).max(1e-6);
        }
        let bins = (((hi - lo) / width).floor() as usize + 1).clamp(1, 10_000);
        Ok(HistogramSpec { origin: lo, width, bins })
    }

    fn bin(&self, x: f64) -> usize {
        let k = ((x - self.origin) / self.width).floor();
        if k < 0.0 {
            0
        } else {
            (k as usize).min(self.bins - 1)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Histogram {
    pub spec: HistogramSpec,
    /// Probability mass per bin.
    pub mass: Vec<f64>,
}

/// Law of `φ` over a sphere, exact or sampled.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SphereStatistics {
    pub n: usize,
    /// `#S_n` in decimal.
    pub count: String,
    pub mean: f64,
    pub variance: f64,
    /// Standard error of the mean; zero in exact mode.
    pub standard_error: f64,
    pub lambda_ref: f64,
    /// `(ε, fraction with |φ/n − Λ_ref| > ε)`.
    pub deviation_fractions: Vec<(f64, f64)>,
    /// Law of `(φ − nΛ_ref)/√n`.
    pub histogram: Histogram,
    pub mode: Mode,
    pub functional: String,
}

impl SphereStatistics {
    pub fn csv_header() -> &'static str {
        "n,count,mean,variance,eps,fraction,mode,seed"
    }

    /// One CSV row per ε.
    pub fn csv_rows(&self) -> Vec<String> {
        let seed = self.mode.seed().map(|s| s.to_string()).unwrap_or_default();
        let row = |eps: String, frac: String| {
            format!("{},{},{:.12e},{:.12e},{},{},{},{}", self.n, self.count, self.mean, self.variance, eps, frac, self.mode.label(), seed)
        };
        if self.deviation_fractions.is_empty() {
            return vec![row(String::new(), String::new())];
        }
        self.deviation_fractions.iter().map(|(e, f)| row(format!("{e}"), format!("{f:.12e}"))).collect()
    }
}

#[derive(Clone, Debug)]
struct Acc {
    stats: RunningStats,
    exceed: Vec<u64>,
    bins: Vec<u64>,
}

impl Acc {
    fn new(eps: usize, bins: usize) -> Self {
        Acc { stats: RunningStats::new(), exceed: vec![0; eps], bins: vec![0; bins] }
    }

    fn push(&mut self, x: f64, n: usize, lambda: f64, eps: &[f64], spec: &HistogramSpec) {
        self.stats.push(x);
        let dev = if n > 0 { (x / n as f64 - lambda).abs() } else { x.abs() };
        for (c, &e) in self.exceed.iter_mut().zip(eps) {
            if dev > e {
                *c += 1;
            }
        }
        let z = if n > 0 { (x - n as f64 * lambda) / (n as f64).sqrt() } else { x };
        self.bins[spec.bin(z)] += 1;
    }

    fn merge(mut self, other: Acc) -> Acc {
        self.stats.merge(&other.stats);
        for (a, b) in self.exceed.iter_mut().zip(&other.exceed) {
            *a += b;
        }
        for (a, b) in self.bins.iter_mut().zip(&other.bins) {
            *a += b;
        }
        self
    }
}

/// Mean, variance, deviation fractions and histogram of `φ` over `S_n`.
///
/// Exact mode enumerates the sphere (`n ≤` [`EXACT_LIMIT`]); Monte Carlo mode
/// draws exactly uniform elements using `table`.
#[allow(clippy::too_many_arguments)]
pub fn spherical_statistics(
    aut: &Automaton,
    table: &CountTable,
    f: &SubadditiveFunctional,
    n: usize,
    mode: Mode,
    lambda_ref: f64,
    eps: &[f64],
    hist: &HistogramSpec,
) -> Result<SphereStatistics> {
    if hist.bins == 0 || !(hist.width > 0.0) {
        return Err(Error::InvalidArgument("histogram needs positive width and at least one bin".into()));
    }
    table.check_depth(n)?;
    let acc = match mode {
        Mode::Exact => fold_sphere(
            aut,
            f,
            n,
            EXACT_LIMIT,
            || Acc::new(eps.len(), hist.bins),
            |acc, s, _| {
                acc.push(s.value()?, n, lambda_ref, eps, hist);
                Ok(())
            },
            Acc::merge,
        )?,
        Mode::MonteCarlo { samples, seed } => {
            let values = sample_values(aut, table, f, n, samples, seed)?;
            let mut acc = Acc::new(eps.len(), hist.bins);
            for x in values {
                acc.push(x, n, lambda_ref, eps, hist);
            }
            acc
        }
    };
    let total = acc.stats.count.max(1.0);
    if mode == Mode::Exact {
        debug_assert_eq!(acc.stats.count, table.sphere_size(n).to_f64().unwrap_or(f64::NAN));
    }
    Ok(SphereStatistics {
        n,
        count: table.sphere_size(n).to_string(),
        mean: acc.stats.mean,
        variance: acc.stats.variance(),
        standard_error: if mode == Mode::Exact { 0.0 } else { acc.stats.standard_error() },
        lambda_ref,
        deviation_fractions: eps.iter().zip(&acc.exceed).map(|(&e, &c)| (e, c as f64 / total)).collect(),
        histogram: Histogram { spec: *hist, mass: acc.bins.iter().map(|&c| c as f64 / total).collect() },
        mode,
        functional: f.name().to_string(),
    })
}

/// `φ(g)` for every `g ∈ S_n`, in enumeration order.
pub fn sphere_values(aut: &Automaton, f: &SubadditiveFunctional, n: usize) -> Result<Vec<f64>> {
    fold_sphere(
        aut,
        f,
        n,
        EXACT_LIMIT,
        Vec::new,
        |acc, s, _| {
            acc.push(s.value()?);
            Ok(())
        },
        |mut a, b| {
            a.extend(b);
            a
        },
    )
}

/// `φ` at `samples` exactly uniform draws from `S_n`; deterministic in `seed`.
pub fn sample_values(
    aut: &Automaton,
    table: &CountTable,
    f: &SubadditiveFunctional,
    n: usize,
    samples: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    check_functional(aut, f)?;
    table.check_depth(n)?;
    let chunks = samples.div_ceil(MC_CHUNK);
    let parts: Vec<Result<Vec<f64>>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream_rng(seed, c as u64);
            let size = MC_CHUNK.min(samples - c * MC_CHUNK);
            (0..size).map(|_| f.eval(&sample_sphere_uniform(aut, table, n, &mut rng)?)).collect()
        })
        .collect();
    let mut out = Vec::with_capacity(samples);
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

/// Exact sphere average of `κ⃗(ρ(g))/n` (Cartan projection over `n`).
pub fn cartan_sphere_means(aut: &Automaton, rep: &LinearRepresentation, n: usize) -> Result<Vec<f64>> {
    if n == 0 {
        return Ok(vec![0.0; rep.dimension()]);
    }
    let f = SubadditiveFunctional::log_norm(rep.clone());
    let d = rep.dimension();
    let (sum, count) = fold_sphere(
        aut,
        &f,
        n,
        EXACT_LIMIT,
        || (vec![0.0; d], 0u64),
        |acc, s, _| {
            let k = s.matrix().expect("matrix state").cartan_vector();
            for (a, x) in acc.0.iter_mut().zip(k) {
                *a += x;
            }
            acc.1 += 1;
            Ok(())
        },
        |mut a, b| {
            for (x, y) in a.0.iter_mut().zip(b.0) {
                *x += y;
            }
            (a.0, a.1 + b.1)
        },
    )?;
    Ok(sum.into_iter().map(|s| s / (count as f64 * n as f64)).collect())
}
