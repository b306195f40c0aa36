use std::collections::BTreeMap;

use serde::Serialize;

use super::{maximal_components, scc_decomposition, TransitionMatrix};
use crate::linalg::Matrix;
use crate::{Error, Result};

/// Largest support materialized by the exhaustive path measures.
pub const MAX_SUPPORT: u128 = 4_000_000;

/// `A_∞ = lim (A/λ)^{np}` and the vectors read off it.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LimitVectors {
    pub lambda: f64,
    pub p_common: usize,
    pub star: usize,
    #[serde(skip)]
    pub a_infinity: Matrix,
    /// `p_i = e_iᵀ A_∞ 1`.
    pub p_vec: Vec<f64>,
    /// `u_i = e_∗ᵀ A_∞ e_i`.
    pub u_vec: Vec<f64>,
    /// `q = (1/p) Σ_{r<p} λ^{-r} A_∞ A^r 1`, so that `A q = λ q`.
    pub q_vec: Vec<f64>,
}

impl LimitVectors {
    /// `‖A q − λ q‖∞`.
    pub fn harmonic_residual(&self, a: &TransitionMatrix) -> f64 {
        let aq = a.apply(&self.q_vec);
        aq.iter().zip(&self.q_vec).map(|(x, q)| (x - self.lambda * q).abs()).fold(0.0, f64::max)
    }
}

fn scaled_matrix(a: &TransitionMatrix, lambda: f64) -> Matrix {
    a.to_matrix().scaled(1.0 / lambda)
}

/// `m^k` by repeated squaring.
pub(crate) fn matrix_power(m: &Matrix, mut k: usize) -> Matrix {
    let mut result = Matrix::identity(m.rows());
    let mut base = m.clone();
    while k > 0 {
        if k & 1 == 1 {
            result = result.matmul(&base);
        }
        k >>= 1;
        if k > 0 {
            base = base.matmul(&base);
        }
    }
    result
}

/// Limit vectors by iterated squaring of `(A/λ)^p` until successive squares
/// differ by less than `tol` (relative to the largest entry).
pub fn limit_vectors(a: &TransitionMatrix, lambda: f64, p_common: usize, tol: f64) -> Result<LimitVectors> {
    let star = a.star().ok_or_else(|| Error::InvalidArgument("transition matrix has no start vertex".into()))?;
    let decomp = scc_decomposition(a);
    let maximal = maximal_components(a, &decomp, lambda, 1e-9)?;
    for &c in &maximal.indices {
        if p_common % decomp.periods[c] != 0 {
            return Err(Error::InvalidArgument(format!(
                "p = {p_common} is not divisible by the period {} of a maximal component",
                decomp.periods[c]
            )));
        }
    }
    let base = scaled_matrix(a, lambda);
    let mut m = matrix_power(&base, p_common);
    let mut converged = false;
    for _ in 0..64 {
        let sq = m.matmul(&m);
        let scale = sq.data().iter().fold(1.0f64, |acc, x| acc.max(x.abs()));
        let change = sq.max_abs_diff(&m);
        m = sq;
        if change <= tol * scale {
            converged = true;
            break;
        }
    }
    if !converged || !m.is_finite() {
        return Err(Error::NonConvergence("powers of A/λ did not settle; λ may be inaccurate".into()));
    }
    // exact zeros where no maximal component sits between i and j
    let n = a.size();
    let mut through = vec![vec![false; n]; n];
    for &c in &maximal.indices {
        let comp = &decomp.components[c];
        let down = a.reachable(comp);
        for i in 0..n {
            if a.reachable(&[i])[comp[0]] {
                for j in 0..n {
                    through[i][j] |= down[j];
                }
            }
        }
    }
    for i in 0..n {
        for j in 0..n {
            if !through[i][j] {
                m[(i, j)] = 0.0;
            }
        }
    }
    let ones = vec![1.0; n];
    let p_vec = m.mul_vec(&ones);
    let u_vec = m.row(star).to_vec();
    let mut q_vec = vec![0.0; n];
    let mut ar1 = ones.clone();
    for _ in 0..p_common {
        let term = m.mul_vec(&ar1);
        for (q, t) in q_vec.iter_mut().zip(&term) {
            *q += t / p_common as f64;
        }
        ar1 = a.apply(&ar1).into_iter().map(|x| x / lambda).collect();
    }
    Ok(LimitVectors { lambda, p_common, star, a_infinity: m, p_vec, u_vec, q_vec })
}

/// A probability law on vertex paths of a fixed number of steps.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PathMeasure {
    /// Number of steps of every path in the support.
    pub length: usize,
    pub paths: Vec<Vec<usize>>,
    pub weights: Vec<f64>,
}

impl PathMeasure {
    pub fn new(length: usize, mut entries: Vec<(Vec<usize>, f64)>) -> Self {
        entries.sort_by(|a, b| a.0.cmp(&b.0));
        let (paths, weights) = entries.into_iter().unzip();
        PathMeasure { length, paths, weights }
    }

    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn weight(&self, path: &[usize]) -> f64 {
        match self.paths.binary_search_by(|p| p.as_slice().cmp(path)) {
            Ok(i) => self.weights[i],
            Err(_) => 0.0,
        }
    }

    /// `path;weight` lines with vertex names joined by `-`.
    pub fn to_csv(&self, names: &[String]) -> String {
        let mut out = String::from("path;weight\n");
        for (p, w) in self.paths.iter().zip(&self.weights) {
            let path: Vec<&str> = p.iter().map(|&v| names[v].as_str()).collect();
            out.push_str(&format!("{};{:.17e}\n", path.join("-"), w));
        }
        out
    }
}

/// `½ Σ |m₁(γ) − m₂(γ)|` over the union of supports.
pub fn tv_distance(m1: &PathMeasure, m2: &PathMeasure) -> Result<f64> {
    if m1.length != m2.length {
        return Err(Error::LengthMismatch(m1.length, m2.length));
    }
    let mut diff: BTreeMap<&[usize], f64> = BTreeMap::new();
    for (p, w) in m1.paths.iter().zip(&m1.weights) {
        *diff.entry(p).or_default() += w;
    }
    for (p, w) in m2.paths.iter().zip(&m2.weights) {
        *diff.entry(p).or_default() -= w;
    }
    Ok((0.5 * diff.values().map(|d| d.abs()).sum::<f64>()).min(1.0))
}

fn paths_from(a: &TransitionMatrix, start: usize, steps: usize, out: &mut Vec<Vec<usize>>) {
    let mut path = vec![start];
    fn rec(a: &TransitionMatrix, steps: usize, path: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if path.len() == steps + 1 {
            out.push(path.clone());
            return;
        }
        let v = *path.last().unwrap();
        for &u in a.successors(v) {
            path.push(u);
            rec(a, steps, path, out);
            path.pop();
        }
    }
    rec(a, steps, &mut path, out);
}

/// Number of paths of `steps` steps starting at each vertex (saturating).
fn path_counts(a: &TransitionMatrix, steps: usize) -> Vec<u128> {
    let mut c = vec![1u128; a.size()];
    for _ in 0..steps {
        c = (0..a.size()).map(|i| a.successors(i).iter().fold(0u128, |s, &j| s.saturating_add(c[j]))).collect();
    }
    c
}

fn check_support(count: u128) -> Result<()> {
    if count > MAX_SUPPORT {
        Err(Error::SupportTooLarge(count))
    } else {
        Ok(())
    }
}

/// Uniform law `τ_n` on length-`n` paths from `∗`.
pub fn tau_measure(a: &TransitionMatrix, n: usize) -> Result<PathMeasure> {
    let star = a.star().ok_or_else(|| Error::InvalidArgument("no start vertex".into()))?;
    check_support(path_counts(a, n)[star])?;
    let mut paths = Vec::new();
    paths_from(a, star, n, &mut paths);
    let w = 1.0 / paths.len() as f64;
    Ok(PathMeasure::new(n, paths.into_iter().map(|p| (p, w)).collect()))
}

/// `μ_r(h) = e_iᵀA_∞1 / e_∗ᵀA^rA_∞1` on length-`r` paths from `∗`.
pub fn mu_r_measure(a: &TransitionMatrix, lv: &LimitVectors, r: usize) -> Result<PathMeasure> {
    check_support(path_counts(a, r)[lv.star])?;
    let mut paths = Vec::new();
    paths_from(a, lv.star, r, &mut paths);
    let denom: f64 = paths.iter().map(|p| lv.p_vec[*p.last().unwrap()]).sum();
    let entries = paths
        .into_iter()
        .filter_map(|p| {
            let w = lv.p_vec[*p.last().unwrap()] / denom;
            (w > 0.0).then_some((p, w))
        })
        .collect();
    Ok(PathMeasure::new(r, entries))
}

/// `μ_{np+r}`: `μ_r` on the first `r` steps, uniform continuation after.
pub fn mu_measure(a: &TransitionMatrix, lv: &LimitVectors, n: usize, r: usize) -> Result<PathMeasure> {
    let steps = n * lv.p_common + r;
    check_support(path_counts(a, steps)[lv.star])?;
    let head = mu_r_measure(a, lv, r)?;
    let counts = path_counts(a, n * lv.p_common);
    let mut entries = Vec::new();
    for (h, w) in head.paths.iter().zip(&head.weights) {
        let end = *h.last().unwrap();
        let mut tails = Vec::new();
        paths_from(a, end, n * lv.p_common, &mut tails);
        let each = w / counts[end] as f64;
        for t in tails {
            let mut p = h.clone();
            p.extend_from_slice(&t[1..]);
            entries.push((p, each));
        }
    }
    Ok(PathMeasure::new(steps, entries))
}

/// `π_{kp}(w₀,…,w_{kp}) = u_{w₀} p_{w_{kp}} / (λ^{kp} p_∗)`.
pub fn pi_measure(a: &TransitionMatrix, lv: &LimitVectors, steps: usize) -> Result<PathMeasure> {
    let counts = path_counts(a, steps);
    let total: u128 =
        (0..a.size()).filter(|&i| lv.u_vec[i] > 0.0).fold(0u128, |s, i| s.saturating_add(counts[i]));
    check_support(total)?;
    let scale = lv.lambda.powi(steps as i32) * lv.p_vec[lv.star];
    let mut entries = Vec::new();
    for i in (0..a.size()).filter(|&i| lv.u_vec[i] > 0.0) {
        let mut paths = Vec::new();
        paths_from(a, i, steps, &mut paths);
        for p in paths {
            let w = lv.u_vec[i] * lv.p_vec[*p.last().unwrap()] / scale;
            if w > 0.0 {
                entries.push((p, w));
            }
        }
    }
    Ok(PathMeasure::new(steps, entries))
}

/// `L = ⌊c ln n⌋` and `n′ = np − 2pL`, if nonnegative.
pub fn approx2_lengths(n: usize, p: usize, c: f64) -> Option<(usize, usize)> {
    let l = (c * (n as f64).ln()).floor().max(0.0) as usize;
    (n * p >= 2 * p * l).then(|| (l, n * p - 2 * p * l))
}

/// `τ̃^c_{np}(γ) = (e_∗ᵀA^{pL}e_i)(e_jᵀA^{pL}1) / e_∗ᵀA^{np}1` on paths `γ`
/// of length `n′` from `i` to `j`.
pub fn tau_tilde_measure(a: &TransitionMatrix, lv: &LimitVectors, n: usize, c: f64) -> Result<PathMeasure> {
    let p = lv.p_common;
    let (l, n_prime) = approx2_lengths(n, p, c)
        .ok_or_else(|| Error::InvalidArgument(format!("2p⌊c ln n⌋ exceeds np for n = {n}, c = {c}")))?;
    let (x, y, z) = approx2_weights(a, lv, n, l);
    let counts = path_counts(a, n_prime);
    let total: u128 = (0..a.size()).filter(|&i| x[i] > 0.0).fold(0u128, |s, i| s.saturating_add(counts[i]));
    check_support(total)?;
    let scale = lv.lambda.powi(n_prime as i32);
    let mut entries = Vec::new();
    for i in (0..a.size()).filter(|&i| x[i] > 0.0) {
        let mut paths = Vec::new();
        paths_from(a, i, n_prime, &mut paths);
        for path in paths {
            let w = x[i] * y[*path.last().unwrap()] / (z * scale);
            if w > 0.0 {
                entries.push((path, w));
            }
        }
    }
    Ok(PathMeasure::new(n_prime, entries))
}

/// `x_i = e_∗ᵀ(A/λ)^{pL}e_i`, `y_j = e_jᵀ(A/λ)^{pL}1`, `z = e_∗ᵀ(A/λ)^{np}1`.
fn approx2_weights(a: &TransitionMatrix, lv: &LimitVectors, n: usize, l: usize) -> (Vec<f64>, Vec<f64>, f64) {
    let p = lv.p_common;
    let mut x = vec![0.0; a.size()];
    x[lv.star] = 1.0;
    let mut y = vec![1.0; a.size()];
    for _ in 0..p * l {
        x = a.apply_left(&x).into_iter().map(|v| v / lv.lambda).collect();
        y = a.apply(&y).into_iter().map(|v| v / lv.lambda).collect();
    }
    let mut w = vec![1.0; a.size()];
    for _ in 0..n * p {
        w = a.apply(&w).into_iter().map(|v| v / lv.lambda).collect();
    }
    (x, y, w[lv.star])
}

/// The three comparison measures of the counting CLT.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CltMeasures {
    pub pi_kp: PathMeasure,
    pub mu_r: PathMeasure,
    pub tau_tilde: Option<PathMeasure>,
}

/// Exhaustive `π_{kp}`, `μ_r` and `τ̃^c_{np}`.
pub fn clt_measures(a: &TransitionMatrix, lv: &LimitVectors, k: usize, r: usize, c: f64, n: usize) -> Result<CltMeasures> {
    let tau_tilde = match approx2_lengths(n, lv.p_common, c) {
        Some(_) => Some(tau_tilde_measure(a, lv, n, c)?),
        None => None,
    };
    Ok(CltMeasures { pi_kp: pi_measure(a, lv, k * lv.p_common)?, mu_r: mu_r_measure(a, lv, r)?, tau_tilde })
}

/// `‖τ_{np+r} − μ_{np+r}‖_TV` by factoring through length-`r` prefixes:
/// both laws are uniform inside each prefix cylinder.
pub fn lem_tv_distance(a: &TransitionMatrix, lv: &LimitVectors, n: usize, r: usize) -> Result<f64> {
    let head = mu_r_measure(a, lv, r)?;
    let mut prefixes = Vec::new();
    paths_from(a, lv.star, r, &mut prefixes);
    // c_v(np)/λ^{np}
    let mut c = vec![1.0; a.size()];
    for _ in 0..n * lv.p_common {
        c = a.apply(&c).into_iter().map(|v| v / lv.lambda).collect();
    }
    let total: f64 = prefixes.iter().map(|h| c[*h.last().unwrap()]).sum();
    let tv: f64 = prefixes.iter().map(|h| (c[*h.last().unwrap()] / total - head.weight(h)).abs()).sum();
    Ok((0.5 * tv).min(1.0))
}

/// `‖π_{n′} − τ̃^c_{np}‖_TV` with `n′ = np − 2p⌊c ln n⌋`, by factoring
/// through path endpoints; `None` when `n′ < 0`.
pub fn lem_approx2_tv(a: &TransitionMatrix, lv: &LimitVectors, n: usize, c: f64) -> Option<f64> {
    let (l, n_prime) = approx2_lengths(n, lv.p_common, c)?;
    let (x, y, z) = approx2_weights(a, lv, n, l);
    let paths = matrix_power(&scaled_matrix(a, lv.lambda), n_prime);
    let ps = lv.p_vec[lv.star];
    let mut tv = 0.0;
    for i in 0..a.size() {
        for j in 0..a.size() {
            let count = paths[(i, j)];
            if count > 0.0 {
                tv += count * (lv.u_vec[i] * lv.p_vec[j] / ps - x[i] * y[j] / z).abs();
            }
        }
    }
    Some((0.5 * tv).min(1.0))
}

/// Largest deviation between `π_{kp}` and the chain built from `π_p` and the
/// one-block kernel `N_p`, and between `π_{kp}` and the marginal of
/// `π_{(k+1)p}` on its first `kp` steps.
pub fn pi_block_consistency(a: &TransitionMatrix, lv: &LimitVectors, k: usize) -> Result<(f64, f64)> {
    let p = lv.p_common;
    let big = pi_measure(a, lv, k * p)?;
    let one = pi_measure(a, lv, p)?;
    let n_p = |z: &[usize]| lv.p_vec[*z.last().unwrap()] / (lv.lambda.powi(p as i32) * lv.p_vec[z[0]]);
    let mut chain_err: f64 = 0.0;
    for (path, w) in big.paths.iter().zip(&big.weights) {
        let mut v = one.weight(&path[..=p]);
        for b in 1..k {
            v *= n_p(&path[b * p..=(b + 1) * p]);
        }
        chain_err = chain_err.max((v - w).abs());
    }
    let next = pi_measure(a, lv, (k + 1) * p)?;
    let mut marginal: BTreeMap<&[usize], f64> = BTreeMap::new();
    for (path, w) in next.paths.iter().zip(&next.weights) {
        *marginal.entry(&path[..=k * p]).or_default() += w;
    }
    let mut marg_err: f64 = 0.0;
    for (path, w) in big.paths.iter().zip(&big.weights) {
        marg_err = marg_err.max((marginal.get(path.as_slice()).copied().unwrap_or(0.0) - w).abs());
    }
    for (path, w) in &marginal {
        if big.weight(path) == 0.0 {
            marg_err = marg_err.max(w.abs());
        }
    }
    Ok((chain_err, marg_err))
}
