//! Random matrix products `M_n = X(z_n)⋯X(z_1)` driven by finite Markov
//! chains, and the limit-theorem experiments run on them.

mod experiments;
mod processes;

use std::f64::consts::LN_2;

use rand::RngCore;
use serde::Serialize;

use crate::linalg::{singular_values_2x2, Matrix, ScaledMatrix};
use crate::rng::{stream_rng, unit};
use crate::spectral::{period, scc_decomposition, TransitionMatrix};
use crate::{Error, Result};

pub use experiments::{
    berry_esseen_curve, deviation_curve, estimate_lambda_sigma, lil_checkpoints, lil_statistic, lyapunov_spectrum, simplicity_gap,
    wiener_marginals, wiener_path, BerryEsseenRow, DeviationCurve, DeviationRow, GapRow, LilReport, LyapunovSpectrum,
    ProcessFunctional, SimplicityGap, WienerMarginals,
};
pub use processes::{
    coin_diagonal_process, cross_component_consistency, hat_chain, hat_process, parry_product_process,
    ComponentEstimate, CrossComponentReport,
};

/// Initial law of a chain.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum StartLaw {
    State(usize),
    Distribution(Vec<f64>),
}

/// A finite Markov chain with a row-stochastic kernel.
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteChain {
    states: Vec<String>,
    kernel: Matrix,
    start: StartLaw,
    /// Cumulative transition weights per row: (target, cumulative probability).
    cumulative: Vec<Vec<(usize, f64)>>,
    start_cumulative: Vec<(usize, f64)>,
}

fn cumulate(row: impl Iterator<Item = (usize, f64)>) -> Vec<(usize, f64)> {
    let mut acc = 0.0;
    let mut out: Vec<(usize, f64)> = row
        .filter(|&(_, p)| p > 0.0)
        .map(|(j, p)| {
            acc += p;
            (j, acc)
        })
        .collect();
    if let Some(last) = out.last_mut() {
        last.1 = f64::INFINITY;
    }
    out
}

fn pick(cum: &[(usize, f64)], u: f64) -> usize {
    let i = cum.partition_point(|&(_, c)| c <= u);
    cum[i.min(cum.len() - 1)].0
}

impl FiniteChain {
    pub fn new(states: Vec<String>, kernel: Matrix, start: StartLaw) -> Result<Self> {
        let n = states.len();
        if n == 0 || kernel.rows() != n || kernel.cols() != n {
            return Err(Error::InvalidArgument("kernel shape does not match the state list".into()));
        }
        for i in 0..n {
            let row = kernel.row(i);
            if row.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
                return Err(Error::InvalidArgument(format!("row `{}` has a negative or non-finite entry", states[i])));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidArgument(format!("row `{}` sums to {s}", states[i])));
            }
        }
        let start_cumulative = match &start {
            StartLaw::State(s) if *s < n => vec![(*s, f64::INFINITY)],
            StartLaw::State(s) => return Err(Error::InvalidArgument(format!("start state {s} out of range"))),
            StartLaw::Distribution(d) => {
                if d.len() != n || d.iter().any(|&p| !(p >= 0.0)) || (d.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                    return Err(Error::InvalidArgument("start distribution is not a probability vector".into()));
                }
                cumulate(d.iter().copied().enumerate())
            }
        };
        let cumulative = (0..n).map(|i| cumulate(kernel.row(i).iter().copied().enumerate())).collect();
        Ok(FiniteChain { states, kernel, start, cumulative, start_cumulative })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn kernel(&self) -> &Matrix {
        &self.kernel
    }

    pub fn start(&self) -> &StartLaw {
        &self.start
    }

    pub fn with_start(&self, start: StartLaw) -> Result<Self> {
        FiniteChain::new(self.states.clone(), self.kernel.clone(), start)
    }

    pub fn state_index(&self, name: &str) -> Option<usize> {
        self.states.iter().position(|s| s == name)
    }

    pub(crate) fn graph(&self) -> TransitionMatrix {
        let adj = (0..self.len()).map(|i| self.cumulative[i].iter().map(|&(j, _)| j).collect()).collect();
        TransitionMatrix::from_adjacency(self.states.clone(), adj, None).expect("indices in range")
    }

    pub fn is_irreducible(&self) -> bool {
        let g = self.graph();
        let all: Vec<usize> = (0..self.len()).collect();
        let forward = g.reachable(&[0]);
        forward.iter().all(|&r| r) && {
            let rev: Vec<Vec<usize>> = {
                let mut rev = vec![Vec::new(); self.len()];
                for i in 0..self.len() {
                    for &j in g.successors(i) {
                        rev[j].push(i);
                    }
                }
                rev
            };
            let t = TransitionMatrix::from_adjacency(self.states.clone(), rev, None).expect("indices in range");
            let back = t.reachable(&all[..1]);
            back.iter().all(|&r| r)
        }
    }

    /// Period of an irreducible chain.
    pub fn period(&self) -> Result<usize> {
        if !self.is_irreducible() {
            return Err(Error::NotIrreducible);
        }
        let all: Vec<usize> = (0..self.len()).collect();
        Ok(period(&self.graph(), &all))
    }

    /// Every closed communicating class has period 1.
    pub fn is_aperiodic(&self) -> bool {
        let g = self.graph();
        let d = scc_decomposition(&g);
        d.components.iter().enumerate().all(|(c, comp)| {
            let closed = comp.iter().all(|&v| g.successors(v).iter().all(|&u| d.component_of[u] == c));
            !closed || d.trivial[c] || period(&g, comp) == 1
        })
    }

    /// Stationary law of an irreducible chain: solves `π(P − I) = 0`, `Σπ = 1`.
    pub fn stationary(&self) -> Result<Vec<f64>> {
        if !self.is_irreducible() {
            return Err(Error::NotIrreducible);
        }
        let n = self.len();
        // rows of (P − I)ᵀ with the last equation replaced by normalization
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = self.kernel[(j, i)] - if i == j { 1.0 } else { 0.0 };
            }
        }
        for j in 0..n {
            m[(n - 1, j)] = 1.0;
        }
        let mut rhs = vec![0.0; n];
        rhs[n - 1] = 1.0;
        let inv = m.inverse().ok_or(Error::NotIrreducible)?;
        Ok(inv.mul_vec(&rhs).into_iter().map(|x| x.max(0.0)).collect())
    }

    pub fn sample_start<R: RngCore + ?Sized>(&self, rng: &mut R) -> usize {
        pick(&self.start_cumulative, unit(rng))
    }

    pub fn step<R: RngCore + ?Sized>(&self, state: usize, rng: &mut R) -> usize {
        pick(&self.cumulative[state], unit(rng))
    }
}

/// A finite chain with an invertible matrix attached to each state.
#[derive(Clone, Debug, PartialEq)]
pub struct MarkovMatrixProcess {
    chain: FiniteChain,
    matrices: Vec<Matrix>,
    log_abs_det: Vec<f64>,
    det_negative: Vec<bool>,
    dimension: usize,
}

impl MarkovMatrixProcess {
    pub fn new(chain: FiniteChain, matrices: Vec<Matrix>) -> Result<Self> {
        if matrices.len() != chain.len() {
            return Err(Error::InvalidArgument("one matrix per state is required".into()));
        }
        let dimension = matrices[0].rows();
        let mut log_abs_det = Vec::new();
        let mut det_negative = Vec::new();
        for (m, s) in matrices.iter().zip(chain.states()) {
            if m.rows() != dimension || m.cols() != dimension || !m.is_finite() {
                return Err(Error::InvalidRepresentation(format!("matrix of state `{s}` has the wrong shape")));
            }
            let det = m.determinant();
            if det == 0.0 || !det.is_finite() {
                return Err(Error::SingularImage(s.clone()));
            }
            let lad = det.abs().ln();
            // snap unimodular determinants so that SL₂ wedge norms stay exactly 0
            log_abs_det.push(if lad.abs() < 1e-12 { 0.0 } else { lad });
            det_negative.push(det < 0.0);
        }
        Ok(MarkovMatrixProcess { chain, matrices, log_abs_det, det_negative, dimension })
    }

    /// One state, one matrix.
    pub fn single_state(m: Matrix) -> Result<Self> {
        let chain = FiniteChain::new(vec!["x".into()], Matrix::identity(1), StartLaw::State(0))?;
        MarkovMatrixProcess::new(chain, vec![m])
    }

    pub fn chain(&self) -> &FiniteChain {
        &self.chain
    }

    pub fn matrices(&self) -> &[Matrix] {
        &self.matrices
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn with_start(&self, start: StartLaw) -> Result<Self> {
        Ok(MarkovMatrixProcess { chain: self.chain.with_start(start)?, ..self.clone() })
    }

    /// `E_π[log |det X|]` under the stationary law.
    pub fn expected_log_det(&self) -> Result<f64> {
        let pi = self.chain.stationary()?;
        Ok(pi.iter().zip(&self.log_abs_det).map(|(p, l)| p * l).sum())
    }

    /// Runs `n` steps, calling `visit(k, z_k, M_k)` after each.
    pub fn run<R: RngCore + ?Sized, F: FnMut(usize, usize, &Product)>(&self, n: usize, rng: &mut R, mut visit: F) {
        let mut prod = Product::identity(self.dimension);
        let mut z = self.chain.sample_start(rng);
        for k in 1..=n {
            if k > 1 {
                z = self.chain.step(z, rng);
            }
            prod.mul_left(&self.matrices[z], self.log_abs_det[z], self.det_negative[z]);
            visit(k, z, &prod);
        }
    }
}

/// Running product with power-of-two renormalization; 2×2 products use a
/// fixed-size fast path.
#[derive(Clone, Debug)]
pub enum Product {
    Two { m: [f64; 4], exponent: i64, log_abs_det: f64 },
    General(ScaledMatrix),
}

impl Product {
    pub fn identity(d: usize) -> Self {
        if d == 2 {
            Product::Two { m: [1.0, 0.0, 0.0, 1.0], exponent: 0, log_abs_det: 0.0 }
        } else {
            Product::General(ScaledMatrix::identity(d))
        }
    }

    pub fn mul_left(&mut self, x: &Matrix, lad: f64, neg: bool) {
        match self {
            Product::Two { m, exponent, log_abs_det } => {
                let d = x.data();
                let r = [
                    d[0] * m[0] + d[1] * m[2],
                    d[0] * m[1] + d[1] * m[3],
                    d[2] * m[0] + d[3] * m[2],
                    d[2] * m[1] + d[3] * m[3],
                ];
                let big = r.iter().fold(0.0f64, |a, v| a.max(v.abs()));
                *m = r;
                if !(0.25..=4.0).contains(&big) && big > 0.0 {
                    let e = big.log2().floor() as i64;
                    let s = f64::powi(2.0, -e as i32);
                    for v in m.iter_mut() {
                        *v *= s;
                    }
                    *exponent += e;
                }
                *log_abs_det += lad;
            }
            Product::General(s) => s.mul_left(x, lad, neg),
        }
    }

    /// `log ‖M‖`.
    pub fn log_norm(&self) -> f64 {
        match self {
            Product::Two { m, exponent, .. } => {
                let (s1, _) = singular_values_2x2(m[0], m[1], m[2], m[3]);
                *exponent as f64 * LN_2 + s1.ln()
            }
            Product::General(s) => s.log_operator_norm(),
        }
    }

    /// `log ‖∧²M‖ = log σ₁σ₂`.
    pub fn log_norm_wedge2(&self) -> f64 {
        match self {
            Product::Two { log_abs_det, .. } => *log_abs_det,
            Product::General(s) => {
                let c = s.cartan_vector();
                c[0] + c.get(1).copied().unwrap_or(0.0)
            }
        }
    }

    /// Descending `log σᵢ`.
    pub fn cartan_vector(&self) -> Vec<f64> {
        match self {
            Product::Two { log_abs_det, .. } => {
                let top = self.log_norm();
                vec![top, log_abs_det - top]
            }
            Product::General(s) => s.cartan_vector(),
        }
    }

    /// Hyperbolic displacement of `i`; requires determinant one.
    pub fn displacement(&self) -> Result<f64> {
        match self {
            Product::Two { m, exponent, log_abs_det } => {
                let sm = Matrix::from_rows(&[vec![m[0], m[1]], vec![m[2], m[3]]]);
                let det = sm.determinant();
                if log_abs_det.abs() > 1e-9 || det < 0.0 {
                    return Err(Error::NotUnimodular(det * f64::powi(4.0, *exponent as i32)));
                }
                let f2: f64 = m.iter().map(|x| x * x).sum();
                let log_x = (f2 / 2.0).ln() + 2.0 * *exponent as f64 * LN_2;
                if log_x > 20.0 {
                    return Ok(log_x + LN_2 - 0.25 * (-2.0 * log_x).exp());
                }
                Ok(log_x.exp().max(1.0).acosh())
            }
            Product::General(s) => s.displacement_h2(),
        }
    }
}

/// One simulated path of a process.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Trajectory {
    pub n: usize,
    pub states: Vec<usize>,
    /// `log ‖M_k‖`, `k = 1..n`.
    pub log_norm: Vec<f64>,
    /// `log ‖∧²M_k‖`, `k = 1..n`.
    pub log_norm_wedge2: Vec<f64>,
    pub seed: u64,
    pub stream: u64,
}

/// Trajectory number `stream` of the run seeded by `seed`.
pub fn simulate(proc: &MarkovMatrixProcess, n: usize, seed: u64, stream: u64) -> Trajectory {
    let mut rng = stream_rng(seed, stream);
    let mut t = Trajectory {
        n,
        states: Vec::with_capacity(n),
        log_norm: Vec::with_capacity(n),
        log_norm_wedge2: Vec::with_capacity(n),
        seed,
        stream,
    };
    proc.run(n, &mut rng, |_, z, p| {
        t.states.push(z);
        t.log_norm.push(p.log_norm());
        t.log_norm_wedge2.push(p.log_norm_wedge2());
    });
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rot(t: f64) -> Matrix {
        Matrix::from_rows(&[vec![t.cos(), -t.sin()], vec![t.sin(), t.cos()]])
    }

    #[test]
    fn chain_validation_and_stationary() {
        let k = Matrix::from_rows(&[vec![0.5, 0.5], vec![0.25, 0.75]]);
        let c = FiniteChain::new(vec!["a".into(), "b".into()], k.clone(), StartLaw::State(0)).unwrap();
        let pi = c.stationary().unwrap();
        assert!((pi[0] - 1.0 / 3.0).abs() < 1e-14 && (pi[1] - 2.0 / 3.0).abs() < 1e-14);
        assert_eq!(c.period().unwrap(), 1);
        let bad = Matrix::from_rows(&[vec![0.5, 0.4], vec![0.25, 0.75]]);
        assert!(FiniteChain::new(vec!["a".into(), "b".into()], bad, StartLaw::State(0)).is_err());
        let red = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.5, 0.5]]);
        let r = FiniteChain::new(vec!["a".into(), "b".into()], red, StartLaw::State(0)).unwrap();
        assert!(matches!(r.stationary(), Err(Error::NotIrreducible)));
    }

    #[test]
    fn deterministic_diagonal() {
        let p = MarkovMatrixProcess::single_state(Matrix::diag(&[2.0, 0.5])).unwrap();
        let t = simulate(&p, 200, 1, 0);
        for (k, &l) in t.log_norm.iter().enumerate() {
            assert!((l - (k + 1) as f64 * LN_2).abs() < 1e-12 * (k + 1) as f64);
        }
        assert!(t.log_norm_wedge2.iter().all(|&w| w == 0.0));
    }

    #[test]
    fn rotation_has_zero_norm() {
        let p = MarkovMatrixProcess::single_state(rot(0.7)).unwrap();
        let t = simulate(&p, 500, 1, 0);
        assert!(t.log_norm.iter().all(|l| l.abs() < 1e-12));
    }

    #[test]
    fn general_path_matches_fast_path() {
        let m = Matrix::from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0]]);
        let mut a = Product::identity(2);
        let mut b = Product::General(ScaledMatrix::identity(2));
        for _ in 0..300 {
            a.mul_left(&m, 0.0, false);
            b.mul_left(&m, 0.0, false);
            assert!((a.log_norm() - b.log_norm()).abs() < 1e-10);
        }
        assert!((a.displacement().unwrap() - b.displacement().unwrap()).abs() < 1e-9);
    }

    #[test]
    fn determinism() {
        let k = Matrix::from_rows(&[vec![0.5, 0.5], vec![0.5, 0.5]]);
        let c = FiniteChain::new(vec!["h".into(), "t".into()], k, StartLaw::Distribution(vec![0.5, 0.5])).unwrap();
        let p = MarkovMatrixProcess::new(c, vec![Matrix::diag(&[4.0, 0.25]), Matrix::identity(2)]).unwrap();
        assert_eq!(simulate(&p, 100, 9, 3), simulate(&p, 100, 9, 3));
        assert_ne!(simulate(&p, 100, 9, 3).states, simulate(&p, 100, 9, 4).states);
    }
}
