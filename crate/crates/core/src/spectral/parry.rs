use super::{perron, period, TransitionMatrix, DEFAULT_TOL};
use crate::linalg::Matrix;
use crate::{Error, Result};

/// A stationary Markov chain on a maximal-entropy subshift. States are vertex
/// paths: single vertices for the vertex chain, pairs for the edge chain.
#[derive(Clone, Debug, PartialEq)]
pub struct ParryMeasure {
    /// Vertex block the chain lives on (transition-matrix indices).
    pub component: Vec<usize>,
    pub states: Vec<Vec<usize>>,
    pub state_names: Vec<String>,
    pub kernel: Matrix,
    pub stationary: Vec<f64>,
    pub period: usize,
    /// Perron radius of the block.
    pub lambda: f64,
}

impl ParryMeasure {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// `max_i |Σ_j P_ij − 1|`.
    pub fn row_sum_residual(&self) -> f64 {
        (0..self.len()).map(|i| (self.kernel.row(i).iter().sum::<f64>() - 1.0).abs()).fold(0.0, f64::max)
    }

    /// `‖πP − π‖∞`.
    pub fn stationarity_residual(&self) -> f64 {
        let pp = self.kernel.vec_mul(&self.stationary);
        pp.iter().zip(&self.stationary).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    /// `−Σ π_i P_ij log P_ij`.
    pub fn entropy(&self) -> f64 {
        let mut h = 0.0;
        for i in 0..self.len() {
            for &p in self.kernel.row(i) {
                if p > 0.0 {
                    h -= self.stationary[i] * p * p.ln();
                }
            }
        }
        h
    }

    pub fn state_index(&self, state: &[usize]) -> Option<usize> {
        self.states.iter().position(|s| s == state)
    }
}

/// Parry measure of an irreducible block: `P(i,j) = A_ij r_j / (λ r_i)` and
/// `π_i ∝ l_i r_i`.
pub fn parry_measure(a: &TransitionMatrix, block: &[usize]) -> Result<ParryMeasure> {
    let mut block = block.to_vec();
    block.sort_unstable();
    if block.is_empty() || (block.len() == 1 && !a.has_edge(block[0], block[0])) {
        return Err(Error::NotIrreducible);
    }
    let reach = a.reachable(&block[..1]);
    let back: Vec<bool> = {
        let mut rev = vec![Vec::new(); a.size()];
        for i in 0..a.size() {
            for &j in a.successors(i) {
                rev[j].push(i);
            }
        }
        let t = TransitionMatrix::from_adjacency(a.names().to_vec(), rev, None)?;
        t.reachable(&block[..1])
    };
    if block.iter().any(|&v| !reach[v] || !back[v]) {
        return Err(Error::NotIrreducible);
    }
    let pd = perron(a, &block, DEFAULT_TOL)?;
    let n = block.len();
    let mut kernel = Matrix::zeros(n, n);
    for (i, &v) in block.iter().enumerate() {
        for (j, &u) in block.iter().enumerate() {
            if a.has_edge(v, u) {
                kernel[(i, j)] = pd.right[j] / (pd.radius * pd.right[i]);
            }
        }
    }
    let mut stationary: Vec<f64> = pd.left.iter().zip(&pd.right).map(|(l, r)| l * r).collect();
    let total: f64 = stationary.iter().sum();
    for x in &mut stationary {
        *x /= total;
    }
    Ok(ParryMeasure {
        component: block.clone(),
        states: block.iter().map(|&v| vec![v]).collect(),
        state_names: block.iter().map(|&v| a.names()[v].clone()).collect(),
        kernel,
        stationary,
        period: period(a, &block),
        lambda: pd.radius,
    })
}

/// The chain of consecutive vertex pairs: `P_e((v₁,v₂),(v₂,v₃)) = P(v₂,v₃)`,
/// stationary law `μ(v₁)P(v₁,v₂)`.
pub fn edge_chain(parry: &ParryMeasure) -> ParryMeasure {
    let n = parry.len();
    let mut states = Vec::new();
    let mut names = Vec::new();
    let mut stationary = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let p = parry.kernel[(i, j)];
            if p > 0.0 {
                states.push((i, j));
                names.push(format!("{}-{}", parry.state_names[i], parry.state_names[j]));
                stationary.push(parry.stationary[i] * p);
            }
        }
    }
    let m = states.len();
    let mut kernel = Matrix::zeros(m, m);
    for (x, &(_, j)) in states.iter().enumerate() {
        for (y, &(j2, k)) in states.iter().enumerate() {
            if j2 == j {
                kernel[(x, y)] = parry.kernel[(j, k)];
            }
        }
    }
    ParryMeasure {
        component: parry.component.clone(),
        states: states.iter().map(|&(i, j)| vec![parry.component[i], parry.component[j]]).collect(),
        state_names: names,
        kernel,
        stationary,
        period: parry.period,
        lambda: parry.lambda,
    }
}
