//! Perron–Frobenius analysis of the transition matrix `A′`: components,
//! growth rate, periods, Parry measures and limit vectors.

mod measures;
mod parry;

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde::Serialize;

use crate::automaton::Automaton;
use crate::linalg::Matrix;
use crate::{Error, Result};

pub use measures::{
    approx2_lengths, clt_measures, lem_approx2_tv, lem_tv_distance, limit_vectors, mu_measure, mu_r_measure,
    pi_block_consistency, pi_measure, tau_measure, tau_tilde_measure, tv_distance, CltMeasures, LimitVectors,
    PathMeasure, MAX_SUPPORT,
};
pub use parry::{edge_chain, parry_measure, ParryMeasure};

/// Default relative tolerance of the Perron computations.
pub const DEFAULT_TOL: f64 = 1e-12;
const MAX_ITERATIONS: usize = 100_000;

/// 0/1 transition matrix on the vertices other than `0`.
#[derive(Clone, Debug, PartialEq)]
pub struct TransitionMatrix {
    names: Vec<String>,
    adj: Vec<Vec<usize>>,
    star: Option<usize>,
}

impl TransitionMatrix {
    /// `A′` of an automaton; index `i` is the `i`-th non-`0` vertex.
    pub fn from_automaton(aut: &Automaton) -> Self {
        let verts = aut.counting_vertices();
        let mut pos = vec![usize::MAX; aut.vertices().len()];
        for (i, &v) in verts.iter().enumerate() {
            pos[v] = i;
        }
        let adj = verts.iter().map(|&v| aut.letter_successors(v).map(|(u, _)| pos[u]).collect()).collect();
        let names = verts.iter().map(|&v| aut.vertex_name(v).to_string()).collect();
        TransitionMatrix::from_adjacency(names, adj, Some(pos[aut.start()])).expect("indices in range")
    }

    /// A synthetic graph given by adjacency lists.
    pub fn from_adjacency(names: Vec<String>, adj: Vec<Vec<usize>>, star: Option<usize>) -> Result<Self> {
        if names.len() != adj.len() || adj.iter().flatten().any(|&j| j >= names.len()) {
            return Err(Error::InvalidArgument("adjacency does not match the vertex list".into()));
        }
        let mut adj = adj;
        for row in &mut adj {
            row.sort_unstable();
            row.dedup();
        }
        Ok(TransitionMatrix { names, adj, star })
    }

    pub fn size(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn star(&self) -> Option<usize> {
        self.star
    }

    pub fn successors(&self, i: usize) -> &[usize] {
        &self.adj[i]
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adj[i].binary_search(&j).is_ok()
    }

    pub fn to_matrix(&self) -> Matrix {
        let n = self.size();
        let mut m = Matrix::zeros(n, n);
        for (i, row) in self.adj.iter().enumerate() {
            for &j in row {
                m[(i, j)] = 1.0;
            }
        }
        m
    }

    /// `y = A x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.adj.iter().map(|row| row.iter().map(|&j| x[j]).sum()).collect()
    }

    /// `y = xᵀ A`.
    pub fn apply_left(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.size()];
        for (i, row) in self.adj.iter().enumerate() {
            for &j in row {
                y[j] += x[i];
            }
        }
        y
    }

    /// Vertices reachable from `from` by paths of length ≥ 0.
    pub fn reachable(&self, from: &[usize]) -> Vec<bool> {
        let mut seen = vec![false; self.size()];
        let mut stack: Vec<usize> = from.to_vec();
        for &v in from {
            seen[v] = true;
        }
        while let Some(v) = stack.pop() {
            for &u in &self.adj[v] {
                if !seen[u] {
                    seen[u] = true;
                    stack.push(u);
                }
            }
        }
        seen
    }
}

/// Strongly connected components of `A′` in condensation (topological) order.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComponentDecomposition {
    pub components: Vec<Vec<usize>>,
    /// A component without internal edges (a single vertex without a loop).
    pub trivial: Vec<bool>,
    pub periods: Vec<usize>,
    pub component_of: Vec<usize>,
}

/// Strongly connected components; sources first.
pub fn scc_decomposition(a: &TransitionMatrix) -> ComponentDecomposition {
    let mut g = DiGraph::<(), ()>::new();
    let nodes: Vec<_> = (0..a.size()).map(|_| g.add_node(())).collect();
    for i in 0..a.size() {
        for &j in a.successors(i) {
            g.add_edge(nodes[i], nodes[j], ());
        }
    }
    let comps: Vec<Vec<usize>> = tarjan_scc(&g)
        .into_iter()
        .map(|c| {
            let mut v: Vec<usize> = c.into_iter().map(|n| n.index()).collect();
            v.sort_unstable();
            v
        })
        .collect();
    // Kahn order, ties broken by smallest member, for reproducible output
    let comps = topo_sort_components(a, comps);
    let mut component_of = vec![0; a.size()];
    for (c, members) in comps.iter().enumerate() {
        for &v in members {
            component_of[v] = c;
        }
    }
    let trivial: Vec<bool> =
        comps.iter().map(|c| c.len() == 1 && !a.has_edge(c[0], c[0])).collect();
    let periods = comps
        .iter()
        .zip(&trivial)
        .map(|(c, &t)| if t { 0 } else { period(a, c) })
        .collect();
    ComponentDecomposition { components: comps, trivial, periods, component_of }
}

fn topo_sort_components(a: &TransitionMatrix, comps: Vec<Vec<usize>>) -> Vec<Vec<usize>> {
    use std::cmp::Reverse;
    use std::collections::BinaryHeap;
    let k = comps.len();
    let mut of = vec![0; a.size()];
    for (c, m) in comps.iter().enumerate() {
        for &v in m {
            of[v] = c;
        }
    }
    let mut succ = vec![Vec::new(); k];
    let mut indeg = vec![0usize; k];
    for i in 0..a.size() {
        for &j in a.successors(i) {
            let (ci, cj) = (of[i], of[j]);
            if ci != cj && !succ[ci].contains(&cj) {
                succ[ci].push(cj);
                indeg[cj] += 1;
            }
        }
    }
    let mut heap: BinaryHeap<Reverse<(usize, usize)>> =
        (0..k).filter(|&c| indeg[c] == 0).map(|c| Reverse((comps[c][0], c))).collect();
    let mut order = Vec::with_capacity(k);
    while let Some(Reverse((_, c))) = heap.pop() {
        order.push(c);
        for &d in &succ[c] {
            indeg[d] -= 1;
            if indeg[d] == 0 {
                heap.push(Reverse((comps[d][0], d)));
            }
        }
    }
    let mut slots: Vec<Option<Vec<usize>>> = comps.into_iter().map(Some).collect();
    order.into_iter().map(|c| slots[c].take().unwrap()).collect()
}

/// Period of an irreducible block: gcd of `level(u) + 1 − level(v)` over its
/// edges, with BFS levels from the first vertex.
pub fn period(a: &TransitionMatrix, block: &[usize]) -> usize {
    let inside = |v: usize| block.binary_search(&v).is_ok();
    let mut level = vec![usize::MAX; a.size()];
    let root = block[0];
    level[root] = 0;
    let mut queue = std::collections::VecDeque::from([root]);
    while let Some(v) = queue.pop_front() {
        for &u in a.successors(v) {
            if inside(u) && level[u] == usize::MAX {
                level[u] = level[v] + 1;
                queue.push_back(u);
            }
        }
    }
    let mut g = 0usize;
    for &v in block {
        for &u in a.successors(v) {
            if inside(u) {
                let d = (level[v] as i64 + 1 - level[u] as i64).unsigned_abs() as usize;
                g = gcd(g, d);
            }
        }
    }
    g
}

pub(crate) fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

pub(crate) fn lcm(a: usize, b: usize) -> usize {
    if a == 0 || b == 0 {
        a.max(b)
    } else {
        a / gcd(a, b) * b
    }
}

/// Perron data of an irreducible block.
#[derive(Clone, Debug, PartialEq)]
pub struct PerronData {
    pub radius: f64,
    /// Right vector, max-norm 1, indexed like the block.
    pub right: Vec<f64>,
    /// Left vector normalized so that `l·r = 1`.
    pub left: Vec<f64>,
}

/// Perron radius and vectors of the block `A[block, block]` by power
/// iteration on `B + I`, stopped when the Collatz–Wielandt bounds agree to
/// relative `tol`.
pub fn perron(a: &TransitionMatrix, block: &[usize], tol: f64) -> Result<PerronData> {
    let local: std::collections::HashMap<usize, usize> = block.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let rows: Vec<Vec<usize>> =
        block.iter().map(|&v| a.successors(v).iter().filter_map(|u| local.get(u).copied()).collect()).collect();
    let mut cols: Vec<Vec<usize>> = vec![Vec::new(); block.len()];
    for (i, row) in rows.iter().enumerate() {
        for &j in row {
            cols[j].push(i);
        }
    }
    let (radius, right) = power(&rows, tol)?;
    let (_, mut left) = power(&cols, tol)?;
    let dot: f64 = left.iter().zip(&right).map(|(l, r)| l * r).sum();
    for l in &mut left {
        *l /= dot;
    }
    Ok(PerronData { radius, right, left })
}

fn power(rows: &[Vec<usize>], tol: f64) -> Result<(f64, Vec<f64>)> {
    let n = rows.len();
    if rows.iter().all(Vec::is_empty) {
        return Ok((0.0, vec![1.0; n]));
    }
    let mut v = vec![1.0; n];
    for _ in 0..MAX_ITERATIONS {
        let bv: Vec<f64> = rows.iter().map(|r| r.iter().map(|&j| v[j]).sum()).collect();
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for (x, y) in v.iter().zip(&bv) {
            lo = lo.min(y / x);
            hi = hi.max(y / x);
        }
        if hi - lo <= tol * hi {
            return Ok(((hi + lo) / 2.0, v));
        }
        let mut next: Vec<f64> = v.iter().zip(&bv).map(|(x, y)| x + y).collect();
        let m = next.iter().cloned().fold(0.0, f64::max);
        for x in &mut next {
            *x /= m;
        }
        v = next;
    }
    Err(Error::NonConvergence(format!("power iteration did not reach relative tolerance {tol:e}")))
}

/// Largest Perron radius over the components.
pub fn growth_rate(a: &TransitionMatrix, tol: f64) -> Result<f64> {
    let d = scc_decomposition(a);
    if d.trivial.iter().all(|&t| t) {
        return Err(Error::NoGrowth);
    }
    let mut best: f64 = 0.0;
    for (c, &t) in d.components.iter().zip(&d.trivial) {
        if !t {
            best = best.max(perron(a, c, tol)?.radius);
        }
    }
    Ok(best)
}

/// Maximal components and whether they are pairwise unreachable.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MaximalComponents {
    /// Indices into [`ComponentDecomposition::components`].
    pub indices: Vec<usize>,
    pub disjoint: bool,
}

pub fn maximal_components(
    a: &TransitionMatrix,
    decomp: &ComponentDecomposition,
    lambda: f64,
    tol: f64,
) -> Result<MaximalComponents> {
    let mut indices = Vec::new();
    for (c, comp) in decomp.components.iter().enumerate() {
        if !decomp.trivial[c] && perron(a, comp, DEFAULT_TOL)?.radius >= lambda * (1.0 - tol) {
            indices.push(c);
        }
    }
    let mut disjoint = true;
    for &c in &indices {
        let reach = a.reachable(&decomp.components[c]);
        for &d in &indices {
            if d != c && decomp.components[d].iter().any(|&v| reach[v]) {
                disjoint = false;
            }
        }
    }
    Ok(MaximalComponents { indices, disjoint })
}

/// Summary of the spectral analysis of an automaton.
#[derive(Clone, Debug, Serialize)]
pub struct SpectralReport {
    pub lambda: f64,
    pub has_growth: bool,
    pub vertices: Vec<String>,
    pub components: Vec<Vec<String>>,
    pub trivial: Vec<bool>,
    pub radii: Vec<f64>,
    pub periods: Vec<usize>,
    pub maximal: Vec<bool>,
    pub maximal_disjoint: bool,
    pub p_common: usize,
    /// `(min, max)` of `#S_n λ⁻ⁿ` over `n ∈ [5, 30]`.
    pub pure_growth_constants: (f64, f64),
    pub q_vec: Vec<f64>,
    pub p_vec: Vec<f64>,
    pub u_vec: Vec<f64>,
}

/// Full spectral analysis with default tolerances.
pub fn analyze(a: &TransitionMatrix) -> Result<SpectralReport> {
    let decomp = scc_decomposition(a);
    let lambda = growth_rate(a, DEFAULT_TOL)?;
    let maximal = maximal_components(a, &decomp, lambda, 1e-9)?;
    let mut radii = Vec::new();
    for (c, comp) in decomp.components.iter().enumerate() {
        radii.push(if decomp.trivial[c] { 0.0 } else { perron(a, comp, DEFAULT_TOL)?.radius });
    }
    let p_common = maximal.indices.iter().fold(1, |acc, &c| lcm(acc, decomp.periods[c]));
    let has_growth = lambda > 1.0 + 1e-9;
    let (q_vec, p_vec, u_vec) = if has_growth && maximal.disjoint && a.star().is_some() {
        let lv = limit_vectors(a, lambda, p_common, 1e-13)?;
        (lv.q_vec, lv.p_vec, lv.u_vec)
    } else {
        (Vec::new(), Vec::new(), Vec::new())
    };
    let pure_growth_constants = match a.star() {
        Some(s) => {
            let mut c = vec![1.0; a.size()];
            let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
            for n in 1..=30 {
                c = a.apply(&c).into_iter().map(|x| x / lambda).collect();
                if n >= 5 {
                    lo = lo.min(c[s]);
                    hi = hi.max(c[s]);
                }
            }
            (lo, hi)
        }
        None => (f64::NAN, f64::NAN),
    };
    let names = |c: &Vec<usize>| c.iter().map(|&v| a.names()[v].clone()).collect();
    let mut flags = vec![false; decomp.components.len()];
    for &c in &maximal.indices {
        flags[c] = true;
    }
    Ok(SpectralReport {
        lambda,
        has_growth,
        vertices: a.names().to_vec(),
        components: decomp.components.iter().map(names).collect(),
        trivial: decomp.trivial.clone(),
        radii,
        periods: decomp.periods.clone(),
        maximal: flags,
        maximal_disjoint: maximal.disjoint,
        p_common,
        pure_growth_constants,
        q_vec,
        p_vec,
        u_vec,
    })
}
