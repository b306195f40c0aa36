//! Patterson–Sullivan cylinder masses, boundary rays sampled through the
//! harmonic h-transform, tree shadows, and ray limit statistics.

mod rays;

use rand::RngCore;
use serde::Serialize;

use crate::automaton::{Automaton, Label};
use crate::group::{GroupOracle, Letter, Word};
use crate::rng::unit;
use crate::spectral::{
    growth_rate, lcm, limit_vectors, maximal_components, scc_decomposition, LimitVectors, ParryMeasure,
    TransitionMatrix, DEFAULT_TOL,
};
use crate::{Error, Result};

pub use rays::{ray_checkpoints, ray_statistics, EntryTailFit, LlnRow, RayConfig, RayDeviationRow, RayStatReport};

/// `ν̂([∗, x₁, …, x_k]) = λ^{−k} q(x_k)/q(∗)` for a prefix given in
/// transition-matrix indices.
pub fn ps_cylinder_mass(a: &TransitionMatrix, lv: &LimitVectors, prefix: &[usize]) -> Result<f64> {
    if prefix.first() != Some(&lv.star) || prefix.windows(2).any(|w| !a.has_edge(w[0], w[1])) {
        return Err(Error::InadmissiblePrefix);
    }
    let last = *prefix.last().expect("nonempty");
    let k = prefix.len() - 1;
    Ok(lv.lambda.powi(-(k as i32)) * lv.q_vec[last] / lv.q_vec[lv.star])
}

/// A boundary ray prefix: automaton vertices from `∗` and the decoded word.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Ray {
    pub vertices: Vec<usize>,
    #[serde(skip)]
    pub word: Word,
}

/// Extremes of `ν(O(g,R))·λ^{|g|}` over a ball.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QuasiconformalityReport {
    pub n_max: usize,
    pub r: f64,
    pub min: f64,
    pub max: f64,
    pub argmin: String,
    pub argmax: String,
    pub elements: usize,
}

impl QuasiconformalityReport {
    pub fn ratio(&self) -> f64 {
        self.max / self.min
    }
}

/// The Patterson–Sullivan measure of an automaton, seen on path space.
#[derive(Clone, Debug)]
pub struct PattersonSullivan {
    aut: Automaton,
    a: TransitionMatrix,
    lv: LimitVectors,
    /// Transition-matrix index → automaton vertex.
    aut_index: Vec<usize>,
    /// Transition-matrix index → letter of the unique edge into it, per source.
    letters: Vec<Vec<(usize, Letter)>>,
    /// h-transform kernel rows as (target, cumulative probability).
    cumulative: Vec<Vec<(usize, f64)>>,
    maximal: Vec<bool>,
}

impl PattersonSullivan {
    pub fn new(aut: &Automaton) -> Result<Self> {
        let a = TransitionMatrix::from_automaton(aut);
        let lambda = growth_rate(&a, DEFAULT_TOL)?;
        let decomp = scc_decomposition(&a);
        let max = maximal_components(&a, &decomp, lambda, 1e-9)?;
        let p_common = max.indices.iter().fold(1, |acc, &c| lcm(acc, decomp.periods[c]));
        let lv = limit_vectors(&a, lambda, p_common, 1e-14)?;
        let aut_index = aut.counting_vertices();
        let mut maximal = vec![false; a.size()];
        for &c in &max.indices {
            for &v in &decomp.components[c] {
                maximal[v] = true;
            }
        }
        let letters = (0..a.size())
            .map(|i| {
                a.successors(i)
                    .iter()
                    .map(|&j| match aut.label(aut_index[i], aut_index[j]) {
                        Some(Label::Letter(l)) => (j, l),
                        _ => unreachable!("edges between counting vertices carry letters"),
                    })
                    .collect()
            })
            .collect();
        let cumulative = (0..a.size())
            .map(|i| {
                let qi = lv.q_vec[i];
                let mut acc = 0.0;
                let mut row: Vec<(usize, f64)> = a
                    .successors(i)
                    .iter()
                    .filter(|&&j| lv.q_vec[j] > 0.0)
                    .map(|&j| {
                        acc += lv.q_vec[j] / (lambda * qi);
                        (j, acc)
                    })
                    .collect();
                if let Some(last) = row.last_mut() {
                    last.1 = f64::INFINITY;
                }
                row
            })
            .collect();
        Ok(PattersonSullivan { aut: aut.clone(), a, lv, aut_index, letters, cumulative, maximal })
    }

    pub fn automaton(&self) -> &Automaton {
        &self.aut
    }

    pub fn transition_matrix(&self) -> &TransitionMatrix {
        &self.a
    }

    pub fn limit_vectors(&self) -> &LimitVectors {
        &self.lv
    }

    pub fn lambda(&self) -> f64 {
        self.lv.lambda
    }

    fn tm_index(&self, v: usize) -> Option<usize> {
        self.aut_index.iter().position(|&x| x == v)
    }

    fn to_tm(&self, path: &[usize]) -> Result<Vec<usize>> {
        path.iter().map(|&v| self.tm_index(v).ok_or(Error::InadmissiblePrefix)).collect()
    }

    /// Cylinder mass of a path of automaton vertices starting at `∗`.
    pub fn cylinder_mass(&self, prefix: &[usize]) -> Result<f64> {
        ps_cylinder_mass(&self.a, &self.lv, &self.to_tm(prefix)?)
    }

    /// Mass of the cylinder of rays whose coding starts with `w`.
    pub fn word_mass(&self, w: &Word) -> Result<f64> {
        let path = self.aut.path_of(w).ok_or(Error::InadmissiblePrefix)?;
        self.cylinder_mass(&path)
    }

    /// `P(v → u) = q(u)/(λ q(v))` on automaton vertices.
    pub fn transition_probability(&self, v: usize, u: usize) -> f64 {
        match (self.tm_index(v), self.tm_index(u)) {
            (Some(i), Some(j)) if self.a.has_edge(i, j) && self.lv.q_vec[i] > 0.0 => {
                self.lv.q_vec[j] / (self.lv.lambda * self.lv.q_vec[i])
            }
            _ => 0.0,
        }
    }

    pub(crate) fn step<R: RngCore + ?Sized>(&self, v: usize, rng: &mut R) -> (usize, Letter) {
        let row = &self.cumulative[v];
        let u = unit(rng);
        let j = row[row.partition_point(|&(_, c)| c <= u).min(row.len() - 1)].0;
        let l = self.letters[v].iter().find(|&&(t, _)| t == j).expect("edge").1;
        (j, l)
    }

    pub(crate) fn star(&self) -> usize {
        self.lv.star
    }

    pub(crate) fn is_maximal(&self, v: usize) -> bool {
        self.maximal[v]
    }

    /// Exact sample of the first `length` steps of a ray.
    pub fn sample_ray<R: RngCore + ?Sized>(&self, length: usize, rng: &mut R) -> Ray {
        let mut v = self.lv.star;
        let mut vertices = vec![self.aut_index[v]];
        let mut letters = Vec::with_capacity(length);
        for _ in 0..length {
            let (u, l) = self.step(v, rng);
            v = u;
            vertices.push(self.aut_index[v]);
            letters.push(l);
        }
        Ray { vertices, word: Word(letters) }
    }

    /// Largest `|ν̂(C) − Σ_children ν̂(C′)|` over cylinders up to `depth`.
    pub fn additivity_residual(&self, depth: usize) -> f64 {
        let mut worst = 0.0f64;
        let mut stack = vec![vec![self.lv.star]];
        while let Some(prefix) = stack.pop() {
            let m = ps_cylinder_mass(&self.a, &self.lv, &prefix).expect("admissible");
            let mut children = 0.0;
            for &j in self.a.successors(*prefix.last().expect("nonempty")) {
                let mut c = prefix.clone();
                c.push(j);
                children += ps_cylinder_mass(&self.a, &self.lv, &c).expect("admissible");
                if c.len() <= depth {
                    stack.push(c);
                }
            }
            worst = worst.max((m - children).abs());
        }
        worst
    }

    /// `α_v^k = ν̂(σ^{−k}[v]) / μ([v])` for `v` (automaton index) in the
    /// component carrying `parry`.
    pub fn alpha_coefficient(&self, parry: &ParryMeasure, k: usize, v: usize) -> Result<f64> {
        let name = self.aut.vertex_name(v).to_string();
        let tv = self.tm_index(v).ok_or_else(|| Error::VertexNotMaximal(name.clone()))?;
        if !self.maximal[tv] || !parry.component.contains(&tv) {
            return Err(Error::VertexNotMaximal(name));
        }
        let mu: f64 = parry.states.iter().zip(&parry.stationary).filter(|(s, _)| s[0] == tv).map(|(_, p)| p).sum();
        if mu <= 0.0 {
            return Err(Error::VertexNotMaximal(name));
        }
        // ν̂(σ^{−k}[v]) = λ^{−k} #{∗ →ᵏ v} q(v)/q(∗), accumulated with λ-scaling
        let mut row = vec![0.0; self.a.size()];
        row[self.lv.star] = 1.0;
        for _ in 0..k {
            row = self.a.apply_left(&row).into_iter().map(|x| x / self.lv.lambda).collect();
        }
        Ok(row[tv] * self.lv.q_vec[tv] / self.lv.q_vec[self.lv.star] / mu)
    }

    /// Total variation between the closed-form masses and the finite-`n`
    /// weighted measure `Σ_{k≤|g|≤n} λ^{−|g|} δ_g` (normalized), both on
    /// depth-`k` cylinders.
    pub fn finite_measure_tv(&self, n: usize, k: usize) -> Result<f64> {
        if n < k {
            return Err(Error::InvalidArgument(format!("n = {n} is below the cylinder depth {k}")));
        }
        let lam = self.lv.lambda;
        let size = self.a.size();
        // c(v) = λ^{−k} #{∗ →ᵏ v}
        let mut c = vec![0.0; size];
        c[self.lv.star] = 1.0;
        for _ in 0..k {
            c = self.a.apply_left(&c).into_iter().map(|x| x / lam).collect();
        }
        // s(v) = Σ_{j=0}^{n−k} λ^{−j} (A^j 1)(v)
        let mut y = vec![1.0; size];
        let mut s = y.clone();
        for _ in 0..(n - k) {
            y = self.a.apply(&y).into_iter().map(|x| x / lam).collect();
            for (si, yi) in s.iter_mut().zip(&y) {
                *si += yi;
            }
        }
        let total: f64 = c.iter().zip(&s).map(|(c, s)| c * s).sum();
        let q_star = self.lv.q_vec[self.lv.star];
        Ok(0.5 * (0..size).map(|v| c[v] * (s[v] / total - self.lv.q_vec[v] / q_star).abs()).sum::<f64>())
    }

    fn check_oracle(&self, oracle: &GroupOracle) -> Result<()> {
        if !oracle.is_tree_like() {
            return Err(Error::NotTreeLike);
        }
        if oracle.alphabet().symbols() != self.aut.alphabet().symbols() {
            return Err(Error::LabelMismatch("oracle and automaton alphabets differ".into()));
        }
        Ok(())
    }

    /// `ν(O(g, R))` for a tree-like oracle, as a finite union of cylinders.
    ///
    /// Along a ray the Gromov product with `g` is nondecreasing and freezes
    /// once the ray leaves the geodesic to `g`, so the shadow is decided on
    /// cylinders of depth at most `|g| + 1`.
    pub fn shadow_mass_tree(&self, oracle: &GroupOracle, g: &Word, r: f64) -> Result<f64> {
        self.check_oracle(oracle)?;
        if !(r > 0.0) {
            return Err(Error::InvalidArgument("shadow radius must be positive".into()));
        }
        let g = oracle.reduce(g)?;
        let len = g.len() as f64;
        let mut mass = 0.0;
        let mut stack: Vec<(Vec<usize>, Vec<Letter>)> = vec![(vec![self.lv.star], Vec::new())];
        while let Some((path, word)) = stack.pop() {
            let x = Word(word.clone());
            let doubled = oracle.gromov_product_doubled(&x, &g)?;
            let on_track = doubled == 2 * word.len() as i64;
            if !on_track || word.len() == g.len() {
                if doubled as f64 / 2.0 > len - r {
                    mass += ps_cylinder_mass(&self.a, &self.lv, &path)?;
                }
                continue;
            }
            let v = *path.last().expect("nonempty");
            for &(j, l) in &self.letters[v] {
                if self.lv.q_vec[j] <= 0.0 {
                    continue;
                }
                let mut p = path.clone();
                p.push(j);
                let mut w = word.clone();
                w.push(l);
                stack.push((p, w));
            }
        }
        Ok(mass.min(1.0))
    }

    /// Extremes of `ν(O(g,R))·λ^{|g|}` over `1 ≤ |g| ≤ n_max` (over the
    /// identity alone when `n_max = 0`).
    pub fn quasiconformality_report(&self, oracle: &GroupOracle, n_max: usize, r: f64) -> Result<QuasiconformalityReport> {
        self.check_oracle(oracle)?;
        let mut rep = QuasiconformalityReport {
            n_max,
            r,
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
            argmin: String::new(),
            argmax: String::new(),
            elements: 0,
        };
        for n in n_max.min(1)..=n_max {
            let scale = self.lv.lambda.powi(n as i32);
            for g in oracle.sphere(n)? {
                let v = self.shadow_mass_tree(oracle, &g, r)? * scale;
                rep.elements += 1;
                if v < rep.min {
                    rep.min = v;
                    rep.argmin = oracle.alphabet().format_word(&g);
                }
                if v > rep.max {
                    rep.max = v;
                    rep.argmax = oracle.alphabet().format_word(&g);
                }
            }
        }
        Ok(rep)
    }
}
