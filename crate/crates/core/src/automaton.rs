//! Strongly Markov structures: labeled directed graphs whose paths from the
//! start vertex biject with group elements, preserving word length.

use std::collections::{BTreeMap, HashMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::group::{Alphabet, GroupOracle, Letter, Word};
use crate::{Error, Result};

pub const START: &str = "*";
pub const ZERO: &str = "0";
pub const ID_LABEL: &str = "id";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Id,
    Letter(Letter),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub label: Label,
}

/// A strongly Markov structure with start vertex `∗` and optional vertex `0`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Automaton {
    alphabet: Alphabet,
    vertices: Vec<String>,
    start: usize,
    zero: Option<usize>,
    /// Sorted by (from name, to name).
    edges: Vec<Edge>,
    succ: Vec<Vec<(usize, Label)>>,
}

/// On-disk form of an automaton.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AutomatonFile {
    pub alphabet: Vec<String>,
    pub inverse_pairing: BTreeMap<String, String>,
    pub vertices: Vec<String>,
    pub start: String,
    pub edges: Vec<(String, String, String)>,
    #[serde(default)]
    pub augmented: bool,
}

impl Automaton {
    /// Assembles an automaton from named parts, checking structural invariants.
    pub fn new(
        alphabet: Alphabet,
        vertices: Vec<String>,
        start: &str,
        edges: &[(String, String, Label)],
        augmented: bool,
    ) -> Result<Self> {
        let mut index = HashMap::new();
        for (i, v) in vertices.iter().enumerate() {
            if index.insert(v.clone(), i).is_some() {
                return Err(Error::Parse(format!("duplicate vertex `{v}`")));
            }
        }
        let lookup = |name: &str| index.get(name).copied().ok_or_else(|| Error::Parse(format!("unknown vertex `{name}`")));
        let start = lookup(start)?;
        let zero = if augmented { Some(lookup(ZERO)?) } else { None };
        if zero == Some(start) {
            return Err(Error::Parse("start vertex cannot be the zero vertex".into()));
        }
        let mut seen = HashSet::new();
        let mut out = Vec::with_capacity(edges.len());
        for (f, t, label) in edges {
            let (from, to) = (lookup(f)?, lookup(t)?);
            if to == start {
                return Err(Error::EdgeIntoStart(f.clone()));
            }
            if !seen.insert((from, to)) {
                return Err(Error::DuplicateEdge(f.clone(), t.clone()));
            }
            match label {
                Label::Id if Some(to) != zero => {
                    return Err(Error::Parse(format!("`id` label on edge `{f}` -> `{t}` not into 0")));
                }
                Label::Letter(_) if Some(to) == zero => {
                    return Err(Error::Parse(format!("edge `{f}` -> 0 must be labeled `id`")));
                }
                Label::Letter(l) if !alphabet.contains(*l) => {
                    return Err(Error::Parse(format!("label #{} outside the alphabet", l.0)));
                }
                _ => {}
            }
            out.push(Edge { from, to, label: *label });
        }
        if let Some(z) = zero {
            for v in 0..vertices.len() {
                if !seen.contains(&(v, z)) {
                    return Err(Error::Parse(format!("augmented automaton lacks edge `{}` -> 0", vertices[v])));
                }
            }
            if out.iter().any(|e| e.from == z && e.to != z) {
                return Err(Error::Parse("vertex 0 may only loop to itself".into()));
            }
        }
        out.sort_by(|a, b| (&vertices[a.from], &vertices[a.to]).cmp(&(&vertices[b.from], &vertices[b.to])));
        let mut succ = vec![Vec::new(); vertices.len()];
        for e in &out {
            succ[e.from].push((e.to, e.label));
        }
        Ok(Automaton { alphabet, vertices, start, zero, edges: out, succ })
    }

    pub fn from_file(file: &AutomatonFile) -> Result<Self> {
        let alphabet = Alphabet::from_pairing(file.alphabet.clone(), &file.inverse_pairing)
            .map_err(|e| Error::Parse(e.to_string()))?;
        let mut edges = Vec::with_capacity(file.edges.len());
        for (f, t, l) in &file.edges {
            let label = if l == ID_LABEL {
                Label::Id
            } else {
                Label::Letter(alphabet.lookup(l).map_err(|_| Error::Parse(format!("unknown label `{l}`")))?)
            };
            edges.push((f.clone(), t.clone(), label));
        }
        Automaton::new(alphabet, file.vertices.clone(), &file.start, &edges, file.augmented)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: AutomatonFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        Automaton::from_file(&file)
    }

    /// Edges are emitted sorted lexicographically by (from, to, label).
    pub fn to_file(&self) -> AutomatonFile {
        let mut edges: Vec<(String, String, String)> = self
            .edges
            .iter()
            .map(|e| (self.vertices[e.from].clone(), self.vertices[e.to].clone(), self.label_name(e.label).to_string()))
            .collect();
        edges.sort();
        AutomatonFile {
            alphabet: self.alphabet.symbols().to_vec(),
            inverse_pairing: self.alphabet.pairing(),
            vertices: self.vertices.clone(),
            start: self.vertices[self.start].clone(),
            edges,
            augmented: self.zero.is_some(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("automaton serializes")
    }

    /// Reduced-word automaton for the free group of rank `k`.
    pub fn free_group(rank: usize) -> Result<Self> {
        let alphabet = Alphabet::free(rank)?;
        let mut vertices = vec![START.to_string()];
        vertices.extend(alphabet.symbols().iter().cloned());
        let mut edges = Vec::new();
        for x in alphabet.letters() {
            let xn = alphabet.symbol(x).to_string();
            edges.push((START.to_string(), xn.clone(), Label::Letter(x)));
            for y in alphabet.letters().filter(|&y| y != alphabet.inverse(x)) {
                edges.push((xn.clone(), alphabet.symbol(y).to_string(), Label::Letter(y)));
            }
        }
        Automaton::new(alphabet, vertices, START, &edges, false)
    }

    /// Syllable automaton for a free product of cyclic groups, accepting the
    /// normal forms produced by [`GroupOracle::free_product`].
    pub fn free_product(orders: &[u32]) -> Result<Self> {
        let oracle = GroupOracle::free_product(orders)?;
        let alphabet = oracle.alphabet().clone();
        let gens: Vec<Letter> = (0..orders.len())
            .map(|i| alphabet.lookup(&((b'a' + i as u8) as char).to_string()))
            .collect::<Result<_>>()?;
        // states (factor, signed power)
        let mut states: Vec<(usize, i64)> = Vec::new();
        for (f, &m) in orders.iter().enumerate() {
            let (maxpos, maxneg) = ((m / 2) as i64, ((m - 1) / 2) as i64);
            states.extend((1..=maxpos).map(|k| (f, k)));
            states.extend((1..=maxneg).map(|k| (f, -k)));
        }
        let name = |(f, k): (usize, i64)| -> String {
            let g = gens[f];
            let l = if k > 0 { g } else { alphabet.inverse(g) };
            alphabet.symbol(l).repeat(k.unsigned_abs() as usize)
        };
        let mut vertices = vec![START.to_string()];
        vertices.extend(states.iter().map(|&s| name(s)));
        let step = |(f, k): (usize, i64)| -> Label {
            Label::Letter(if k > 0 { gens[f] } else { alphabet.inverse(gens[f]) })
        };
        let mut edges = Vec::new();
        for &(g, k) in &states {
            if k.abs() == 1 {
                edges.push((START.to_string(), name((g, k)), step((g, k))));
            }
        }
        for &(f, k) in &states {
            for &(g, j) in &states {
                let allowed = if g != f {
                    j.abs() == 1
                } else {
                    j.signum() == k.signum() && j.abs() == k.abs() + 1
                };
                if allowed {
                    edges.push((name((f, k)), name((g, j)), step((g, j))));
                }
            }
        }
        Automaton::new(alphabet, vertices, START, &edges, false)
    }

    /// Adds vertex `0` with `x → 0` labeled `id` for every vertex and a loop at `0`.
    pub fn augment_zero_vertex(&self) -> Result<Self> {
        if self.zero.is_some() {
            return Err(Error::AlreadyAugmented);
        }
        if self.vertices.iter().any(|v| v == ZERO) {
            return Err(Error::Parse("vertex name `0` is reserved".into()));
        }
        let mut vertices = self.vertices.clone();
        vertices.push(ZERO.to_string());
        let mut edges = self.named_edges();
        for v in &vertices {
            edges.push((v.clone(), ZERO.to_string(), Label::Id));
        }
        Automaton::new(self.alphabet.clone(), vertices, &self.vertices[self.start], &edges, true)
    }

    /// Returns a copy with one more edge.
    pub fn with_edge(&self, from: &str, to: &str, label: &str) -> Result<Self> {
        let mut edges = self.named_edges();
        let label = if label == ID_LABEL { Label::Id } else { Label::Letter(self.alphabet.lookup(label)?) };
        edges.push((from.to_string(), to.to_string(), label));
        Automaton::new(self.alphabet.clone(), self.vertices.clone(), &self.vertices[self.start], &edges, self.zero.is_some())
    }

    fn named_edges(&self) -> Vec<(String, String, Label)> {
        self.edges.iter().map(|e| (self.vertices[e.from].clone(), self.vertices[e.to].clone(), e.label)).collect()
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn vertices(&self) -> &[String] {
        &self.vertices
    }

    pub fn vertex_name(&self, v: usize) -> &str {
        &self.vertices[v]
    }

    pub fn vertex(&self, name: &str) -> Option<usize> {
        self.vertices.iter().position(|v| v == name)
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn zero(&self) -> Option<usize> {
        self.zero
    }

    pub fn is_augmented(&self) -> bool {
        self.zero.is_some()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Outgoing `(target, label)` pairs, including any edge into `0`.
    pub fn successors(&self, v: usize) -> &[(usize, Label)] {
        &self.succ[v]
    }

    /// Outgoing edges that avoid `0`.
    pub fn letter_successors(&self, v: usize) -> impl Iterator<Item = (usize, Letter)> + '_ {
        self.succ[v].iter().filter_map(|&(u, l)| match l {
            Label::Letter(x) => Some((u, x)),
            Label::Id => None,
        })
    }

    pub fn label(&self, from: usize, to: usize) -> Option<Label> {
        self.succ[from].iter().find(|(u, _)| *u == to).map(|(_, l)| *l)
    }

    pub fn label_name(&self, l: Label) -> &str {
        match l {
            Label::Id => ID_LABEL,
            Label::Letter(x) => self.alphabet.symbol(x),
        }
    }

    /// Vertices other than `0`, in vertex order: the index set of `A′`.
    pub fn counting_vertices(&self) -> Vec<usize> {
        (0..self.vertices.len()).filter(|&v| Some(v) != self.zero).collect()
    }

    /// Product of labels along a vertex path starting at `∗`.
    pub fn decode(&self, path: &[usize]) -> Result<Word> {
        if path.first() != Some(&self.start) {
            return Err(Error::InadmissiblePrefix);
        }
        let mut out = Vec::with_capacity(path.len());
        for w in path.windows(2) {
            match self.label(w[0], w[1]) {
                Some(Label::Letter(x)) => out.push(x),
                Some(Label::Id) => {}
                None => return Err(Error::InadmissiblePrefix),
            }
        }
        Ok(Word(out))
    }

    /// Vertex path from `∗` spelling `w`, if `w` is accepted.
    pub fn path_of(&self, w: &Word) -> Option<Vec<usize>> {
        let mut path = vec![self.start];
        for &x in w.letters() {
            let v = *path.last().unwrap();
            let (u, _) = self.letter_successors(v).find(|&(_, l)| l == x)?;
            path.push(u);
        }
        Some(path)
    }

    /// Number of length-`n` paths from `∗` avoiding `0`, for `n = 0..=n_max`
    /// (saturating `u128`).
    pub fn path_counts(&self, n_max: usize) -> Vec<u128> {
        let mut c = vec![1u128; self.vertices.len()];
        if let Some(z) = self.zero {
            c[z] = 0;
        }
        let mut at_start = vec![1u128];
        for _ in 0..n_max {
            let next: Vec<u128> = (0..self.vertices.len())
                .map(|v| {
                    if Some(v) == self.zero {
                        0
                    } else {
                        self.letter_successors(v).fold(0u128, |acc, (u, _)| acc.saturating_add(c[u]))
                    }
                })
                .collect();
            c = next;
            at_start.push(c[self.start]);
        }
        at_start
    }

    /// Depth-`n` paths from `∗` avoiding `0`, with their decoded words, in
    /// lexicographic order of vertex indices.
    pub fn paths(&self, n: usize) -> Vec<(Vec<usize>, Word)> {
        let mut out = Vec::new();
        let mut path = vec![self.start];
        let mut word = Vec::new();
        self.paths_rec(n, &mut path, &mut word, &mut out);
        out
    }

    fn paths_rec(&self, n: usize, path: &mut Vec<usize>, word: &mut Vec<Letter>, out: &mut Vec<(Vec<usize>, Word)>) {
        if word.len() == n {
            out.push((path.clone(), Word(word.clone())));
            return;
        }
        let v = *path.last().unwrap();
        for (u, x) in self.letter_successors(v).collect::<Vec<_>>() {
            path.push(u);
            word.push(x);
            self.paths_rec(n, path, word, out);
            path.pop();
            word.pop();
        }
    }

    /// Translates automaton letters into the oracle's alphabet by symbol name.
    pub fn letter_map(&self, target: &Alphabet) -> Result<Vec<Letter>> {
        self.alphabet.letters().map(|l| target.lookup(self.alphabet.symbol(l))).collect()
    }
}

/// A witness for the first failed check.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationFailure {
    pub depth: usize,
    pub reason: String,
    pub witnesses: Vec<String>,
}

/// Outcome of [`validate_strongly_markov`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    /// Depth checked exhaustively (decoding and reduction of every path).
    pub max_depth: usize,
    /// Depth to which path counts are compared with sphere sizes.
    pub count_depth: usize,
    pub bijection_ok: bool,
    pub length_preserving_ok: bool,
    pub counts_ok: bool,
    pub path_counts: Vec<String>,
    pub sphere_sizes: Vec<u64>,
    pub first_failure: Option<ValidationFailure>,
}

impl ValidationReport {
    pub fn ok(&self) -> bool {
        self.bijection_ok && self.length_preserving_ok && self.counts_ok
    }
}

/// Checks that depth-`n` paths decode bijectively onto geodesic words of
/// length `n`: exhaustively for `n ≤ n_max`, by counts for `n ≤ count_depth`.
pub fn validate_strongly_markov(
    aut: &Automaton,
    oracle: &GroupOracle,
    n_max: usize,
    count_depth: usize,
) -> Result<ValidationReport> {
    let map = aut.letter_map(oracle.alphabet())?;
    let count_depth = count_depth.max(n_max);
    let sizes = oracle.sphere_sizes_streaming(count_depth)?;
    let counts = aut.path_counts(count_depth);
    let mut report = ValidationReport {
        max_depth: n_max,
        count_depth,
        bijection_ok: true,
        length_preserving_ok: true,
        counts_ok: true,
        path_counts: counts.iter().map(u128::to_string).collect(),
        sphere_sizes: sizes.clone(),
        first_failure: None,
    };
    let fmt = |w: &Word| {
        let s = oracle.alphabet().format_word(w);
        if s.is_empty() {
            "id".to_string()
        } else {
            s
        }
    };
    for n in 0..=n_max {
        let paths = aut.paths(n);
        // decode + reduce in parallel, in path order
        let decoded: Vec<(Word, Word)> = paths
            .par_iter()
            .map(|(_, w)| {
                let w = Word(w.letters().iter().map(|l| map[l.index()]).collect());
                let r = oracle.reduce(&w)?;
                Ok((w, r))
            })
            .collect::<Result<_>>()?;
        let mut seen: HashMap<&Word, &Word> = HashMap::new();
        for (w, r) in &decoded {
            if r.len() != n && report.length_preserving_ok {
                report.length_preserving_ok = false;
                report.bijection_ok = false;
                report.first_failure.get_or_insert(ValidationFailure {
                    depth: n,
                    reason: format!("decoded word reduces to length {} ≠ {n}", r.len()),
                    witnesses: vec![fmt(w), fmt(r)],
                });
            }
            if let Some(prev) = seen.insert(r, w) {
                if report.bijection_ok || report.first_failure.is_none() {
                    report.first_failure.get_or_insert(ValidationFailure {
                        depth: n,
                        reason: "two paths decode to the same element".into(),
                        witnesses: vec![fmt(prev), fmt(w)],
                    });
                }
                report.bijection_ok = false;
            }
        }
    }
    for n in 0..=count_depth {
        if counts[n] != sizes[n] as u128 {
            report.counts_ok = false;
            if n <= n_max {
                report.bijection_ok = false;
            }
            report.first_failure.get_or_insert(ValidationFailure {
                depth: n,
                reason: format!("{} paths but {} sphere elements", counts[n], sizes[n]),
                witnesses: Vec::new(),
            });
            break;
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn free_group_shape() {
        let f2 = Automaton::free_group(2).unwrap();
        assert_eq!(f2.vertices().len(), 5);
        assert_eq!(f2.edges().len(), 16);
        assert_eq!(f2.path_counts(2)[2], 12);
        let z = Automaton::free_group(1).unwrap();
        assert_eq!(z.vertices().len(), 3);
        assert!(z.path_counts(10)[1..].iter().all(|&c| c == 2));
    }

    #[test]
    fn free_product_shape() {
        let fp = Automaton::free_product(&[2, 3]).unwrap();
        assert_eq!(fp.vertices(), &["*", "a", "b", "B"]);
        let succ = |v: &str| -> Vec<&str> {
            let i = fp.vertex(v).unwrap();
            fp.letter_successors(i).map(|(u, _)| fp.vertex_name(u)).collect()
        };
        assert_eq!(succ("a"), vec!["B", "b"]);
        assert_eq!(succ("b"), vec!["a"]);
        assert_eq!(succ("B"), vec!["a"]);
        assert_eq!(fp.path_counts(3), vec![1, 3, 4, 6]);
        let words: Vec<String> = fp.paths(3).iter().map(|(_, w)| fp.alphabet().format_word(w)).collect();
        let mut sorted = words;
        sorted.sort();
        assert_eq!(sorted, ["BaB", "Bab", "aBa", "aba", "baB", "bab"]);
        let three = Automaton::free_product(&[2, 2, 2]).unwrap();
        assert_eq!(three.vertices().len(), 4);
        for v in 1..4 {
            assert_eq!(three.letter_successors(v).count(), 2);
        }
    }

    #[test]
    fn augmentation() {
        let f2 = Automaton::free_group(2).unwrap();
        let aug = f2.augment_zero_vertex().unwrap();
        assert_eq!(aug.vertices().len(), 6);
        assert_eq!(aug.edges().len(), 16 + 6);
        let a = aug.vertex("a").unwrap();
        let z = aug.zero().unwrap();
        let w = aug.decode(&[aug.start(), a, z, z, z]).unwrap();
        assert_eq!(aug.alphabet().format_word(&w), "a");
        assert!(matches!(aug.augment_zero_vertex(), Err(Error::AlreadyAugmented)));
        assert_eq!(aug.path_counts(4), f2.path_counts(4));
    }

    #[test]
    fn round_trip() {
        for aut in [
            Automaton::free_group(2).unwrap(),
            Automaton::free_product(&[2, 3]).unwrap().augment_zero_vertex().unwrap(),
        ] {
            let text = aut.to_json();
            let back = Automaton::from_json(&text).unwrap();
            assert_eq!(back, aut);
            assert_eq!(back.to_json(), text);
        }
    }

    #[test]
    fn load_errors() {
        let mut file = Automaton::free_group(2).unwrap().to_file();
        file.edges.push(("a".into(), "*".into(), "a".into()));
        assert!(matches!(Automaton::from_file(&file), Err(Error::EdgeIntoStart(_))));
        let mut file = Automaton::free_group(2).unwrap().to_file();
        file.edges.push(("a".into(), "b".into(), "x".into()));
        assert!(matches!(Automaton::from_file(&file), Err(Error::Parse(_))));
        let mut file = Automaton::free_group(2).unwrap().to_file();
        file.edges.push(("a".into(), "b".into(), "B".into()));
        assert!(matches!(Automaton::from_file(&file), Err(Error::DuplicateEdge(_, _))));
        assert!(matches!(Automaton::from_json("{"), Err(Error::Parse(_))));
    }

    #[test]
    fn validation() {
        let f2 = Automaton::free_group(2).unwrap();
        let o = GroupOracle::free(2).unwrap();
        let r = validate_strongly_markov(&f2, &o, 8, 8).unwrap();
        assert!(r.ok(), "{r:?}");
        let bad = f2.with_edge("a", "A", "A").unwrap();
        let r = validate_strongly_markov(&bad, &o, 2, 2).unwrap();
        assert!(!r.bijection_ok && !r.length_preserving_ok);
        assert_eq!(r.first_failure.unwrap().depth, 2);
        let fp = Automaton::free_product(&[2, 3]).unwrap();
        let r = validate_strongly_markov(&fp, &GroupOracle::free_product(&[2, 3]).unwrap(), 8, 10).unwrap();
        assert!(r.ok(), "{r:?}");
    }
}
