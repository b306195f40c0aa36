//! Exact sphere counts, enumeration, uniform sampling and the spherical
//! statistics pipelines.

mod clt;
mod limits;
mod sphere;

use std::fs;
use std::path::{Path, PathBuf};

use num_bigint::BigUint;
use num_traits::{One, Zero};
use rayon::prelude::*;
use rand::RngCore;
use sha2::{Digest, Sha256};

use crate::automaton::Automaton;
use crate::group::{Letter, SubadditiveFunctional, FunctionalState, Word};
use crate::rng::uniform_below;
use crate::{Error, Result};

pub use clt::{clt_comparison_suite, Approx2Row, CltSuiteReport, LemTvRow};
pub use limits::{estimate_limits, LimitEstimates, LimitMethod, LimitPoint, Schedule};
pub use sphere::{
    cartan_sphere_means, sample_values, sphere_values, spherical_statistics, Histogram, HistogramSpec, Mode,
    SphereStatistics,
};

/// Default cap on exhaustive enumeration depth.
pub const EXACT_LIMIT: usize = 16;

/// Environment variable naming the count-table cache directory.
pub const CACHE_ENV: &str = "HYPERLAB_CACHE_DIR";

/// `c_v(m)`: number of length-`m` letter paths from `v` avoiding `0`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CountTable {
    vertex_names: Vec<String>,
    start: usize,
    /// `counts[m][v]`.
    counts: Vec<Vec<BigUint>>,
    hash: String,
}

/// Hex sha256 of an automaton's canonical serialization.
pub fn automaton_hash(aut: &Automaton) -> String {
    hex::encode(Sha256::digest(aut.to_json().as_bytes()))
}

fn letter_successors(aut: &Automaton) -> Vec<Vec<(usize, Letter)>> {
    (0..aut.vertices().len()).map(|v| aut.letter_successors(v).collect()).collect()
}

/// Transfer-matrix dynamic program with exact integers.
pub fn build_count_table(aut: &Automaton, n_max: usize) -> CountTable {
    let succ = letter_successors(aut);
    let nv = aut.vertices().len();
    let mut first = vec![BigUint::one(); nv];
    if let Some(z) = aut.zero() {
        first[z] = BigUint::zero();
    }
    let mut counts = vec![first];
    for m in 1..=n_max {
        let prev = &counts[m - 1];
        let row = (0..nv)
            .map(|v| {
                if Some(v) == aut.zero() {
                    BigUint::zero()
                } else {
                    succ[v].iter().fold(BigUint::zero(), |acc, &(u, _)| acc + &prev[u])
                }
            })
            .collect();
        counts.push(row);
    }
    CountTable { vertex_names: aut.vertices().to_vec(), start: aut.start(), counts, hash: automaton_hash(aut) }
}

impl CountTable {
    pub fn n_max(&self) -> usize {
        self.counts.len() - 1
    }

    pub fn count(&self, v: usize, m: usize) -> &BigUint {
        &self.counts[m][v]
    }

    /// `#S_m = c_∗(m)`.
    pub fn sphere_size(&self, m: usize) -> &BigUint {
        &self.counts[m][self.start]
    }

    pub fn automaton_hash(&self) -> &str {
        &self.hash
    }

    fn check_depth(&self, n: usize) -> Result<()> {
        if n > self.n_max() {
            Err(Error::DepthTooLarge(n, self.n_max()))
        } else {
            Ok(())
        }
    }

    /// Cache text: a header line, then `vertex m count` lines.
    pub fn to_cache_text(&self) -> String {
        let mut out = format!("# hyperlab count table sha256={} n_max={}\n", self.hash, self.n_max());
        for (m, row) in self.counts.iter().enumerate() {
            for (v, c) in row.iter().enumerate() {
                out.push_str(&format!("{} {} {}\n", self.vertex_names[v], m, c));
            }
        }
        out
    }

    /// Parses cache text written for `aut`; rejects stale files.
    pub fn from_cache_text(aut: &Automaton, text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::Parse("empty count cache".into()))?;
        let hash = automaton_hash(aut);
        let fields: Vec<&str> = header.split_whitespace().collect();
        let got_hash = fields.iter().find_map(|f| f.strip_prefix("sha256=")).unwrap_or("");
        if got_hash != hash {
            return Err(Error::Parse("count cache belongs to another automaton".into()));
        }
        let n_max: usize = fields
            .iter()
            .find_map(|f| f.strip_prefix("n_max="))
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Parse("count cache header lacks n_max".into()))?;
        let nv = aut.vertices().len();
        let mut counts = vec![vec![None; nv]; n_max + 1];
        for line in lines {
            let mut parts = line.rsplitn(3, ' ');
            let (c, m, v) = (parts.next(), parts.next(), parts.next());
            let (Some(c), Some(m), Some(v)) = (c, m, v) else {
                return Err(Error::Parse(format!("bad count cache line `{line}`")));
            };
            let m: usize = m.parse().map_err(|_| Error::Parse(format!("bad depth in `{line}`")))?;
            let c: BigUint = c.parse().map_err(|_| Error::Parse(format!("bad count in `{line}`")))?;
            let v = aut.vertex(v).ok_or_else(|| Error::Parse(format!("unknown vertex in `{line}`")))?;
            if m > n_max {
                return Err(Error::Parse(format!("depth beyond n_max in `{line}`")));
            }
            counts[m][v] = Some(c);
        }
        let counts = counts
            .into_iter()
            .map(|row| row.into_iter().collect::<Option<Vec<_>>>())
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| Error::Parse("count cache is incomplete".into()))?;
        Ok(CountTable { vertex_names: aut.vertices().to_vec(), start: aut.start(), counts, hash })
    }

    /// Table truncated to depth `n_max`.
    pub fn truncated(&self, n_max: usize) -> CountTable {
        let mut t = self.clone();
        t.counts.truncate(n_max + 1);
        t
    }
}

fn cache_path(dir: &Path, aut: &Automaton) -> PathBuf {
    dir.join(format!("{}.counts", &automaton_hash(aut)[..16]))
}

/// Loads the table from `dir` when a fresh, deep-enough copy is cached;
/// otherwise builds it and refreshes the cache.
pub fn load_or_build(aut: &Automaton, n_max: usize, dir: Option<&Path>) -> Result<CountTable> {
    let Some(dir) = dir else {
        return Ok(build_count_table(aut, n_max));
    };
    let path = cache_path(dir, aut);
    if let Ok(text) = fs::read_to_string(&path) {
        if let Ok(t) = CountTable::from_cache_text(aut, &text) {
            if t.n_max() >= n_max {
                return Ok(t.truncated(n_max));
            }
        }
    }
    let t = build_count_table(aut, n_max);
    fs::create_dir_all(dir)?;
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, t.to_cache_text())?;
    fs::rename(&tmp, &path)?;
    Ok(t)
}

/// The cache directory from the environment, if set.
pub fn cache_dir_from_env() -> Option<PathBuf> {
    std::env::var_os(CACHE_ENV).filter(|s| !s.is_empty()).map(PathBuf::from)
}

/// Depth-first iterator over length-`n` paths from `∗`, yielding the decoded
/// word and the end vertex in lexicographic edge order.
pub struct SphereIter {
    succ: Vec<Vec<(usize, Letter)>>,
    n: usize,
    /// (vertex, next successor index)
    stack: Vec<(usize, usize)>,
    word: Vec<Letter>,
    done: bool,
}

impl Iterator for SphereIter {
    type Item = (Word, usize);

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        if self.n == 0 {
            self.done = true;
            return Some((Word(Vec::new()), self.stack[0].0));
        }
        loop {
            let (v, i) = *self.stack.last()?;
            if i >= self.succ[v].len() {
                self.stack.pop();
                self.word.pop();
                if self.stack.is_empty() {
                    self.done = true;
                    return None;
                }
                continue;
            }
            self.stack.last_mut().unwrap().1 += 1;
            let (u, l) = self.succ[v][i];
            self.word.push(l);
            if self.word.len() == self.n {
                let item = (Word(self.word.clone()), u);
                self.word.pop();
                return Some(item);
            }
            self.stack.push((u, 0));
        }
    }
}

/// Streams the sphere `S_n`; `n` must not exceed [`EXACT_LIMIT`].
pub fn enumerate_sphere(aut: &Automaton, n: usize) -> Result<SphereIter> {
    enumerate_sphere_with_limit(aut, n, EXACT_LIMIT)
}

pub fn enumerate_sphere_with_limit(aut: &Automaton, n: usize, limit: usize) -> Result<SphereIter> {
    if n > limit {
        return Err(Error::DepthTooLarge(n, limit));
    }
    Ok(SphereIter { succ: letter_successors(aut), n, stack: vec![(aut.start(), 0)], word: Vec::new(), done: false })
}

/// Exactly uniform element of `S_n`: a uniform rank in `[0, #S_n)` is
/// unranked along the completion counts.
pub fn sample_sphere_uniform<R: RngCore + ?Sized>(aut: &Automaton, table: &CountTable, n: usize, rng: &mut R) -> Result<Word> {
    Ok(sample_sphere_path(aut, table, n, rng)?.0)
}

/// As [`sample_sphere_uniform`], also returning the visited vertices.
pub fn sample_sphere_path<R: RngCore + ?Sized>(
    aut: &Automaton,
    table: &CountTable,
    n: usize,
    rng: &mut R,
) -> Result<(Word, Vec<usize>)> {
    table.check_depth(n)?;
    if table.automaton_hash() != automaton_hash(aut) {
        return Err(Error::InvalidArgument("count table was built for another automaton".into()));
    }
    let total = table.sphere_size(n);
    if total.is_zero() {
        return Err(Error::InvalidArgument(format!("sphere of radius {n} is empty")));
    }
    let rank = uniform_below(rng, total);
    unrank(aut, table, n, rank)
}

/// The `rank`-th path of length `n` in lexicographic edge order.
pub fn unrank(aut: &Automaton, table: &CountTable, n: usize, mut rank: BigUint) -> Result<(Word, Vec<usize>)> {
    table.check_depth(n)?;
    if &rank >= table.sphere_size(n) {
        return Err(Error::InvalidArgument("rank out of range".into()));
    }
    let mut v = aut.start();
    let mut word = Vec::with_capacity(n);
    let mut path = Vec::with_capacity(n + 1);
    path.push(v);
    for k in 0..n {
        let remaining = n - k - 1;
        let mut chosen = None;
        for (u, l) in aut.letter_successors(v) {
            let c = table.count(u, remaining);
            if &rank < c {
                chosen = Some((u, l));
                break;
            }
            rank -= c;
        }
        let (u, l) = chosen.expect("rank below c_v(m) selects an edge");
        word.push(l);
        path.push(u);
        v = u;
    }
    Ok((Word(word), path))
}

/// Functionals must read letters of the automaton's alphabet.
pub(crate) fn check_functional(aut: &Automaton, f: &SubadditiveFunctional) -> Result<()> {
    if let Some(rep) = f.representation() {
        if rep.alphabet() != aut.alphabet() {
            return Err(Error::LabelMismatch("representation alphabet differs from the automaton's".into()));
        }
    }
    match f {
        SubadditiveFunctional::AbsHomomorphism { weights } | SubadditiveFunctional::Homomorphism { weights }
            if weights.len() != aut.alphabet().len() =>
        {
            Err(Error::LabelMismatch("one weight per automaton letter is required".into()))
        }
        SubadditiveFunctional::WordLength { translation, .. } if translation.len() != aut.alphabet().len() => {
            Err(Error::LabelMismatch("one translation per automaton letter is required".into()))
        }
        _ => Ok(()),
    }
}

/// Parallel fold over `S_n` carrying the functional state along each path.
/// The work is split over path prefixes and merged in prefix order.
pub(crate) fn fold_sphere<A, N, V, M>(
    aut: &Automaton,
    f: &SubadditiveFunctional,
    n: usize,
    limit: usize,
    new: N,
    visit: V,
    merge: M,
) -> Result<A>
where
    A: Send,
    N: Fn() -> A + Sync,
    V: Fn(&mut A, &FunctionalState<'_>, usize) -> Result<()> + Sync,
    M: Fn(A, A) -> A,
{
    if n > limit {
        return Err(Error::DepthTooLarge(n, limit));
    }
    check_functional(aut, f)?;
    let succ = letter_successors(aut);
    // split depth: enough prefixes to feed the pool
    let mut split = 0;
    let mut frontier: Vec<(usize, Vec<Letter>)> = vec![(aut.start(), Vec::new())];
    while split < n && frontier.len() < 256 {
        frontier = frontier
            .into_iter()
            .flat_map(|(v, w)| {
                succ[v].iter().map(move |&(u, l)| {
                    let mut w2 = w.clone();
                    w2.push(l);
                    (u, w2)
                })
            })
            .collect();
        split += 1;
    }
    let parts: Vec<Result<A>> = frontier
        .par_iter()
        .map(|(v, prefix)| {
            let mut acc = new();
            let mut state = f.state();
            for &l in prefix {
                state.push(l)?;
            }
            dfs(&succ, *v, n - split, &mut vec![state], &mut acc, &visit)?;
            Ok(acc)
        })
        .collect();
    let mut total = new();
    for p in parts {
        total = merge(total, p?);
    }
    Ok(total)
}

fn dfs<'f, A, V>(
    succ: &[Vec<(usize, Letter)>],
    v: usize,
    remaining: usize,
    states: &mut Vec<FunctionalState<'f>>,
    acc: &mut A,
    visit: &V,
) -> Result<()>
where
    V: Fn(&mut A, &FunctionalState<'_>, usize) -> Result<()>,
{
    if remaining == 0 {
        return visit(acc, states.last().unwrap(), v);
    }
    for &(u, l) in &succ[v] {
        let mut s = states.last().unwrap().clone();
        s.push(l)?;
        states.push(s);
        dfs(succ, u, remaining - 1, states, acc, visit)?;
        states.pop();
    }
    Ok(())
}
