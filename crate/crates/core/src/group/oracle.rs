use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::alphabet::{Alphabet, Letter, Word};
use super::dehn::DehnPresentation;
use crate::{Error, Result};

/// Which concrete group an oracle solves the word problem for.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum OracleKind {
    Free { rank: usize },
    /// Free product of cyclic groups `ℤ/m₁ ∗ ℤ/m₂ ∗ …`.
    FreeProduct { orders: Vec<u32> },
    Dehn(DehnPresentation),
}

/// Word reduction and word length for a concrete group.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroupOracle {
    kind: OracleKind,
    alphabet: Alphabet,
    /// Free products only: (factor, exponent) of each letter.
    syllable: Vec<(usize, i64)>,
}

/// Presentation file: `{"generators": [...], "relators": [...]}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PresentationFile {
    pub generators: Vec<String>,
    pub relators: Vec<String>,
}

impl GroupOracle {
    pub fn free(rank: usize) -> Result<Self> {
        Ok(GroupOracle { kind: OracleKind::Free { rank }, alphabet: Alphabet::free(rank)?, syllable: Vec::new() })
    }

    /// Free product of cyclic groups. Factor `i` is generated by the `i`-th
    /// lowercase letter; its inverse is the uppercase letter, except for
    /// order-2 factors whose generator is an involution.
    pub fn free_product(orders: &[u32]) -> Result<Self> {
        if orders.len() < 2 {
            return Err(Error::InvalidOrders("need at least two factors".into()));
        }
        if orders.len() > 26 {
            return Err(Error::InvalidOrders("at most 26 factors".into()));
        }
        if let Some(m) = orders.iter().find(|&&m| m < 2) {
            return Err(Error::InvalidOrders(format!("order {m} < 2")));
        }
        let mut symbols = Vec::new();
        let mut inverse = Vec::new();
        let mut syllable = Vec::new();
        for (i, &m) in orders.iter().enumerate() {
            let c = (b'a' + i as u8) as char;
            let base = symbols.len();
            symbols.push(c.to_string());
            syllable.push((i, 1));
            if m == 2 {
                inverse.push(base);
            } else {
                symbols.push(c.to_ascii_uppercase().to_string());
                syllable.push((i, -1));
                inverse.push(base + 1);
                inverse.push(base);
            }
        }
        let alphabet = Alphabet::new(symbols, inverse)?;
        Ok(GroupOracle { kind: OracleKind::FreeProduct { orders: orders.to_vec() }, alphabet, syllable })
    }

    pub fn dehn(presentation: DehnPresentation) -> Self {
        let alphabet = presentation.alphabet().clone();
        GroupOracle { kind: OracleKind::Dehn(presentation), alphabet, syllable: Vec::new() }
    }

    pub fn from_presentation_json(text: &str) -> Result<Self> {
        let file: PresentationFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        Ok(GroupOracle::dehn(DehnPresentation::new(&file.generators, &file.relators)?))
    }

    pub fn kind(&self) -> &OracleKind {
        &self.kind
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    /// Free groups and free products of cyclic groups have unique geodesic
    /// normal forms and tree-like boundaries.
    pub fn is_tree_like(&self) -> bool {
        matches!(self.kind, OracleKind::Free { .. } | OracleKind::FreeProduct { .. })
    }

    /// Hyperbolicity constant, only known for the tree-like oracles.
    pub fn hyperbolicity_constant(&self) -> Option<f64> {
        self.is_tree_like().then_some(0.0)
    }

    /// Normal form of minimal length representing the same element.
    pub fn reduce(&self, w: &Word) -> Result<Word> {
        self.alphabet.check_word(w)?;
        Ok(match &self.kind {
            OracleKind::Free { .. } => Word(free_reduce(&self.alphabet, &w.0)),
            OracleKind::FreeProduct { orders } => self.reduce_free_product(orders, &w.0),
            OracleKind::Dehn(p) => Word(p.normal_form(&w.0)),
        })
    }

    pub fn word_length(&self, w: &Word) -> Result<usize> {
        Ok(self.reduce(w)?.len())
    }

    /// Twice the Gromov product `⟨g, h⟩ = ½(|g| + |h| − |g⁻¹h|)`.
    pub fn gromov_product_doubled(&self, g: &Word, h: &Word) -> Result<i64> {
        let lg = self.word_length(g)? as i64;
        let lh = self.word_length(h)? as i64;
        let d = self.word_length(&self.alphabet.invert(g).concat(h))? as i64;
        Ok(lg + lh - d)
    }

    pub fn gromov_product(&self, g: &Word, h: &Word) -> Result<f64> {
        Ok(self.gromov_product_doubled(g, h)? as f64 / 2.0)
    }

    pub fn equal(&self, g: &Word, h: &Word) -> Result<bool> {
        Ok(self.word_length(&self.alphabet.invert(g).concat(h))? == 0)
    }

    fn reduce_free_product(&self, orders: &[u32], letters: &[Letter]) -> Word {
        // stack of (factor, exponent mod m), exponent never 0
        let mut stack: Vec<(usize, i64)> = Vec::new();
        for l in letters {
            let (f, e) = self.syllable[l.index()];
            let m = orders[f] as i64;
            match stack.last_mut() {
                Some((tf, te)) if *tf == f => {
                    *te = (*te + e).rem_euclid(m);
                    if *te == 0 {
                        stack.pop();
                    }
                }
                _ => stack.push((f, e.rem_euclid(m))),
            }
        }
        let mut out = Vec::new();
        for (f, k) in stack {
            let m = orders[f] as i64;
            let gen = self.generator_letter(f);
            if k <= m / 2 {
                out.extend(std::iter::repeat_n(gen, k as usize));
            } else {
                let inv = self.alphabet.inverse(gen);
                out.extend(std::iter::repeat_n(inv, (m - k) as usize));
            }
        }
        Word(out)
    }

    /// `nf ← normal form of nf·l`, where `nf` is already a normal form.
    /// Constant time for tree-like oracles.
    pub fn push_letter(&self, nf: &mut Vec<Letter>, l: Letter) {
        match &self.kind {
            OracleKind::Free { .. } => {
                if nf.last().is_some_and(|&t| self.alphabet.inverse(t) == l) {
                    nf.pop();
                } else {
                    nf.push(l);
                }
            }
            OracleKind::FreeProduct { orders } => {
                let (f, e) = self.syllable[l.index()];
                let mut k = e;
                while let Some(&t) = nf.last() {
                    let (tf, te) = self.syllable[t.index()];
                    if tf != f {
                        break;
                    }
                    k += te;
                    nf.pop();
                }
                let m = orders[f] as i64;
                let k = k.rem_euclid(m);
                if k != 0 {
                    let gen = self.generator_letter(f);
                    if k <= m / 2 {
                        nf.extend(std::iter::repeat_n(gen, k as usize));
                    } else {
                        nf.extend(std::iter::repeat_n(self.alphabet.inverse(gen), (m - k) as usize));
                    }
                }
            }
            OracleKind::Dehn(p) => {
                nf.push(l);
                *nf = p.normal_form(nf);
            }
        }
    }

    fn generator_letter(&self, factor: usize) -> Letter {
        let i = self.syllable.iter().position(|&(f, e)| f == factor && e == 1).unwrap();
        Letter(i as u16)
    }

    /// Sphere sizes `#S_0, …, #S_{n_max}` by breadth-first search over normal
    /// forms. Independent of any automaton; memory grows with `#S_{n_max}`.
    pub fn sphere_sizes(&self, n_max: usize) -> Result<Vec<u64>> {
        let mut sizes = vec![1u64];
        let mut prev: HashSet<Word> = HashSet::from([Word::empty()]);
        for n in 1..=n_max {
            prev = self.next_sphere(&prev, n)?;
            sizes.push(prev.len() as u64);
        }
        Ok(sizes)
    }

    /// Same counts as [`sphere_sizes`](Self::sphere_sizes) with constant
    /// memory: a depth-first walk of the tree in which every element of
    /// `S_{n+1}` hangs below `h·t⁻¹` for the least letter `t` with
    /// `|h·t⁻¹| = n`.
    pub fn sphere_sizes_streaming(&self, n_max: usize) -> Result<Vec<u64>> {
        use rayon::prelude::*;
        let roots: Vec<Letter> = self.alphabet.letters().collect();
        let partial = roots
            .par_iter()
            .map(|&s| {
                let mut sizes = vec![0u64; n_max + 1];
                if n_max >= 1 {
                    let h = self.reduce(&Word(vec![s]))?;
                    if h.len() == 1 && self.canonical_last(&h)? == s {
                        sizes[1] += 1;
                        self.sphere_walk(&h, n_max, &mut sizes)?;
                    }
                }
                Ok(sizes)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut sizes = vec![0u64; n_max + 1];
        sizes[0] = 1;
        for p in partial {
            for (t, x) in sizes.iter_mut().zip(p) {
                *t += x;
            }
        }
        Ok(sizes)
    }

    fn sphere_walk(&self, g: &Word, n_max: usize, sizes: &mut [u64]) -> Result<()> {
        let n = g.len();
        if n == n_max {
            return Ok(());
        }
        for s in self.alphabet.letters() {
            let h = self.reduce(&Word(g.0.iter().copied().chain([s]).collect()))?;
            if h.len() == n + 1 && self.canonical_last(&h)? == s {
                sizes[n + 1] += 1;
                self.sphere_walk(&h, n_max, sizes)?;
            }
        }
        Ok(())
    }

    fn canonical_last(&self, h: &Word) -> Result<Letter> {
        for t in self.alphabet.letters() {
            let v = Word(h.0.iter().copied().chain([self.alphabet.inverse(t)]).collect());
            if self.word_length(&v)? + 1 == h.len() {
                return Ok(t);
            }
        }
        Err(Error::NonConvergence("element without a geodesic predecessor".into()))
    }

    // S_n = { g·s : g ∈ S_{n-1}, s ∈ S, |g·s| = n }
    fn next_sphere(&self, prev: &HashSet<Word>, n: usize) -> Result<HashSet<Word>> {
        let mut next = HashSet::new();
        for w in prev {
            for s in self.alphabet.letters() {
                let mut v = w.0.clone();
                v.push(s);
                let r = self.reduce(&Word(v))?;
                if r.len() == n {
                    next.insert(r);
                }
            }
        }
        Ok(next)
    }

    /// Every element of the sphere of radius `n`, as normal forms.
    pub fn sphere(&self, n: usize) -> Result<Vec<Word>> {
        let mut prev: HashSet<Word> = HashSet::from([Word::empty()]);
        for k in 1..=n {
            prev = self.next_sphere(&prev, k)?;
        }
        let mut out: Vec<Word> = prev.into_iter().collect();
        out.sort();
        Ok(out)
    }
}

pub(crate) fn free_reduce(alphabet: &Alphabet, letters: &[Letter]) -> Vec<Letter> {
    let mut out: Vec<Letter> = Vec::with_capacity(letters.len());
    for &l in letters {
        if out.last().is_some_and(|&t| alphabet.inverse(t) == l) {
            out.pop();
        } else {
            out.push(l);
        }
    }
    out
}
