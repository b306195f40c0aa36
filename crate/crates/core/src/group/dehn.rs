//! Dehn's algorithm for metric small-cancellation C'(1/6) presentations.

use std::collections::{BTreeSet, HashSet, VecDeque};

use super::alphabet::{Alphabet, Letter, Word};
use super::oracle::free_reduce;
use crate::{Error, Result};

/// Cap on the number of equal-length words explored when minimizing.
const SWAP_CLOSURE_CAP: usize = 20_000;

/// A finite presentation satisfying C'(1/6), with its symmetrized relator set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DehnPresentation {
    alphabet: Alphabet,
    generators: Vec<String>,
    relators: Vec<Word>,
    /// All cyclic permutations of every relator and its inverse.
    symmetrized: Vec<Vec<Letter>>,
}

fn inverse_name(g: &str) -> String {
    let mut chars = g.chars();
    match (chars.next(), chars.next()) {
        (Some(c), None) if c.is_ascii_lowercase() => c.to_ascii_uppercase().to_string(),
        _ => format!("{g}^-1"),
    }
}

impl DehnPresentation {
    /// Generators get inverses `X` for a single lowercase `x`, otherwise
    /// `name^-1`. Relators are parsed with [`Alphabet::parse_word`].
    pub fn new(generators: &[String], relators: &[String]) -> Result<Self> {
        let mut symbols = Vec::new();
        let mut inverse = Vec::new();
        for (i, g) in generators.iter().enumerate() {
            symbols.push(g.clone());
            symbols.push(inverse_name(g));
            inverse.push(2 * i + 1);
            inverse.push(2 * i);
        }
        let alphabet = Alphabet::new(symbols, inverse)?;
        let mut rels = Vec::new();
        for r in relators {
            let w = alphabet.parse_word(r)?;
            let reduced = cyclically_reduce(&alphabet, &free_reduce(&alphabet, &w.0));
            if reduced.is_empty() {
                return Err(Error::NotSmallCancellation(format!("relator `{r}` is trivial")));
            }
            let n = reduced.len();
            if (1..n).any(|k| n % k == 0 && (0..n).all(|i| reduced[i] == reduced[(i + k) % n])) {
                return Err(Error::NotSmallCancellation(format!("relator `{r}` is a proper power")));
            }
            rels.push(Word(reduced));
        }
        let mut sym: BTreeSet<Vec<Letter>> = BTreeSet::new();
        for r in &rels {
            for base in [r.0.clone(), alphabet.invert(r).0] {
                for k in 0..base.len() {
                    let mut rot = base[k..].to_vec();
                    rot.extend_from_slice(&base[..k]);
                    sym.insert(rot);
                }
            }
        }
        let p = DehnPresentation {
            alphabet,
            generators: generators.to_vec(),
            relators: rels,
            symmetrized: sym.into_iter().collect(),
        };
        p.check_small_cancellation()?;
        Ok(p)
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn generators(&self) -> &[String] {
        &self.generators
    }

    pub fn relators(&self) -> &[Word] {
        &self.relators
    }

    /// Every piece (common prefix of two distinct symmetrized relators) must
    /// be shorter than a sixth of both relators.
    fn check_small_cancellation(&self) -> Result<()> {
        for (i, r1) in self.symmetrized.iter().enumerate() {
            for r2 in &self.symmetrized[i + 1..] {
                let piece = r1.iter().zip(r2).take_while(|(a, b)| a == b).count();
                if 6 * piece >= r1.len() || 6 * piece >= r2.len() {
                    return Err(Error::NotSmallCancellation(format!(
                        "piece `{}` of length {piece} is too long",
                        self.alphabet.format_word(&Word(r1[..piece].to_vec()))
                    )));
                }
            }
        }
        Ok(())
    }

    /// Greedy Dehn reduction: free reduction plus replacement of any subword
    /// that is more than half of a relator, iterated to a fixpoint.
    pub fn dehn_reduce(&self, letters: &[Letter]) -> Vec<Letter> {
        let mut w = free_reduce(&self.alphabet, letters);
        'outer: loop {
            for i in 0..w.len() {
                for r in &self.symmetrized {
                    let n = r.len();
                    let matched = w[i..].iter().zip(r).take_while(|(a, b)| a == b).count();
                    if 2 * matched > n {
                        // w[i..i+matched] = r[..matched] = (r[matched..])⁻¹
                        let replacement: Vec<Letter> =
                            r[matched..].iter().rev().map(|l| self.alphabet.inverse(*l)).collect();
                        let mut next = w[..i].to_vec();
                        next.extend(replacement);
                        next.extend_from_slice(&w[i + matched..]);
                        w = free_reduce(&self.alphabet, &next);
                        continue 'outer;
                    }
                }
            }
            return w;
        }
    }

    /// Minimal-length representative, canonicalized as the lexicographically
    /// least word reachable by half-relator swaps from a Dehn-reduced word.
    pub fn normal_form(&self, letters: &[Letter]) -> Vec<Letter> {
        let mut best = self.dehn_reduce(letters);
        'restart: loop {
            let mut seen: HashSet<Vec<Letter>> = HashSet::from([best.clone()]);
            let mut queue = VecDeque::from([best.clone()]);
            while let Some(w) = queue.pop_front() {
                for next in self.half_swaps(&w) {
                    let reduced = self.dehn_reduce(&next);
                    if reduced.len() < best.len() {
                        best = reduced;
                        continue 'restart;
                    }
                    if seen.len() < SWAP_CLOSURE_CAP && seen.insert(reduced.clone()) {
                        queue.push_back(reduced);
                    }
                }
            }
            return seen.into_iter().min().unwrap();
        }
    }

    fn half_swaps(&self, w: &[Letter]) -> Vec<Vec<Letter>> {
        let mut out = Vec::new();
        for r in self.symmetrized.iter().filter(|r| r.len() % 2 == 0) {
            let half = r.len() / 2;
            for i in 0..w.len().saturating_sub(half - 1) {
                if w[i..i + half] == r[..half] {
                    let mut next = w[..i].to_vec();
                    next.extend(r[half..].iter().rev().map(|l| self.alphabet.inverse(*l)));
                    next.extend_from_slice(&w[i + half..]);
                    out.push(next);
                }
            }
        }
        out
    }
}

fn cyclically_reduce(alphabet: &Alphabet, w: &[Letter]) -> Vec<Letter> {
    let mut v = w.to_vec();
    while v.len() >= 2 && alphabet.inverse(v[0]) == *v.last().unwrap() {
        v.remove(0);
        v.pop();
    }
    v
}
