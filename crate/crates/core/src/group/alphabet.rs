use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Index of a symbol in an [`Alphabet`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Letter(pub u16);

impl Letter {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Finite symmetric generating alphabet with an inverse pairing.
#[derive(Clone, PartialEq, Eq)]
pub struct Alphabet {
    symbols: Vec<String>,
    inverse: Vec<Letter>,
    index: HashMap<String, Letter>,
}

impl fmt::Debug for Alphabet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(&self.symbols).finish()
    }
}

impl Alphabet {
    /// `inverse[i]` is the index of the inverse of symbol `i`; must be an involution.
    pub fn new(symbols: Vec<String>, inverse: Vec<usize>) -> Result<Self> {
        if symbols.len() != inverse.len() {
            return Err(Error::InvalidAlphabet("pairing length differs from symbol count".into()));
        }
        if symbols.len() > u16::MAX as usize {
            return Err(Error::InvalidAlphabet("too many symbols".into()));
        }
        let mut index = HashMap::new();
        for (i, s) in symbols.iter().enumerate() {
            if s.is_empty() || s == "id" || s.chars().any(char::is_whitespace) {
                return Err(Error::InvalidAlphabet(format!("bad symbol name `{s}`")));
            }
            if index.insert(s.clone(), Letter(i as u16)).is_some() {
                return Err(Error::InvalidAlphabet(format!("duplicate symbol `{s}`")));
            }
        }
        for (i, &j) in inverse.iter().enumerate() {
            if j >= symbols.len() || inverse[j] != i {
                return Err(Error::InvalidAlphabet(format!("pairing is not an involution at `{}`", symbols[i])));
            }
        }
        let inverse = inverse.into_iter().map(|j| Letter(j as u16)).collect();
        Ok(Alphabet { symbols, inverse, index })
    }

    /// Builds an alphabet from a symbol → inverse-symbol map.
    pub fn from_pairing(symbols: Vec<String>, pairing: &BTreeMap<String, String>) -> Result<Self> {
        let pos: HashMap<&str, usize> = symbols.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
        let mut inverse = Vec::with_capacity(symbols.len());
        for s in &symbols {
            let inv = pairing
                .get(s)
                .ok_or_else(|| Error::InvalidAlphabet(format!("no inverse given for `{s}`")))?;
            let j = *pos.get(inv.as_str()).ok_or_else(|| Error::UnknownSymbol(inv.clone()))?;
            inverse.push(j);
        }
        Alphabet::new(symbols, inverse)
    }

    /// Free basis of rank `k`: `a, A, b, B, …` with uppercase for inverses.
    pub fn free(rank: usize) -> Result<Self> {
        if rank == 0 || rank > 26 {
            return Err(Error::InvalidAlphabet(format!("free rank {rank} out of range 1..=26")));
        }
        let mut symbols = Vec::new();
        let mut inverse = Vec::new();
        for i in 0..rank {
            let c = (b'a' + i as u8) as char;
            symbols.push(c.to_string());
            symbols.push(c.to_ascii_uppercase().to_string());
            inverse.push(2 * i + 1);
            inverse.push(2 * i);
        }
        Alphabet::new(symbols, inverse)
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn letters(&self) -> impl Iterator<Item = Letter> + '_ {
        (0..self.symbols.len()).map(|i| Letter(i as u16))
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn symbol(&self, l: Letter) -> &str {
        &self.symbols[l.index()]
    }

    pub fn inverse(&self, l: Letter) -> Letter {
        self.inverse[l.index()]
    }

    pub fn lookup(&self, name: &str) -> Result<Letter> {
        self.index.get(name).copied().ok_or_else(|| Error::UnknownSymbol(name.to_string()))
    }

    pub fn contains(&self, l: Letter) -> bool {
        l.index() < self.symbols.len()
    }

    /// Pairing as a symbol → symbol map.
    pub fn pairing(&self) -> BTreeMap<String, String> {
        self.letters().map(|l| (self.symbol(l).to_string(), self.symbol(self.inverse(l)).to_string())).collect()
    }

    fn single_char(&self) -> bool {
        self.symbols.iter().all(|s| s.chars().count() == 1)
    }

    /// Parses whitespace-separated tokens, or single characters when the text
    /// contains no whitespace and every symbol is one character long.
    pub fn parse_word(&self, text: &str) -> Result<Word> {
        let text = text.trim();
        if text.is_empty() || text == "id" {
            return Ok(Word::empty());
        }
        let letters = if text.contains(char::is_whitespace) || !self.single_char() {
            text.split_whitespace().map(|t| self.lookup(t)).collect::<Result<Vec<_>>>()?
        } else {
            text.chars().map(|c| self.lookup(&c.to_string())).collect::<Result<Vec<_>>>()?
        };
        Ok(Word(letters))
    }

    pub fn format_word(&self, w: &Word) -> String {
        let sep = if self.single_char() { "" } else { " " };
        w.0.iter().map(|l| self.symbol(*l)).collect::<Vec<_>>().join(sep)
    }

    pub fn check_word(&self, w: &Word) -> Result<()> {
        match w.0.iter().find(|l| !self.contains(**l)) {
            Some(l) => Err(Error::UnknownSymbol(format!("#{}", l.0))),
            None => Ok(()),
        }
    }

    /// Formal inverse of a word.
    pub fn invert(&self, w: &Word) -> Word {
        Word(w.0.iter().rev().map(|l| self.inverse(*l)).collect())
    }
}

/// Finite sequence of letters.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Word(pub Vec<Letter>);

impl Word {
    pub fn empty() -> Self {
        Word(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn letters(&self) -> &[Letter] {
        &self.0
    }

    pub fn concat(&self, other: &Word) -> Word {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        Word(v)
    }
}

impl From<Vec<Letter>> for Word {
    fn from(v: Vec<Letter>) -> Self {
        Word(v)
    }
}
