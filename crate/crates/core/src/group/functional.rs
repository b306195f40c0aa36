use super::alphabet::{Alphabet, Letter, Word};
use super::oracle::GroupOracle;
use super::representation::LinearRepresentation;
use crate::linalg::ScaledMatrix;
use crate::{Error, Result};

/// A function `φ : Γ → ℝ` with `φ(gh) ≤ φ(g) + φ(h)`, evaluated on words.
#[derive(Clone, Debug)]
pub enum SubadditiveFunctional {
    /// `log ‖ρ(g)‖` for the Euclidean operator norm.
    LogNorm(LinearRepresentation),
    /// `log ‖ρ(g)‖_F`.
    LogFrobenius(LinearRepresentation),
    /// `d(ρ(g)·i, i)` in the upper half-plane; images must lie in `SL₂(ℝ)`.
    DisplacementH2(LinearRepresentation),
    /// `|τ(g)|_{S'}` where `τ` sends each letter to a word of another oracle.
    WordLength { oracle: GroupOracle, translation: Vec<Word> },
    /// `|Σ weights|`.
    AbsHomomorphism { weights: Vec<f64> },
    /// `Σ weights` (additive, hence subadditive).
    Homomorphism { weights: Vec<f64> },
}

impl SubadditiveFunctional {
    pub fn log_norm(rep: LinearRepresentation) -> Self {
        SubadditiveFunctional::LogNorm(rep)
    }

    pub fn displacement(rep: LinearRepresentation) -> Result<Self> {
        if rep.dimension() != 2 || !rep.is_unimodular(1e-9) {
            let det = rep.alphabet().letters().map(|l| rep.image(l).determinant()).find(|d| (d - 1.0).abs() > 1e-9);
            return Err(Error::NotUnimodular(det.unwrap_or(f64::NAN)));
        }
        Ok(SubadditiveFunctional::DisplacementH2(rep))
    }

    /// `translation[i]` is the image of letter `i` of `alphabet`; must respect
    /// inverses in the target group.
    pub fn word_length(alphabet: &Alphabet, oracle: GroupOracle, translation: Vec<Word>) -> Result<Self> {
        if translation.len() != alphabet.len() {
            return Err(Error::InvalidArgument("translation must cover every symbol".into()));
        }
        for l in alphabet.letters() {
            let t = &translation[l.index()];
            let t_inv = &translation[alphabet.inverse(l).index()];
            if !oracle.equal(&oracle.alphabet().invert(t), t_inv)? {
                return Err(Error::InvalidArgument(format!(
                    "translation of `{}` is not inverse to that of `{}`",
                    alphabet.symbol(l),
                    alphabet.symbol(alphabet.inverse(l))
                )));
            }
        }
        Ok(SubadditiveFunctional::WordLength { oracle, translation })
    }

    /// Word length with respect to the oracle's own generators.
    pub fn identity_word_length(oracle: GroupOracle) -> Self {
        let translation = oracle.alphabet().letters().map(|l| Word(vec![l])).collect();
        SubadditiveFunctional::WordLength { oracle, translation }
    }

    fn check_weights(alphabet: &Alphabet, weights: &[f64]) -> Result<()> {
        if weights.len() != alphabet.len() {
            return Err(Error::InvalidArgument("one weight per symbol is required".into()));
        }
        for l in alphabet.letters() {
            if (weights[l.index()] + weights[alphabet.inverse(l).index()]).abs() > 1e-12 {
                return Err(Error::InvalidArgument(format!("weight of `{}` is not antisymmetric", alphabet.symbol(l))));
            }
        }
        Ok(())
    }

    pub fn abs_homomorphism(alphabet: &Alphabet, weights: Vec<f64>) -> Result<Self> {
        Self::check_weights(alphabet, &weights)?;
        Ok(SubadditiveFunctional::AbsHomomorphism { weights })
    }

    pub fn homomorphism(alphabet: &Alphabet, weights: Vec<f64>) -> Result<Self> {
        Self::check_weights(alphabet, &weights)?;
        Ok(SubadditiveFunctional::Homomorphism { weights })
    }

    /// Short name used in output headers.
    pub fn name(&self) -> &'static str {
        match self {
            SubadditiveFunctional::LogNorm(_) => "log_norm",
            SubadditiveFunctional::LogFrobenius(_) => "log_frobenius",
            SubadditiveFunctional::DisplacementH2(_) => "displacement",
            SubadditiveFunctional::WordLength { .. } => "word_length",
            SubadditiveFunctional::AbsHomomorphism { .. } => "abs_homomorphism",
            SubadditiveFunctional::Homomorphism { .. } => "homomorphism",
        }
    }

    pub fn representation(&self) -> Option<&LinearRepresentation> {
        match self {
            SubadditiveFunctional::LogNorm(r)
            | SubadditiveFunctional::LogFrobenius(r)
            | SubadditiveFunctional::DisplacementH2(r) => Some(r),
            _ => None,
        }
    }

    /// Largest `|φ(s)|` over generators; `φ` is Lipschitz with this constant.
    pub fn lipschitz_constant(&self, alphabet: &Alphabet) -> Result<f64> {
        let mut c: f64 = 0.0;
        for l in alphabet.letters() {
            c = c.max(self.eval(&Word(vec![l]))?.abs());
        }
        Ok(c)
    }

    pub fn eval(&self, w: &Word) -> Result<f64> {
        let mut state = self.state();
        for &l in w.letters() {
            state.push(l)?;
        }
        state.value()
    }

    /// Incremental evaluator for words growing on the right.
    pub fn state(&self) -> FunctionalState<'_> {
        let inner = match self {
            SubadditiveFunctional::LogNorm(r)
            | SubadditiveFunctional::LogFrobenius(r)
            | SubadditiveFunctional::DisplacementH2(r) => Inner::Matrix(ScaledMatrix::identity(r.dimension())),
            SubadditiveFunctional::WordLength { .. } => Inner::Word(Vec::new()),
            SubadditiveFunctional::AbsHomomorphism { .. } | SubadditiveFunctional::Homomorphism { .. } => Inner::Sum(0.0),
        };
        FunctionalState { f: self, inner }
    }
}

#[derive(Clone, Debug)]
enum Inner {
    Matrix(ScaledMatrix),
    Word(Vec<Letter>),
    Sum(f64),
}

/// Value of a functional along a word extended one letter at a time.
#[derive(Clone, Debug)]
pub struct FunctionalState<'a> {
    f: &'a SubadditiveFunctional,
    inner: Inner,
}

impl FunctionalState<'_> {
    pub fn push(&mut self, l: Letter) -> Result<()> {
        match (&mut self.inner, self.f) {
            (Inner::Matrix(m), SubadditiveFunctional::LogNorm(r))
            | (Inner::Matrix(m), SubadditiveFunctional::LogFrobenius(r))
            | (Inner::Matrix(m), SubadditiveFunctional::DisplacementH2(r)) => {
                if !r.alphabet().contains(l) {
                    return Err(Error::UnknownSymbol(format!("#{}", l.0)));
                }
                r.push(m, l);
            }
            (Inner::Word(nf), SubadditiveFunctional::WordLength { oracle, translation }) => {
                let t = translation.get(l.index()).ok_or_else(|| Error::UnknownSymbol(format!("#{}", l.0)))?;
                for &x in t.letters() {
                    oracle.push_letter(nf, x);
                }
            }
            (Inner::Sum(s), SubadditiveFunctional::AbsHomomorphism { weights })
            | (Inner::Sum(s), SubadditiveFunctional::Homomorphism { weights }) => {
                *s += weights.get(l.index()).ok_or_else(|| Error::UnknownSymbol(format!("#{}", l.0)))?;
            }
            _ => unreachable!("state built for another functional"),
        }
        Ok(())
    }

    pub fn value(&self) -> Result<f64> {
        Ok(match (&self.inner, self.f) {
            (Inner::Matrix(m), SubadditiveFunctional::LogNorm(_)) => m.log_operator_norm(),
            (Inner::Matrix(m), SubadditiveFunctional::LogFrobenius(_)) => m.log_frobenius_norm(),
            (Inner::Matrix(m), SubadditiveFunctional::DisplacementH2(_)) => m.displacement_h2()?,
            (Inner::Word(nf), _) => nf.len() as f64,
            (Inner::Sum(s), SubadditiveFunctional::AbsHomomorphism { .. }) => s.abs(),
            (Inner::Sum(s), _) => *s,
            _ => unreachable!("state built for another functional"),
        })
    }

    /// The accumulated matrix, for representation-backed functionals.
    pub fn matrix(&self) -> Option<&ScaledMatrix> {
        match &self.inner {
            Inner::Matrix(m) => Some(m),
            _ => None,
        }
    }
}

/// `φ(w)`.
pub fn eval_functional(f: &SubadditiveFunctional, w: &Word) -> Result<f64> {
    f.eval(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;

    #[test]
    fn exponent_sum() {
        let a = Alphabet::free(2).unwrap();
        let f = SubadditiveFunctional::abs_homomorphism(&a, vec![1.0, -1.0, 0.0, 0.0]).unwrap();
        assert_eq!(f.eval(&a.parse_word("aba").unwrap()).unwrap(), 2.0);
        assert_eq!(f.eval(&a.parse_word("ABA").unwrap()).unwrap(), 2.0);
        let h = SubadditiveFunctional::homomorphism(&a, vec![1.0, -1.0, 0.0, 0.0]).unwrap();
        assert_eq!(h.eval(&a.parse_word("ABA").unwrap()).unwrap(), -2.0);
    }

    #[test]
    fn log_norm_of_empty_word() {
        let a = Alphabet::free(2).unwrap();
        let rep = LinearRepresentation::from_generators(
            a,
            &[
                ("a", Matrix::from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0]])),
                ("b", Matrix::from_rows(&[vec![1.0, 0.0], vec![2.0, 1.0]])),
            ],
        )
        .unwrap();
        let f = SubadditiveFunctional::log_norm(rep);
        assert_eq!(f.eval(&Word::empty()).unwrap(), 0.0);
    }

    #[test]
    fn identity_translation_is_word_length() {
        let o = GroupOracle::free(2).unwrap();
        let f = SubadditiveFunctional::identity_word_length(o.clone());
        for text in ["", "a", "abAB", "aaBBAb", "aAbB"] {
            let w = o.alphabet().parse_word(text).unwrap();
            assert_eq!(f.eval(&w).unwrap(), o.word_length(&w).unwrap() as f64);
        }
    }

    #[test]
    fn translation_must_respect_inverses() {
        let o = GroupOracle::free(2).unwrap();
        let a = o.alphabet().clone();
        let bad = vec![Word(vec![Letter(0)]), Word(vec![Letter(0)]), Word(vec![Letter(2)]), Word(vec![Letter(3)])];
        assert!(SubadditiveFunctional::word_length(&a, o, bad).is_err());
    }

    #[test]
    fn displacement_requires_unimodular() {
        let a = Alphabet::free(1).unwrap();
        let rep = LinearRepresentation::from_generators(a, &[("a", Matrix::diag(&[2.0, 1.0]))]).unwrap();
        assert!(matches!(SubadditiveFunctional::displacement(rep), Err(Error::NotUnimodular(_))));
    }
}
