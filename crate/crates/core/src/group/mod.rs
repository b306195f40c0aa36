//! Group arithmetic: alphabets and words, word-problem oracles, linear
//! representations and subadditive functionals.

mod alphabet;
mod dehn;
mod functional;
mod oracle;
mod representation;

pub use alphabet::{Alphabet, Letter, Word};
pub use dehn::DehnPresentation;
pub use functional::{eval_functional, FunctionalState, SubadditiveFunctional};
pub use oracle::{GroupOracle, OracleKind, PresentationFile};
pub use representation::{eval_representation, LinearRepresentation, RepresentationFile, INVERSE_TOLERANCE};

/// Normal form of `w`.
pub fn reduce_word(w: &Word, oracle: &GroupOracle) -> crate::Result<Word> {
    oracle.reduce(w)
}

/// `|w|_S`.
pub fn word_length(w: &Word, oracle: &GroupOracle) -> crate::Result<usize> {
    oracle.word_length(w)
}

/// `⟨g, h⟩`, a half-integer.
pub fn gromov_product(g: &Word, h: &Word, oracle: &GroupOracle) -> crate::Result<f64> {
    oracle.gromov_product(g, h)
}
