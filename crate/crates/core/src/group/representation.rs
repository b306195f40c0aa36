use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::alphabet::{Alphabet, Letter, Word};
use crate::linalg::{Matrix, ScaledMatrix};
use crate::{Error, Result};

/// Relative tolerance for `ρ(s⁻¹) · ρ(s) = I`.
pub const INVERSE_TOLERANCE: f64 = 1e-10;

/// A homomorphism from the free group on an alphabet to `GL_d(ℝ)`, given by
/// its values on generators.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearRepresentation {
    alphabet: Alphabet,
    dimension: usize,
    images: Vec<Matrix>,
    log_abs_det: Vec<f64>,
    det_negative: Vec<bool>,
}

/// `{"dimension": d, "images": {sym: rows}, "inverse_pairing": {sym: sym}}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RepresentationFile {
    pub dimension: usize,
    pub images: BTreeMap<String, Vec<Vec<f64>>>,
    pub inverse_pairing: BTreeMap<String, String>,
}

impl LinearRepresentation {
    /// `images[i]` is the image of letter `i` of `alphabet`.
    pub fn new(alphabet: Alphabet, images: Vec<Matrix>) -> Result<Self> {
        if images.len() != alphabet.len() {
            return Err(Error::InvalidRepresentation(format!(
                "{} images for {} symbols",
                images.len(),
                alphabet.len()
            )));
        }
        let dimension = images.first().map(Matrix::rows).unwrap_or(0);
        if dimension == 0 {
            return Err(Error::InvalidRepresentation("dimension must be positive".into()));
        }
        let mut log_abs_det = Vec::new();
        let mut det_negative = Vec::new();
        for (l, m) in alphabet.letters().zip(&images) {
            let name = alphabet.symbol(l);
            if m.rows() != dimension || m.cols() != dimension {
                return Err(Error::InvalidRepresentation(format!("image of `{name}` is not {dimension}×{dimension}")));
            }
            if !m.is_finite() {
                return Err(Error::InvalidRepresentation(format!("image of `{name}` has non-finite entries")));
            }
            let det = m.determinant();
            if det == 0.0 || !det.is_finite() || m.inverse().is_none() {
                return Err(Error::SingularImage(name.to_string()));
            }
            log_abs_det.push(det.abs().ln());
            det_negative.push(det < 0.0);
        }
        for l in alphabet.letters() {
            let m = &images[l.index()];
            let inv = &images[alphabet.inverse(l).index()];
            let prod = m.matmul(inv);
            let scale = m.frobenius_norm() * inv.frobenius_norm();
            if prod.max_abs_diff(&Matrix::identity(dimension)) > INVERSE_TOLERANCE * scale.max(1.0) {
                return Err(Error::InvalidRepresentation(format!(
                    "image of `{}` is not the inverse of the image of `{}`",
                    alphabet.symbol(alphabet.inverse(l)),
                    alphabet.symbol(l)
                )));
            }
        }
        Ok(LinearRepresentation { alphabet, dimension, images, log_abs_det, det_negative })
    }

    /// Builds a representation from images of one letter per inverse pair;
    /// the other image is computed by inversion.
    pub fn from_generators(alphabet: Alphabet, generators: &[(&str, Matrix)]) -> Result<Self> {
        let mut images: Vec<Option<Matrix>> = vec![None; alphabet.len()];
        for (name, m) in generators {
            let l = alphabet.lookup(name)?;
            let inv = m.inverse().ok_or_else(|| Error::SingularImage(name.to_string()))?;
            images[alphabet.inverse(l).index()] = Some(inv);
            images[l.index()] = Some(m.clone());
        }
        let images = images
            .into_iter()
            .enumerate()
            .map(|(i, m)| {
                m.ok_or_else(|| {
                    Error::InvalidRepresentation(format!("no image for `{}`", alphabet.symbol(Letter(i as u16))))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        LinearRepresentation::new(alphabet, images)
    }

    pub fn from_file(file: &RepresentationFile) -> Result<Self> {
        let symbols: Vec<String> = file.images.keys().cloned().collect();
        let alphabet = Alphabet::from_pairing(symbols, &file.inverse_pairing)?;
        let mut images = Vec::new();
        for l in alphabet.letters() {
            let rows = &file.images[alphabet.symbol(l)];
            if rows.len() != file.dimension || rows.iter().any(|r| r.len() != file.dimension) {
                return Err(Error::InvalidRepresentation(format!(
                    "image of `{}` is not {}×{}",
                    alphabet.symbol(l),
                    file.dimension,
                    file.dimension
                )));
            }
            images.push(Matrix::from_rows(rows));
        }
        LinearRepresentation::new(alphabet, images)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: RepresentationFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        LinearRepresentation::from_file(&file)
    }

    pub fn to_file(&self) -> RepresentationFile {
        RepresentationFile {
            dimension: self.dimension,
            images: self.alphabet.letters().map(|l| (self.alphabet.symbol(l).to_string(), self.images[l.index()].to_rows())).collect(),
            inverse_pairing: self.alphabet.pairing(),
        }
    }

    /// The same representation re-indexed by another alphabet with identical
    /// symbol names and pairing.
    pub fn aligned_to(&self, alphabet: &Alphabet) -> Result<Self> {
        let mut images = Vec::new();
        for l in alphabet.letters() {
            let mine = self.alphabet.lookup(alphabet.symbol(l)).map_err(|_| {
                Error::LabelMismatch(format!("representation has no image for `{}`", alphabet.symbol(l)))
            })?;
            if self.alphabet.symbol(self.alphabet.inverse(mine)) != alphabet.symbol(alphabet.inverse(l)) {
                return Err(Error::LabelMismatch(format!("inverse pairing differs at `{}`", alphabet.symbol(l))));
            }
            images.push(self.images[mine.index()].clone());
        }
        LinearRepresentation::new(alphabet.clone(), images)
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn image(&self, l: Letter) -> &Matrix {
        &self.images[l.index()]
    }

    pub fn log_abs_det(&self, l: Letter) -> f64 {
        self.log_abs_det[l.index()]
    }

    pub fn det_negative(&self, l: Letter) -> bool {
        self.det_negative[l.index()]
    }

    /// Every image has determinant 1 within `tol`.
    pub fn is_unimodular(&self, tol: f64) -> bool {
        self.images.iter().all(|m| (m.determinant() - 1.0).abs() <= tol)
    }

    /// `ρ(s₁)⋯ρ(sₙ)` as a renormalized product.
    pub fn eval(&self, w: &Word) -> Result<ScaledMatrix> {
        self.alphabet.check_word(w)?;
        let mut acc = ScaledMatrix::identity(self.dimension);
        for &l in w.letters() {
            self.push(&mut acc, l);
        }
        Ok(acc)
    }

    /// `acc ← acc · ρ(l)`.
    pub fn push(&self, acc: &mut ScaledMatrix, l: Letter) {
        acc.mul_right(&self.images[l.index()], self.log_abs_det[l.index()], self.det_negative[l.index()]);
    }
}

/// `ρ(w)` for a word.
pub fn eval_representation(rep: &LinearRepresentation, w: &Word) -> Result<ScaledMatrix> {
    rep.eval(w)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sanov() -> LinearRepresentation {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0]]);
        let b = Matrix::from_rows(&[vec![1.0, 0.0], vec![2.0, 1.0]]);
        LinearRepresentation::from_generators(Alphabet::free(2).unwrap(), &[("a", a), ("b", b)]).unwrap()
    }

    #[test]
    fn empty_word_is_identity() {
        let rep = sanov();
        let m = rep.eval(&Word::empty()).unwrap();
        assert_eq!(m.to_matrix(), Matrix::identity(2));
        assert_eq!(m.log_scale(), 0.0);
    }

    #[test]
    fn single_letter_is_its_image() {
        let rep = sanov();
        let w = rep.alphabet().parse_word("a").unwrap();
        let m = rep.eval(&w).unwrap();
        assert_eq!(m.to_matrix(), Matrix::from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0]]));
        // ‖a‖ = 1 + √2 > 2, so one factor of two moves into the scale
        assert_eq!(m.exponent(), 1);
        assert!((m.log_operator_norm() - (1.0 + 2f64.sqrt()).ln()).abs() < 1e-12);
    }

    #[test]
    fn diagonal_square() {
        let e = std::f64::consts::E;
        let alphabet = Alphabet::free(1).unwrap();
        let rep =
            LinearRepresentation::from_generators(alphabet.clone(), &[("a", Matrix::diag(&[e, 1.0 / e]))]).unwrap();
        let m = rep.eval(&alphabet.parse_word("aa").unwrap()).unwrap();
        let exact = Matrix::diag(&[e * e, 1.0 / (e * e)]);
        assert!(m.to_matrix().max_abs_diff(&exact) < 1e-13 * e * e);
        assert!((m.log_operator_norm() - 2.0).abs() < 1e-13);
        // unit ∝ diag(1, e⁻⁴)
        let u = m.unit();
        assert!((u[(1, 1)] / u[(0, 0)] - (-4.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_inverse() {
        let alphabet = Alphabet::free(1).unwrap();
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0]]);
        let err = LinearRepresentation::new(alphabet, vec![a.clone(), a]);
        assert!(matches!(err, Err(Error::InvalidRepresentation(_))));
    }

    #[test]
    fn rejects_singular() {
        let alphabet = Alphabet::free(1).unwrap();
        let z = Matrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]);
        let err = LinearRepresentation::new(alphabet, vec![z.clone(), z]);
        assert!(matches!(err, Err(Error::SingularImage(_))));
    }

    #[test]
    fn json_round_trip() {
        let rep = sanov();
        let text = serde_json::to_string(&rep.to_file()).unwrap();
        let back = LinearRepresentation::from_json(&text).unwrap().aligned_to(rep.alphabet()).unwrap();
        assert_eq!(back, rep);
    }
}
