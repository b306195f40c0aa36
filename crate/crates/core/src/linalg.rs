//! Small dense linear algebra: square/rectangular matrices, singular values,
//! exterior powers, and the power-of-two renormalized [`ScaledMatrix`] used for
//! long products.

use std::f64::consts::LN_2;
use std::fmt;
use std::ops::{Index, IndexMut, Mul};

/// Row-major dense real matrix.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.data.chunks(self.cols.max(1))).finish()
    }
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        Matrix { rows: r, cols: c, data: rows.concat() }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols);
        Matrix { rows, cols, data }
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut m = Matrix::zeros(values.len(), values.len());
        for (i, v) in values.iter().enumerate() {
            m[(i, i)] = *v;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.cols.max(1)).map(<[f64]>::to_vec).collect()
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn scale(&mut self, s: f64) {
        self.data.iter_mut().for_each(|x| *x *= s);
    }

    pub fn scaled(&self, s: f64) -> Matrix {
        let mut m = self.clone();
        m.scale(s);
        m
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.cols);
        (0..self.rows).map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum()).collect()
    }

    /// `vᵀ M`.
    pub fn vec_mul(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for (i, vi) in v.iter().enumerate() {
            if *vi == 0.0 {
                continue;
            }
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += vi * a;
            }
        }
        out
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "dimension mismatch");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let orow = other.row(k);
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, b) in dst.iter_mut().zip(orow) {
                    *d += a * b;
                }
            }
        }
        out
    }

    /// Determinant via partial-pivot LU.
    pub fn determinant(&self) -> f64 {
        assert!(self.is_square());
        let n = self.rows;
        if n == 2 {
            return self.data[0] * self.data[3] - self.data[1] * self.data[2];
        }
        let mut a = self.clone();
        let mut det = 1.0;
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&x, &y| a[(x, col)].abs().total_cmp(&a[(y, col)].abs()))
                .unwrap();
            if a[(pivot, col)] == 0.0 {
                return 0.0;
            }
            if pivot != col {
                for j in 0..n {
                    a.data.swap(pivot * n + j, col * n + j);
                }
                det = -det;
            }
            let p = a[(col, col)];
            det *= p;
            for r in col + 1..n {
                let f = a[(r, col)] / p;
                if f != 0.0 {
                    for j in col..n {
                        let v = a[(col, j)];
                        a[(r, j)] -= f * v;
                    }
                }
            }
        }
        det
    }

    /// Gauss-Jordan inverse; `None` when singular.
    pub fn inverse(&self) -> Option<Matrix> {
        assert!(self.is_square());
        let n = self.rows;
        let mut a = self.clone();
        let mut inv = Matrix::identity(n);
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&x, &y| a[(x, col)].abs().total_cmp(&a[(y, col)].abs()))
                .unwrap();
            if a[(pivot, col)].abs() < f64::MIN_POSITIVE {
                return None;
            }
            for j in 0..n {
                a.data.swap(pivot * n + j, col * n + j);
                inv.data.swap(pivot * n + j, col * n + j);
            }
            let p = a[(col, col)];
            for j in 0..n {
                a[(col, j)] /= p;
                inv[(col, j)] /= p;
            }
            for r in 0..n {
                if r == col {
                    continue;
                }
                let f = a[(r, col)];
                if f != 0.0 {
                    for j in 0..n {
                        let (av, iv) = (a[(col, j)], inv[(col, j)]);
                        a[(r, j)] -= f * av;
                        inv[(r, j)] -= f * iv;
                    }
                }
            }
        }
        Some(inv)
    }

    /// Singular values in descending order.
    ///
    /// 2×2 matrices use the closed form; larger ones use one-sided (Hestenes)
    /// Jacobi, i.e. cyclic Jacobi on `MᵀM` applied implicitly.
    pub fn singular_values(&self) -> Vec<f64> {
        if self.rows == 2 && self.cols == 2 {
            let (s1, s2) = singular_values_2x2(self.data[0], self.data[1], self.data[2], self.data[3]);
            return vec![s1, s2];
        }
        if self.rows == 1 || self.cols == 1 {
            return vec![self.frobenius_norm()];
        }
        jacobi_singular_values(self)
    }

    /// Euclidean operator (spectral) norm.
    pub fn operator_norm(&self) -> f64 {
        self.singular_values()[0]
    }

    /// k-th exterior power (compound matrix of k×k minors), rows and columns
    /// indexed by k-subsets in lexicographic order.
    pub fn exterior_power(&self, k: usize) -> Matrix {
        assert!(self.is_square());
        let n = self.rows;
        assert!(k >= 1 && k <= n);
        let subsets = k_subsets(n, k);
        let m = subsets.len();
        let mut out = Matrix::zeros(m, m);
        let mut minor = Matrix::zeros(k, k);
        for (i, rs) in subsets.iter().enumerate() {
            for (j, cs) in subsets.iter().enumerate() {
                for (a, r) in rs.iter().enumerate() {
                    for (b, c) in cs.iter().enumerate() {
                        minor[(a, b)] = self[(*r, *c)];
                    }
                }
                out[(i, j)] = if k == 1 { minor[(0, 0)] } else { minor.determinant() };
            }
        }
        out
    }
}

fn k_subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

/// Closed-form singular values of `[[a, b], [c, d]]`, largest first.
pub fn singular_values_2x2(a: f64, b: f64, c: f64, d: f64) -> (f64, f64) {
    let p = (a + d).hypot(b - c);
    let q = (a - d).hypot(b + c);
    let s1 = 0.5 * (p + q);
    let det = (a * d - b * c).abs();
    let s2 = if s1 > 0.0 { det / s1 } else { 0.0 };
    (s1, s2)
}

fn jacobi_singular_values(m: &Matrix) -> Vec<f64> {
    // Work on columns of M: rotate pairs until mutually orthogonal.
    let (rows, cols) = (m.rows, m.cols);
    let mut cols_data: Vec<Vec<f64>> = (0..cols).map(|j| (0..rows).map(|i| m[(i, j)]).collect()).collect();
    for _sweep in 0..100 {
        let mut off = 0.0f64;
        for i in 0..cols {
            for j in i + 1..cols {
                let alpha: f64 = cols_data[i].iter().map(|x| x * x).sum();
                let beta: f64 = cols_data[j].iter().map(|x| x * x).sum();
                let gamma: f64 = cols_data[i].iter().zip(&cols_data[j]).map(|(x, y)| x * y).sum();
                if gamma == 0.0 {
                    continue;
                }
                let scale = (alpha * beta).sqrt();
                off = off.max(gamma.abs() / scale.max(f64::MIN_POSITIVE));
                if gamma.abs() <= 1e-15 * scale {
                    continue;
                }
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let (left, right) = cols_data.split_at_mut(j);
                let (ci, cj) = (&mut left[i], &mut right[0]);
                for (x, y) in ci.iter_mut().zip(cj.iter_mut()) {
                    let (xi, yj) = (*x, *y);
                    *x = c * xi - s * yj;
                    *y = s * xi + c * yj;
                }
            }
        }
        if off <= 1e-15 {
            break;
        }
    }
    let mut sv: Vec<f64> = cols_data.iter().map(|c| c.iter().map(|x| x * x).sum::<f64>().sqrt()).collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv.truncate(rows.min(cols));
    sv
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

impl Mul for &Matrix {
    type Output = Matrix;
    fn mul(self, rhs: &Matrix) -> Matrix {
        self.matmul(rhs)
    }
}

/// A matrix stored as `2^exponent · unit`.
///
/// The unit part always has operator norm in `[0.5, 2]`. Rescaling is by
/// exact powers of two, so renormalizing never perturbs the mantissas and the
/// log-scale is an integer multiple of `ln 2`. `log_abs_det` and the sign of
/// the determinant are tracked additively alongside the product.
#[derive(Clone, Debug, PartialEq)]
pub struct ScaledMatrix {
    unit: Matrix,
    exponent: i64,
    log_abs_det: f64,
    det_negative: bool,
}

impl ScaledMatrix {
    pub fn identity(d: usize) -> Self {
        ScaledMatrix { unit: Matrix::identity(d), exponent: 0, log_abs_det: 0.0, det_negative: false }
    }

    /// Wraps a square matrix; determinant data computed directly.
    pub fn from_matrix(m: Matrix) -> Self {
        let det = m.determinant();
        let mut s = ScaledMatrix { unit: m, exponent: 0, log_abs_det: det.abs().ln(), det_negative: det < 0.0 };
        s.renormalize(false);
        s
    }

    pub fn dim(&self) -> usize {
        self.unit.rows()
    }

    pub fn unit(&self) -> &Matrix {
        &self.unit
    }

    pub fn exponent(&self) -> i64 {
        self.exponent
    }

    /// Natural-log scale factor.
    pub fn log_scale(&self) -> f64 {
        self.exponent as f64 * LN_2
    }

    pub fn log_abs_det(&self) -> f64 {
        self.log_abs_det
    }

    pub fn det_negative(&self) -> bool {
        self.det_negative
    }

    /// The represented matrix (may overflow for long products).
    pub fn to_matrix(&self) -> Matrix {
        self.unit.scaled(pow2(self.exponent))
    }

    /// `self ← self · rhs`, where `rhs` has the given determinant data.
    pub fn mul_right(&mut self, rhs: &Matrix, rhs_log_abs_det: f64, rhs_det_negative: bool) {
        self.unit = self.unit.matmul(rhs);
        self.log_abs_det += rhs_log_abs_det;
        self.det_negative ^= rhs_det_negative;
        self.renormalize(false);
    }

    /// `self ← lhs · self`.
    pub fn mul_left(&mut self, lhs: &Matrix, lhs_log_abs_det: f64, lhs_det_negative: bool) {
        self.unit = lhs.matmul(&self.unit);
        self.log_abs_det += lhs_log_abs_det;
        self.det_negative ^= lhs_det_negative;
        self.renormalize(false);
    }

    /// Like [`mul_right`](Self::mul_right) but rescales unconditionally.
    pub fn mul_right_forced(&mut self, rhs: &Matrix, rhs_log_abs_det: f64, rhs_det_negative: bool) {
        self.unit = self.unit.matmul(rhs);
        self.log_abs_det += rhs_log_abs_det;
        self.det_negative ^= rhs_det_negative;
        self.renormalize(true);
    }

    pub fn product(&self, other: &ScaledMatrix) -> ScaledMatrix {
        let mut out = ScaledMatrix {
            unit: self.unit.matmul(&other.unit),
            exponent: self.exponent + other.exponent,
            log_abs_det: self.log_abs_det + other.log_abs_det,
            det_negative: self.det_negative ^ other.det_negative,
        };
        out.renormalize(false);
        out
    }

    pub fn transpose(&self) -> ScaledMatrix {
        ScaledMatrix { unit: self.unit.transpose(), ..self.clone() }
    }

    fn renormalize(&mut self, force: bool) {
        let d = self.unit.rows() as f64;
        let f = self.unit.frobenius_norm();
        if !f.is_finite() || f == 0.0 {
            return;
        }
        // ‖U‖ ≤ ‖U‖_F ≤ √d ‖U‖, so this window certifies ‖U‖ ∈ [0.5, 2].
        let (lo, hi) = (0.5 * d.sqrt(), 2.0);
        if !force && lo <= hi && f >= lo && f <= hi {
            return;
        }
        let op = self.unit.operator_norm();
        let e = op.log2().floor() as i64;
        if e != 0 {
            self.unit.scale(pow2(-e));
            self.exponent += e;
        }
    }

    /// `log ‖M‖` for the Euclidean operator norm.
    pub fn log_operator_norm(&self) -> f64 {
        self.log_scale() + self.unit.operator_norm().ln()
    }

    /// `log ‖M‖_F`.
    pub fn log_frobenius_norm(&self) -> f64 {
        self.log_scale() + self.unit.frobenius_norm().ln()
    }

    /// Descending log singular values; their sum is `log |det M|`.
    pub fn cartan_vector(&self) -> Vec<f64> {
        let sv = self.unit.singular_values();
        let ls = self.log_scale();
        if self.dim() == 2 {
            let top = ls + sv[0].ln();
            return vec![top, self.log_abs_det - top];
        }
        sv.iter().map(|s| ls + s.ln()).collect()
    }

    /// Hyperbolic displacement `d(g·i, i)` for `g ∈ SL₂(ℝ)` acting on the
    /// upper half-plane.
    pub fn displacement_h2(&self) -> crate::Result<f64> {
        if self.dim() != 2 || self.det_negative || self.log_abs_det.abs() > 1e-9 {
            let det = if self.det_negative { -self.log_abs_det.exp() } else { self.log_abs_det.exp() };
            return Err(crate::Error::NotUnimodular(det));
        }
        // cosh d = (a² + b² + c² + d²)/2 = 4^e ‖U‖_F² / 2
        let f2 = self.unit.data().iter().map(|x| x * x).sum::<f64>();
        let log_x = (f2 / 2.0).ln() + 2.0 * self.log_scale();
        if log_x > 20.0 {
            // arccosh(x) = ln x + ln(1 + √(1 - x⁻²)) ≈ ln x + ln 2 - x⁻²/4
            return Ok(log_x + LN_2 - 0.25 * (-2.0 * log_x).exp());
        }
        let x = log_x.exp().max(1.0);
        Ok(x.acosh())
    }
}

pub(crate) fn pow2(e: i64) -> f64 {
    // exact for the exponent range we produce
    f64::powi(2.0, e as i32)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::E;

    #[test]
    fn closed_form_norms() {
        let m = Matrix::from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0]]);
        let s = ScaledMatrix::from_matrix(m);
        assert!((s.log_operator_norm() - (1.0 + 2f64.sqrt()).ln()).abs() < 1e-12);
        let c = s.cartan_vector();
        assert!((c[0] + c[1]).abs() < 1e-12);
        assert!((c[0] - 0.881373587019543).abs() < 1e-12);
    }

    #[test]
    fn identity_and_diag() {
        assert_eq!(ScaledMatrix::identity(3).log_operator_norm(), 0.0);
        let s = ScaledMatrix::from_matrix(Matrix::diag(&[2.0, 0.5]));
        assert!((s.log_operator_norm() - 2f64.ln()).abs() < 1e-14);
        let c = ScaledMatrix::from_matrix(Matrix::diag(&[4.0, 1.0, 0.25])).cartan_vector();
        let l4 = 4f64.ln();
        assert!((c[0] - l4).abs() < 1e-12 && c[1].abs() < 1e-12 && (c[2] + l4).abs() < 1e-12);
    }

    #[test]
    fn diagonal_square_product() {
        let a = Matrix::diag(&[E, 1.0 / E]);
        let mut s = ScaledMatrix::identity(2);
        s.mul_right(&a, 0.0, false);
        s.mul_right(&a, 0.0, false);
        // represented matrix diag(e², e⁻²)
        let m = s.to_matrix();
        assert!((m[(0, 0)] - E * E).abs() < 1e-12);
        assert!((m[(1, 1)] - 1.0 / (E * E)).abs() < 1e-15);
        assert!((s.log_operator_norm() - 2.0).abs() < 1e-13);
        let op = s.unit().operator_norm();
        assert!((0.5..=2.0).contains(&op));
        // unit ∝ diag(1, e⁻⁴)
        assert!((s.unit()[(1, 1)] / s.unit()[(0, 0)] - (-4f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn displacement_values() {
        let d = |m: Matrix| ScaledMatrix::from_matrix(m).displacement_h2().unwrap();
        assert_eq!(d(Matrix::identity(2)), 0.0);
        assert!((d(Matrix::diag(&[2.0, 0.5])) - 4f64.ln()).abs() < 1e-12);
        let parabolic = Matrix::from_rows(&[vec![1.0, 1.0], vec![0.0, 1.0]]);
        // Möbius image of i is i + 1; cosh d = 1 + |1|²/(2·1·1) = 3/2
        assert!((d(parabolic) - 1.5f64.acosh()).abs() < 1e-12);
        assert!((1.5f64.acosh() - 0.962423650119206).abs() < 1e-12);
        let bad = ScaledMatrix::from_matrix(Matrix::diag(&[2.0, 1.0]));
        assert!(matches!(bad.displacement_h2(), Err(crate::Error::NotUnimodular(_))));
    }

    #[test]
    fn jacobi_matches_closed_form_embedding() {
        let m = Matrix::from_rows(&[vec![1.0, 2.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 0.3]]);
        let sv = m.singular_values();
        assert!((sv[0] - (1.0 + 2f64.sqrt())).abs() < 1e-12);
        assert!((sv[1] - (2f64.sqrt() - 1.0)).abs() < 1e-12);
        assert!((sv[2] - 0.3).abs() < 1e-12);
    }

    #[test]
    fn exterior_square_norm_is_top_two_product() {
        let m = Matrix::from_rows(&[vec![2.0, 1.0, 0.5], vec![0.3, 1.0, -1.0], vec![0.0, 0.7, 1.5]]);
        let sv = m.singular_values();
        let w = m.exterior_power(2).operator_norm();
        assert!((w - sv[0] * sv[1]).abs() < 1e-12 * w);
        assert!((m.exterior_power(3)[(0, 0)] - m.determinant()).abs() < 1e-12);
    }

    #[test]
    fn inverse_roundtrip() {
        let m = Matrix::from_rows(&[vec![2.0, 1.0, 0.5], vec![0.3, 1.0, -1.0], vec![0.0, 0.7, 1.5]]);
        let inv = m.inverse().unwrap();
        assert!(m.matmul(&inv).max_abs_diff(&Matrix::identity(3)) < 1e-14);
        assert!(Matrix::zeros(2, 2).inverse().is_none());
    }
}
