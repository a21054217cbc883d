//! Dense complex linear algebra for small meshes.
//!
//! Matrices are row-major and sized for desk-scale meshes (tens of ports),
//! so everything here is a straightforward loop over contiguous storage.

use std::fmt;
use std::ops::{Index, IndexMut};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{MeshError, Result};

pub type Complex = Complex64;

pub const ZERO: Complex = Complex::new(0.0, 0.0);
pub const ONE: Complex = Complex::new(1.0, 0.0);
pub const J: Complex = Complex::new(0.0, 1.0);

fn is_finite(z: &Complex) -> bool {
    z.re.is_finite() && z.im.is_finite()
}

#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex>,
}

impl ComplexMatrix {
    /// Builds a matrix from row-major entries, rejecting non-finite values.
    pub fn new(rows: usize, cols: usize, data: Vec<Complex>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(MeshError::Dimension(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|z| !is_finite(z)) {
            return Err(MeshError::InvalidArgument(format!(
                "non-finite entry at row {}, col {}",
                pos / cols.max(1),
                pos % cols.max(1)
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[&[Complex]]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        if rows.iter().any(|row| row.len() != c) {
            return Err(MeshError::Dimension("ragged rows".into()));
        }
        Self::new(r, c, rows.iter().flat_map(|row| row.iter().copied()).collect())
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn diagonal(diag: &[Complex]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
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

    pub fn as_slice(&self) -> &[Complex] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[Complex] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn matmul(&self, other: &ComplexMatrix) -> Result<ComplexMatrix> {
        if self.cols != other.rows {
            return Err(MeshError::Dimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = ComplexMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == ZERO {
                    continue;
                }
                let src = other.row(k);
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, &b) in dst.iter_mut().zip(src) {
                    *d += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, v: &ComplexVector) -> Result<ComplexVector> {
        if self.cols != v.len() {
            return Err(MeshError::Dimension(format!(
                "{}x{} matrix applied to length-{} vector",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        Ok(ComplexVector(
            (0..self.rows)
                .map(|i| self.row(i).iter().zip(v.iter()).map(|(a, b)| a * b).sum())
                .collect(),
        ))
    }

    /// Conjugate transpose.
    pub fn dagger(&self) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)].conj();
            }
        }
        out
    }

    /// Largest absolute entry of `m†m - I`.
    pub fn unitarity_defect(&self) -> Result<f64> {
        if !self.is_square() {
            return Err(MeshError::Dimension(format!(
                "unitarity of a non-square {}x{} matrix",
                self.rows, self.cols
            )));
        }
        let gram = self.dagger().matmul(self)?;
        let n = self.rows;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let target = if i == j { ONE } else { ZERO };
                worst = worst.max((gram[(i, j)] - target).norm());
            }
        }
        Ok(worst)
    }

    pub fn sub(&self, other: &ComplexMatrix) -> Result<ComplexMatrix> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(MeshError::Dimension("shape mismatch in subtraction".into()));
        }
        Ok(ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        })
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &ComplexMatrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Extracts the submatrix with the given row and column indices.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(rows.len(), cols.len());
        for (oi, &i) in rows.iter().enumerate() {
            for (oj, &j) in cols.iter().enumerate() {
                out[(oi, oj)] = self[(i, j)];
            }
        }
        out
    }

    /// Left-multiplies in place by a 2x2 block acting on rows `i` and `j`.
    pub fn apply_block_left(&mut self, block: &[[Complex; 2]; 2], i: usize, j: usize) {
        for c in 0..self.cols {
            let a = self.data[i * self.cols + c];
            let b = self.data[j * self.cols + c];
            self.data[i * self.cols + c] = block[0][0] * a + block[0][1] * b;
            self.data[j * self.cols + c] = block[1][0] * a + block[1][1] * b;
        }
    }

    /// Largest singular value by power iteration on `m†m`.
    pub fn max_singular_value(&self) -> f64 {
        let gram = match self.dagger().matmul(self) {
            Ok(g) => g,
            Err(_) => unreachable!("m†m is always conformable"),
        };
        let n = gram.rows;
        if n == 0 {
            return 0.0;
        }
        // Deterministic, generic start vector.
        let mut v = ComplexVector(
            (0..n)
                .map(|k| Complex::new(1.0 + 0.1 * k as f64, 0.37 * (k as f64).sin()))
                .collect(),
        );
        v.normalize();
        let mut lambda = 0.0;
        for _ in 0..5000 {
            let w = gram.mul_vec(&v).expect("square");
            let norm = w.power().sqrt();
            if norm == 0.0 {
                return 0.0;
            }
            let next = norm;
            v = w;
            v.scale(1.0 / norm);
            if (next - lambda).abs() <= 1e-15 * next.max(1.0) {
                lambda = next;
                break;
            }
            lambda = next;
        }
        lambda.sqrt()
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex;
    fn index(&self, (i, j): (usize, usize)) -> &Complex {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex {
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for z in self.row(i) {
                write!(f, "{:+.4}{:+.4}j ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

/// Embeds a 2x2 block into an `n`x`n` identity on rows/columns `i` and `j`.
pub fn embed_2x2(block: &ComplexMatrix, n: usize, i: usize, j: usize) -> Result<ComplexMatrix> {
    if block.rows != 2 || block.cols != 2 {
        return Err(MeshError::Dimension(format!(
            "expected a 2x2 block, got {}x{}",
            block.rows, block.cols
        )));
    }
    if !(i < j && j < n) {
        return Err(MeshError::InvalidArgument(format!(
            "embedding indices ({i}, {j}) invalid for n = {n}"
        )));
    }
    let mut m = ComplexMatrix::identity(n);
    m[(i, i)] = block[(0, 0)];
    m[(i, j)] = block[(0, 1)];
    m[(j, i)] = block[(1, 0)];
    m[(j, j)] = block[(1, 1)];
    Ok(m)
}

#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct ComplexVector(pub Vec<Complex>);

impl ComplexVector {
    pub fn zeros(n: usize) -> Self {
        Self(vec![ZERO; n])
    }

    pub fn basis(n: usize, k: usize) -> Self {
        let mut v = Self::zeros(n);
        v.0[k] = ONE;
        v
    }

    pub fn from_real(values: &[f64]) -> Self {
        Self(values.iter().map(|&x| Complex::new(x, 0.0)).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Complex> {
        self.0.iter()
    }

    /// Total optical power, `Σ|v_i|²`.
    pub fn power(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn powers(&self) -> Vec<f64> {
        self.0.iter().map(|z| z.norm_sqr()).collect()
    }

    pub fn scale(&mut self, s: f64) {
        for z in &mut self.0 {
            *z *= s;
        }
    }

    /// Rescales to unit power; the zero vector is left untouched.
    pub fn normalize(&mut self) {
        let p = self.power();
        if p > 0.0 {
            self.scale(1.0 / p.sqrt());
        }
    }
}

impl Index<usize> for ComplexVector {
    type Output = Complex;
    fn index(&self, i: usize) -> &Complex {
        &self.0[i]
    }
}

impl IndexMut<usize> for ComplexVector {
    fn index_mut(&mut self, i: usize) -> &mut Complex {
        &mut self.0[i]
    }
}

/// Haar-random unitary: Gram-Schmidt on a complex Gaussian matrix.
pub fn haar_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> ComplexMatrix {
    let mut cols: Vec<Vec<Complex>> = Vec::with_capacity(n);
    for _ in 0..n {
        let mut v: Vec<Complex> = (0..n)
            .map(|_| Complex::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        for c in &cols {
            let dot: Complex = c.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
            for (x, y) in v.iter_mut().zip(c) {
                *x -= dot * y;
            }
        }
        let norm = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        cols.push(v.into_iter().map(|x| x / norm).collect());
    }
    let mut u = ComplexMatrix::zeros(n, n);
    for (j, c) in cols.iter().enumerate() {
        for (i, x) in c.iter().enumerate() {
            u[(i, j)] = *x;
        }
    }
    u
}

/// Solves the dense real system `a·x = b` (row-major `n`x`n`) by Gaussian
/// elimination with partial pivoting.
pub fn solve_linear(mut a: Vec<f64>, mut b: Vec<f64>, n: usize) -> Result<Vec<f64>> {
    if a.len() != n * n || b.len() != n {
        return Err(MeshError::Dimension("linear system shape".into()));
    }
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i * n + col].abs().total_cmp(&a[j * n + col].abs()))
            .unwrap_or(col);
        if a[pivot * n + col].abs() < 1e-300 {
            return Err(MeshError::Numerical("singular linear system".into()));
        }
        if pivot != col {
            for k in 0..n {
                a.swap(col * n + k, pivot * n + k);
            }
            b.swap(col, pivot);
        }
        let d = a[col * n + col];
        for row in col + 1..n {
            let f = a[row * n + col] / d;
            if f != 0.0 {
                for k in col..n {
                    a[row * n + k] -= f * a[col * n + k];
                }
                b[row] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row * n + k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row * n + row];
    }
    Ok(x)
}

/// Eigen-decomposition of a real symmetric matrix (row-major `n`x`n`) by
/// cyclic Jacobi rotations. Returns eigenvalues in descending order with the
/// matching eigenvectors as columns of the row-major output.
pub fn symmetric_eigen(a: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    assert_eq!(a.len(), n * n);
    let mut m = a.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i * n + j] * m[i * n + j])
            .sum();
        let scale: f64 = m.iter().map(|x| x * x).sum::<f64>().max(f64::MIN_POSITIVE);
        if off <= 1e-30 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[p * n + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = m[k * n + p];
                    let akq = m[k * n + q];
                    m[k * n + p] = c * akp - s * akq;
                    m[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = m[p * n + k];
                    let aqk = m[q * n + k];
                    m[p * n + k] = c * apk - s * aqk;
                    m[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| m[y * n + y].total_cmp(&m[x * n + x]));
    let values = order.iter().map(|&k| m[k * n + k]).collect();
    let mut vectors = vec![0.0; n * n];
    for (col, &k) in order.iter().enumerate() {
        for r in 0..n {
            vectors[r * n + col] = v[r * n + k];
        }
    }
    (values, vectors)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> ComplexMatrix {
        let data = (0..r * c)
            .map(|_| Complex::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        ComplexMatrix::new(r, c, data).unwrap()
    }

    fn triple_loop(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(a.rows(), b.cols());
        for i in 0..a.rows() {
            for j in 0..b.cols() {
                let mut acc = ZERO;
                for k in 0..a.cols() {
                    acc += a[(i, k)] * b[(k, j)];
                }
                out[(i, j)] = acc;
            }
        }
        out
    }

    #[test]
    fn identity_is_left_neutral() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = random_matrix(&mut rng, 2, 2);
        let p = ComplexMatrix::identity(2).matmul(&m).unwrap();
        assert_eq!(p, m);
    }

    #[test]
    fn matmul_matches_triple_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let a = random_matrix(&mut rng, 3, 3);
            let b = random_matrix(&mut rng, 3, 3);
            let fast = a.matmul(&b).unwrap();
            assert!(fast.max_abs_diff(&triple_loop(&a, &b)) < 1e-12);
        }
    }

    #[test]
    fn matmul_rejects_mismatch() {
        let a = ComplexMatrix::zeros(2, 3);
        let b = ComplexMatrix::zeros(2, 3);
        assert!(matches!(a.matmul(&b), Err(MeshError::Dimension(_))));
    }

    #[test]
    fn non_finite_entries_are_rejected() {
        let r = ComplexMatrix::new(1, 1, vec![Complex::new(f64::NAN, 0.0)]);
        assert!(r.is_err());
    }

    #[test]
    fn dagger_is_involution() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = random_matrix(&mut rng, 3, 4);
        assert_eq!(m.dagger().dagger(), m);
        assert_eq!(ComplexMatrix::identity(4).dagger(), ComplexMatrix::identity(4));
        assert_eq!(m.dagger()[(2, 1)], m[(1, 2)].conj());
    }

    #[test]
    fn unitarity_defect_of_identity_is_zero() {
        assert_eq!(ComplexMatrix::identity(5).unitarity_defect().unwrap(), 0.0);
        assert!(ComplexMatrix::zeros(2, 3).unitarity_defect().is_err());
    }

    #[test]
    fn embed_identity_and_swap() {
        let eye = ComplexMatrix::identity(2);
        assert_eq!(embed_2x2(&eye, 4, 1, 3).unwrap(), ComplexMatrix::identity(4));

        let swap = ComplexMatrix::from_rows(&[&[ZERO, ONE], &[ONE, ZERO]]).unwrap();
        let m = embed_2x2(&swap, 3, 0, 1).unwrap();
        let out = m.mul_vec(&ComplexVector::basis(3, 0)).unwrap();
        assert_eq!(out.powers(), vec![0.0, 1.0, 0.0]);

        assert!(embed_2x2(&eye, 3, 2, 1).is_err());
        assert!(embed_2x2(&eye, 3, 1, 3).is_err());
        assert!(embed_2x2(&ComplexMatrix::identity(3), 3, 0, 1).is_err());
    }

    #[test]
    fn embedded_unitary_stays_unitary() {
        let c = std::f64::consts::FRAC_1_SQRT_2;
        let bs = ComplexMatrix::from_rows(&[
            &[Complex::new(c, 0.0), Complex::new(0.0, c)],
            &[Complex::new(0.0, c), Complex::new(c, 0.0)],
        ])
        .unwrap();
        let m = embed_2x2(&bs, 6, 2, 5).unwrap();
        assert!(m.unitarity_defect().unwrap() < 1e-12);
    }

    #[test]
    fn power_iteration_on_diagonal() {
        let d = ComplexMatrix::diagonal(&[
            Complex::new(0.5, 0.0),
            Complex::new(0.0, -0.9),
            Complex::new(0.2, 0.1),
        ]);
        assert!((d.max_singular_value() - 0.9).abs() < 1e-9);
    }

    #[test]
    fn solves_small_system() {
        let a = vec![0.0, 2.0, 1.0, 1.0, 1.0, 0.0, 3.0, 0.0, 1.0];
        let x_true = [1.0, -2.0, 0.5];
        let b: Vec<f64> = (0..3).map(|i| (0..3).map(|k| a[i * 3 + k] * x_true[k]).sum()).collect();
        let x = solve_linear(a, b, 3).unwrap();
        for (u, v) in x.iter().zip(x_true) {
            assert!((u - v).abs() < 1e-12);
        }
        assert!(solve_linear(vec![1.0, 2.0, 2.0, 4.0], vec![1.0, 1.0], 2).is_err());
    }

    #[test]
    fn jacobi_recovers_known_spectrum() {
        let a = [4.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 2.0];
        let (vals, vecs) = symmetric_eigen(&a, 3);
        // Characteristic polynomial roots of the tridiagonal matrix: 3 ± √3 and 3.
        let expected = [3.0 + 3f64.sqrt(), 3.0, 3.0 - 3f64.sqrt()];
        for (v, e) in vals.iter().zip(expected) {
            assert!((v - e).abs() < 1e-12);
        }
        for col in 0..3 {
            for row in 0..3 {
                let av: f64 = (0..3).map(|k| a[row * 3 + k] * vecs[k * 3 + col]).sum();
                assert!((av - vals[col] * vecs[row * 3 + col]).abs() < 1e-10);
            }
        }
    }

    proptest::proptest! {
        #[test]
        fn matmul_is_associative(seed in 0u64..10_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_matrix(&mut rng, 3, 4);
            let b = random_matrix(&mut rng, 4, 2);
            let c = random_matrix(&mut rng, 2, 3);
            let left = a.matmul(&b).unwrap().matmul(&c).unwrap();
            let right = a.matmul(&b.matmul(&c).unwrap()).unwrap();
            proptest::prop_assert!(left.max_abs_diff(&right) < 1e-10);
        }
    }
}
