//! Dense linear algebra on top of `nalgebra`.
//!
//! Everything here is desk scale: matrices are dense and column-major as far as
//! `nalgebra` is concerned, and all factorizations are computed eagerly.

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::error::{Error, Result};

pub type DenseVector = DVector<f64>;
pub type DenseMatrix = DMatrix<f64>;

/// Default relative cutoff below which eigenvalues are treated as zero.
pub const DEFAULT_RANK_TOL: f64 = 1e-9;

const SYMMETRY_TOL: f64 = 1e-12;

/// Inner product `Σ aᵢbᵢ`.
pub fn inner(a: &DenseVector, b: &DenseVector) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            context: "inner",
            expected: a.len(),
            found: b.len(),
        });
    }
    Ok(a.dot(b))
}

/// Largest absolute asymmetry `|Mᵢⱼ − Mⱼᵢ|`.
pub fn asymmetry(m: &DenseMatrix) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

fn check_square_symmetric(m: &DenseMatrix, context: &'static str) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch {
            context,
            expected: m.nrows(),
            found: m.ncols(),
        });
    }
    let scale = m.amax().max(1.0);
    if asymmetry(m) > SYMMETRY_TOL * scale {
        return Err(Error::NotSymmetric);
    }
    Ok(())
}

/// Cached Cholesky factor of a symmetric positive definite matrix.
#[derive(Debug, Clone)]
pub struct SpdFactor {
    chol: Cholesky<f64, Dyn>,
}

impl SpdFactor {
    pub fn new(m: &DenseMatrix) -> Result<Self> {
        check_square_symmetric(m, "spd factor")?;
        let chol = Cholesky::new(m.clone()).ok_or(Error::NotPositiveDefinite)?;
        Ok(SpdFactor { chol })
    }

    pub fn dim(&self) -> usize {
        self.chol.l_dirty().nrows()
    }

    pub fn solve(&self, b: &DenseVector) -> DenseVector {
        assert_eq!(b.len(), self.dim(), "right-hand side has wrong length");
        self.chol.solve(b)
    }
}

/// Solves `Mx = b` for symmetric positive definite `M`.
pub fn spd_solve(m: &DenseMatrix, b: &DenseVector) -> Result<DenseVector> {
    let factor = SpdFactor::new(m)?;
    if b.len() != factor.dim() {
        return Err(Error::DimensionMismatch {
            context: "spd_solve",
            expected: factor.dim(),
            found: b.len(),
        });
    }
    Ok(factor.solve(b))
}

/// Moore-Penrose inverse of a symmetric positive semidefinite matrix, kept in
/// eigendecomposed form so it can be applied repeatedly.
#[derive(Debug, Clone)]
pub struct PseudoInverse {
    eigenvectors: DenseMatrix,
    eigenvalues: DenseVector,
    cutoff: f64,
    rank_tol: f64,
}

impl PseudoInverse {
    pub fn new(m: &DenseMatrix, rank_tol: f64) -> Result<Self> {
        check_square_symmetric(m, "pseudo inverse")?;
        let eig = SymmetricEigen::new(m.clone());
        let largest = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
        Ok(PseudoInverse {
            eigenvectors: eig.eigenvectors,
            eigenvalues: eig.eigenvalues,
            cutoff: rank_tol * largest,
            rank_tol,
        })
    }

    pub fn eigenvalues(&self) -> &DenseVector {
        &self.eigenvalues
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn rank(&self) -> usize {
        self.eigenvalues
            .iter()
            .filter(|&&l| l > self.cutoff && l > 0.0)
            .count()
    }

    /// Returns `M†b` and whether `b` lies in the range of `M`.
    pub fn apply(&self, b: &DenseVector) -> Result<(DenseVector, bool)> {
        let dim = self.eigenvalues.len();
        if b.len() != dim {
            return Err(Error::DimensionMismatch {
                context: "pseudo_inverse_apply",
                expected: dim,
                found: b.len(),
            });
        }
        let mut out = DenseVector::zeros(dim);
        let mut in_range_part = DenseVector::zeros(dim);
        for (k, &lambda) in self.eigenvalues.iter().enumerate() {
            if lambda <= self.cutoff || lambda <= 0.0 {
                continue;
            }
            let v = self.eigenvectors.column(k);
            let coeff = v.dot(b);
            out.axpy(coeff / lambda, &v, 1.0);
            in_range_part.axpy(coeff, &v, 1.0);
        }
        let orthogonal = (b - &in_range_part).norm();
        let in_range = orthogonal <= self.rank_tol * (1.0 + b.norm());
        Ok((out, in_range))
    }
}

/// One-shot `M†b` for symmetric positive semidefinite `M`.
pub fn pseudo_inverse_apply(
    m: &DenseMatrix,
    b: &DenseVector,
    rank_tol: f64,
) -> Result<(DenseVector, bool)> {
    PseudoInverse::new(m, rank_tol)?.apply(b)
}

/// Element `(z, y)` of the product space `H1 × H2`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductVector {
    pub z: DenseVector,
    pub y: DenseVector,
}

impl ProductVector {
    pub fn new(z: DenseVector, y: DenseVector) -> Self {
        ProductVector { z, y }
    }

    pub fn zeros(n: usize, m: usize) -> Self {
        ProductVector {
            z: DenseVector::zeros(n),
            y: DenseVector::zeros(m),
        }
    }

    /// Splits a flat vector of length `n + m` into its blocks.
    pub fn from_flat(flat: &[f64], n: usize) -> Self {
        assert!(flat.len() >= n);
        ProductVector {
            z: DenseVector::from_column_slice(&flat[..n]),
            y: DenseVector::from_column_slice(&flat[n..]),
        }
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.z.iter().chain(self.y.iter()).copied().collect()
    }

    pub fn n(&self) -> usize {
        self.z.len()
    }

    pub fn m(&self) -> usize {
        self.y.len()
    }

    pub fn dim(&self) -> usize {
        self.z.len() + self.y.len()
    }

    pub fn same_shape(&self, other: &ProductVector) -> bool {
        self.n() == other.n() && self.m() == other.m()
    }

    pub fn inner(&self, other: &ProductVector) -> f64 {
        assert!(
            self.same_shape(other),
            "product vector blocks differ in size"
        );
        self.z.dot(&other.z) + self.y.dot(&other.y)
    }

    pub fn norm_squared(&self) -> f64 {
        self.z.norm_squared() + self.y.norm_squared()
    }

    pub fn norm(&self) -> f64 {
        self.norm_squared().sqrt()
    }

    pub fn scale(&self, factor: f64) -> ProductVector {
        ProductVector {
            z: &self.z * factor,
            y: &self.y * factor,
        }
    }

    /// `self ← self + alpha·other`.
    pub fn axpy(&mut self, alpha: f64, other: &ProductVector) {
        self.z.axpy(alpha, &other.z, 1.0);
        self.y.axpy(alpha, &other.y, 1.0);
    }

    /// Unit vector in the same direction, or `None` for the zero vector.
    pub fn normalized(&self) -> Option<ProductVector> {
        let norm = self.norm();
        (norm > 0.0).then(|| self.scale(1.0 / norm))
    }
}

impl Add for &ProductVector {
    type Output = ProductVector;

    fn add(self, rhs: &ProductVector) -> ProductVector {
        ProductVector {
            z: &self.z + &rhs.z,
            y: &self.y + &rhs.y,
        }
    }
}

impl Sub for &ProductVector {
    type Output = ProductVector;

    fn sub(self, rhs: &ProductVector) -> ProductVector {
        ProductVector {
            z: &self.z - &rhs.z,
            y: &self.y - &rhs.y,
        }
    }
}

impl Mul<f64> for &ProductVector {
    type Output = ProductVector;

    fn mul(self, rhs: f64) -> ProductVector {
        self.scale(rhs)
    }
}

impl Neg for &ProductVector {
    type Output = ProductVector;

    fn neg(self) -> ProductVector {
        self.scale(-1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn v(xs: &[f64]) -> DenseVector {
        DenseVector::from_column_slice(xs)
    }

    fn mat(rows: usize, cols: usize, xs: &[f64]) -> DenseMatrix {
        DenseMatrix::from_row_slice(rows, cols, xs)
    }

    #[test]
    fn inner_examples() {
        assert_eq!(inner(&v(&[1.0, 2.0]), &v(&[3.0, 4.0])).unwrap(), 11.0);
        assert_eq!(inner(&v(&[0.0, 0.0]), &v(&[5.0, -7.0])).unwrap(), 0.0);
        assert_eq!(inner(&v(&[1.0, -1.0]), &v(&[1.0, 1.0])).unwrap(), 0.0);
    }

    #[test]
    fn inner_rejects_mismatch() {
        assert!(matches!(
            inner(&v(&[1.0]), &v(&[1.0, 2.0])),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn spd_solve_examples() {
        let x = spd_solve(&DenseMatrix::identity(2, 2), &v(&[3.0, 4.0])).unwrap();
        assert_abs_diff_eq!(x, v(&[3.0, 4.0]), epsilon = 1e-14);

        let x = spd_solve(&mat(2, 2, &[2.0, 0.0, 0.0, 4.0]), &v(&[2.0, 4.0])).unwrap();
        assert_abs_diff_eq!(x, v(&[1.0, 1.0]), epsilon = 1e-14);

        let m = mat(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let b = v(&[3.0, 3.0]);
        let x = spd_solve(&m, &b).unwrap();
        assert_abs_diff_eq!(x, v(&[1.0, 1.0]), epsilon = 1e-14);
        assert!((&m * &x - &b).norm() <= 1e-10 * (1.0 + b.norm()));
    }

    #[test]
    fn spd_solve_rejects_indefinite() {
        let err = spd_solve(&mat(2, 2, &[1.0, 0.0, 0.0, -1.0]), &v(&[1.0, 1.0])).unwrap_err();
        assert_eq!(err.to_string(), "matrix not positive definite");
        assert!(matches!(
            spd_solve(&mat(2, 2, &[1.0, 2.0, 0.0, 1.0]), &v(&[1.0, 1.0])),
            Err(Error::NotSymmetric)
        ));
    }

    #[test]
    fn pseudo_inverse_examples() {
        let (x, ok) =
            pseudo_inverse_apply(&DenseMatrix::identity(2, 2), &v(&[1.0, 2.0]), 1e-9).unwrap();
        assert!(ok);
        assert_abs_diff_eq!(x, v(&[1.0, 2.0]), epsilon = 1e-14);

        let m = mat(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let (x, ok) = pseudo_inverse_apply(&m, &v(&[3.0, 0.0]), 1e-9).unwrap();
        assert!(ok);
        assert_abs_diff_eq!(x, v(&[3.0, 0.0]), epsilon = 1e-14);

        let (x, ok) = pseudo_inverse_apply(&m, &v(&[0.0, 1.0]), 1e-9).unwrap();
        assert!(!ok);
        assert_abs_diff_eq!(x, v(&[0.0, 0.0]), epsilon = 1e-14);
    }

    #[test]
    fn pseudo_inverse_of_zero_matrix() {
        let pinv = PseudoInverse::new(&DenseMatrix::zeros(2, 2), 1e-9).unwrap();
        assert_eq!(pinv.rank(), 0);
        let (x, ok) = pinv.apply(&v(&[0.0, 0.0])).unwrap();
        assert!(ok);
        assert_eq!(x, v(&[0.0, 0.0]));
        assert!(!pinv.apply(&v(&[1e-3, 0.0])).unwrap().1);
    }

    fn arb_matrix(rows: usize, cols: usize) -> impl Strategy<Value = DenseMatrix> {
        proptest::collection::vec(-2.0f64..2.0, rows * cols)
            .prop_map(move |xs| DenseMatrix::from_row_slice(rows, cols, &xs))
    }

    proptest! {
        #[test]
        fn spd_round_trip(r in arb_matrix(4, 4), b in proptest::collection::vec(-10.0f64..10.0, 4)) {
            let m = &r * r.transpose() + DenseMatrix::identity(4, 4) * 0.1;
            let b = v(&b);
            let x = spd_solve(&m, &b).unwrap();
            prop_assert!((&m * x - &b).norm() <= 1e-9 * (1.0 + b.norm()));
        }

        #[test]
        fn penrose_identity_on_range(r in arb_matrix(4, 2), t in proptest::collection::vec(-3.0f64..3.0, 4)) {
            // rank-2 PSD matrix; b = M t is in range by construction
            let m = &r * r.transpose();
            let b = &m * v(&t);
            let (x, ok) = pseudo_inverse_apply(&m, &b, DEFAULT_RANK_TOL).unwrap();
            prop_assert!(ok);
            prop_assert!((&m * x - &b).norm() <= 1e-8 * (1.0 + b.norm()));
        }

        #[test]
        fn inner_symmetric_bilinear(
            a in proptest::collection::vec(-5.0f64..5.0, 3),
            b in proptest::collection::vec(-5.0f64..5.0, 3),
            c in proptest::collection::vec(-5.0f64..5.0, 3),
            alpha in -3.0f64..3.0,
        ) {
            let (a, b, c) = (v(&a), v(&b), v(&c));
            prop_assert_eq!(inner(&a, &b).unwrap(), inner(&b, &a).unwrap());
            let lhs = inner(&(&a * alpha + &c), &b).unwrap();
            let rhs = alpha * inner(&a, &b).unwrap() + inner(&c, &b).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
        }
    }

    #[test]
    fn product_vector_algebra() {
        let p = ProductVector::new(v(&[1.0, 2.0]), v(&[3.0]));
        let q = ProductVector::new(v(&[0.5, -1.0]), v(&[2.0]));
        assert_eq!(p.inner(&q), 0.5 - 2.0 + 6.0);
        assert_eq!((&p - &q).to_flat(), vec![0.5, 3.0, 1.0]);
        assert_eq!(ProductVector::from_flat(&p.to_flat(), 2), p);
        assert!(ProductVector::zeros(2, 1).normalized().is_none());
        assert_abs_diff_eq!(p.normalized().unwrap().norm(), 1.0, epsilon = 1e-15);
    }
}
