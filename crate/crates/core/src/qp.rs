//! Convex QP `minimize ½⟨z,Qz⟩ + ⟨q,z⟩ over z ∈ B subject to Az ∈ C`, split
//! into the two functions handed to Douglas-Rachford:
//!
//! * `f(z, y) = ι_B(z) + ι_C(y)`
//! * `g(z, y) = ½⟨z,Qz⟩ + ⟨q,z⟩ + ι{Az = y}(z, y)`
//!
//! together with their conjugates, recession functions, and the checks that
//! decide whether a direction certifies strong infeasibility.

use crate::error::{Error, Result};
use crate::linalg::{
    asymmetry, DenseMatrix, DenseVector, ProductVector, PseudoInverse, SpdFactor, DEFAULT_RANK_TOL,
};
use crate::sets::{ExtendedReal, SetSpec};

/// Absolute tolerance for indicator memberships in the recession-function
/// evaluators.
pub const TOL_MEM: f64 = 1e-8;

const SYMMETRY_TOL: f64 = 1e-12;
pub(crate) const PSD_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    /// `Q`, symmetric positive semidefinite, `n × n`.
    pub hessian: DenseMatrix,
    /// `q`, length `n`.
    pub linear: DenseVector,
    /// `A`, `m × n`.
    pub constraint_matrix: DenseMatrix,
    /// `B ⊆ ℝⁿ`.
    pub domain: SetSpec,
    /// `C ⊆ ℝᵐ`.
    pub constraint_set: SetSpec,
}

impl QpProblem {
    pub fn new(
        hessian: DenseMatrix,
        linear: DenseVector,
        constraint_matrix: DenseMatrix,
        domain: SetSpec,
        constraint_set: SetSpec,
    ) -> Result<Self> {
        let n = linear.len();
        let m = constraint_matrix.nrows();
        let mismatch = |context, expected, found| Error::DimensionMismatch {
            context,
            expected,
            found,
        };
        if hessian.nrows() != n || hessian.ncols() != n {
            return Err(mismatch("Q", n, hessian.nrows().max(hessian.ncols())));
        }
        if constraint_matrix.ncols() != n {
            return Err(mismatch("A columns", n, constraint_matrix.ncols()));
        }
        if domain.dim() != n {
            return Err(mismatch("B", n, domain.dim()));
        }
        if constraint_set.dim() != m {
            return Err(mismatch("C", m, constraint_set.dim()));
        }
        domain.validate()?;
        constraint_set.validate()?;
        if asymmetry(&hessian) > SYMMETRY_TOL * hessian.amax().max(1.0) {
            return Err(Error::NotSymmetric);
        }
        if n > 0 {
            let min_eigenvalue = PseudoInverse::new(&hessian, DEFAULT_RANK_TOL)?.min_eigenvalue();
            if min_eigenvalue < -PSD_TOL {
                return Err(Error::NotPositiveSemidefinite { min_eigenvalue });
            }
        }
        Ok(QpProblem {
            hessian,
            linear,
            constraint_matrix,
            domain,
            constraint_set,
        })
    }

    /// Number of variables.
    pub fn n(&self) -> usize {
        self.linear.len()
    }

    /// Number of constraint rows.
    pub fn m(&self) -> usize {
        self.constraint_matrix.nrows()
    }

    pub fn objective(&self, z: &DenseVector) -> f64 {
        0.5 * z.dot(&(&self.hessian * z)) + self.linear.dot(z)
    }
}

/// A QP together with the cached factorizations its prox and conjugate
/// evaluations need.
#[derive(Debug, Clone)]
pub struct QpSplitting {
    problem: QpProblem,
    /// Cholesky factor of `I + Q + AᵀA`.
    kkt: SpdFactor,
    hessian_pinv: PseudoInverse,
    rec_domain: SetSpec,
    rec_constraint: SetSpec,
}

impl QpSplitting {
    pub fn new(problem: QpProblem) -> Result<Self> {
        let n = problem.n();
        let a = &problem.constraint_matrix;
        let kkt_matrix = DenseMatrix::identity(n, n) + &problem.hessian + a.transpose() * a;
        let kkt = SpdFactor::new(&kkt_matrix)?;
        let hessian_pinv = PseudoInverse::new(&problem.hessian, DEFAULT_RANK_TOL)?;
        let rec_domain = problem.domain.recession_cone();
        let rec_constraint = problem.constraint_set.recession_cone();
        Ok(QpSplitting {
            problem,
            kkt,
            hessian_pinv,
            rec_domain,
            rec_constraint,
        })
    }

    pub fn problem(&self) -> &QpProblem {
        &self.problem
    }

    pub fn n(&self) -> usize {
        self.problem.n()
    }

    pub fn m(&self) -> usize {
        self.problem.m()
    }

    /// Recession cones `(rec B, rec C)`.
    pub fn recession_cones(&self) -> (&SetSpec, &SetSpec) {
        (&self.rec_domain, &self.rec_constraint)
    }

    fn check_shape(&self, p: &ProductVector) {
        assert!(
            p.n() == self.n() && p.m() == self.m(),
            "product vector has blocks ({}, {}), problem has ({}, {})",
            p.n(),
            p.m(),
            self.n(),
            self.m()
        );
    }

    /// `prox_f(z, y) = (P_B z, P_C y)`.
    pub fn prox_f(&self, p: &ProductVector) -> ProductVector {
        self.check_shape(p);
        let mut out = ProductVector::zeros(self.n(), self.m());
        self.problem
            .domain
            .project_into(p.z.as_slice(), out.z.as_mut_slice());
        self.problem
            .constraint_set
            .project_into(p.y.as_slice(), out.y.as_mut_slice());
        out
    }

    /// `prox_g(z_s, y_s) = (z, Az)` with `(I + Q + AᵀA) z = z_s − q + Aᵀy_s`.
    pub fn prox_g(&self, p: &ProductVector) -> ProductVector {
        self.check_shape(p);
        let a = &self.problem.constraint_matrix;
        let rhs = &p.z - &self.problem.linear + a.tr_mul(&p.y);
        let z = self.kkt.solve(&rhs);
        let y = a * &z;
        ProductVector::new(z, y)
    }

    /// `f(z, y)`, with indicator memberships tested at [`TOL_MEM`].
    pub fn eval_f(&self, z: &DenseVector, y: &DenseVector) -> Result<ExtendedReal> {
        Ok(ExtendedReal::indicator(
            self.problem.domain.membership(z, TOL_MEM)?
                && self.problem.constraint_set.membership(y, TOL_MEM)?,
        ))
    }

    /// `g(z, y)`, with the graph constraint tested at [`TOL_MEM`].
    pub fn eval_g(&self, z: &DenseVector, y: &DenseVector) -> Result<ExtendedReal> {
        self.check_blocks(z, y)?;
        let on_graph = (&self.problem.constraint_matrix * z - y).norm() <= TOL_MEM;
        Ok(ExtendedReal::indicator(on_graph) + ExtendedReal::Finite(self.problem.objective(z)))
    }

    fn check_blocks(&self, z: &DenseVector, y: &DenseVector) -> Result<()> {
        if z.len() != self.n() {
            return Err(Error::DimensionMismatch {
                context: "first block",
                expected: self.n(),
                found: z.len(),
            });
        }
        if y.len() != self.m() {
            return Err(Error::DimensionMismatch {
                context: "second block",
                expected: self.m(),
                found: y.len(),
            });
        }
        Ok(())
    }

    /// `f*(λ, μ) = σ_B(λ) + σ_C(μ)`.
    pub fn eval_f_conj(&self, lambda: &DenseVector, mu: &DenseVector) -> Result<ExtendedReal> {
        Ok(self.problem.domain.support(lambda)? + self.problem.constraint_set.support(mu)?)
    }

    /// `g*(λ, μ) = ½⟨w, Q†w⟩ + ι_{range Q}(w)` with `w = λ + Aᵀμ − q`.
    pub fn eval_g_conj(&self, lambda: &DenseVector, mu: &DenseVector) -> Result<ExtendedReal> {
        self.check_blocks(lambda, mu)?;
        let w = lambda + self.problem.constraint_matrix.tr_mul(mu) - &self.problem.linear;
        let (pinv_w, in_range) = self.hessian_pinv.apply(&w)?;
        Ok(if in_range {
            ExtendedReal::Finite(0.5 * w.dot(&pinv_w))
        } else {
            ExtendedReal::PosInf
        })
    }

    /// `rec f(z̄, ȳ) = ι_{rec B}(z̄) + ι_{rec C}(ȳ)`.
    pub fn eval_rec_f(&self, z: &DenseVector, y: &DenseVector) -> Result<ExtendedReal> {
        Ok(ExtendedReal::indicator(
            self.rec_domain.membership(z, TOL_MEM)?
                && self.rec_constraint.membership(y, TOL_MEM)?,
        ))
    }

    /// `rec g(z̄, ȳ) = ⟨q, z̄⟩ + ι_{ker Q}(z̄) + ι{Az = y}(z̄, ȳ)`.
    pub fn eval_rec_g(&self, z: &DenseVector, y: &DenseVector) -> Result<ExtendedReal> {
        self.check_blocks(z, y)?;
        let in_kernel = (&self.problem.hessian * z).norm() <= TOL_MEM;
        let on_graph = (&self.problem.constraint_matrix * z - y).norm() <= TOL_MEM;
        Ok(ExtendedReal::Finite(self.problem.linear.dot(z))
            + ExtendedReal::indicator(in_kernel && on_graph))
    }

    /// `rec f*(λ̄, μ̄) = σ_B(λ̄) + σ_C(μ̄)`.
    pub fn eval_rec_f_conj(&self, lambda: &DenseVector, mu: &DenseVector) -> Result<ExtendedReal> {
        self.eval_f_conj(lambda, mu)
    }

    /// `rec g*(λ̄, μ̄) = ι_{0}(λ̄ + Aᵀμ̄)`.
    pub fn eval_rec_g_conj(&self, lambda: &DenseVector, mu: &DenseVector) -> Result<ExtendedReal> {
        self.check_blocks(lambda, mu)?;
        let residual = (lambda + self.problem.constraint_matrix.tr_mul(mu)).norm();
        Ok(ExtendedReal::indicator(residual <= TOL_MEM))
    }

    /// Whether `(λ̄, μ̄)` certifies primal strong infeasibility:
    /// `λ̄ + Aᵀμ̄ = 0` and `σ_B(λ̄) + σ_C(μ̄) < 0`, tested on the unit-normalized
    /// pair.
    pub fn check_primal_certificate(
        &self,
        lambda: &DenseVector,
        mu: &DenseVector,
        eps: f64,
    ) -> bool {
        if self.check_blocks(lambda, mu).is_err() {
            return false;
        }
        let Some(unit) = ProductVector::new(lambda.clone(), mu.clone()).normalized() else {
            return false;
        };
        let residual = (&unit.z + self.problem.constraint_matrix.tr_mul(&unit.y)).norm();
        let support = match self.eval_f_conj(&unit.z, &unit.y) {
            Ok(value) => value,
            Err(_) => return false,
        };
        residual <= eps && support <= ExtendedReal::Finite(-eps)
    }

    /// Whether `z̄` certifies dual strong infeasibility: `z̄ ∈ rec B`,
    /// `Qz̄ = 0`, `Az̄ ∈ rec C` and `⟨q, z̄⟩ < 0`, tested on the unit-normalized
    /// direction.
    pub fn check_dual_certificate(&self, z: &DenseVector, eps: f64) -> bool {
        if z.len() != self.n() {
            return false;
        }
        let norm = z.norm();
        if norm == 0.0 {
            return false;
        }
        let unit = z / norm;
        let az = &self.problem.constraint_matrix * &unit;
        let in_rec_b = self.rec_domain.distance(&unit).is_ok_and(|d| d <= eps);
        let in_rec_c = self.rec_constraint.distance(&az).is_ok_and(|d| d <= eps);
        in_rec_b
            && (&self.problem.hessian * &unit).norm() <= eps
            && in_rec_c
            && self.problem.linear.dot(&unit) <= -eps
    }
}
