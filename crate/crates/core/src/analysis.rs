//! Splitting an estimated minimal displacement vector into its primal and
//! dual parts, and checking the identities those parts satisfy.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::linalg::{DenseVector, ProductVector};
use crate::qp::QpSplitting;
use crate::sets::{ExtendedReal, SetSpec};

/// Estimated `v_P = (v_P′, v_P″)` and `v_D = (v_D′, v_D″)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CertificatePair {
    pub vp_z: DenseVector,
    pub vp_y: DenseVector,
    pub vd_z: DenseVector,
    pub vd_y: DenseVector,
}

impl CertificatePair {
    pub fn zeros(n: usize, m: usize) -> Self {
        CertificatePair {
            vp_z: DenseVector::zeros(n),
            vp_y: DenseVector::zeros(m),
            vd_z: DenseVector::zeros(n),
            vd_y: DenseVector::zeros(m),
        }
    }

    pub fn from_parts(vp: ProductVector, vd: ProductVector) -> Self {
        CertificatePair {
            vp_z: vp.z,
            vp_y: vp.y,
            vd_z: vd.z,
            vd_y: vd.y,
        }
    }

    pub fn vp(&self) -> ProductVector {
        ProductVector::new(self.vp_z.clone(), self.vp_y.clone())
    }

    pub fn vd(&self) -> ProductVector {
        ProductVector::new(self.vd_z.clone(), self.vd_y.clone())
    }

    /// `v_P + v_D`, the displacement vector these certificates decompose.
    pub fn displacement(&self) -> ProductVector {
        &self.vp() + &self.vd()
    }

    pub fn primal_is_zero(&self) -> bool {
        self.vp_z.iter().chain(self.vp_y.iter()).all(|&x| x == 0.0)
    }

    pub fn dual_is_zero(&self) -> bool {
        self.vd_z.iter().chain(self.vd_y.iter()).all(|&x| x == 0.0)
    }

    /// Replaces a certificate whose norm is at most `eps` by exact zero.
    pub fn pruned(mut self, eps: f64) -> Self {
        if self.vp().norm() <= eps {
            self.vp_z.fill(0.0);
            self.vp_y.fill(0.0);
        }
        if self.vd().norm() <= eps {
            self.vd_z.fill(0.0);
            self.vd_y.fill(0.0);
        }
        self
    }
}

fn project(set: &SetSpec, x: &DenseVector) -> DenseVector {
    set.project(x)
        .expect("certificate block matches set dimension")
}

/// Moreau decomposition of `−v̂` against `rec B × rec C` and its polar:
///
/// * `−v_D = (P_{rec B}(−v′), P_{rec C}(−v″))`
/// * `−v_P = (P_{(rec B)°}(−v′), P_{(rec C)°}(−v″))`
pub fn split_displacement(split: &QpSplitting, v: &ProductVector) -> CertificatePair {
    let (rec_b, rec_c) = split.recession_cones();
    let (polar_b, polar_c) = (
        rec_b.polar_cone().expect("recession cone"),
        rec_c.polar_cone().expect("recession cone"),
    );
    let neg_z = -&v.z;
    let neg_y = -&v.y;
    CertificatePair {
        vp_z: -project(&polar_b, &neg_z),
        vp_y: -project(&polar_c, &neg_y),
        vd_z: -project(rec_b, &neg_z),
        vd_y: -project(rec_c, &neg_y),
    }
}

/// Snaps independent estimates of `v_P` and `v_D` onto the cones they are
/// known to lie in (`−v_P` in the polar of the recession cones, `−v_D` in the
/// recession cones themselves).
pub fn project_certificates(
    split: &QpSplitting,
    vp: &ProductVector,
    vd: &ProductVector,
) -> CertificatePair {
    let (rec_b, rec_c) = split.recession_cones();
    let polar_b = rec_b.polar_cone().expect("recession cone");
    let polar_c = rec_c.polar_cone().expect("recession cone");
    CertificatePair {
        vp_z: -project(&polar_b, &-&vp.z),
        vp_y: -project(&polar_c, &-&vp.y),
        vd_z: -project(rec_b, &-&vd.z),
        vd_y: -project(rec_c, &-&vd.y),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityCheck {
    pub lhs: ExtendedReal,
    pub rhs: ExtendedReal,
    pub gap: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityReport {
    pub tol: f64,
    pub all_pass: bool,
    pub checks: BTreeMap<String, IdentityCheck>,
}

impl IdentityReport {
    pub fn get(&self, name: &str) -> Option<&IdentityCheck> {
        self.checks.get(name)
    }

    pub fn max_gap(&self) -> f64 {
        self.checks.values().map(|c| c.gap).fold(0.0, f64::max)
    }
}

fn gap(lhs: ExtendedReal, rhs: ExtendedReal) -> f64 {
    match (lhs, rhs) {
        (ExtendedReal::Finite(a), ExtendedReal::Finite(b)) => (a - b).abs(),
        (a, b) if a == b => 0.0,
        _ => f64::INFINITY,
    }
}

/// Evaluates the static identities satisfied by exact certificates on the
/// unit-normalized versions of `cert`.
///
/// Identities of the form `expr(v) = −‖v‖²` are divided through by `‖v‖`, so
/// their right-hand sides read `−‖v‖`.
pub fn verify_identities(split: &QpSplitting, cert: &CertificatePair, tol: f64) -> IdentityReport {
    let problem = split.problem();
    let a = &problem.constraint_matrix;
    let vp = cert.vp();
    let vd = cert.vd();
    let (vp_norm, vd_norm) = (vp.norm(), vd.norm());
    let up = vp.normalized().unwrap_or_else(|| vp.clone());
    let ud = vd.normalized().unwrap_or_else(|| vd.clone());
    let neg_up = -&up;
    let neg_ud = -&ud;
    let eval = |r: crate::error::Result<ExtendedReal>| r.expect("certificate dimensions match");

    let finite = ExtendedReal::Finite;
    let entries: Vec<(&str, ExtendedReal, ExtendedReal)> = vec![
        (
            "dual_kernel",
            finite((&problem.hessian * &ud.z).norm()),
            ExtendedReal::ZERO,
        ),
        (
            "dual_graph",
            finite((a * &ud.z - &ud.y).norm()),
            ExtendedReal::ZERO,
        ),
        (
            "dual_linear",
            finite(problem.linear.dot(&neg_ud.z)),
            finite(-vd_norm),
        ),
        (
            "dual_recession",
            eval(split.eval_rec_f(&neg_ud.z, &neg_ud.y))
                + eval(split.eval_rec_g(&neg_ud.z, &neg_ud.y)),
            finite(-vd_norm),
        ),
        (
            "primal_adjoint",
            finite((&up.z + a.tr_mul(&up.y)).norm()),
            ExtendedReal::ZERO,
        ),
        (
            "primal_support",
            eval(split.eval_f_conj(&neg_up.z, &neg_up.y)),
            finite(-vp_norm),
        ),
        (
            "primal_recession",
            eval(split.eval_rec_f_conj(&neg_up.z, &neg_up.y))
                + eval(split.eval_rec_g_conj(&up.z, &up.y)),
            finite(-vp_norm),
        ),
        ("orthogonality", finite(up.inner(&ud)), ExtendedReal::ZERO),
    ];

    let checks: BTreeMap<String, IdentityCheck> = entries
        .into_iter()
        .map(|(name, lhs, rhs)| {
            let gap = gap(lhs, rhs);
            (
                name.to_string(),
                IdentityCheck {
                    lhs,
                    rhs,
                    gap,
                    pass: gap <= tol,
                },
            )
        })
        .collect();
    IdentityReport {
        tol,
        all_pass: checks.values().all(|c| c.pass),
        checks,
    }
}

/// `|⟨v_P, v_D⟩| ≤ tol·(1 + ‖v_P‖‖v_D‖)`.
pub fn orthogonality_check(cert: &CertificatePair, tol: f64) -> bool {
    let (vp, vd) = (cert.vp(), cert.vd());
    vp.inner(&vd).abs() <= tol * (1.0 + vp.norm() * vd.norm())
}
