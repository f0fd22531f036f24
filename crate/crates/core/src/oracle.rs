//! Ground truth computed without the Douglas-Rachford engine.
//!
//! `v_P` and `v_D` are the minimum-norm points of `cl(dom f − dom g)` and
//! `cl(dom f* + dom g*)`. For the QP both sets are images of a product of
//! catalog sets under an affine map, so the minimum-norm point is found by
//! projected gradient on the parameters. Grid searches cover prox and
//! conjugate evaluation in one or two dimensions.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::linalg::{DenseMatrix, DenseVector, ProductVector};
use crate::qp::QpProblem;
use crate::sets::{ExtendedReal, SetSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct OracleConfig {
    pub pg_iters: usize,
    /// Fixed step; `None` uses `1/L` with `L` from power iteration.
    pub pg_step: Option<f64>,
    /// Relative change of the parameters at which projected gradient stops.
    pub pg_tol: f64,
    pub power_iters: usize,
    pub grid_half_width: f64,
    pub grid_step: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            pg_iters: 200_000,
            pg_step: None,
            pg_tol: 1e-10,
            power_iters: 50,
            grid_half_width: 5.0,
            grid_step: 1e-3,
        }
    }
}

/// Largest eigenvalue of `KᵀK` by power iteration.
fn squared_operator_norm(k: &DenseMatrix, iters: usize) -> f64 {
    let cols = k.ncols();
    if cols == 0 {
        return 0.0;
    }
    // deterministic start with no special alignment to coordinate axes
    let mut x = DenseVector::from_fn(cols, |i, _| 1.0 + 0.37 * ((i + 1) as f64).sin());
    x /= x.norm();
    let mut estimate = 0.0;
    for _ in 0..iters {
        let y = k.tr_mul(&(k * &x));
        let norm = y.norm();
        if norm == 0.0 {
            return 0.0;
        }
        estimate = x.dot(&y);
        x = y / norm;
    }
    estimate.max(k.tr_mul(&(k * &x)).dot(&x))
}

/// Minimizes `½‖Kx + offset‖²` over the set described by `project` and returns
/// the image `Kx + offset` at the minimizer.
fn min_norm_image(
    k: &DenseMatrix,
    offset: &DenseVector,
    project: impl Fn(&mut DenseVector),
    cfg: &OracleConfig,
) -> Result<DenseVector> {
    let step = match cfg.pg_step {
        Some(step) => step,
        None => {
            let lipschitz = squared_operator_norm(k, cfg.power_iters);
            if lipschitz == 0.0 {
                1.0
            } else {
                1.0 / lipschitz
            }
        }
    };
    let mut x = DenseVector::zeros(k.ncols());
    project(&mut x);
    let mut relative_change = f64::INFINITY;
    for _ in 0..cfg.pg_iters {
        let residual = k * &x + offset;
        let grad = k.tr_mul(&residual);
        let mut next = &x - grad * step;
        project(&mut next);
        relative_change = (&next - &x).norm() / (1.0 + x.norm());
        x = next;
        if relative_change <= cfg.pg_tol {
            return Ok(k * &x + offset);
        }
    }
    Err(Error::OracleNonConvergence {
        iterations: cfg.pg_iters,
        relative_change,
    })
}

fn block_projector<'a>(blocks: Vec<(usize, &'a SetSpec)>) -> impl Fn(&mut DenseVector) + 'a {
    move |x: &mut DenseVector| {
        for &(offset, set) in &blocks {
            let d = set.dim();
            let slice = &mut x.as_mut_slice()[offset..offset + d];
            let input = slice.to_vec();
            set.project_into(&input, slice);
        }
    }
}

/// `v_P = P_{cl(dom f − dom g)}(0)` where
/// `dom f − dom g = {(b − w, c − Aw) : b ∈ B, c ∈ C, w ∈ ℝⁿ}`.
pub fn oracle_vp(problem: &QpProblem, cfg: &OracleConfig) -> Result<ProductVector> {
    let (n, m) = (problem.n(), problem.m());
    // parameters (b, c, w)
    let mut k = DenseMatrix::zeros(n + m, 2 * n + m);
    k.view_mut((0, 0), (n, n)).fill_with_identity();
    k.view_mut((n, n), (m, m)).fill_with_identity();
    k.view_mut((0, n + m), (n, n))
        .copy_from(&(-DenseMatrix::identity(n, n)));
    k.view_mut((n, n + m), (m, n))
        .copy_from(&(-&problem.constraint_matrix));
    let project = block_projector(vec![(0, &problem.domain), (n, &problem.constraint_set)]);
    let image = min_norm_image(&k, &DenseVector::zeros(n + m), project, cfg)?;
    Ok(ProductVector::from_flat(image.as_slice(), n))
}

/// `v_D = P_{cl(dom f* + dom g*)}(0)` where
/// `dom f* + dom g* = {(λ₁ + λ, μ₁ + μ) : λ₁ ∈ dom σ_B, μ₁ ∈ dom σ_C,
/// λ + Aᵀμ − q ∈ range Q}`, parameterized by `λ = q + Qr − Aᵀμ`.
pub fn oracle_vd(problem: &QpProblem, cfg: &OracleConfig) -> Result<ProductVector> {
    let (n, m) = (problem.n(), problem.m());
    let dom_sigma_b = problem.domain.polar_of_recession();
    let dom_sigma_c = problem.constraint_set.polar_of_recession();
    // parameters (λ₁, μ₁, r, μ)
    let mut k = DenseMatrix::zeros(n + m, 2 * n + 2 * m);
    k.view_mut((0, 0), (n, n)).fill_with_identity();
    k.view_mut((n, n), (m, m)).fill_with_identity();
    k.view_mut((0, n + m), (n, n)).copy_from(&problem.hessian);
    k.view_mut((0, 2 * n + m), (n, m))
        .copy_from(&(-problem.constraint_matrix.transpose()));
    k.view_mut((n, 2 * n + m), (m, m)).fill_with_identity();
    let mut offset = DenseVector::zeros(n + m);
    offset.rows_mut(0, n).copy_from(&problem.linear);
    let project = block_projector(vec![(0, &dom_sigma_b), (n, &dom_sigma_c)]);
    let image = min_norm_image(&k, &offset, project, cfg)?;
    Ok(ProductVector::from_flat(image.as_slice(), n))
}

/// Calls `visit` with every point of the grid `center + step·k`,
/// `|kᵢ| ≤ half_width/step`, and the multi-index of the point.
fn for_each_grid_point(
    center: &[f64],
    half_width: f64,
    step: f64,
    mut visit: impl FnMut(&[f64], &[usize]),
) {
    let dim = center.len();
    let per_side = (half_width / step).round() as usize;
    let count = 2 * per_side + 1;
    let mut index = vec![0usize; dim];
    let mut point: Vec<f64> = center.iter().map(|c| c - per_side as f64 * step).collect();
    loop {
        visit(&point, &index);
        let mut d = 0;
        loop {
            if d == dim {
                return;
            }
            index[d] += 1;
            if index[d] < count {
                point[d] = center[d] + (index[d] as f64 - per_side as f64) * step;
                break;
            }
            index[d] = 0;
            point[d] = center[d] - per_side as f64 * step;
            d += 1;
        }
    }
}

/// Grid minimizer of `objective(y) + ½‖y − p‖²` around `p`.
///
/// `objective` may return `f64::INFINITY` outside its domain. Each block of
/// `p` may have at most two coordinates.
pub fn brute_force_prox(
    objective: impl Fn(&[f64]) -> f64,
    p: &ProductVector,
    cfg: &OracleConfig,
) -> Result<ProductVector> {
    if p.n() > 2 || p.m() > 2 {
        return Err(Error::GridDimension(p.n().max(p.m())));
    }
    let center = p.to_flat();
    let per_side = (cfg.grid_half_width / cfg.grid_step).round() as usize;
    let mut best: Option<(f64, Vec<f64>, Vec<usize>)> = None;
    for_each_grid_point(&center, cfg.grid_half_width, cfg.grid_step, |y, idx| {
        let value = objective(y);
        if !value.is_finite() {
            return;
        }
        let total = value
            + 0.5
                * y.iter()
                    .zip(&center)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>();
        if best.as_ref().is_none_or(|(b, _, _)| total < *b) {
            best = Some((total, y.to_vec(), idx.to_vec()));
        }
    });
    let (_, point, index) = best.ok_or(Error::GridTooSmall)?;
    if index.iter().any(|&i| i == 0 || i == 2 * per_side) {
        return Err(Error::GridTooSmall);
    }
    Ok(ProductVector::from_flat(&point, p.n()))
}

fn grid_sup(dim: usize, half_width: f64, step: f64, f: impl Fn(&[f64]) -> f64) -> f64 {
    let mut best = f64::NEG_INFINITY;
    for_each_grid_point(&vec![0.0; dim], half_width, step, |z, _| {
        best = best.max(f(z));
    });
    best
}

/// Grid evaluation of `g*(λ, μ) = sup_{z,y} ⟨λ,z⟩ + ⟨μ,y⟩ − g(z,y)`.
///
/// The graph constraint is eliminated (`y = Az`), leaving a sup over `z` on
/// `[−h, h]ⁿ`. A value of `+∞` is reported when the sup keeps growing as the
/// box doubles in width, measured on a grid ten times coarser. Intended for
/// instances whose finite maximizers lie inside the box.
pub fn brute_force_conjugate_g(
    problem: &QpProblem,
    lambda: &DenseVector,
    mu: &DenseVector,
    cfg: &OracleConfig,
) -> Result<ExtendedReal> {
    let n = problem.n();
    if n > 2 {
        return Err(Error::GridDimension(n));
    }
    let w = lambda + problem.constraint_matrix.tr_mul(mu) - &problem.linear;
    let q = &problem.hessian;
    let phi = |z: &[f64]| {
        let mut value = 0.0;
        for i in 0..n {
            value += w[i] * z[i];
            for j in 0..n {
                value -= 0.5 * z[i] * q[(i, j)] * z[j];
            }
        }
        value
    };
    let h = cfg.grid_half_width;
    let coarse = 10.0 * cfg.grid_step;
    let growth = grid_sup(n, 2.0 * h, coarse, phi) - grid_sup(n, h, coarse, phi);
    if growth > 1e-2 {
        return Ok(ExtendedReal::PosInf);
    }
    Ok(ExtendedReal::Finite(grid_sup(n, h, cfg.grid_step, phi)))
}

fn matrix(rows: usize, cols: usize, data: &[f64]) -> DenseMatrix {
    DenseMatrix::from_row_slice(rows, cols, data)
}

fn vector(data: &[f64]) -> DenseVector {
    DenseVector::from_column_slice(data)
}

/// The four desk instances:
///
/// * `E1`: feasible, `min z² − 2z` over `z ∈ [0, 1]`, solution `z = 1`.
/// * `E2`: primal strongly infeasible, `z ≤ −1` and `z ≥ 1`.
/// * `E3`: dual strongly infeasible, `min −z` over `z ≥ 0`.
/// * `E4`: `E2` and `E3` side by side, infeasible both ways.
pub fn canonical_instances() -> BTreeMap<&'static str, QpProblem> {
    const INF: f64 = f64::INFINITY;
    let build = |q: DenseMatrix, lin: &[f64], a: DenseMatrix, b: SetSpec, c: SetSpec| {
        QpProblem::new(q, vector(lin), a, b, c).expect("canonical instance is valid")
    };
    let mut out = BTreeMap::new();
    out.insert(
        "E1",
        build(
            matrix(1, 1, &[2.0]),
            &[-2.0],
            matrix(1, 1, &[1.0]),
            SetSpec::WholeSpace(1),
            SetSpec::Box {
                lower: vec![0.0],
                upper: vec![1.0],
            },
        ),
    );
    out.insert(
        "E2",
        build(
            matrix(1, 1, &[0.0]),
            &[0.0],
            matrix(2, 1, &[1.0, 1.0]),
            SetSpec::WholeSpace(1),
            SetSpec::Box {
                lower: vec![-INF, 1.0],
                upper: vec![-1.0, INF],
            },
        ),
    );
    out.insert(
        "E3",
        build(
            matrix(1, 1, &[0.0]),
            &[-1.0],
            matrix(1, 1, &[1.0]),
            SetSpec::WholeSpace(1),
            SetSpec::Box {
                lower: vec![0.0],
                upper: vec![INF],
            },
        ),
    );
    out.insert(
        "E4",
        build(
            DenseMatrix::zeros(2, 2),
            &[0.0, -1.0],
            matrix(3, 2, &[1.0, 0.0, 1.0, 0.0, 0.0, 1.0]),
            SetSpec::WholeSpace(2),
            SetSpec::Box {
                lower: vec![-INF, 1.0, 0.0],
                upper: vec![-1.0, INF, INF],
            },
        ),
    );
    out
}

/// Looks up a canonical instance by name, ignoring case.
pub fn canonical_instance(name: &str) -> Result<QpProblem> {
    let key = name.to_ascii_uppercase();
    canonical_instances()
        .remove(key.as_str())
        .ok_or_else(|| Error::UnknownInstance(name.to_string()))
}
