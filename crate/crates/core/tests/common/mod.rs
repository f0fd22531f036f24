//! Random instance generators shared by the integration tests.
#![allow(dead_code)]

use drsplit::{DenseMatrix, DenseVector, ProductVector, QpProblem, SetSpec};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut impl Rng, len: usize, scale: f64) -> DenseVector {
    DenseVector::from_fn(len, |_, _| rng.gen_range(-scale..scale))
}

pub fn uniform_matrix(rng: &mut impl Rng, rows: usize, cols: usize, scale: f64) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-scale..scale))
}

pub fn random_product(rng: &mut impl Rng, n: usize, m: usize, scale: f64) -> ProductVector {
    ProductVector::new(uniform(rng, n, scale), uniform(rng, m, scale))
}

/// `LLᵀ` with `L` of size `n × rank`.
pub fn random_psd(rng: &mut impl Rng, n: usize, rank: usize) -> DenseMatrix {
    let l = uniform_matrix(rng, n, rank, 1.0);
    &l * l.transpose()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SetKind {
    Box,
    Nonneg,
    Zero,
    Whole,
    Soc,
    Product,
    Negation,
}

impl SetKind {
    pub const ALL: [SetKind; 7] = [
        SetKind::Box,
        SetKind::Nonneg,
        SetKind::Zero,
        SetKind::Whole,
        SetKind::Soc,
        SetKind::Product,
        SetKind::Negation,
    ];
    const BASE: [SetKind; 5] = [
        SetKind::Box,
        SetKind::Nonneg,
        SetKind::Zero,
        SetKind::Whole,
        SetKind::Soc,
    ];
}

/// A box whose coordinates are independently bounded, half-bounded, free or
/// degenerate.
pub fn random_box(rng: &mut impl Rng, dim: usize) -> SetSpec {
    let mut lower = Vec::with_capacity(dim);
    let mut upper = Vec::with_capacity(dim);
    for _ in 0..dim {
        let a: f64 = rng.gen_range(-2.0..2.0);
        let width: f64 = rng.gen_range(0.0..3.0);
        let (l, u) = match rng.gen_range(0..5) {
            0 => (a, a + width),
            1 => (a, f64::INFINITY),
            2 => (f64::NEG_INFINITY, a),
            3 => (f64::NEG_INFINITY, f64::INFINITY),
            _ => (a, a),
        };
        lower.push(l);
        upper.push(u);
    }
    SetSpec::new_box(lower, upper).expect("valid box")
}

/// A box containing `point`, with each side randomly finite or infinite.
pub fn box_around(rng: &mut impl Rng, point: &DenseVector) -> SetSpec {
    let mut lower = Vec::with_capacity(point.len());
    let mut upper = Vec::with_capacity(point.len());
    for &p in point.iter() {
        let below: f64 = rng.gen_range(0.0..1.0);
        let above: f64 = rng.gen_range(0.0..1.0);
        lower.push(if rng.gen_bool(0.3) {
            f64::NEG_INFINITY
        } else {
            p - below
        });
        upper.push(if rng.gen_bool(0.3) {
            f64::INFINITY
        } else {
            p + above
        });
    }
    SetSpec::new_box(lower, upper).expect("valid box")
}

pub fn random_set(rng: &mut impl Rng, kind: SetKind, dim: usize) -> SetSpec {
    match kind {
        SetKind::Box => random_box(rng, dim),
        SetKind::Nonneg => SetSpec::NonnegOrthant(dim),
        SetKind::Zero => SetSpec::Zero(dim),
        SetKind::Whole => SetSpec::WholeSpace(dim),
        SetKind::Soc => SetSpec::SecondOrderCone(dim),
        SetKind::Product => {
            if dim < 2 {
                let kind = *SetKind::BASE.choose(rng).unwrap();
                return SetSpec::Product(vec![random_set(rng, kind, dim)]);
            }
            let split = rng.gen_range(1..dim);
            let first = *SetKind::BASE.choose(rng).unwrap();
            let second = *SetKind::BASE.choose(rng).unwrap();
            SetSpec::Product(vec![
                random_set(rng, first, split),
                random_set(rng, second, dim - split),
            ])
        }
        SetKind::Negation => {
            let kind = *SetKind::BASE.choose(rng).unwrap();
            SetSpec::Negation(Box::new(random_set(rng, kind, dim)))
        }
    }
}

pub fn random_any_set(rng: &mut impl Rng, dim: usize) -> SetSpec {
    let kind = *SetKind::ALL.choose(rng).unwrap();
    random_set(rng, kind, dim)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flavor {
    /// Some `z ∈ B` has `Az ∈ C`.
    Feasible,
    /// Two equal rows of `A` are pushed into disjoint intervals.
    PrimalInfeasible,
    /// `Q = 0` and a nonzero `q` with free variables.
    DualInfeasible,
    /// Sets drawn from the whole catalog.
    Mixed,
}

impl Flavor {
    pub const ALL: [Flavor; 4] = [
        Flavor::Feasible,
        Flavor::PrimalInfeasible,
        Flavor::DualInfeasible,
        Flavor::Mixed,
    ];
}

/// A random QP with `n, m ≤ 5`.
pub fn random_problem(rng: &mut impl Rng, flavor: Flavor) -> QpProblem {
    let n = rng.gen_range(1..=5);
    let m = rng.gen_range(
        if flavor == Flavor::PrimalInfeasible {
            2
        } else {
            1
        }..=5,
    );
    let rank = rng.gen_range(0..=n);
    let mut q_matrix = random_psd(rng, n, rank);
    let mut linear = uniform(rng, n, 1.0);
    let mut a = uniform_matrix(rng, m, n, 1.0);
    let (domain, constraint_set) = match flavor {
        Flavor::Feasible => {
            let z0 = uniform(rng, n, 1.0);
            let domain = if rng.gen_bool(0.5) {
                box_around(rng, &z0)
            } else {
                SetSpec::WholeSpace(n)
            };
            let constraint_set = box_around(rng, &(&a * &z0));
            (domain, constraint_set)
        }
        Flavor::PrimalInfeasible => {
            let row = a.row(0).into_owned();
            a.set_row(1, &row);
            let z0 = uniform(rng, n, 1.0);
            let center = &a * &z0;
            let mut lower = vec![f64::NEG_INFINITY; m];
            let mut upper = vec![f64::INFINITY; m];
            let gap: f64 = rng.gen_range(0.5..2.0);
            upper[0] = center[0] - gap;
            lower[1] = center[0] + gap;
            (
                SetSpec::WholeSpace(n),
                SetSpec::new_box(lower, upper).unwrap(),
            )
        }
        Flavor::DualInfeasible => {
            q_matrix = DenseMatrix::zeros(n, n);
            if linear.norm() < 0.1 {
                linear[0] = 1.0;
            }
            (SetSpec::WholeSpace(n), SetSpec::WholeSpace(m))
        }
        Flavor::Mixed => {
            let domain = match rng.gen_range(0..3) {
                0 => SetSpec::WholeSpace(n),
                1 => random_box(rng, n),
                _ => SetSpec::NonnegOrthant(n),
            };
            (domain, random_any_set(rng, m))
        }
    };
    QpProblem::new(q_matrix, linear, a, domain, constraint_set).expect("valid random problem")
}
