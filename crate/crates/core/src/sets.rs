//! Closed convex sets with projection, support function and recession-cone
//! calculus.

use std::fmt;
use std::ops::Add;

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linalg::DenseVector;

/// Tolerance for second-order-cone polar membership inside `support`.
const SOC_SUPPORT_TOL: f64 = 1e-12;

/// Value in `[-∞, +∞]`.
///
/// Addition uses the inf-addition convention `+∞ + (−∞) = +∞`, which is the
/// one that keeps sums of convex functions convex.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub enum ExtendedReal {
    NegInf,
    Finite(f64),
    PosInf,
}

impl ExtendedReal {
    pub const ZERO: ExtendedReal = ExtendedReal::Finite(0.0);

    pub fn from_f64(x: f64) -> Self {
        if x == f64::INFINITY {
            ExtendedReal::PosInf
        } else if x == f64::NEG_INFINITY {
            ExtendedReal::NegInf
        } else {
            ExtendedReal::Finite(x)
        }
    }

    /// `0` when `cond` holds and `+∞` otherwise.
    pub fn indicator(cond: bool) -> Self {
        if cond {
            ExtendedReal::ZERO
        } else {
            ExtendedReal::PosInf
        }
    }

    pub fn to_f64(self) -> f64 {
        match self {
            ExtendedReal::NegInf => f64::NEG_INFINITY,
            ExtendedReal::Finite(x) => x,
            ExtendedReal::PosInf => f64::INFINITY,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, ExtendedReal::Finite(_))
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            ExtendedReal::Finite(x) => Some(x),
            _ => None,
        }
    }
}

impl Add for ExtendedReal {
    type Output = ExtendedReal;

    fn add(self, rhs: ExtendedReal) -> ExtendedReal {
        use ExtendedReal::*;
        match (self, rhs) {
            (PosInf, _) | (_, PosInf) => PosInf,
            (NegInf, _) | (_, NegInf) => NegInf,
            (Finite(a), Finite(b)) => ExtendedReal::from_f64(a + b),
        }
    }
}

impl std::iter::Sum for ExtendedReal {
    fn sum<I: Iterator<Item = ExtendedReal>>(iter: I) -> Self {
        iter.fold(ExtendedReal::ZERO, |acc, x| acc + x)
    }
}

/// Infinities serialize as the strings `"inf"` and `"-inf"`; negative zero
/// serializes as `0`.
impl Serialize for ExtendedReal {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            ExtendedReal::NegInf => serializer.serialize_str("-inf"),
            ExtendedReal::Finite(x) => serializer.serialize_f64(x + 0.0),
            ExtendedReal::PosInf => serializer.serialize_str("inf"),
        }
    }
}

impl fmt::Display for ExtendedReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtendedReal::NegInf => write!(f, "-inf"),
            ExtendedReal::Finite(x) => write!(f, "{x}"),
            ExtendedReal::PosInf => write!(f, "inf"),
        }
    }
}

/// Nonempty closed convex set.
///
/// `Negation` only arises as the polar of a second-order cone; it is kept
/// general so that polars of polars stay closed-form.
#[derive(Debug, Clone, PartialEq)]
pub enum SetSpec {
    /// `{x : lower ≤ x ≤ upper}` with infinite bounds allowed.
    Box {
        lower: Vec<f64>,
        upper: Vec<f64>,
    },
    NonnegOrthant(usize),
    Zero(usize),
    WholeSpace(usize),
    /// `{(t, u) : ‖u‖ ≤ t}`; the first coordinate is `t`.
    SecondOrderCone(usize),
    Product(Vec<SetSpec>),
    /// `{−x : x ∈ S}`.
    Negation(Box<SetSpec>),
}

/// One-dimensional closed convex cones.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum CoordCone {
    Zero,
    Free,
    Nonneg,
    Nonpos,
}

impl CoordCone {
    fn polar(self) -> Self {
        match self {
            CoordCone::Zero => CoordCone::Free,
            CoordCone::Free => CoordCone::Zero,
            CoordCone::Nonneg => CoordCone::Nonpos,
            CoordCone::Nonpos => CoordCone::Nonneg,
        }
    }

    fn of_interval(lower: f64, upper: f64) -> Self {
        match (lower.is_finite(), upper.is_finite()) {
            (true, true) => CoordCone::Zero,
            (true, false) => CoordCone::Nonneg,
            (false, true) => CoordCone::Nonpos,
            (false, false) => CoordCone::Free,
        }
    }

    /// Returns `None` when `[lower, upper]` is not a cone.
    fn of_cone_interval(lower: f64, upper: f64) -> Option<Self> {
        match (lower, upper) {
            (l, u) if l == 0.0 && u == 0.0 => Some(CoordCone::Zero),
            (l, u) if l == 0.0 && u == f64::INFINITY => Some(CoordCone::Nonneg),
            (l, u) if l == f64::NEG_INFINITY && u == 0.0 => Some(CoordCone::Nonpos),
            (l, u) if l == f64::NEG_INFINITY && u == f64::INFINITY => Some(CoordCone::Free),
            _ => None,
        }
    }
}

/// Builds the simplest catalog description of a product of coordinate cones.
fn from_coord_cones(coords: &[CoordCone]) -> SetSpec {
    let mut runs: Vec<(CoordCone, usize)> = Vec::new();
    for &c in coords {
        match runs.last_mut() {
            Some((kind, len)) if *kind == c => *len += 1,
            _ => runs.push((c, 1)),
        }
    }
    let mut blocks: Vec<SetSpec> = runs
        .into_iter()
        .map(|(kind, len)| match kind {
            CoordCone::Zero => SetSpec::Zero(len),
            CoordCone::Free => SetSpec::WholeSpace(len),
            CoordCone::Nonneg => SetSpec::NonnegOrthant(len),
            CoordCone::Nonpos => SetSpec::Box {
                lower: vec![f64::NEG_INFINITY; len],
                upper: vec![0.0; len],
            },
        })
        .collect();
    match blocks.len() {
        0 => SetSpec::Zero(0),
        1 => blocks.pop().unwrap(),
        _ => SetSpec::Product(blocks),
    }
}

fn clamp(x: f64, lower: f64, upper: f64) -> f64 {
    x.max(lower).min(upper)
}

fn soc_project(x: &[f64], out: &mut [f64]) {
    let t = x[0];
    let tail_norm = x[1..].iter().map(|v| v * v).sum::<f64>().sqrt();
    if tail_norm <= t {
        out.copy_from_slice(x);
    } else if tail_norm <= -t {
        out.iter_mut().for_each(|o| *o = 0.0);
    } else {
        let alpha = 0.5 * (t + tail_norm);
        out[0] = alpha;
        let scale = alpha / tail_norm;
        for (o, v) in out[1..].iter_mut().zip(&x[1..]) {
            *o = scale * v;
        }
    }
}

impl SetSpec {
    /// Validated box constructor.
    pub fn new_box(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let set = SetSpec::Box { lower, upper };
        set.validate()?;
        Ok(set)
    }

    /// `{x : x ≤ 0}` expressed as a box.
    pub fn nonpos_orthant(dim: usize) -> Self {
        SetSpec::Box {
            lower: vec![f64::NEG_INFINITY; dim],
            upper: vec![0.0; dim],
        }
    }

    /// The single point `{point}`.
    pub fn point(point: &[f64]) -> Self {
        SetSpec::Box {
            lower: point.to_vec(),
            upper: point.to_vec(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            SetSpec::Box { lower, .. } => lower.len(),
            SetSpec::NonnegOrthant(d)
            | SetSpec::Zero(d)
            | SetSpec::WholeSpace(d)
            | SetSpec::SecondOrderCone(d) => *d,
            SetSpec::Product(blocks) => blocks.iter().map(SetSpec::dim).sum(),
            SetSpec::Negation(inner) => inner.dim(),
        }
    }

    /// Checks that the description denotes a nonempty closed convex set.
    pub fn validate(&self) -> Result<()> {
        match self {
            SetSpec::Box { lower, upper } => {
                if lower.len() != upper.len() {
                    return Err(Error::InvalidSet(format!(
                        "box bounds have lengths {} and {}",
                        lower.len(),
                        upper.len()
                    )));
                }
                for (i, (&l, &u)) in lower.iter().zip(upper).enumerate() {
                    if l.is_nan() || u.is_nan() {
                        return Err(Error::InvalidSet(format!("box bound {i} is NaN")));
                    }
                    if l == f64::INFINITY || u == f64::NEG_INFINITY {
                        return Err(Error::InvalidSet(format!("box coordinate {i} is empty")));
                    }
                    if l > u {
                        return Err(Error::InvalidSet(format!(
                            "box lower bound {l} exceeds upper bound {u} at coordinate {i}"
                        )));
                    }
                }
                Ok(())
            }
            SetSpec::SecondOrderCone(0) => Err(Error::InvalidSet(
                "second-order cone needs dimension at least 1".into(),
            )),
            SetSpec::Product(blocks) => blocks.iter().try_for_each(SetSpec::validate),
            SetSpec::Negation(inner) => inner.validate(),
            _ => Ok(()),
        }
    }

    fn check_dim(&self, len: usize, context: &'static str) -> Result<()> {
        if len != self.dim() {
            return Err(Error::DimensionMismatch {
                context,
                expected: self.dim(),
                found: len,
            });
        }
        Ok(())
    }

    /// Euclidean projection onto the set.
    pub fn project(&self, x: &DenseVector) -> Result<DenseVector> {
        self.check_dim(x.len(), "project")?;
        let mut out = DenseVector::zeros(x.len());
        self.project_into(x.as_slice(), out.as_mut_slice());
        Ok(out)
    }

    pub(crate) fn project_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), out.len());
        match self {
            SetSpec::Box { lower, upper } => {
                for i in 0..x.len() {
                    out[i] = clamp(x[i], lower[i], upper[i]);
                }
            }
            SetSpec::NonnegOrthant(_) => {
                for (o, v) in out.iter_mut().zip(x) {
                    *o = v.max(0.0);
                }
            }
            SetSpec::Zero(_) => out.iter_mut().for_each(|o| *o = 0.0),
            SetSpec::WholeSpace(_) => out.copy_from_slice(x),
            SetSpec::SecondOrderCone(_) => soc_project(x, out),
            SetSpec::Product(blocks) => {
                let mut offset = 0;
                for block in blocks {
                    let d = block.dim();
                    block.project_into(&x[offset..offset + d], &mut out[offset..offset + d]);
                    offset += d;
                }
            }
            SetSpec::Negation(inner) => {
                let flipped: Vec<f64> = x.iter().map(|v| -v).collect();
                inner.project_into(&flipped, out);
                out.iter_mut().for_each(|o| *o = -*o);
            }
        }
    }

    /// Euclidean distance from `x` to the set.
    pub fn distance(&self, x: &DenseVector) -> Result<f64> {
        Ok((x - self.project(x)?).norm())
    }

    /// `true` iff the distance from `x` to the set is at most `tol`.
    pub fn membership(&self, x: &DenseVector, tol: f64) -> Result<bool> {
        Ok(self.distance(x)? <= tol)
    }

    /// Support function `sup_{x∈S} ⟨x, u⟩`.
    pub fn support(&self, u: &DenseVector) -> Result<ExtendedReal> {
        self.check_dim(u.len(), "support")?;
        Ok(self.support_slice(u.as_slice()))
    }

    fn support_slice(&self, u: &[f64]) -> ExtendedReal {
        match self {
            SetSpec::Box { lower, upper } => u
                .iter()
                .zip(lower.iter().zip(upper))
                .map(|(&ui, (&l, &h))| {
                    if ui > 0.0 {
                        ExtendedReal::from_f64(ui * h)
                    } else if ui < 0.0 {
                        ExtendedReal::from_f64(ui * l)
                    } else {
                        ExtendedReal::ZERO
                    }
                })
                .sum(),
            SetSpec::NonnegOrthant(_) => ExtendedReal::indicator(u.iter().all(|&v| v <= 0.0)),
            SetSpec::Zero(_) => ExtendedReal::ZERO,
            SetSpec::WholeSpace(_) => ExtendedReal::indicator(u.iter().all(|&v| v == 0.0)),
            SetSpec::SecondOrderCone(_) => {
                // support of a cone is the indicator of its polar, here −SOC
                let t = u[0];
                let tail_norm = u[1..].iter().map(|v| v * v).sum::<f64>().sqrt();
                let scale = u.iter().map(|v| v * v).sum::<f64>().sqrt().max(1.0);
                ExtendedReal::indicator(tail_norm <= -t + SOC_SUPPORT_TOL * scale)
            }
            SetSpec::Product(blocks) => {
                let mut offset = 0;
                blocks
                    .iter()
                    .map(|block| {
                        let d = block.dim();
                        let value = block.support_slice(&u[offset..offset + d]);
                        offset += d;
                        value
                    })
                    .sum()
            }
            SetSpec::Negation(inner) => {
                let flipped: Vec<f64> = u.iter().map(|v| -v).collect();
                inner.support_slice(&flipped)
            }
        }
    }

    /// `{−x : x ∈ S}`, simplified where the catalog allows it.
    pub fn negated(&self) -> SetSpec {
        match self {
            SetSpec::Box { lower, upper } => SetSpec::Box {
                lower: upper.iter().map(|v| -v).collect(),
                upper: lower.iter().map(|v| -v).collect(),
            },
            SetSpec::NonnegOrthant(d) => SetSpec::nonpos_orthant(*d),
            SetSpec::Zero(_) | SetSpec::WholeSpace(_) => self.clone(),
            SetSpec::SecondOrderCone(_) => SetSpec::Negation(Box::new(self.clone())),
            SetSpec::Product(blocks) => {
                SetSpec::Product(blocks.iter().map(SetSpec::negated).collect())
            }
            SetSpec::Negation(inner) => (**inner).clone(),
        }
    }

    /// Recession cone `{d : S + d ⊆ S}` in closed form.
    pub fn recession_cone(&self) -> SetSpec {
        match self {
            SetSpec::Box { lower, upper } => {
                let coords: Vec<CoordCone> = lower
                    .iter()
                    .zip(upper)
                    .map(|(&l, &u)| CoordCone::of_interval(l, u))
                    .collect();
                from_coord_cones(&coords)
            }
            SetSpec::NonnegOrthant(_)
            | SetSpec::Zero(_)
            | SetSpec::WholeSpace(_)
            | SetSpec::SecondOrderCone(_) => self.clone(),
            SetSpec::Product(blocks) => {
                SetSpec::Product(blocks.iter().map(SetSpec::recession_cone).collect())
            }
            SetSpec::Negation(inner) => inner.recession_cone().negated(),
        }
    }

    /// Polar `K° = {u : ⟨u, x⟩ ≤ 0 ∀x ∈ K}` of a set that is already a closed
    /// convex cone. Returns `None` if `self` is not recognizably a cone.
    pub fn polar_cone(&self) -> Option<SetSpec> {
        Some(match self {
            SetSpec::Box { lower, upper } => {
                let coords = lower
                    .iter()
                    .zip(upper)
                    .map(|(&l, &u)| CoordCone::of_cone_interval(l, u).map(CoordCone::polar))
                    .collect::<Option<Vec<_>>>()?;
                from_coord_cones(&coords)
            }
            SetSpec::NonnegOrthant(d) => SetSpec::nonpos_orthant(*d),
            SetSpec::Zero(d) => SetSpec::WholeSpace(*d),
            SetSpec::WholeSpace(d) => SetSpec::Zero(*d),
            SetSpec::SecondOrderCone(_) => self.negated(),
            SetSpec::Product(blocks) => SetSpec::Product(
                blocks
                    .iter()
                    .map(SetSpec::polar_cone)
                    .collect::<Option<Vec<_>>>()?,
            ),
            SetSpec::Negation(inner) => inner.polar_cone()?.negated(),
        })
    }

    /// Polar of the recession cone, which is also the closure of the domain
    /// of the support function.
    pub fn polar_of_recession(&self) -> SetSpec {
        self.recession_cone()
            .polar_cone()
            .expect("recession cones are always catalog cones")
    }

    /// Expands boxes into per-coordinate bounds for serialization and
    /// inspection; `None` for sets that are not boxes.
    pub fn box_bounds(&self) -> Option<(&[f64], &[f64])> {
        match self {
            SetSpec::Box { lower, upper } => Some((lower, upper)),
            _ => None,
        }
    }
}
