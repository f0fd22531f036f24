//! JSON problem and result files, and the CSV iteration trace.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::analysis::{orthogonality_check, verify_identities, CertificatePair, IdentityReport};
use crate::engine::{SolveResult, Status, TraceRow};
use crate::error::{Error, Result};
use crate::linalg::{asymmetry, DenseMatrix, DenseVector, PseudoInverse, DEFAULT_RANK_TOL};
use crate::qp::{QpProblem, QpSplitting, PSD_TOL};
use crate::sets::SetSpec;

/// Asymmetry in `Q` tolerated on load; it is removed by symmetrizing.
pub const LOAD_SYMMETRY_TOL: f64 = 1e-9;
/// Negative eigenvalues of `Q` tolerated on load. Those below the model's own
/// tolerance are clipped to zero.
pub const LOAD_PSD_TOL: f64 = 1e-8;

/// Tolerance used for the identity report attached to results.
pub const REPORT_TOL: f64 = 1e-5;

/// A box bound: a JSON number, or one of the strings `"inf"` and `"-inf"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bound(pub f64);

impl Serialize for Bound {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0 == f64::INFINITY {
            serializer.serialize_str("inf")
        } else if self.0 == f64::NEG_INFINITY {
            serializer.serialize_str("-inf")
        } else {
            serializer.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Bound {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Text(String),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Number(x) => Ok(Bound(x)),
            Raw::Text(s) => match s.as_str() {
                "inf" | "+inf" => Ok(Bound(f64::INFINITY)),
                "-inf" => Ok(Bound(f64::NEG_INFINITY)),
                other => Err(serde::de::Error::custom(format!(
                    "expected a number, \"inf\" or \"-inf\", found \"{other}\""
                ))),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SetSpecJson {
    Box {
        lower: Vec<Bound>,
        upper: Vec<Bound>,
    },
    Nonneg {
        dim: usize,
    },
    Zero {
        dim: usize,
    },
    Whole {
        dim: usize,
    },
    Soc {
        dim: usize,
    },
    Product {
        blocks: Vec<SetSpecJson>,
    },
    Neg {
        set: Box<SetSpecJson>,
    },
}

impl SetSpecJson {
    fn into_set(self, field: &str) -> Result<SetSpec> {
        let set = match self {
            SetSpecJson::Box { lower, upper } => {
                if lower.len() != upper.len() {
                    return Err(Error::schema(
                        field,
                        format!(
                            "lower has {} entries, upper has {}",
                            lower.len(),
                            upper.len()
                        ),
                    ));
                }
                if let Some(i) = lower.iter().zip(&upper).position(|(l, u)| l.0 > u.0) {
                    return Err(Error::schema(
                        format!("{field}.lower[{i}]"),
                        format!(
                            "lower bound {} exceeds upper bound {}",
                            lower[i].0, upper[i].0
                        ),
                    ));
                }
                SetSpec::Box {
                    lower: lower.into_iter().map(|b| b.0).collect(),
                    upper: upper.into_iter().map(|b| b.0).collect(),
                }
            }
            SetSpecJson::Nonneg { dim } => SetSpec::NonnegOrthant(dim),
            SetSpecJson::Zero { dim } => SetSpec::Zero(dim),
            SetSpecJson::Whole { dim } => SetSpec::WholeSpace(dim),
            SetSpecJson::Soc { dim } => SetSpec::SecondOrderCone(dim),
            SetSpecJson::Product { blocks } => SetSpec::Product(
                blocks
                    .into_iter()
                    .enumerate()
                    .map(|(i, b)| b.into_set(&format!("{field}.blocks[{i}]")))
                    .collect::<Result<_>>()?,
            ),
            SetSpecJson::Neg { set } => {
                SetSpec::Negation(Box::new(set.into_set(&format!("{field}.set"))?))
            }
        };
        set.validate()
            .map_err(|e| Error::schema(field, e.to_string()))?;
        Ok(set)
    }
}

impl From<&SetSpec> for SetSpecJson {
    fn from(set: &SetSpec) -> Self {
        let bounds = |v: &[f64]| v.iter().copied().map(Bound).collect();
        match set {
            SetSpec::Box { lower, upper } => SetSpecJson::Box {
                lower: bounds(lower),
                upper: bounds(upper),
            },
            SetSpec::NonnegOrthant(dim) => SetSpecJson::Nonneg { dim: *dim },
            SetSpec::Zero(dim) => SetSpecJson::Zero { dim: *dim },
            SetSpec::WholeSpace(dim) => SetSpecJson::Whole { dim: *dim },
            SetSpec::SecondOrderCone(dim) => SetSpecJson::Soc { dim: *dim },
            SetSpec::Product(blocks) => SetSpecJson::Product {
                blocks: blocks.iter().map(SetSpecJson::from).collect(),
            },
            SetSpec::Negation(inner) => SetSpecJson::Neg {
                set: Box::new(SetSpecJson::from(inner.as_ref())),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemFile {
    pub n: usize,
    pub m: usize,
    #[serde(rename = "Q")]
    pub q_matrix: Vec<Vec<f64>>,
    pub q: Vec<f64>,
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    pub b: SetSpecJson,
    #[serde(rename = "C")]
    pub c: SetSpecJson,
}

fn dense(field: &str, rows: &[Vec<f64>], nrows: usize, ncols: usize) -> Result<DenseMatrix> {
    if rows.len() != nrows {
        return Err(Error::schema(
            field,
            format!("expected {nrows} rows, found {}", rows.len()),
        ));
    }
    if let Some(i) = rows.iter().position(|r| r.len() != ncols) {
        return Err(Error::schema(
            format!("{field}[{i}]"),
            format!("expected {ncols} columns, found {}", rows[i].len()),
        ));
    }
    Ok(DenseMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

/// Symmetrizes a nearly symmetric `Q` and clips slightly negative
/// eigenvalues, rejecting anything further off.
fn clean_hessian(q: DenseMatrix) -> Result<DenseMatrix> {
    let gap = asymmetry(&q);
    let mut q = if gap > 0.0 {
        if gap > LOAD_SYMMETRY_TOL {
            return Err(Error::schema(
                "Q",
                format!("not symmetric (max |Q - Qᵀ| entry {gap:e})"),
            ));
        }
        log::warn!("Q asymmetric by {gap:e}; using (Q + Qᵀ)/2");
        (&q + q.transpose()) * 0.5
    } else {
        q
    };
    if q.nrows() == 0 {
        return Ok(q);
    }
    let eig = PseudoInverse::new(&q, DEFAULT_RANK_TOL)?;
    let min = eig.min_eigenvalue();
    if min < -LOAD_PSD_TOL {
        return Err(Error::NotPositiveSemidefinite {
            min_eigenvalue: min,
        });
    }
    if min < -PSD_TOL {
        log::warn!("Q has eigenvalue {min:e}; clipping negative eigenvalues to zero");
        let decomposition = q.clone().symmetric_eigen();
        let clipped = decomposition.eigenvalues.map(|l| l.max(0.0));
        let v = &decomposition.eigenvectors;
        q = v * DenseMatrix::from_diagonal(&clipped) * v.transpose();
        q = (&q + q.transpose()) * 0.5;
    }
    Ok(q)
}

impl ProblemFile {
    pub fn into_problem(self) -> Result<QpProblem> {
        let (n, m) = (self.n, self.m);
        let q_matrix = clean_hessian(dense("Q", &self.q_matrix, n, n)?)?;
        if self.q.len() != n {
            return Err(Error::schema(
                "q",
                format!("expected {n} entries, found {}", self.q.len()),
            ));
        }
        let a = dense("A", &self.a, m, n)?;
        let b = self.b.into_set("B")?;
        let c = self.c.into_set("C")?;
        if b.dim() != n {
            return Err(Error::schema(
                "B",
                format!("dimension {} but n = {n}", b.dim()),
            ));
        }
        if c.dim() != m {
            return Err(Error::schema(
                "C",
                format!("dimension {} but m = {m}", c.dim()),
            ));
        }
        QpProblem::new(q_matrix, DenseVector::from_vec(self.q), a, b, c)
    }
}

impl From<&QpProblem> for ProblemFile {
    fn from(problem: &QpProblem) -> Self {
        let rows = |mat: &DenseMatrix| {
            mat.row_iter()
                .map(|r| r.iter().copied().collect())
                .collect()
        };
        ProblemFile {
            n: problem.n(),
            m: problem.m(),
            q_matrix: rows(&problem.hessian),
            q: problem.linear.iter().copied().collect(),
            a: rows(&problem.constraint_matrix),
            b: SetSpecJson::from(&problem.domain),
            c: SetSpecJson::from(&problem.constraint_set),
        }
    }
}

pub fn problem_from_str(json: &str) -> Result<QpProblem> {
    let de = &mut serde_json::Deserializer::from_str(json);
    let file: ProblemFile = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::schema(path, e.into_inner().to_string())
    })?;
    file.into_problem()
}

pub fn parse_problem(path: impl AsRef<Path>) -> Result<QpProblem> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    problem_from_str(&text)
}

pub fn problem_to_json(problem: &QpProblem) -> String {
    serde_json::to_string_pretty(&ProblemFile::from(problem)).expect("problem serializes")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificatesJson {
    pub vp_z: Vec<f64>,
    pub vp_y: Vec<f64>,
    pub vd_z: Vec<f64>,
    pub vd_y: Vec<f64>,
}

impl From<&CertificatePair> for CertificatesJson {
    fn from(cert: &CertificatePair) -> Self {
        let list = |v: &DenseVector| v.iter().map(|x| x + 0.0).collect();
        CertificatesJson {
            vp_z: list(&cert.vp_z),
            vp_y: list(&cert.vp_y),
            vd_z: list(&cert.vd_z),
            vd_y: list(&cert.vd_y),
        }
    }
}

/// Direct checks of the certificates, added by `certify`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verification {
    pub primal_certificate: bool,
    pub dual_certificate: bool,
    pub orthogonality: bool,
    pub norm_vp: f64,
    pub norm_vd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultFile {
    pub status: Status,
    pub iterations: usize,
    pub objective: Option<f64>,
    pub z: Option<Vec<f64>>,
    pub y: Option<Vec<f64>>,
    pub certificates: CertificatesJson,
    pub identity_report: IdentityReport,
    pub final_residual: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verification: Option<Verification>,
}

impl ResultFile {
    pub fn new(split: &QpSplitting, result: &SolveResult, eps_inf: f64, verify: bool) -> Self {
        let cert = &result.certificates;
        let verification = verify.then(|| Verification {
            primal_certificate: !cert.primal_is_zero()
                && split.check_primal_certificate(&-&cert.vp_z, &-&cert.vp_y, eps_inf),
            dual_certificate: !cert.dual_is_zero()
                && split.check_dual_certificate(&-&cert.vd_z, eps_inf),
            orthogonality: orthogonality_check(cert, 1e-6),
            norm_vp: cert.vp().norm(),
            norm_vd: cert.vd().norm(),
        });
        let solution = result.solution.as_ref();
        ResultFile {
            status: result.status,
            iterations: result.iterations,
            objective: solution.map(|s| s.objective),
            z: solution.map(|s| s.z.iter().copied().collect()),
            y: solution.map(|s| s.y.iter().copied().collect()),
            certificates: CertificatesJson::from(cert),
            identity_report: verify_identities(split, cert, REPORT_TOL),
            final_residual: result.final_residual,
            verification,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("result serializes")
    }
}

/// Process exit code for a solver status.
pub fn exit_code(status: Status) -> i32 {
    match status {
        Status::Solved => 0,
        Status::PrimalInfeasible => 2,
        Status::DualInfeasible => 3,
        Status::PrimalAndDualInfeasible => 4,
        Status::MaxIterations => 5,
    }
}

pub const TRACE_HEADER: [&str; 5] = ["iter", "norm_ds", "norm_dx", "norm_dnu", "obj_candidate"];

/// Writes trace rows as CSV. An empty trace produces a header-only file.
pub fn write_trace(rows: &[TraceRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let io_err = |source: std::io::Error| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let csv_err = |e: csv::Error| match e.into_kind() {
        csv::ErrorKind::Io(source) => io_err(source),
        other => io_err(std::io::Error::other(format!("{other:?}"))),
    };
    let mut writer = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(csv_err)?;
    writer.write_record(TRACE_HEADER).map_err(csv_err)?;
    for row in rows {
        writer.serialize(row).map_err(csv_err)?;
    }
    writer.flush().map_err(io_err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::canonical_instances;

    const E1_JSON: &str = r#"{
        "n": 1, "m": 1,
        "Q": [[2]], "q": [-2], "A": [[1]],
        "B": {"kind": "whole", "dim": 1},
        "C": {"kind": "box", "lower": [0], "upper": [1]}
    }"#;

    #[test]
    fn parses_e1() {
        let problem = problem_from_str(E1_JSON).unwrap();
        assert_eq!((problem.n(), problem.m()), (1, 1));
        assert_eq!(problem, canonical_instances()["E1"]);
    }

    #[test]
    fn infinite_bounds_from_strings() {
        let json = E1_JSON.replace(r#""upper": [1]"#, r#""upper": ["inf"]"#);
        let problem = problem_from_str(&json).unwrap();
        assert_eq!(
            problem.constraint_set.box_bounds().unwrap().1,
            &[f64::INFINITY][..]
        );
        assert!(problem_from_str(&json.replace("\"inf\"", "\"infinity\"")).is_err());
    }

    #[test]
    fn round_trip_canonical_instances() {
        for (name, problem) in canonical_instances() {
            let text = problem_to_json(&problem);
            assert_eq!(problem_from_str(&text).unwrap(), problem, "{name}");
        }
    }

    #[test]
    fn round_trip_nested_sets() {
        let set = SetSpec::Product(vec![
            SetSpec::SecondOrderCone(3),
            SetSpec::Negation(Box::new(SetSpec::NonnegOrthant(1))),
            SetSpec::Zero(1),
        ]);
        let json = serde_json::to_string(&SetSpecJson::from(&set)).unwrap();
        let back: SetSpecJson = serde_json::from_str(&json).unwrap();
        assert_eq!(back.into_set("C").unwrap(), set);
    }

    #[test]
    fn indefinite_q_rejected() {
        let json = E1_JSON.replace("[[2]]", "[[-1]]");
        let err = problem_from_str(&json).unwrap_err();
        assert!(matches!(err, Error::NotPositiveSemidefinite { .. }));
        assert!(err.to_string().contains("Q not positive semidefinite"));
    }

    #[test]
    fn slightly_negative_q_clipped() {
        let json = E1_JSON.replace("[[2]]", "[[-1e-9]]");
        let problem = problem_from_str(&json).unwrap();
        assert_eq!(problem.hessian[(0, 0)], 0.0);
    }

    #[test]
    fn nearly_symmetric_q_symmetrized() {
        let json = r#"{
            "n": 2, "m": 0,
            "Q": [[1, 0.5], [0.5000000001, 1]], "q": [0, 0], "A": [],
            "B": {"kind": "whole", "dim": 2},
            "C": {"kind": "zero", "dim": 0}
        }"#;
        let problem = problem_from_str(json).unwrap();
        assert_eq!(problem.hessian[(0, 1)], problem.hessian[(1, 0)]);
        let far = json.replace("0.5000000001", "0.6");
        assert!(matches!(problem_from_str(&far), Err(Error::Schema { field, .. }) if field == "Q"));
    }

    #[test]
    fn schema_errors_name_the_field() {
        let json = E1_JSON.replace(r#""lower": [0]"#, r#""lower": [2]"#);
        match problem_from_str(&json).unwrap_err() {
            Error::Schema { field, .. } => assert_eq!(field, "C.lower[0]"),
            other => panic!("unexpected {other}"),
        }
        let json = E1_JSON.replace(r#""q": [-2]"#, r#""q": "x""#);
        match problem_from_str(&json).unwrap_err() {
            Error::Schema { field, .. } => assert_eq!(field, "q"),
            other => panic!("unexpected {other}"),
        }
        let json = E1_JSON.replace(r#""A": [[1]]"#, r#""A": [[1, 2]]"#);
        match problem_from_str(&json).unwrap_err() {
            Error::Schema { field, .. } => assert_eq!(field, "A[0]"),
            other => panic!("unexpected {other}"),
        }
        let json = E1_JSON.replace("\"whole\"", "\"ellipsoid\"");
        match problem_from_str(&json).unwrap_err() {
            Error::Schema { field, .. } => assert_eq!(field, "B.kind"),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(Status::Solved), 0);
        assert_eq!(exit_code(Status::PrimalInfeasible), 2);
        assert_eq!(exit_code(Status::DualInfeasible), 3);
        assert_eq!(exit_code(Status::PrimalAndDualInfeasible), 4);
        assert_eq!(exit_code(Status::MaxIterations), 5);
    }

    #[test]
    fn empty_trace_is_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.csv");
        write_trace(&[], &path).unwrap();
        assert_eq!(
            fs::read_to_string(&path).unwrap(),
            "iter,norm_ds,norm_dx,norm_dnu,obj_candidate\n"
        );
    }

    #[test]
    fn trace_rows_written() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.csv");
        let row = TraceRow {
            iter: 25,
            norm_ds: 0.5,
            norm_dx: 0.25,
            norm_dnu: 0.125,
            obj_candidate: -1.0,
        };
        write_trace(&[row], &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().nth(1), Some("25,0.5,0.25,0.125,-1.0"));
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(
            parse_problem("/nonexistent/problem.json"),
            Err(Error::Io { .. })
        ));
    }
}
