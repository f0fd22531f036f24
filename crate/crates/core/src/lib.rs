//! Douglas-Rachford splitting for convex quadratic programs, with
//! infeasibility detection through the infimal displacement vector.

pub mod analysis;
pub mod engine;
pub mod error;
pub mod io;
pub mod linalg;
pub mod oracle;
pub mod qp;
pub mod sets;

pub use analysis::{
    split_displacement, verify_identities, CertificatePair, IdentityCheck, IdentityReport,
};
pub use engine::{run, SolveResult, SolverConfig, SolverState, Status};
pub use error::{Error, Result};
pub use linalg::{DenseMatrix, DenseVector, ProductVector};
pub use qp::{QpProblem, QpSplitting, TOL_MEM};
pub use sets::{ExtendedReal, SetSpec};
