//! Douglas-Rachford iteration on the QP splitting.
//!
//! From a governing iterate `s_n` one step computes
//!
//! ```text
//! x_n     = prox_f(s_n)
//! ν_n     = s_n − x_n
//! x̃_n     = prox_g(2x_n − s_n)
//! s_{n+1} = s_n + x̃_n − x_n
//! ```
//!
//! The differences `s_n − s_{n+1}`, `x_n − x_{n+1}` and `ν_n − ν_{n+1}`
//! converge to `v`, `v_D` and `v_P` whether or not the problem is solvable, so
//! the engine keeps a window of them and classifies the run from their means.

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::analysis::{split_displacement, CertificatePair};
use crate::error::{Error, Result};
use crate::linalg::{DenseVector, ProductVector};
use crate::qp::QpSplitting;

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub max_iter: usize,
    /// Tolerance for declaring convergence to a solution.
    pub eps_solved: f64,
    /// Tolerance for infeasibility detection; certificates at or below this
    /// norm are treated as zero.
    pub eps_inf: f64,
    /// Number of recent differences averaged into the estimates.
    pub window: usize,
    /// Infeasibility checks and trace rows happen every `check_interval` steps.
    pub check_interval: usize,
    pub record_trace: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_iter: 100_000,
            eps_solved: 1e-8,
            eps_inf: 1e-6,
            window: 50,
            check_interval: 25,
            record_trace: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str| Err(Error::schema(field, "must be positive"));
        if self.max_iter == 0 {
            return bad("max_iter");
        }
        if self.eps_solved.is_nan() || self.eps_solved <= 0.0 {
            return bad("eps_solved");
        }
        if self.eps_inf.is_nan() || self.eps_inf <= 0.0 {
            return bad("eps_inf");
        }
        if self.window == 0 {
            return bad("window");
        }
        if self.check_interval == 0 {
            return bad("check_interval");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Solved,
    PrimalInfeasible,
    DualInfeasible,
    PrimalAndDualInfeasible,
    MaxIterations,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Solved => "solved",
            Status::PrimalInfeasible => "primal_infeasible",
            Status::DualInfeasible => "dual_infeasible",
            Status::PrimalAndDualInfeasible => "primal_and_dual_infeasible",
            Status::MaxIterations => "max_iterations",
        }
    }

    pub fn is_primal_infeasible(self) -> bool {
        matches!(
            self,
            Status::PrimalInfeasible | Status::PrimalAndDualInfeasible
        )
    }

    pub fn is_dual_infeasible(self) -> bool {
        matches!(
            self,
            Status::DualInfeasible | Status::PrimalAndDualInfeasible
        )
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Differences `(s_n − s_{n+1}, x_n − x_{n+1}, ν_n − ν_{n+1})` of one step.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaRecord {
    pub ds: ProductVector,
    pub dx: ProductVector,
    pub dnu: ProductVector,
}

/// Window means of the recorded differences.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaEstimates {
    /// Estimate of `v`.
    pub v: ProductVector,
    /// Estimate of `v_D`.
    pub v_x: ProductVector,
    /// Estimate of `v_P`.
    pub v_nu: ProductVector,
    /// Largest distance of a recorded difference from its window mean.
    pub max_deviation: f64,
}

#[derive(Debug, Clone)]
pub struct SolverState {
    /// Governing iterate `s_n`.
    pub s: ProductVector,
    /// Shadow iterate `x_n = prox_f(s_n)`.
    pub x: ProductVector,
    /// `ν_n = s_n − x_n`.
    pub nu: ProductVector,
    /// `x̃_{n−1} = prox_g(2x_{n−1} − s_{n−1})`, the latest point on the graph of `A`.
    pub x_tilde: ProductVector,
    pub iter: usize,
    window: usize,
    history: VecDeque<DeltaRecord>,
}

impl SolverState {
    pub fn new(split: &QpSplitting, s0: ProductVector, window: usize) -> Self {
        assert!(window > 0, "window must be positive");
        let x = split.prox_f(&s0);
        let nu = &s0 - &x;
        SolverState {
            x_tilde: x.clone(),
            s: s0,
            x,
            nu,
            iter: 0,
            window,
            history: VecDeque::with_capacity(window),
        }
    }

    pub fn history(&self) -> impl ExactSizeIterator<Item = &DeltaRecord> + '_ {
        self.history.iter()
    }

    pub fn last_delta(&self) -> Option<&DeltaRecord> {
        self.history.back()
    }

    pub fn history_full(&self) -> bool {
        self.history.len() >= self.window
    }

    /// Advances one Douglas-Rachford step and records its differences.
    pub fn step(&mut self, split: &QpSplitting) -> &DeltaRecord {
        let reflected = &(&self.x * 2.0) - &self.s;
        let x_tilde = split.prox_g(&reflected);
        let s_next = &(&self.s + &x_tilde) - &self.x;
        let x_next = split.prox_f(&s_next);
        let nu_next = &s_next - &x_next;

        let record = DeltaRecord {
            ds: &self.s - &s_next,
            dx: &self.x - &x_next,
            dnu: &self.nu - &nu_next,
        };
        if self.history.len() == self.window {
            self.history.pop_front();
        }
        self.history.push_back(record);

        self.s = s_next;
        self.x = x_next;
        self.nu = nu_next;
        self.x_tilde = x_tilde;
        self.iter += 1;
        self.history.back().expect("just pushed")
    }

    /// Means of the last `window` differences.
    pub fn delta_estimates(&self) -> Result<DeltaEstimates> {
        if !self.history_full() {
            return Err(Error::InsufficientHistory {
                needed: self.window,
                available: self.history.len(),
            });
        }
        let (n, m) = (self.s.n(), self.s.m());
        let count = self.history.len() as f64;
        let mut v = ProductVector::zeros(n, m);
        let mut v_x = ProductVector::zeros(n, m);
        let mut v_nu = ProductVector::zeros(n, m);
        for rec in &self.history {
            v.axpy(1.0 / count, &rec.ds);
            v_x.axpy(1.0 / count, &rec.dx);
            v_nu.axpy(1.0 / count, &rec.dnu);
        }
        let max_deviation = self
            .history
            .iter()
            .flat_map(|rec| {
                [
                    (&rec.ds - &v).norm(),
                    (&rec.dx - &v_x).norm(),
                    (&rec.dnu - &v_nu).norm(),
                ]
            })
            .fold(0.0, f64::max);
        Ok(DeltaEstimates {
            v,
            v_x,
            v_nu,
            max_deviation,
        })
    }

    /// `(−x_n/n, −ν_n/n)`, window-free estimates of `(v_D, v_P)`.
    pub fn cesaro_estimate(&self) -> Result<(ProductVector, ProductVector)> {
        if self.iter == 0 {
            return Err(Error::NoIterations);
        }
        let scale = -1.0 / self.iter as f64;
        Ok((self.x.scale(scale), self.nu.scale(scale)))
    }

    fn mean_ds_norm(&self) -> Option<f64> {
        if self.history.is_empty() {
            return None;
        }
        let total: f64 = self.history.iter().map(|r| r.ds.norm()).sum();
        Some(total / self.history.len() as f64)
    }
}

/// Candidate primal solution read off `x̃`.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub z: DenseVector,
    pub y: DenseVector,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub iter: usize,
    pub norm_ds: f64,
    pub norm_dx: f64,
    pub norm_dnu: f64,
    pub obj_candidate: f64,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub status: Status,
    pub solution: Option<Solution>,
    /// Certificates split from the final window estimate of `v`, pruned at
    /// `eps_inf`.
    pub certificates: CertificatePair,
    /// Final window means, when the window was full.
    pub estimates: Option<DeltaEstimates>,
    pub iterations: usize,
    /// Mean `‖s_n − s_{n+1}‖` over the final window.
    pub final_residual: f64,
    pub trace: Option<Vec<TraceRow>>,
}

/// Outcome of one classification attempt.
#[derive(Debug, Clone, PartialEq)]
pub enum Verdict {
    Continue,
    Decided(Status, CertificatePair),
}

fn primal_residual(split: &QpSplitting, p: &ProductVector) -> f64 {
    (p - &split.prox_f(p)).norm()
}

/// Checks the current state for convergence or for stabilized certificates.
///
/// Convergence is tested at every call; infeasibility only once the window is
/// full and on multiples of `check_interval`.
pub fn classify(state: &SolverState, split: &QpSplitting, config: &SolverConfig) -> Verdict {
    let (n, m) = (split.n(), split.m());
    let Some(mean_ds) = state.mean_ds_norm() else {
        return Verdict::Continue;
    };
    if mean_ds <= config.eps_solved * (1.0 + state.s.norm())
        && primal_residual(split, &state.x_tilde) <= config.eps_solved
    {
        return Verdict::Decided(Status::Solved, CertificatePair::zeros(n, m));
    }
    if !state.history_full() || !state.iter.is_multiple_of(config.check_interval) {
        return Verdict::Continue;
    }
    let Ok(est) = state.delta_estimates() else {
        return Verdict::Continue;
    };
    if est.max_deviation > 10.0 * config.eps_inf {
        return Verdict::Continue;
    }
    let cert = split_displacement(split, &est.v).pruned(config.eps_inf);
    let primal = !cert.primal_is_zero()
        && split.check_primal_certificate(&-&cert.vp_z, &-&cert.vp_y, config.eps_inf);
    let dual = !cert.dual_is_zero() && split.check_dual_certificate(&-&cert.vd_z, config.eps_inf);
    let status = match (primal, dual) {
        (true, true) => Status::PrimalAndDualInfeasible,
        (true, false) => Status::PrimalInfeasible,
        (false, true) => Status::DualInfeasible,
        (false, false) => return Verdict::Continue,
    };
    Verdict::Decided(status, cert)
}

fn trace_row(state: &SolverState, split: &QpSplitting) -> TraceRow {
    let last = state.last_delta().expect("trace rows follow a step");
    TraceRow {
        iter: state.iter,
        norm_ds: last.ds.norm(),
        norm_dx: last.dx.norm(),
        norm_dnu: last.dnu.norm(),
        obj_candidate: split.problem().objective(&state.x_tilde.z),
    }
}

/// Iterates from `s0` until the run is classified or `max_iter` is reached.
pub fn run(split: &QpSplitting, config: &SolverConfig, s0: ProductVector) -> SolveResult {
    assert!(
        s0.n() == split.n() && s0.m() == split.m(),
        "initial point has the wrong shape"
    );
    let mut state = SolverState::new(split, s0, config.window);
    let mut trace = config.record_trace.then(Vec::new);
    let mut outcome = None;

    while state.iter < config.max_iter {
        state.step(split);
        if let Some(rows) = trace.as_mut() {
            if state.iter.is_multiple_of(config.check_interval) {
                rows.push(trace_row(&state, split));
            }
        }
        if let Verdict::Decided(status, cert) = classify(&state, split, config) {
            outcome = Some((status, cert));
            break;
        }
    }

    let estimates = state.delta_estimates().ok();
    let (status, certificates) = outcome.unwrap_or_else(|| {
        let cert = match &estimates {
            Some(est) => split_displacement(split, &est.v).pruned(config.eps_inf),
            None => CertificatePair::zeros(split.n(), split.m()),
        };
        (Status::MaxIterations, cert)
    });
    let solution = (status == Status::Solved).then(|| Solution {
        z: state.x_tilde.z.clone(),
        y: state.x_tilde.y.clone(),
        objective: split.problem().objective(&state.x_tilde.z),
    });
    log::debug!(
        "finished after {} iterations with status {status}",
        state.iter
    );
    SolveResult {
        status,
        solution,
        certificates,
        estimates,
        iterations: state.iter,
        final_residual: state.mean_ds_norm().unwrap_or(0.0),
        trace,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::DenseMatrix;
    use crate::qp::QpProblem;
    use crate::sets::SetSpec;

    fn v(xs: &[f64]) -> DenseVector {
        DenseVector::from_column_slice(xs)
    }

    fn scalar(quad: f64, lin: f64, b: SetSpec, c: SetSpec) -> QpSplitting {
        let problem = QpProblem::new(
            DenseMatrix::from_element(1, 1, quad),
            v(&[lin]),
            DenseMatrix::from_element(1, 1, 1.0),
            b,
            c,
        )
        .unwrap();
        QpSplitting::new(problem).unwrap()
    }

    fn e1() -> QpSplitting {
        scalar(
            2.0,
            -2.0,
            SetSpec::WholeSpace(1),
            SetSpec::new_box(vec![0.0], vec![1.0]).unwrap(),
        )
    }

    fn e3() -> QpSplitting {
        scalar(0.0, -1.0, SetSpec::WholeSpace(1), SetSpec::NonnegOrthant(1))
    }

    #[test]
    fn fixed_point_is_stationary() {
        let split = e1();
        let mut state = SolverState::new(&split, ProductVector::zeros(1, 1), 10);
        for _ in 0..500 {
            state.step(&split);
        }
        let s_fixed = state.s.clone();
        let rec = state.step(&split).clone();
        assert!(rec.ds.norm() <= 1e-14);
        assert!((&state.s - &s_fixed).norm() <= 1e-14);
    }

    #[test]
    fn residual_nonincreasing_on_feasible_instance() {
        let split = e1();
        let mut state = SolverState::new(&split, ProductVector::zeros(1, 1), 10);
        let mut prev = f64::INFINITY;
        for _ in 0..100 {
            let norm = state.step(&split).ds.norm();
            assert!(norm <= prev + 1e-12);
            prev = norm;
        }
    }

    #[test]
    fn shadow_differences_on_dual_infeasible_instance() {
        let split = e3();
        let mut state = SolverState::new(&split, ProductVector::zeros(1, 1), 50);
        for _ in 0..5000 {
            state.step(&split);
        }
        let dx = &state.last_delta().unwrap().dx;
        assert!((dx - &ProductVector::new(v(&[-0.5]), v(&[-0.5]))).norm() <= 1e-4);
        let est = state.delta_estimates().unwrap();
        assert!((&est.v_x - &ProductVector::new(v(&[-0.5]), v(&[-0.5]))).norm() <= 1e-4);
    }

    #[test]
    fn estimates_need_full_window() {
        let split = e1();
        let mut state = SolverState::new(&split, ProductVector::zeros(1, 1), 5);
        assert!(state.cesaro_estimate().is_err());
        state.step(&split);
        assert!(matches!(
            state.delta_estimates(),
            Err(Error::InsufficientHistory {
                needed: 5,
                available: 1
            })
        ));
        assert!(state.cesaro_estimate().is_ok());
    }

    #[test]
    fn difference_identity_holds() {
        let split = e3();
        let mut state = SolverState::new(&split, ProductVector::new(v(&[0.3]), v(&[-2.0])), 5);
        for _ in 0..50 {
            let rec = state.step(&split);
            assert!((&(&rec.dx + &rec.dnu) - &rec.ds).norm() <= 1e-12);
        }
    }

    #[test]
    fn zero_objective_free_problem_solves_immediately() {
        let split = scalar(0.0, 0.0, SetSpec::WholeSpace(1), SetSpec::WholeSpace(1));
        let result = run(&split, &SolverConfig::default(), ProductVector::zeros(1, 1));
        assert_eq!(result.status, Status::Solved);
        assert_eq!(result.iterations, 1);
    }

    #[test]
    fn e1_solves() {
        let result = run(&e1(), &SolverConfig::default(), ProductVector::zeros(1, 1));
        assert_eq!(result.status, Status::Solved);
        let sol = result.solution.unwrap();
        assert!((sol.z[0] - 1.0).abs() <= 1e-6);
        assert!((sol.objective + 1.0).abs() <= 1e-6);
        assert!(result.certificates.primal_is_zero() && result.certificates.dual_is_zero());
    }

    #[test]
    fn e3_dual_infeasible() {
        let result = run(&e3(), &SolverConfig::default(), ProductVector::zeros(1, 1));
        assert_eq!(result.status, Status::DualInfeasible);
        assert!(result.solution.is_none());
        assert!(result.certificates.primal_is_zero());
        assert!((result.certificates.vd_z[0] + 0.5).abs() <= 1e-6);
    }

    #[test]
    fn max_iterations_status() {
        let config = SolverConfig {
            max_iter: 3,
            ..SolverConfig::default()
        };
        let result = run(&e1(), &config, ProductVector::zeros(1, 1));
        assert_eq!(result.status, Status::MaxIterations);
        assert_eq!(result.iterations, 3);
        assert!(result.estimates.is_none());
    }

    #[test]
    fn trace_rows_at_check_interval() {
        let config = SolverConfig {
            max_iter: 100,
            eps_solved: 1e-300,
            record_trace: true,
            ..SolverConfig::default()
        };
        let result = run(&e3(), &config, ProductVector::zeros(1, 1));
        let trace = result.trace.unwrap();
        assert_eq!(trace.first().unwrap().iter, 25);
        assert!(trace.iter().all(|r| r.iter % 25 == 0));
    }

    #[test]
    fn status_strings() {
        assert_eq!(
            Status::PrimalAndDualInfeasible.to_string(),
            "primal_and_dual_infeasible"
        );
        assert_eq!(
            serde_json::to_string(&Status::MaxIterations).unwrap(),
            "\"max_iterations\""
        );
        assert!(Status::PrimalAndDualInfeasible.is_dual_infeasible());
        assert!(!Status::Solved.is_primal_infeasible());
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::default().validate().is_ok());
        let bad = SolverConfig {
            window: 0,
            ..SolverConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
