//! Solver backend contract and the default conic interior-point bridge.
//!
//! The synthesis layer only ever sees [`SolverBackend`], so an external
//! solver can be A/B-tested against the bundled one by feeding it the
//! serialized problem text and implementing the trait.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettings, DefaultSolver, IPSolver, SolverStatus,
    SupportedConeT::{PSDTriangleConeT, ZeroConeT},
};
use thiserror::Error;

use super::problem::{LinExpr, SdpProblem};

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("solver setup failed: {0}")]
    Setup(String),
}

/// Accuracy requests passed to a backend, plus the tolerance the caller
/// uses to independently re-verify feasibility of returned solutions.
#[derive(Debug, Clone, Copy)]
pub struct AccuracyTargets {
    /// Duality-gap / residual target handed to the solver.
    pub tol_solver: f64,
    /// Absolute eigenvalue & equality slack accepted when re-checking a
    /// claimed-optimal point.
    pub tol_feas: f64,
}

impl Default for AccuracyTargets {
    fn default() -> Self {
        Self {
            tol_solver: 1e-8,
            tol_feas: 1e-6,
        }
    }
}

/// Backend-reported outcome, deliberately coarse: anything that is not
/// a clean optimum or a certified infeasibility is numerical trouble
/// for the caller to handle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RawStatus {
    Optimal,
    Infeasible,
    NumericalTrouble,
}

/// Flat assignment of every declared scalar plus the backend's status
/// and objective value. The assignment is meaningful only on `Optimal`.
#[derive(Debug, Clone)]
pub struct RawSolution {
    pub status: RawStatus,
    pub x: Vec<f64>,
    pub objective: f64,
}

/// A conic solver capable of the problems this crate builds: linear
/// objective, affine equality constraints, and PSD block constraints.
///
/// A reported `Optimal` must come with the backend's own feasibility and
/// optimality certificate at its configured accuracy; callers re-check
/// feasibility independently and treat disagreement as numerical
/// failure.
pub trait SolverBackend {
    fn solve(
        &mut self,
        problem: &SdpProblem,
        targets: &AccuracyTargets,
    ) -> Result<RawSolution, BackendError>;
}

/// Default backend: wraps the Clarabel interior-point solver, mapping
/// equality constraints to the zero cone and each PSD block to a scaled
/// upper-triangle (svec) cone.
#[derive(Debug, Default, Clone)]
pub struct ClarabelBackend {
    pub verbose: bool,
}

impl ClarabelBackend {
    pub fn new() -> Self {
        Self::default()
    }
}

/// Builds a CSC matrix from (row, col, value) triplets, merging
/// duplicates.
fn csc_from_triplets(
    rows: usize,
    cols: usize,
    triplets: &[(usize, usize, f64)],
) -> CscMatrix<f64> {
    let mut by_col: Vec<Vec<(usize, f64)>> = vec![Vec::new(); cols];
    for &(r, c, v) in triplets {
        by_col[c].push((r, v));
    }
    let mut colptr = Vec::with_capacity(cols + 1);
    let mut rowval = Vec::new();
    let mut nzval = Vec::new();
    colptr.push(0);
    for col in by_col.iter_mut() {
        col.sort_by_key(|&(r, _)| r);
        let mut merged: Vec<(usize, f64)> = Vec::new();
        for &(r, v) in col.iter() {
            match merged.last_mut() {
                Some(last) if last.0 == r => last.1 += v,
                _ => merged.push((r, v)),
            }
        }
        for (r, v) in merged {
            rowval.push(r);
            nzval.push(v);
        }
        colptr.push(rowval.len());
    }
    CscMatrix::new(rows, cols, colptr, rowval, nzval)
}

impl SolverBackend for ClarabelBackend {
    fn solve(
        &mut self,
        problem: &SdpProblem,
        targets: &AccuracyTargets,
    ) -> Result<RawSolution, BackendError> {
        let n = problem.num_scalars();
        let mut q = vec![0.0; n];
        for (idx, c) in problem.objective().terms() {
            q[idx] = c;
        }

        // Constraint rows: equalities first (zero cone), then each PSD
        // block in svec layout (upper triangle column-wise, off-diagonal
        // entries scaled by sqrt(2)).
        let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
        let mut b: Vec<f64> = Vec::new();
        let mut cones = Vec::new();
        let mut row = 0;

        let push_expr = |e: &LinExpr, scale: f64, row: usize,
                             triplets: &mut Vec<(usize, usize, f64)>,
                             b: &mut Vec<f64>| {
            for (idx, c) in e.terms() {
                triplets.push((row, idx, scale * c));
            }
            b.push(scale * e.constant_part());
        };

        let mut eq_rows = 0;
        for eq in problem.equality_constraints() {
            for j in 0..eq.ncols() {
                for i in 0..eq.nrows() {
                    // E(x) = Cx + d = 0  ->  row Cx = -d in the zero cone.
                    push_expr(eq.entry(i, j), 1.0, row, &mut triplets, &mut b);
                    let last = b.len() - 1;
                    b[last] = -b[last];
                    eq_rows += 1;
                    row += 1;
                }
            }
        }
        if eq_rows > 0 {
            cones.push(ZeroConeT(eq_rows));
        }

        let sqrt2 = 2.0_f64.sqrt();
        for psd in problem.psd_constraints() {
            let d = psd.nrows();
            for j in 0..d {
                for i in 0..=j {
                    // s = b - Ax must equal svec(E(x)), so A = -svec(C),
                    // b = svec(d) per row.
                    let scale = if i == j { 1.0 } else { sqrt2 };
                    push_expr(psd.entry(i, j), -scale, row, &mut triplets, &mut b);
                    let last = b.len() - 1;
                    b[last] = -b[last];
                    row += 1;
                }
            }
            cones.push(PSDTriangleConeT(d));
        }

        let a = csc_from_triplets(row, n, &triplets);
        let p = csc_from_triplets(n, n, &[]);
        let settings = DefaultSettings {
            verbose: self.verbose,
            tol_gap_abs: targets.tol_solver,
            tol_gap_rel: targets.tol_solver,
            tol_feas: targets.tol_solver,
            ..DefaultSettings::default()
        };
        let mut solver = DefaultSolver::new(&p, &q, &a, &b, &cones, settings);
        solver.solve();

        let status = match solver.solution.status {
            SolverStatus::Solved | SolverStatus::AlmostSolved => RawStatus::Optimal,
            SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
                RawStatus::Infeasible
            }
            _ => RawStatus::NumericalTrouble,
        };
        Ok(RawSolution {
            status,
            x: solver.solution.x.clone(),
            objective: solver.solution.obj_val,
        })
    }
}
