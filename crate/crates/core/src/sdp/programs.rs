//! The five controller-synthesis programs and their common solve/decode
//! path.
//!
//! Every program minimizes an H2-type objective over a stabilizing
//! parametrization. The model-based program works from `(A, B)`; the
//! four data programs work from snapshot matrices, differing in how
//! they treat the disturbance that corrupted the snapshots: subtract it
//! exactly (ideal), ignore it (baseline), soften the closed-loop
//! parametrization with a penalized slack (soft), or constrain the
//! slack against a quadratic noise set (s-procedure).
//!
//! Nonlinear-looking terms of the form `Q P⁻¹ Qᵀ` are encoded exactly
//! as Schur-complement blocks, valid because every program also forces
//! `P ⪰ I`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::backend::{AccuracyTargets, RawStatus, SolverBackend};
use super::problem::{LinExpr, MatExpr, SdpProblem, VarId};
use crate::cert::NoiseBound;
use crate::data::DataMatrices;
use crate::linalg;
use crate::lti::{DiscreteLtiSystem, PerformanceWeights};

#[derive(Debug, Error)]
pub enum SynthesisError {
    #[error("disturbance snapshots are required for this program")]
    MissingD0,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("no grid point produced a feasible program")]
    AllInfeasible,
}

/// Which synthesis program a problem encodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProgramKind {
    ModelBased,
    Ideal,
    Baseline,
    Soft,
    SProc,
}

/// A program selection together with its parameters.
#[derive(Debug, Clone)]
pub enum ProgramVariant {
    ModelBased,
    Ideal,
    Baseline,
    Soft { alpha: f64 },
    SProc { mu: f64, r: DMatrix<f64>, eta1: f64 },
}

impl ProgramVariant {
    pub fn kind(&self) -> ProgramKind {
        match self {
            ProgramVariant::ModelBased => ProgramKind::ModelBased,
            ProgramVariant::Ideal => ProgramKind::Ideal,
            ProgramVariant::Baseline => ProgramKind::Baseline,
            ProgramVariant::Soft { .. } => ProgramKind::Soft,
            ProgramVariant::SProc { .. } => ProgramKind::SProc,
        }
    }
}

/// Decoding recipe a builder attaches to its problem: which variables
/// hold which role, plus the constants needed to recover the gain and
/// the reported objective.
#[derive(Debug, Clone)]
pub struct DecodeInfo {
    pub kind: ProgramKind,
    pub p: VarId,
    pub l: VarId,
    /// Trajectory-space decision variable of the data programs.
    pub q: Option<VarId>,
    /// Gain-times-P substitution variable of the model-based program.
    pub y: Option<VarId>,
    /// Slack variable of the soft and s-procedure programs.
    pub v: Option<VarId>,
    /// Input snapshots, kept for decoding `K = U0 Q P⁻¹`.
    pub u0: Option<DMatrix<f64>>,
    /// Per-column scaling applied to the snapshot data when the problem
    /// was built. The stored `Q` variable is `diag(s) Q`, so decoding
    /// divides row `t` by `s[t]` (and entry `(i, j)` of the slack by
    /// `s[i] s[j]`).
    pub col_scale: Option<Vec<f64>>,
    /// State weight, kept for reporting the model-based objective.
    pub wx: Option<DMatrix<f64>>,
    /// Whether the stacked input/state snapshots had full row rank when
    /// the program was built; `false` voids the optimality guarantee
    /// even if the solver returns a feasible point.
    pub rank_condition: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    NumericalFailure,
}

/// Decoded outcome of one synthesis solve. Matrix fields are populated
/// only on `Optimal` (and only those the program defines); `gamma` is
/// the guaranteed closed-loop H2-squared bound `trace(P) + trace(L)`
/// (for the model-based program, its weighted counterpart), while
/// `objective` is the full minimized objective including any slack
/// penalty.
#[derive(Debug, Clone)]
pub struct SynthesisResult {
    pub status: SolveStatus,
    pub kind: Option<ProgramKind>,
    pub gamma: Option<f64>,
    pub objective: Option<f64>,
    pub q: Option<DMatrix<f64>>,
    pub p: Option<DMatrix<f64>>,
    pub l: Option<DMatrix<f64>>,
    pub v: Option<DMatrix<f64>>,
    pub k: Option<DMatrix<f64>>,
    pub rank_condition: Option<bool>,
}

impl SynthesisResult {
    fn unsolved(status: SolveStatus, meta: Option<&DecodeInfo>) -> Self {
        Self {
            status,
            kind: meta.map(|m| m.kind),
            gamma: None,
            objective: None,
            q: None,
            p: None,
            l: None,
            v: None,
            k: None,
            rank_condition: meta.and_then(|m| m.rank_condition),
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }
}

fn check_data_shapes(dm: &DataMatrices) -> Result<(), SynthesisError> {
    let t = dm.u0.ncols();
    if t == 0 {
        return Err(SynthesisError::Shape("empty data horizon".into()));
    }
    if dm.x0.ncols() != t || dm.x1.ncols() != t {
        return Err(SynthesisError::Shape(
            "snapshot matrices must share the horizon".into(),
        ));
    }
    if dm.x0.nrows() != dm.x1.nrows() {
        return Err(SynthesisError::Shape(
            "state snapshots must share the state dimension".into(),
        ));
    }
    if let Some(d0) = &dm.d0 {
        if d0.nrows() != dm.x0.nrows() || d0.ncols() != t {
            return Err(SynthesisError::Shape(
                "disturbance snapshots must match the state snapshots".into(),
            ));
        }
    }
    Ok(())
}

/// Per-column norms of the stacked snapshot data, floored at 1.
///
/// Open-loop trajectories of an unstable plant grow geometrically, so
/// the raw columns routinely span eight orders of magnitude — enough
/// for an interior-point solver to fail outright. The programs are
/// therefore posed in the substituted variable `diag(s) Q`, which turns
/// every trajectory product into one against unit-norm columns. The
/// substitution is exact (`diag(s)` is invertible), and the slack
/// penalty carries the compensating `1/s_t²` weights so the optimized
/// objective is unchanged; [`solve`] undoes it when decoding.
fn column_scales(dm: &DataMatrices, z: &DMatrix<f64>) -> Vec<f64> {
    (0..dm.horizon())
        .map(|t| {
            let s = (dm.u0.column(t).norm_squared()
                + dm.x0.column(t).norm_squared()
                + z.column(t).norm_squared())
            .sqrt();
            s.max(1.0)
        })
        .collect()
}

fn scale_columns(m: &DMatrix<f64>, s: &[f64]) -> DMatrix<f64> {
    let mut out = m.clone();
    for (t, &st) in s.iter().enumerate() {
        out.column_mut(t).unscale_mut(st);
    }
    out
}

/// Shared skeleton of the data programs: variables `Q`, `P`, `L`, the
/// consistency equality `X0 Q = P`, the contraction block built from
/// `Z Q` (`Z` differs per program), the cost block, and the `P ⪰ I`
/// floor. Returns the problem, the variable handles, and the column
/// scaling baked into `Q`.
fn data_program_skeleton(
    dm: &DataMatrices,
    z: &DMatrix<f64>,
) -> (SdpProblem, VarId, VarId, VarId, Vec<f64>) {
    let n = dm.state_dim();
    let m = dm.input_dim();
    let t = dm.horizon();
    let scales = column_scales(dm, z);
    let x0 = scale_columns(&dm.x0, &scales);
    let u0 = scale_columns(&dm.u0, &scales);
    let z = scale_columns(z, &scales);

    let mut prob = SdpProblem::new();
    let q = prob.add_full_var("Q", t, n).expect("fresh problem");
    let p = prob.add_sym_var("P", n).expect("fresh problem");
    let l = prob.add_sym_var("L", m).expect("fresh problem");

    let ep = prob.var_expr(p);
    let eq_expr = prob.var_expr(q).left_mul(&x0).sub(&ep);
    prob.add_equality(eq_expr);

    let zq = prob.var_expr(q).left_mul(&z);
    let contraction = MatExpr::from_blocks(&[
        vec![ep.sub(&MatExpr::identity(n)), zq.clone()],
        vec![zq.transpose(), ep.clone()],
    ]);
    prob.add_psd(contraction).expect("symmetric by construction");

    let uq = prob.var_expr(q).left_mul(&u0);
    let cost = MatExpr::from_blocks(&[
        vec![prob.var_expr(l), uq.clone()],
        vec![uq.transpose(), ep.clone()],
    ]);
    prob.add_psd(cost).expect("symmetric by construction");

    prob.add_psd(ep.sub(&MatExpr::identity(n)))
        .expect("symmetric by construction");

    (prob, q, p, l, scales)
}

fn data_decode_info(
    dm: &DataMatrices,
    kind: ProgramKind,
    q: VarId,
    p: VarId,
    l: VarId,
    v: Option<VarId>,
    col_scale: Vec<f64>,
) -> DecodeInfo {
    DecodeInfo {
        kind,
        p,
        l,
        q: Some(q),
        y: None,
        v,
        u0: Some(dm.u0.clone()),
        col_scale: Some(col_scale),
        wx: None,
        rank_condition: Some(crate::data::rank_condition(dm)),
    }
}

/// Model-based H2 synthesis: minimize `trace(Wx P) + trace(L)` subject
/// to the closed-loop contraction LMI (with the substitution `Y = K P`)
/// and the cost block bounding `Wu^{1/2} K P Kᵀ Wu^{1/2}` by `L`.
pub fn build_model_based(
    sys: &DiscreteLtiSystem,
    w: &PerformanceWeights,
) -> Result<SdpProblem, SynthesisError> {
    let n = sys.state_dim();
    let m = sys.input_dim();
    if w.wx().nrows() != n || w.wu().nrows() != m {
        return Err(SynthesisError::Shape(format!(
            "weights sized {}x{} do not match system dimensions n={n}, m={m}",
            w.wx().nrows(),
            w.wu().nrows()
        )));
    }
    let mut prob = SdpProblem::new();
    let p = prob.add_sym_var("P", n).expect("fresh problem");
    let y = prob.add_full_var("Y", m, n).expect("fresh problem");
    let l = prob.add_sym_var("L", m).expect("fresh problem");

    let ep = prob.var_expr(p);
    // A P + B Y is the closed loop times P.
    let apby = prob
        .var_expr(p)
        .left_mul(sys.a())
        .add(&prob.var_expr(y).left_mul(sys.b()));
    let contraction = MatExpr::from_blocks(&[
        vec![ep.sub(&MatExpr::identity(n)), apby.clone()],
        vec![apby.transpose(), ep.clone()],
    ]);
    prob.add_psd(contraction).expect("symmetric by construction");

    let wu_half = linalg::sym_sqrt(w.wu());
    let wy = prob.var_expr(y).left_mul(&wu_half);
    let cost = MatExpr::from_blocks(&[
        vec![prob.var_expr(l), wy.clone()],
        vec![wy.transpose(), ep.clone()],
    ]);
    prob.add_psd(cost).expect("symmetric by construction");

    prob.add_psd(ep.sub(&MatExpr::identity(n)))
        .expect("symmetric by construction");

    let mut obj = prob.var_expr(p).left_mul(w.wx()).trace();
    obj.add_scaled(&prob.var_expr(l).trace(), 1.0);
    prob.set_objective(obj);

    prob.metadata = Some(DecodeInfo {
        kind: ProgramKind::ModelBased,
        p,
        l,
        q: None,
        y: Some(y),
        v: None,
        u0: None,
        col_scale: None,
        wx: Some(w.wx().clone()),
        rank_condition: None,
    });
    Ok(prob)
}

/// Data program with the disturbance subtracted exactly: the
/// contraction block uses `(X1 - D0) Q`. Requires recorded disturbance
/// snapshots.
pub fn build_ideal(dm: &DataMatrices) -> Result<SdpProblem, SynthesisError> {
    check_data_shapes(dm)?;
    let d0 = dm.d0.as_ref().ok_or(SynthesisError::MissingD0)?;
    let z = &dm.x1 - d0;
    let (mut prob, q, p, l, scales) = data_program_skeleton(dm, &z);
    let mut obj = prob.var_expr(p).trace();
    obj.add_scaled(&prob.var_expr(l).trace(), 1.0);
    prob.set_objective(obj);
    prob.metadata = Some(data_decode_info(dm, ProgramKind::Ideal, q, p, l, None, scales));
    Ok(prob)
}

/// Data program that ignores the disturbance: the contraction block
/// uses `X1 Q` as if the snapshots were exact.
pub fn build_baseline(dm: &DataMatrices) -> Result<SdpProblem, SynthesisError> {
    check_data_shapes(dm)?;
    let (mut prob, q, p, l, scales) = data_program_skeleton(dm, &dm.x1);
    let mut obj = prob.var_expr(p).trace();
    obj.add_scaled(&prob.var_expr(l).trace(), 1.0);
    prob.set_objective(obj);
    prob.metadata = Some(data_decode_info(
        dm,
        ProgramKind::Baseline,
        q,
        p,
        l,
        None,
        scales,
    ));
    Ok(prob)
}

/// Soft-constrained data program: adds a slack `V ⪰ Q P⁻¹ Qᵀ` whose
/// trace is penalized with weight `alpha ≥ 1`, trading closed-loop
/// performance for robustness to the ignored disturbance.
pub fn build_soft(dm: &DataMatrices, alpha: f64) -> Result<SdpProblem, SynthesisError> {
    if !(alpha >= 1.0) {
        return Err(SynthesisError::InvalidParameter(format!(
            "slack weight must be at least 1, got {alpha}"
        )));
    }
    check_data_shapes(dm)?;
    let t = dm.horizon();
    let (mut prob, q, p, l, scales) = data_program_skeleton(dm, &dm.x1);
    let v = prob.add_sym_var("V", t).expect("fresh problem");
    let slack = MatExpr::from_blocks(&[
        vec![prob.var_expr(v), prob.var_expr(q)],
        vec![prob.var_expr(q).transpose(), prob.var_expr(p)],
    ]);
    prob.add_psd(slack).expect("symmetric by construction");

    let mut obj = prob.var_expr(p).trace();
    obj.add_scaled(&prob.var_expr(l).trace(), 1.0);
    obj.add_scaled(&weighted_diag_trace(&prob.var_expr(v), &scales), alpha);
    prob.set_objective(obj);
    prob.metadata = Some(data_decode_info(
        dm,
        ProgramKind::Soft,
        q,
        p,
        l,
        Some(v),
        scales,
    ));
    Ok(prob)
}

/// `trace(diag(s)⁻¹ V' diag(s)⁻¹)` as a linear expression over the
/// stored (scaled) slack — i.e. the trace of the slack in original
/// trajectory coordinates.
fn weighted_diag_trace(v: &MatExpr, scales: &[f64]) -> LinExpr {
    let mut out = LinExpr::default();
    for (t, &st) in scales.iter().enumerate() {
        out.add_scaled(v.entry(t, t), 1.0 / (st * st));
    }
    out
}

/// S-procedure data program: the slack `V` is constrained against the
/// quadratic noise set `D0 V D0ᵀ ⪯ μ² R V Rᵀ` through one augmented
/// block, with `η1 ≥ 1` setting the stability margin the program must
/// certify.
pub fn build_sproc(
    dm: &DataMatrices,
    mu: f64,
    r: &DMatrix<f64>,
    eta1: f64,
) -> Result<SdpProblem, SynthesisError> {
    if !(mu > 0.0) {
        return Err(SynthesisError::InvalidParameter(format!(
            "noise-set scale must be positive, got {mu}"
        )));
    }
    if !(eta1 >= 1.0) {
        return Err(SynthesisError::InvalidParameter(format!(
            "stability margin must be at least 1, got {eta1}"
        )));
    }
    check_data_shapes(dm)?;
    let n = dm.state_dim();
    let t = dm.horizon();
    if r.nrows() != n || r.ncols() != t {
        return Err(SynthesisError::Shape(format!(
            "noise-set shape matrix sized {}x{}, expected {n}x{t}",
            r.nrows(),
            r.ncols()
        )));
    }
    if linalg::numeric_rank(r) < n {
        return Err(SynthesisError::InvalidParameter(
            "noise-set shape matrix must have full row rank".into(),
        ));
    }
    let scales = column_scales(dm, &dm.x1);
    let x0 = scale_columns(&dm.x0, &scales);
    let u0 = scale_columns(&dm.u0, &scales);
    let x1 = scale_columns(&dm.x1, &scales);
    // The slack is stored as diag(s) V diag(s), so the shape matrix
    // picks up the inverse scaling to keep R V Rᵀ unchanged.
    let r = scale_columns(r, &scales);

    let mut prob = SdpProblem::new();
    let q = prob.add_full_var("Q", t, n).expect("fresh problem");
    let p = prob.add_sym_var("P", n).expect("fresh problem");
    let l = prob.add_sym_var("L", m_of(dm)).expect("fresh problem");
    let v = prob.add_sym_var("V", t).expect("fresh problem");

    let ep = prob.var_expr(p);
    prob.add_equality(prob.var_expr(q).left_mul(&x0).sub(&ep));

    // Augmented contraction block: the (1,1) entry keeps a 1/η1-scaled
    // identity margin after subtracting the noise-set term μ² R V Rᵀ,
    // and the border couples X1 Q against the slack.
    let rt = r.transpose();
    let rvr = prob.var_expr(v).left_mul(&r).right_mul(&rt).scale(mu * mu);
    let head = ep
        .sub(&rvr)
        .sub(&MatExpr::constant(&(DMatrix::identity(n, n) / eta1)));
    let x1q = prob.var_expr(q).left_mul(&x1);
    let block = MatExpr::from_blocks(&[
        vec![head, MatExpr::zeros(n, t), x1q.neg()],
        vec![MatExpr::zeros(t, n), prob.var_expr(v), prob.var_expr(q)],
        vec![x1q.neg().transpose(), prob.var_expr(q).transpose(), ep.clone()],
    ]);
    prob.add_psd(block).expect("symmetric by construction");

    let uq = prob.var_expr(q).left_mul(&u0);
    let cost = MatExpr::from_blocks(&[
        vec![prob.var_expr(l), uq.clone()],
        vec![uq.transpose(), ep.clone()],
    ]);
    prob.add_psd(cost).expect("symmetric by construction");

    prob.add_psd(ep.sub(&MatExpr::identity(n)))
        .expect("symmetric by construction");

    let mut obj = prob.var_expr(p).trace();
    obj.add_scaled(&prob.var_expr(l).trace(), 1.0);
    obj.add_scaled(&weighted_diag_trace(&prob.var_expr(v), &scales), 1.0);
    prob.set_objective(obj);
    prob.metadata = Some(data_decode_info(
        dm,
        ProgramKind::SProc,
        q,
        p,
        l,
        Some(v),
        scales,
    ));
    Ok(prob)
}

fn m_of(dm: &DataMatrices) -> usize {
    dm.input_dim()
}

/// Builds the data program selected by `variant`. The model-based
/// variant is rejected here because it needs the system, not data.
pub fn build_data_program(
    variant: &ProgramVariant,
    dm: &DataMatrices,
) -> Result<SdpProblem, SynthesisError> {
    match variant {
        ProgramVariant::ModelBased => Err(SynthesisError::InvalidParameter(
            "the model-based program is built from the system, not from data".into(),
        )),
        ProgramVariant::Ideal => build_ideal(dm),
        ProgramVariant::Baseline => build_baseline(dm),
        ProgramVariant::Soft { alpha } => build_soft(dm, *alpha),
        ProgramVariant::SProc { mu, r, eta1 } => build_sproc(dm, *mu, r, *eta1),
    }
}

/// Solves a problem and decodes the result.
///
/// A backend-reported optimum is never trusted blindly: every LMI block
/// is re-checked to have scaled smallest eigenvalue at least
/// `-tol_feas` and every equality residual a backward error of at most
/// `tol_feas` at the returned point, downgrading lies (or numerically
/// hollow optima) to `NumericalFailure`. Both checks are relative to
/// the magnitude of the evaluated constraint — snapshot matrices can
/// carry entries of 1e4 and beyond, where an absolute slack would sit
/// below what double precision can even evaluate. On success the gain
/// is recovered as `K = U0 Q P⁻¹` (model-based: `K = Y P⁻¹`).
pub fn solve(
    problem: &SdpProblem,
    backend: &mut dyn SolverBackend,
    targets: &AccuracyTargets,
) -> SynthesisResult {
    let meta = problem.metadata.as_ref();
    let raw = match backend.solve(problem, targets) {
        Ok(raw) => raw,
        Err(err) => {
            log::warn!("solver backend failed: {err}");
            return SynthesisResult::unsolved(SolveStatus::NumericalFailure, meta);
        }
    };
    match raw.status {
        RawStatus::Infeasible => {
            return SynthesisResult::unsolved(SolveStatus::Infeasible, meta)
        }
        RawStatus::NumericalTrouble => {
            return SynthesisResult::unsolved(SolveStatus::NumericalFailure, meta)
        }
        RawStatus::Optimal => {}
    }
    if raw.x.len() != problem.num_scalars() {
        log::warn!(
            "backend returned {} scalars for a {}-scalar problem",
            raw.x.len(),
            problem.num_scalars()
        );
        return SynthesisResult::unsolved(SolveStatus::NumericalFailure, meta);
    }
    let eq_violation = problem.max_equality_backward_error(&raw.x);
    let min_eig = problem.min_scaled_psd_eigenvalue(&raw.x);
    if !(eq_violation <= targets.tol_feas) || !(min_eig >= -targets.tol_feas) {
        log::warn!(
            "backend claimed optimality but the point fails re-validation \
             (equality residual {eq_violation:.3e}, smallest block eigenvalue {min_eig:.3e})"
        );
        return SynthesisResult::unsolved(SolveStatus::NumericalFailure, meta);
    }

    let objective = problem.objective_value(&raw.x);
    let Some(meta) = meta else {
        return SynthesisResult {
            status: SolveStatus::Optimal,
            kind: None,
            gamma: Some(objective),
            objective: Some(objective),
            q: None,
            p: None,
            l: None,
            v: None,
            k: None,
            rank_condition: None,
        };
    };

    let p = problem.value_of(meta.p, &raw.x);
    let l = problem.value_of(meta.l, &raw.x);
    // Undo the column scaling baked into the stored trajectory-space
    // variables so every returned matrix lives in original coordinates.
    let scale = meta.col_scale.as_deref();
    let v = meta.v.map(|id| {
        let mut vv = problem.value_of(id, &raw.x);
        if let Some(s) = scale {
            for i in 0..vv.nrows() {
                for j in 0..vv.ncols() {
                    vv[(i, j)] /= s[i] * s[j];
                }
            }
        }
        vv
    });
    let (q, numerator) = match meta.kind {
        ProgramKind::ModelBased => {
            let y = problem.value_of(meta.y.expect("model-based decode has Y"), &raw.x);
            (None, y)
        }
        _ => {
            let mut qv = problem.value_of(meta.q.expect("data decode has Q"), &raw.x);
            if let Some(s) = scale {
                for (t, &st) in s.iter().enumerate() {
                    qv.row_mut(t).unscale_mut(st);
                }
            }
            let u0 = meta.u0.as_ref().expect("data decode has U0");
            let num = u0 * &qv;
            (Some(qv), num)
        }
    };
    // K = numerator * P^{-1}, via Kᵀ = P^{-1} numeratorᵀ (P symmetric).
    let k = match linalg::solve_spd(&p, &numerator.transpose()) {
        Some(kt) => kt.transpose(),
        None => {
            log::warn!("decoded P is numerically singular despite the P >= I constraint");
            return SynthesisResult::unsolved(SolveStatus::NumericalFailure, Some(meta));
        }
    };
    let gamma = match meta.kind {
        ProgramKind::ModelBased => {
            let wx = meta.wx.as_ref().expect("model-based decode has Wx");
            (wx * &p).trace() + l.trace()
        }
        _ => p.trace() + l.trace(),
    };
    SynthesisResult {
        status: SolveStatus::Optimal,
        kind: Some(meta.kind),
        gamma: Some(gamma),
        objective: Some(objective),
        q,
        p: Some(p),
        l: Some(l),
        v,
        k: Some(k),
        rank_condition: meta.rank_condition,
    }
}

/// Sweeps the s-procedure program over an ascending margin grid.
///
/// Returns the result for the smallest margin whose program is feasible
/// and — when a disturbance bound is supplied — whose data-only
/// noise-set certificate also passes; if no grid point certifies, falls
/// back to the smallest feasible margin. Grid points whose solve ends
/// in numerical failure are skipped like infeasible ones.
pub fn sproc_line_search(
    dm: &DataMatrices,
    mu: f64,
    r: &DMatrix<f64>,
    eta_grid: &[f64],
    bound: Option<&NoiseBound>,
    backend: &mut dyn SolverBackend,
    targets: &AccuracyTargets,
) -> Result<(SynthesisResult, f64), SynthesisError> {
    if eta_grid.is_empty() {
        return Err(SynthesisError::InvalidParameter(
            "margin grid must be nonempty".into(),
        ));
    }
    if eta_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(SynthesisError::InvalidParameter(
            "margin grid must be strictly ascending".into(),
        ));
    }
    if eta_grid[0] < 1.0 {
        return Err(SynthesisError::InvalidParameter(format!(
            "margin grid values must be at least 1, got {}",
            eta_grid[0]
        )));
    }
    let mut fallback: Option<(SynthesisResult, f64)> = None;
    for &eta1 in eta_grid {
        let prob = build_sproc(dm, mu, r, eta1)?;
        let res = solve(&prob, backend, targets);
        if !res.is_optimal() {
            continue;
        }
        match bound {
            None => return Ok((res, eta1)),
            Some(b) => {
                let certified =
                    crate::cert::data_only_check_34(&res, b, mu, r).unwrap_or(false);
                if certified {
                    return Ok((res, eta1));
                }
                if fallback.is_none() {
                    fallback = Some((res, eta1));
                }
            }
        }
    }
    fallback.ok_or(SynthesisError::AllInfeasible)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{
        build_data_matrices, gauss_input, gauss_vector, random_plant, simulate, NoiseKind,
        NoiseSpec,
    };
    use crate::lti::{h2_norm_squared, solve_dare};
    use crate::sdp::backend::{BackendError, ClarabelBackend, RawSolution};
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn targets() -> AccuracyTargets {
        AccuracyTargets::default()
    }

    fn scalar_sys(a: f64, b: f64) -> DiscreteLtiSystem {
        DiscreteLtiSystem::new(
            DMatrix::from_element(1, 1, a),
            DMatrix::from_element(1, 1, b),
        )
        .unwrap()
    }

    /// A noise-free experiment on a random controllable plant plus its
    /// closed-form optimum.
    fn noise_free_setup(seed: u64) -> (DiscreteLtiSystem, DataMatrices, DMatrix<f64>, f64) {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        loop {
            let plant = random_plant(&mut rng, 3, 1);
            let x0 = gauss_vector(&mut rng, 3, 1.0);
            let u = gauss_input(&mut rng, 1, 20);
            let Ok(sol) = solve_dare(&plant, &PerformanceWeights::unit(3, 1)) else {
                continue;
            };
            let Ok(traj) = simulate(&plant, &x0, &u, &NoiseSpec::none(), 0, 0) else {
                continue;
            };
            let dm = build_data_matrices(&traj);
            if !crate::data::rank_condition(&dm) {
                continue;
            }
            // Skip draws whose open-loop trajectory explodes: the tests
            // compare against pseudo-inverse references whose own
            // accuracy degrades with the snapshot condition number.
            if dm.x1.norm() > 1e5 {
                continue;
            }
            let h2 = h2_norm_squared(&plant, &sol.kopt).unwrap();
            return (plant, dm, sol.kopt, h2);
        }
    }

    #[test]
    fn model_based_zero_state_map() {
        let prob =
            build_model_based(&scalar_sys(0.0, 1.0), &PerformanceWeights::unit(1, 1)).unwrap();
        let res = solve(&prob, &mut ClarabelBackend::new(), &targets());
        assert!(res.is_optimal());
        assert_relative_eq!(res.gamma.unwrap(), 1.0, epsilon = 1e-5);
        assert!(res.k.unwrap().norm() <= 1e-4);
    }

    #[test]
    fn model_based_scalar_matches_riccati() {
        let sys = scalar_sys(0.5, 1.0);
        let w = PerformanceWeights::unit(1, 1);
        let sol = solve_dare(&sys, &w).unwrap();
        let prob = build_model_based(&sys, &w).unwrap();
        let res = solve(&prob, &mut ClarabelBackend::new(), &targets());
        assert!(res.is_optimal());
        assert_relative_eq!(res.gamma.unwrap(), sol.x.trace(), epsilon = 1e-4);
        assert_relative_eq!(res.k.unwrap()[(0, 0)], sol.kopt[(0, 0)], epsilon = 1e-4);
    }

    #[test]
    fn model_based_random_matches_h2_oracle() {
        let mut rng = ChaCha12Rng::seed_from_u64(101);
        let mut tested = 0;
        while tested < 5 {
            let plant = random_plant(&mut rng, 3, 1);
            let w = PerformanceWeights::unit(3, 1);
            let Ok(sol) = solve_dare(&plant, &w) else { continue };
            let h2 = h2_norm_squared(&plant, &sol.kopt).unwrap();
            let prob = build_model_based(&plant, &w).unwrap();
            let res = solve(&prob, &mut ClarabelBackend::new(), &targets());
            assert!(res.is_optimal());
            let gamma = res.gamma.unwrap();
            assert!((gamma - h2).abs() <= 1e-4 * h2, "gamma {gamma} vs h2 {h2}");
            tested += 1;
        }
    }

    #[test]
    fn ideal_noise_free_recovers_optimal_gain() {
        let (_, dm, kopt, h2) = noise_free_setup(7);
        let prob = build_ideal(&dm).unwrap();
        assert_eq!(prob.metadata.as_ref().unwrap().rank_condition, Some(true));
        let res = solve(&prob, &mut ClarabelBackend::new(), &targets());
        assert!(res.is_optimal());
        let k = res.k.as_ref().unwrap();
        assert!((k - &kopt).norm() <= 1e-3 * kopt.norm());
        assert!((res.gamma.unwrap() - h2).abs() <= 1e-4 * h2);
    }

    #[test]
    fn ideal_subtracts_recorded_disturbance() {
        let mut rng = ChaCha12Rng::seed_from_u64(31);
        let plant = random_plant(&mut rng, 3, 1);
        let sol = solve_dare(&plant, &PerformanceWeights::unit(3, 1)).unwrap();
        let x0 = gauss_vector(&mut rng, 3, 1.0);
        let u = gauss_input(&mut rng, 1, 20);
        let noise = NoiseSpec::new(NoiseKind::Wgn { sigma: 0.1 }, "ideal-noisy");
        let traj = simulate(&plant, &x0, &u, &noise, 3, 0).unwrap();
        let dm = build_data_matrices(&traj);
        let prob = build_ideal(&dm).unwrap();
        let res = solve(&prob, &mut ClarabelBackend::new(), &targets());
        assert!(res.is_optimal());
        let k = res.k.as_ref().unwrap();
        assert!(
            (k - &sol.kopt).norm() <= 1e-3 * sol.kopt.norm(),
            "gain gap {}",
            (k - &sol.kopt).norm() / sol.kopt.norm()
        );
    }

    #[test]
    fn ideal_requires_disturbance_snapshots() {
        let (_, dm, _, _) = noise_free_setup(8);
        let stripped = dm.without_d0();
        assert!(matches!(
            build_ideal(&stripped).unwrap_err(),
            SynthesisError::MissingD0
        ));
    }

    #[test]
    fn programs_agree_on_noise_free_data() {
        let (plant, dm, kopt, h2) = noise_free_setup(9);
        let w = PerformanceWeights::unit(3, 1);
        let mut backend = ClarabelBackend::new();
        // Model-based, disturbance-corrected, and plain data-driven
        // synthesis are exactly equivalent on clean snapshots.
        let gammas: Vec<f64> = [
            build_model_based(&plant, &w).unwrap(),
            build_ideal(&dm).unwrap(),
            build_baseline(&dm).unwrap(),
        ]
        .iter()
        .map(|prob| {
            let res = solve(prob, &mut backend, &targets());
            assert!(res.is_optimal());
            res.gamma.unwrap()
        })
        .collect();
        for gamma in &gammas {
            assert!(
                (gamma - h2).abs() <= 1e-4 * h2,
                "gamma {gamma} deviates from the oracle {h2}"
            );
        }
        // The regularized program is not in that equivalence class: its
        // slack penalty prices the trajectory-space representation of
        // the gain even when the data is exact, tilting the optimum
        // slightly off the certainty-equivalent one. It must still land
        // in a close neighbourhood.
        let res = solve(&build_soft(&dm, 1.0).unwrap(), &mut backend, &targets());
        assert!(res.is_optimal());
        let k = res.k.as_ref().unwrap();
        assert!(
            (k - &kopt).norm() <= 5e-2 * kopt.norm(),
            "regularized gain gap {}",
            (k - &kopt).norm() / kopt.norm()
        );
        let gamma = res.gamma.unwrap();
        assert!(
            (gamma - h2).abs() <= 2e-3 * h2,
            "regularized gamma {gamma} strays from the oracle {h2}"
        );
    }

    #[test]
    fn soft_slack_matches_minimum_norm_reference() {
        let (plant, dm, kopt, _) = noise_free_setup(12);
        let prob = build_soft(&dm, 1.0).unwrap();
        let res = solve(&prob, &mut ClarabelBackend::new(), &targets());
        assert!(res.is_optimal());
        let k = res.k.as_ref().unwrap();
        assert!((k - &kopt).norm() <= 5e-2 * kopt.norm());

        // With exact data the slack settles near G P_o Gᵀ for the
        // minimum-norm trajectory-space representation G of the optimal
        // gain: Q's component outside range(W0ᵀ) only ever adds to the
        // penalty, so the optimizer zeroes it. The match is approximate
        // because the penalty also nudges the gain itself.
        let mut w0 = DMatrix::zeros(4, 20);
        w0.view_mut((0, 0), (1, 20)).copy_from(&dm.u0);
        w0.view_mut((1, 0), (3, 20)).copy_from(&dm.x0);
        let go = crate::cert::minimum_norm_go(&w0, &kopt).unwrap();
        let acl = plant.closed_loop(&kopt);
        let po = crate::lti::controllability_gramian(&acl).unwrap();
        let v_ref = &go * &po * go.transpose();
        let v = res.v.as_ref().unwrap();
        assert!(
            (v.trace() - v_ref.trace()).abs() <= 0.1 * v_ref.trace(),
            "trace(V) {} vs reference {}",
            v.trace(),
            v_ref.trace()
        );
    }

    #[test]
    fn soft_gamma_excludes_the_slack_penalty() {
        let mut rng = ChaCha12Rng::seed_from_u64(41);
        let plant = random_plant(&mut rng, 3, 1);
        let x0 = gauss_vector(&mut rng, 3, 1.0);
        let u = gauss_input(&mut rng, 1, 20);
        let noise = NoiseSpec::new(NoiseKind::Wgn { sigma: 0.05 }, "soft-gamma");
        let traj = simulate(&plant, &x0, &u, &noise, 4, 0).unwrap();
        let dm = build_data_matrices(&traj).without_d0();
        let alpha = 10.0;
        let prob = build_soft(&dm, alpha).unwrap();
        let res = solve(&prob, &mut ClarabelBackend::new(), &targets());
        assert!(res.is_optimal());
        let gamma = res.gamma.unwrap();
        let p = res.p.as_ref().unwrap();
        let l = res.l.as_ref().unwrap();
        let v = res.v.as_ref().unwrap();
        assert_relative_eq!(gamma, p.trace() + l.trace(), epsilon = 1e-9);
        assert_relative_eq!(
            res.objective.unwrap(),
            gamma + alpha * v.trace(),
            epsilon = 1e-6 * (1.0 + gamma)
        );
        assert!(v.trace() > 0.0);
    }

    #[test]
    fn soft_rejects_small_alpha() {
        let (_, dm, _, _) = noise_free_setup(13);
        assert!(matches!(
            build_soft(&dm, 0.5).unwrap_err(),
            SynthesisError::InvalidParameter(_)
        ));
    }

    #[test]
    fn sproc_small_scale_stays_near_optimal() {
        // The robust program hedges against a whole disturbance set, so
        // even a vanishing set radius leaves a conservatism gap — the
        // returned gain stabilizes and its cost tracks the oracle
        // loosely rather than matching it.
        let (plant, dm, _, h2) = noise_free_setup(14);
        let prob = build_sproc(&dm, 1e-6, &dm.x1, 1.0).unwrap();
        let res = solve(&prob, &mut ClarabelBackend::new(), &targets());
        assert!(res.is_optimal());
        let k = res.k.as_ref().unwrap();
        assert!(crate::lti::is_schur(&plant.closed_loop(k)));
        let achieved = crate::lti::h2_norm_squared(&plant, k).unwrap();
        assert!(
            (achieved - h2).abs() <= 0.25 * h2,
            "achieved cost {achieved} vs oracle {h2}"
        );
        // The certified level upper-bounds the realized cost.
        assert!(achieved <= res.gamma.unwrap() * (1.0 + 1e-6));
    }

    #[test]
    fn sproc_validates_parameters() {
        let (_, dm, _, _) = noise_free_setup(15);
        assert!(matches!(
            build_sproc(&dm, 0.0, &dm.x1, 1.0).unwrap_err(),
            SynthesisError::InvalidParameter(_)
        ));
        assert!(matches!(
            build_sproc(&dm, 0.1, &dm.x1, 0.9).unwrap_err(),
            SynthesisError::InvalidParameter(_)
        ));
        let bad_shape = DMatrix::zeros(2, 20);
        assert!(matches!(
            build_sproc(&dm, 0.1, &bad_shape, 1.0).unwrap_err(),
            SynthesisError::Shape(_)
        ));
        let rank_deficient = DMatrix::zeros(3, 20);
        assert!(matches!(
            build_sproc(&dm, 0.1, &rank_deficient, 1.0).unwrap_err(),
            SynthesisError::InvalidParameter(_)
        ));
    }

    #[test]
    fn stable_system_admits_the_zero_gain_point() {
        // For a Schur plant and noisy (hence full-row-rank) snapshots,
        // P = I, L = 0, and Q mapping the stacked data to [0; I; 0] is
        // feasible for the baseline program — the program can always
        // fall back to doing nothing.
        let mut rng = ChaCha12Rng::seed_from_u64(77);
        let raw = random_plant(&mut rng, 3, 1);
        let rho = crate::lti::spectral_radius(raw.a());
        let a = raw.a() * (0.8 / rho);
        let plant = DiscreteLtiSystem::new(a, raw.b().clone()).unwrap();
        let x0 = gauss_vector(&mut rng, 3, 1.0);
        let u = gauss_input(&mut rng, 1, 20);
        let noise = NoiseSpec::new(NoiseKind::Wgn { sigma: 0.5 }, "zero-gain");
        let traj = simulate(&plant, &x0, &u, &noise, 6, 0).unwrap();
        let dm = build_data_matrices(&traj).without_d0();

        let mut stacked = DMatrix::zeros(7, 20);
        stacked.view_mut((0, 0), (1, 20)).copy_from(&dm.u0);
        stacked.view_mut((1, 0), (3, 20)).copy_from(&dm.x0);
        stacked.view_mut((4, 0), (3, 20)).copy_from(&dm.x1);
        assert_eq!(crate::linalg::numeric_rank(&stacked), 7);
        let mut rhs = DMatrix::zeros(7, 3);
        rhs.view_mut((1, 0), (3, 3))
            .copy_from(&DMatrix::identity(3, 3));
        let q_point = crate::linalg::pseudo_inverse(&stacked) * &rhs;
        assert!((&stacked * &q_point - &rhs).norm() <= 1e-8);

        let prob = build_baseline(&dm).unwrap();
        let meta = prob.metadata.as_ref().unwrap();
        // The stored variable is the column-scaled Q.
        let mut q_stored = q_point.clone();
        for (t, &st) in meta.col_scale.as_ref().unwrap().iter().enumerate() {
            q_stored.row_mut(t).scale_mut(st);
        }
        let mut x = vec![0.0; prob.num_scalars()];
        prob.pack_value(meta.q.unwrap(), &q_stored, &mut x);
        prob.pack_value(meta.p, &DMatrix::identity(3, 3), &mut x);
        prob.pack_value(meta.l, &DMatrix::zeros(1, 1), &mut x);
        assert!(prob.max_equality_violation(&x) <= 1e-8);
        assert!(prob.min_psd_eigenvalue(&x) >= -1e-8);
    }

    #[test]
    fn decoded_gain_is_consistent_with_its_parametrization() {
        let mut rng = ChaCha12Rng::seed_from_u64(55);
        let plant = random_plant(&mut rng, 3, 1);
        let x0 = gauss_vector(&mut rng, 3, 1.0);
        let u = gauss_input(&mut rng, 1, 20);
        let noise = NoiseSpec::new(NoiseKind::Wgn { sigma: 0.05 }, "consistency");
        let traj = simulate(&plant, &x0, &u, &noise, 8, 0).unwrap();
        let dm = build_data_matrices(&traj).without_d0();
        let prob = build_baseline(&dm).unwrap();
        let res = solve(&prob, &mut ClarabelBackend::new(), &targets());
        assert!(res.is_optimal());
        let (k, p, q) = (
            res.k.as_ref().unwrap(),
            res.p.as_ref().unwrap(),
            res.q.as_ref().unwrap(),
        );
        // U0 Q = K P by construction of the decode.
        let residual = (&dm.u0 * q - k * p).norm();
        assert!(residual <= 1e-6 * (1.0 + k.norm() * p.norm()));

        // The block form certifies the quadratic contraction inequality.
        let p_inv = crate::linalg::solve_spd(p, &DMatrix::identity(3, 3)).unwrap();
        let m_mat = q * &p_inv * q.transpose();
        let residual_q = &dm.x1 * &m_mat * dm.x1.transpose() - p + DMatrix::identity(3, 3);
        assert!(crate::linalg::eig_max_sym(&crate::linalg::symmetrize(&residual_q)) <= 1e-6);
    }

    #[test]
    fn rank_deficient_data_is_flagged() {
        // Free decay of a stable scalar plant: no input excitation.
        let plant = scalar_sys(0.5, 1.0);
        let traj = simulate(
            &plant,
            &DMatrix::from_element(1, 1, 1.0),
            &DMatrix::zeros(1, 10),
            &NoiseSpec::none(),
            0,
            0,
        )
        .unwrap();
        let dm = build_data_matrices(&traj);
        let prob = build_baseline(&dm).unwrap();
        assert_eq!(prob.metadata.as_ref().unwrap().rank_condition, Some(false));
        let res = solve(&prob, &mut ClarabelBackend::new(), &targets());
        assert_eq!(res.rank_condition, Some(false));
        if res.is_optimal() {
            // Without input excitation the program can only return the
            // zero gain.
            assert!(res.k.unwrap().norm() <= 1e-5);
        }
    }

    #[test]
    fn hand_built_contradiction_reports_infeasible() {
        let mut prob = SdpProblem::new();
        let v = prob.add_sym_var("x", 1).unwrap();
        let ev = prob.var_expr(v);
        prob.add_psd(ev.clone()).unwrap();
        prob.add_equality(ev.shift(&DMatrix::from_element(1, 1, 1.0)));
        let res = solve(&prob, &mut ClarabelBackend::new(), &targets());
        assert_eq!(res.status, SolveStatus::Infeasible);
        assert!(res.gamma.is_none());
        assert!(res.k.is_none());
    }

    /// A backend that reports whatever it is told, used to verify the
    /// independent feasibility re-check.
    struct MockBackend {
        status: RawStatus,
    }

    impl SolverBackend for MockBackend {
        fn solve(
            &mut self,
            problem: &SdpProblem,
            _targets: &AccuracyTargets,
        ) -> Result<RawSolution, BackendError> {
            Ok(RawSolution {
                status: self.status,
                x: vec![0.0; problem.num_scalars()],
                objective: 0.0,
            })
        }
    }

    #[test]
    fn lying_backend_is_caught_by_the_recheck() {
        let (_, dm, _, _) = noise_free_setup(16);
        let prob = build_baseline(&dm).unwrap();
        // The all-zeros point violates P >= I, so a claimed optimum must
        // be downgraded.
        let mut liar = MockBackend {
            status: RawStatus::Optimal,
        };
        let res = solve(&prob, &mut liar, &targets());
        assert_eq!(res.status, SolveStatus::NumericalFailure);

        let mut trouble = MockBackend {
            status: RawStatus::NumericalTrouble,
        };
        let res = solve(&prob, &mut trouble, &targets());
        assert_eq!(res.status, SolveStatus::NumericalFailure);
    }

    #[test]
    fn line_search_noise_free_accepts_unit_margin() {
        let (plant, dm, _, h2) = noise_free_setup(17);
        let mut backend = ClarabelBackend::new();
        let (res, eta1) =
            sproc_line_search(&dm, 1e-6, &dm.x1, &[1.0], None, &mut backend, &targets())
                .unwrap();
        assert_eq!(eta1, 1.0);
        let k = res.k.as_ref().unwrap();
        assert!(crate::lti::is_schur(&plant.closed_loop(k)));
        let achieved = crate::lti::h2_norm_squared(&plant, k).unwrap();
        assert!(
            (achieved - h2).abs() <= 0.25 * h2,
            "achieved cost {achieved} vs oracle {h2}"
        );
    }

    #[test]
    fn line_search_validates_grid() {
        let (_, dm, _, _) = noise_free_setup(18);
        let mut backend = ClarabelBackend::new();
        for grid in [&[][..], &[0.5][..], &[2.0, 1.5][..]] {
            assert!(matches!(
                sproc_line_search(&dm, 1e-6, &dm.x1, grid, None, &mut backend, &targets())
                    .unwrap_err(),
                SynthesisError::InvalidParameter(_)
            ));
        }
    }

    #[test]
    fn line_search_reports_when_everything_is_infeasible() {
        // Noise-free data from an unstable plant: the augmented block
        // cannot absorb a huge noise-set term, at any margin.
        let (_, dm, _, _) = noise_free_setup(19);
        let mut backend = ClarabelBackend::new();
        let err = sproc_line_search(
            &dm,
            1e3,
            &dm.x1,
            &[1.0, 2.0],
            None,
            &mut backend,
            &targets(),
        )
        .unwrap_err();
        assert!(matches!(err, SynthesisError::AllInfeasible));
    }
}
