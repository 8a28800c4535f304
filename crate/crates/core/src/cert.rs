//! A-posteriori certificates for controllers synthesized from noisy
//! data.
//!
//! The solver returns a gain together with a claimed performance level
//! `gamma`. The functions here turn that claim into quantified
//! statements about the true closed loop: a multiplicative factor
//! `eta1` such that the true H2 cost is at most `eta1 * gamma`, a
//! factor `eta2` bounding how far `gamma` sits above the noise-free
//! optimum, and an additive term `eta3` accounting for the slack
//! penalty of the soft program. Each factor comes in two flavours:
//! an oracle version computed from the recorded disturbance, and a
//! data-only version computed from a disturbance norm bound alone.
//!
//! All factors derive from one spectral statistic: for a trajectory
//! representation with `M = Q P⁻¹ Qᵀ`,
//!
//! ```text
//! psi(M) = D0 M D0ᵀ − X1 M D0ᵀ − D0 M X1ᵀ
//! ```
//!
//! whose largest eigenvalue measures how much the disturbance distorts
//! the contraction inequality the program actually certified.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg;
use crate::sdp::SynthesisResult;

#[derive(Debug, Error)]
pub enum CertError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("certificate failed: spectral statistic {0} is not below 1")]
    CertificateFailure(f64),
    #[error("solution carries no noise slack variable")]
    MissingV,
    #[error("stacked data matrix does not determine the gain")]
    RankDeficient,
}

/// How a disturbance norm bound was derived.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaRule {
    /// White-noise rule `delta = 1.5 * sigma * sqrt(T)`.
    Wgn,
    /// Amplitude rule `delta = kappa_bar * sqrt(T * n)` for bias or
    /// sinusoidal channel disturbances.
    Bias,
    /// Caller-supplied bound.
    User,
}

/// A bound `‖D0‖ ≤ delta` on the spectral norm of the disturbance
/// snapshots, tagged with the rule that produced it.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct NoiseBound {
    pub delta: f64,
    pub rule: DeltaRule,
}

impl NoiseBound {
    pub fn wgn(sigma: f64, horizon: usize) -> Self {
        Self {
            delta: 1.5 * sigma * (horizon as f64).sqrt(),
            rule: DeltaRule::Wgn,
        }
    }

    pub fn bias(kappa_bar: f64, horizon: usize, state_dim: usize) -> Self {
        Self {
            delta: kappa_bar * ((horizon * state_dim) as f64).sqrt(),
            rule: DeltaRule::Bias,
        }
    }

    pub fn user(delta: f64) -> Self {
        Self {
            delta,
            rule: DeltaRule::User,
        }
    }

    /// Smallest scale `mu` such that the ellipsoidal set
    /// `{D : D Dᵀ ⪯ mu² R Rᵀ}` contains every disturbance with
    /// `‖D‖ ≤ delta`, i.e. `mu = delta / sqrt(λ_min(R Rᵀ))`.
    pub fn sproc_scale(&self, r: &DMatrix<f64>) -> f64 {
        let lam = linalg::eig_min_sym(&(r * r.transpose()));
        (self.delta * self.delta / lam.max(1e-18)).sqrt()
    }
}

/// The disturbance statistic `D0 M D0ᵀ − X1 M D0ᵀ − D0 M X1ᵀ`,
/// symmetrized against floating-point drift.
pub fn psi(m: &DMatrix<f64>, x1: &DMatrix<f64>, d0: &DMatrix<f64>) -> DMatrix<f64> {
    assert_eq!(m.nrows(), m.ncols(), "M must be square");
    assert_eq!(x1.ncols(), m.nrows(), "X1 and M must share the horizon");
    assert_eq!(x1.shape(), d0.shape(), "X1 and D0 must share shape");
    let md = m * d0.transpose();
    let raw = d0 * &md - x1 * &md - d0 * (m * x1.transpose());
    linalg::symmetrize(&raw)
}

/// The multiplicative factor certified by a spectral statistic
/// `lambda`: 1 when the statistic is nonpositive, `1/(1-lambda)` when
/// it is below one, and a failure otherwise.
pub fn eta_from_lambda(lambda: f64) -> Result<f64, CertError> {
    if lambda <= 0.0 {
        Ok(1.0)
    } else if lambda < 1.0 {
        Ok(1.0 / (1.0 - lambda))
    } else {
        Err(CertError::CertificateFailure(lambda))
    }
}

fn solution_m(res: &SynthesisResult) -> Result<DMatrix<f64>, CertError> {
    let q = res
        .q
        .as_ref()
        .ok_or_else(|| CertError::ShapeMismatch("solution has no trajectory variable".into()))?;
    let p = res
        .p
        .as_ref()
        .ok_or_else(|| CertError::ShapeMismatch("solution has no shape variable".into()))?;
    let p_inv_qt = linalg::solve_spd(p, &q.transpose())
        .ok_or_else(|| CertError::ShapeMismatch("solution shape variable is singular".into()))?;
    Ok(linalg::symmetrize(&(q * p_inv_qt)))
}

/// Oracle suboptimality factor of a returned solution: the true
/// closed-loop H2 cost is at most `eta1 * gamma` whenever the statistic
/// stays below one.
pub fn eta1_from_solution(
    res: &SynthesisResult,
    x1: &DMatrix<f64>,
    d0: &DMatrix<f64>,
) -> Result<f64, CertError> {
    let m = solution_m(res)?;
    if x1.ncols() != m.nrows() || d0.shape() != x1.shape() {
        return Err(CertError::ShapeMismatch(
            "snapshots do not match the solution horizon".into(),
        ));
    }
    eta_from_lambda(linalg::eig_max_sym(&psi(&m, x1, d0)))
}

/// Oracle tightness factor: evaluates the statistic at a noise-free
/// optimal trajectory representation `(Q_o, P_o)` with the sign
/// flipped, bounding how far the program's optimum can sit above the
/// noise-free one.
pub fn eta2_from_optimal(
    qo: &DMatrix<f64>,
    po: &DMatrix<f64>,
    x1: &DMatrix<f64>,
    d0: &DMatrix<f64>,
) -> Result<f64, CertError> {
    if qo.ncols() != po.nrows() || po.nrows() != po.ncols() {
        return Err(CertError::ShapeMismatch(
            "reference trajectory representation has inconsistent shapes".into(),
        ));
    }
    if x1.ncols() != qo.nrows() || d0.shape() != x1.shape() {
        return Err(CertError::ShapeMismatch(
            "snapshots do not match the reference horizon".into(),
        ));
    }
    let po_inv_qt = linalg::solve_spd(po, &qo.transpose())
        .ok_or_else(|| CertError::ShapeMismatch("reference shape matrix is singular".into()))?;
    let mo = linalg::symmetrize(&(qo * po_inv_qt));
    eta_from_lambda(linalg::eig_max_sym(&-psi(&mo, x1, d0)))
}

/// Data-only upper bound on the disturbance statistic of a solution:
/// for every `D0` with `‖D0‖ ≤ delta`,
/// `λ_max(psi(M)) ≤ delta²‖M‖ + 2 delta ‖X1 M‖`.
pub fn data_only_margin_33(
    res: &SynthesisResult,
    x1: &DMatrix<f64>,
    bound: &NoiseBound,
) -> Result<f64, CertError> {
    let m = solution_m(res)?;
    if x1.ncols() != m.nrows() {
        return Err(CertError::ShapeMismatch(
            "snapshots do not match the solution horizon".into(),
        ));
    }
    let delta = bound.delta;
    Ok(delta * delta * linalg::spectral_norm(&m) + 2.0 * delta * linalg::spectral_norm(&(x1 * &m)))
}

/// Data-only stability certificate: true when the margin statistic
/// leaves room for the requested factor, i.e. when every disturbance
/// within the bound keeps the true H2 cost below `eta1 * gamma`.
/// Returns false, never an error, when the solution cannot be checked.
pub fn data_only_check_33(
    res: &SynthesisResult,
    x1: &DMatrix<f64>,
    bound: &NoiseBound,
    eta1: f64,
) -> bool {
    match data_only_margin_33(res, x1, bound) {
        Ok(s) => s <= 1.0 - 1.0 / eta1,
        Err(_) => false,
    }
}

/// Data-only noise-set certificate for the s-procedure program: true
/// when `mu² R V Rᵀ ⪰ delta² ‖V‖ I`, which guarantees
/// `D0 V D0ᵀ ⪯ mu² R V Rᵀ` for every disturbance within the bound.
pub fn data_only_check_34(
    res: &SynthesisResult,
    bound: &NoiseBound,
    mu: f64,
    r: &DMatrix<f64>,
) -> Result<bool, CertError> {
    let v = res.v.as_ref().ok_or(CertError::MissingV)?;
    if r.ncols() != v.nrows() {
        return Err(CertError::ShapeMismatch(
            "noise-set shape matrix does not match the slack horizon".into(),
        ));
    }
    let lhs = linalg::symmetrize(&(r * v * r.transpose())).scale(mu * mu);
    let shift = bound.delta * bound.delta * linalg::spectral_norm(v);
    let gap = lhs - DMatrix::from_diagonal_element(r.nrows(), r.nrows(), shift);
    Ok(linalg::eig_min_sym(&gap) >= 0.0)
}

/// Minimum-Frobenius-norm trajectory representation of a gain: the
/// smallest `G` with `W0 G = [K; I]` for stacked input/state snapshots
/// `W0 = [U0; X0]`. Fails when the snapshots do not span the row space
/// needed to represent the gain.
pub fn minimum_norm_go(w0: &DMatrix<f64>, k: &DMatrix<f64>) -> Result<DMatrix<f64>, CertError> {
    let (m, n) = k.shape();
    if w0.nrows() != m + n {
        return Err(CertError::ShapeMismatch(format!(
            "stacked snapshots have {} rows, expected {}",
            w0.nrows(),
            m + n
        )));
    }
    if linalg::numeric_rank(w0) < m + n {
        return Err(CertError::RankDeficient);
    }
    let mut rhs = DMatrix::zeros(m + n, n);
    rhs.view_mut((0, 0), (m, n)).copy_from(k);
    rhs.view_mut((m, 0), (n, n))
        .copy_from(&DMatrix::identity(n, n));
    let go = linalg::pseudo_inverse(w0) * &rhs;
    let residual = (w0 * &go - rhs).norm();
    if residual > 1e-10 * (1.0 + k.norm()) {
        return Err(CertError::RankDeficient);
    }
    Ok(go)
}

/// Whether a report was assembled with access to the recorded
/// disturbance (oracle) or from a norm bound only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertMode {
    DataOnly,
    Oracle,
}

/// Everything assemble_report may draw on beyond the solution itself.
/// All fields except the state snapshots are optional; the report
/// simply leaves unfillable entries empty.
pub struct CertificateContext<'a> {
    pub x1: &'a DMatrix<f64>,
    /// Recorded disturbance snapshots (oracle access).
    pub d0: Option<&'a DMatrix<f64>>,
    /// Disturbance norm bound for the data-only checks.
    pub bound: Option<&'a NoiseBound>,
    /// Noise-set parameters of an s-procedure solve.
    pub mu_r: Option<(f64, &'a DMatrix<f64>)>,
    /// Noise-free optimal trajectory representation `(Q_o, P_o)`.
    pub ideal: Option<(&'a DMatrix<f64>, &'a DMatrix<f64>)>,
    /// Noise-free optimal H2 cost.
    pub h2_opt: Option<f64>,
    /// Slack penalty weight of a soft solve.
    pub alpha: Option<f64>,
}

/// Certified claims about one solution, with every field optional:
/// an entry is present exactly when the available context allows the
/// corresponding certificate to be evaluated and it holds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub mode: CertMode,
    /// Largest eigenvalue of the oracle disturbance statistic.
    pub psi_bar_lambda_max: Option<f64>,
    pub eta1: Option<f64>,
    pub eta2: Option<f64>,
    pub eta3: Option<f64>,
    pub data_check_33: Option<bool>,
    pub data_check_34: Option<bool>,
    /// Certified upper bound on the true closed-loop H2 cost.
    pub performance_bound: Option<f64>,
    /// Certified bound on the relative distance to the noise-free
    /// optimum, for the programs that admit one.
    pub relative_error_bound: Option<f64>,
}

/// Evaluates every certificate the context supports and collects the
/// results.
///
/// Guarantees: `eta1` is present only when the oracle statistic was
/// computed and stayed below one; `eta3` is present only when `eta1`
/// and `eta2` are; in data-only mode `eta1` stays empty and the
/// performance bound falls back to the tightest factor admitted by the
/// margin statistic.
pub fn assemble_report(res: &SynthesisResult, ctx: &CertificateContext) -> CertificateReport {
    use crate::sdp::ProgramKind;

    let mode = if ctx.d0.is_some() {
        CertMode::Oracle
    } else {
        CertMode::DataOnly
    };
    let mut report = CertificateReport {
        mode,
        psi_bar_lambda_max: None,
        eta1: None,
        eta2: None,
        eta3: None,
        data_check_33: None,
        data_check_34: None,
        performance_bound: None,
        relative_error_bound: None,
    };
    if !res.is_optimal() {
        return report;
    }

    let m_bar = solution_m(res).ok();
    if let (Some(m), Some(d0)) = (&m_bar, ctx.d0) {
        if ctx.x1.ncols() == m.nrows() && d0.shape() == ctx.x1.shape() {
            let lambda = linalg::eig_max_sym(&psi(m, ctx.x1, d0));
            report.psi_bar_lambda_max = Some(lambda);
            report.eta1 = eta_from_lambda(lambda).ok();
        }
    }
    if let (Some((qo, po)), Some(d0)) = (ctx.ideal, ctx.d0) {
        report.eta2 = eta2_from_optimal(qo, po, ctx.x1, d0).ok();
    }
    if res.kind == Some(ProgramKind::Soft) {
        if let (Some(eta1), Some(eta2), Some((qo, po)), Some(h2_opt)) =
            (report.eta1, report.eta2, ctx.ideal, ctx.h2_opt)
        {
            if let Some(po_inv_qt) = linalg::solve_spd(po, &qo.transpose()) {
                let trace_vo = (qo * po_inv_qt).trace();
                let alpha = ctx.alpha.unwrap_or(1.0);
                if h2_opt > 0.0 {
                    report.eta3 = Some(eta1 * eta2 * alpha * trace_vo / h2_opt);
                }
            }
        }
    }

    let mut margin = None;
    if let Some(bound) = ctx.bound {
        if let Ok(s) = data_only_margin_33(res, ctx.x1, bound) {
            margin = Some(s);
            report.data_check_33 = Some(s < 1.0);
        }
        if let Some((mu, r)) = ctx.mu_r {
            report.data_check_34 = data_only_check_34(res, bound, mu, r).ok();
        }
    }

    if let Some(gamma) = res.gamma {
        report.performance_bound = match mode {
            CertMode::Oracle => report.eta1.map(|e| e * gamma),
            CertMode::DataOnly => margin
                .filter(|s| *s < 1.0)
                .map(|s| gamma / (1.0 - s)),
        };
    }

    report.relative_error_bound = match res.kind {
        Some(ProgramKind::Baseline) => match (report.eta1, report.eta2) {
            (Some(e1), Some(e2)) => Some(e1 * e2 - 1.0),
            _ => None,
        },
        Some(ProgramKind::Soft) => match (report.eta1, report.eta2, report.eta3) {
            (Some(e1), Some(e2), Some(e3)) => Some(e1 * e2 - 1.0 + e3),
            _ => None,
        },
        _ => None,
    };
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{
        build_data_matrices, gauss_input, gauss_vector, random_plant, simulate, NoiseKind,
        NoiseSpec,
    };
    use crate::lti::{
        controllability_gramian, h2_norm_squared, solve_dare, DiscreteLtiSystem,
        PerformanceWeights,
    };
    use crate::sdp::{
        build_baseline, build_soft, solve, AccuracyTargets, ClarabelBackend, SolveStatus,
        SynthesisResult,
    };
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn stacked_w0(dm: &crate::data::DataMatrices) -> DMatrix<f64> {
        let (m, n, t) = (dm.input_dim(), dm.state_dim(), dm.horizon());
        let mut w0 = DMatrix::zeros(m + n, t);
        w0.view_mut((0, 0), (m, t)).copy_from(&dm.u0);
        w0.view_mut((m, 0), (n, t)).copy_from(&dm.x0);
        w0
    }

    /// Noise-free optimal trajectory representation plus the optimum
    /// itself, for oracle certificates.
    fn oracle_reference(
        plant: &DiscreteLtiSystem,
        dm: &crate::data::DataMatrices,
    ) -> (DMatrix<f64>, DMatrix<f64>, f64) {
        let sol = solve_dare(plant, &PerformanceWeights::unit(plant.state_dim(), plant.input_dim()))
            .unwrap();
        let go = minimum_norm_go(&stacked_w0(dm), &sol.kopt).unwrap();
        let po = controllability_gramian(&plant.closed_loop(&sol.kopt)).unwrap();
        let qo = &go * &po;
        let h2 = h2_norm_squared(plant, &sol.kopt).unwrap();
        (qo, po, h2)
    }

    fn noisy_setup(
        seed: u64,
        sigma: f64,
    ) -> (DiscreteLtiSystem, crate::data::DataMatrices) {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        loop {
            let plant = random_plant(&mut rng, 3, 1);
            if solve_dare(&plant, &PerformanceWeights::unit(3, 1)).is_err() {
                continue;
            }
            let x0 = gauss_vector(&mut rng, 3, 1.0);
            let u = gauss_input(&mut rng, 1, 20);
            let noise = NoiseSpec::new(NoiseKind::Wgn { sigma }, "cert-tests");
            let Ok(traj) = simulate(&plant, &x0, &u, &noise, seed, 0) else {
                continue;
            };
            let dm = build_data_matrices(&traj);
            if crate::data::rank_condition(&dm) {
                return (plant, dm);
            }
        }
    }

    #[test]
    fn scalar_statistic_matches_hand_expansion() {
        let (m, x, d) = (0.7, 1.3, 0.2);
        let out = psi(
            &DMatrix::from_element(1, 1, m),
            &DMatrix::from_element(1, 1, x),
            &DMatrix::from_element(1, 1, d),
        );
        assert_relative_eq!(out[(0, 0)], m * d * d - 2.0 * m * x * d, epsilon = 1e-14);
    }

    #[test]
    fn factor_algebra() {
        assert_eq!(eta_from_lambda(-1.0).unwrap(), 1.0);
        assert_eq!(eta_from_lambda(0.0).unwrap(), 1.0);
        assert_relative_eq!(eta_from_lambda(0.5).unwrap(), 2.0);
        assert_relative_eq!(eta_from_lambda(0.75).unwrap(), 4.0);
        assert!(matches!(
            eta_from_lambda(1.0).unwrap_err(),
            CertError::CertificateFailure(_)
        ));
        assert!(matches!(
            eta_from_lambda(2.0).unwrap_err(),
            CertError::CertificateFailure(l) if l == 2.0
        ));
    }

    #[test]
    fn zero_disturbance_gives_unit_factors() {
        let (plant, dm) = noisy_setup(3, 0.0);
        let prob = build_baseline(&dm).unwrap();
        let res = solve(&prob, &mut ClarabelBackend::new(), &AccuracyTargets::default());
        assert!(res.is_optimal());
        let zeros = DMatrix::zeros(3, 20);
        assert_relative_eq!(eta1_from_solution(&res, &dm.x1, &zeros).unwrap(), 1.0);
        let (qo, po, h2) = oracle_reference(&plant, &dm);
        assert_relative_eq!(eta2_from_optimal(&qo, &po, &dm.x1, &zeros).unwrap(), 1.0);

        let ctx = CertificateContext {
            x1: &dm.x1,
            d0: Some(&zeros),
            bound: None,
            mu_r: None,
            ideal: Some((&qo, &po)),
            h2_opt: Some(h2),
            alpha: None,
        };
        let report = assemble_report(&res, &ctx);
        assert_eq!(report.mode, CertMode::Oracle);
        assert_eq!(report.eta1, Some(1.0));
        assert_eq!(report.eta2, Some(1.0));
        assert_eq!(report.relative_error_bound, Some(0.0));
        assert_relative_eq!(
            report.performance_bound.unwrap(),
            res.gamma.unwrap(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn margin_statistic_dominates_the_oracle_one() {
        // Whenever the disturbance respects the bound, the data-only
        // margin upper-bounds the oracle eigenvalue, so a passing
        // data-only check implies the oracle factor exists.
        let mut checked = 0;
        for seed in 0..12u64 {
            let (_, dm) = noisy_setup(100 + seed, 0.05);
            let d0 = dm.d0.clone().unwrap();
            let bound = NoiseBound::wgn(0.05, 20);
            if crate::linalg::spectral_norm(&d0) > bound.delta {
                continue;
            }
            let prob = build_baseline(&dm.without_d0()).unwrap();
            let res =
                solve(&prob, &mut ClarabelBackend::new(), &AccuracyTargets::default());
            if !res.is_optimal() {
                continue;
            }
            let s = data_only_margin_33(&res, &dm.x1, &bound).unwrap();
            let m = solution_m(&res).unwrap();
            let lambda = crate::linalg::eig_max_sym(&psi(&m, &dm.x1, &d0));
            assert!(
                lambda <= s + 1e-9,
                "oracle statistic {lambda} exceeds data-only margin {s}"
            );
            for eta1 in [1.0, 1.25, 2.0, 10.0] {
                let pass = data_only_check_33(&res, &dm.x1, &bound, eta1);
                assert_eq!(pass, s <= 1.0 - 1.0 / eta1);
                if pass {
                    assert!(eta1_from_solution(&res, &dm.x1, &d0).unwrap() <= eta1 + 1e-9);
                }
            }
            checked += 1;
        }
        assert!(checked >= 5, "only {checked} draws respected the bound");
    }

    #[test]
    fn noise_set_check_scales_with_the_bound() {
        // Hand-built solution: V = I, R with known smallest singular
        // value, so the check reduces to mu² λ_min(R Rᵀ) ≥ delta².
        let r = DMatrix::from_row_slice(2, 3, &[2.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let res = SynthesisResult {
            status: SolveStatus::Optimal,
            kind: None,
            gamma: None,
            objective: None,
            q: None,
            p: None,
            l: None,
            v: Some(DMatrix::identity(3, 3)),
            k: None,
            rank_condition: None,
        };
        let mu = 0.5;
        // λ_min(R Rᵀ) = 1, ‖V‖ = 1: passes iff delta ≤ mu.
        assert!(data_only_check_34(&res, &NoiseBound::user(0.4), mu, &r).unwrap());
        assert!(!data_only_check_34(&res, &NoiseBound::user(0.6), mu, &r).unwrap());

        let no_slack = SynthesisResult { v: None, ..res };
        assert!(matches!(
            data_only_check_34(&no_slack, &NoiseBound::user(0.1), mu, &r).unwrap_err(),
            CertError::MissingV
        ));
    }

    #[test]
    fn sproc_scale_makes_the_set_contain_the_ball() {
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        let r = DMatrix::from_fn(3, 12, |_, _| {
            rand::Rng::random_range(&mut rng, -1.0..1.0)
        });
        let bound = NoiseBound::user(0.3);
        let mu = bound.sproc_scale(&r);
        let gap = crate::linalg::symmetrize(&(&r * r.transpose())).scale(mu * mu)
            - DMatrix::from_diagonal_element(3, 3, bound.delta * bound.delta);
        assert!(crate::linalg::eig_min_sym(&gap) >= -1e-12);
    }

    #[test]
    fn minimum_norm_representation_is_minimal() {
        let mut rng = ChaCha12Rng::seed_from_u64(21);
        let w0 = DMatrix::from_fn(4, 20, |_, _| {
            rand::Rng::random_range(&mut rng, -1.0..1.0)
        });
        let k = DMatrix::from_fn(1, 3, |_, _| rand::Rng::random_range(&mut rng, -1.0..1.0));
        let go = minimum_norm_go(&w0, &k).unwrap();
        let mut rhs = DMatrix::zeros(4, 3);
        rhs.view_mut((0, 0), (1, 3)).copy_from(&k);
        rhs.view_mut((1, 0), (3, 3))
            .copy_from(&DMatrix::identity(3, 3));
        assert!((&w0 * &go - &rhs).norm() <= 1e-10);

        // Any consistent alternative differs by a null-space term and
        // can only be larger in Frobenius norm.
        let projector = DMatrix::identity(20, 20) - crate::linalg::pseudo_inverse(&w0) * &w0;
        for _ in 0..100 {
            let z = DMatrix::from_fn(20, 3, |_, _| rand::Rng::random_range(&mut rng, -1.0..1.0));
            let alt = &go + &projector * z;
            assert!((&w0 * &alt - &rhs).norm() <= 1e-8);
            assert!(alt.norm() >= go.norm() - 1e-10);
        }
    }

    #[test]
    fn rank_deficient_snapshots_are_rejected() {
        let mut w0 = DMatrix::from_fn(4, 20, |i, j| ((i * 7 + j) as f64).sin());
        let row = w0.row(0).clone_owned();
        w0.row_mut(3).copy_from(&row);
        let k = DMatrix::from_element(1, 3, 0.5);
        assert!(matches!(
            minimum_norm_go(&w0, &k).unwrap_err(),
            CertError::RankDeficient
        ));
        let wrong_rows = DMatrix::identity(3, 20);
        assert!(matches!(
            minimum_norm_go(&wrong_rows, &k).unwrap_err(),
            CertError::ShapeMismatch(_)
        ));
    }

    #[test]
    fn oracle_report_on_noisy_programs() {
        let (plant, dm) = noisy_setup(42, 0.02);
        let d0 = dm.d0.clone().unwrap();
        let (qo, po, h2) = oracle_reference(&plant, &dm);
        let bound = NoiseBound::wgn(0.02, 20);
        let mut backend = ClarabelBackend::new();
        let targets = AccuracyTargets::default();

        let base = solve(&build_baseline(&dm.without_d0()).unwrap(), &mut backend, &targets);
        assert!(base.is_optimal());
        let ctx = CertificateContext {
            x1: &dm.x1,
            d0: Some(&d0),
            bound: Some(&bound),
            mu_r: None,
            ideal: Some((&qo, &po)),
            h2_opt: Some(h2),
            alpha: None,
        };
        let report = assemble_report(&base, &ctx);
        assert_eq!(report.mode, CertMode::Oracle);
        let lambda = report.psi_bar_lambda_max.unwrap();
        if let Some(e1) = report.eta1 {
            assert!(lambda < 1.0);
            assert!(e1 >= 1.0);
            assert_relative_eq!(
                report.performance_bound.unwrap(),
                e1 * base.gamma.unwrap(),
                epsilon = 1e-12
            );
            let e2 = report.eta2.unwrap();
            assert_relative_eq!(
                report.relative_error_bound.unwrap(),
                e1 * e2 - 1.0,
                epsilon = 1e-12
            );
        }
        assert!(report.eta3.is_none(), "additive slack term is soft-only");

        let alpha = 1.0;
        let soft = solve(&build_soft(&dm.without_d0(), alpha).unwrap(), &mut backend, &targets);
        assert!(soft.is_optimal());
        let soft_ctx = CertificateContext {
            alpha: Some(alpha),
            ..ctx
        };
        let soft_report = assemble_report(&soft, &soft_ctx);
        if let (Some(e1), Some(e2), Some(e3)) =
            (soft_report.eta1, soft_report.eta2, soft_report.eta3)
        {
            assert!(e3 > 0.0);
            assert_relative_eq!(
                soft_report.relative_error_bound.unwrap(),
                e1 * e2 - 1.0 + e3,
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn data_only_report_leaves_oracle_fields_empty() {
        let (_, dm) = noisy_setup(43, 0.02);
        let bound = NoiseBound::wgn(0.02, 20);
        let res = solve(
            &build_baseline(&dm.without_d0()).unwrap(),
            &mut ClarabelBackend::new(),
            &AccuracyTargets::default(),
        );
        assert!(res.is_optimal());
        let ctx = CertificateContext {
            x1: &dm.x1,
            d0: None,
            bound: Some(&bound),
            mu_r: None,
            ideal: None,
            h2_opt: None,
            alpha: None,
        };
        let report = assemble_report(&res, &ctx);
        assert_eq!(report.mode, CertMode::DataOnly);
        assert!(report.psi_bar_lambda_max.is_none());
        assert!(report.eta1.is_none());
        assert!(report.eta2.is_none());
        assert!(report.relative_error_bound.is_none());
        let s = data_only_margin_33(&res, &dm.x1, &bound).unwrap();
        assert_eq!(report.data_check_33, Some(s < 1.0));
        if s < 1.0 {
            assert_relative_eq!(
                report.performance_bound.unwrap(),
                res.gamma.unwrap() / (1.0 - s),
                epsilon = 1e-12
            );
        } else {
            assert!(report.performance_bound.is_none());
        }
    }

    #[test]
    fn failed_solves_produce_empty_reports() {
        let x1 = DMatrix::zeros(2, 5);
        let res = SynthesisResult {
            status: SolveStatus::Infeasible,
            kind: None,
            gamma: None,
            objective: None,
            q: None,
            p: None,
            l: None,
            v: None,
            k: None,
            rank_condition: None,
        };
        let ctx = CertificateContext {
            x1: &x1,
            d0: None,
            bound: None,
            mu_r: None,
            ideal: None,
            h2_opt: None,
            alpha: None,
        };
        let report = assemble_report(&res, &ctx);
        assert!(report.eta1.is_none());
        assert!(report.performance_bound.is_none());
    }

    #[test]
    fn report_serializes_with_explicit_nulls() {
        let report = CertificateReport {
            mode: CertMode::DataOnly,
            psi_bar_lambda_max: None,
            eta1: None,
            eta2: None,
            eta3: None,
            data_check_33: Some(true),
            data_check_34: None,
            performance_bound: Some(2.5),
            relative_error_bound: None,
        };
        let json = serde_json::to_string(&report).unwrap();
        assert!(json.contains("\"mode\":\"data_only\""));
        assert!(json.contains("\"eta1\":null"));
        assert!(json.contains("\"data_check_33\":true"));
        let back: CertificateReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, report);
    }
}
