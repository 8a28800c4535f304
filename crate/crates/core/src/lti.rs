//! Discrete-time LTI systems and their model-based optimal control.
//!
//! This module is the exact ground truth the data-driven pipeline is
//! measured against: the stabilizing Riccati solution and optimal gain,
//! Lyapunov/Gramian solves, squared H2 norms of closed loops, and
//! Schur-stability tests.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::linalg;

/// Margin below one at which a spectral radius still counts as Schur.
pub const SCHUR_TOL: f64 = 1e-9;
/// Successive-iterate Frobenius gap at which the Riccati fixed point is
/// declared converged.
pub const DARE_GAP_TOL: f64 = 1e-12;
/// Iteration cap for the Riccati fixed point.
pub const DARE_MAX_ITER: usize = 100_000;

#[derive(Debug, Error)]
pub enum LtiError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
    #[error("matrix is not Schur (spectral radius {rho})")]
    NotSchur { rho: f64 },
    #[error("system is not stabilizable")]
    NotStabilizable,
    #[error("Riccati iteration did not converge within {0} iterations")]
    NonConvergence(usize),
}

/// `x(k+1) = A x(k) + B u(k)`, plus whatever disturbance the simulation
/// layer injects.
#[derive(Debug, Clone)]
pub struct DiscreteLtiSystem {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
}

impl DiscreteLtiSystem {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>) -> Result<Self, LtiError> {
        if a.nrows() != a.ncols() {
            return Err(LtiError::DimensionMismatch(format!(
                "state map must be square, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if a.nrows() == 0 || b.ncols() == 0 {
            return Err(LtiError::DimensionMismatch(
                "state and input dimensions must be at least 1".into(),
            ));
        }
        if b.nrows() != a.nrows() {
            return Err(LtiError::DimensionMismatch(format!(
                "input map has {} rows but the state dimension is {}",
                b.nrows(),
                a.nrows()
            )));
        }
        Ok(Self { a, b })
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.b.ncols()
    }

    /// `A + B K` for a gain `K` of shape `m x n`.
    pub fn closed_loop(&self, k: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(
            (k.nrows(), k.ncols()),
            (self.input_dim(), self.state_dim()),
            "gain shape must be input_dim x state_dim"
        );
        &self.a + &self.b * k
    }
}

/// Quadratic cost weights: `Wx` on the state (symmetric PSD) and `Wu` on
/// the input (symmetric PD).
#[derive(Debug, Clone)]
pub struct PerformanceWeights {
    wx: DMatrix<f64>,
    wu: DMatrix<f64>,
}

impl PerformanceWeights {
    pub fn new(wx: DMatrix<f64>, wu: DMatrix<f64>) -> Result<Self, LtiError> {
        for (name, w) in [("Wx", &wx), ("Wu", &wu)] {
            if !w.is_square() || w.nrows() == 0 {
                return Err(LtiError::InvalidWeights(format!(
                    "{name} must be square and nonempty"
                )));
            }
            let asym = (w - w.transpose()).norm();
            if asym > 1e-9 * (1.0 + w.norm()) {
                return Err(LtiError::InvalidWeights(format!("{name} is not symmetric")));
            }
        }
        let scale_x = 1.0 + wx.norm();
        if linalg::eig_min_sym(&wx) < -1e-9 * scale_x {
            return Err(LtiError::InvalidWeights(
                "Wx must be positive semidefinite".into(),
            ));
        }
        if linalg::eig_min_sym(&wu) <= 0.0 {
            return Err(LtiError::InvalidWeights(
                "Wu must be positive definite".into(),
            ));
        }
        Ok(Self { wx, wu })
    }

    /// Identity weights of the given dimensions.
    pub fn unit(n: usize, m: usize) -> Self {
        Self {
            wx: DMatrix::identity(n, n),
            wu: DMatrix::identity(m, m),
        }
    }

    pub fn wx(&self) -> &DMatrix<f64> {
        &self.wx
    }

    pub fn wu(&self) -> &DMatrix<f64> {
        &self.wu
    }
}

/// Stabilizing Riccati solution and the optimal gain derived from it.
#[derive(Debug, Clone)]
pub struct RiccatiSolution {
    /// Stabilizing solution of the Riccati equation.
    pub x: DMatrix<f64>,
    /// Optimal gain `-(Wu + B'XB)^-1 B'XA`.
    pub kopt: DMatrix<f64>,
    /// Frobenius norm of the Riccati residual at the returned solution.
    /// Expected small relative to `max(1, ‖X‖)`: the attainable floor
    /// in double precision scales with the solution itself.
    pub residual: f64,
}

/// Controllability Gramian of a closed loop together with its squared
/// H2 norm.
#[derive(Debug, Clone)]
pub struct ClosedLoopMetrics {
    /// Unique `P > 0` with `Acl P Acl' - P + I = 0`.
    pub p: DMatrix<f64>,
    /// `trace(P) + trace(K P K')`.
    pub h2sq: f64,
}

/// Largest eigenvalue modulus of a square matrix.
pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    assert!(m.is_square(), "spectral_radius needs a square matrix");
    if m.nrows() == 0 {
        return 0.0;
    }
    m.complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0_f64, f64::max)
}

/// True when the spectral radius is below `1 - SCHUR_TOL`.
pub fn is_schur(m: &DMatrix<f64>) -> bool {
    spectral_radius(m) < 1.0 - SCHUR_TOL
}

/// Stabilizing solution of
/// `A'XA - X - A'XB (Wu + B'XB)^-1 B'XA + Wx = 0`
/// by fixed-point iteration from `X = Wx`, together with the optimal gain.
///
/// Stabilizability is detected, not assumed: an unbounded iterate reports
/// `NotStabilizable`, as does a converged solution whose closed loop
/// fails the Schur test.
pub fn solve_dare(
    sys: &DiscreteLtiSystem,
    w: &PerformanceWeights,
) -> Result<RiccatiSolution, LtiError> {
    let (n, m) = (sys.state_dim(), sys.input_dim());
    if w.wx().nrows() != n || w.wu().nrows() != m {
        return Err(LtiError::DimensionMismatch(format!(
            "weights sized {}x{} do not match system dimensions n={n}, m={m}",
            w.wx().nrows(),
            w.wu().nrows()
        )));
    }
    let a = sys.a();
    let b = sys.b();
    let divergence_cap = 1e12 * w.wx().norm().max(1.0);

    // Doubling first: squares the convergence factor every step, so even
    // closed loops with spectral radius barely below one finish in a few
    // dozen iterations. Falls back to the plain fixed-point iteration
    // when doubling breaks down.
    let x = match doubling_iteration(a, b, w, divergence_cap)? {
        Some(x) => x,
        None => fixed_point_iteration(a, b, w, divergence_cap)?,
    };

    let kopt = optimal_gain(a, b, &x, w)?;
    let acl = sys.closed_loop(&kopt);
    if !is_schur(&acl) {
        return Err(LtiError::NotStabilizable);
    }
    let residual = (riccati_step(a, b, &x, w)? - &x).norm();
    Ok(RiccatiSolution { x, kopt, residual })
}

/// Structure-preserving doubling: iterates
/// `A_{k+1} = A_k W⁻¹ A_k`, `G_{k+1} = G_k + A_k W⁻¹ G_k A_kᵀ`,
/// `H_{k+1} = H_k + A_kᵀ H_k W⁻¹ A_k` with `W = I + G_k H_k`, where
/// `H_k` converges quadratically to the Riccati solution. Returns
/// `Ok(None)` when the linear solves degrade and the caller should use
/// the slow path instead.
fn doubling_iteration(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    w: &PerformanceWeights,
    divergence_cap: f64,
) -> Result<Option<DMatrix<f64>>, LtiError> {
    let n = a.nrows();
    let wu_inv_bt = match linalg::solve_spd(w.wu(), &b.transpose()) {
        Some(s) => s,
        None => return Ok(None),
    };
    let mut ak = a.clone();
    let mut gk = linalg::symmetrize(&(b * wu_inv_bt));
    let mut hk = w.wx().clone();
    for _ in 0..100 {
        let lu = (DMatrix::identity(n, n) + &gk * &hk).lu();
        let (Some(wi_a), Some(wi_g)) = (lu.solve(&ak), lu.solve(&gk)) else {
            return Ok(None);
        };
        let h_next = linalg::symmetrize(&(&hk + ak.transpose() * (&hk * &wi_a)));
        let g_next = linalg::symmetrize(&(&gk + &ak * wi_g * ak.transpose()));
        let a_next = &ak * wi_a;
        if !linalg::all_finite(&h_next) || !linalg::all_finite(&a_next) {
            return Ok(None);
        }
        if h_next.norm() > divergence_cap {
            return Err(LtiError::NotStabilizable);
        }
        let gap = (&h_next - &hk).norm();
        let done = gap <= DARE_GAP_TOL * h_next.norm().max(1.0);
        ak = a_next;
        gk = g_next;
        hk = h_next;
        if done {
            return Ok(Some(hk));
        }
    }
    Ok(None)
}

fn fixed_point_iteration(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    w: &PerformanceWeights,
    divergence_cap: f64,
) -> Result<DMatrix<f64>, LtiError> {
    let mut x = w.wx().clone();
    for _ in 0..DARE_MAX_ITER {
        let xn = riccati_step(a, b, &x, w)?;
        let gap = (&xn - &x).norm();
        x = xn;
        if !linalg::all_finite(&x) || x.norm() > divergence_cap {
            return Err(LtiError::NotStabilizable);
        }
        if gap <= DARE_GAP_TOL * x.norm().max(1.0) {
            return Ok(x);
        }
    }
    Err(LtiError::NonConvergence(DARE_MAX_ITER))
}

/// `A'XA - A'XB (Wu + B'XB)^-1 B'XA + Wx`, symmetrized.
fn riccati_step(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    x: &DMatrix<f64>,
    w: &PerformanceWeights,
) -> Result<DMatrix<f64>, LtiError> {
    let xa = x * a;
    let xb = x * b;
    let g = w.wu() + b.transpose() * &xb;
    let ginv_bxa = linalg::solve_spd(&g, &(b.transpose() * &xa))
        .ok_or(LtiError::NonConvergence(DARE_MAX_ITER))?;
    let next = a.transpose() * &xa - (a.transpose() * &xb) * ginv_bxa + w.wx();
    Ok(linalg::symmetrize(&next))
}

/// `-(Wu + B'XB)^-1 B'XA`.
fn optimal_gain(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    x: &DMatrix<f64>,
    w: &PerformanceWeights,
) -> Result<DMatrix<f64>, LtiError> {
    let g = w.wu() + b.transpose() * x * b;
    let sol = linalg::solve_spd(&g, &(b.transpose() * x * a))
        .ok_or(LtiError::NonConvergence(DARE_MAX_ITER))?;
    Ok(-sol)
}

/// Unique solution of the discrete Lyapunov equation
/// `Acl P Acl' - P + I = 0` for a Schur matrix, by Kronecker
/// vectorization. Suited to the small state dimensions this crate
/// targets.
pub fn controllability_gramian(acl: &DMatrix<f64>) -> Result<DMatrix<f64>, LtiError> {
    if !acl.is_square() || acl.nrows() == 0 {
        return Err(LtiError::DimensionMismatch(
            "Lyapunov solve needs a square nonempty matrix".into(),
        ));
    }
    let rho = spectral_radius(acl);
    if rho >= 1.0 - SCHUR_TOL {
        return Err(LtiError::NotSchur { rho });
    }
    let n = acl.nrows();
    let n2 = n * n;
    // vec(Acl P Acl') = (Acl ⊗ Acl) vec(P) with column-major vec.
    let system = DMatrix::identity(n2, n2) - acl.kronecker(acl);
    let rhs = DMatrix::from_fn(n2, 1, |i, _| if i % n == i / n { 1.0 } else { 0.0 });
    let vec_p = system
        .lu()
        .solve(&rhs)
        .ok_or(LtiError::NotSchur { rho })?;
    let p = DMatrix::from_column_slice(n, n, vec_p.as_slice());
    Ok(linalg::symmetrize(&p))
}

/// Squared H2 norm of the loop closed with gain `K`:
/// `trace(P) + trace(K P K')` with `P` the controllability Gramian of
/// `A + BK`. Signals instability through `NotSchur`.
pub fn h2_norm_squared(sys: &DiscreteLtiSystem, k: &DMatrix<f64>) -> Result<f64, LtiError> {
    Ok(closed_loop_metrics(sys, k)?.h2sq)
}

/// Gramian and squared H2 norm of the loop closed with gain `K`.
pub fn closed_loop_metrics(
    sys: &DiscreteLtiSystem,
    k: &DMatrix<f64>,
) -> Result<ClosedLoopMetrics, LtiError> {
    if k.nrows() != sys.input_dim() || k.ncols() != sys.state_dim() {
        return Err(LtiError::DimensionMismatch(format!(
            "gain sized {}x{} does not match system dimensions m={}, n={}",
            k.nrows(),
            k.ncols(),
            sys.input_dim(),
            sys.state_dim()
        )));
    }
    let acl = sys.closed_loop(k);
    let p = controllability_gramian(&acl)?;
    let h2sq = p.trace() + (k * &p * k.transpose()).trace();
    Ok(ClosedLoopMetrics { p, h2sq })
}
