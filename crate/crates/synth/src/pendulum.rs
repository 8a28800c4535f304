//! Inverted-pendulum case study: data-driven synthesis on trajectories
//! of the nonlinear plant, judged on the nonlinear plant.
//!
//! Unlike the linear Monte-Carlo sweep there is no disturbance oracle
//! here: the certificates run in data-only mode, exactly as a user
//! without knowledge of the linearization error would evaluate them.

use ddlqr::data::{
    build_data_matrices, gauss_input, gauss_vector, rank_condition, simulate_nonlinear, snr_db,
    StateMap,
};
use ddlqr::linalg::spectral_norm;
use ddlqr::lti::{h2_norm_squared, is_schur, solve_dare, DiscreteLtiSystem, PerformanceWeights};
use ddlqr::sdp::SynthesisError;
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;

use crate::config::{ConfigError, ExperimentConfig};
use crate::report::{aggregate, MetricsRow};
use crate::trial::{dispatch_solve, noise_bound, TrialRecord, TrialStatus};

use ddlqr::cert::{assemble_report, CertificateContext};
use ddlqr::sdp::SolveStatus;

/// Discrete-time inverted pendulum (Euler step of the continuous
/// dynamics), torque-actuated at the pivot.
#[derive(Debug, Clone)]
pub struct Pendulum {
    pub dt: f64,
    pub mass: f64,
    pub length: f64,
    pub friction: f64,
    pub gravity: f64,
}

impl Default for Pendulum {
    fn default() -> Self {
        Pendulum {
            dt: 0.01,
            mass: 1.0,
            length: 1.0,
            friction: 0.01,
            gravity: 9.8,
        }
    }
}

impl Pendulum {
    /// Linearization around the upright equilibrium.
    pub fn linearization(&self) -> DiscreteLtiSystem {
        let (dt, inertia) = (self.dt, self.mass * self.length * self.length);
        let a = DMatrix::from_row_slice(
            2,
            2,
            &[
                1.0,
                dt,
                dt * self.gravity / self.length,
                1.0 - dt * self.friction / inertia,
            ],
        );
        let b = DMatrix::from_column_slice(2, 1, &[0.0, dt / inertia]);
        DiscreteLtiSystem::new(a, b).expect("pendulum dimensions are consistent")
    }
}

impl StateMap for Pendulum {
    fn state_dim(&self) -> usize {
        2
    }

    fn input_dim(&self) -> usize {
        1
    }

    fn eval(&self, x: &DMatrix<f64>, u: &DMatrix<f64>) -> DMatrix<f64> {
        let inertia = self.mass * self.length * self.length;
        let (theta, omega) = (x[(0, 0)], x[(1, 0)]);
        let accel = self.gravity / self.length * theta.sin() - self.friction / inertia * omega
            + u[(0, 0)] / inertia;
        DMatrix::from_column_slice(2, 1, &[theta + self.dt * omega, omega + self.dt * accel])
    }
}

/// Steps the closed loop `u = K x` of the nonlinear plant and reports
/// whether the state settles below `tol` within `max_steps`.
pub fn settles(
    pend: &Pendulum,
    k: &DMatrix<f64>,
    x0: &DMatrix<f64>,
    max_steps: usize,
    tol: f64,
) -> bool {
    let mut x = x0.clone();
    for _ in 0..max_steps {
        if x.norm() <= tol {
            return true;
        }
        let u = k * &x;
        x = pend.eval(&x, &u);
        if !x.iter().all(|v| v.is_finite()) || x.norm() > 1e6 {
            return false;
        }
    }
    x.norm() <= tol
}

/// Number of closed-loop steps granted before a gain is declared
/// non-stabilizing on the nonlinear plant.
const SETTLE_STEPS: usize = 10_000;
const SETTLE_TOL: f64 = 1e-6;

/// Runs one pendulum trial: random tilt near upright, random torque
/// excitation, data-driven synthesis, nonlinear closed-loop verdict.
pub fn run_pendulum_trial(cfg: &ExperimentConfig, trial: u64) -> TrialRecord {
    let pend = Pendulum::default();
    let lin = pend.linearization();
    let mut record = TrialRecord::new_for(trial, &cfg.scenario_label());

    let mut plant_rng = ChaCha12Rng::seed_from_u64(cfg.master_seed);
    plant_rng.set_stream(trial);
    let x0 = gauss_vector(&mut plant_rng, 2, 0.1);
    let u = gauss_input(&mut plant_rng, 1, cfg.t);

    record.open_loop_stable = Some(is_schur(lin.a()));

    let noise = cfg.noise_spec();
    let traj = match simulate_nonlinear(&pend, &x0, &u, &noise, cfg.master_seed, trial) {
        Ok(t) => t,
        Err(e) => {
            record.message = Some(format!("simulation failed: {e}"));
            return record;
        }
    };
    record.snr_db = snr_db(&lin, &traj).ok();
    let dm = build_data_matrices(&traj).without_d0();
    record.rank_condition = Some(rank_condition(&dm));

    let bound = noise_bound(cfg, lin.b());
    record.delta = bound.as_ref().map(|b| b.delta);
    // Diagnostic only: the linearization error the data-only user never
    // sees is exactly the gap between recorded and linear transitions.
    let lin_residual = &dm.x1 - (lin.a() * &dm.x0 + lin.b() * &dm.u0);
    record.norm_d0 = Some(spectral_norm(&lin_residual));
    record.norm_d0_fro = Some(lin_residual.norm());

    let weights = PerformanceWeights::unit(2, 1);
    let oracle = solve_dare(&lin, &weights).ok();
    let h2_opt = oracle
        .as_ref()
        .and_then(|sol| h2_norm_squared(&lin, &sol.kopt).ok());
    record.h2_opt = h2_opt;

    let mut mu_r = None;
    let (res, eta1_selected) = match dispatch_solve(cfg, &dm, bound.as_ref(), &mut mu_r) {
        Ok(out) => out,
        Err(SynthesisError::AllInfeasible) => {
            record.status = TrialStatus::Infeasible;
            record.message = Some("every line-search margin was infeasible".into());
            return record;
        }
        Err(e) => {
            record.message = Some(e.to_string());
            return record;
        }
    };
    record.eta1_selected = eta1_selected;
    record.status = match res.status {
        SolveStatus::Optimal => TrialStatus::Optimal,
        SolveStatus::Infeasible => TrialStatus::Infeasible,
        SolveStatus::NumericalFailure => TrialStatus::NumericalFailure,
    };

    if let Some(k) = &res.k {
        record.gamma = res.gamma;
        let lin_schur = is_schur(&lin.closed_loop(k));
        let stabilizing = lin_schur && settles(&pend, k, &x0, SETTLE_STEPS, SETTLE_TOL);
        record.stabilizing = Some(stabilizing);
        if lin_schur {
            record.h2_closed = h2_norm_squared(&lin, k).ok();
        }
        if let Some(sol) = &oracle {
            let kn = sol.kopt.norm();
            if kn > 0.0 {
                record.gain_gap = Some((k - &sol.kopt).norm() / kn);
            }
        }
        if let (Some(h2), Some(opt)) = (record.h2_closed, h2_opt) {
            if opt > 0.0 {
                record.rel_error = Some((h2 - opt).abs() / opt);
            }
        }
    }

    let ctx = CertificateContext {
        x1: &dm.x1,
        d0: None,
        bound: bound.as_ref(),
        mu_r: mu_r.as_ref().map(|(mu, r)| (*mu, r)),
        ideal: None,
        h2_opt,
        alpha: None,
    };
    record.cert = Some(assemble_report(&res, &ctx));
    record
}

/// Runs the full pendulum study: `cfg.num_systems` random starts.
pub fn run_pendulum(cfg: &ExperimentConfig) -> Result<(MetricsRow, Vec<TrialRecord>), ConfigError> {
    let mut cfg = cfg.clone();
    cfg.n = 2;
    cfg.m = 1;
    cfg.validate()?;
    let records: Vec<TrialRecord> = (0..cfg.num_systems as u64)
        .into_par_iter()
        .map(|trial| run_pendulum_trial(&cfg, trial))
        .collect();
    let row = aggregate(&cfg.scenario_label(), &records);
    log::info!(
        "{}: S = {:.0}%, M = {} over {} trials",
        row.label,
        row.s_pct,
        row.m_median.map_or("-".into(), |m| format!("{m:.4}")),
        row.trials
    );
    Ok((row, records))
}
