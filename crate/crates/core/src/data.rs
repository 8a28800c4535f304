//! Experiment data: open-loop trajectory generation, disturbance
//! injection, and the snapshot matrices consumed by the synthesis
//! programs.
//!
//! All randomness flows through counter-based ChaCha streams so that a
//! `(master seed, trial index)` pair pins every byte of every experiment,
//! and so that changing the disturbance model never perturbs the plant
//! draw of the same trial.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lti::DiscreteLtiSystem;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("horizon must be at least 1")]
    EmptyHorizon,
    #[error("trajectory diverged to a non-finite state at step {step}")]
    DivergedTrajectory { step: usize },
    #[error("ensemble must contain at least one dataset")]
    EmptyEnsemble,
    #[error("no nonzero disturbance was recorded for this trajectory")]
    ZeroNoise,
}

/// Disturbance models applied during data collection.
///
/// `Wgn` perturbs every state channel; `WgnInput` perturbs the input
/// channels instead, so the state-equation disturbance is shaped by the
/// input map. `Bias` and `Sine` also act through the input channels,
/// with per-channel amplitudes drawn uniformly from `[-kappa_bar, kappa_bar]`
/// once per trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseKind {
    None,
    Wgn { sigma: f64 },
    WgnInput { sigma: f64 },
    Bias { kappa_bar: f64 },
    Sine { kappa_bar: f64 },
}

impl NoiseKind {
    pub fn is_none(&self) -> bool {
        matches!(self, NoiseKind::None)
    }
}

/// A disturbance model plus the label that derives its random stream.
///
/// Streams are seeded from `master ^ fnv1a(label)`, so distinct labels
/// (e.g. different scenarios at the same master seed) draw independent
/// noise while the plant stream stays untouched.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub label: String,
}

impl NoiseSpec {
    pub fn new(kind: NoiseKind, label: impl Into<String>) -> Self {
        Self {
            kind,
            label: label.into(),
        }
    }

    pub fn none() -> Self {
        Self::new(NoiseKind::None, "none")
    }

    /// ChaCha stream for this spec at `(master_seed, trial)`.
    pub fn stream(&self, master_seed: u64, trial: u64) -> ChaCha12Rng {
        let mut rng = ChaCha12Rng::seed_from_u64(master_seed ^ fnv1a64(self.label.as_bytes()));
        rng.set_stream(trial);
        rng
    }
}

/// FNV-1a, used to fold noise labels into seeds. Implemented inline so
/// the hash (and therefore every archived experiment) can never drift
/// with a dependency upgrade.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// One experiment: `T+1` states, `T` inputs, and optionally the `T`
/// state-equation disturbances that acted during collection.
///
/// States and inputs are stored as matrix columns: `x` is `n x (T+1)`,
/// `u` is `m x T`, `d` (when recorded) is `n x T`, and column `k` of `d`
/// is exactly the additive term in `x(k+1) = A x(k) + B u(k) + d(k)`.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub x: DMatrix<f64>,
    pub u: DMatrix<f64>,
    pub d: Option<DMatrix<f64>>,
}

impl Trajectory {
    pub fn horizon(&self) -> usize {
        self.u.ncols()
    }

    pub fn state_dim(&self) -> usize {
        self.x.nrows()
    }

    /// CSV dump (one row per time step) for external inspection.
    pub fn to_csv(&self) -> String {
        let n = self.state_dim();
        let m = self.u.nrows();
        let mut out = String::new();
        for i in 0..n {
            out.push_str(&format!("x{i},"));
        }
        for j in 0..m {
            out.push_str(&format!("u{j},"));
        }
        out.pop();
        out.push('\n');
        for k in 0..=self.horizon() {
            for i in 0..n {
                out.push_str(&format!("{},", self.x[(i, k)]));
            }
            for j in 0..m {
                if k < self.horizon() {
                    out.push_str(&format!("{},", self.u[(j, k)]));
                } else {
                    out.push(',');
                }
            }
            out.pop();
            out.push('\n');
        }
        out
    }
}

/// Snapshot matrices for a horizon-`T` experiment: inputs `U0` (`m x T`),
/// states `X0` (`n x T`), successors `X1` (`n x T`), and the disturbance
/// snapshots `D0` when the trajectory recorded them.
#[derive(Debug, Clone)]
pub struct DataMatrices {
    pub u0: DMatrix<f64>,
    pub x0: DMatrix<f64>,
    pub x1: DMatrix<f64>,
    pub d0: Option<DMatrix<f64>>,
}

impl DataMatrices {
    pub fn horizon(&self) -> usize {
        self.u0.ncols()
    }

    pub fn state_dim(&self) -> usize {
        self.x0.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.u0.nrows()
    }

    /// A copy with the recorded disturbances dropped, leaving only
    /// what a real experiment would observe.
    pub fn without_d0(&self) -> Self {
        Self {
            d0: None,
            ..self.clone()
        }
    }
}

/// Ensemble experiment description: how many trajectories to average and
/// whether they share one input sequence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub n_traj: usize,
    pub shared_input: bool,
}

/// Anything that can be stepped as `x(k+1) = f(x(k), u(k))`.
///
/// The linear simulator and the nonlinear benchmarks drive their
/// trajectories through this one interface, so disturbance handling and
/// divergence checks cannot diverge between them.
pub trait StateMap {
    fn state_dim(&self) -> usize;
    fn input_dim(&self) -> usize;
    fn eval(&self, x: &DMatrix<f64>, u: &DMatrix<f64>) -> DMatrix<f64>;
}

impl StateMap for DiscreteLtiSystem {
    fn state_dim(&self) -> usize {
        self.state_dim()
    }

    fn input_dim(&self) -> usize {
        self.input_dim()
    }

    fn eval(&self, x: &DMatrix<f64>, u: &DMatrix<f64>) -> DMatrix<f64> {
        self.a() * x + self.b() * u
    }
}

/// Per-channel amplitudes for bias/sine disturbances, drawn once per
/// trajectory.
fn draw_amplitudes(rng: &mut ChaCha12Rng, m: usize, kappa_bar: f64) -> Vec<f64> {
    (0..m).map(|_| rng.random_range(-kappa_bar..=kappa_bar)).collect()
}

fn gauss_matrix(rng: &mut impl Rng, rows: usize, cols: usize, sigma: f64) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| sigma * rng.sample::<f64, _>(StandardNormal))
}

/// Drives `map` from `x0` under `u`, injecting disturbances from `kind`
/// fed by `noise_rng`, and records the exact state-equation disturbance
/// at each step.
///
/// Input-channel disturbances (`WgnInput`, `Bias`, `Sine`) are applied as
/// `f(x, u + w)` and the recorded `d(k)` is `f(x, u + w) - f(x, u)`, so
/// the snapshot identity `x(k+1) = f(x(k), u(k)) + d(k)` holds exactly
/// for nonlinear maps too.
pub fn drive(
    map: &impl StateMap,
    x0: &DMatrix<f64>,
    u: &DMatrix<f64>,
    kind: NoiseKind,
    noise_rng: &mut ChaCha12Rng,
) -> Result<Trajectory, DataError> {
    let n = map.state_dim();
    let m = map.input_dim();
    let t = u.ncols();
    if t == 0 {
        return Err(DataError::EmptyHorizon);
    }
    if x0.nrows() != n || x0.ncols() != 1 {
        return Err(DataError::DimensionMismatch(format!(
            "initial state sized {}x{}, expected {n}x1",
            x0.nrows(),
            x0.ncols()
        )));
    }
    if u.nrows() != m {
        return Err(DataError::DimensionMismatch(format!(
            "input has {} rows, expected {m}",
            u.nrows()
        )));
    }

    let amplitudes = match kind {
        NoiseKind::Bias { kappa_bar } | NoiseKind::Sine { kappa_bar } => {
            draw_amplitudes(noise_rng, m, kappa_bar)
        }
        _ => Vec::new(),
    };

    let mut x = DMatrix::zeros(n, t + 1);
    x.set_column(0, &x0.column(0));
    let mut d = DMatrix::zeros(n, t);

    for k in 0..t {
        let xk = x.columns(k, 1).into_owned();
        let uk = u.columns(k, 1).into_owned();
        let nominal = map.eval(&xk, &uk);
        let next = match kind {
            NoiseKind::None => nominal,
            NoiseKind::Wgn { sigma } => {
                let w = gauss_matrix(noise_rng, n, 1, sigma);
                d.set_column(k, &(&w).column(0));
                nominal + w
            }
            NoiseKind::WgnInput { sigma } => {
                let w = gauss_matrix(noise_rng, m, 1, sigma);
                let perturbed = map.eval(&xk, &(&uk + &w));
                d.set_column(k, &(&perturbed - &nominal).column(0));
                perturbed
            }
            NoiseKind::Bias { .. } => {
                let w = DMatrix::from_fn(m, 1, |j, _| amplitudes[j]);
                let perturbed = map.eval(&xk, &(&uk + &w));
                d.set_column(k, &(&perturbed - &nominal).column(0));
                perturbed
            }
            NoiseKind::Sine { .. } => {
                let w = DMatrix::from_fn(m, 1, |j, _| amplitudes[j] * (k as f64).sin());
                let perturbed = map.eval(&xk, &(&uk + &w));
                d.set_column(k, &(&perturbed - &nominal).column(0));
                perturbed
            }
        };
        if !next.iter().all(|v| v.is_finite()) {
            return Err(DataError::DivergedTrajectory { step: k });
        }
        x.set_column(k + 1, &next.column(0));
    }

    // Disturbance-free runs record an explicitly zero D0: the oracle
    // knows the disturbance exactly in both cases, and programs that
    // subtract it keep working on clean data.
    Ok(Trajectory {
        x,
        u: u.clone(),
        d: Some(d),
    })
}

/// Simulates a linear plant from `x0` under the given input, with
/// disturbances from `noise` at `(master_seed, trial)`.
pub fn simulate(
    sys: &DiscreteLtiSystem,
    x0: &DMatrix<f64>,
    u: &DMatrix<f64>,
    noise: &NoiseSpec,
    master_seed: u64,
    trial: u64,
) -> Result<Trajectory, DataError> {
    let mut rng = noise.stream(master_seed, trial);
    drive(sys, x0, u, noise.kind, &mut rng)
}

/// Simulates an arbitrary state map under the same disturbance and
/// seeding rules as the linear simulator.
pub fn simulate_nonlinear(
    map: &impl StateMap,
    x0: &DMatrix<f64>,
    u: &DMatrix<f64>,
    noise: &NoiseSpec,
    master_seed: u64,
    trial: u64,
) -> Result<Trajectory, DataError> {
    let mut rng = noise.stream(master_seed, trial);
    drive(map, x0, u, noise.kind, &mut rng)
}

/// Splits a trajectory into the snapshot matrices `U0`, `X0`, `X1` (and
/// `D0` when disturbances were recorded).
pub fn build_data_matrices(traj: &Trajectory) -> DataMatrices {
    let t = traj.horizon();
    let n = traj.state_dim();
    DataMatrices {
        u0: traj.u.clone(),
        x0: traj.x.columns(0, t).into_owned(),
        x1: traj.x.columns(1, t).into_owned(),
        d0: traj.d.as_ref().map(|d| {
            debug_assert_eq!(d.ncols(), t);
            debug_assert_eq!(d.nrows(), n);
            d.clone()
        }),
    }
}

/// Block-Hankel matrix of depth `s` built from the columns of `z`.
///
/// For `z` with columns `z(0..T)` the result stacks `s` shifted windows:
/// entry block `(i, j)` is column `z(i + j)`, giving an
/// `(s * rows) x (T - s + 1)` matrix.
pub fn hankel(z: &DMatrix<f64>, s: usize) -> Result<DMatrix<f64>, DataError> {
    let t = z.ncols();
    if s == 0 || s > t {
        return Err(DataError::DimensionMismatch(format!(
            "Hankel depth {s} incompatible with {t} samples"
        )));
    }
    let rows = z.nrows();
    let cols = t - s + 1;
    let mut h = DMatrix::zeros(rows * s, cols);
    for i in 0..s {
        for j in 0..cols {
            h.view_mut((i * rows, j), (rows, 1)).copy_from(&z.column(i + j));
        }
    }
    Ok(h)
}

/// Whether the signal is persistently exciting of order `s`: the depth-`s`
/// block Hankel matrix has full row rank.
pub fn is_persistently_exciting(z: &DMatrix<f64>, s: usize) -> Result<bool, DataError> {
    let h = hankel(z, s)?;
    Ok(crate::linalg::numeric_rank(&h) == h.nrows())
}

/// Whether `[U0; X0]` has full row rank `n + m` — the identifiability
/// condition every synthesis program relies on.
pub fn rank_condition(dm: &DataMatrices) -> bool {
    let m = dm.input_dim();
    let n = dm.state_dim();
    let mut stacked = DMatrix::zeros(m + n, dm.horizon());
    stacked.view_mut((0, 0), (m, dm.horizon())).copy_from(&dm.u0);
    stacked.view_mut((m, 0), (n, dm.horizon())).copy_from(&dm.x0);
    crate::linalg::numeric_rank(&stacked) == m + n
}

/// Entrywise mean of the snapshot matrices across repeated experiments.
///
/// Averaging attenuates zero-mean disturbances by roughly the square
/// root of the ensemble size while a shared input contribution survives
/// intact, and it preserves the snapshot identity because that identity
/// is linear in the data. Members with differing inputs are averaged
/// too, but excitation of the average is then not guaranteed, so the
/// mismatch is logged as a warning. `D0` is averaged only when every
/// member recorded it.
pub fn ensemble_average(
    datasets: &[DataMatrices],
    spec: &EnsembleSpec,
) -> Result<DataMatrices, DataError> {
    let first = datasets.first().ok_or(DataError::EmptyEnsemble)?;
    if datasets.len() != spec.n_traj {
        return Err(DataError::DimensionMismatch(format!(
            "ensemble spec expects {} datasets, got {}",
            spec.n_traj,
            datasets.len()
        )));
    }
    let (n, m, t) = (first.state_dim(), first.input_dim(), first.horizon());
    for dm in datasets {
        if dm.state_dim() != n || dm.input_dim() != m || dm.horizon() != t {
            return Err(DataError::DimensionMismatch(
                "ensemble members must share dimensions and horizon".into(),
            ));
        }
    }
    let shared = datasets
        .iter()
        .all(|dm| (&dm.u0 - &first.u0).norm() <= 1e-12 * (1.0 + first.u0.norm()));
    if !shared {
        log::warn!(
            "averaging an ensemble whose members used different inputs; \
             excitation of the averaged data is not guaranteed"
        );
    }

    let scale = 1.0 / datasets.len() as f64;
    let mut u0 = DMatrix::zeros(m, t);
    let mut x0 = DMatrix::zeros(n, t);
    let mut x1 = DMatrix::zeros(n, t);
    let mut d0 = DMatrix::zeros(n, t);
    let mut have_d = true;
    for dm in datasets {
        u0 += &dm.u0;
        x0 += &dm.x0;
        x1 += &dm.x1;
        match &dm.d0 {
            Some(d) => d0 += d,
            None => have_d = false,
        }
    }
    u0 *= scale;
    x0 *= scale;
    x1 *= scale;
    d0 *= scale;
    Ok(DataMatrices {
        u0,
        x0,
        x1,
        d0: have_d.then_some(d0),
    })
}

/// Signal-to-noise ratio of an experiment in decibels:
/// `10 log10( sum ||B u(k)||^2 / sum ||d(k)||^2 )`.
pub fn snr_db(sys: &DiscreteLtiSystem, traj: &Trajectory) -> Result<f64, DataError> {
    let d = traj.d.as_ref().ok_or(DataError::ZeroNoise)?;
    let signal: f64 = (0..traj.horizon())
        .map(|k| (sys.b() * traj.u.column(k)).norm_squared())
        .sum();
    let noise: f64 = (0..d.ncols()).map(|k| d.column(k).norm_squared()).sum();
    if noise <= 0.0 {
        return Err(DataError::ZeroNoise);
    }
    Ok(10.0 * (signal / noise).log10())
}

/// Standard-normal initial state scaled by `sigma`.
pub fn gauss_vector(rng: &mut impl Rng, n: usize, sigma: f64) -> DMatrix<f64> {
    gauss_matrix(rng, n, 1, sigma)
}

/// Standard-normal input sequence (`m x t`).
pub fn gauss_input(rng: &mut impl Rng, m: usize, t: usize) -> DMatrix<f64> {
    gauss_matrix(rng, m, t, 1.0)
}

/// Standard-normal plant draw: every entry of `A` and `B` i.i.d. N(0,1).
pub fn random_plant(rng: &mut impl Rng, n: usize, m: usize) -> DiscreteLtiSystem {
    let a = gauss_matrix(rng, n, n, 1.0);
    let b = gauss_matrix(rng, n, m, 1.0);
    DiscreteLtiSystem::new(a, b).expect("dimensions are valid by construction")
}
