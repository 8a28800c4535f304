//! Direct data-driven synthesis of linear-quadratic regulators.
//!
//! The crate is organised around one workflow: run a short open-loop
//! experiment on an unknown discrete-time linear system, arrange the
//! samples into snapshot matrices, and obtain a state-feedback gain by
//! solving a semidefinite program posed directly on that data — no
//! intermediate model identification. Because the experiment data are
//! noisy, every synthesis route comes with certificates that bound the
//! effect of the unseen disturbance on closed-loop stability and
//! performance.
//!
//! Module map:
//!
//! - [`lti`] — exact model-based ground truth: system representation,
//!   Riccati solve and optimal gain, Lyapunov/Gramian equations, squared
//!   H2 norms, Schur tests.
//! - [`data`] — trajectory simulation (linear and nonlinear), noise
//!   injection, snapshot matrices, excitation/rank diagnostics, ensemble
//!   averaging.
//! - [`sdp`] — the synthesis programs themselves, a solver-agnostic
//!   problem description, and a conic-solver backend.
//! - [`cert`] — noise-dependent stability/performance certificates and
//!   relative-error bounds.
//! - [`linalg`] — small dense numeric helpers shared by the rest.

// The conic solver resolves BLAS/LAPACK symbols at link time; this
// crate-level use makes sure the provider crate is actually linked in.
use openblas_src as _;

pub mod cert;
pub mod data;
pub mod linalg;
pub mod lti;
pub mod sdp;
