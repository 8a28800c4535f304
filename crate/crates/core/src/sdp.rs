//! Semidefinite programming layer: a symbolic problem container, a
//! solver backend contract with a conic interior-point implementation,
//! and the five controller-synthesis programs built on top of them.

pub mod backend;
pub mod problem;
pub mod programs;

pub use backend::{AccuracyTargets, BackendError, ClarabelBackend, RawSolution, RawStatus, SolverBackend};
pub use problem::{LinExpr, MatExpr, ProblemError, SdpProblem, VarId, VarInfo, VarShape};
pub use programs::{
    build_baseline, build_ideal, build_model_based, build_soft, build_sproc, solve,
    sproc_line_search, DecodeInfo, ProgramKind, ProgramVariant, SolveStatus, SynthesisError,
    SynthesisResult,
};
