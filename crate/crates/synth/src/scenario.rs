//! The standard benchmark sweep: every noise scenario crossed with both
//! regularized programs, plus ensemble-averaged repeats of the Gaussian
//! rows.

use ddlqr::data::NoiseKind;

use crate::config::{ExperimentConfig, Program};

/// Gaussian noise levels of the standard sweep.
pub const WGN_SIGMAS: [f64; 6] = [0.01, 0.03, 0.05, 0.1, 0.3, 0.5];
/// Input-channel amplitude levels for the bias and sinusoid rows.
pub const CHANNEL_KAPPAS: [f64; 2] = [0.05, 0.1];
/// Ensemble size of the averaged rows.
pub const ENSEMBLE_SIZE: usize = 10;

/// Noise scenarios of the standard sweep, in report order.
pub fn standard_noise_levels() -> Vec<NoiseKind> {
    let mut out = Vec::new();
    for sigma in WGN_SIGMAS {
        out.push(NoiseKind::Wgn { sigma });
    }
    for kappa_bar in CHANNEL_KAPPAS {
        out.push(NoiseKind::Bias { kappa_bar });
    }
    for kappa_bar in CHANNEL_KAPPAS {
        out.push(NoiseKind::Sine { kappa_bar });
    }
    out
}

fn cell(base: &ExperimentConfig, noise: NoiseKind, program: Program, ensemble_n: usize) -> ExperimentConfig {
    let mut cfg = base.clone();
    cfg.noise = noise;
    cfg.program = program;
    cfg.alpha = 1.0;
    cfg.ensemble_n = ensemble_n;
    cfg.label = String::new(); // derive the label from the cell itself
    cfg.delta_rule = match noise {
        NoiseKind::Bias { .. } | NoiseKind::Sine { .. } => crate::config::DeltaRule::Bias,
        _ => crate::config::DeltaRule::Wgn,
    };
    cfg
}

/// Expands a base configuration into the full benchmark sweep: each
/// noise level solved by the slack-penalized and the robust program,
/// then the Gaussian rows again with ensemble-averaged data.
pub fn table1_cells(base: &ExperimentConfig) -> Vec<ExperimentConfig> {
    let mut cells = Vec::new();
    for noise in standard_noise_levels() {
        cells.push(cell(base, noise, Program::Soft, 1));
        cells.push(cell(base, noise, Program::SProc, 1));
    }
    for sigma in WGN_SIGMAS {
        cells.push(cell(base, NoiseKind::Wgn { sigma }, Program::Soft, ENSEMBLE_SIZE));
    }
    cells
}
