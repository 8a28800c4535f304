//! Experiment configuration: a flat `key=value` file format in which every
//! key can also be supplied (and overridden) on the command line.

use std::path::{Path, PathBuf};

use ddlqr::data::{NoiseKind, NoiseSpec};
use thiserror::Error;

/// Things that can go wrong while reading or validating a configuration.
#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("line {line}: expected `key=value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("invalid value for `{key}`: {msg}")]
    InvalidValue { key: String, msg: String },
    #[error("{0}")]
    Invalid(String),
}

fn invalid(key: &str, msg: impl Into<String>) -> ConfigError {
    ConfigError::InvalidValue {
        key: key.to_owned(),
        msg: msg.into(),
    }
}

/// Which synthesis program a run exercises.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Program {
    /// Noise-corrected data program (subtracts the recorded disturbance).
    Ideal,
    /// Certainty-equivalence program on raw snapshots.
    Baseline,
    /// Slack-penalized program; `alpha` weighs the penalty.
    Soft,
    /// Robust program with a quadratic noise set; `eta1_grid` drives its
    /// line search.
    SProc,
}

impl Program {
    pub fn as_str(self) -> &'static str {
        match self {
            Program::Ideal => "ideal",
            Program::Baseline => "baseline",
            Program::Soft => "soft",
            Program::SProc => "sproc",
        }
    }
}

/// How the disturbance bound handed to the certificates is derived.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DeltaRule {
    /// Gaussian rule: delta = 1.5 sigma sqrt(T), from the noise level.
    Wgn,
    /// Worst-case amplitude rule: delta = kappa_bar sqrt(T n).
    Bias,
    /// Caller-supplied bound.
    User(f64),
}

/// A fully resolved experiment description.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub master_seed: u64,
    pub num_systems: usize,
    pub n: usize,
    pub m: usize,
    pub t: usize,
    pub noise: NoiseKind,
    pub program: Program,
    pub alpha: f64,
    pub ensemble_n: usize,
    pub shared_input: bool,
    pub delta_rule: DeltaRule,
    pub eta1_grid: Vec<f64>,
    /// Scenario label used in reports. Defaults to a name derived from the
    /// noise and program.
    pub label: String,
    pub out_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            master_seed: 0,
            num_systems: 100,
            n: 3,
            m: 1,
            t: 20,
            noise: NoiseKind::None,
            program: Program::Soft,
            alpha: 1.0,
            ensemble_n: 1,
            shared_input: true,
            delta_rule: DeltaRule::Wgn,
            eta1_grid: default_eta1_grid(),
            label: String::new(),
            out_dir: None,
        }
    }
}

/// Grid used by the robust program's line search when none is configured.
pub fn default_eta1_grid() -> Vec<f64> {
    vec![1.0, 1.05, 1.1, 1.25, 1.5, 2.0, 3.0, 5.0, 10.0]
}

impl ExperimentConfig {
    /// Label identifying the noise scenario alone (no program suffix).
    ///
    /// This seeds the disturbance stream, so two runs that differ only in
    /// the synthesis program see identical noise realizations.
    pub fn noise_label(&self) -> String {
        match self.noise {
            NoiseKind::None => "none".to_owned(),
            NoiseKind::Wgn { sigma } => format!("wgn-{sigma}"),
            NoiseKind::WgnInput { sigma } => format!("wgn-input-{sigma}"),
            NoiseKind::Bias { kappa_bar } => format!("bias-{kappa_bar}"),
            NoiseKind::Sine { kappa_bar } => format!("sine-{kappa_bar}"),
        }
    }

    pub fn noise_spec(&self) -> NoiseSpec {
        NoiseSpec::new(self.noise, self.noise_label())
    }

    /// Report label: the configured one, or a derived default.
    pub fn scenario_label(&self) -> String {
        if !self.label.is_empty() {
            return self.label.clone();
        }
        let mut s = format!("{}-{}", self.noise_label(), self.program.as_str());
        if self.program == Program::Soft && self.alpha != 1.0 {
            s.push_str(&format!("-a{}", self.alpha));
        }
        if self.ensemble_n > 1 {
            s.push_str(&format!("-n{}", self.ensemble_n));
        }
        s
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.num_systems == 0 {
            return Err(ConfigError::Invalid("num_systems must be at least 1".into()));
        }
        if self.n == 0 || self.m == 0 {
            return Err(ConfigError::Invalid("state and input dimensions must be positive".into()));
        }
        if self.t < self.n + self.m {
            return Err(ConfigError::Invalid(format!(
                "horizon t = {} is shorter than n + m = {}; the data cannot satisfy the rank condition",
                self.t,
                self.n + self.m
            )));
        }
        if self.ensemble_n == 0 {
            return Err(ConfigError::Invalid("ensemble_n must be at least 1".into()));
        }
        if self.eta1_grid.is_empty() {
            return Err(ConfigError::Invalid("eta1_grid must contain at least one value".into()));
        }
        if self.eta1_grid.iter().any(|&e| e < 1.0) {
            return Err(ConfigError::Invalid("eta1_grid values must be at least 1".into()));
        }
        if self.eta1_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(ConfigError::Invalid("eta1_grid must be strictly increasing".into()));
        }
        if self.program == Program::Soft && self.alpha < 1.0 {
            return Err(ConfigError::Invalid("alpha must be at least 1".into()));
        }
        match (self.delta_rule, self.noise) {
            (DeltaRule::Wgn, NoiseKind::Bias { .. } | NoiseKind::Sine { .. }) => {
                return Err(ConfigError::Invalid(
                    "delta_rule=wgn needs Gaussian noise; use delta_rule=bias for bias or sine".into(),
                ));
            }
            (DeltaRule::Bias, NoiseKind::Wgn { .. } | NoiseKind::WgnInput { .. }) => {
                return Err(ConfigError::Invalid(
                    "delta_rule=bias needs bias or sine noise; use delta_rule=wgn".into(),
                ));
            }
            _ => {}
        }
        Ok(())
    }
}

/// Intermediate state while keys are being applied: noise kind and level
/// arrive as separate keys, so the kind is resolved at the end.
#[derive(Debug, Clone, Default)]
pub struct ConfigBuilder {
    cfg: ExperimentConfig,
    noise_name: Option<String>,
    sigma: Option<f64>,
    kappa_bar: Option<f64>,
    delta_rule_name: Option<String>,
    delta: Option<f64>,
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value
        .trim()
        .parse()
        .map_err(|_| invalid(key, format!("`{value}` is not a valid number")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool, ConfigError> {
    match value.trim() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        other => Err(invalid(key, format!("`{other}` is not a boolean"))),
    }
}

impl ConfigBuilder {
    /// Apply a single `key=value` assignment. Later assignments win, which
    /// is what lets command-line flags override file contents.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        match key {
            "master_seed" => self.cfg.master_seed = parse_num(key, value)?,
            "num_systems" => self.cfg.num_systems = parse_num(key, value)?,
            "n" => self.cfg.n = parse_num(key, value)?,
            "m" => self.cfg.m = parse_num(key, value)?,
            "t" => self.cfg.t = parse_num(key, value)?,
            "noise" => self.noise_name = Some(value.trim().to_owned()),
            "sigma" => self.sigma = Some(parse_num(key, value)?),
            "kappa_bar" => self.kappa_bar = Some(parse_num(key, value)?),
            "program" => {
                self.cfg.program = match value.trim() {
                    "ideal" => Program::Ideal,
                    "baseline" => Program::Baseline,
                    "soft" => Program::Soft,
                    "sproc" => Program::SProc,
                    other => {
                        return Err(invalid(
                            key,
                            format!("`{other}` is not one of ideal, baseline, soft, sproc"),
                        ))
                    }
                }
            }
            "alpha" => self.cfg.alpha = parse_num(key, value)?,
            "ensemble_n" => self.cfg.ensemble_n = parse_num(key, value)?,
            "shared_input" => self.cfg.shared_input = parse_bool(key, value)?,
            "delta_rule" => self.delta_rule_name = Some(value.trim().to_owned()),
            "delta" => self.delta = Some(parse_num(key, value)?),
            "eta1_grid" => {
                let grid: Result<Vec<f64>, _> =
                    value.split(',').map(|v| parse_num::<f64>(key, v)).collect();
                self.cfg.eta1_grid = grid?;
            }
            "label" => self.cfg.label = value.trim().to_owned(),
            "out" => self.cfg.out_dir = Some(PathBuf::from(value.trim())),
            other => return Err(ConfigError::UnknownKey(other.to_owned())),
        }
        Ok(())
    }

    /// Resolve the multi-key fields and validate the result.
    pub fn finish(mut self) -> Result<ExperimentConfig, ConfigError> {
        let name = self.noise_name.as_deref().unwrap_or("none");
        self.cfg.noise = match name {
            "none" => NoiseKind::None,
            "wgn" => NoiseKind::Wgn {
                sigma: self.sigma.ok_or_else(|| invalid("noise", "wgn needs sigma=<level>"))?,
            },
            "wgn_input" => NoiseKind::WgnInput {
                sigma: self
                    .sigma
                    .ok_or_else(|| invalid("noise", "wgn_input needs sigma=<level>"))?,
            },
            "bias" => NoiseKind::Bias {
                kappa_bar: self
                    .kappa_bar
                    .ok_or_else(|| invalid("noise", "bias needs kappa_bar=<level>"))?,
            },
            "sine" => NoiseKind::Sine {
                kappa_bar: self
                    .kappa_bar
                    .ok_or_else(|| invalid("noise", "sine needs kappa_bar=<level>"))?,
            },
            other => {
                return Err(invalid(
                    "noise",
                    format!("`{other}` is not one of none, wgn, wgn_input, bias, sine"),
                ))
            }
        };
        self.cfg.delta_rule = match self.delta_rule_name.as_deref() {
            Some("wgn") => DeltaRule::Wgn,
            Some("bias") => DeltaRule::Bias,
            Some("user") => DeltaRule::User(
                self.delta
                    .ok_or_else(|| invalid("delta_rule", "user rule needs delta=<bound>"))?,
            ),
            Some(other) => {
                return Err(invalid(
                    "delta_rule",
                    format!("`{other}` is not one of wgn, bias, user"),
                ))
            }
            // Default: pick the rule that matches the noise family.
            None => match self.cfg.noise {
                NoiseKind::Bias { .. } | NoiseKind::Sine { .. } => DeltaRule::Bias,
                _ => DeltaRule::Wgn,
            },
        };
        self.cfg.validate()?;
        Ok(self.cfg)
    }
}

/// Parse configuration text: one `key=value` per line, `#` comments, blank
/// lines ignored.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let mut builder = ConfigBuilder::default();
    apply_lines(&mut builder, text)?;
    builder.finish()
}

fn apply_lines(builder: &mut ConfigBuilder, text: &str) -> Result<(), ConfigError> {
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line: idx + 1,
            text: line.to_owned(),
        })?;
        builder.set(key.trim(), value.trim())?;
    }
    Ok(())
}

/// Load a configuration file and apply `overrides` (as `key=value` pairs)
/// on top of it.
pub fn load_config(path: Option<&Path>, overrides: &[(String, String)]) -> Result<ExperimentConfig, ConfigError> {
    let mut builder = ConfigBuilder::default();
    if let Some(p) = path {
        let text = std::fs::read_to_string(p).map_err(|source| ConfigError::Io {
            path: p.display().to_string(),
            source,
        })?;
        apply_lines(&mut builder, &text)?;
    }
    for (key, value) in overrides {
        builder.set(key, value)?;
    }
    builder.finish()
}
