//! Command-line front end: `synth run` for one scenario, `synth
//! pendulum` for the nonlinear case study, `synth table1` for the full
//! benchmark sweep.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use synth::config::{load_config, ConfigError, ExperimentConfig};
use synth::mc::run_monte_carlo;
use synth::pendulum::run_pendulum;
use synth::report::{emit_report, table_markdown, MetricsRow, ReportError};
use synth::scenario::table1_cells;
use synth::trial::TrialRecord;

#[derive(Parser)]
#[command(name = "synth", version, about = "Monte-Carlo benchmarks for data-driven LQR synthesis")]
struct Cli {
    /// Worker threads for the trial pool (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one Monte-Carlo scenario on random linear plants.
    Run(RunArgs),
    /// Run the nonlinear pendulum study.
    Pendulum(RunArgs),
    /// Run the full benchmark sweep.
    Table1(Table1Args),
}

/// Every configuration key doubles as a flag of the same name; flags
/// override the file.
#[derive(Args)]
struct RunArgs {
    /// Configuration file (`key = value` lines, `#` comments).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Pick a named cell of the standard sweep (e.g. `wgn-0.1-soft`).
    #[arg(long)]
    scenario: Option<String>,
    /// Alias for --master-seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    master_seed: Option<u64>,
    #[arg(long)]
    num_systems: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    t: Option<usize>,
    /// Noise family: none, wgn, wgn_input, bias, sine.
    #[arg(long)]
    noise: Option<String>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    kappa_bar: Option<f64>,
    /// Synthesis program: ideal, baseline, soft, sproc.
    #[arg(long)]
    program: Option<String>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    ensemble_n: Option<usize>,
    #[arg(long)]
    shared_input: Option<bool>,
    /// Bound derivation: wgn, bias, user.
    #[arg(long)]
    delta_rule: Option<String>,
    #[arg(long)]
    delta: Option<f64>,
    /// Comma-separated ascending margins for the robust line search.
    #[arg(long)]
    eta1_grid: Option<String>,
    #[arg(long)]
    label: Option<String>,
    /// Output directory for summary.csv, trials.jsonl, table1.md.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl RunArgs {
    fn overrides(&self) -> Vec<(String, String)> {
        let mut kv: Vec<(String, String)> = Vec::new();
        let mut push = |key: &str, value: Option<String>| {
            if let Some(v) = value {
                kv.push((key.to_owned(), v));
            }
        };
        push("master_seed", self.seed.map(|v| v.to_string()));
        push("master_seed", self.master_seed.map(|v| v.to_string()));
        push("num_systems", self.num_systems.map(|v| v.to_string()));
        push("n", self.n.map(|v| v.to_string()));
        push("m", self.m.map(|v| v.to_string()));
        push("t", self.t.map(|v| v.to_string()));
        push("noise", self.noise.clone());
        push("sigma", self.sigma.map(|v| v.to_string()));
        push("kappa_bar", self.kappa_bar.map(|v| v.to_string()));
        push("program", self.program.clone());
        push("alpha", self.alpha.map(|v| v.to_string()));
        push("ensemble_n", self.ensemble_n.map(|v| v.to_string()));
        push("shared_input", self.shared_input.map(|v| v.to_string()));
        push("delta_rule", self.delta_rule.clone());
        push("delta", self.delta.map(|v| v.to_string()));
        push("eta1_grid", self.eta1_grid.clone());
        push("label", self.label.clone());
        push("out", self.out.as_ref().map(|p| p.display().to_string()));
        kv
    }

    fn resolve(&self) -> Result<ExperimentConfig, ConfigError> {
        let cfg = load_config(self.config.as_deref(), &self.overrides())?;
        match &self.scenario {
            None => Ok(cfg),
            Some(label) => {
                let cells = table1_cells(&cfg);
                cells
                    .iter()
                    .find(|c| &c.scenario_label() == label)
                    .cloned()
                    .ok_or_else(|| {
                        let known: Vec<String> =
                            cells.iter().map(|c| c.scenario_label()).collect();
                        ConfigError::Invalid(format!(
                            "unknown scenario `{label}`; available: {}",
                            known.join(", ")
                        ))
                    })
            }
        }
    }
}

#[derive(Args)]
struct Table1Args {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Trials per cell.
    #[arg(long)]
    num_systems: Option<usize>,
    /// Output directory for the sweep report.
    #[arg(long)]
    out: PathBuf,
}

enum AppError {
    Config(ConfigError),
    Report(ReportError),
}

impl From<ConfigError> for AppError {
    fn from(e: ConfigError) -> Self {
        AppError::Config(e)
    }
}

impl From<ReportError> for AppError {
    fn from(e: ReportError) -> Self {
        AppError::Report(e)
    }
}

impl std::fmt::Display for AppError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AppError::Config(e) => write!(f, "{e}"),
            AppError::Report(e) => write!(f, "{e}"),
        }
    }
}

fn finish(
    rows: &[MetricsRow],
    records: &[TrialRecord],
    out: Option<&PathBuf>,
) -> Result<(), AppError> {
    print!("{}", table_markdown(rows));
    if let Some(dir) = out {
        emit_report(rows, records, dir)?;
        eprintln!("report written to {}", dir.display());
    }
    Ok(())
}

fn run(cmd: Cmd) -> Result<(), AppError> {
    match cmd {
        Cmd::Run(args) => {
            let cfg = args.resolve()?;
            let (row, records) = run_monte_carlo(&cfg)?;
            finish(&[row], &records, args.out.as_ref().or(cfg.out_dir.as_ref()))
        }
        Cmd::Pendulum(args) => {
            if args.scenario.is_some() {
                return Err(AppError::Config(ConfigError::Invalid(
                    "--scenario applies only to `synth run`".into(),
                )));
            }
            let cfg = args.resolve()?;
            let (row, records) = run_pendulum(&cfg)?;
            finish(&[row], &records, args.out.as_ref().or(cfg.out_dir.as_ref()))
        }
        Cmd::Table1(args) => {
            let mut overrides = Vec::new();
            if let Some(seed) = args.seed {
                overrides.push(("master_seed".to_owned(), seed.to_string()));
            }
            if let Some(num) = args.num_systems {
                overrides.push(("num_systems".to_owned(), num.to_string()));
            }
            let base = load_config(args.config.as_deref(), &overrides)?;
            let mut rows = Vec::new();
            let mut records = Vec::new();
            for cell in table1_cells(&base) {
                let (row, mut recs) = run_monte_carlo(&cell)?;
                rows.push(row);
                records.append(&mut recs);
            }
            finish(&rows, &records, Some(&args.out))
        }
    }
}

fn main() -> ExitCode {
    env_logger::init();
    // The trial pool parallelizes across solves; keep the linear-algebra
    // backend single-threaded so workers do not oversubscribe cores.
    if std::env::var_os("OPENBLAS_NUM_THREADS").is_none() {
        std::env::set_var("OPENBLAS_NUM_THREADS", "1");
    }
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .ok();
    }
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                AppError::Config(_) => ExitCode::from(2),
                AppError::Report(_) => ExitCode::FAILURE,
            }
        }
    }
}
