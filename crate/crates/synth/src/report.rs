//! Aggregated metrics and report files.
//!
//! A run produces three artifacts in its output directory:
//! `summary.csv` (one row per scenario), `trials.jsonl` (one record per
//! trial, after a single header line carrying the timestamp), and
//! `table1.md` (the summary as a readable table). Everything except the
//! timestamp header is byte-deterministic for a fixed configuration.

use std::io::Write;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::trial::{TrialRecord, TrialStatus};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("cannot encode {path}: {source}")]
    Csv { path: String, source: csv::Error },
}

/// Benchmark metrics for one scenario.
///
/// `s_pct` is the share of trials whose gain stabilizes the true plant;
/// `m_median` is the median relative H2 error over the stabilizing
/// trials only; `v_pct` is the share of trials whose data-only
/// certificates passed (never the oracle ones).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub label: String,
    pub trials: usize,
    pub mean_snr_db: Option<f64>,
    pub s_pct: f64,
    pub m_median: Option<f64>,
    pub v_pct: f64,
    pub num_infeasible: usize,
    pub num_numerical_failure: usize,
}

/// Whether a trial's data-only certificates all passed. The first
/// margin check must hold whenever evaluated; the noise-set check
/// additionally binds for programs that carry one.
pub fn data_certified(rec: &TrialRecord) -> bool {
    match &rec.cert {
        Some(cert) => {
            cert.data_check_33 == Some(true)
                && (cert.data_check_34.is_none() || cert.data_check_34 == Some(true))
        }
        None => false,
    }
}

fn median(values: &mut Vec<f64>) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(|a, b| a.partial_cmp(b).expect("metric values are finite"));
    let k = values.len();
    Some(if k % 2 == 1 {
        values[k / 2]
    } else {
        0.5 * (values[k / 2 - 1] + values[k / 2])
    })
}

/// Collapses a scenario's trial records into one metrics row.
pub fn aggregate(label: &str, records: &[TrialRecord]) -> MetricsRow {
    let trials = records.len();
    let stabilizing = records
        .iter()
        .filter(|r| r.stabilizing == Some(true))
        .count();
    let mut errors: Vec<f64> = records
        .iter()
        .filter(|r| r.stabilizing == Some(true))
        .filter_map(|r| r.rel_error)
        .collect();
    let certified = records.iter().filter(|r| data_certified(r)).count();
    let snrs: Vec<f64> = records.iter().filter_map(|r| r.snr_db).collect();
    let pct = |k: usize| 100.0 * k as f64 / trials.max(1) as f64;
    MetricsRow {
        label: label.to_owned(),
        trials,
        mean_snr_db: if snrs.is_empty() {
            None
        } else {
            Some(snrs.iter().sum::<f64>() / snrs.len() as f64)
        },
        s_pct: pct(stabilizing),
        m_median: median(&mut errors),
        v_pct: pct(certified),
        num_infeasible: records
            .iter()
            .filter(|r| r.status == TrialStatus::Infeasible)
            .count(),
        num_numerical_failure: records
            .iter()
            .filter(|r| matches!(r.status, TrialStatus::NumericalFailure | TrialStatus::DataError))
            .count(),
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ReportError + '_ {
    move |source| ReportError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn write_summary_csv(rows: &[MetricsRow], path: &Path) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_path(path).map_err(|source| ReportError::Csv {
        path: path.display().to_string(),
        source,
    })?;
    for row in rows {
        w.serialize(row).map_err(|source| ReportError::Csv {
            path: path.display().to_string(),
            source,
        })?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

fn write_trials_jsonl(records: &[TrialRecord], path: &Path) -> Result<(), ReportError> {
    let mut out = Vec::new();
    let stamp = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    writeln!(out, "{{\"generated_unix\":{stamp}}}").expect("vec write");
    for rec in records {
        let line = serde_json::to_string(rec).expect("trial records serialize");
        writeln!(out, "{line}").expect("vec write");
    }
    std::fs::write(path, out).map_err(io_err(path))
}

fn fmt_opt(v: Option<f64>, digits: usize) -> String {
    match v {
        Some(x) => format!("{x:.digits$}"),
        None => "-".to_owned(),
    }
}

/// Renders the summary rows as a markdown table.
pub fn table_markdown(rows: &[MetricsRow]) -> String {
    let mut out = String::new();
    out.push_str("| Scenario | Trials | SNR (dB) | S | M | V | Infeasible | Failed |\n");
    out.push_str("|---|---|---|---|---|---|---|---|\n");
    for r in rows {
        out.push_str(&format!(
            "| {} | {} | {} | {:.0}% | {} | {:.0}% | {} | {} |\n",
            r.label,
            r.trials,
            fmt_opt(r.mean_snr_db, 1),
            r.s_pct,
            fmt_opt(r.m_median, 4),
            r.v_pct,
            r.num_infeasible,
            r.num_numerical_failure,
        ));
    }
    out
}

fn write_table_md(rows: &[MetricsRow], path: &Path) -> Result<(), ReportError> {
    std::fs::write(path, table_markdown(rows)).map_err(io_err(path))
}

/// Writes all three report files into `dir`, creating it if needed.
pub fn emit_report(
    rows: &[MetricsRow],
    records: &[TrialRecord],
    dir: &Path,
) -> Result<(), ReportError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    write_summary_csv(rows, &dir.join("summary.csv"))?;
    write_trials_jsonl(records, &dir.join("trials.jsonl"))?;
    write_table_md(rows, &dir.join("table1.md"))?;
    Ok(())
}
