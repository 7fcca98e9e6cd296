//! CSV tables and their JSON metadata sidecar.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use jumpsignal::{EquilibriumResult, Signal};
use serde::Serialize;

use crate::config::{ExperimentConfig, SweepParameter};
use crate::error::CliError;
use crate::experiment::ExperimentTable;

pub const HEADER: &str =
    "series,value,ce,residual_ref,residual_alt,iterations,m_a_ref,m_a_alt,converged";

/// Scientific notation with 12 significant digits.
pub fn fmt_num(x: f64) -> String {
    format!("{x:.11e}")
}

pub fn render_csv(table: &ExperimentTable) -> String {
    let mut out = String::with_capacity(64 * (table.rows.len() + 1));
    out.push_str(HEADER);
    out.push('\n');
    for r in &table.rows {
        let series = r.series.map(fmt_num).unwrap_or_default();
        let _ = writeln!(
            out,
            "{series},{},{},{},{},{},{},{},{}",
            fmt_num(r.value),
            fmt_num(r.ce),
            fmt_num(r.residual_ref),
            fmt_num(r.residual_alt),
            r.iterations,
            fmt_num(r.m_a_ref),
            fmt_num(r.m_a_alt),
            r.converged,
        );
    }
    out
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn emit_csv(table: &ExperimentTable, path: &Path) -> Result<(), CliError> {
    write(path, &render_csv(table))
}

/// `<path>.meta.json`.
pub fn meta_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

#[derive(Serialize)]
struct Meta<'a> {
    parameter: &'a str,
    series_parameter: Option<&'a str>,
    rows: usize,
    all_converged: bool,
    notes: Vec<String>,
    config: &'a ExperimentConfig,
}

/// Writes the sidecar describing how the table was produced.
pub fn emit_meta(table: &ExperimentTable, cfg: &ExperimentConfig, path: &Path) -> Result<(), CliError> {
    let mut notes = Vec::new();
    let varies_p_s = cfg.sweep.parameter == SweepParameter::SignalProbability
        || cfg
            .sweep
            .series
            .as_ref()
            .is_some_and(|s| s.parameter == SweepParameter::SignalProbability);
    if varies_p_s {
        notes.push(
            "p_s must be < 1; a grid point just below 1 (e.g. 0.999) stands in for p_s = 1".into(),
        );
    }
    notes.push("ce = exp(m_a_alt - m_a_ref); the reference equilibrium is solved once".into());
    let meta = Meta {
        parameter: &table.parameter,
        series_parameter: table.series_parameter.as_deref(),
        rows: table.rows.len(),
        all_converged: table.all_converged(),
        notes,
        config: cfg,
    };
    let mut text = serde_json::to_string_pretty(&meta)?;
    text.push('\n');
    write(&meta_path(path), &text)
}

/// Strategy table of a solved equilibrium, one row per type.
pub fn render_strategy(res: &EquilibriumResult) -> String {
    let mut out = String::from("type");
    for s in Signal::ALL {
        let _ = write!(out, ",phi[{}]", s.label());
    }
    out.push_str(",m,value\n");
    for (t, row) in res.strategy.rows.iter().enumerate() {
        let _ = write!(out, "{t}");
        for (_, x) in row.iter() {
            let _ = write!(out, ",{}", fmt_num(x));
        }
        let _ = writeln!(
            out,
            ",{},{}",
            fmt_num(res.per_type_m[t]),
            fmt_num(res.per_type_value[t])
        );
    }
    out
}

pub fn emit_text(text: &str, path: &Path) -> Result<(), CliError> {
    write(path, text)
}
