//! Certainty-equivalent sweeps over the alternative Type-B investor.

use jumpsignal::equilibrium::solve_mf_finite;
use jumpsignal::metrics::certainty_equivalent;
use jumpsignal::sim::estimate_utility;
use jumpsignal::EquilibriumResult;
use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::error::CliError;

/// One sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    /// Value of the series parameter, if the sweep has series.
    pub series: Option<f64>,
    pub value: f64,
    /// Type-A certainty equivalent `exp(M_A_alt - M_A_ref)`.
    pub ce: f64,
    pub residual_ref: f64,
    pub residual_alt: f64,
    /// Iterations of the alternative solve.
    pub iterations: usize,
    pub m_a_ref: f64,
    pub m_a_alt: f64,
    /// Both the reference and the alternative solve converged.
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentTable {
    pub parameter: String,
    pub series_parameter: Option<String>,
    pub rows: Vec<Row>,
}

impl ExperimentTable {
    pub fn all_converged(&self) -> bool {
        self.rows.iter().all(|r| r.converged)
    }

    /// CE column of the rows belonging to `series`.
    pub fn curve(&self, series: Option<f64>) -> Vec<(f64, f64)> {
        self.rows
            .iter()
            .filter(|r| r.series == series)
            .map(|r| (r.value, r.ce))
            .collect()
    }
}

/// Solves the reference equilibrium, then one alternative equilibrium per grid point.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentTable, CliError> {
    cfg.validate()?;
    let q = cfg.quadrature()?;
    let solver = cfg.solver_config()?;
    let reference = solve_mf_finite(&cfg.reference_population()?, &q, &solver)?;
    let rows = cfg
        .grid_points()
        .into_par_iter()
        .map(|(series, value)| {
            let pop = cfg.alternative_population(series, value)?;
            let alt = solve_mf_finite(&pop, &q, &solver)?;
            Ok(row(series, value, &reference, &alt))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    Ok(ExperimentTable {
        parameter: cfg.sweep.parameter.name().into(),
        series_parameter: cfg.sweep.series.as_ref().map(|s| s.parameter.name().into()),
        rows,
    })
}

fn row(series: Option<f64>, value: f64, reference: &EquilibriumResult, alt: &EquilibriumResult) -> Row {
    let (m_ref, m_alt) = (reference.per_type_m[0], alt.per_type_m[0]);
    Row {
        series,
        value,
        ce: certainty_equivalent(m_alt, m_ref),
        residual_ref: reference.residual,
        residual_alt: alt.residual,
        iterations: alt.iterations,
        m_a_ref: m_ref,
        m_a_alt: m_alt,
        converged: reference.converged && alt.converged,
    }
}

/// Monte Carlo check of one type's closed-form value.
#[derive(Debug, Clone, PartialEq)]
pub struct McRow {
    pub type_index: usize,
    pub value: f64,
    pub mc_mean: f64,
    pub mc_std_error: f64,
}

impl McRow {
    /// Gap between the estimate and the closed form in standard errors.
    pub fn z_score(&self) -> f64 {
        (self.mc_mean - self.value) / self.mc_std_error
    }
}

/// Solves the reference equilibrium and estimates each type's expected utility by simulation.
pub fn run_simulation(cfg: &ExperimentConfig) -> Result<(EquilibriumResult, Vec<McRow>), CliError> {
    let q = cfg.quadrature()?;
    let pop = cfg.reference_population()?;
    let res = solve_mf_finite(&pop, &q, &cfg.solver_config()?)?;
    let stats = res
        .stats
        .as_ref()
        .ok_or_else(|| CliError::Config("solver returned no mean-field statistics".into()))?;
    let est = estimate_utility(
        &pop,
        &res.strategy,
        stats,
        cfg.mc.n_paths,
        cfg.market.horizon,
        cfg.mc.seed,
    )?;
    let rows = est
        .iter()
        .enumerate()
        .map(|(t, e)| McRow {
            type_index: t,
            value: res.per_type_value[t],
            mc_mean: e.mean,
            mc_std_error: e.std_error,
        })
        .collect();
    Ok((res, rows))
}
