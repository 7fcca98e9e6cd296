//! JSON experiment configuration. Every block is optional and defaults to the
//! two-type case study.

use std::fmt;
use std::path::Path;

use jumpsignal::equilibrium::Init;
use jumpsignal::model::DEFAULT_EPS_B;
use jumpsignal::quad::{DEFAULT_BOUND, DEFAULT_NODES};
use jumpsignal::{
    AdmissibleInterval, InvestorType, MarketParams, Population, Quadrature, SolverConfig, Weight,
};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MarketBlock {
    pub r: f64,
    pub kappa: f64,
    pub sigma: f64,
    pub sigma0: f64,
    pub kappa_hat: f64,
    pub sigma_hat: f64,
    pub lambda: f64,
    /// Investment horizon `T`.
    pub horizon: f64,
}

impl Default for MarketBlock {
    fn default() -> Self {
        let m = MarketParams::case_study();
        Self {
            r: m.r,
            kappa: m.kappa,
            sigma: m.sigma,
            sigma0: m.sigma0,
            kappa_hat: m.kappa_hat,
            sigma_hat: m.sigma_hat,
            lambda: m.lambda,
            horizon: 1.0,
        }
    }
}

impl MarketBlock {
    pub fn params(&self) -> MarketParams {
        MarketParams {
            r: self.r,
            kappa: self.kappa,
            sigma: self.sigma,
            sigma0: self.sigma0,
            kappa_hat: self.kappa_hat,
            sigma_hat: self.sigma_hat,
            lambda: self.lambda,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TypeBlock {
    pub x0: f64,
    pub p_s: f64,
    pub rho: f64,
    pub theta: f64,
    pub alpha: f64,
    pub weight: f64,
}

impl Default for TypeBlock {
    fn default() -> Self {
        Self {
            x0: 1.0,
            p_s: 0.5,
            rho: 0.5,
            theta: 0.5,
            alpha: 2.0,
            weight: 0.5,
        }
    }
}

impl TypeBlock {
    pub fn investor(&self, market: &MarketBlock) -> Result<InvestorType, CliError> {
        Ok(InvestorType {
            x0: self.x0,
            market: market.params(),
            p_s: self.p_s,
            rho: self.rho,
            alpha: self.alpha,
            theta: self.theta,
            weight: Weight::from_f64(self.weight)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitKind {
    Zeros,
    Merton,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverBlock {
    pub tol: f64,
    pub max_iter: usize,
    pub damping: f64,
    pub init: InitKind,
    /// Distance of the upper admissible bound from 1.
    pub eps_b: f64,
}

impl Default for SolverBlock {
    fn default() -> Self {
        let d = SolverConfig::default();
        Self {
            tol: d.tol,
            max_iter: d.max_iter,
            damping: d.damping,
            init: InitKind::Zeros,
            eps_b: DEFAULT_EPS_B,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureBlock {
    pub nodes: usize,
    /// Truncation bound `L` of the common-mark integral.
    pub bound: f64,
}

impl Default for QuadratureBlock {
    fn default() -> Self {
        Self {
            nodes: DEFAULT_NODES,
            bound: DEFAULT_BOUND,
        }
    }
}

/// Parameter of the alternative Type-B investor varied by a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepParameter {
    #[serde(rename = "p_s_B")]
    SignalProbability,
    #[serde(rename = "rho_B")]
    SignalQuality,
    #[serde(rename = "theta_B")]
    Concern,
}

impl SweepParameter {
    pub fn name(self) -> &'static str {
        match self {
            Self::SignalProbability => "p_s_B",
            Self::SignalQuality => "rho_B",
            Self::Concern => "theta_B",
        }
    }

    pub fn default_grid(self) -> Vec<f64> {
        match self {
            Self::SignalProbability => vec![0.0, 0.25, 0.5, 0.75, 0.999],
            Self::SignalQuality => vec![0.0, 0.2, 0.4, 0.6, 0.8],
            Self::Concern => vec![0.0, 0.25, 0.5, 0.75, 1.0],
        }
    }

    pub fn apply(self, block: &mut TypeBlock, value: f64) {
        match self {
            Self::SignalProbability => block.p_s = value,
            Self::SignalQuality => block.rho = value,
            Self::Concern => block.theta = value,
        }
    }
}

impl fmt::Display for SweepParameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A second parameter held fixed per curve, giving one sweep per value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeriesBlock {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepBlock {
    pub parameter: SweepParameter,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub series: Option<SeriesBlock>,
}

impl Default for SweepBlock {
    fn default() -> Self {
        Self {
            parameter: SweepParameter::SignalProbability,
            values: None,
            series: None,
        }
    }
}

impl SweepBlock {
    pub fn grid(&self) -> Vec<f64> {
        self.values
            .clone()
            .unwrap_or_else(|| self.parameter.default_grid())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McBlock {
    pub n_paths: usize,
    pub seed: u64,
}

impl Default for McBlock {
    fn default() -> Self {
        Self {
            n_paths: 100_000,
            seed: 1,
        }
    }
}

/// Full experiment description.
///
/// `reference` describes both types of the reference environment; in the
/// alternative environment Type A keeps it and Type B takes `alternative`
/// with the swept parameter overridden.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub market: MarketBlock,
    pub reference: TypeBlock,
    pub alternative: TypeBlock,
    pub solver: SolverBlock,
    pub quadrature: QuadratureBlock,
    pub sweep: SweepBlock,
    pub mc: McBlock,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    /// Checks everything that can be checked without solving.
    pub fn validate(&self) -> Result<(), CliError> {
        self.solver_config()?.validate()?;
        self.quadrature()?;
        self.reference_population()?;
        for (series, value) in self.grid_points() {
            self.alternative_population(series, value)?;
        }
        if let Some(s) = &self.sweep.series {
            if s.parameter == self.sweep.parameter {
                return Err(CliError::Config(format!(
                    "series and sweep both vary {}",
                    s.parameter
                )));
            }
        }
        Ok(())
    }

    pub fn solver_config(&self) -> Result<SolverConfig, CliError> {
        let init = match self.solver.init {
            InitKind::Zeros => Init::Zeros,
            InitKind::Merton => Init::Merton,
        };
        let cfg = SolverConfig {
            tol: self.solver.tol,
            max_iter: self.solver.max_iter,
            damping: self.solver.damping,
            init,
            horizon: self.market.horizon,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn quadrature(&self) -> Result<Quadrature, CliError> {
        Ok(Quadrature::gauss_legendre_normal(
            self.quadrature.nodes,
            self.quadrature.bound,
        )?)
    }

    pub fn interval(&self) -> Result<AdmissibleInterval, CliError> {
        Ok(AdmissibleInterval::case_study(self.solver.eps_b)?)
    }

    /// Both types at the reference block; B takes the alternative weight.
    pub fn reference_population(&self) -> Result<Population, CliError> {
        let mut b = self.reference.clone();
        b.weight = self.alternative.weight;
        self.population(&b)
    }

    /// Sweep points in output order: outer loop over series values.
    pub fn grid_points(&self) -> Vec<(Option<f64>, f64)> {
        let grid = self.sweep.grid();
        match &self.sweep.series {
            None => grid.into_iter().map(|v| (None, v)).collect(),
            Some(s) => s
                .values
                .iter()
                .flat_map(|&sv| grid.iter().map(move |&v| (Some(sv), v)))
                .collect(),
        }
    }

    pub fn alternative_population(
        &self,
        series: Option<f64>,
        value: f64,
    ) -> Result<Population, CliError> {
        let mut b = self.alternative.clone();
        if let (Some(s), Some(sv)) = (&self.sweep.series, series) {
            s.parameter.apply(&mut b, sv);
        }
        self.sweep.parameter.apply(&mut b, value);
        self.population(&b)
    }

    fn population(&self, b: &TypeBlock) -> Result<Population, CliError> {
        let a = self.reference.investor(&self.market)?;
        let b = b.investor(&self.market)?;
        Ok(Population::new(vec![a, b], self.interval()?)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_is_the_case_study() {
        let cfg = ExperimentConfig::from_json("{}").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        assert_eq!(cfg.reference_population().unwrap(), Population::case_study_reference());
        assert_eq!(cfg.grid_points().len(), 5);
    }

    #[test]
    fn sweep_parameter_names() {
        let cfg = ExperimentConfig::from_json(r#"{"sweep": {"parameter": "rho_B", "values": [0.1]}}"#)
            .unwrap();
        assert_eq!(cfg.sweep.parameter, SweepParameter::SignalQuality);
        let pop = cfg.alternative_population(None, 0.1).unwrap();
        assert_eq!(pop.types[1].rho, 0.1);
        assert_eq!(pop.types[0].rho, 0.5);
        assert!(ExperimentConfig::from_json(r#"{"sweep": {"parameter": "alpha_B"}}"#).is_err());
    }

    #[test]
    fn series_expand_in_order() {
        let cfg = ExperimentConfig::from_json(
            r#"{"sweep": {"parameter": "theta_B", "values": [0, 1],
                "series": {"parameter": "p_s_B", "values": [0.1, 0.9]}}}"#,
        )
        .unwrap();
        assert_eq!(
            cfg.grid_points(),
            vec![(Some(0.1), 0.0), (Some(0.1), 1.0), (Some(0.9), 0.0), (Some(0.9), 1.0)]
        );
        let pop = cfg.alternative_population(Some(0.9), 1.0).unwrap();
        assert_eq!((pop.types[1].p_s, pop.types[1].theta), (0.9, 1.0));
    }

    #[test]
    fn invalid_values_are_rejected() {
        for bad in [
            r#"{"sweep": {"parameter": "p_s_B", "values": [1.0]}}"#,
            r#"{"reference": {"weight": 0.7}}"#,
            r#"{"solver": {"damping": 0}}"#,
            r#"{"quadrature": {"nodes": 0}}"#,
            r#"{"market": {"lambda": -1}}"#,
            r#"{"unknown": 1}"#,
            r#"{"sweep": {"parameter": "p_s_B", "series": {"parameter": "p_s_B", "values": [0.2]}}}"#,
        ] {
            assert!(ExperimentConfig::from_json(bad).is_err(), "{bad}");
        }
    }
}
