//! Signal-driven Nash and mean-field equilibria for power-utility investors
//! who care about their peers' wealth and receive noisy signals about jumps
//! in a common stock.
//!
//! The numerical core is generic over [`scalar::Real`] (`f32` or `f64`); the
//! aliases below fix it to `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod equilibrium;
pub mod error;
pub mod meanfield;
pub mod metrics;
pub mod model;
pub mod quad;
pub mod response;
pub mod scalar;
pub mod signal;
pub mod sim;

pub use error::{Error, Result};
pub use model::{Signal, SignalAlphabet, Weight};

pub type MarketParams = model::MarketParams<f64>;
pub type InvestorType = model::InvestorType<f64>;
pub type Population = model::Population<f64>;
pub type Players = model::Players<f64>;
pub type Strategy = model::Strategy<f64>;
pub type PositionRow = model::PositionRow<f64>;
pub type AdmissibleInterval = model::AdmissibleInterval<f64>;
pub type Quadrature = quad::Quadrature<f64>;
pub type MeanFieldStats = meanfield::MeanFieldStats<f64>;
pub type SolverConfig = equilibrium::SolverConfig<f64>;
pub type EquilibriumResult = equilibrium::EquilibriumResult<f64>;
pub type CommonNoisePath = sim::CommonNoisePath<f64>;
