//! Environment statistics induced by a population playing a strategy.

use crate::error::{Error, Result};
use crate::model::{Population, PositionRow, Signal, Strategy};
use crate::quad::{normal_prob, Quadrature};
use crate::scalar::{stable_sum, Real};
use crate::signal::{conditional_interval, eta, JumpLaw};
use crate::sim::CommonNoisePath;

/// What one type contributes to the mean jump.
#[derive(Debug, Clone, PartialEq)]
struct TypeProfile<F> {
    weight: F,
    p_s: F,
    rho: F,
    law: JumpLaw<F>,
    row: PositionRow<F>,
}

/// Sufficient statistic of the mean-field environment.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanFieldStats<F> {
    /// Weighted common-volatility exposure.
    pub sigma0pi_bar: F,
    /// Weighted log-wealth drift.
    pub taupi_bar: F,
    /// Geometric mean of initial wealth.
    pub xbar0: F,
    /// Common marks at which `mean_jump` is tabulated.
    pub nodes: Vec<F>,
    /// Mean jump factor `m(e_c)` at each node.
    pub mean_jump: Vec<F>,
    profile: Option<Vec<TypeProfile<F>>>,
}

impl<F: Real> MeanFieldStats<F> {
    /// Stats given directly by their statistic vector, without a strategy behind them.
    pub fn from_statistic(
        sigma0pi_bar: F,
        taupi_bar: F,
        xbar0: F,
        nodes: Vec<F>,
        mean_jump: Vec<F>,
    ) -> Result<Self> {
        if nodes.len() != mean_jump.len() {
            return Err(Error::InvalidParameter {
                name: "mean_jump",
                reason: format!("{} nodes vs {} values", nodes.len(), mean_jump.len()),
            });
        }
        if mean_jump.iter().any(|m| !(*m > F::zero())) || !(xbar0 > F::zero()) {
            return Err(Error::InvalidParameter {
                name: "mean_jump",
                reason: "mean jumps and xbar0 must be positive".into(),
            });
        }
        Ok(Self {
            sigma0pi_bar,
            taupi_bar,
            xbar0,
            nodes,
            mean_jump,
            profile: None,
        })
    }

    /// `m(e_c)` at an arbitrary common mark.
    ///
    /// Exact when the stats come from [`aggregate`]; otherwise only tabulated
    /// nodes can be evaluated.
    pub fn mean_jump_at(&self, e_c: F) -> Result<F> {
        match &self.profile {
            Some(p) => Ok(mean_jump_exact(p, e_c)),
            None => self
                .nodes
                .iter()
                .position(|&n| n == e_c)
                .map(|k| self.mean_jump[k])
                .ok_or(Error::NoMeanJumpProfile),
        }
    }

    /// Statistic vector `(sigma0pi_bar, m(e_1), ..., m(e_K))`.
    pub fn statistic(&self) -> Vec<F> {
        std::iter::once(self.sigma0pi_bar)
            .chain(self.mean_jump.iter().copied())
            .collect()
    }

    pub fn has_profile(&self) -> bool {
        self.profile.is_some()
    }
}

fn mean_jump_exact<F: Real>(profile: &[TypeProfile<F>], e_c: F) -> F {
    let terms = profile.iter().map(|t| t.weight * log_jump_of_type(t, e_c));
    stable_sum(terms).exp()
}

fn log_jump_of_type<F: Real>(t: &TypeProfile<F>, e_c: F) -> F {
    let h = eta(&t.law, e_c);
    let mut acc = (F::one() - t.p_s) * (t.row.get(Signal::Zero) * h).ln_1p();
    if t.p_s > F::zero() {
        let mut sig = F::zero();
        for z in Signal::NONZERO {
            let iv = conditional_interval(z, e_c, t.rho).expect("nonzero signal, |rho| < 1");
            let p = normal_prob(&iv).expect("ordered endpoints");
            sig = sig + (t.row.get(z) * h).ln_1p() * p;
        }
        acc = acc + t.p_s * sig;
    }
    acc
}

/// Log-wealth drift `r + phi (kappa - r) - (sigma^2 + sigma0^2) phi^2 / 2` of a constant position.
pub fn log_drift<F: Real>(market: &crate::model::MarketParams<F>, phi: F) -> F {
    market.r + phi * (market.kappa - market.r) - F::lit(0.5) * market.variance() * phi * phi
}

/// Aggregates a population playing `strat` into its mean-field statistic.
pub fn aggregate<F: Real>(
    pop: &Population<F>,
    strat: &Strategy<F>,
    q: &Quadrature<F>,
) -> Result<MeanFieldStats<F>> {
    strat.check_admissible(pop)?;
    let profile: Vec<TypeProfile<F>> = pop
        .types
        .iter()
        .zip(&strat.rows)
        .map(|(t, row)| TypeProfile {
            weight: t.weight.to_real(),
            p_s: t.p_s,
            rho: t.rho,
            law: t.market.jump_law(),
            row: *row,
        })
        .collect();

    let sigma0pi_bar = stable_sum(
        pop.types
            .iter()
            .zip(&profile)
            .map(|(t, p)| p.weight * t.market.sigma0 * p.row.get(Signal::Zero)),
    );
    let taupi_bar = stable_sum(
        pop.types
            .iter()
            .zip(&profile)
            .map(|(t, p)| p.weight * log_drift(&t.market, p.row.get(Signal::Zero))),
    );
    let xbar0 = stable_sum(
        pop.types
            .iter()
            .zip(&profile)
            .map(|(t, p)| p.weight * t.x0.ln()),
    )
    .exp();
    let mean_jump = q
        .nodes
        .iter()
        .map(|&e| mean_jump_exact(&profile, e))
        .collect();

    Ok(MeanFieldStats {
        sigma0pi_bar,
        taupi_bar,
        xbar0,
        nodes: q.nodes.clone(),
        mean_jump,
        profile: Some(profile),
    })
}

/// `log` of the mean-field geometric average wealth at `horizon` along a common path.
pub fn mean_log_terminal<F: Real>(
    stats: &MeanFieldStats<F>,
    path: &CommonNoisePath<F>,
    horizon: F,
) -> Result<F> {
    let mut terms = vec![
        stats.xbar0.ln(),
        stats.taupi_bar * horizon,
        stats.sigma0pi_bar * path.w0_terminal(),
    ];
    for &e in &path.common_marks {
        terms.push(stats.mean_jump_at(e)?.ln());
    }
    Ok(stable_sum(terms))
}
