//! Value constants, closed-form value functions and certainty equivalents.

use crate::error::Result;
use crate::meanfield::MeanFieldStats;
use crate::model::{AdmissibleInterval, InvestorType, Players, PositionRow, Signal, Strategy};
use crate::quad::Quadrature;
use crate::response::{target_no_signal, target_signal, TargetContext};
use crate::scalar::{stable_sum, Real};

/// Which positions the jump and drift terms of `M` are evaluated at.
#[derive(Debug, Clone, Copy)]
pub enum Evaluation<'a, F> {
    /// The given signal -> position table.
    At(&'a PositionRow<F>),
    /// The best response to the environment.
    Maximized,
}

/// Value exponent and resulting value of one type.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValueReport<F> {
    pub m: F,
    pub value: F,
    pub horizon: F,
}

/// `M` for a prepared context.
pub fn m_from_context<F: Real>(ctx: &TargetContext<F>, eval: Evaluation<'_, F>) -> Result<F> {
    let row = match eval {
        Evaluation::At(r) => *r,
        Evaluation::Maximized => ctx.respond()?,
    };
    let t = &ctx.ty;
    let agg = &ctx.aggregates;
    let half = F::lit(0.5);
    let mut terms = vec![
        t.theta * t.market.r,
        -t.theta * agg.drift(),
        half * t.theta * t.theta * t.beta() * agg.log_variance(),
        target_no_signal(row.get(Signal::Zero), ctx)?,
    ];
    for z in Signal::NONZERO {
        let mu = ctx.frequency(z);
        if mu > F::zero() {
            terms.push(mu * target_signal(row.get(z), z, ctx)?);
        }
    }
    Ok(stable_sum(terms))
}

/// Mean-field value exponent of `ty` facing `stats`.
pub fn m_mf<F: Real>(
    ty: &InvestorType<F>,
    interval: AdmissibleInterval<F>,
    stats: &MeanFieldStats<F>,
    q: &Quadrature<F>,
    eval: Evaluation<'_, F>,
) -> Result<F> {
    let ctx = TargetContext::mean_field(ty, interval, stats, q)?;
    m_from_context(&ctx, eval)
}

/// Value exponent of player `i` facing the other players' strategies.
pub fn m_nagent<F: Real>(
    i: usize,
    players: &Players<F>,
    strat: &Strategy<F>,
    q: &Quadrature<F>,
    eval: Evaluation<'_, F>,
) -> Result<F> {
    let ctx = TargetContext::peers(i, players, strat, q)?;
    m_from_context(&ctx, eval)
}

/// `u(x0 xbar0^-theta) exp(T (1 - alpha) ((1 - theta) r + M))`.
pub fn value_mf<F: Real>(ty: &InvestorType<F>, m: F, x0: F, xbar0: F, horizon: F) -> F {
    let rate = (F::one() - ty.theta) * ty.market.r + m;
    ty.utility(x0, xbar0) * (horizon * ty.beta() * rate).exp()
}

/// Geometric mean of the other players' initial wealth.
pub fn peer_xbar0<F: Real>(i: usize, players: &Players<F>) -> F {
    let n = F::lit((players.len() - 1) as f64);
    let s = stable_sum(
        players
            .types
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, t)| t.x0.ln()),
    );
    (s / n).exp()
}

pub fn value_report<F: Real>(ty: &InvestorType<F>, m: F, xbar0: F, horizon: F) -> ValueReport<F> {
    ValueReport {
        m,
        value: value_mf(ty, m, ty.x0, xbar0, horizon),
        horizon,
    }
}

/// Initial capital ratio `exp(M_alt - M_ref)` equating reference and alternative utilities.
pub fn certainty_equivalent<F: Real>(m_alt: F, m_ref: F) -> F {
    (m_alt - m_ref).exp()
}
