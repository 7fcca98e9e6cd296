//! Fixed-point solvers for n-agent and mean-field equilibria.

use crate::error::{Error, Result};
use crate::meanfield::{aggregate, MeanFieldStats};
use crate::metrics::{m_mf, m_nagent, peer_xbar0, value_mf, Evaluation};
use crate::model::{
    strategy_distance, validate_population, AdmissibleInterval, InvestorType, Players, Population,
    PositionRow, Strategy,
};
use crate::quad::Quadrature;
use crate::response::{best_response, best_response_nagent, best_response_to_stats};
use crate::scalar::Real;

/// Iterations at full step after which a non-monotone residual triggers damping.
pub const OSCILLATION_WINDOW: usize = 50;

/// Damping used after an oscillation is detected.
pub const RETRY_DAMPING: f64 = 0.5;

/// Starting point of the fixed-point iteration.
#[derive(Debug, Clone, PartialEq)]
pub enum Init<F> {
    Zeros,
    /// Every position at the type's Merton fraction, clipped to the admissible interval.
    Merton,
    Given(Strategy<F>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig<F> {
    pub tol: F,
    pub max_iter: usize,
    pub damping: F,
    pub init: Init<F>,
    /// Horizon used for the reported values.
    pub horizon: F,
}

impl<F: Real> Default for SolverConfig<F> {
    fn default() -> Self {
        Self {
            tol: F::lit(1e-8),
            max_iter: 500,
            damping: F::one(),
            init: Init::Zeros,
            horizon: F::one(),
        }
    }
}

impl<F: Real> SolverConfig<F> {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > F::zero()) {
            return Err(Error::InvalidParameter {
                name: "tol",
                reason: format!("{} must be positive", self.tol),
            });
        }
        if !(self.damping > F::zero() && self.damping <= F::one()) {
            return Err(Error::InvalidParameter {
                name: "damping",
                reason: format!("{} must lie in (0, 1]", self.damping),
            });
        }
        if self.max_iter < 1 {
            return Err(Error::InvalidParameter {
                name: "max_iter",
                reason: "need at least one iteration".into(),
            });
        }
        if !(self.horizon >= F::zero()) {
            return Err(Error::InvalidParameter {
                name: "horizon",
                reason: format!("{} must be nonnegative", self.horizon),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics<F> {
    /// Residual at every iterate, starting with the initial point.
    pub residuals: Vec<F>,
    /// Damping in force when the iteration stopped.
    pub damping: F,
    /// Whether oscillation forced a switch to the retry damping.
    pub retried: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumResult<F> {
    pub strategy: Strategy<F>,
    pub residual: F,
    /// Number of updates applied to the initial point.
    pub iterations: usize,
    pub per_type_m: Vec<F>,
    pub per_type_value: Vec<F>,
    pub converged: bool,
    /// Environment generated by `strategy` (mean-field solvers only).
    pub stats: Option<MeanFieldStats<F>>,
    pub diagnostics: Diagnostics<F>,
}

struct Picard<S, F> {
    state: S,
    residual: F,
    iterations: usize,
    diagnostics: Diagnostics<F>,
}

fn picard<S: Clone, F: Real>(
    init: S,
    cfg: &SolverConfig<F>,
    map: impl Fn(&S) -> Result<S>,
    dist: impl Fn(&S, &S) -> Result<F>,
    relax: impl Fn(&S, &S, F) -> S,
) -> Result<Picard<S, F>> {
    let mut x = init;
    let mut omega = cfg.damping;
    let mut retried = false;
    let mut residuals = Vec::new();
    let mut k = 0;
    loop {
        let y = map(&x)?;
        let res = dist(&y, &x)?;
        residuals.push(res);
        if res < cfg.tol || k == cfg.max_iter {
            return Ok(Picard {
                state: x,
                residual: res,
                iterations: k,
                diagnostics: Diagnostics {
                    residuals,
                    damping: omega,
                    retried,
                },
            });
        }
        if k == OSCILLATION_WINDOW && !retried && omega == F::one() {
            let oscillating = residuals.windows(2).any(|w| w[1] > w[0]);
            if oscillating {
                omega = F::lit(RETRY_DAMPING);
                retried = true;
            }
        }
        x = relax(&x, &y, omega);
        k += 1;
    }
}

fn initial_strategy<F: Real>(
    types: &[InvestorType<F>],
    iv: &AdmissibleInterval<F>,
    init: &Init<F>,
) -> Result<Strategy<F>> {
    let s = match init {
        Init::Zeros => Strategy::constant(types.len(), iv.clamp(F::zero())),
        Init::Merton => Strategy::new(
            types
                .iter()
                .map(|t| PositionRow::constant(iv.clamp(t.merton_fraction())))
                .collect(),
        ),
        Init::Given(s) => s.clone(),
    };
    s.check_within(types.len(), iv)?;
    Ok(s)
}

fn relax_strategy<F: Real>(iv: AdmissibleInterval<F>) -> impl Fn(&Strategy<F>, &Strategy<F>, F) -> Strategy<F> {
    move |a, b, w| {
        let mut s = a.relax(b, w);
        for row in &mut s.rows {
            for x in row.0.iter_mut() {
                *x = iv.clamp(*x);
            }
        }
        s
    }
}

fn checked_population<F: Real>(pop: &Population<F>) -> Result<()> {
    let v = validate_population(pop);
    if v.is_empty() {
        Ok(())
    } else {
        Err(Error::InvalidPopulation(v))
    }
}

fn mf_result<F: Real>(
    pop: &Population<F>,
    q: &Quadrature<F>,
    cfg: &SolverConfig<F>,
    strategy: Strategy<F>,
    residual: F,
    iterations: usize,
    diagnostics: Diagnostics<F>,
) -> Result<EquilibriumResult<F>> {
    let stats = aggregate(pop, &strategy, q)?;
    let mut per_type_m = Vec::with_capacity(pop.len());
    let mut per_type_value = Vec::with_capacity(pop.len());
    for t in &pop.types {
        let m = m_mf(t, pop.interval, &stats, q, Evaluation::Maximized)?;
        per_type_m.push(m);
        per_type_value.push(value_mf(t, m, t.x0, stats.xbar0, cfg.horizon));
    }
    Ok(EquilibriumResult {
        strategy,
        residual,
        iterations,
        per_type_m,
        per_type_value,
        converged: residual < cfg.tol,
        stats: Some(stats),
        diagnostics,
    })
}

/// Mean-field equilibrium of a finite-type population by damped Picard iteration on strategies.
pub fn solve_mf_finite<F: Real>(
    pop: &Population<F>,
    q: &Quadrature<F>,
    cfg: &SolverConfig<F>,
) -> Result<EquilibriumResult<F>> {
    cfg.validate()?;
    checked_population(pop)?;
    let init = initial_strategy(&pop.types, &pop.interval, &cfg.init)?;
    let p = picard(
        init,
        cfg,
        |s| best_response(pop, s, q),
        |a, b| strategy_distance(a, b),
        relax_strategy(pop.interval),
    )?;
    mf_result(pop, q, cfg, p.state, p.residual, p.iterations, p.diagnostics)
}

/// Nash equilibrium of an n-agent game by damped Picard iteration on best responses.
pub fn solve_nagent<F: Real>(
    players: &Players<F>,
    q: &Quadrature<F>,
    cfg: &SolverConfig<F>,
) -> Result<EquilibriumResult<F>> {
    cfg.validate()?;
    let init = initial_strategy(&players.types, &players.interval, &cfg.init)?;
    let p = picard(
        init,
        cfg,
        |s| best_response_nagent(players, s, q),
        |a, b| strategy_distance(a, b),
        relax_strategy(players.interval),
    )?;
    let mut per_type_m = Vec::with_capacity(players.len());
    let mut per_type_value = Vec::with_capacity(players.len());
    for (i, t) in players.types.iter().enumerate() {
        let m = m_nagent(i, players, &p.state, q, Evaluation::Maximized)?;
        per_type_m.push(m);
        per_type_value.push(value_mf(t, m, t.x0, peer_xbar0(i, players), cfg.horizon));
    }
    Ok(EquilibriumResult {
        strategy: p.state,
        residual: p.residual,
        iterations: p.iterations,
        per_type_m,
        per_type_value,
        converged: p.residual < cfg.tol,
        stats: None,
        diagnostics: p.diagnostics,
    })
}

/// Mean-field equilibrium over a finite common-mark law, iterating on the
/// statistic `(sigma0pi_bar, m(e_1), ..., m(e_K))`.
pub fn solve_mf_statistic<F: Real>(
    pop: &Population<F>,
    common_marks: &[(F, F)],
    cfg: &SolverConfig<F>,
) -> Result<EquilibriumResult<F>> {
    cfg.validate()?;
    checked_population(pop)?;
    let (marks, probs): (Vec<F>, Vec<F>) = common_marks.iter().copied().unzip();
    let q = Quadrature::discrete(marks, probs)?;
    let init = initial_strategy(&pop.types, &pop.interval, &cfg.init)?;
    let stat0 = aggregate(pop, &init, &q)?.statistic();

    let stats_of = |m: &Vec<F>| {
        MeanFieldStats::from_statistic(m[0], F::zero(), F::one(), q.nodes.clone(), m[1..].to_vec())
    };
    let induced = |m: &Vec<F>| best_response_to_stats(pop, &stats_of(m)?, &q);
    let p = picard(
        stat0,
        cfg,
        |m| Ok(aggregate(pop, &induced(m)?, &q)?.statistic()),
        |a, b| {
            Ok(a.iter()
                .zip(b)
                .fold(F::zero(), |d, (x, y)| d.max((*x - *y).abs())))
        },
        |a, b, w| {
            a.iter()
                .zip(b)
                .map(|(x, y)| if w == F::one() { *y } else { (F::one() - w) * *x + w * *y })
                .collect()
        },
    )?;
    let strategy = induced(&p.state)?;
    mf_result(pop, &q, cfg, strategy, p.residual, p.iterations, p.diagnostics)
}

/// Sup-norm gap between `strat` and the best response to the environment it generates.
pub fn residual<F: Real>(pop: &Population<F>, strat: &Strategy<F>, q: &Quadrature<F>) -> Result<F> {
    strategy_distance(&best_response(pop, strat, q)?, strat)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Signal, Weight};

    fn merton_pop() -> Population<f64> {
        let mut pop = Population::case_study_reference();
        for t in &mut pop.types {
            t.market.lambda = 0.0;
            t.theta = 0.0;
        }
        pop
    }

    #[test]
    fn merton_case_takes_one_iteration() {
        let pop = merton_pop();
        let res = solve_mf_finite(&pop, &Quadrature::default(), &SolverConfig::default()).unwrap();
        assert!(res.converged);
        assert_eq!(res.iterations, 1);
        for t in 0..2 {
            for z in Signal::ALL {
                assert!((res.strategy.get(t, z) - 4.0 / 9.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn config_validation() {
        let bad = SolverConfig::<f64> {
            damping: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = SolverConfig::<f64> {
            tol: -1.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = SolverConfig::<f64> {
            max_iter: 0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn invalid_population_is_rejected() {
        let mut pop = Population::<f64>::case_study_reference();
        pop.types[0].alpha = 1.0;
        assert!(matches!(
            solve_mf_finite(&pop, &Quadrature::default(), &SolverConfig::default()),
            Err(Error::InvalidPopulation(_))
        ));
    }

    #[test]
    fn reference_equilibrium_is_self_consistent() {
        let pop = Population::<f64>::case_study_reference();
        let q = Quadrature::default();
        let res = solve_mf_finite(&pop, &q, &SolverConfig::default()).unwrap();
        assert!(res.converged, "residual {}", res.residual);
        assert!(residual(&pop, &res.strategy, &q).unwrap() < 1e-8);
        assert_eq!(res.stats.unwrap(), aggregate(&pop, &res.strategy, &q).unwrap());
        assert!(strategy_distance(&Strategy::new(vec![res.strategy.rows[0]]), &Strategy::new(vec![res.strategy.rows[1]])).unwrap() < 1e-8);
    }

    #[test]
    fn initial_residual_is_large() {
        let pop = Population::<f64>::case_study_reference();
        let q = Quadrature::default();
        assert!(residual(&pop, &Strategy::zeros(2), &q).unwrap() > 0.1);
    }

    #[test]
    fn residual_ignores_type_order() {
        let mut pop = Population::<f64>::case_study_reference();
        pop.types[1].p_s = 0.2;
        pop.types[1].theta = 0.9;
        let q = Quadrature::default();
        let mut s = Strategy::constant(2, 0.3);
        s.rows[1] = PositionRow::constant(0.6);
        let a = residual(&pop, &s, &q).unwrap();
        pop.types.swap(0, 1);
        s.rows.swap(0, 1);
        let b = residual(&pop, &s, &q).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn two_player_merton_game() {
        let mut t = InvestorType::case_study_reference(Weight::one());
        t.market.lambda = 0.0;
        t.theta = 0.0;
        let players = Players::new(vec![t, t], AdmissibleInterval::default()).unwrap();
        let res = solve_nagent(&players, &Quadrature::default(), &SolverConfig::default()).unwrap();
        assert_eq!(res.iterations, 1);
        assert!((res.per_type_m[0] - 0.0064f64 / 0.36).abs() < 1e-12);
        assert!((res.strategy.get(1, Signal::PlusOne) - 4.0f64 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_single_mark_statistic() {
        let mut pop = Population::<f64>::case_study_reference();
        for t in &mut pop.types {
            t.theta = 0.0;
        }
        // With sigma_hat = 0.1 and kappa_hat = 0 the mark 0.05 gives eta = 0.
        let res = solve_mf_statistic(&pop, &[(0.05, 1.0)], &SolverConfig::default()).unwrap();
        assert!(res.converged);
        let st = res.stats.unwrap();
        assert!((st.mean_jump[0] - 1.0).abs() < 1e-15);
        assert!((st.sigma0pi_bar - 0.3 * 4.0 / 9.0).abs() < 1e-12);
        assert!(solve_mf_statistic(&pop, &[(0.0, 0.7)], &SolverConfig::default()).is_err());
    }
}
