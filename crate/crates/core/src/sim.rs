//! Exact Monte Carlo simulation of wealth paths driven by shared and private noise.
//!
//! Randomness comes from a seed tree: every `(seed, stream)` pair is an
//! independent ChaCha8 stream, so agents can share a common path while keeping
//! their own idiosyncratic draws.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::meanfield::{log_drift, mean_log_terminal, MeanFieldStats};
use crate::model::{InvestorType, MarketParams, Population, PositionRow, Signal, Strategy};
use crate::scalar::{stable_sum, Real};
use crate::signal::{classify, eta, perturb};

pub const STREAM_JUMP_TIMES: u64 = 0;
pub const STREAM_COMMON_MARKS: u64 = 1;
pub const STREAM_W0: u64 = 2;
pub const STREAM_PATH_SEEDS: u64 = 3;
/// Agent `k` on a path draws from stream `STREAM_AGENT_BASE + k`.
pub const STREAM_AGENT_BASE: u64 = 1 << 32;

/// Independent generator for `(seed, stream)`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// `index`-th child seed of `seed` along `stream`.
pub fn child_seed(seed: u64, stream: u64, index: u64) -> u64 {
    let mut rng = stream_rng(seed, stream);
    rng.set_word_pos(u128::from(index) * 2);
    rng.random()
}

/// Shared part of the noise: jump times, common marks and common Brownian increments.
#[derive(Debug, Clone, PartialEq)]
pub struct CommonNoisePath<F> {
    pub jump_times: Vec<F>,
    pub common_marks: Vec<F>,
    /// Increments of the common Brownian motion between consecutive jump times and the horizon.
    pub w0_increments: Vec<F>,
    pub horizon: F,
    pub seed: u64,
}

impl<F: Real> CommonNoisePath<F> {
    pub fn w0_terminal(&self) -> F {
        stable_sum(self.w0_increments.iter().copied())
    }

    pub fn jump_count(&self) -> usize {
        self.jump_times.len()
    }
}

/// Outcome of one agent along a common path.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentPath<F> {
    pub terminal_wealth: F,
    pub log_terminal_wealth: F,
    /// Signal received at each jump.
    pub signals: Vec<Signal>,
    /// Wealth multiplier `1 + phi eta` at each jump.
    pub jump_factors: Vec<F>,
    pub seed: u64,
}

fn normal<F: Real>(rng: &mut ChaCha8Rng) -> F {
    F::lit(rng.sample::<f64, _>(StandardNormal))
}

/// Draws the common noise on `[0, horizon]`.
pub fn simulate_common<F: Real>(horizon: F, market: &MarketParams<F>, seed: u64) -> Result<CommonNoisePath<F>> {
    if !(horizon > F::zero()) {
        return Err(Error::InvalidParameter {
            name: "horizon",
            reason: format!("{horizon} must be positive"),
        });
    }
    let mut times = Vec::new();
    let lambda = market.lambda.as_f64();
    if lambda > 0.0 {
        let exp = Exp::new(lambda).map_err(|e| Error::InvalidParameter {
            name: "lambda",
            reason: e.to_string(),
        })?;
        let mut rng = stream_rng(seed, STREAM_JUMP_TIMES);
        let mut t = 0.0;
        loop {
            t += rng.sample::<f64, _>(exp);
            if t > horizon.as_f64() {
                break;
            }
            times.push(F::lit(t));
        }
    }
    let mut rng = stream_rng(seed, STREAM_COMMON_MARKS);
    let marks = times.iter().map(|_| normal(&mut rng)).collect();
    let mut rng = stream_rng(seed, STREAM_W0);
    let mut prev = F::zero();
    let mut w0 = Vec::with_capacity(times.len() + 1);
    for &t in times.iter().chain(std::iter::once(&horizon)) {
        let z: F = normal(&mut rng);
        w0.push(z * (t - prev).max(F::zero()).sqrt());
        prev = t;
    }
    Ok(CommonNoisePath {
        jump_times: times,
        common_marks: marks,
        w0_increments: w0,
        horizon,
        seed,
    })
}

/// Terminal wealth of one agent holding the signal-driven positions `row`.
///
/// The agent's stream supplies, in order, its idiosyncratic Brownian value at
/// the horizon and then one `(e_i1, e_i2)` pair per jump.
pub fn simulate_agent<F: Real>(
    ty: &InvestorType<F>,
    row: &PositionRow<F>,
    path: &CommonNoisePath<F>,
    seed: u64,
) -> AgentPath<F> {
    let mut rng = stream_rng(seed, 0);
    simulate_agent_with(ty, row, path, seed, &mut rng)
}

fn simulate_agent_with<F: Real>(
    ty: &InvestorType<F>,
    row: &PositionRow<F>,
    path: &CommonNoisePath<F>,
    seed: u64,
    rng: &mut ChaCha8Rng,
) -> AgentPath<F> {
    let m = &ty.market;
    let t = path.horizon;
    let phi0 = row.get(Signal::Zero);
    let w_t: F = normal::<F>(rng) * t.sqrt();
    let mut terms = vec![
        ty.x0.ln(),
        log_drift(m, phi0) * t,
        m.sigma * phi0 * w_t,
        m.sigma0 * phi0 * path.w0_terminal(),
    ];
    let law = m.jump_law();
    let mut signals = Vec::with_capacity(path.jump_count());
    let mut factors = Vec::with_capacity(path.jump_count());
    for &e_c in &path.common_marks {
        let e1: F = normal(rng);
        let e2: f64 = rng.random();
        let z = perturb(ty.rho, e_c, e1).expect("validated |rho| < 1");
        let s = classify(z, F::lit(e2) <= ty.p_s);
        let h = eta(&law, e_c);
        let factor = F::one() + row.get(s) * h;
        terms.push((row.get(s) * h).ln_1p());
        signals.push(s);
        factors.push(factor);
    }
    let log_x = stable_sum(terms);
    AgentPath {
        terminal_wealth: log_x.exp(),
        log_terminal_wealth: log_x,
        signals,
        jump_factors: factors,
        seed,
    }
}

/// Sample mean and its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate<F> {
    pub mean: F,
    pub std_error: F,
}

fn mean_and_se<F: Real>(xs: &[F]) -> Estimate<F> {
    let n = F::lit(xs.len() as f64);
    let mean = stable_sum(xs.iter().copied()) / n;
    let ss = stable_sum(xs.iter().map(|&x| (x - mean) * (x - mean)));
    let var = if xs.len() > 1 { ss / (n - F::one()) } else { F::zero() };
    Estimate {
        mean,
        std_error: (var / n).sqrt(),
    }
}

/// Expected terminal utility of each type against the mean field `stats`.
///
/// Path `p` uses the common seed `child_seed(seed, STREAM_PATH_SEEDS, p)`; type
/// `t` on that path uses agent stream `STREAM_AGENT_BASE + t`.
pub fn estimate_utility<F: Real>(
    pop: &Population<F>,
    strat: &Strategy<F>,
    stats: &MeanFieldStats<F>,
    n_paths: usize,
    horizon: F,
    seed: u64,
) -> Result<Vec<Estimate<F>>> {
    if n_paths < 100 {
        return Err(Error::InvalidParameter {
            name: "n_paths",
            reason: format!("{n_paths} < 100"),
        });
    }
    strat.check_admissible(pop)?;
    let market = pop.types.first().map(|t| t.market).ok_or(Error::InvalidPopulation(Vec::new()))?;
    let samples = (0..n_paths)
        .into_par_iter()
        .map(|p| {
            let path_seed = child_seed(seed, STREAM_PATH_SEEDS, p as u64);
            let path = simulate_common(horizon, &market, path_seed)?;
            let log_xbar = mean_log_terminal(stats, &path, horizon)?;
            Ok(pop
                .types
                .iter()
                .enumerate()
                .map(|(t, ty)| {
                    let mut rng = stream_rng(path_seed, STREAM_AGENT_BASE + t as u64);
                    let a = simulate_agent_with(ty, strat.row(t), &path, path_seed, &mut rng);
                    let b = ty.beta();
                    (b * (a.log_terminal_wealth - ty.theta * log_xbar)).exp() / b
                })
                .collect::<Vec<F>>())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((0..pop.len())
        .map(|t| {
            let col: Vec<F> = samples.iter().map(|s| s[t]).collect();
            mean_and_se(&col)
        })
        .collect())
}

/// Geometric average of `n` agents sharing one common path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometricAverage<F> {
    pub value: F,
    pub log_value: F,
    /// Standard error of `log_value` from the idiosyncratic spread.
    pub log_std_error: F,
}

/// Geometric average terminal wealth of `n` agents drawn i.i.d. from `pop` by weight.
///
/// Agent `k` draws its type and idiosyncratic noise from stream `STREAM_AGENT_BASE + k` of `seed`.
pub fn nagent_geometric_average<F: Real>(
    n: usize,
    pop: &Population<F>,
    strat: &Strategy<F>,
    path: &CommonNoisePath<F>,
    seed: u64,
) -> Result<GeometricAverage<F>> {
    if n == 0 {
        return Err(Error::InvalidParameter {
            name: "n",
            reason: "need at least one agent".into(),
        });
    }
    strat.check_admissible(pop)?;
    let cum: Vec<f64> = pop
        .types
        .iter()
        .scan(0.0, |acc, t| {
            *acc += t.weight.to_f64();
            Some(*acc)
        })
        .collect();
    let logs = (0..n)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream_rng(seed, STREAM_AGENT_BASE + k as u64);
            let u: f64 = rng.random::<f64>() * cum.last().copied().unwrap_or(1.0);
            let t = cum.iter().position(|&c| u < c).unwrap_or(pop.len() - 1);
            simulate_agent_with(&pop.types[t], strat.row(t), path, seed, &mut rng).log_terminal_wealth
        })
        .collect::<Vec<F>>();
    let est = mean_and_se(&logs);
    Ok(GeometricAverage {
        value: est.mean.exp(),
        log_value: est.mean,
        log_std_error: est.std_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn poisson_counts_and_marks() {
        let market = MarketParams::<f64>::case_study();
        let n = 100_000;
        let mut count = 0usize;
        let mut marks = Vec::new();
        for s in 0..n {
            let p = simulate_common(1.0, &market, s).unwrap();
            assert!(p.jump_times.windows(2).all(|w| w[0] < w[1]));
            assert_eq!(p.w0_increments.len(), p.jump_count() + 1);
            count += p.jump_count();
            marks.extend(p.common_marks);
        }
        let mean = count as f64 / n as f64;
        assert!((mean - 10.0).abs() < 3.0 * (10.0f64 / n as f64).sqrt());
        let mm = marks.iter().sum::<f64>() / marks.len() as f64;
        assert!(mm.abs() < 3.0 / (marks.len() as f64).sqrt());
    }

    #[test]
    fn no_intensity_no_jumps() {
        let mut market = MarketParams::<f64>::case_study();
        market.lambda = 0.0;
        for s in 0..100 {
            assert_eq!(simulate_common(1.0, &market, s).unwrap().jump_count(), 0);
        }
        assert!(simulate_common(0.0, &market, 0).is_err());
    }

    #[test]
    fn bank_account_and_closed_form() {
        let mut ty = InvestorType::<f64>::case_study_reference(crate::model::Weight::one());
        ty.market.r = 0.02;
        ty.x0 = 1.5;
        let path = simulate_common(2.0, &ty.market, 11).unwrap();
        let a = simulate_agent(&ty, &PositionRow::constant(0.0), &path, 3);
        assert!((a.terminal_wealth - 1.5 * (0.04f64).exp()).abs() < 1e-14);

        let mut market = ty.market;
        market.lambda = 0.0;
        let path = simulate_common(2.0, &market, 5).unwrap();
        let c = 0.4;
        let a = simulate_agent(&ty, &PositionRow::constant(c), &path, 3);
        let w0 = path.w0_terminal();
        let want = 1.5 * ((0.02 + c * 0.06 - 0.5 * 0.09 * c * c) * 2.0 + 0.3 * c * w0).exp();
        assert!((a.terminal_wealth - want).abs() < 1e-13);
    }

    #[test]
    fn admissible_positions_keep_wealth_positive() {
        let mut ty = InvestorType::<f64>::case_study_reference(crate::model::Weight::one());
        ty.market.sigma_hat = 5.0;
        let row = PositionRow::constant(1.0 - 1e-6);
        let path = CommonNoisePath {
            jump_times: vec![0.5],
            common_marks: vec![-8.0],
            w0_increments: vec![0.0, 0.0],
            horizon: 1.0,
            seed: 0,
        };
        let a = simulate_agent(&ty, &row, &path, 0);
        assert!(a.jump_factors[0] >= 1e-6);
        assert!(a.terminal_wealth > 0.0);
    }

    #[test]
    fn runs_are_reproducible_and_streams_separate() {
        let ty = InvestorType::<f64>::case_study_reference(crate::model::Weight::one());
        let path = simulate_common(1.0, &ty.market, 42).unwrap();
        let mut row = PositionRow::constant(0.5);
        row.set(Signal::PlusInf, 0.9);
        row.set(Signal::MinusInf, 0.1);
        assert!(path.jump_count() > 0);
        let a = simulate_agent(&ty, &row, &path, 1);
        let b = simulate_agent(&ty, &row, &path, 1);
        assert_eq!(a, b);
        let c = simulate_agent(&ty, &row, &path, 2);
        assert_ne!(a.terminal_wealth, c.terminal_wealth);
        assert_eq!(path, simulate_common(1.0, &ty.market, 42).unwrap());
        let mut r0 = stream_rng(9, 0);
        let mut r1 = stream_rng(9, 1);
        assert_ne!(r0.random::<u64>(), r1.random::<u64>());
        assert_ne!(child_seed(9, 3, 0), child_seed(9, 3, 1));
    }

    #[test]
    fn single_agent_average_and_neutral_positions() {
        let pop = Population::<f64>::case_study_reference();
        let path = simulate_common(1.0, &pop.types[0].market, 8).unwrap();
        let s = Strategy::constant(2, 0.3);
        let g = nagent_geometric_average(1, &pop, &s, &path, 4).unwrap();
        let mut rng = stream_rng(4, STREAM_AGENT_BASE);
        let u: f64 = rng.random();
        let t = usize::from(u >= 0.5);
        let a = simulate_agent_with(&pop.types[t], s.row(t), &path, 4, &mut stream_rng(4, STREAM_AGENT_BASE).clone_after(1));
        assert!((g.value - a.terminal_wealth).abs() < 1e-12 * a.terminal_wealth);
        let z = nagent_geometric_average(50, &pop, &Strategy::zeros(2), &path, 4).unwrap();
        assert!((z.value - 1.0).abs() < 1e-15);
    }

    trait CloneAfter {
        fn clone_after(self, draws: usize) -> Self;
    }

    impl CloneAfter for ChaCha8Rng {
        fn clone_after(mut self, draws: usize) -> Self {
            for _ in 0..draws {
                let _: f64 = self.random();
            }
            self
        }
    }
}
