//! Best-response targets and their maximisation.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::meanfield::{aggregate, log_drift, MeanFieldStats};
use crate::model::{AdmissibleInterval, InvestorType, Players, Population, PositionRow, Signal, Strategy};
use crate::quad::{normal_prob, Quadrature};
use crate::scalar::{stable_sum, Real};
use crate::signal::{conditional_interval, eta};

/// Environment aggregates a best response depends on besides the jump factor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Aggregates<F> {
    MeanField {
        sigma0pi_bar: F,
        taupi_bar: F,
    },
    /// Averages over the other players of an n-agent game.
    Peers {
        taupi: F,
        sigma0pi: F,
        /// Average of `(sigma_j pi_j)^2` over peers.
        sigma2pi2: F,
        /// Number of peers.
        n: usize,
    },
}

impl<F: Real> Aggregates<F> {
    pub fn common_exposure(&self) -> F {
        match *self {
            Aggregates::MeanField { sigma0pi_bar, .. } => sigma0pi_bar,
            Aggregates::Peers { sigma0pi, .. } => sigma0pi,
        }
    }

    pub fn drift(&self) -> F {
        match *self {
            Aggregates::MeanField { taupi_bar, .. } => taupi_bar,
            Aggregates::Peers { taupi, .. } => taupi,
        }
    }

    /// Variance rate of the peer average's log.
    pub fn log_variance(&self) -> F {
        match *self {
            Aggregates::MeanField { sigma0pi_bar, .. } => sigma0pi_bar * sigma0pi_bar,
            Aggregates::Peers {
                sigma0pi,
                sigma2pi2,
                n,
                ..
            } => sigma0pi * sigma0pi + sigma2pi2 / F::lit(n as f64),
        }
    }
}

/// Everything one type's targets need, tabulated at the quadrature nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetContext<F> {
    pub ty: InvestorType<F>,
    pub interval: AdmissibleInterval<F>,
    pub aggregates: Aggregates<F>,
    nodes: Vec<F>,
    weights: Vec<F>,
    eta: Vec<F>,
    /// Log of the peer factor `E[xbar-jump^(-theta beta) | e_c]`.
    ln_g: Vec<F>,
    /// Quadrature weight times posterior density of `e_c` given each signal.
    posterior: Vec<Vec<F>>,
    /// Arrival rate of each signal; for the null signal, `lambda (1 - p_s)`.
    freq: [F; Signal::COUNT],
}

impl<F: Real> TargetContext<F> {
    /// Context of `ty` facing mean-field statistics tabulated on `q`.
    pub fn mean_field(
        ty: &InvestorType<F>,
        interval: AdmissibleInterval<F>,
        stats: &MeanFieldStats<F>,
        q: &Quadrature<F>,
    ) -> Result<Self> {
        if stats.nodes != q.nodes {
            return Err(Error::InvalidParameter {
                name: "stats",
                reason: "mean-jump table is not tabulated on the quadrature nodes".into(),
            });
        }
        let c = -ty.theta * ty.beta();
        let ln_g = stats.mean_jump.iter().map(|m| c * m.ln()).collect();
        let aggregates = Aggregates::MeanField {
            sigma0pi_bar: stats.sigma0pi_bar,
            taupi_bar: stats.taupi_bar,
        };
        Self::build(ty, interval, aggregates, ln_g, q)
    }

    /// Context of player `i` facing the other players' strategies.
    pub fn peers(i: usize, players: &Players<F>, strat: &Strategy<F>, q: &Quadrature<F>) -> Result<Self> {
        strat.check_within(players.len(), &players.interval)?;
        let ty = &players.types[i];
        let n = players.len() - 1;
        let nf = F::lit(n as f64);
        let others = || (0..players.len()).filter(move |&j| j != i);

        let sigma0pi = stable_sum(
            others().map(|j| players.types[j].market.sigma0 * strat.get(j, Signal::Zero)),
        ) / nf;
        let taupi = stable_sum(
            others().map(|j| log_drift(&players.types[j].market, strat.get(j, Signal::Zero))),
        ) / nf;
        let sigma2pi2 = stable_sum(others().map(|j| {
            let x = players.types[j].market.sigma * strat.get(j, Signal::Zero);
            x * x
        })) / nf;

        let expo = -ty.theta * ty.beta() / nf;
        let mut ln_g = vec![F::zero(); q.len()];
        for j in others() {
            let pj = &players.types[j];
            let law = pj.market.jump_law();
            let row = strat.row(j);
            for (k, &e) in q.nodes.iter().enumerate() {
                let h = eta(&law, e);
                let factor = |z: Signal| (expo * (row.get(z) * h).ln_1p()).exp();
                let mut terms = vec![(F::one() - pj.p_s) * factor(Signal::Zero)];
                if pj.p_s > F::zero() {
                    for z in Signal::NONZERO {
                        let p = normal_prob(&conditional_interval(z, e, pj.rho)?)?;
                        terms.push(pj.p_s * p * factor(z));
                    }
                }
                ln_g[k] = ln_g[k] + stable_sum(terms).ln();
            }
        }
        let aggregates = Aggregates::Peers {
            taupi,
            sigma0pi,
            sigma2pi2,
            n,
        };
        Self::build(ty, players.interval, aggregates, ln_g, q)
    }

    fn build(
        ty: &InvestorType<F>,
        interval: AdmissibleInterval<F>,
        aggregates: Aggregates<F>,
        ln_g: Vec<F>,
        q: &Quadrature<F>,
    ) -> Result<Self> {
        let law = ty.market.jump_law();
        let eta_k = q.nodes.iter().map(|&e| eta(&law, e)).collect();
        let mut freq = [F::zero(); Signal::COUNT];
        freq[Signal::Zero.index()] = ty.market.lambda * (F::one() - ty.p_s);
        let mut posterior = vec![Vec::new(); Signal::COUNT];
        for z in Signal::NONZERO {
            let pz = q.signal_prob(z, ty.rho)?;
            freq[z.index()] = ty.market.lambda * ty.p_s * pz;
            let mut w = Vec::with_capacity(q.len());
            for (&e, &qw) in q.nodes.iter().zip(&q.weights) {
                let c = normal_prob(&conditional_interval(z, e, ty.rho)?)?;
                w.push(if pz > F::zero() { qw * c / pz } else { F::zero() });
            }
            posterior[z.index()] = w;
        }
        Ok(Self {
            ty: *ty,
            interval,
            aggregates,
            nodes: q.nodes.clone(),
            weights: q.weights.clone(),
            eta: eta_k,
            ln_g,
            posterior,
            freq,
        })
    }

    /// Arrival rate of signal `z` (for the null signal, of unsignalled jumps).
    pub fn frequency(&self, z: Signal) -> F {
        self.freq[z.index()]
    }

    /// Whether the target for `z` carries information; inactive signals copy the null position.
    pub fn is_active(&self, z: Signal) -> bool {
        z.is_null() || (self.freq[z.index()] > F::zero() && !self.ty.market.jump_law().is_degenerate())
    }

    /// Slope contribution of the common-noise concern term.
    fn concern_slope(&self) -> F {
        let t = &self.ty;
        -t.theta * t.beta() * t.market.sigma0 * self.aggregates.common_exposure()
    }

    /// Log of the jump factor's contribution to relative-utility growth at node `k`.
    fn log_kernel(&self, phi: F, k: usize) -> F {
        self.ty.beta() * (phi * self.eta[k]).ln_1p() + self.ln_g[k]
    }

    /// `sum_k w_k (u(1 + phi eta, m) - u(1, 1))`, and its first two derivatives.
    fn jump_integral(&self, phi: F, w: &[F]) -> Result<(F, F, F)> {
        let b = self.ty.beta();
        let mut v = Vec::with_capacity(w.len());
        let mut d1 = Vec::with_capacity(w.len());
        let mut d2 = Vec::with_capacity(w.len());
        for (k, &wk) in w.iter().enumerate() {
            let s = self.log_kernel(phi, k);
            let r = self.eta[k] / (F::one() + phi * self.eta[k]);
            let e = s.exp();
            let val = s.exp_m1() / b;
            if !val.is_finite() {
                return Err(Error::NonFinite {
                    index: k,
                    node: self.nodes[k].as_f64(),
                });
            }
            v.push(wk * val);
            d1.push(wk * r * e);
            d2.push(wk * (b - F::one()) * r * r * e);
        }
        Ok((stable_sum(v), stable_sum(d1), stable_sum(d2)))
    }

    fn no_signal_parts(&self, phi: F) -> Result<(F, F, F)> {
        let t = &self.ty;
        let m = &t.market;
        let var = m.variance();
        let half = F::lit(0.5);
        let slope = m.kappa - m.r + self.concern_slope();
        let lam = self.freq[Signal::Zero.index()];
        let (jv, jd1, jd2) = if lam > F::zero() {
            let (a, b, c) = self.jump_integral(phi, &self.weights)?;
            (lam * a, lam * b, lam * c)
        } else {
            (F::zero(), F::zero(), F::zero())
        };
        Ok((
            slope * phi - half * t.alpha * var * phi * phi + jv,
            slope - t.alpha * var * phi + jd1,
            -t.alpha * var + jd2,
        ))
    }

    fn signal_parts(&self, phi: F, z: Signal) -> Result<(F, F, F)> {
        if z.is_null() {
            return Err(Error::NullSignal);
        }
        self.jump_integral(phi, &self.posterior[z.index()])
    }

    /// Target value and derivatives for any signal.
    fn parts(&self, phi: F, z: Signal) -> Result<(F, F, F)> {
        if z.is_null() {
            self.no_signal_parts(phi)
        } else {
            self.signal_parts(phi, z)
        }
    }

    /// Quadrature sum of the posterior weights of `z` (one up to truncation).
    pub fn posterior_mass(&self, z: Signal) -> F {
        stable_sum(self.posterior[z.index()].iter().copied())
    }

    /// Optimal position and target value for signal `z`.
    pub fn maximize(&self, z: Signal) -> Result<(F, F)> {
        maximize_smooth_concave(|x| self.parts(x, z), &self.interval)
    }

    /// Best responses for every signal.
    pub fn respond(&self) -> Result<PositionRow<F>> {
        let (phi0, _) = self.maximize(Signal::Zero)?;
        let mut row = PositionRow::constant(phi0);
        for z in Signal::NONZERO {
            let iv = self.interval;
            let x = if self.is_active(z) {
                self.maximize(z)?.0
            } else {
                iv.clamp(phi0)
            };
            row.set(z, x);
        }
        Ok(row)
    }
}

/// Target for the null signal: diffusive growth plus unsignalled jumps.
pub fn target_no_signal<F: Real>(phi: F, ctx: &TargetContext<F>) -> Result<F> {
    Ok(ctx.no_signal_parts(phi)?.0)
}

/// Target for a nonzero signal: expected jump utility under the posterior of the common mark.
pub fn target_signal<F: Real>(phi: F, z: Signal, ctx: &TargetContext<F>) -> Result<F> {
    Ok(ctx.signal_parts(phi, z)?.0)
}

/// Maximises a strictly concave `f` on `iv` by golden-section search down to
/// bracket width `tol`, then one parabolic step through the best three points.
pub fn maximize_concave_1d<F: Real>(
    f: impl Fn(F) -> F,
    iv: &AdmissibleInterval<F>,
    tol: F,
) -> Result<(F, F)> {
    if !(tol > F::zero()) {
        return Err(Error::InvalidParameter {
            name: "tol",
            reason: format!("{tol} must be positive"),
        });
    }
    let eval = |x: F| {
        let v = f(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite {
                index: 0,
                node: x.as_f64(),
            })
        }
    };
    let (mut a, mut b) = (iv.lo, iv.hi);
    if b - a <= tol {
        let x = (a + b) * F::lit(0.5);
        return Ok((x, eval(x)?));
    }
    let g = F::lit(0.618_033_988_749_894_8);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = eval(c)?;
    let mut fd = eval(d)?;
    while b - a > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = eval(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = eval(d)?;
        }
    }
    let (mut best, mut fbest) = if fc >= fd { (c, fc) } else { (d, fd) };
    for x in [iv.lo, iv.hi] {
        let fx = eval(x)?;
        if fx > fbest {
            best = x;
            fbest = fx;
        }
    }
    // One parabolic step through three points around the incumbent, spaced
    // widely enough for the function values to resolve the curvature.
    let h = tol.max(F::lit(1e-3) * iv.width());
    let x2 = best.max(iv.lo + h).min(iv.hi - h);
    if h > F::zero() && iv.lo + h <= iv.hi - h {
        let (x1, x3) = (x2 - h, x2 + h);
        let (f1, f2, f3) = (eval(x1)?, eval(x2)?, eval(x3)?);
        let den = f1 - F::lit(2.0) * f2 + f3;
        if den < F::zero() {
            let x = x2 + F::lit(0.5) * h * (f1 - f3) / den;
            if iv.contains(x) {
                let fx = eval(x)?;
                if fx >= fbest {
                    best = x;
                    fbest = fx;
                }
            }
        }
    }
    Ok((best, fbest))
}

/// Maximises a smooth concave target given its value and first two derivatives,
/// by safeguarded Newton iteration on the first-order condition.
pub fn maximize_smooth_concave<F: Real>(
    parts: impl Fn(F) -> Result<(F, F, F)>,
    iv: &AdmissibleInterval<F>,
) -> Result<(F, F)> {
    let (lo, hi) = (iv.lo, iv.hi);
    let (f_lo, d_lo, _) = parts(lo)?;
    if d_lo <= F::zero() || lo == hi {
        return Ok((lo, f_lo));
    }
    let (f_hi, d_hi, _) = parts(hi)?;
    if d_hi >= F::zero() {
        return Ok((hi, f_hi));
    }
    let (mut a, mut b) = (lo, hi);
    let mut x = a - d_lo * (b - a) / (d_hi - d_lo);
    let eps = F::epsilon();
    for _ in 0..200 {
        let (_, d, dd) = parts(x)?;
        if d == F::zero() {
            break;
        }
        if d > F::zero() {
            a = x;
        } else {
            b = x;
        }
        let newton = if dd < F::zero() { x - d / dd } else { F::nan() };
        let next = if newton > a && newton < b {
            newton
        } else {
            (a + b) * F::lit(0.5)
        };
        let step = (next - x).abs();
        x = next;
        if step <= F::lit(4.0) * eps * x.abs().max(F::one()) || b - a <= eps * F::lit(4.0) {
            break;
        }
    }
    let (fx, _, _) = parts(x)?;
    Ok((x, fx))
}

/// Best responses of every type to the mean field generated by `strat_env`.
pub fn best_response<F: Real>(
    pop: &Population<F>,
    strat_env: &Strategy<F>,
    q: &Quadrature<F>,
) -> Result<Strategy<F>> {
    let stats = aggregate(pop, strat_env, q)?;
    best_response_to_stats(pop, &stats, q)
}

/// Best responses of every type to fixed mean-field statistics.
pub fn best_response_to_stats<F: Real>(
    pop: &Population<F>,
    stats: &MeanFieldStats<F>,
    q: &Quadrature<F>,
) -> Result<Strategy<F>> {
    let rows = pop
        .types
        .par_iter()
        .map(|t| TargetContext::mean_field(t, pop.interval, stats, q)?.respond())
        .collect::<Result<Vec<_>>>()?;
    Ok(Strategy::new(rows))
}

/// Best response of each player to the others' current strategies.
pub fn best_response_nagent<F: Real>(
    players: &Players<F>,
    strat: &Strategy<F>,
    q: &Quadrature<F>,
) -> Result<Strategy<F>> {
    let rows = (0..players.len())
        .into_par_iter()
        .map(|i| TargetContext::peers(i, players, strat, q)?.respond())
        .collect::<Result<Vec<_>>>()?;
    Ok(Strategy::new(rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Weight;

    fn reference() -> (Population<f64>, Quadrature<f64>) {
        (Population::case_study_reference(), Quadrature::default())
    }

    fn merton_pop() -> Population<f64> {
        let mut pop = Population::case_study_reference();
        for t in &mut pop.types {
            t.market.lambda = 0.0;
            t.theta = 0.0;
        }
        pop
    }

    fn ctx_for(pop: &Population<f64>, s: &Strategy<f64>, q: &Quadrature<f64>, t: usize) -> TargetContext<f64> {
        let stats = aggregate(pop, s, q).unwrap();
        TargetContext::mean_field(&pop.types[t], pop.interval, &stats, q).unwrap()
    }

    #[test]
    fn merton_target_value() {
        let pop = merton_pop();
        let q = Quadrature::default();
        let ctx = ctx_for(&pop, &Strategy::zeros(2), &q, 0);
        let v = target_no_signal(4.0 / 9.0, &ctx).unwrap();
        assert!((v - 0.0064 / 0.36).abs() < 1e-15);
        assert_eq!(target_no_signal(0.0, &ctx).unwrap(), 0.0);
    }

    #[test]
    fn no_signal_target_is_refinement_stable() {
        let (pop, q) = reference();
        let fine = Quadrature::gauss_legendre_normal(512, 10.0).unwrap();
        let s = Strategy::constant(2, 0.5);
        let a = target_no_signal(0.5, &ctx_for(&pop, &s, &q, 0)).unwrap();
        let b = target_no_signal(0.5, &ctx_for(&pop, &s, &fine, 0)).unwrap();
        assert!((a - b).abs() < 1e-7, "{a} vs {b}");
    }

    #[test]
    fn signal_target_in_neutral_environment() {
        let (pop, q) = reference();
        let ctx = ctx_for(&pop, &Strategy::zeros(2), &q, 0);
        for z in Signal::NONZERO {
            assert_eq!(target_signal(0.0, z, &ctx).unwrap(), 0.0);
            assert!((ctx.posterior_mass(z) - 1.0).abs() < 1e-8);
        }
        assert_eq!(target_signal(0.3, Signal::Zero, &ctx), Err(Error::NullSignal));
    }

    #[test]
    fn uninformative_signals_have_mirror_targets() {
        let (mut pop, q) = reference();
        for t in &mut pop.types {
            t.rho = 0.0;
        }
        let ctx = ctx_for(&pop, &Strategy::constant(2, 0.4), &q, 1);
        for z in Signal::NONZERO {
            for &phi in &[0.1, 0.5, 0.9] {
                let a = target_signal(phi, z, &ctx).unwrap();
                let b = target_signal(phi, z.mirror(), &ctx).unwrap();
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn golden_section_examples() {
        let iv = AdmissibleInterval::new(0.0, 1.0).unwrap();
        let (x, _) = maximize_concave_1d(|x: f64| -(x - 0.3) * (x - 0.3), &iv, 1e-10).unwrap();
        assert!((x - 0.3).abs() < 1e-10);
        let (x, v) = maximize_concave_1d(|x: f64| x, &iv, 1e-10).unwrap();
        assert_eq!((x, v), (1.0, 1.0));
        let (x, _) = maximize_concave_1d(|x: f64| 0.08 * x - 0.09 * x * x, &iv, 1e-10).unwrap();
        assert!((x - 4.0 / 9.0).abs() < 1e-10);
        assert!(maximize_concave_1d(|x: f64| if x > 0.7 { f64::NAN } else { -x }, &iv, 1e-10).is_err());
    }

    #[test]
    fn newton_maximiser_matches_vertex() {
        let iv = AdmissibleInterval::new(0.0, 1.0).unwrap();
        let f = |x: f64| Ok((0.08 * x - 0.09 * x * x, 0.08 - 0.18 * x, -0.18));
        let (x, _) = maximize_smooth_concave(f, &iv).unwrap();
        assert!((x - 4.0 / 9.0).abs() < 1e-15);
        let g = |x: f64| Ok((x, 1.0, 0.0));
        assert_eq!(maximize_smooth_concave(g, &iv).unwrap().0, 1.0);
    }

    #[test]
    fn degenerate_jumps_give_merton() {
        let mut pop = Population::<f64>::case_study_reference();
        for t in &mut pop.types {
            t.market.sigma_hat = 0.0;
            t.theta = 0.0;
        }
        let q = Quadrature::default();
        for env in [Strategy::zeros(2), Strategy::constant(2, 0.7)] {
            let br = best_response(&pop, &env, &q).unwrap();
            for t in 0..2 {
                for z in Signal::ALL {
                    assert!((br.get(t, z) - 4.0 / 9.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn no_drift_no_jumps_no_concern_gives_zero() {
        let mut pop = merton_pop();
        for t in &mut pop.types {
            t.market.kappa = t.market.r;
        }
        let br = best_response(&pop, &Strategy::constant(2, 0.5), &Quadrature::default()).unwrap();
        assert_eq!(br, Strategy::zeros(2));
    }

    #[test]
    fn merton_reduction_is_environment_free() {
        let pop = merton_pop();
        let q = Quadrature::default();
        let a = best_response(&pop, &Strategy::zeros(2), &q).unwrap();
        let b = best_response(&pop, &Strategy::constant(2, 0.9), &q).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn reference_response_matches_grid_search() {
        let (pop, q) = reference();
        let env = Strategy::constant(2, 0.5);
        let br = best_response(&pop, &env, &q).unwrap();
        let ctx = ctx_for(&pop, &env, &q, 0);
        for z in Signal::ALL {
            let f = |x: f64| {
                if z.is_null() {
                    target_no_signal(x, &ctx).unwrap()
                } else {
                    target_signal(x, z, &ctx).unwrap()
                }
            };
            let hi = pop.interval.hi;
            let n = 10_000;
            let mut best = (0.0, f64::NEG_INFINITY);
            for k in 0..=n {
                let x = hi * k as f64 / n as f64;
                let v = f(x);
                if v > best.1 {
                    best = (x, v);
                }
            }
            let lo = (best.0 - 1e-4).max(0.0);
            let up = (best.0 + 1e-4).min(hi);
            for k in 0..=200 {
                let x = lo + (up - lo) * k as f64 / 200.0;
                let v = f(x);
                if v > best.1 {
                    best = (x, v);
                }
            }
            assert!((br.get(0, z) - best.0).abs() < 1e-4, "{z}: {} vs {}", br.get(0, z), best.0);
        }
    }

    #[test]
    fn concern_raises_null_position() {
        let (pop, q) = reference();
        let env = Strategy::constant(2, 0.5);
        let stats = aggregate(&pop, &env, &q).unwrap();
        let mut prev = f64::NEG_INFINITY;
        for k in 0..=10 {
            let mut t = pop.types[0];
            t.theta = k as f64 / 10.0;
            let ctx = TargetContext::mean_field(&t, pop.interval, &stats, &q).unwrap();
            let x = ctx.maximize(Signal::Zero).unwrap().0;
            assert!(x >= prev - 1e-12);
            prev = x;
        }
    }

    #[test]
    fn inactive_signals_copy_null_position() {
        let (mut pop, q) = reference();
        for t in &mut pop.types {
            t.p_s = 0.0;
        }
        let br = best_response(&pop, &Strategy::constant(2, 0.3), &q).unwrap();
        for z in Signal::NONZERO {
            assert_eq!(br.get(0, z), br.get(0, Signal::Zero));
        }
    }

    #[test]
    fn peer_context_matches_mean_field_for_neutral_peers() {
        let q = Quadrature::default();
        let t = InvestorType::case_study_reference(Weight::one());
        let players = Players::new(vec![t, t, t], AdmissibleInterval::default()).unwrap();
        let mut s = Strategy::zeros(3);
        s.rows[0] = PositionRow::constant(0.3);
        let ctx = TargetContext::peers(0, &players, &s, &q).unwrap();
        let pop = Population::case_study_reference();
        let mf = ctx_for(&pop, &Strategy::zeros(2), &q, 0);
        for z in Signal::ALL {
            let a = ctx.maximize(z).unwrap();
            let b = mf.maximize(z).unwrap();
            assert!((a.0 - b.0).abs() < 1e-14 && (a.1 - b.1).abs() < 1e-15);
        }
    }
}
