//! Investors, populations, signal-driven strategies and admissible positions.

use std::fmt;

use num_rational::Ratio;
use num_traits::{ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::signal::JumpLaw;

/// Default shrink of the admissible interval `[0, 1]` to `[0, 1 - eps_b]`.
pub const DEFAULT_EPS_B: f64 = 1e-6;

/// Tolerance on the population weight sum.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

/// Market seen by one investor type: bank account, stock drift and
/// diffusion, and the log-normal jump law driven by a Poisson clock.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketParams<F> {
    pub r: F,
    pub kappa: F,
    /// Idiosyncratic diffusion volatility.
    pub sigma: F,
    /// Common diffusion volatility.
    pub sigma0: F,
    pub kappa_hat: F,
    pub sigma_hat: F,
    /// Jump intensity.
    pub lambda: F,
}

impl<F: Real> MarketParams<F> {
    /// Single common stock of the two-type case study.
    pub fn case_study() -> Self {
        Self {
            r: F::zero(),
            kappa: F::lit(0.08),
            sigma: F::zero(),
            sigma0: F::lit(0.3),
            kappa_hat: F::zero(),
            sigma_hat: F::lit(0.1),
            lambda: F::lit(10.0),
        }
    }

    pub fn jump_law(&self) -> JumpLaw<F> {
        JumpLaw {
            kappa_hat: self.kappa_hat,
            sigma_hat: self.sigma_hat,
        }
    }

    /// Total diffusive variance rate `sigma^2 + sigma0^2`.
    pub fn variance(&self) -> F {
        self.sigma * self.sigma + self.sigma0 * self.sigma0
    }
}

/// Population share stored as an exact rational of the decimal the user wrote.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Weight(Ratio<i128>);

impl Weight {
    pub fn new(numer: i128, denom: i128) -> Result<Self> {
        if denom == 0 {
            return Err(Error::InvalidParameter {
                name: "weight",
                reason: "zero denominator".into(),
            });
        }
        Ok(Self(Ratio::new(numer, denom)))
    }

    pub fn one() -> Self {
        Self(Ratio::from_integer(1))
    }

    /// Parses a plain decimal such as `"0.25"` or `"1"` exactly.
    pub fn from_decimal_str(s: &str) -> Result<Self> {
        let bad = |reason: &str| Error::InvalidParameter {
            name: "weight",
            reason: format!("`{s}`: {reason}"),
        };
        let s = s.trim();
        let (neg, body) = match s.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, s),
        };
        let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(bad("empty"));
        }
        if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
            return Err(bad("not a plain decimal"));
        }
        let digits = format!("{int_part}{frac_part}");
        let numer: i128 = if digits.is_empty() {
            0
        } else {
            digits.parse().map_err(|_| bad("too many digits"))?
        };
        let scale = u32::try_from(frac_part.len()).map_err(|_| bad("too many digits"))?;
        let denom = 10i128.checked_pow(scale).ok_or_else(|| bad("too many digits"))?;
        let numer = if neg { -numer } else { numer };
        Self::new(numer, denom)
    }

    /// Exact rational of the shortest decimal that round-trips `x`.
    pub fn from_f64(x: f64) -> Result<Self> {
        if !x.is_finite() {
            return Err(Error::InvalidParameter {
                name: "weight",
                reason: format!("{x} is not finite"),
            });
        }
        Self::from_decimal_str(&format!("{x}"))
    }

    pub fn ratio(&self) -> Ratio<i128> {
        self.0
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    pub fn to_real<F: Real>(&self) -> F {
        F::lit(self.to_f64())
    }
}

impl fmt::Display for Weight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Characteristics of one investor type.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvestorType<F> {
    pub x0: F,
    pub market: MarketParams<F>,
    /// Probability of receiving a signal at a jump.
    pub p_s: F,
    /// Signal quality.
    pub rho: F,
    /// Relative risk aversion.
    pub alpha: F,
    /// Relative performance concern.
    pub theta: F,
    pub weight: Weight,
}

impl<F: Real> InvestorType<F> {
    /// Reference type `(x0, p_s, rho, theta) = (1, 0.5, 0.5, 0.5)` with `alpha = 2`.
    pub fn case_study_reference(weight: Weight) -> Self {
        Self {
            x0: F::one(),
            market: MarketParams::case_study(),
            p_s: F::lit(0.5),
            rho: F::lit(0.5),
            alpha: F::lit(2.0),
            theta: F::lit(0.5),
            weight,
        }
    }

    /// Exponent `1 - alpha` of the power utility.
    pub fn beta(&self) -> F {
        F::one() - self.alpha
    }

    /// Unconstrained Merton fraction `(kappa - r) / (alpha (sigma^2 + sigma0^2))`.
    pub fn merton_fraction(&self) -> F {
        (self.market.kappa - self.market.r) / (self.alpha * self.market.variance())
    }

    /// Power utility of relative wealth, `(x xbar^-theta)^(1-alpha) / (1-alpha)`.
    pub fn utility(&self, x: F, xbar: F) -> F {
        let b = self.beta();
        (b * (x.ln() - self.theta * xbar.ln())).exp() / b
    }
}

/// The finite signal alphabet `{-inf, -1, -0.5, 0, 0.5, 1, +inf}`.
///
/// Infinite labels are separate variants so that table keys stay exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Signal {
    MinusInf,
    MinusOne,
    MinusHalf,
    Zero,
    PlusHalf,
    PlusOne,
    PlusInf,
}

impl Signal {
    pub const COUNT: usize = 7;

    pub const ALL: [Signal; 7] = [
        Signal::MinusInf,
        Signal::MinusOne,
        Signal::MinusHalf,
        Signal::Zero,
        Signal::PlusHalf,
        Signal::PlusOne,
        Signal::PlusInf,
    ];

    pub const NONZERO: [Signal; 6] = [
        Signal::MinusInf,
        Signal::MinusOne,
        Signal::MinusHalf,
        Signal::PlusHalf,
        Signal::PlusOne,
        Signal::PlusInf,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn is_null(self) -> bool {
        self == Signal::Zero
    }

    /// Mirror image `z -> -z`.
    pub fn mirror(self) -> Self {
        Self::ALL[Self::COUNT - 1 - self.index()]
    }

    /// Numeric label, with infinities for the outer categories.
    pub fn value(self) -> f64 {
        match self {
            Signal::MinusInf => f64::NEG_INFINITY,
            Signal::MinusOne => -1.0,
            Signal::MinusHalf => -0.5,
            Signal::Zero => 0.0,
            Signal::PlusHalf => 0.5,
            Signal::PlusOne => 1.0,
            Signal::PlusInf => f64::INFINITY,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Signal::MinusInf => "-inf",
            Signal::MinusOne => "-1",
            Signal::MinusHalf => "-0.5",
            Signal::Zero => "0",
            Signal::PlusHalf => "0.5",
            Signal::PlusOne => "1",
            Signal::PlusInf => "inf",
        }
    }
}

impl fmt::Display for Signal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Ordered set of signal labels an investor can observe.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignalAlphabet {
    signals: Vec<Signal>,
}

impl SignalAlphabet {
    pub fn new(mut signals: Vec<Signal>) -> Result<Self> {
        signals.sort();
        signals.dedup();
        if !signals.contains(&Signal::Zero) {
            return Err(Error::InvalidParameter {
                name: "alphabet",
                reason: "must contain the null signal".into(),
            });
        }
        Ok(Self { signals })
    }

    pub fn case_study() -> Self {
        Self {
            signals: Signal::ALL.to_vec(),
        }
    }

    pub fn signals(&self) -> &[Signal] {
        &self.signals
    }

    pub fn nonzero(&self) -> impl Iterator<Item = Signal> + '_ {
        self.signals.iter().copied().filter(|s| !s.is_null())
    }
}

impl Default for SignalAlphabet {
    fn default() -> Self {
        Self::case_study()
    }
}

/// Compact interval of admissible stock fractions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmissibleInterval<F> {
    pub lo: F,
    pub hi: F,
}

impl<F: Real> AdmissibleInterval<F> {
    pub fn new(lo: F, hi: F) -> Result<Self> {
        if !(lo <= hi) {
            return Err(Error::InvalidInterval);
        }
        Ok(Self { lo, hi })
    }

    /// `[0, 1 - eps_b]`, strictly inside the no-ruin interval `[0, 1]`.
    pub fn case_study(eps_b: F) -> Result<Self> {
        if !(eps_b > F::zero() && eps_b <= F::one()) {
            return Err(Error::InvalidParameter {
                name: "eps_b",
                reason: format!("{eps_b} must lie in (0, 1]"),
            });
        }
        Self::new(F::zero(), F::one() - eps_b)
    }

    pub fn contains(&self, x: F) -> bool {
        x >= self.lo && x <= self.hi
    }

    pub fn clamp(&self, x: F) -> F {
        x.max(self.lo).min(self.hi)
    }

    pub fn width(&self) -> F {
        self.hi - self.lo
    }
}

impl<F: Real> Default for AdmissibleInterval<F> {
    fn default() -> Self {
        Self::case_study(F::lit(DEFAULT_EPS_B)).expect("default eps_b is valid")
    }
}

/// Finite collection of investor types with population weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Population<F> {
    pub types: Vec<InvestorType<F>>,
    pub interval: AdmissibleInterval<F>,
}

impl<F: Real> Population<F> {
    /// Builds a population, rejecting it if any invariant fails.
    pub fn new(types: Vec<InvestorType<F>>, interval: AdmissibleInterval<F>) -> Result<Self> {
        let pop = Self::from_parts(types, interval);
        let v = validate_population(&pop);
        if v.is_empty() {
            Ok(pop)
        } else {
            Err(Error::InvalidPopulation(v))
        }
    }

    /// Builds a population without validation (use [`validate_population`]).
    pub fn from_parts(types: Vec<InvestorType<F>>, interval: AdmissibleInterval<F>) -> Self {
        Self { types, interval }
    }

    /// Homogeneous reference environment: two identical types with weight 1/2.
    pub fn case_study_reference() -> Self {
        let half = Weight::new(1, 2).expect("nonzero denominator");
        Self::from_parts(
            vec![
                InvestorType::case_study_reference(half),
                InvestorType::case_study_reference(half),
            ],
            AdmissibleInterval::default(),
        )
    }

    pub fn len(&self) -> usize {
        self.types.len()
    }

    pub fn is_empty(&self) -> bool {
        self.types.is_empty()
    }

    pub fn weight(&self, t: usize) -> F {
        self.types[t].weight.to_real()
    }

    /// Admissible interval for a `(type, signal)` pair.
    pub fn interval(&self, _type_index: usize, _signal: Signal) -> AdmissibleInterval<F> {
        self.interval
    }

    pub fn has_shared_market(&self) -> bool {
        self.types.windows(2).all(|w| w[0].market == w[1].market)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ViolationKind {
    NoTypes,
    WeightSum { sum: f64 },
    Weight,
    InitialWealth,
    SignalProbability,
    SignalQuality,
    RiskAversion,
    LogUtility,
    Concern,
    Volatility,
    JumpIntensity,
    JumpVolatility,
    NonFinite,
    Interval,
    TooFewPlayers,
}

/// One failed population invariant, with the offending type when applicable.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub type_index: Option<usize>,
    pub kind: ViolationKind,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let msg = match &self.kind {
            ViolationKind::NoTypes => "population has no types".to_string(),
            ViolationKind::WeightSum { sum } => format!("weights sum to {sum}, not 1"),
            ViolationKind::Weight => "weight outside [0, 1]".into(),
            ViolationKind::InitialWealth => "x0 must be positive".into(),
            ViolationKind::SignalProbability => "p_s must lie in [0, 1)".into(),
            ViolationKind::SignalQuality => "|rho| must be < 1".into(),
            ViolationKind::RiskAversion => "alpha must be positive".into(),
            ViolationKind::LogUtility => "alpha must differ from 1".into(),
            ViolationKind::Concern => "theta must lie in [0, 1]".into(),
            ViolationKind::Volatility => "need sigma, sigma0 >= 0 and sigma + sigma0 > 0".into(),
            ViolationKind::JumpIntensity => "lambda must be nonnegative".into(),
            ViolationKind::JumpVolatility => "sigma_hat must be nonnegative".into(),
            ViolationKind::NonFinite => "parameter is not finite".into(),
            ViolationKind::Interval => "admissible interval must satisfy 0 <= lo <= hi < 1".into(),
            ViolationKind::TooFewPlayers => "a game needs at least two players".into(),
        };
        match self.type_index {
            Some(i) => write!(f, "type {i}: {msg}"),
            None => f.write_str(&msg),
        }
    }
}

/// Lists every violated population invariant; empty iff the population is valid.
pub fn validate_population<F: Real>(pop: &Population<F>) -> Vec<Violation> {
    let mut out = Vec::new();
    if pop.types.is_empty() {
        out.push(Violation {
            type_index: None,
            kind: ViolationKind::NoTypes,
        });
    }
    check_interval(&pop.interval, &mut out);

    let mut sum = Ratio::<i128>::zero();
    for (i, t) in pop.types.iter().enumerate() {
        if validate_type(i, t, &mut out) {
            let w = t.weight.ratio();
            if w < Ratio::zero() || w > Ratio::from_integer(1) {
                out.push(Violation {
                    type_index: Some(i),
                    kind: ViolationKind::Weight,
                });
            }
            sum += w;
        }
    }
    if !pop.types.is_empty() {
        let gap = (sum - Ratio::from_integer(1)).to_f64().unwrap_or(f64::INFINITY);
        if gap.abs() > WEIGHT_SUM_TOL {
            out.push(Violation {
                type_index: None,
                kind: ViolationKind::WeightSum {
                    sum: sum.to_f64().unwrap_or(f64::NAN),
                },
            });
        }
    }
    out
}

fn check_interval<F: Real>(iv: &AdmissibleInterval<F>, out: &mut Vec<Violation>) {
    if !(iv.lo >= F::zero() && iv.lo <= iv.hi && iv.hi < F::one()) {
        out.push(Violation {
            type_index: None,
            kind: ViolationKind::Interval,
        });
    }
}

/// Per-type parameter checks; returns false if a parameter is not finite.
fn validate_type<F: Real>(i: usize, t: &InvestorType<F>, out: &mut Vec<Violation>) -> bool {
    let mut push = |kind| {
        out.push(Violation {
            type_index: Some(i),
            kind,
        })
    };
    let m = &t.market;
    let all = [
        t.x0, t.p_s, t.rho, t.alpha, t.theta, m.r, m.kappa, m.sigma, m.sigma0, m.kappa_hat,
        m.sigma_hat, m.lambda,
    ];
    if all.iter().any(|x| !x.is_finite()) {
        push(ViolationKind::NonFinite);
        return false;
    }
    if !(t.x0 > F::zero()) {
        push(ViolationKind::InitialWealth);
    }
    if !(t.p_s >= F::zero() && t.p_s < F::one()) {
        push(ViolationKind::SignalProbability);
    }
    if !(t.rho.abs() < F::one()) {
        push(ViolationKind::SignalQuality);
    }
    if !(t.alpha > F::zero()) {
        push(ViolationKind::RiskAversion);
    }
    if t.alpha == F::one() {
        push(ViolationKind::LogUtility);
    }
    if !(t.theta >= F::zero() && t.theta <= F::one()) {
        push(ViolationKind::Concern);
    }
    if !(m.sigma >= F::zero() && m.sigma0 >= F::zero() && m.sigma + m.sigma0 > F::zero()) {
        push(ViolationKind::Volatility);
    }
    if !(m.lambda >= F::zero()) {
        push(ViolationKind::JumpIntensity);
    }
    if !(m.sigma_hat >= F::zero()) {
        push(ViolationKind::JumpVolatility);
    }
    true
}

/// Players of an n-agent game; type weights are ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct Players<F> {
    pub types: Vec<InvestorType<F>>,
    pub interval: AdmissibleInterval<F>,
}

impl<F: Real> Players<F> {
    /// Requires at least two players, each with valid characteristics.
    pub fn new(types: Vec<InvestorType<F>>, interval: AdmissibleInterval<F>) -> Result<Self> {
        let mut out = Vec::new();
        if types.len() < 2 {
            out.push(Violation {
                type_index: None,
                kind: ViolationKind::TooFewPlayers,
            });
        }
        check_interval(&interval, &mut out);
        for (i, t) in types.iter().enumerate() {
            validate_type(i, t, &mut out);
        }
        if out.is_empty() {
            Ok(Self { types, interval })
        } else {
            Err(Error::InvalidPopulation(out))
        }
    }

    pub fn len(&self) -> usize {
        self.types.len()
    }

    pub fn is_empty(&self) -> bool {
        self.types.is_empty()
    }
}

/// Positions of one type, one slot per signal label.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositionRow<F>(pub [F; Signal::COUNT]);

impl<F: Real> PositionRow<F> {
    pub fn constant(c: F) -> Self {
        Self([c; Signal::COUNT])
    }

    pub fn get(&self, s: Signal) -> F {
        self.0[s.index()]
    }

    pub fn set(&mut self, s: Signal, x: F) {
        self.0[s.index()] = x;
    }

    pub fn iter(&self) -> impl Iterator<Item = (Signal, F)> + '_ {
        Signal::ALL.iter().map(move |&s| (s, self.get(s)))
    }
}

/// Signal-driven strategy: a time-independent signal -> position table per type.
#[derive(Debug, Clone, PartialEq)]
pub struct Strategy<F> {
    pub rows: Vec<PositionRow<F>>,
}

impl<F: Real> Strategy<F> {
    pub fn new(rows: Vec<PositionRow<F>>) -> Self {
        Self { rows }
    }

    pub fn zeros(n_types: usize) -> Self {
        Self::constant(n_types, F::zero())
    }

    pub fn constant(n_types: usize, c: F) -> Self {
        Self {
            rows: vec![PositionRow::constant(c); n_types],
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn row(&self, t: usize) -> &PositionRow<F> {
        &self.rows[t]
    }

    pub fn get(&self, t: usize, s: Signal) -> F {
        self.rows[t].get(s)
    }

    /// Checks every position against the population's admissible intervals.
    pub fn check_admissible(&self, pop: &Population<F>) -> Result<()> {
        self.check_within(pop.len(), &pop.interval)
    }

    /// Checks that there are `n` rows and every position lies in `iv`.
    pub fn check_within(&self, n: usize, iv: &AdmissibleInterval<F>) -> Result<()> {
        if self.rows.len() != n {
            return Err(Error::IncompatibleStrategies(format!(
                "strategy has {} rows, expected {n}",
                self.rows.len(),
            )));
        }
        for (t, row) in self.rows.iter().enumerate() {
            for (s, x) in row.iter() {
                if !iv.contains(x) {
                    return Err(Error::Inadmissible {
                        type_index: t,
                        signal: s,
                        position: x.as_f64(),
                        lo: iv.lo.as_f64(),
                        hi: iv.hi.as_f64(),
                    });
                }
            }
        }
        Ok(())
    }

    /// Convex combination `(1 - w) self + w other`.
    pub fn relax(&self, other: &Self, w: F) -> Self {
        let rows = self
            .rows
            .iter()
            .zip(&other.rows)
            .map(|(a, b)| {
                let mut out = *a;
                for i in 0..Signal::COUNT {
                    out.0[i] = if w == F::one() {
                        b.0[i]
                    } else {
                        (F::one() - w) * a.0[i] + w * b.0[i]
                    };
                }
                out
            })
            .collect();
        Self { rows }
    }
}

/// Sup-norm distance between two strategies on the same index set.
pub fn strategy_distance<F: Real>(a: &Strategy<F>, b: &Strategy<F>) -> Result<F> {
    if a.rows.len() != b.rows.len() {
        return Err(Error::IncompatibleStrategies(format!(
            "{} rows vs {} rows",
            a.rows.len(),
            b.rows.len()
        )));
    }
    let mut d = F::zero();
    for (ra, rb) in a.rows.iter().zip(&b.rows) {
        for (x, y) in ra.0.iter().zip(rb.0.iter()) {
            d = d.max((*x - *y).abs());
        }
    }
    Ok(d)
}
