//! Normal probabilities and fixed-node quadrature over the common jump mark.

use crate::error::{Error, Result};
use crate::model::Signal;
use crate::scalar::{stable_sum, Real};
use crate::signal::{conditional_interval, signal_interval, Endpoint, SignalInterval};

pub const DEFAULT_NODES: usize = 128;
pub const DEFAULT_BOUND: f64 = 8.0;

/// Standard normal CDF.
///
/// Evaluated in `f64` as `erfc(-x / sqrt 2) / 2` with a correctly rounded
/// style `erfc`; the absolute error is below `2e-16` on the whole line.
pub fn std_normal_cdf<F: Real>(x: F) -> F {
    F::lit(0.5 * libm::erfc(-x.as_f64() * std::f64::consts::FRAC_1_SQRT_2))
}

/// Upper tail `1 - Phi(x)` without cancellation.
pub fn std_normal_sf<F: Real>(x: F) -> F {
    std_normal_cdf(-x)
}

pub fn std_normal_pdf<F: Real>(x: F) -> F {
    let c = F::lit(0.398_942_280_401_432_7);
    c * (-(x * x) * F::lit(0.5)).exp()
}

/// Standard normal mass of an interval; endpoint closedness is irrelevant.
pub fn normal_prob<F: Real>(iv: &SignalInterval<F>) -> Result<F> {
    if !iv.lo.le(&iv.hi) {
        return Err(Error::InvalidInterval);
    }
    let p = match (iv.lo, iv.hi) {
        (Endpoint::MinusInf, Endpoint::PlusInf) => F::one(),
        (Endpoint::MinusInf, Endpoint::Finite(h)) => std_normal_cdf(h),
        (Endpoint::Finite(l), Endpoint::PlusInf) => std_normal_sf(l),
        (Endpoint::Finite(l), Endpoint::Finite(h)) => {
            if l >= F::zero() {
                std_normal_sf(l) - std_normal_sf(h)
            } else {
                std_normal_cdf(h) - std_normal_cdf(l)
            }
        }
        _ => F::zero(),
    };
    Ok(p.max(F::zero()))
}

/// Law of the common mark that a quadrature rule integrates against.
#[derive(Debug, Clone, PartialEq)]
pub enum MarkLaw {
    /// Standard normal, truncated to `[-bound, bound]`.
    StandardNormal { bound: f64 },
    /// Finitely many marks with given probabilities.
    Discrete,
}

/// Nodes and positive weights for `E[f(e_c)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Quadrature<F> {
    pub nodes: Vec<F>,
    pub weights: Vec<F>,
    pub law: MarkLaw,
}

impl<F: Real> Quadrature<F> {
    /// Gauss-Legendre rule on `[-bound, bound]`, weights multiplied by the normal density.
    pub fn gauss_legendre_normal(n: usize, bound: F) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParameter {
                name: "nodes",
                reason: format!("need at least 2 nodes, got {n}"),
            });
        }
        if !(bound > F::zero() && bound.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "bound",
                reason: format!("{bound} must be positive and finite"),
            });
        }
        let l = bound.as_f64();
        let (x, w) = gauss_legendre(n);
        let nodes = x.iter().map(|&xi| F::lit(l * xi)).collect::<Vec<_>>();
        let weights = x
            .iter()
            .zip(&w)
            .map(|(&xi, &wi)| F::lit(l * wi) * std_normal_pdf(F::lit(l * xi)))
            .collect();
        Ok(Self {
            nodes,
            weights,
            law: MarkLaw::StandardNormal { bound: l },
        })
    }

    /// Discrete common-mark law.
    pub fn discrete(marks: Vec<F>, probs: Vec<F>) -> Result<Self> {
        if marks.is_empty() || marks.len() != probs.len() {
            return Err(Error::InvalidParameter {
                name: "marks",
                reason: format!("{} marks vs {} probabilities", marks.len(), probs.len()),
            });
        }
        let sum = stable_sum(probs.iter().copied());
        if probs.iter().any(|p| !(*p >= F::zero())) || (sum - F::one()).abs() > F::lit(1e-12) {
            return Err(Error::InvalidProbabilities { sum: sum.as_f64() });
        }
        if marks.iter().any(|m| !m.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "marks",
                reason: "marks must be finite".into(),
            });
        }
        Ok(Self {
            nodes: marks,
            weights: probs,
            law: MarkLaw::Discrete,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn total_mass(&self) -> F {
        stable_sum(self.weights.iter().copied())
    }

    /// Probability that the perturbed mark of a `rho`-type investor lands in `I(z)`.
    ///
    /// Exact for the normal law; for a discrete law it mixes the conditional
    /// probabilities over the marks.
    pub fn signal_prob(&self, z: Signal, rho: F) -> Result<F> {
        match self.law {
            MarkLaw::StandardNormal { .. } => normal_prob(&signal_interval::<F>(z)?),
            MarkLaw::Discrete => {
                let mut terms = Vec::with_capacity(self.len());
                for (&e, &w) in self.nodes.iter().zip(&self.weights) {
                    terms.push(w * normal_prob(&conditional_interval(z, e, rho)?)?);
                }
                Ok(stable_sum(terms))
            }
        }
    }
}

impl<F: Real> Default for Quadrature<F> {
    fn default() -> Self {
        Self::gauss_legendre_normal(DEFAULT_NODES, F::lit(DEFAULT_BOUND))
            .expect("default rule is valid")
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`, ascending.
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut t = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, t);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * t * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = nf * (t * p1 - p0) / (t * t - 1.0);
            let dt = p1 / dp;
            t -= dt;
            if dt.abs() < 1e-16 {
                break;
            }
        }
        let wi = 2.0 / ((1.0 - t * t) * dp * dp);
        x[i] = -t;
        x[n - 1 - i] = t;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

/// `sum_k w_k f(e_k)`, failing on the first non-finite integrand value.
pub fn expect_outer<F: Real>(f: impl Fn(F) -> F, q: &Quadrature<F>) -> Result<F> {
    let mut terms = Vec::with_capacity(q.len());
    for (k, (&e, &w)) in q.nodes.iter().zip(&q.weights).enumerate() {
        let v = f(e);
        if !v.is_finite() {
            return Err(Error::NonFinite {
                index: k,
                node: e.as_f64(),
            });
        }
        terms.push(w * v);
    }
    Ok(stable_sum(terms))
}

#[cfg(test)]
mod tests {
    use super::*;

    // Taylor series oracle: Phi(x) = 1/2 + pdf(x) sum_k x^(2k+1) / (2k+1)!!
    fn phi_series(x: f64) -> f64 {
        let mut term = x;
        let mut sum = x;
        let mut k = 1.0;
        while term.abs() > 1e-300 && k < 2000.0 {
            term *= x * x / (2.0 * k + 1.0);
            sum += term;
            k += 1.0;
            if term.abs() < 1e-18 * sum.abs() {
                break;
            }
        }
        0.5 + (-(x * x) / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt() * sum
    }

    #[test]
    fn cdf_matches_series_oracle() {
        let mut worst: f64 = 0.0;
        for k in -800..=800 {
            let x = k as f64 / 100.0;
            worst = worst.max((std_normal_cdf(x) - phi_series(x)).abs());
        }
        assert!(worst < 1e-12, "max error {worst}");
        assert_eq!(std_normal_cdf(0.0), 0.5);
        assert!((std_normal_cdf(1.0f64) - 0.841345).abs() < 1e-6);
        assert!((std_normal_cdf(1.0f64) - std_normal_cdf(0.5) - 0.149883).abs() < 1e-6);
    }

    #[test]
    fn interval_probabilities() {
        let line = SignalInterval::<f64>::real_line();
        assert_eq!(normal_prob(&line).unwrap(), 1.0);
        let p = normal_prob(&signal_interval::<f64>(Signal::PlusOne).unwrap()).unwrap();
        assert!((p - (phi_series(1.0) - phi_series(0.5))).abs() < 1e-14);
        let a = normal_prob(&signal_interval::<f64>(Signal::PlusHalf).unwrap()).unwrap();
        let b = normal_prob(&signal_interval::<f64>(Signal::MinusHalf).unwrap()).unwrap();
        assert!((a - b).abs() < 1e-15);
        assert!((a - 0.191462).abs() < 1e-6);
        let total: f64 = Signal::NONZERO
            .iter()
            .map(|&z| normal_prob(&signal_interval::<f64>(z).unwrap()).unwrap())
            .sum();
        assert!((total - 1.0).abs() < 1e-12);
        let bad = SignalInterval {
            lo: Endpoint::Finite(1.0),
            hi: Endpoint::Finite(0.0),
            lo_closed: false,
            hi_closed: false,
        };
        assert_eq!(normal_prob(&bad), Err(Error::InvalidInterval));
    }

    #[test]
    fn legendre_rule_is_exact_for_polynomials() {
        let (x, w) = gauss_legendre(9);
        let s0: f64 = w.iter().sum();
        let s2: f64 = x.iter().zip(&w).map(|(x, w)| w * x * x).sum();
        let s16: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(16)).sum();
        assert!((s0 - 2.0).abs() < 1e-14);
        assert!((s2 - 2.0 / 3.0).abs() < 1e-14);
        assert!((s16 - 2.0 / 17.0).abs() < 1e-14);
    }

    #[test]
    fn normal_moments() {
        let q = Quadrature::<f64>::default();
        assert!(q.len() >= 64);
        let mass = std_normal_cdf(8.0) - std_normal_cdf(-8.0);
        assert!((q.total_mass() - mass).abs() < 1e-12);
        assert!((expect_outer(|_| 1.0, &q).unwrap() - 1.0).abs() < 1e-10);
        assert!(expect_outer(|x| x, &q).unwrap().abs() < 1e-10);
        assert!((expect_outer(|x| x * x, &q).unwrap() - 1.0).abs() < 1e-8);
        assert!((expect_outer(|x: f64| x.powi(4), &q).unwrap() - 3.0).abs() < 1e-8);
    }

    #[test]
    fn refinement_is_stable() {
        let q1 = Quadrature::<f64>::gauss_legendre_normal(128, 8.0).unwrap();
        let q2 = Quadrature::<f64>::gauss_legendre_normal(256, 8.0).unwrap();
        let f = |e: f64| {
            let iv = conditional_interval(Signal::PlusInf, e, 0.5).unwrap();
            normal_prob(&iv).unwrap() * (0.1 * e).exp()
        };
        let a = expect_outer(f, &q1).unwrap();
        let b = expect_outer(f, &q2).unwrap();
        assert!((a - b).abs() < 1e-8);
    }

    #[test]
    fn non_finite_integrand_is_reported() {
        let q = Quadrature::<f64>::discrete(vec![-1.0, 0.0, 1.0], vec![0.25, 0.5, 0.25]).unwrap();
        match expect_outer(|x| 1.0 / x, &q) {
            Err(Error::NonFinite { index, node }) => {
                assert_eq!(index, 1);
                assert_eq!(node, 0.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn discrete_law_validation_and_signal_mass() {
        assert!(Quadrature::<f64>::discrete(vec![0.0], vec![0.9]).is_err());
        assert!(Quadrature::<f64>::discrete(vec![0.0, 1.0], vec![1.0]).is_err());
        let r3 = 3f64.sqrt();
        let q = Quadrature::<f64>::discrete(vec![-r3, 0.0, r3], vec![1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0])
            .unwrap();
        let total: f64 = Signal::NONZERO
            .iter()
            .map(|&z| q.signal_prob(z, 0.6).unwrap())
            .sum();
        assert!((total - 1.0).abs() < 1e-12);
        // With rho = 0 the mark is irrelevant.
        let p = q.signal_prob(Signal::PlusOne, 0.0).unwrap();
        assert!((p - (phi_series(1.0) - phi_series(0.5))).abs() < 1e-14);
    }

    #[test]
    fn f32_rule() {
        let q = Quadrature::<f32>::gauss_legendre_normal(64, 8.0).unwrap();
        assert!((expect_outer(|x| x * x, &q).unwrap() - 1.0).abs() < 1e-5);
    }
}
