//! Perturbed jump marks, their classification into signals, and the
//! integration intervals and frequencies that follow from it.

use crate::error::{Error, Result};
use crate::model::{InvestorType, Signal};
use crate::quad::normal_prob;
use crate::scalar::Real;

/// Log-normal relative jump size driven by the common mark.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpLaw<F> {
    pub kappa_hat: F,
    pub sigma_hat: F,
}

impl<F: Real> JumpLaw<F> {
    /// True when every jump has size zero.
    pub fn is_degenerate(&self) -> bool {
        self.sigma_hat == F::zero() && self.kappa_hat == F::zero()
    }
}

/// Relative jump size `exp(sigma_hat e_c + kappa_hat - sigma_hat^2 / 2) - 1`.
pub fn eta<F: Real>(law: &JumpLaw<F>, e_c: F) -> F {
    let half = F::lit(0.5);
    (law.sigma_hat * e_c + law.kappa_hat - half * law.sigma_hat * law.sigma_hat).exp_m1()
}

fn check_rho<F: Real>(rho: F) -> Result<()> {
    if rho.abs() < F::one() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name: "rho",
            reason: format!("|{rho}| must be < 1"),
        })
    }
}

/// Perturbed mark `rho e_c + sqrt(1 - rho^2) e_i1`.
pub fn perturb<F: Real>(rho: F, e_c: F, e_i1: F) -> Result<F> {
    check_rho(rho)?;
    Ok(rho * e_c + (F::one() - rho * rho).sqrt() * e_i1)
}

/// Maps a perturbed mark to its signal label, or the null signal if nothing arrived.
///
/// A mark of exactly zero is labelled `-0.5`.
pub fn classify<F: Real>(z: F, received: bool) -> Signal {
    if !received {
        return Signal::Zero;
    }
    let half = F::lit(0.5);
    let a = z.abs();
    if z > F::zero() {
        if a <= half {
            Signal::PlusHalf
        } else if a <= F::one() {
            Signal::PlusOne
        } else {
            Signal::PlusInf
        }
    } else if a <= half {
        Signal::MinusHalf
    } else if a <= F::one() {
        Signal::MinusOne
    } else {
        Signal::MinusInf
    }
}

/// Extended-real interval endpoint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Endpoint<F> {
    Finite(F),
    PlusInf,
    MinusInf,
}

impl<F: Real> Endpoint<F> {
    fn rank(&self) -> (i8, F) {
        match *self {
            Endpoint::MinusInf => (-1, F::zero()),
            Endpoint::Finite(x) => (0, x),
            Endpoint::PlusInf => (1, F::zero()),
        }
    }

    pub fn le(&self, other: &Self) -> bool {
        let (a, x) = self.rank();
        let (b, y) = other.rank();
        a < b || (a == b && (a != 0 || x <= y))
    }

    pub fn finite(&self) -> Option<F> {
        match *self {
            Endpoint::Finite(x) => Some(x),
            _ => None,
        }
    }
}

/// Interval with extended-real endpoints and per-endpoint closedness.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignalInterval<F> {
    pub lo: Endpoint<F>,
    pub hi: Endpoint<F>,
    pub lo_closed: bool,
    pub hi_closed: bool,
}

impl<F: Real> SignalInterval<F> {
    pub fn new(lo: Endpoint<F>, hi: Endpoint<F>, lo_closed: bool, hi_closed: bool) -> Result<Self> {
        if !lo.le(&hi) {
            return Err(Error::InvalidInterval);
        }
        Ok(Self {
            lo,
            hi,
            lo_closed,
            hi_closed,
        })
    }

    pub fn real_line() -> Self {
        Self {
            lo: Endpoint::MinusInf,
            hi: Endpoint::PlusInf,
            lo_closed: false,
            hi_closed: false,
        }
    }

    pub fn contains(&self, x: F) -> bool {
        let above = match self.lo {
            Endpoint::MinusInf => true,
            Endpoint::PlusInf => false,
            Endpoint::Finite(l) => x > l || (self.lo_closed && x == l),
        };
        let below = match self.hi {
            Endpoint::PlusInf => true,
            Endpoint::MinusInf => false,
            Endpoint::Finite(h) => x < h || (self.hi_closed && x == h),
        };
        above && below
    }
}

fn fin<F: Real>(x: f64) -> Endpoint<F> {
    Endpoint::Finite(F::lit(x))
}

/// Set of perturbed marks that produce the nonzero signal `z`.
pub fn signal_interval<F: Real>(z: Signal) -> Result<SignalInterval<F>> {
    use Endpoint::{MinusInf, PlusInf};
    let iv = match z {
        Signal::Zero => return Err(Error::NullSignal),
        Signal::PlusInf => (fin(1.0), PlusInf, false, false),
        Signal::PlusOne => (fin(0.5), fin(1.0), false, true),
        Signal::PlusHalf => (fin(0.0), fin(0.5), false, true),
        Signal::MinusHalf => (fin(-0.5), fin(0.0), true, false),
        Signal::MinusOne => (fin(-1.0), fin(-0.5), true, false),
        Signal::MinusInf => (MinusInf, fin(-1.0), false, false),
    };
    SignalInterval::new(iv.0, iv.1, iv.2, iv.3)
}

/// Set of idiosyncratic marks `e_i1` that produce `z` given the common mark `e_c`.
pub fn conditional_interval<F: Real>(z: Signal, e_c: F, rho: F) -> Result<SignalInterval<F>> {
    check_rho(rho)?;
    let base = signal_interval::<F>(z)?;
    let s = (F::one() - rho * rho).sqrt();
    let shift = rho * e_c;
    let map = |e: Endpoint<F>| match e {
        Endpoint::Finite(x) => Endpoint::Finite((x - shift) / s),
        other => other,
    };
    SignalInterval::new(map(base.lo), map(base.hi), base.lo_closed, base.hi_closed)
}

/// Arrival rate `lambda p_s N01(I(z))` of the nonzero signal `z`.
pub fn signal_frequency<F: Real>(ty: &InvestorType<F>, z: Signal) -> Result<F> {
    let iv = signal_interval::<F>(z)?;
    Ok(ty.market.lambda * ty.p_s * normal_prob(&iv)?)
}
