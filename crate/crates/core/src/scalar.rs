//! Floating-point abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Real scalar type the solvers are generic over (`f32` or `f64`).
///
/// Accuracy statements in the docs (normal CDF error, optimizer tolerances)
/// refer to `f64`; `f32` runs the same code with single-precision limits.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Default + Debug + Display + Sum + Send + Sync + 'static
{
    /// Lossy conversion from an `f64` literal.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar converts to f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Compensated (Neumaier) summation in iteration order.
pub fn stable_sum<F: Real, I: IntoIterator<Item = F>>(terms: I) -> F {
    let mut sum = F::zero();
    let mut comp = F::zero();
    for x in terms {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp = comp + ((sum - t) + x);
        } else {
            comp = comp + ((x - t) + sum);
        }
        sum = t;
    }
    sum + comp
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let terms = [1.0f64, 1e-16, 1e-16, 1e-16, 1e-16, -1.0];
        assert!((stable_sum(terms) - 4e-16).abs() < 1e-30);
    }

    #[test]
    fn literal_conversion() {
        assert_eq!(f32::lit(0.5), 0.5f32);
        assert_eq!(0.25f64.as_f64(), 0.25);
    }
}
