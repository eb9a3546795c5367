use std::fmt::Debug;

use num_traits::{Float, ToPrimitive};
use twofloat::TwoFloat;

/// Working precision of the recursion engine.
pub trait Scalar: Float + ToPrimitive + Debug + Send + Sync + 'static {
    const NAME: &'static str;

    /// Exact conversion from `f64`.
    fn of(x: f64) -> Self;

    fn f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f64 {
    const NAME: &'static str = "double";

    fn of(x: f64) -> Self {
        x
    }
}

/// Double-double arithmetic, roughly 32 significant decimal digits.
impl Scalar for TwoFloat {
    const NAME: &'static str = "extended";

    // The `FromPrimitive` impl truncates through an integer; use the inherent
    // constructor.
    fn of(x: f64) -> Self {
        TwoFloat::from_f64(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conversion_is_exact() {
        assert_eq!(TwoFloat::of(1.3).f64(), 1.3);
        assert_eq!(TwoFloat::of(-0.2).f64(), -0.2);
    }

    #[test]
    fn extended_keeps_digits_double_loses() {
        let big = 1e17;
        let d = (f64::of(big) + f64::of(1.0)) - f64::of(big);
        let e = (TwoFloat::of(big) + TwoFloat::of(1.0)) - TwoFloat::of(big);
        assert_eq!(d, 0.0);
        assert_eq!(e.f64(), 1.0);
    }
}
