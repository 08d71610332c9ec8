use std::fmt;
use std::iter::Sum;
use std::ops::Add;

/// A real number or `+∞`. Addition saturates at `+∞`.
///
/// Divergences evaluate to `+∞` outside their domain; keeping that as an
/// explicit variant stops an infinite value from leaking into arithmetic
/// that expects finite numbers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtendedReal {
    Finite(f64),
    PosInfinity,
}

impl ExtendedReal {
    pub const ZERO: ExtendedReal = ExtendedReal::Finite(0.0);

    pub fn is_finite(self) -> bool {
        matches!(self, ExtendedReal::Finite(_))
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            ExtendedReal::Finite(x) => Some(x),
            ExtendedReal::PosInfinity => None,
        }
    }

    /// Lossy view as `f64` (`+∞` maps to `f64::INFINITY`).
    pub fn to_f64(self) -> f64 {
        match self {
            ExtendedReal::Finite(x) => x,
            ExtendedReal::PosInfinity => f64::INFINITY,
        }
    }

    pub fn sub_finite(self, rhs: f64) -> ExtendedReal {
        match self {
            ExtendedReal::Finite(x) => ExtendedReal::Finite(x - rhs),
            ExtendedReal::PosInfinity => ExtendedReal::PosInfinity,
        }
    }
}

impl From<f64> for ExtendedReal {
    fn from(x: f64) -> Self {
        if x == f64::INFINITY {
            ExtendedReal::PosInfinity
        } else {
            ExtendedReal::Finite(x)
        }
    }
}

impl Add for ExtendedReal {
    type Output = ExtendedReal;

    fn add(self, rhs: ExtendedReal) -> ExtendedReal {
        match (self, rhs) {
            (ExtendedReal::Finite(a), ExtendedReal::Finite(b)) => ExtendedReal::Finite(a + b),
            _ => ExtendedReal::PosInfinity,
        }
    }
}

impl Sum for ExtendedReal {
    fn sum<I: Iterator<Item = ExtendedReal>>(iter: I) -> Self {
        iter.fold(ExtendedReal::ZERO, Add::add)
    }
}

impl fmt::Display for ExtendedReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtendedReal::Finite(x) => write!(f, "{x}"),
            ExtendedReal::PosInfinity => write!(f, "inf"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn saturating_sum() {
        let s: ExtendedReal = [1.0.into(), ExtendedReal::PosInfinity, 2.0.into()]
            .into_iter()
            .sum();
        assert_eq!(s, ExtendedReal::PosInfinity);
        let t: ExtendedReal = [1.0, 2.0].map(ExtendedReal::from).into_iter().sum();
        assert_eq!(t, ExtendedReal::Finite(3.0));
        assert_eq!(ExtendedReal::PosInfinity.sub_finite(5.0), ExtendedReal::PosInfinity);
        assert_eq!(ExtendedReal::from(f64::INFINITY), ExtendedReal::PosInfinity);
    }
}
