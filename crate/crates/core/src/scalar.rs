//! Numeric abstraction for simulated time and closed-form latency math.
//!
//! Everything that carries a time value (ledger clock, channel occupancy,
//! latency formulas) is generic over [`Scalar`]. Floating point types are
//! fine for exploration; [`num_rational::Rational64`] gives exact arithmetic
//! when equalities have to hold with zero tolerance.

use std::fmt::{Debug, Display};

use num_rational::Ratio;
use num_traits::{FromPrimitive, Num, ToPrimitive};

/// A time / quantity scalar: `f32`, `f64` or `Rational64`.
pub trait Scalar:
    Num + Copy + PartialOrd + FromPrimitive + ToPrimitive + Debug + Display + Send + Sync + 'static
{
    /// Smallest integral value not less than `self`.
    fn ceil(self) -> Self;

    /// Build `numer / denom` as faithfully as the type allows.
    fn from_ratio(numer: i64, denom: i64) -> Self;

    /// Integral counts (block heights, message counts).
    fn from_count(n: u64) -> Self {
        Self::from_u64(n).expect("count representable in scalar type")
    }

    /// Lossy view used for reports and statistics.
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Conversion from configuration values. Rationals approximate the
    /// float exactly when it is dyadic and small enough.
    fn from_config(value: f64) -> Option<Self> {
        if !value.is_finite() {
            return None;
        }
        Self::from_f64(value)
    }

    /// Whether the value is finite and not NaN.
    fn is_well_formed(self) -> bool {
        self.partial_cmp(&self).is_some()
    }
}

impl Scalar for f32 {
    fn ceil(self) -> Self {
        f32::ceil(self)
    }

    fn from_ratio(numer: i64, denom: i64) -> Self {
        (numer as f64 / denom as f64) as f32
    }

    fn is_well_formed(self) -> bool {
        self.is_finite()
    }
}

impl Scalar for f64 {
    fn ceil(self) -> Self {
        f64::ceil(self)
    }

    fn from_ratio(numer: i64, denom: i64) -> Self {
        numer as f64 / denom as f64
    }

    fn is_well_formed(self) -> bool {
        self.is_finite()
    }
}

impl Scalar for Ratio<i64> {
    fn ceil(self) -> Self {
        Ratio::ceil(&self)
    }

    fn from_ratio(numer: i64, denom: i64) -> Self {
        Ratio::new(numer, denom)
    }
}

/// Total order wrapper so scalars can key a priority queue.
///
/// Panics on comparison if a NaN sneaks in; the simulator validates every
/// configured time before it gets here.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct OrderedTime<T>(pub T);

impl<T: Scalar> Eq for OrderedTime<T> {}

impl<T: Scalar> PartialOrd for OrderedTime<T> {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl<T: Scalar> Ord for OrderedTime<T> {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0
            .partial_cmp(&other.0)
            .expect("simulation time must not be NaN")
    }
}
