use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Real-valued scalar used for all metric arithmetic.
///
/// Implemented for `f32` and `f64`. Counts stay integral; only ratios,
/// weights and correlations are carried in `T`.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    fn from_count(count: u64) -> Self {
        Self::from_u64(count).expect("count representable as a float")
    }

    fn lit(value: f64) -> Self {
        Self::from_f64(value).expect("literal representable as a float")
    }
}

impl<T> Real for T where
    T: Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
}
