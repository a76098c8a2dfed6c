use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point element type of embeddings and classifier parameters.
///
/// Implemented for `f32` and `f64`. Snapshots always persist 64-bit values,
/// so every scalar must convert to and from `f64`.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum + Default + Debug + Display + Send + Sync + 'static
{
    /// Lossy conversion from an `f64` literal or sample.
    fn of(value: f64) -> Self;

    fn to_f64_lossy(self) -> f64;
}

impl Scalar for f32 {
    #[inline]
    fn of(value: f64) -> Self {
        value as f32
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    #[inline]
    fn of(value: f64) -> Self {
        value
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self
    }
}

/// Index-order sum of `values` divided by their count.
///
/// Every averaging path (strategies, pooling, test oracles) goes through this
/// accumulation order so results are reproducible bit for bit.
pub(crate) fn mean_of_rows<'a, T: Scalar>(dim: usize, rows: impl IntoIterator<Item = &'a [T]>) -> Option<Vec<T>> {
    let mut acc = vec![T::zero(); dim];
    let mut count = 0usize;
    for row in rows {
        for (a, &x) in acc.iter_mut().zip(row) {
            *a = *a + x;
        }
        count += 1;
    }
    if count == 0 {
        return None;
    }
    let n = T::from_usize(count).expect("row count representable");
    acc.iter_mut().for_each(|a| *a = *a / n);
    Some(acc)
}
