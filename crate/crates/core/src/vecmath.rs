//! Small dense-vector helpers. Parameter vectors here are tiny (a few
//! hundred entries), so plain slices beat pulling in a matrix crate.

use crate::error::{Error, Result};
use crate::scalar::Float;

pub fn check_same_len<F: Float>(a: &[F], b: &[F]) -> Result<()> {
    if a.len() == b.len() {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            left: a.len(),
            right: b.len(),
        })
    }
}

/// Euclidean norm.
pub fn norm2<F: Float>(xs: &[F]) -> F {
    xs.iter().map(|x| *x * *x).sum::<F>().sqrt()
}

/// `y += alpha * x`
pub fn axpy<F: Float>(alpha: F, x: &[F], y: &mut [F]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * *xi;
    }
}

/// `a - b` as a new vector.
pub fn sub<F: Float>(a: &[F], b: &[F]) -> Vec<F> {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| *x - *y).collect()
}

/// `‖a - b‖₂` without materialising the difference.
pub fn dist2<F: Float>(a: &[F], b: &[F]) -> F {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (*x - *y) * (*x - *y))
        .sum::<F>()
        .sqrt()
}
