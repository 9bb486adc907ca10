//! Dense vector helpers on slices.

use crate::error::{Error, Result};
use crate::scalar::Real;

#[inline]
pub fn dot<F: Real>(a: &[F], b: &[F]) -> F {
    a.iter().zip(b).fold(F::zero(), |acc, (&x, &y)| acc + x * y)
}

#[inline]
pub fn norm_sq<F: Real>(a: &[F]) -> F {
    dot(a, a)
}

#[inline]
pub fn norm<F: Real>(a: &[F]) -> F {
    norm_sq(a).sqrt()
}

#[inline]
pub fn dist<F: Real>(a: &[F], b: &[F]) -> F {
    a.iter()
        .zip(b)
        .fold(F::zero(), |acc, (&x, &y)| acc + (x - y) * (x - y))
        .sqrt()
}

/// `y += a * x`
#[inline]
pub fn axpy<F: Real>(a: F, x: &[F], y: &mut [F]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi = *yi + a * xi;
    }
}

pub fn check_dim<F>(expected: usize, x: &[F]) -> Result<()> {
    if x.len() == expected {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            expected,
            got: x.len(),
        })
    }
}

pub fn all_finite<F: Real>(x: &[F]) -> bool {
    x.iter().all(|v| v.is_finite())
}
