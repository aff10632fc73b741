//! Scalar kernel of the theory: the half-kite-angle function `f_theta`,
//! its derivative and inverse, and the linear Laplacian weight.
//!
//! For circles of radii `r0`, `r1` intersecting at exterior angle `theta`,
//! `2·f_theta(log(r1/r0))` is the kite angle at the first center. Everything
//! else in the crate reduces to this one-parameter family of functions.

use num_traits::{Float, FloatConst, FromPrimitive};
use thiserror::Error;

/// Floating-point scalar the kernels are generic over (`f32` or `f64`).
pub trait Scalar: Float + FloatConst + FromPrimitive {}
impl<T> Scalar for T where T: Float + FloatConst + FromPrimitive {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum KernelError {
    #[error("intersection angle theta must lie strictly in (0, pi)")]
    ThetaOutOfRange,
    #[error("argument must lie strictly in (0, pi - theta)")]
    YOutOfRange,
}

fn check_theta<S: Scalar>(theta: S) -> Result<(), KernelError> {
    if theta > S::zero() && theta < S::PI() && theta.is_finite() {
        Ok(())
    } else {
        Err(KernelError::ThetaOutOfRange)
    }
}

/// `f_theta(x) = (1/2i)·log((1 - e^{x-i·theta})/(1 - e^{x+i·theta}))` on the
/// branch with values in `(0, pi)`.
///
/// The quotient has unit modulus for real `x`, so the value equals the
/// argument of `1 - e^{x+i·theta}` reflected, which collapses to a single
/// `atan2`. Both arguments are rescaled by `e^{-x}` for `x > 0` so the
/// evaluation never overflows.
pub fn f_theta<S: Scalar>(theta: S, x: S) -> Result<S, KernelError> {
    check_theta(theta)?;
    Ok(f_theta_raw(theta, x))
}

pub(crate) fn f_theta_raw<S: Scalar>(theta: S, x: S) -> S {
    let (s, c) = (theta.sin(), theta.cos());
    if x > S::zero() {
        // atan2 is invariant under scaling both components by e^{-x} > 0
        S::atan2(s, (-x).exp() - c)
    } else {
        let ex = x.exp();
        S::atan2(ex * s, S::one() - ex * c)
    }
}

/// Derivative `f_theta'(x) = sin(theta) / (2·(cosh(x) - cos(theta))) > 0`.
pub fn f_theta_prime<S: Scalar>(theta: S, x: S) -> Result<S, KernelError> {
    check_theta(theta)?;
    Ok(f_theta_prime_raw(theta, x))
}

pub(crate) fn f_theta_prime_raw<S: Scalar>(theta: S, x: S) -> S {
    let two = S::one() + S::one();
    theta.sin() / (two * (x.cosh() - theta.cos()))
}

/// Inverse of `f_theta` on `(0, pi - theta)`:
/// `f_theta^{-1}(y) = log(sin(y) / sin(y + theta))`.
pub fn f_theta_inv<S: Scalar>(theta: S, y: S) -> Result<S, KernelError> {
    check_theta(theta)?;
    if !(y > S::zero() && y < S::PI() - theta) {
        return Err(KernelError::YOutOfRange);
    }
    Ok((y.sin() / (y + theta).sin()).ln())
}

/// Difference `f_theta(x + h) - f_theta(x - h)` evaluated without the
/// catastrophic cancellation of subtracting two nearly equal angles.
///
/// Writing both values as arguments of planar vectors, the difference is the
/// angle between the vectors, whose cross and dot products simplify to
/// cancellation-free closed forms. Used by tests to validate `f_theta_prime`
/// against a central difference at full relative accuracy.
pub fn f_theta_central_difference<S: Scalar>(theta: S, x: S, h: S) -> Result<S, KernelError> {
    check_theta(theta)?;
    let two = S::one() + S::one();
    let (s, c) = (theta.sin(), theta.cos());
    let (sh, ch) = (h.sinh(), h.cosh());
    let delta = if x > S::zero() {
        // rescale cross and dot by e^{-2x}
        let emx = (-x).exp();
        S::atan2(
            two * emx * s * sh,
            emx * emx - two * emx * c * ch + S::one(),
        )
    } else {
        let ex = x.exp();
        S::atan2(two * ex * s * sh, S::one() - two * ex * c * ch + ex * ex)
    };
    Ok(delta / (two * h))
}

/// Weight of the linear discrete Laplacian on an edge with intersection
/// angle `alpha`:
/// `c(alpha) = 2·f_alpha'(0) = sin(alpha)/(1 - cos(alpha)) = cot(alpha/2)`.
///
/// Geometrically this is the ratio of the two diagonals (black over white)
/// of the isoradial rhombus with angle `alpha` at its black corners.
pub fn laplacian_weight<S: Scalar>(alpha: S) -> Result<S, KernelError> {
    check_theta(alpha)?;
    Ok(laplacian_weight_raw(alpha))
}

pub(crate) fn laplacian_weight_raw<S: Scalar>(alpha: S) -> S {
    let two = S::one() + S::one();
    (alpha / two).tan().recip()
}
