//! Drift taming for explicit integration of super-linearly growing drifts.
//!
//! An explicit Euler update with a drift of super-linear growth can blow up in
//! the mean square no matter how small the step is. Taming rescales the drift
//! pointwise before each update:
//!
//! ```text
//! b_h(x, y) = b(x, y) / (1 + h^alpha * |b(x, y)|)
//! ```
//!
//! The rescaled field keeps the direction of `b` and obeys the two bounds that
//! make the scheme stable and convergent:
//!
//! * `|b_h(x, y)| <= min(h^(-alpha), |b(x, y)|)`, so one drift step moves the
//!   state by at most `h^(1 - alpha)`;
//! * `b - b_h = h^alpha * |b| * b_h`, so the perturbation vanishes at rate
//!   `h^alpha` wherever `b` is bounded.
//!
//! The admissible exponent range depends on the driver and the working moment
//! order, so it is enforced where those are configured: diffusion systems
//! require `alpha` in `(0, 1/2]`, jump experiments require `alpha * p < 1`.
//! The transform itself is total in `alpha` and only requires it positive.

use crate::error::{Error, Result};
use crate::model::{norm, PairMap};

/// A drift field rescaled for one fixed step size.
pub struct TamedDrift {
    base: PairMap,
    h: f64,
    alpha: f64,
    h_alpha: f64,
}

/// Wraps `base` with the taming rescaling for step `h` and exponent `alpha`.
///
/// # Errors
///
/// [`Error::InvalidRange`] unless `h` lies in `(0, 1)` and `alpha` is positive
/// and finite.
pub fn tame(base: PairMap, h: f64, alpha: f64) -> Result<TamedDrift> {
    if !(h > 0.0 && h < 1.0) {
        return Err(Error::InvalidRange(format!("step h={h} must lie in (0, 1)")));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidRange(format!("alpha {alpha} must be positive and finite")));
    }
    let h_alpha = h.powf(alpha);
    Ok(TamedDrift { base, h, alpha, h_alpha })
}

impl TamedDrift {
    /// Evaluates the tamed drift at `(x, y)`.
    ///
    /// Non-finite values of the base drift propagate as non-finite outputs so
    /// that the integrator's state check can report them.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let mut b = (self.base)(x, y);
        let scale = 1.0 / (1.0 + self.h_alpha * norm(&b));
        for c in &mut b {
            *c *= scale;
        }
        b
    }

    /// Step size the rescaling was built for.
    pub fn h(&self) -> f64 {
        self.h
    }

    /// Taming exponent.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Magnitude cap `h^(-alpha)`; no evaluation exceeds it.
    pub fn cap(&self) -> f64 {
        self.h.powf(-self.alpha)
    }
}
