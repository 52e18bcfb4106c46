//! The logarithmic integral li(x) = integral of dt/log t from 2 to x.

use crate::error::{Error, Result};
use crate::quad::adaptive_simpson;
use crate::real::Real;

/// A point evaluation of li.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LiValue<F> {
    pub x: F,
    pub value: F,
}

/// Default relative accuracy of [`log_integral`].
pub const LI_REL_TOL: f64 = 1e-12;

/// Evaluates li(x) with the lower limit fixed at 2.
///
/// The integral is taken in u = log t, where the integrand e^u / u is smooth
/// at every scale the crate uses (x up to ~1e18).
pub fn log_integral<F: Real>(x: F) -> Result<LiValue<F>> {
    log_integral_with_tol(x, F::of(LI_REL_TOL))
}

pub fn log_integral_with_tol<F: Real>(x: F, rel_tol: F) -> Result<LiValue<F>> {
    let two = F::of(2.0);
    if !(x >= two) {
        return Err(Error::domain(format!("li(x) requires x >= 2, got {x}")));
    }
    if x == two {
        return Ok(LiValue { x, value: F::zero() });
    }
    let q = adaptive_simpson(|u: F| u.exp() / u, two.ln(), x.ln(), rel_tol, 52)?;
    Ok(LiValue { x, value: q.value })
}

/// Convenience: li(x) as a bare scalar.
pub fn li<F: Real>(x: F) -> Result<F> {
    log_integral(x).map(|v| v.value)
}
