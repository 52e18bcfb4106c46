//! Adaptive Simpson quadrature, generic over the scalar type.

use crate::error::{Error, Result};
use crate::real::Real;

/// Result of a quadrature run.
#[derive(Clone, Copy, Debug)]
pub struct QuadResult<F> {
    pub value: F,
    /// Accumulated Richardson error estimate.
    pub error_estimate: F,
    pub evaluations: usize,
}

struct Worker<'a, F: Real, G: Fn(F) -> F> {
    f: &'a G,
    evaluations: usize,
    error: F,
    max_depth: u32,
}

impl<'a, F: Real, G: Fn(F) -> F> Worker<'a, F, G> {
    fn eval(&mut self, x: F) -> F {
        self.evaluations += 1;
        (self.f)(x)
    }

    /// Classic adaptive Simpson with Richardson extrapolation. `whole` is the
    /// Simpson estimate over `[a, b]`; `eps` is the absolute tolerance
    /// allotted to this interval.
    #[allow(clippy::too_many_arguments)]
    fn simpson(&mut self, a: F, fa: F, b: F, fb: F, m: F, fm: F, whole: F, eps: F, depth: u32) -> F {
        let two = F::of(2.0);
        let six = F::of(6.0);
        let lm = (a + m) / two;
        let rm = (m + b) / two;
        let flm = self.eval(lm);
        let frm = self.eval(rm);
        let h = b - a;
        let left = h / two / six * (fa + F::of(4.0) * flm + fm);
        let right = h / two / six * (fm + F::of(4.0) * frm + fb);
        let delta = left + right - whole;
        let fifteen = F::of(15.0);
        if depth >= self.max_depth || delta.abs() <= fifteen * eps {
            if depth >= self.max_depth {
                self.error += delta.abs() / fifteen + F::epsilon() * whole.abs();
            } else {
                self.error += delta.abs() / fifteen;
            }
            return left + right + delta / fifteen;
        }
        let half_eps = eps / two;
        self.simpson(a, fa, m, fm, lm, flm, left, half_eps, depth + 1)
            + self.simpson(m, fm, b, fb, rm, frm, right, half_eps, depth + 1)
    }
}

/// Integrates `f` over `[a, b]` to the requested relative tolerance.
///
/// The error estimate is accumulated from the per-interval Richardson terms;
/// when the recursion depth limit is reached the interval is accepted and its
/// residual is folded into the estimate, so the reported error stays honest.
pub fn adaptive_simpson<F: Real>(
    f: impl Fn(F) -> F,
    a: F,
    b: F,
    rel_tol: F,
    max_depth: u32,
) -> Result<QuadResult<F>> {
    if !(a < b) {
        if a == b {
            return Ok(QuadResult { value: F::zero(), error_estimate: F::zero(), evaluations: 0 });
        }
        return Err(Error::domain("integration bounds must satisfy a <= b"));
    }
    if !(rel_tol > F::zero()) {
        return Err(Error::invalid_parameter("quadrature tolerance must be positive"));
    }

    let mut w = Worker { f: &f, evaluations: 0, error: F::zero(), max_depth };
    let two = F::of(2.0);
    let m = (a + b) / two;
    let fa = w.eval(a);
    let fb = w.eval(b);
    let fm = w.eval(m);
    let whole = (b - a) / F::of(6.0) * (fa + F::of(4.0) * fm + fb);

    // Coarse magnitude scan to convert the relative tolerance into an
    // absolute budget; a pure |whole| scale underestimates integrals with
    // heavy cancellation.
    let mut scale = whole.abs();
    let samples = 16;
    for i in 0..=samples {
        let x = a + (b - a) * F::of_usize(i) / F::of_usize(samples);
        scale = scale.max(w.eval(x).abs() * (b - a) / F::of_usize(samples));
    }
    let floor = F::min_positive_value() / F::epsilon();
    let eps = rel_tol * scale.max(floor);

    let value = w.simpson(a, fa, b, fb, m, fm, whole, eps, 0);
    Ok(QuadResult { value, error_estimate: w.error, evaluations: w.evaluations })
}

/// Fixed-panel composite Simpson rule (`panels` must be even).
///
/// Used for stability cross-checks; the adaptive routine is the primary path.
pub fn fixed_simpson<F: Real>(f: impl Fn(F) -> F, a: F, b: F, panels: usize) -> Result<F> {
    if panels == 0 || panels % 2 != 0 {
        return Err(Error::invalid_parameter("panel count must be even and positive"));
    }
    if a == b {
        return Ok(F::zero());
    }
    let n = panels;
    let h = (b - a) / F::of_usize(n);
    let mut acc = crate::real::KahanSum::new();
    acc.add(f(a));
    acc.add(f(b));
    for i in 1..n {
        let x = a + h * F::of_usize(i);
        let w = if i % 2 == 1 { F::of(4.0) } else { F::of(2.0) };
        acc.add(w * f(x));
    }
    Ok(acc.value() * h / F::of(3.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cubic_is_exact() {
        let q = adaptive_simpson(|x: f64| x * x * x - 2.0 * x + 1.0, 0.0, 2.0, 1e-12, 40).unwrap();
        // integral = 4 - 4 + 2 = 2
        assert!((q.value - 2.0).abs() < 1e-12);
    }

    #[test]
    fn exponential_to_tolerance() {
        let q = adaptive_simpson(|x: f64| x.exp(), 0.0, 5.0, 1e-12, 48).unwrap();
        let exact = 5f64.exp() - 1.0;
        assert!((q.value - exact).abs() / exact < 1e-12, "err {}", (q.value - exact).abs() / exact);
    }

    #[test]
    fn degenerate_interval_is_zero() {
        let q = adaptive_simpson(|x: f64| x.exp(), 3.0, 3.0, 1e-9, 30).unwrap();
        assert_eq!(q.value, 0.0);
    }

    #[test]
    fn reversed_bounds_rejected() {
        assert!(adaptive_simpson(|x: f64| x, 1.0, 0.0, 1e-9, 30).is_err());
    }

    #[test]
    fn fixed_simpson_agrees_with_adaptive() {
        let f = |x: f64| (1.0 + x * x).recip();
        let a = adaptive_simpson(f, 0.0, 1.0, 1e-13, 40).unwrap().value;
        let s = fixed_simpson(f, 0.0, 1.0, 1 << 14).unwrap();
        assert!((a - s).abs() < 1e-12);
        assert!((a - std::f64::consts::FRAC_PI_4).abs() < 1e-12);
    }

    #[test]
    fn works_at_f32() {
        let q = adaptive_simpson(|x: f32| x * x, 0.0f32, 3.0f32, 1e-5f32, 24).unwrap();
        assert!((q.value - 9.0).abs() < 1e-3);
    }
}
