//! Conjectural density of consecutive-prime pairs (a, b) modulo q.
//!
//! The predicted count is `(1/q) * integral from 2 to x` of
//! `alpha(y)^{eps_q(a,b)} * z(y)^2 * D(a,b;y) dy`, where `D` is a triple sum
//! over gaps `h`, boundary sets `A subset of {0, h}`, and interior sets `T`,
//! weighting zeroed singular-series values. `D_n` denotes the `|T| = n`
//! layer; truncation depth and the gap cutoff are configurable.

mod predict;
mod sums;

pub use predict::{
    d_n, d_n_parts, eq19_correction, predict, simplified_prediction, ConjectureEvaluator,
    DnParts, Prediction,
};
pub use sums::{build_sum_engine, lemma4_check, subset_sum, SubsetSum, SumEngine, SumKind};

use crate::arith::{gcd, totient};
use crate::error::{Error, Result};
use crate::real::Real;

/// The y-dependent weights of the conjecture integrand.
#[derive(Clone, Copy, Debug)]
pub struct Coefficients<F> {
    pub y: F,
    pub q: u32,
    /// alpha(y) = 1 - q / (phi(q) log y)
    pub alpha: F,
    /// z(y) = q / (phi(q) alpha(y) log y), the per-interior-point weight
    pub z: F,
    /// g(y) = alpha(y)^{phi(q)/q}, the per-unit gap damping
    pub g: F,
}

/// Smallest admissible y for [`coefficients`]: above both e^2 and
/// e^{2 q / phi(q)}, so alpha is safely positive.
pub fn min_y(q: u32) -> f64 {
    let ratio = q as f64 / totient(q as u64) as f64;
    (2.0f64).exp().max((2.0 * ratio).exp())
}

pub fn coefficients<F: Real>(y: F, q: u32) -> Result<Coefficients<F>> {
    if q < 3 {
        return Err(Error::invalid_parameter(format!("modulus must be >= 3, got {q}")));
    }
    let floor = F::of(min_y(q));
    if !(y > floor) {
        return Err(Error::domain(format!(
            "coefficients require y > {floor} for q = {q}, got {y}"
        )));
    }
    let phi = totient(q as u64);
    let ratio = F::of_u64(q as u64) / F::of_u64(phi);
    let log_y = y.ln();
    let alpha = F::one() - ratio / log_y;
    let z = ratio / (alpha * log_y);
    let g = alpha.powf(F::one() / ratio);
    Ok(Coefficients { y, q, alpha, z, g })
}

/// The coprime-excess exponent for the representative gap `h0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpsilonQ<F> {
    pub q: u32,
    pub a: u32,
    pub b: u32,
    /// Minimal positive residue of b - a modulo q (q itself when a = b).
    pub h0: u32,
    /// #{0 < t < h0 : gcd(t + a, q) = 1} - phi(q) h0 / q
    pub value: F,
}

/// Reduces `a` modulo `q` and insists the result is a reduced residue.
fn reduce_residue(label: &str, a: u32, q: u32) -> Result<u32> {
    let r = a % q;
    if r == 0 || gcd(r as u64, q as u64) != 1 {
        return Err(Error::invalid_parameter(format!(
            "{label} = {a} is not a reduced residue modulo {q}"
        )));
    }
    Ok(r)
}

pub fn epsilon_q<F: Real>(q: u32, a: u32, b: u32) -> Result<EpsilonQ<F>> {
    if q < 3 {
        return Err(Error::invalid_parameter(format!("modulus must be >= 3, got {q}")));
    }
    let a = reduce_residue("a", a, q)?;
    let b = reduce_residue("b", b, q)?;
    let h0 = if a == b { q } else { (b + q - a) % q };
    let count = (1..h0).filter(|&t| gcd((t + a) as u64, q as u64) == 1).count() as u64;
    let phi = totient(q as u64);
    let value = F::of_u64(count) - F::of_u64(phi) * F::of_u64(h0 as u64) / F::of_u64(q as u64);
    Ok(EpsilonQ { q, a, b, h0, value })
}

/// Quadrature controls for [`predict`].
#[derive(Clone, Copy, Debug)]
pub struct QuadratureSettings<F> {
    pub rel_tol: F,
    pub max_depth: u32,
}

impl<F: Real> Default for QuadratureSettings<F> {
    fn default() -> Self {
        QuadratureSettings { rel_tol: F::of(1e-6), max_depth: 40 }
    }
}

/// Full parameter set for the conjecture evaluator.
#[derive(Clone, Copy, Debug)]
pub struct ConjectureParams<F> {
    pub q: u32,
    pub a: u32,
    pub b: u32,
    /// Truncation depth of D (layers |T| = 0..=n_max).
    pub n_max: usize,
    /// Gap-cutoff constant: gaps h <= c loglog(y) log(y) are kept.
    pub c: f64,
    pub quadrature: QuadratureSettings<F>,
    /// Test hook: replaces eps_q(a, b) in the integrand when set.
    pub epsilon_override: Option<F>,
}

impl<F: Real> ConjectureParams<F> {
    pub const DEFAULT_N_MAX: usize = 5;
    pub const DEFAULT_GAP_C: f64 = 4.0;

    pub fn new(q: u32, a: u32, b: u32) -> Result<Self> {
        if q < 3 {
            return Err(Error::invalid_parameter(format!("modulus must be >= 3, got {q}")));
        }
        let a = reduce_residue("a", a, q)?;
        let b = reduce_residue("b", b, q)?;
        Ok(ConjectureParams {
            q,
            a,
            b,
            n_max: Self::DEFAULT_N_MAX,
            c: Self::DEFAULT_GAP_C,
            quadrature: QuadratureSettings::default(),
            epsilon_override: None,
        })
    }

    pub fn with_n_max(mut self, n_max: usize) -> Result<Self> {
        if n_max > 5 {
            return Err(Error::invalid_parameter(format!("n_max must be in [0, 5], got {n_max}")));
        }
        self.n_max = n_max;
        Ok(self)
    }

    pub fn with_gap_c(mut self, c: f64) -> Result<Self> {
        if !(c >= 1.0) {
            return Err(Error::invalid_parameter(format!("gap constant must be >= 1, got {c}")));
        }
        self.c = c;
        Ok(self)
    }
}

/// Largest gap kept at height y: floor(c loglog(y) log(y)).
pub fn gap_cutoff(c: f64, y: f64) -> u64 {
    if y <= std::f64::consts::E {
        return 0;
    }
    let log_y = y.ln();
    let loglog = log_y.ln();
    if loglog <= 0.0 {
        return 0;
    }
    (c * loglog * log_y).floor() as u64
}
