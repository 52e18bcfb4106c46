//! Counting and modelling of consecutive-prime residue patterns.
//!
//! The crate provides:
//!
//! - segmented prime sieving and exact counts of consecutive-prime patterns
//!   modulo `q` ([`patterns`]),
//! - Hardy–Littlewood singular series `S_q(H)` and its inclusion–exclusion
//!   ("zeroed") form `S_{q,0}(H)`, with persisted value tables ([`series`]),
//! - numerical evaluation of the conjectural density integral for pairs of
//!   consecutive primes, with configurable truncation depth ([`conjecture`]),
//! - windowed frequency sampling of pattern densities at large heights and
//!   li-weighted stitching of the windows into a global ratio ([`sampler`]),
//! - residual analysis against the simplified asymptotic and a closed-form
//!   lower-order-term fit ([`analysis`]).
//!
//! All real-valued computation is generic over the scalar type through the
//! [`Real`] trait (`f64` for production accuracy, `f32` compiles and runs at
//! reduced precision). The integer-side sieve machinery works in `u64`.

pub mod analysis;
pub mod arith;
pub mod conjecture;
pub mod error;
pub mod logint;
pub mod patterns;
pub mod quad;
pub mod real;
pub mod sampler;
pub mod series;
pub mod sieve;

pub use error::{Error, Result};
pub use real::Real;

/// Default scalar type used by the CLI and the acceptance suite.
pub type Scalar = f64;

/// [`series::SeriesValue`] at the default scalar.
pub type SeriesValue64 = series::SeriesValue<Scalar>;
/// [`series::SeriesTable`] at the default scalar.
pub type SeriesTable64 = series::SeriesTable<Scalar>;
/// [`conjecture::Coefficients`] at the default scalar.
pub type Coefficients64 = conjecture::Coefficients<Scalar>;

/// Runs `f` inside a rayon pool with `workers` threads (`None` = current pool).
///
/// Every parallel reduction in the crate merges per-segment results in a
/// fixed order, so outputs are identical for any worker count.
pub fn run_with_workers<R: Send>(workers: Option<usize>, f: impl FnOnce() -> R + Send) -> Result<R> {
    match workers {
        None => Ok(f()),
        Some(n) => {
            if n == 0 {
                return Err(Error::invalid_parameter("worker count must be >= 1"));
            }
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::invalid_parameter(format!("failed to build thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// Formats a scalar with 17 significant digits, which round-trips `f64`.
pub fn format_scalar<F: Real>(v: F) -> String {
    format!("{:.16e}", v.to_f64().unwrap_or(f64::NAN))
}
