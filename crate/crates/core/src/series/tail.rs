//! Truncation-tail corrections for singular-series Euler products.
//!
//! For a set of size k and a cutoff P at least as large as the set's
//! diameter, every omitted factor is the generic one,
//! `(1 - k/p) / (1 - 1/p)^k`, whose logarithm expands as
//! `-sum_{j>=2} (k^j - k) / (j p^j)`. Summing over p > P turns the tail into
//! truncated prime-zeta values, which are cheap to evaluate to near machine
//! precision. The correction is applied multiplicatively; only the tiny
//! residual is reported as the tail bound.

use crate::arith::moebius;

/// Highest power used in the log-tail expansion.
const J_MAX: usize = 32;

/// Riemann zeta for real s >= 2 by Euler-Maclaurin summation.
pub fn zeta(s: f64) -> f64 {
    debug_assert!(s >= 2.0);
    let m = 64u32;
    let mf = m as f64;
    let mut sum = 0.0;
    for n in 1..=m {
        sum += (n as f64).powf(-s);
    }
    sum += mf.powf(1.0 - s) / (s - 1.0);
    sum -= 0.5 * mf.powf(-s);
    // Bernoulli correction terms B2, B4, B6, B8
    let bern = [1.0 / 6.0, -1.0 / 30.0, 1.0 / 42.0, -1.0 / 30.0];
    let mut rising = s; // s (s+1) ... (s + 2i - 2)
    let mut fact = 2.0; // (2i)!
    for (i, b) in bern.iter().enumerate() {
        let power = mf.powf(-s - 2.0 * i as f64 - 1.0);
        sum += b / fact * rising * power;
        rising *= (s + 2.0 * i as f64 + 1.0) * (s + 2.0 * i as f64 + 2.0);
        fact *= (2.0 * i as f64 + 3.0) * (2.0 * i as f64 + 4.0);
    }
    sum
}

/// Prime zeta P(s) = sum over primes p of p^{-s}, via the Moebius inversion
/// of log zeta.
pub fn prime_zeta(s: f64) -> f64 {
    let mut sum = 0.0;
    let mut n = 1u64;
    loop {
        let ns = n as f64 * s;
        if ns > 64.0 {
            break;
        }
        let mu = moebius(n);
        if mu != 0 {
            sum += mu as f64 / n as f64 * zeta(ns).ln();
        }
        n += 1;
    }
    sum
}

/// Prefix sums of p^{-j} over a fixed prime list, plus the full prime-zeta
/// values, enabling truncated tails at any cutoff within the list.
pub struct TailContext {
    /// primes[i] is the i-th prime of the supported range.
    pub primes: Vec<u64>,
    /// prefix[j - 2][i] = sum over primes[0..=i] of p^{-j}.
    prefix: Vec<Vec<f64>>,
    /// total[j - 2] = P(j) over all primes.
    total: Vec<f64>,
}

impl TailContext {
    pub fn new(primes: Vec<u64>) -> TailContext {
        let mut prefix = Vec::with_capacity(J_MAX - 1);
        let mut total = Vec::with_capacity(J_MAX - 1);
        for j in 2..=J_MAX {
            let mut acc = 0.0;
            let row: Vec<f64> = primes
                .iter()
                .map(|&p| {
                    acc += (p as f64).powi(-(j as i32));
                    acc
                })
                .collect();
            prefix.push(row);
            total.push(prime_zeta(j as f64));
        }
        TailContext { primes, prefix, total }
    }

    /// Index of the largest listed prime `<= bound`, if any.
    pub fn cutoff_index(&self, bound: u64) -> Option<usize> {
        match self.primes.partition_point(|&p| p <= bound) {
            0 => None,
            n => Some(n - 1),
        }
    }

    /// Multiplicative tail factor and a bound on its relative residual, for
    /// set size `k` with the product truncated after `primes[idx]`.
    pub fn tail_factor(&self, k: usize, idx: usize) -> (f64, f64) {
        if k <= 1 {
            return (1.0, 0.0);
        }
        let kf = k as f64;
        let mut log_tail = 0.0;
        let mut kpow = kf; // k^j running
        for j in 2..=J_MAX {
            kpow *= kf;
            let pj_tail = (self.total[j - 2] - self.prefix[j - 2][idx]).max(0.0);
            log_tail -= (kpow - kf) / j as f64 * pj_tail;
        }
        // residual of the truncated j-series, bounded by a geometric tail:
        // P_{J+1}(>P) <= P_J(>P) / p_next and the terms shrink by k/p_next
        let p_next = self.primes.get(idx + 1).copied().unwrap_or(self.primes[idx] + 2) as f64;
        let ratio = kf / p_next;
        let pj_last = (self.total[J_MAX - 2] - self.prefix[J_MAX - 2][idx]).max(0.0);
        let series_residual = if ratio < 1.0 {
            kpow * kf / (J_MAX as f64 + 1.0) * (pj_last / p_next) / (1.0 - ratio)
        } else {
            f64::INFINITY
        };
        // prime-zeta evaluation noise, dominated by the j = 2 term
        let eval_noise = 1e-15 * (kf * kf + 1.0);
        (log_tail.exp(), series_residual + eval_noise)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sieve::simple_sieve;

    #[test]
    fn zeta_matches_closed_forms() {
        let pi = std::f64::consts::PI;
        assert!((zeta(2.0) - pi * pi / 6.0).abs() < 1e-14);
        assert!((zeta(4.0) - pi.powi(4) / 90.0).abs() < 1e-14);
        assert!((zeta(64.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn prime_zeta_matches_direct_sum() {
        // direct summation over primes to 1e7 plus a crude remainder check
        for j in [2.0f64, 3.0, 5.0] {
            let direct: f64 = simple_sieve(10_000_000)
                .iter()
                .map(|&p| (p as f64).powf(-j))
                .sum();
            let pz = prime_zeta(j);
            assert!(
                (pz - direct).abs() < 2e-8,
                "P({j}) = {pz}, direct = {direct}"
            );
            assert!(pz > direct, "tail must be positive at j = {j}");
        }
    }

    #[test]
    fn tail_factor_matches_direct_product() {
        // tail over (100, 1e7] computed directly vs the context at cutoff 100
        let ctx = TailContext::new(simple_sieve(1000));
        let big = simple_sieve(10_000_000);
        for k in 2..=7usize {
            let idx = ctx.cutoff_index(100).unwrap();
            let (tail, bound) = ctx.tail_factor(k, idx);
            let mut direct = 1.0f64;
            for &p in big.iter().filter(|&&p| p > 100) {
                let pf = p as f64;
                direct *= (1.0 - k as f64 / pf) / (1.0 - 1.0 / pf).powi(k as i32);
            }
            // direct product still omits p > 1e7; that remainder is ~k^2/(2e7 ln 1e7)
            let slack = (k * k) as f64 / 1e7;
            assert!(
                (tail - direct).abs() < slack + 1e-12,
                "k={k}: tail={tail} direct={direct}"
            );
            assert!(bound < 1e-10, "k={k} bound={bound}");
        }
    }
}
