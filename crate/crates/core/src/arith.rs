//! Small integer utilities shared across modules.

/// Greatest common divisor.
pub fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// Euler's totient by trial-division factorization.
pub fn totient(n: u64) -> u64 {
    let mut n = n;
    let mut result = n;
    let mut p = 2u64;
    while p * p <= n {
        if n % p == 0 {
            while n % p == 0 {
                n /= p;
            }
            result -= result / p;
        }
        p += 1;
    }
    if n > 1 {
        result -= result / n;
    }
    result
}

/// Residues `a` in `[1, q-1]` with `gcd(a, q) = 1`, ascending.
pub fn reduced_residues(q: u64) -> Vec<u64> {
    (1..q).filter(|&a| gcd(a, q) == 1).collect()
}

/// Deterministic trial-division primality test (adequate for the small
/// moduli and cutoffs used here).
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n % 2 == 0 {
        return n == 2;
    }
    let mut p = 3u64;
    while p * p <= n {
        if n % p == 0 {
            return false;
        }
        p += 2;
    }
    true
}

/// Distinct prime factors, ascending.
pub fn prime_factors(n: u64) -> Vec<u64> {
    let mut n = n;
    let mut out = Vec::new();
    let mut p = 2u64;
    while p * p <= n {
        if n % p == 0 {
            out.push(p);
            while n % p == 0 {
                n /= p;
            }
        }
        p += 1;
    }
    if n > 1 {
        out.push(n);
    }
    out
}

/// Moebius function for small arguments.
pub fn moebius(n: u64) -> i32 {
    if n == 1 {
        return 1;
    }
    let mut n = n;
    let mut factors = 0;
    let mut p = 2u64;
    while p * p <= n {
        if n % p == 0 {
            n /= p;
            if n % p == 0 {
                return 0;
            }
            factors += 1;
        }
        p += 1;
    }
    if n > 1 {
        factors += 1;
    }
    if factors % 2 == 0 {
        1
    } else {
        -1
    }
}

/// Binomial coefficient in `u128`, saturating at `u128::MAX`.
pub fn binomial_u128(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut result: u128 = 1;
    for i in 1..=k {
        let factor = (n - k + i) as u128;
        result = match result.checked_mul(factor) {
            Some(v) => v / i as u128,
            None => return u128::MAX,
        };
    }
    result
}

/// Binomial coefficient as `f64` (exact for values below 2^53).
pub fn binomial_f64(n: u64, k: u64) -> f64 {
    let b = binomial_u128(n, k);
    if b == u128::MAX {
        f64::INFINITY
    } else {
        b as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn totient_small_values() {
        assert_eq!(totient(1), 1);
        assert_eq!(totient(3), 2);
        assert_eq!(totient(5), 4);
        assert_eq!(totient(10), 4);
        assert_eq!(totient(150), 40);
    }

    #[test]
    fn reduced_residues_mod_10() {
        assert_eq!(reduced_residues(10), vec![1, 3, 7, 9]);
    }

    #[test]
    fn binomial_values() {
        assert_eq!(binomial_u128(5, 2), 10);
        assert_eq!(binomial_u128(60, 4), 487_635);
        assert_eq!(binomial_u128(0, 0), 1);
        assert_eq!(binomial_u128(4, 7), 0);
        // largest binomial the conjecture engine needs stays exactly
        // representable in f64
        assert_eq!(binomial_f64(216, 7), binomial_u128(216, 7) as f64);
        assert!(binomial_u128(216, 7) < (1u128 << 53));
    }

    #[test]
    fn moebius_small() {
        let expect = [1, -1, -1, 0, -1, 1, -1, 0, 0, 1];
        for (i, e) in expect.iter().enumerate() {
            assert_eq!(moebius(i as u64 + 1), *e, "mu({})", i + 1);
        }
    }

    #[test]
    fn primality_spot_checks() {
        assert!(is_prime(2));
        assert!(is_prime(999_983));
        assert!(!is_prime(1));
        assert!(!is_prime(999_981));
    }
}
