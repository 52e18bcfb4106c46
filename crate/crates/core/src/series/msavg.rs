//! Averages of the zeroed singular series over fixed-size subsets of [1, h],
//! compared against the Gaussian-moment model.

use super::{plain_sums_by_max, SeriesEvaluator};
use crate::arith::binomial_u128;
use crate::error::{Error, Result};
use crate::real::Real;

/// Exhaustive left-hand side and model value for one (h, ell).
#[derive(Clone, Copy, Debug)]
pub struct MsAverage<F> {
    pub h: u64,
    pub ell: u32,
    /// Exact enumerated sum over all ell-subsets of [1, h].
    pub lhs: F,
    /// mu_ell / ell! * (-h log h + A h)^{ell/2} (zero for odd ell).
    pub model: F,
    pub a_param: F,
}

/// ell-th moment of the standard normal: 0 for odd ell, (ell-1)!! for even.
pub fn normal_moment(ell: u32) -> u64 {
    if ell % 2 == 1 {
        0
    } else {
        (1..=ell as u64).step_by(2).product::<u64>().max(1)
    }
}

const ENUMERATION_BUDGET: u128 = 10_000_000;

/// Sum of `S_{q,0}(T)` over all `T` in `[1, h]` with `|T| = ell`.
///
/// Uses the inclusion-exclusion reduction to plain-series sums:
/// `sum = sum_i (-1)^{ell - i} C(h - i, ell - i) Q_i` with
/// `Q_i = sum over i-subsets S of S_q(S)`; only same-parity subsets
/// contribute to `Q_i` for `i >= 2`.
fn zeroed_subset_sum<F: Real>(eval: &SeriesEvaluator<F>, h: u64, ell: u32) -> Result<F> {
    let positions: Vec<u64> = (1..=h).collect();
    let evens: Vec<u64> = positions.iter().copied().filter(|x| x % 2 == 0).collect();
    let odds: Vec<u64> = positions.iter().copied().filter(|x| x % 2 == 1).collect();
    let cutoff = eval.min_cutoff().max(h);
    let imax = ell as usize;

    let mut q_sums: Vec<F> = vec![F::zero(); imax + 1];
    q_sums[0] = F::one();
    if imax >= 1 {
        q_sums[1] = F::of_u64(h);
    }
    if imax >= 2 {
        for group in [&evens, &odds] {
            if group.is_empty() {
                continue;
            }
            let rows = plain_sums_by_max(eval, group, &[], imax, cutoff)?;
            for row in &rows {
                for i in 2..=imax {
                    q_sums[i] += row[i - 1];
                }
            }
        }
    }

    let mut total = F::zero();
    for i in 0..=imax {
        let sign = if (imax - i) % 2 == 0 { F::one() } else { -F::one() };
        let choose = binomial_u128(h - i as u64, (imax - i) as u64);
        total += sign * F::of(choose as f64) * q_sums[i];
    }
    Ok(total)
}

/// Exhaustive average of `S_{q,0}` over ell-subsets of [1, h] with the
/// Gaussian-moment model at the supplied constant `A` (and an optional
/// multiplicative prefactor on the model, default 1).
pub fn ms_average<F: Real>(
    h: u64,
    ell: u32,
    q: u32,
    a_param: F,
    prefactor: Option<F>,
) -> Result<MsAverage<F>> {
    if !(1..=4).contains(&ell) {
        return Err(Error::invalid_parameter(format!("ell must be in [1, 4], got {ell}")));
    }
    if h < ell as u64 || h > 60 {
        return Err(Error::invalid_parameter(format!("h must be in [ell, 60], got {h}")));
    }
    if binomial_u128(h, ell as u64) > ENUMERATION_BUDGET {
        return Err(Error::budget(format!(
            "C({h}, {ell}) exceeds the {ENUMERATION_BUDGET} enumeration budget"
        )));
    }
    let eval = SeriesEvaluator::<F>::new(q, super::DEFAULT_CUTOFF_TARGET, h.max(1))?;
    let lhs = zeroed_subset_sum(&eval, h, ell)?;

    let mu = normal_moment(ell);
    let model = if mu == 0 {
        F::zero()
    } else {
        let hf = F::of_u64(h);
        let base = -hf * hf.ln() + a_param * hf;
        let m = (ell / 2) as i32;
        let fact: u64 = (1..=ell as u64).product();
        let raw = F::of_u64(mu) / F::of_u64(fact) * base.powi(m);
        raw * prefactor.unwrap_or_else(F::one)
    };
    Ok(MsAverage { h, ell, lhs, model, a_param })
}

/// Least-squares fit of the constant `A` for `ell = 2` over an h-range:
/// minimizes `sum_h (lhs(h) - (1/2)(-h log h + A h))^2`, which is linear in
/// `A` with the closed form `A = sum phi r / sum phi^2`, `phi = h/2`,
/// `r = lhs + (h log h)/2`.
pub fn fit_ms_constant<F: Real>(q: u32, h_lo: u64, h_hi: u64) -> Result<F> {
    if h_lo < 2 || h_lo >= h_hi || h_hi > 60 {
        return Err(Error::invalid_parameter("fit range must satisfy 2 <= lo < hi <= 60"));
    }
    let eval = SeriesEvaluator::<F>::new(q, super::DEFAULT_CUTOFF_TARGET, h_hi)?;
    let two = F::of(2.0);
    let mut num = F::zero();
    let mut den = F::zero();
    for h in h_lo..=h_hi {
        let lhs = zeroed_subset_sum(&eval, h, 2)?;
        let hf = F::of_u64(h);
        let phi = hf / two;
        let r = lhs + hf * hf.ln() / two;
        num += phi * r;
        den += phi * phi;
    }
    if den == F::zero() {
        return Err(Error::SingularFit("empty h-range".into()));
    }
    Ok(num / den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::{zeroed_series, TupleSet};

    #[test]
    fn moments() {
        assert_eq!(normal_moment(1), 0);
        assert_eq!(normal_moment(2), 1);
        assert_eq!(normal_moment(3), 0);
        assert_eq!(normal_moment(4), 3);
    }

    #[test]
    fn singletons_vanish() {
        let avg = ms_average::<f64>(5, 1, 1, -0.5, None).unwrap();
        assert_eq!(avg.lhs, 0.0);
        assert_eq!(avg.model, 0.0);
    }

    #[test]
    fn three_term_enumeration_matches_per_set_oracle() {
        // h = 3, ell = 2: S_0({1,2}) + S_0({1,3}) + S_0({2,3})
        let avg = ms_average::<f64>(3, 2, 1, -0.5, None).unwrap();
        let mut oracle = 0.0;
        for pair in [[1u64, 2], [1, 3], [2, 3]] {
            oracle += zeroed_series::<f64>(&TupleSet::new(pair.to_vec()).unwrap(), 1)
                .unwrap()
                .value;
        }
        assert!((avg.lhs - oracle).abs() < 1e-10, "lhs {} oracle {oracle}", avg.lhs);
    }

    #[test]
    fn exhaustive_matches_reduction_at_ell_3() {
        let h = 12u64;
        let avg = ms_average::<f64>(h, 3, 1, -0.5, None).unwrap();
        let mut oracle = 0.0;
        for a in 1..=h {
            for b in (a + 1)..=h {
                for c in (b + 1)..=h {
                    oracle += zeroed_series::<f64>(&TupleSet::new(vec![a, b, c]).unwrap(), 1)
                        .unwrap()
                        .value;
                }
            }
        }
        assert!((avg.lhs - oracle).abs() < 1e-9, "lhs {} oracle {oracle}", avg.lhs);
    }

    #[test]
    fn fitted_constant_is_between_minus_one_and_zero() {
        let a = fit_ms_constant::<f64>(1, 20, 60).unwrap();
        assert!(a > -1.0 && a < 0.0, "fitted A = {a}");
    }

    #[test]
    fn budget_and_parameter_errors() {
        assert!(ms_average::<f64>(61, 2, 1, -0.5, None).is_err());
        assert!(ms_average::<f64>(10, 5, 1, -0.5, None).is_err());
        assert!(ms_average::<f64>(10, 0, 1, -0.5, None).is_err());
    }
}
