//! Interior subset sums of zeroed singular-series values.
//!
//! `A_{h,l}` sums `S_{q,0}(T)` over admissible `T` in `[1, h-1]` with
//! `|T| = l`; `B`, `C`, `D` adjoin `{0}`, `{h}`, `{0,h}` respectively.
//! Two evaluation paths exist:
//!
//! - [`subset_sum`]: literal enumeration against a value provider (table or
//!   evaluator), budgeted at C(h-1, l) <= 1e7. The admissibility filter
//!   `gcd(t + a, q) = 1` is optional; the telescoping identities of
//!   [`lemma4_check`] hold exactly only for the unfiltered sums, which is
//!   what that check uses.
//! - [`SumEngine`]: closed-form inclusion-exclusion over plain-series subset
//!   sums, grouped by parity. This is what makes depth-5 truncation at gap
//!   cutoffs of ~150-220 tractable; per-set enumeration there would exceed
//!   1e8 sets.

use crate::arith::{binomial_u128, gcd};
use crate::error::{Error, Result};
use crate::real::Real;
use crate::series::{plain_sums_by_max, SeriesEvaluator, SeriesProvider, TupleSet};
use rayon::prelude::*;

/// Which boundary set is adjoined to the interior set.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SumKind {
    /// interior only
    A,
    /// adjoin {0}
    B,
    /// adjoin {h}
    C,
    /// adjoin {0, h}
    D,
}

#[derive(Clone, Copy, Debug)]
pub struct SubsetSum<F> {
    pub kind: SumKind,
    pub h: u64,
    pub ell: u32,
    pub value: F,
}

const SUBSET_BUDGET: u128 = 10_000_000;

/// Literal enumeration of one subset sum.
///
/// `admissible`: when `Some(a)`, interior points satisfy `gcd(t+a, q) = 1`
/// (the conjecture's filter); `None` sums over all of `[1, h-1]`.
pub fn subset_sum<F: Real, P: SeriesProvider<F> + ?Sized>(
    kind: SumKind,
    h: u64,
    ell: u32,
    q: u32,
    admissible: Option<u32>,
    provider: &P,
) -> Result<SubsetSum<F>> {
    if q < 3 {
        return Err(Error::invalid_parameter(format!("modulus must be >= 3, got {q}")));
    }
    if provider.q() != q {
        return Err(Error::invalid_parameter(format!(
            "provider is for q = {}, requested q = {q}",
            provider.q()
        )));
    }
    if h < 1 {
        return Err(Error::invalid_parameter("h must be >= 1"));
    }
    if binomial_u128(h.saturating_sub(1), ell as u64) > SUBSET_BUDGET {
        return Err(Error::budget(format!(
            "C({}, {ell}) exceeds the {SUBSET_BUDGET} subset enumeration budget",
            h - 1
        )));
    }
    if let Some(a) = admissible {
        let r = a % q;
        if r == 0 || gcd(r as u64, q as u64) != 1 {
            return Err(Error::invalid_parameter(format!(
                "a = {a} is not a reduced residue modulo {q}"
            )));
        }
    }

    let positions: Vec<u64> = (1..h)
        .filter(|&t| match admissible {
            Some(a) => gcd((t + a as u64) % q as u64, q as u64) == 1,
            None => true,
        })
        .collect();
    let base: Vec<u64> = match kind {
        SumKind::A => vec![],
        SumKind::B => vec![0],
        SumKind::C => vec![h],
        SumKind::D => vec![0, h],
    };
    if base.len() + ell as usize > TupleSet::MAX_SIZE {
        return Err(Error::SetTooLarge { size: base.len() + ell as usize, max: 7 });
    }

    let mut value = F::zero();
    let mut combo: Vec<u64> = Vec::with_capacity(ell as usize);
    enumerate_sum(&positions, 0, ell as usize, &mut combo, &base, provider, &mut value)?;
    Ok(SubsetSum { kind, h, ell, value })
}

fn enumerate_sum<F: Real, P: SeriesProvider<F> + ?Sized>(
    positions: &[u64],
    start: usize,
    remaining: usize,
    combo: &mut Vec<u64>,
    base: &[u64],
    provider: &P,
    acc: &mut F,
) -> Result<()> {
    if remaining == 0 {
        let mut elems = base.to_vec();
        elems.extend_from_slice(combo);
        let set = TupleSet::new(elems)?;
        *acc += provider.zeroed_value(&set)?;
        return Ok(());
    }
    let n = positions.len();
    for j in start..n {
        if n - j < remaining {
            break;
        }
        combo.push(positions[j]);
        enumerate_sum(positions, j + 1, remaining - 1, combo, base, provider, acc)?;
        combo.pop();
    }
    Ok(())
}

/// Maximum discrepancy of the telescoping identities
/// `B_{h-1,l-1} = C_{h-1,l-1} = A_{h,l} - A_{h-1,l}` and (for l >= 2)
/// `D_{h-1,l-2} = A_{h,l} - 2 A_{h-1,l} + A_{h-2,l}`.
///
/// The identities follow from translation and reflection invariance of the
/// summed function over the full interval, so they are checked on the
/// unfiltered sums; the residue-filtered variants do not satisfy them.
pub fn lemma4_check<F: Real, P: SeriesProvider<F> + ?Sized>(
    h: u64,
    ell: u32,
    q: u32,
    provider: &P,
) -> Result<F> {
    if ell < 1 {
        return Err(Error::invalid_parameter("lemma check requires ell >= 1"));
    }
    if h < 3 {
        return Err(Error::invalid_parameter("lemma check requires h >= 3"));
    }
    let a_h = subset_sum(SumKind::A, h, ell, q, None, provider)?.value;
    let a_h1 = subset_sum(SumKind::A, h - 1, ell, q, None, provider)?.value;
    let delta = a_h - a_h1;
    let b = subset_sum(SumKind::B, h - 1, ell - 1, q, None, provider)?.value;
    let c = subset_sum(SumKind::C, h - 1, ell - 1, q, None, provider)?.value;
    let mut disc = (b - delta).abs().max((c - delta).abs());
    if ell >= 2 {
        let a_h2 = subset_sum(SumKind::A, h - 2, ell, q, None, provider)?.value;
        let d = subset_sum(SumKind::D, h - 1, ell - 2, q, None, provider)?.value;
        let second = a_h - F::of(2.0) * a_h1 + a_h2;
        disc = disc.max((d - second).abs());
    }
    Ok(disc)
}

/// Precomputed A/B/C/D for every gap `h = h0, h0 + q, ...` up to `h_max` and
/// every depth `n <= n_max`, for one `(q, a, b)`.
#[derive(Debug)]
pub struct SumEngine<F> {
    pub q: u32,
    pub a: u32,
    pub b: u32,
    pub h_max: u64,
    pub n_max: usize,
    pub h0: u64,
    /// abcd[h][n] = [A, B, C, D]; rows for h not in the class stay zero.
    abcd: Vec<Vec<[F; 4]>>,
}

impl<F: Real> SumEngine<F> {
    /// Gaps congruent to b - a, ascending.
    pub fn class_gaps(&self) -> impl Iterator<Item = u64> + '_ {
        (self.h0..=self.h_max).step_by(self.q as usize)
    }

    pub fn abcd(&self, h: u64, n: usize) -> Option<[F; 4]> {
        if h > self.h_max || n > self.n_max || h < self.h0 || (h - self.h0) % self.q as u64 != 0 {
            return None;
        }
        Some(self.abcd[h as usize][n])
    }

    /// A + B + C + D at (h, n).
    pub fn total(&self, h: u64, n: usize) -> Option<F> {
        self.abcd(h, n).map(|v| v[0] + v[1] + v[2] + v[3])
    }
}

/// Cumulative-in-h view over by-max rows.
struct CumFamily<F> {
    positions: Vec<u64>,
    rows: Vec<Vec<F>>,
    ptr: usize,
    cum: Vec<F>,
}

impl<F: Real> CumFamily<F> {
    fn new(positions: Vec<u64>, rows: Vec<Vec<F>>, imax: usize) -> CumFamily<F> {
        debug_assert_eq!(positions.len(), rows.len());
        CumFamily { positions, rows, ptr: 0, cum: vec![F::zero(); imax] }
    }

    fn empty(imax: usize) -> CumFamily<F> {
        CumFamily { positions: vec![], rows: vec![], ptr: 0, cum: vec![F::zero(); imax] }
    }

    /// Sums over subsets contained in [1, h-1].
    fn advance_to(&mut self, h: u64) -> &[F] {
        while self.ptr < self.positions.len() && self.positions[self.ptr] < h {
            for (i, c) in self.cum.iter_mut().enumerate() {
                *c += self.rows[self.ptr][i];
            }
            self.ptr += 1;
        }
        &self.cum
    }
}

#[inline]
fn sign_of<F: Real>(e: usize) -> F {
    if e % 2 == 0 {
        F::one()
    } else {
        -F::one()
    }
}

#[inline]
fn choose<F: Real>(m: u64, i: usize, n: usize) -> F {
    if (i as u64) > m {
        return F::zero();
    }
    F::of(crate::arith::binomial_f64(m - i as u64, (n - i) as u64))
}

/// Builds the aggregate engine.
///
/// `pair_source` supplies the `S_{q,0}({0, h})` values (normally the
/// persisted table; a cache miss there surfaces as the table-coverage
/// error). Interior aggregates are computed from plain-series subset sums
/// through the parity decomposition, which requires odd `q`.
pub fn build_sum_engine<F: Real>(
    q: u32,
    a: u32,
    b: u32,
    h_max: u64,
    n_max: usize,
    eval: &SeriesEvaluator<F>,
    pair_source: &dyn SeriesProvider<F>,
) -> Result<SumEngine<F>> {
    if q < 3 || q % 2 == 0 {
        return Err(Error::invalid_parameter(format!(
            "the aggregate engine requires odd q >= 3 (parity decomposition), got {q}"
        )));
    }
    if n_max > 5 {
        return Err(Error::invalid_parameter(format!("n_max must be <= 5, got {n_max}")));
    }
    for (label, r) in [("a", a), ("b", b)] {
        if r % q == 0 || gcd(r as u64, q as u64) != 1 {
            return Err(Error::invalid_parameter(format!(
                "{label} = {r} is not a reduced residue modulo {q}"
            )));
        }
    }
    if eval.q() != q || pair_source.q() != q {
        return Err(Error::invalid_parameter("evaluator/provider modulus mismatch"));
    }
    let a = a % q;
    let b = b % q;
    let h0 = {
        let r = (b + q - a) % q;
        if r == 0 {
            q as u64
        } else {
            r as u64
        }
    };
    if h_max < h0 {
        return Err(Error::invalid_parameter(format!(
            "h_max = {h_max} is below the first class gap {h0}"
        )));
    }

    let qq = q as u64;
    let a_star = (q - b) as u64; // reflection maps the {h}-adjoined sums here
    let admissible = |t: u64, cls: u64| gcd((t + cls) % qq, qq) == 1;

    let xs: Vec<u64> = (1..h_max).filter(|&t| admissible(t, a as u64)).collect();
    let xe: Vec<u64> = xs.iter().copied().filter(|t| t % 2 == 0).collect();
    let xo: Vec<u64> = xs.iter().copied().filter(|t| t % 2 == 1).collect();
    let xe_star: Vec<u64> =
        (1..h_max).filter(|&t| admissible(t, a_star) && t % 2 == 0).collect();

    let cutoff = eval.min_cutoff().max(h_max);
    let imax = n_max.max(1);

    // four cumulative families, computed in parallel
    let ((rows_qe, rows_qo), (rows_q0e, rows_q0e_star)) = rayon::join(
        || {
            rayon::join(
                || plain_sums_by_max(eval, &xe, &[], imax, cutoff),
                || plain_sums_by_max(eval, &xo, &[], imax, cutoff),
            )
        },
        || {
            rayon::join(
                || plain_sums_by_max(eval, &xe, &[0], imax, cutoff),
                || plain_sums_by_max(eval, &xe_star, &[0], imax, cutoff),
            )
        },
    );
    let build = |positions: &Vec<u64>, rows: Result<Vec<Vec<F>>>| -> Result<CumFamily<F>> {
        if positions.is_empty() {
            return Ok(CumFamily::empty(imax));
        }
        Ok(CumFamily::new(positions.clone(), rows?, imax))
    };
    let mut fam_qe = build(&xe, rows_qe)?;
    let mut fam_qo = build(&xo, rows_qo)?;
    let mut fam_q0e = build(&xe, rows_q0e)?;
    let mut fam_qh = build(&xe_star, rows_q0e_star)?;

    // per-gap {0,h}-adjoined sums: only even gaps contribute, and the pair
    // value itself comes from the provider
    let class_hs: Vec<u64> = (h0..=h_max).step_by(q as usize).collect();
    let q0h_rows: Vec<(u64, F, Vec<F>)> = class_hs
        .par_iter()
        .map(|&h| -> Result<(u64, F, Vec<F>)> {
            let pair = TupleSet::new(vec![0, h])?;
            let pair_plain = pair_source.zeroed_value(&pair)? + F::one();
            let mut sums = vec![F::zero(); imax];
            if h % 2 == 0 && n_max >= 1 {
                let positions: Vec<u64> =
                    xe.iter().copied().filter(|&t| t < h).collect();
                if !positions.is_empty() && n_max + 2 <= TupleSet::MAX_SIZE {
                    let rows = plain_sums_by_max(eval, &positions, &[0, h], n_max, cutoff)?;
                    for row in &rows {
                        for i in 0..n_max {
                            sums[i] += row[i];
                        }
                    }
                }
            }
            Ok((h, pair_plain, sums))
        })
        .collect::<Result<Vec<_>>>()?;

    // prefix counts of admissible positions below each h
    let mut abcd = vec![vec![[F::zero(); 4]; n_max + 1]; h_max as usize + 1];
    let mut m_ptr = 0usize;

    for &(h, pair_plain, ref q0h) in &q0h_rows {
        while m_ptr < xs.len() && xs[m_ptr] < h {
            m_ptr += 1;
        }
        let m = m_ptr as u64;
        let qe = fam_qe.advance_to(h).to_vec();
        let qo = fam_qo.advance_to(h).to_vec();
        let q0e = fam_q0e.advance_to(h).to_vec();
        let qh_star = fam_qh.advance_to(h).to_vec();

        let q_i = |i: usize| -> F {
            match i {
                0 => F::one(),
                1 => F::of_u64(m),
                _ => qe[i - 1] + qo[i - 1],
            }
        };
        let q0_i = |i: usize| -> F {
            if i == 0 {
                F::one()
            } else {
                q0e[i - 1]
            }
        };
        let qh_i = |i: usize| -> F {
            if i == 0 {
                F::one()
            } else {
                qh_star[i - 1]
            }
        };
        let q0h_i = |i: usize| -> F {
            if i == 0 {
                pair_plain
            } else if h % 2 == 0 {
                q0h[i - 1]
            } else {
                F::zero()
            }
        };

        for n in 0..=n_max {
            let mut vals = [F::zero(); 4];
            for i in 0..=n {
                let ch = choose::<F>(m, i, n);
                if ch == F::zero() {
                    continue;
                }
                let s = sign_of::<F>(n - i);
                let qi = q_i(i);
                // A: interior only
                vals[0] += s * ch * qi;
                // B: adjoined {0}
                vals[1] += -s * ch * qi + s * ch * q0_i(i);
                // C: adjoined {h}
                vals[2] += -s * ch * qi + s * ch * qh_i(i);
                // D: adjoined {0, h}
                vals[3] += s * ch * qi - s * ch * (q0_i(i) + qh_i(i)) + s * ch * q0h_i(i);
            }
            abcd[h as usize][n] = vals;
        }
    }

    Ok(SumEngine { q, a, b, h_max, n_max, h0, abcd })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::{SeriesEvaluator, SeriesProvider};

    fn eval3() -> SeriesEvaluator<f64> {
        SeriesEvaluator::new(3, 1e-12, 64).unwrap()
    }

    #[test]
    fn trivial_subset_sums() {
        let eval = eval3();
        // only T = empty set, S_{q,0}(empty) = 1
        let a = subset_sum(SumKind::A, 5, 0, 3, Some(1), &eval).unwrap();
        assert_eq!(a.value, 1.0);
        // S_{q,0}({0}) = 0
        let b = subset_sum(SumKind::B, 5, 0, 3, Some(1), &eval).unwrap();
        assert_eq!(b.value, 0.0);
    }

    #[test]
    fn unfiltered_b_matches_a_difference() {
        // B_{6,1} = A_{7,2} - A_{6,2} on the unfiltered sums
        let eval = eval3();
        let b = subset_sum(SumKind::B, 6, 1, 3, None, &eval).unwrap().value;
        let a7 = subset_sum(SumKind::A, 7, 2, 3, None, &eval).unwrap().value;
        let a6 = subset_sum(SumKind::A, 6, 2, 3, None, &eval).unwrap().value;
        assert!((b - (a7 - a6)).abs() < 1e-10, "b = {b}, diff = {}", a7 - a6);
    }

    #[test]
    fn filtered_sums_break_the_identity() {
        // counterexample: q = 3, a = 2, h = 10, l = 2
        let eval = eval3();
        let b = subset_sum(SumKind::B, 9, 1, 3, Some(2), &eval).unwrap().value;
        let a10 = subset_sum(SumKind::A, 10, 2, 3, Some(2), &eval).unwrap().value;
        let a9 = subset_sum(SumKind::A, 9, 2, 3, Some(2), &eval).unwrap().value;
        assert!(
            (b - (a10 - a9)).abs() > 1.0,
            "filtered identity unexpectedly held: {b} vs {}",
            a10 - a9
        );
    }

    #[test]
    fn lemma4_small_cases() {
        let eval = eval3();
        for (h, ell) in [(6u64, 1u32), (10, 2), (8, 3), (12, 3)] {
            let disc = lemma4_check(h, ell, 3, &eval).unwrap();
            assert!(disc < 1e-9, "h={h} ell={ell}: {disc}");
        }
        let eval5 = SeriesEvaluator::<f64>::new(5, 1e-12, 64).unwrap();
        let disc = lemma4_check(12, 3, 5, &eval5).unwrap();
        assert!(disc < 1e-9, "q=5: {disc}");
    }

    #[test]
    fn budget_error() {
        let eval = SeriesEvaluator::<f64>::new(3, 1e-9, 600).unwrap();
        let err = subset_sum(SumKind::A, 500, 5, 3, Some(1), &eval).unwrap_err();
        assert!(matches!(err, Error::Budget(_)));
    }

    #[test]
    fn engine_matches_literal_enumeration() {
        for &(q, a, b) in &[(3u32, 1u32, 1u32), (3, 1, 2), (3, 2, 1), (5, 2, 3)] {
            let eval = SeriesEvaluator::<f64>::new(q, 1e-12, 64).unwrap();
            let h_max = 16;
            let n_max = 5;
            let engine = build_sum_engine(q, a, b, h_max, n_max, &eval, &eval).unwrap();
            for h in engine.class_gaps().collect::<Vec<_>>() {
                for n in 0..=n_max {
                    let got = engine.abcd(h, n).unwrap();
                    let expect = [
                        subset_sum(SumKind::A, h, n as u32, q, Some(a), &eval).unwrap().value,
                        subset_sum(SumKind::B, h, n as u32, q, Some(a), &eval).unwrap().value,
                        subset_sum(SumKind::C, h, n as u32, q, Some(a), &eval).unwrap().value,
                        subset_sum(SumKind::D, h, n as u32, q, Some(a), &eval).unwrap().value,
                    ];
                    for (g, e) in got.iter().zip(expect.iter()) {
                        assert!(
                            (g - e).abs() < 1e-8,
                            "q={q} a={a} b={b} h={h} n={n}: engine {got:?} vs {expect:?}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn engine_rejects_even_q() {
        let eval = SeriesEvaluator::<f64>::new(10, 1e-9, 64);
        // evaluator builds fine, but the engine needs odd q
        let eval = eval.unwrap();
        let err = build_sum_engine(10, 1, 1, 16, 2, &eval, &eval);
        assert!(err.is_err());
    }

    #[test]
    fn engine_deterministic_across_workers() {
        let run = |workers| {
            crate::run_with_workers(Some(workers), || {
                let eval = SeriesEvaluator::<f64>::new(3, 1e-12, 80).unwrap();
                let engine = build_sum_engine(3, 1, 1, 60, 5, &eval, &eval).unwrap();
                engine
                    .class_gaps()
                    .map(|h| engine.total(h, 5).unwrap().to_bits())
                    .collect::<Vec<_>>()
            })
            .unwrap()
        };
        assert_eq!(run(1), run(4));
    }
}
