//! Incremental subset sums of the plain singular series.
//!
//! For ascending candidate positions `X`, a fixed adjoined base `B`, and a
//! set-size limit, this computes `sum over S subset of X, |S| = i` of
//! `S_q(B u S)`, grouped by `max(S)`. Grouping by the maximum makes the same
//! pass serve every upper bound `h` at once (prefix sums in `h`).
//!
//! Values use one uniform prime cutoff with a tail correction, so each DFS
//! node updates a running product over only the primes whose residue coverage
//! changed. Sums are accumulated compensated, in `f64`, and converted to the
//! caller's scalar at the end.

use super::{SeriesEvaluator, TupleSet};
use crate::error::{Error, Result};
use crate::real::{KahanSum, Real};

/// Precomputed per-position residues and per-size normalization factors.
pub(crate) struct PlainSumContext {
    /// primes <= cutoff, excluding divisors of q
    primes: Vec<u64>,
    /// slot offset of each prime's residue counters
    offsets: Vec<usize>,
    /// residue of each position modulo each prime
    pos_res: Vec<Vec<u32>>,
    /// residue of each base element modulo each prime
    base_res: Vec<Vec<u32>>,
    /// (prod (1 - 1/p))^{-k} for k = 0..=7
    den_inv: [f64; 8],
    /// tail correction factor for k = 0..=7 at the uniform cutoff
    tails: [f64; 8],
    n_positions: usize,
    base_len: usize,
    cover_slots: usize,
}

impl PlainSumContext {
    pub(crate) fn new<F: Real>(
        eval: &SeriesEvaluator<F>,
        positions: &[u64],
        base: &[u64],
        cutoff_bound: u64,
    ) -> Result<PlainSumContext> {
        let max_elem = positions.iter().chain(base.iter()).copied().max().unwrap_or(0);
        if cutoff_bound < max_elem.max(eval.min_cutoff()) {
            return Err(Error::invalid_parameter(format!(
                "plain-sum cutoff {cutoff_bound} below required {}",
                max_elem.max(eval.min_cutoff())
            )));
        }
        let tail_ctx = eval.tail_context();
        let idx = tail_ctx
            .cutoff_index(cutoff_bound)
            .ok_or_else(|| Error::invalid_parameter("cutoff below smallest prime"))?;
        let primes: Vec<u64> = tail_ctx.primes[..=idx]
            .iter()
            .copied()
            .filter(|p| !eval.q_primes().contains(p))
            .collect();

        let mut offsets = Vec::with_capacity(primes.len());
        let mut slots = 0usize;
        for &p in &primes {
            offsets.push(slots);
            slots += p as usize;
        }
        let residue_rows = |xs: &[u64]| -> Vec<Vec<u32>> {
            xs.iter()
                .map(|&x| primes.iter().map(|&p| (x % p) as u32).collect())
                .collect()
        };

        let d: f64 = primes.iter().map(|&p| 1.0 - 1.0 / p as f64).product();
        let mut den_inv = [1.0f64; 8];
        let mut tails = [1.0f64; 8];
        for k in 1..8 {
            den_inv[k] = d.powi(-(k as i32));
            tails[k] = tail_ctx.tail_factor(k, idx).0;
        }

        Ok(PlainSumContext {
            pos_res: residue_rows(positions),
            base_res: residue_rows(base),
            primes,
            offsets,
            den_inv,
            tails,
            n_positions: positions.len(),
            base_len: base.len(),
            cover_slots: slots,
        })
    }
}

struct Dfs<'c> {
    ctx: &'c PlainSumContext,
    /// residue-coverage multiplicity per (prime, residue) slot
    cover: Vec<u16>,
    /// occupied residue classes per prime
    nu: Vec<u16>,
    /// running product of (1 - nu_p / p)
    num: f64,
    imax: usize,
    /// acc[pos][i - 1] accumulates sums with max(S) = positions[pos], |S| = i
    acc: Vec<Vec<KahanSum<f64>>>,
}

impl<'c> Dfs<'c> {
    #[inline]
    fn add(&mut self, res: &[u32]) -> f64 {
        let saved = self.num;
        for (i, &p) in self.ctx.primes.iter().enumerate() {
            let slot = self.ctx.offsets[i] + res[i] as usize;
            if self.cover[slot] == 0 {
                let nu_new = (self.nu[i] + 1) as f64;
                let pf = p as f64;
                self.num *= (pf - nu_new) / (pf - nu_new + 1.0);
                self.nu[i] += 1;
            }
            self.cover[slot] += 1;
        }
        saved
    }

    #[inline]
    fn remove(&mut self, res: &[u32], saved: f64) {
        for (i, _) in self.ctx.primes.iter().enumerate() {
            let slot = self.ctx.offsets[i] + res[i] as usize;
            self.cover[slot] -= 1;
            if self.cover[slot] == 0 {
                self.nu[i] -= 1;
            }
        }
        self.num = saved;
    }

    fn run(&mut self, start: usize, depth: usize) {
        for j in start..self.ctx.n_positions {
            let res = &self.ctx.pos_res[j];
            let saved = self.add(res);
            if self.num != 0.0 {
                let k_total = self.ctx.base_len + depth + 1;
                let value = if k_total == 1 {
                    1.0
                } else {
                    self.num * self.ctx.den_inv[k_total] * self.ctx.tails[k_total]
                };
                self.acc[j][depth].add(value);
                if depth + 1 < self.imax {
                    self.run(j + 1, depth + 1);
                }
            }
            self.remove(res, saved);
        }
    }
}

/// `out[pos][i-1]` = sum over subsets `S` of `positions` with
/// `max(S) = positions[pos]` and `|S| = i` of `S_q(base u S)`, for
/// `1 <= i <= imax`.
pub(crate) fn plain_sums_by_max<F: Real>(
    eval: &SeriesEvaluator<F>,
    positions: &[u64],
    base: &[u64],
    imax: usize,
    cutoff_bound: u64,
) -> Result<Vec<Vec<F>>> {
    if imax == 0 || imax + base.len() > TupleSet::MAX_SIZE {
        return Err(Error::invalid_parameter(format!(
            "subset size {imax} with base of {} exceeds the supported set size",
            base.len()
        )));
    }
    let ctx = PlainSumContext::new(eval, positions, base, cutoff_bound)?;
    let mut dfs = Dfs {
        cover: vec![0u16; ctx.cover_slots],
        nu: vec![0u16; ctx.primes.len()],
        num: 1.0,
        imax,
        acc: vec![vec![KahanSum::new(); imax]; ctx.n_positions],
        ctx: &ctx,
    };
    let base_res = ctx.base_res.clone();
    for res in &base_res {
        dfs.add(res);
    }
    dfs.run(0, 0);
    Ok(dfs
        .acc
        .iter()
        .map(|row| row.iter().map(|k| F::of(k.value())).collect())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::{SeriesEvaluator, TupleSet};

    /// Brute-force oracle via per-set evaluation.
    fn oracle_sum(eval: &SeriesEvaluator<f64>, positions: &[u64], base: &[u64], i: usize) -> f64 {
        fn combos(n: usize, k: usize) -> Vec<Vec<usize>> {
            if k == 0 {
                return vec![Vec::new()];
            }
            let mut out = Vec::new();
            for first in 0..n {
                for rest in combos(n.saturating_sub(first + 1), k - 1) {
                    let mut v = vec![first];
                    v.extend(rest.iter().map(|&r| r + first + 1));
                    out.push(v);
                }
            }
            out
        }
        let mut total = 0.0;
        for combo in combos(positions.len(), i) {
            let mut elems: Vec<u64> = base.to_vec();
            elems.extend(combo.iter().map(|&ix| positions[ix]));
            total += eval.plain(&TupleSet::new(elems).unwrap()).unwrap().value;
        }
        total
    }

    #[test]
    fn matches_per_set_evaluation() {
        let eval = SeriesEvaluator::<f64>::new(3, 1e-12, 200).unwrap();
        let positions: Vec<u64> = vec![1, 3, 4, 6, 7, 9, 10, 12, 13];
        for base in [vec![], vec![0], vec![0, 14]] {
            let rows = plain_sums_by_max(&eval, &positions, &base, 3, 200).unwrap();
            for i in 1..=3usize {
                let engine: f64 = rows.iter().map(|r| r[i - 1]).sum();
                let oracle = oracle_sum(&eval, &positions, &base, i);
                assert!(
                    (engine - oracle).abs() < 1e-9,
                    "base {base:?} i={i}: engine {engine} oracle {oracle}"
                );
            }
        }
    }

    #[test]
    fn by_max_grouping_gives_prefix_sums() {
        let eval = SeriesEvaluator::<f64>::new(5, 1e-12, 200).unwrap();
        let positions: Vec<u64> = vec![2, 4, 6, 8, 11, 13];
        let rows = plain_sums_by_max(&eval, &positions, &[], 2, 200).unwrap();
        let head: f64 = rows[..4].iter().map(|r| r[1]).sum();
        let oracle = oracle_sum(&eval, &positions[..4], &[], 2);
        assert!((head - oracle).abs() < 1e-10);
    }

    #[test]
    fn singleton_rows_are_exact_ones() {
        let eval = SeriesEvaluator::<f64>::new(3, 1e-12, 200).unwrap();
        let positions: Vec<u64> = vec![1, 4, 7, 10];
        let rows = plain_sums_by_max(&eval, &positions, &[], 2, 200).unwrap();
        for row in &rows {
            assert_eq!(row[0], 1.0);
        }
    }
}
