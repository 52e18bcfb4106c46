//! Hardy-Littlewood singular series and the inclusion-exclusion form.
//!
//! `S_q(H)` is the Euler product over primes `p` not dividing `q` of
//! `(1 - nu_p(H)/p) / (1 - 1/p)^{|H|}`, where `nu_p` counts the residue
//! classes occupied by `H` modulo `p`. The zeroed form is
//! `S_{q,0}(H) = sum over T subset of H of (-1)^{|H \ T|} S_q(T)`.

mod msavg;
mod plainsum;
mod table;
mod tail;

pub use msavg::{fit_ms_constant, ms_average, normal_moment, MsAverage};
pub(crate) use plainsum::plain_sums_by_max;
pub use table::{build_table, load_or_build_table, load_table, table_path, SeriesTable, TableMeta};
pub use tail::{prime_zeta, zeta, TailContext};

use crate::arith::{gcd, is_prime, prime_factors};
use crate::error::{Error, Result};
use crate::real::Real;
use crate::sieve::simple_sieve;

/// A finite set of non-negative integer offsets, strictly increasing.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TupleSet {
    elements: Vec<u64>,
}

impl TupleSet {
    /// Largest supported set size (subset enumeration is 2^7).
    pub const MAX_SIZE: usize = 7;

    pub fn new(mut elements: Vec<u64>) -> Result<Self> {
        elements.sort_unstable();
        if elements.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid_parameter("tuple set elements must be distinct"));
        }
        if elements.len() > Self::MAX_SIZE {
            return Err(Error::SetTooLarge { size: elements.len(), max: 7 });
        }
        Ok(TupleSet { elements })
    }

    pub fn empty() -> Self {
        TupleSet { elements: Vec::new() }
    }

    pub fn elements(&self) -> &[u64] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn diameter(&self) -> u64 {
        match (self.elements.first(), self.elements.last()) {
            (Some(&a), Some(&b)) => b - a,
            _ => 0,
        }
    }

    /// Translation-canonical form: shifted so the minimum is 0.
    pub fn canonical(&self) -> TupleSet {
        match self.elements.first() {
            None | Some(0) => self.clone(),
            Some(&m) => {
                TupleSet { elements: self.elements.iter().map(|&e| e - m).collect() }
            }
        }
    }

    /// Union with extra offsets (duplicates rejected).
    pub fn with_adjoined(&self, extra: &[u64]) -> Result<TupleSet> {
        let mut v = self.elements.clone();
        v.extend_from_slice(extra);
        TupleSet::new(v)
    }
}

/// Number of residue classes occupied by `H` modulo the prime `p`.
pub fn residue_count(h: &TupleSet, p: u64) -> Result<u32> {
    if !is_prime(p) {
        return Err(Error::invalid_parameter(format!("{p} is not prime")));
    }
    if h.is_empty() {
        return Err(Error::invalid_parameter("residue count requires a nonempty set"));
    }
    Ok(nu_p(h.elements(), p))
}

#[inline]
pub(crate) fn nu_p(elements: &[u64], p: u64) -> u32 {
    let mut residues = [0u64; TupleSet::MAX_SIZE];
    let mut count = 0usize;
    'outer: for &e in elements {
        let r = e % p;
        for &seen in &residues[..count] {
            if seen == r {
                continue 'outer;
            }
        }
        if count < TupleSet::MAX_SIZE {
            residues[count] = r;
        }
        count += 1;
        if count as u64 == p {
            break;
        }
    }
    count as u32
}

/// Plain vs inclusion-exclusion ("zeroed") series value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum SeriesKind {
    Plain,
    Zeroed,
}

/// A computed singular-series value with its truncation provenance.
#[derive(Clone, Debug, PartialEq)]
pub struct SeriesValue<F> {
    pub set: TupleSet,
    pub q: u32,
    pub kind: SeriesKind,
    pub value: F,
    /// Largest prime included in the truncated product.
    pub prime_cutoff: u64,
    /// Bound on the relative truncation error of `value`.
    pub tail_bound: F,
}

/// Read access to zeroed series values, either computed or table-backed.
pub trait SeriesProvider<F: Real>: Sync {
    fn q(&self) -> u32;
    fn zeroed_value(&self, set: &TupleSet) -> Result<F>;
}

/// Default relative truncation target.
pub const DEFAULT_CUTOFF_TARGET: f64 = 1e-9;

/// Reusable evaluator for one modulus; immutable once built, safe to share.
pub struct SeriesEvaluator<F> {
    q: u32,
    q_primes: Vec<u64>,
    cutoff_target: f64,
    tail: TailContext,
    min_cutoff: u64,
    _marker: std::marker::PhantomData<F>,
}

impl<F: Real> SeriesEvaluator<F> {
    /// `max_element` sizes the internal prime list; sets whose diameter
    /// exceeds it are still handled by regrowing, but pre-sizing avoids that.
    pub fn new(q: u32, cutoff_target: f64, max_element: u64) -> Result<Self> {
        if q == 0 {
            return Err(Error::invalid_parameter("modulus must be >= 1"));
        }
        if !(cutoff_target > 0.0) {
            return Err(Error::invalid_parameter("cutoff target must be positive"));
        }
        let min_cutoff = 100u64.max(q as u64);
        let capacity = (2 * min_cutoff.max(max_element)).max(1031);
        Ok(SeriesEvaluator {
            q,
            q_primes: prime_factors(q as u64),
            cutoff_target,
            tail: TailContext::new(simple_sieve(capacity)),
            min_cutoff,
            _marker: std::marker::PhantomData,
        })
    }

    pub fn q(&self) -> u32 {
        self.q
    }

    pub fn cutoff_target(&self) -> f64 {
        self.cutoff_target
    }

    pub(crate) fn tail_context(&self) -> &TailContext {
        &self.tail
    }

    pub(crate) fn q_primes(&self) -> &[u64] {
        &self.q_primes
    }

    pub(crate) fn min_cutoff(&self) -> u64 {
        self.min_cutoff
    }

    /// `S_q(H)`: the plain singular series.
    pub fn plain(&self, set: &TupleSet) -> Result<SeriesValue<F>> {
        let k = set.len();
        let elements = set.elements();
        if k <= 1 {
            // empty product, or identical numerator and denominator factors
            return Ok(SeriesValue {
                set: set.clone(),
                q: self.q,
                kind: SeriesKind::Plain,
                value: F::one(),
                prime_cutoff: self.min_cutoff,
                tail_bound: F::zero(),
            });
        }

        // a vanishing factor makes the product exactly zero
        for &p in &[2u64, 3, 5, 7] {
            if p as usize <= k && !self.q_primes.contains(&p) && nu_p(elements, p) as u64 == p {
                return Ok(SeriesValue {
                    set: set.clone(),
                    q: self.q,
                    kind: SeriesKind::Plain,
                    value: F::zero(),
                    prime_cutoff: p,
                    tail_bound: F::zero(),
                });
            }
        }

        let mut bound = self.min_cutoff.max(set.diameter()).max(k as u64);
        let (value, cutoff, tail_bound) = loop {
            let idx = match self.tail.cutoff_index(bound) {
                Some(i) => i,
                None => return Err(Error::invalid_parameter("cutoff below smallest prime")),
            };
            let (tail, tail_residual) = self.tail.tail_factor(k, idx);
            if tail_residual > self.cutoff_target {
                if self.tail.primes.get(idx + 1).is_none() {
                    return Err(Error::invalid_parameter(format!(
                        "cutoff target {:e} unreachable (residual {:e} at P = {})",
                        self.cutoff_target, tail_residual, self.tail.primes[idx]
                    )));
                }
                bound *= 2;
                continue;
            }
            let mut product = 1.0f64;
            for &p in &self.tail.primes[..=idx] {
                if self.q_primes.contains(&p) {
                    continue;
                }
                let pf = p as f64;
                let nu = nu_p(elements, p) as f64;
                product *= (1.0 - nu / pf) / (1.0 - 1.0 / pf).powi(k as i32);
            }
            break (product * tail, self.tail.primes[idx], tail_residual);
        };

        Ok(SeriesValue {
            set: set.clone(),
            q: self.q,
            kind: SeriesKind::Plain,
            value: F::of(value),
            prime_cutoff: cutoff,
            tail_bound: F::of(tail_bound),
        })
    }

    /// `S_{q,0}(H)`: the alternating sum of `S_q` over all subsets.
    ///
    /// The set is canonicalized (translated to min = 0) before evaluation,
    /// which makes translation invariance bit-exact.
    pub fn zeroed(&self, set: &TupleSet) -> Result<SeriesValue<F>> {
        let canon = set.canonical();
        let k = canon.len();
        if k > TupleSet::MAX_SIZE {
            return Err(Error::SetTooLarge { size: k, max: 7 });
        }
        let elements = canon.elements();
        let mut value = F::zero();
        let mut tail_bound = F::zero();
        let mut cutoff = self.min_cutoff;
        for mask in 0..(1u32 << k) {
            let subset: Vec<u64> = (0..k).filter(|&i| mask >> i & 1 == 1).map(|i| elements[i]).collect();
            let sign = if (k - subset.len()) % 2 == 0 { F::one() } else { -F::one() };
            let part = self.plain(&TupleSet { elements: subset })?;
            value += sign * part.value;
            tail_bound += part.tail_bound;
            cutoff = cutoff.max(part.prime_cutoff);
        }
        // exact identities: the empty set gives 1, singletons cancel to 0
        if k == 0 {
            value = F::one();
            tail_bound = F::zero();
        } else if k == 1 {
            value = F::zero();
            tail_bound = F::zero();
        }
        Ok(SeriesValue {
            set: set.clone(),
            q: self.q,
            kind: SeriesKind::Zeroed,
            value,
            prime_cutoff: cutoff,
            tail_bound,
        })
    }
}

impl<F: Real> SeriesProvider<F> for SeriesEvaluator<F> {
    fn q(&self) -> u32 {
        self.q
    }

    fn zeroed_value(&self, set: &TupleSet) -> Result<F> {
        self.zeroed(set).map(|v| v.value)
    }
}

/// One-shot `S_q(H)` at the given relative truncation target.
pub fn singular_series<F: Real>(set: &TupleSet, q: u32, cutoff_target: f64) -> Result<SeriesValue<F>> {
    SeriesEvaluator::new(q, cutoff_target, set.diameter().max(1))?.plain(set)
}

/// One-shot `S_{q,0}(H)` at the default truncation target.
pub fn zeroed_series<F: Real>(set: &TupleSet, q: u32) -> Result<SeriesValue<F>> {
    SeriesEvaluator::new(q, DEFAULT_CUTOFF_TARGET, set.diameter().max(1))?.zeroed(set)
}

/// Is `a` a reduced residue modulo `q`?
pub fn is_reduced_residue(a: u32, q: u32) -> bool {
    a >= 1 && a < q && gcd(a as u64, q as u64) == 1
}
