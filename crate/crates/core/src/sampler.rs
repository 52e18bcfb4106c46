//! Windowed pattern-frequency sampling at large heights, and li-weighted
//! stitching of a window grid into a global ratio estimate.

use crate::arith::gcd;
use crate::error::{Error, Result};
use crate::logint::log_integral;
use crate::patterns::{all_patterns, PatternKey};
use crate::real::{KahanSum, Real};
use crate::sieve::{stream_primes, SieveConfig};
use std::collections::{BTreeMap, VecDeque};
use std::ops::ControlFlow;

/// One sampling window: the first `prime_count` primes above `x_start`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SampleWindow {
    pub x_start: u64,
    pub prime_count: u64,
    pub q: u32,
    pub k: usize,
}

/// What divides the pattern tallies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum DenominatorMode {
    /// Window starts whose k primes are all coprime to q (frequencies sum
    /// to 1). For `x_start >= q` this equals [`DenominatorMode::Raw`].
    #[default]
    CoprimeOnly,
    /// All `prime_count - k + 1` window starts.
    Raw,
}

/// Sampled frequencies for one window.
#[derive(Clone, Debug, PartialEq)]
pub struct FrequencyRecord<F> {
    pub window: SampleWindow,
    pub mode: DenominatorMode,
    pub frequencies: BTreeMap<PatternKey, F>,
    /// Binomial-model precision 1 / sqrt(prime_count).
    pub sigma: F,
}

/// Cramer-model sampling precision: 1 / sqrt(C).
pub fn binomial_precision<F: Real>(c: u64) -> Result<F> {
    if c == 0 {
        return Err(Error::invalid_parameter("prime count must be >= 1"));
    }
    Ok(F::one() / F::of_u64(c).sqrt())
}

fn validate_window(w: &SampleWindow) -> Result<()> {
    if w.x_start < 2 {
        return Err(Error::invalid_parameter("window start must be >= 2"));
    }
    if w.q < 3 {
        return Err(Error::invalid_parameter("modulus must be >= 3"));
    }
    if !(1..=4).contains(&w.k) {
        return Err(Error::invalid_parameter("pattern length must be in [1, 4]"));
    }
    if w.prime_count < w.k as u64 {
        return Err(Error::invalid_parameter("window must contain at least k primes"));
    }
    Ok(())
}

/// Estimated sieve span needed for the first `c` primes above `x`.
fn span_estimate(x: u64, c: u64) -> u64 {
    let xf = (x.max(3) as f64).max(c as f64);
    let log = xf.ln() + xf.ln().ln().max(0.0);
    ((c as f64) * (log + 2.0) * 1.2) as u64 + 10_000
}

/// Samples pattern frequencies among the first `prime_count` primes strictly
/// greater than `x_start`. Window starts range over the first
/// `prime_count - k + 1` of those primes.
pub fn sample_window<F: Real>(
    w: &SampleWindow,
    mode: DenominatorMode,
) -> Result<FrequencyRecord<F>> {
    sample_window_cfg(&SieveConfig::default(), w, mode)
}

pub fn sample_window_cfg<F: Real>(
    cfg: &SieveConfig,
    w: &SampleWindow,
    mode: DenominatorMode,
) -> Result<FrequencyRecord<F>> {
    validate_window(w)?;
    let span = span_estimate(w.x_start, w.prime_count);
    if w.x_start.saturating_add(span) > cfg.max_hi {
        return Err(Error::budget(format!(
            "window needs a sieve span of about {span} above {}, beyond the capacity {}",
            w.x_start, cfg.max_hi
        )));
    }

    let q = w.q as u64;
    let coprime: Vec<bool> = (0..q).map(|r| gcd(r, q) == 1).collect();
    let starts = w.prime_count - w.k as u64 + 1;
    let mut window: VecDeque<u32> = VecDeque::with_capacity(w.k + 1);
    let mut tallies: BTreeMap<Vec<u32>, u64> = BTreeMap::new();
    let mut qualifying = 0u64;
    let mut processed = 0u64;

    stream_primes(cfg, w.x_start + 1, |seg| {
        for &p in seg {
            window.push_back((p % q) as u32);
            if window.len() == w.k {
                processed += 1;
                if window.iter().all(|&r| coprime[r as usize]) {
                    qualifying += 1;
                    let key: Vec<u32> = window.iter().copied().collect();
                    *tallies.entry(key).or_insert(0) += 1;
                }
                window.pop_front();
                if processed == starts {
                    return ControlFlow::Break(());
                }
            }
        }
        ControlFlow::Continue(())
    })?;
    if processed != starts {
        return Err(Error::budget("prime stream ended before the window filled"));
    }

    let denominator = match mode {
        DenominatorMode::CoprimeOnly => qualifying,
        DenominatorMode::Raw => starts,
    };
    if denominator == 0 {
        return Err(Error::EmptyInput("window contains no qualifying starts".into()));
    }
    let mut frequencies = BTreeMap::new();
    for key in all_patterns(w.q, w.k)? {
        let count = tallies.get(&key.residues).copied().unwrap_or(0);
        frequencies.insert(key, F::of_u64(count) / F::of_u64(denominator));
    }
    Ok(FrequencyRecord {
        window: *w,
        mode,
        frequencies,
        sigma: binomial_precision(w.prime_count)?,
    })
}

/// Denominator convention for [`stitch`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum StitchDenominator {
    /// li(9 * 10^b1), as the Riemann-sum formula prints it.
    #[default]
    AsPrinted,
    /// li(10^{b1+1}), matching the telescoped numerator coverage.
    Telescoped,
}

/// A stitched global ratio estimate per pattern.
#[derive(Clone, Debug)]
pub struct StitchedEstimate<F> {
    pub b1: u32,
    pub q: u32,
    pub k: usize,
    pub denominator: StitchDenominator,
    pub values: BTreeMap<PatternKey, F>,
}

/// Combines a complete window grid (X = alpha 10^beta, alpha 1..=9,
/// beta 1..=b1) into one li-weighted ratio estimate per pattern:
/// `sum f(alpha 10^beta) [li((alpha+1) 10^beta) - li(alpha 10^beta)]`
/// over the chosen denominator.
pub fn stitch<F: Real>(
    records: &[FrequencyRecord<F>],
    b1: u32,
    denominator: StitchDenominator,
) -> Result<StitchedEstimate<F>> {
    if b1 < 1 || b1 > 17 {
        return Err(Error::invalid_parameter("b1 must be in [1, 17]"));
    }
    if records.is_empty() {
        return Err(Error::EmptyInput("no window records".into()));
    }
    let q = records[0].window.q;
    let k = records[0].window.k;
    if records.iter().any(|r| r.window.q != q || r.window.k != k) {
        return Err(Error::invalid_parameter("window grid mixes moduli or pattern lengths"));
    }

    let mut by_start: BTreeMap<u64, &FrequencyRecord<F>> = BTreeMap::new();
    for r in records {
        by_start.insert(r.window.x_start, r);
    }
    let mut gaps = Vec::new();
    for beta in 1..=b1 {
        for alpha in 1..=9u32 {
            let x = alpha as u64 * 10u64.pow(beta);
            if !by_start.contains_key(&x) {
                gaps.push((alpha, beta));
            }
        }
    }
    if !gaps.is_empty() {
        return Err(Error::MissingWindows { gaps });
    }

    let li_at = |v: u64| -> Result<F> { Ok(log_integral(F::of_u64(v))?.value) };
    let denom_value = match denominator {
        StitchDenominator::AsPrinted => li_at(9 * 10u64.pow(b1))?,
        StitchDenominator::Telescoped => li_at(10u64.pow(b1 + 1))?,
    };

    let mut values: BTreeMap<PatternKey, KahanSum<F>> = BTreeMap::new();
    for key in all_patterns(q, k)? {
        values.insert(key, KahanSum::new());
    }
    for beta in 1..=b1 {
        for alpha in 1..=9u64 {
            let x = alpha * 10u64.pow(beta);
            let weight = li_at((alpha + 1) * 10u64.pow(beta))? - li_at(x)?;
            let record = by_start[&x];
            for (key, acc) in values.iter_mut() {
                let f = record.frequencies.get(key).copied().unwrap_or_else(F::zero);
                acc.add(f * weight);
            }
        }
    }
    Ok(StitchedEstimate {
        b1,
        q,
        k,
        denominator,
        values: values.into_iter().map(|(k, v)| (k, v.value() / denom_value)).collect(),
    })
}

/// Exact full-coverage grid: every window at `alpha 10^beta` counts all
/// primes up to the next grid point, in one streaming pass.
pub fn exact_coverage_grid<F: Real>(
    q: u32,
    k: usize,
    b1: u32,
    mode: DenominatorMode,
) -> Result<Vec<FrequencyRecord<F>>> {
    if b1 < 1 || b1 > 8 {
        return Err(Error::invalid_parameter("exact coverage supported for b1 in [1, 8]"));
    }
    let mut boundaries: Vec<u64> = Vec::new();
    for beta in 1..=b1 {
        for alpha in 1..=9u64 {
            boundaries.push(alpha * 10u64.pow(beta));
        }
    }
    boundaries.push(10u64.pow(b1 + 1));

    let qq = q as u64;
    let coprime: Vec<bool> = (0..qq).map(|r| gcd(r, qq) == 1).collect();
    let n_windows = boundaries.len() - 1;
    let mut tallies: Vec<BTreeMap<Vec<u32>, u64>> = vec![BTreeMap::new(); n_windows];
    let mut qualifying = vec![0u64; n_windows];
    let mut prime_counts = vec![0u64; n_windows];
    let mut window: VecDeque<(u64, u32)> = VecDeque::with_capacity(k + 1);
    let last = *boundaries.last().unwrap();

    let locate = |p: u64, hint: &mut usize| -> Option<usize> {
        if p <= boundaries[0] || p > last {
            return None;
        }
        while boundaries[*hint + 1] < p {
            *hint += 1;
        }
        Some(*hint)
    };
    let mut count_hint = 0usize;
    let mut start_hint = 0usize;

    stream_primes(&SieveConfig::default(), 2, |seg| {
        for &p in seg {
            if p <= last {
                if let Some(w) = locate(p, &mut count_hint) {
                    prime_counts[w] += 1;
                }
            }
            window.push_back((p, (p % qq) as u32));
            if window.len() == k {
                let front = window.front().unwrap().0;
                if front > last {
                    return ControlFlow::Break(());
                }
                if let Some(w) = locate(front, &mut start_hint) {
                    if window.iter().all(|&(_, r)| coprime[r as usize]) {
                        qualifying[w] += 1;
                        let key: Vec<u32> = window.iter().map(|&(_, r)| r).collect();
                        *tallies[w].entry(key).or_insert(0) += 1;
                    }
                }
                window.pop_front();
            }
        }
        ControlFlow::Continue(())
    })?;

    let keys = all_patterns(q, k)?;
    let mut out = Vec::with_capacity(n_windows);
    for w in 0..n_windows {
        let c = prime_counts[w];
        let starts = c.saturating_sub(k as u64 - 1).max(1);
        let denominator = match mode {
            DenominatorMode::CoprimeOnly => qualifying[w].max(1),
            DenominatorMode::Raw => starts,
        };
        let mut frequencies = BTreeMap::new();
        for key in &keys {
            let count = tallies[w].get(&key.residues).copied().unwrap_or(0);
            frequencies.insert(key.clone(), F::of_u64(count) / F::of_u64(denominator));
        }
        out.push(FrequencyRecord {
            window: SampleWindow {
                x_start: boundaries[w],
                prime_count: c.max(1),
                q,
                k,
            },
            mode,
            frequencies,
            sigma: binomial_precision(c.max(1))?,
        });
    }
    Ok(out)
}

/// Writes window records as `X,C,q,k,pattern,frequency,sigma`.
pub fn write_window_csv<F: Real, W: std::io::Write>(
    records: &[FrequencyRecord<F>],
    mut w: W,
) -> std::io::Result<()> {
    writeln!(w, "X,C,q,k,pattern,frequency,sigma")?;
    for r in records {
        for (key, f) in &r.frequencies {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                r.window.x_start,
                r.window.prime_count,
                r.window.q,
                r.window.k,
                key.label(),
                crate::format_scalar(*f),
                crate::format_scalar(r.sigma),
            )?;
        }
    }
    Ok(())
}

/// Parses window records written by [`write_window_csv`].
pub fn parse_window_csv<F: Real>(text: &str) -> Result<Vec<FrequencyRecord<F>>> {
    let mut out: Vec<FrequencyRecord<F>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if lineno == 0 {
            if line.trim() != "X,C,q,k,pattern,frequency,sigma" {
                return Err(Error::invalid_parameter(format!("unexpected window header: {line}")));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 7 {
            return Err(Error::invalid_parameter(format!("bad window row: {line}")));
        }
        let bad = |what: &str| Error::invalid_parameter(format!("bad {what} in row: {line}"));
        let x: u64 = parts[0].parse().map_err(|_| bad("X"))?;
        let c: u64 = parts[1].parse().map_err(|_| bad("C"))?;
        let q: u32 = parts[2].parse().map_err(|_| bad("q"))?;
        let k: usize = parts[3].parse().map_err(|_| bad("k"))?;
        let key = PatternKey::parse_label(q, parts[4])?;
        let f: f64 = parts[5].parse().map_err(|_| bad("frequency"))?;
        let window = SampleWindow { x_start: x, prime_count: c, q, k };
        let need_new = match out.last() {
            Some(r) => r.window != window,
            None => true,
        };
        if need_new {
            out.push(FrequencyRecord {
                window,
                mode: DenominatorMode::CoprimeOnly,
                frequencies: BTreeMap::new(),
                sigma: binomial_precision(c.max(1))?,
            });
        }
        out.last_mut().unwrap().frequencies.insert(key, F::of(f));
    }
    Ok(out)
}
