//! Truncated density layers d_n and the conjectural count integral.

use super::sums::{build_sum_engine, SumEngine};
use super::{epsilon_q, gap_cutoff, ConjectureParams};
use crate::arith::totient;
use crate::error::{Error, Result};
use crate::logint::log_integral;
use crate::quad::adaptive_simpson;
use crate::real::{KahanSum, Real};
use crate::series::SeriesTable;

/// Contribution of each boundary set A to one d_n layer.
#[derive(Clone, Copy, Debug)]
pub struct DnParts<F> {
    /// A = {} (interior sums only)
    pub empty_boundary: F,
    /// A = {0}
    pub zero_adjoined: F,
    /// A = {h}
    pub gap_adjoined: F,
    /// A = {0, h}
    pub both_adjoined: F,
}

impl<F: Real> DnParts<F> {
    pub fn total(&self) -> F {
        self.empty_boundary + self.zero_adjoined + self.gap_adjoined + self.both_adjoined
    }
}

/// Evaluator bound to one (q, a, b) and a gap range; reusable across y.
#[derive(Debug)]
pub struct ConjectureEvaluator<F: Real> {
    pub params: ConjectureParams<F>,
    engine: SumEngine<F>,
    epsilon: F,
    ratio: F,
    phi_over_q: F,
}

impl<F: Real> ConjectureEvaluator<F> {
    /// Builds the engine for gaps up to the cutoff at `y_max`.
    ///
    /// The table supplies the pair values `S_{q,0}({0,h})`; its declared
    /// element range must cover the largest needed gap, otherwise this is a
    /// cache miss naming that pair.
    pub fn new(
        params: ConjectureParams<F>,
        table: &SeriesTable<F>,
        y_max: f64,
    ) -> Result<ConjectureEvaluator<F>> {
        if table.q != params.q {
            return Err(Error::invalid_parameter(format!(
                "table is for q = {}, params use q = {}",
                table.q, params.q
            )));
        }
        let h_needed = gap_cutoff(params.c, y_max).max(params.q as u64);
        if table.max_elem < h_needed || table.max_size < 2 {
            return Err(Error::CacheMiss { q: params.q, set: vec![0, h_needed] });
        }
        let eval = crate::series::SeriesEvaluator::<F>::new(
            params.q,
            table.meta.cutoff_target.min(crate::series::DEFAULT_CUTOFF_TARGET),
            h_needed,
        )?;
        let engine =
            build_sum_engine(params.q, params.a, params.b, h_needed, params.n_max, &eval, table)?;
        let phi = totient(params.q as u64);
        let epsilon = match params.epsilon_override {
            Some(e) => e,
            None => epsilon_q::<F>(params.q, params.a, params.b)?.value,
        };
        Ok(ConjectureEvaluator {
            params,
            engine,
            epsilon,
            ratio: F::of_u64(params.q as u64) / F::of_u64(phi),
            phi_over_q: F::of_u64(phi) / F::of_u64(params.q as u64),
        })
    }

    pub fn h_max(&self) -> u64 {
        self.engine.h_max
    }

    /// Smallest y the integrand is evaluated from: exp(2 q / phi(q)) + 1.
    pub fn y_lower(&self) -> F {
        (F::of(2.0) * self.ratio).exp() + F::one()
    }

    #[inline]
    fn weights(&self, y: F) -> (F, F, F) {
        let log_y = y.ln();
        let alpha = F::one() - self.ratio / log_y;
        let z = self.ratio / (alpha * log_y);
        let g = alpha.powf(self.phi_over_q);
        (alpha, z, g)
    }

    fn cutoff_checked(&self, y: F) -> Result<u64> {
        let cutoff = gap_cutoff(self.params.c, y.to_f64().unwrap_or(f64::MAX));
        if cutoff > self.engine.h_max {
            return Err(Error::CacheMiss { q: self.params.q, set: vec![0, cutoff] });
        }
        Ok(cutoff)
    }

    /// One truncation layer with its per-boundary breakdown.
    pub fn d_n_parts(&self, y: F, n: usize) -> Result<DnParts<F>> {
        if n > self.params.n_max {
            return Err(Error::invalid_parameter(format!(
                "layer {n} exceeds the engine depth {}",
                self.params.n_max
            )));
        }
        let (_, z, g) = self.weights(y);
        self.d_n_parts_with_z(y, n, z, g)
    }

    /// Layer value with an explicit interior weight (test hook for z = 0).
    pub fn d_n_parts_with_z(&self, y: F, n: usize, z: F, g: F) -> Result<DnParts<F>> {
        let cutoff = self.cutoff_checked(y)?;
        let mut acc = [KahanSum::<F>::new(), KahanSum::new(), KahanSum::new(), KahanSum::new()];
        for h in self.engine.class_gaps() {
            if h > cutoff {
                break;
            }
            let gh = g.powi(h as i32);
            if let Some(parts) = self.engine.abcd(h, n) {
                for (slot, part) in acc.iter_mut().zip(parts.iter()) {
                    slot.add(gh * *part);
                }
            }
        }
        let zn = (-z).powi(n as i32);
        Ok(DnParts {
            empty_boundary: zn * acc[0].value(),
            zero_adjoined: zn * acc[1].value(),
            gap_adjoined: zn * acc[2].value(),
            both_adjoined: zn * acc[3].value(),
        })
    }

    /// d_n(a, b; y).
    pub fn d_n(&self, y: F, n: usize) -> Result<F> {
        Ok(self.d_n_parts(y, n)?.total())
    }

    /// Sum of the layers up to n_max.
    pub fn d_sum(&self, y: F) -> Result<F> {
        let cutoff = self.cutoff_checked(y)?;
        let (_, z, g) = self.weights(y);
        Ok(self.d_sum_inner(cutoff, z, g))
    }

    fn d_sum_inner(&self, cutoff: u64, z: F, g: F) -> F {
        let mut acc = KahanSum::<F>::new();
        let mut z_pows = [F::one(); 6];
        for n in 1..=self.params.n_max {
            z_pows[n] = z_pows[n - 1] * (-z);
        }
        for h in self.engine.class_gaps() {
            if h > cutoff {
                break;
            }
            let gh = g.powi(h as i32);
            let mut layer = F::zero();
            for n in 0..=self.params.n_max {
                if let Some(parts) = self.engine.abcd(h, n) {
                    layer += z_pows[n] * (parts[0] + parts[1] + parts[2] + parts[3]);
                }
            }
            acc.add(gh * layer);
        }
        acc.value()
    }

    /// Closed geometric form of the A = {}, n = 0 component:
    /// g^{h0} (1 - g^{qT}) / (1 - g^q) over the T kept gaps.
    pub fn d0_geometric(&self, y: F) -> Result<F> {
        let cutoff = self.cutoff_checked(y)?;
        let (_, _, g) = self.weights(y);
        let h0 = self.engine.h0;
        if cutoff < h0 {
            return Ok(F::zero());
        }
        let terms = (cutoff - h0) / self.params.q as u64 + 1;
        let gq = g.powi(self.params.q as i32);
        Ok(g.powi(h0 as i32) * (F::one() - gq.powi(terms as i32)) / (F::one() - gq))
    }

    /// The conjectural count: (1/q) integral from y0 to x of
    /// alpha^eps z^2 D(y) dy, in log-substituted adaptive Simpson panels.
    pub fn predict(&self, x: F) -> Result<Prediction<F>> {
        let x_f = x.to_f64().unwrap_or(0.0);
        if x_f < 100.0 {
            return Err(Error::domain(format!("predict requires x >= 100, got {x}")));
        }
        self.cutoff_checked(x)?;
        let y0 = self.y_lower();
        if x <= y0 {
            return Err(Error::domain(format!("x = {x} is below the lower limit {y0}")));
        }
        let inv_q = F::one() / F::of_u64(self.params.q as u64);
        let eps = self.epsilon;
        let integrand = |u: F| -> F {
            let y = u.exp();
            let (alpha, z, g) = self.weights(y);
            let cutoff = gap_cutoff(self.params.c, y.to_f64().unwrap_or(f64::MAX))
                .min(self.engine.h_max);
            let d = self.d_sum_inner(cutoff, z, g);
            // substituted measure: dy = y du
            inv_q * alpha.powf(eps) * z * z * d * y
        };
        let quad = adaptive_simpson(
            integrand,
            y0.ln(),
            x.ln(),
            self.params.quadrature.rel_tol,
            self.params.quadrature.max_depth,
        )?;
        let rel_achieved = (quad.error_estimate / quad.value.abs().max(F::min_positive_value()))
            .to_f64()
            .unwrap_or(f64::INFINITY);
        if rel_achieved > 50.0 * self.params.quadrature.rel_tol.to_f64().unwrap_or(1e-6) {
            return Err(Error::NonConvergence { achieved: rel_achieved });
        }
        // the [2, y0] head is dropped; fewer than li(y0) + 2 primes live there
        let discarded = log_integral(y0.max(F::of(2.0)))?.value + F::of(2.0);
        Ok(Prediction {
            x,
            value: quad.value,
            error_estimate: quad.error_estimate,
            y0,
            discarded_head_bound: discarded,
        })
    }
}

/// Result of [`predict`].
#[derive(Clone, Copy, Debug)]
pub struct Prediction<F> {
    pub x: F,
    pub value: F,
    pub error_estimate: F,
    /// Lower integration limit actually used.
    pub y0: F,
    /// Bound on the dropped [2, y0] contribution.
    pub discarded_head_bound: F,
}

/// One-shot d_n (builds the engine for this y only).
pub fn d_n<F: Real>(
    params: &ConjectureParams<F>,
    y: F,
    n: usize,
    table: &SeriesTable<F>,
) -> Result<F> {
    ConjectureEvaluator::new(*params, table, y.to_f64().unwrap_or(0.0))?.d_n(y, n)
}

/// One-shot per-boundary breakdown of d_n.
pub fn d_n_parts<F: Real>(
    params: &ConjectureParams<F>,
    y: F,
    n: usize,
    table: &SeriesTable<F>,
) -> Result<DnParts<F>> {
    ConjectureEvaluator::new(*params, table, y.to_f64().unwrap_or(0.0))?.d_n_parts(y, n)
}

/// One-shot conjectural count at x.
pub fn predict<F: Real>(
    params: &ConjectureParams<F>,
    x: F,
    table: &SeriesTable<F>,
) -> Result<Prediction<F>> {
    ConjectureEvaluator::new(*params, table, x.to_f64().unwrap_or(0.0))?.predict(x)
}

/// The simplified-asymptotic correction term log(2 pi log x / 3) / (2 log x).
pub fn eq19_correction<F: Real>(x: F) -> F {
    let log_x = x.ln();
    (F::of(2.0) * F::PI() * log_x / F::of(3.0)).ln() / (F::of(2.0) * log_x)
}

/// Simplified asymptotic for pair counts modulo 3:
/// li(x)/4 * (1 -+ correction), minus for a = b, plus for a != b.
pub fn simplified_prediction<F: Real>(x: F, same_residue: bool) -> Result<F> {
    if !(x >= F::of(10.0)) {
        return Err(Error::domain(format!("simplified asymptotic requires x >= 10, got {x}")));
    }
    let li = log_integral(x)?.value;
    let corr = eq19_correction(x);
    let sign = if same_residue { -F::one() } else { F::one() };
    Ok(li / F::of(4.0) * (F::one() + sign * corr))
}
