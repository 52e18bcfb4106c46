//! Residuals against a model series and the closed-form lower-order-term fit.

use crate::error::{Error, Result};
use crate::logint::log_integral;
use crate::real::Real;
use std::io::Write;

/// Whether a series carries raw counts or ratios (counts divided by li).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SeriesUnit {
    Count,
    Ratio,
}

/// An observed series over an ascending x-grid.
#[derive(Clone, Debug)]
pub struct ObservedSeries<F> {
    pub unit: SeriesUnit,
    /// (x, value), x strictly increasing
    pub rows: Vec<(F, F)>,
}

impl<F: Real> ObservedSeries<F> {
    pub fn new(unit: SeriesUnit, rows: Vec<(F, F)>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyInput("observed series has no rows".into()));
        }
        if rows.windows(2).any(|w| !(w[0].0 < w[1].0)) {
            return Err(Error::invalid_parameter("x values must be strictly increasing"));
        }
        Ok(ObservedSeries { unit, rows })
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ResidualRow<F> {
    pub x: F,
    pub observed: F,
    pub model: F,
    pub residual: F,
}

#[derive(Clone, Debug)]
pub struct ResidualSeries<F> {
    pub unit: SeriesUnit,
    pub rows: Vec<ResidualRow<F>>,
}

/// Rowwise observed minus model; units must agree and the x-grids must match.
pub fn residuals_against<F: Real>(
    observed: &ObservedSeries<F>,
    model: &ObservedSeries<F>,
) -> Result<ResidualSeries<F>> {
    if observed.unit != model.unit {
        return Err(Error::UnitMismatch(format!(
            "observed series is {:?}, model series is {:?}",
            observed.unit, model.unit
        )));
    }
    if observed.rows.len() != model.rows.len()
        || observed
            .rows
            .iter()
            .zip(&model.rows)
            .any(|(o, m)| o.0 != m.0)
    {
        return Err(Error::invalid_parameter("observed and model x-grids differ"));
    }
    let rows = observed
        .rows
        .iter()
        .zip(&model.rows)
        .map(|(&(x, obs), &(_, mod_v))| ResidualRow {
            x,
            observed: obs,
            model: mod_v,
            residual: obs - mod_v,
        })
        .collect();
    Ok(ResidualSeries { unit: observed.unit, rows })
}

/// Residuals of a count or ratio series against the simplified pair
/// asymptotic for modulus 3. Count inputs are converted to ratios (divided
/// by li) when `as_ratio` is set; the model is generated in matching units.
pub fn residuals_eq19<F: Real>(
    observed: &ObservedSeries<F>,
    same_residue: bool,
    as_ratio: bool,
) -> Result<ResidualSeries<F>> {
    let quarter = F::of(0.25);
    let mut obs_rows = Vec::with_capacity(observed.rows.len());
    let mut model_rows = Vec::with_capacity(observed.rows.len());
    let unit = if as_ratio { SeriesUnit::Ratio } else { observed.unit };
    for &(x, value) in &observed.rows {
        let li = log_integral(x)?.value;
        let corr = crate::conjecture::eq19_correction(x);
        let sign = if same_residue { -F::one() } else { F::one() };
        let model_ratio = quarter * (F::one() + sign * corr);
        let (obs_v, model_v) = match (observed.unit, as_ratio) {
            (SeriesUnit::Count, true) => (value / li, model_ratio),
            (SeriesUnit::Count, false) => (value, model_ratio * li),
            (SeriesUnit::Ratio, _) => (value, model_ratio),
        };
        obs_rows.push((x, obs_v));
        model_rows.push((x, model_v));
    }
    residuals_against(
        &ObservedSeries { unit, rows: obs_rows },
        &ObservedSeries { unit, rows: model_rows },
    )
}

/// Result of the one-parameter least-squares fit.
#[derive(Clone, Debug)]
pub struct FitResult<F> {
    pub coefficient: F,
    pub basis: &'static str,
    pub rms_before: F,
    pub rms_after: F,
}

pub const FIT_BASIS: &str = "((loglog x)^2/(log x)^2)";

/// Basis scaling: dimensionless for ratio-space fits, times li(x) for
/// count-space fits.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum BasisScale {
    #[default]
    Dimensionless,
    TimesLi,
}

/// Closed-form least squares of `residual ~ c * (loglog x)^2 / (log x)^2`.
pub fn fit_lower_order<F: Real>(r: &ResidualSeries<F>) -> Result<FitResult<F>> {
    if r.unit != SeriesUnit::Ratio {
        return Err(Error::UnitMismatch(
            "lower-order fit expects ratio-mode residuals (use the count-basis variant otherwise)"
                .into(),
        ));
    }
    fit_lower_order_scaled(r, BasisScale::Dimensionless)
}

pub fn fit_lower_order_scaled<F: Real>(
    r: &ResidualSeries<F>,
    scale: BasisScale,
) -> Result<FitResult<F>> {
    if r.rows.len() < 10 {
        return Err(Error::invalid_parameter(format!(
            "fit requires at least 10 rows, got {}",
            r.rows.len()
        )));
    }
    let mut distinct = 1usize;
    for w in r.rows.windows(2) {
        if w[0].x != w[1].x {
            distinct += 1;
        }
    }
    if distinct < 2 {
        return Err(Error::SingularFit("all x values are equal".into()));
    }
    let mut num = F::zero();
    let mut den = F::zero();
    let mut sse_before = F::zero();
    let basis = |x: F| -> Result<F> {
        let log_x = x.ln();
        let b = log_x.ln() * log_x.ln() / (log_x * log_x);
        Ok(match scale {
            BasisScale::Dimensionless => b,
            BasisScale::TimesLi => b * log_integral(x)?.value,
        })
    };
    for row in &r.rows {
        let phi = basis(row.x)?;
        num += phi * row.residual;
        den += phi * phi;
        sse_before += row.residual * row.residual;
    }
    if !(den > F::zero()) {
        return Err(Error::SingularFit("degenerate basis".into()));
    }
    let coefficient = num / den;
    let mut sse_after = F::zero();
    for row in &r.rows {
        let e = row.residual - coefficient * basis(row.x)?;
        sse_after += e * e;
    }
    let n = F::of_usize(r.rows.len());
    Ok(FitResult {
        coefficient,
        basis: FIT_BASIS,
        rms_before: (sse_before / n).sqrt(),
        rms_after: (sse_after / n).sqrt(),
    })
}

/// Subtracts the fitted term, leaving residuals-after-fit.
pub fn apply_fit<F: Real>(r: &ResidualSeries<F>, fit: &FitResult<F>) -> Result<ResidualSeries<F>> {
    let rows = r
        .rows
        .iter()
        .map(|row| {
            let log_x = row.x.ln();
            let b = log_x.ln() * log_x.ln() / (log_x * log_x);
            ResidualRow {
                x: row.x,
                observed: row.observed,
                model: row.model + fit.coefficient * b,
                residual: row.residual - fit.coefficient * b,
            }
        })
        .collect();
    Ok(ResidualSeries { unit: r.unit, rows })
}

/// Kind of plot-data file to emit.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlotKind {
    Proportion,
    Residual,
    ResidualAfterFit,
}

/// Two-column `x,value` CSV for any plotting tool.
pub fn write_xy_csv<F: Real, W: Write>(rows: &[(F, F)], mut w: W) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::EmptyInput("no rows to plot".into()));
    }
    let io_err = |e: std::io::Error| Error::io("<writer>", e);
    writeln!(w, "x,value").map_err(io_err)?;
    for &(x, v) in rows {
        writeln!(w, "{},{}", crate::format_scalar(x), crate::format_scalar(v)).map_err(io_err)?;
    }
    Ok(())
}

/// Residual CSV: `x,observed,model,residual`.
pub fn write_residuals_csv<F: Real, W: Write>(r: &ResidualSeries<F>, mut w: W) -> Result<()> {
    let io_err = |e: std::io::Error| Error::io("<writer>", e);
    writeln!(w, "x,observed,model,residual").map_err(io_err)?;
    for row in &r.rows {
        writeln!(
            w,
            "{},{},{},{}",
            crate::format_scalar(row.x),
            crate::format_scalar(row.observed),
            crate::format_scalar(row.model),
            crate::format_scalar(row.residual)
        )
        .map_err(io_err)?;
    }
    Ok(())
}

/// Parses the residual CSV back.
pub fn parse_residuals_csv<F: Real>(text: &str, unit: SeriesUnit) -> Result<ResidualSeries<F>> {
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if lineno == 0 {
            if line.trim() != "x,observed,model,residual" {
                return Err(Error::invalid_parameter(format!(
                    "unexpected residuals header: {line}"
                )));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 4 {
            return Err(Error::invalid_parameter(format!("bad residual row: {line}")));
        }
        let mut nums = [0f64; 4];
        for (slot, part) in nums.iter_mut().zip(&parts) {
            *slot = part
                .parse()
                .map_err(|_| Error::invalid_parameter(format!("bad number in row: {line}")))?;
        }
        rows.push(ResidualRow {
            x: F::of(nums[0]),
            observed: F::of(nums[1]),
            model: F::of(nums[2]),
            residual: F::of(nums[3]),
        });
    }
    if rows.is_empty() {
        return Err(Error::EmptyInput("residual file has no rows".into()));
    }
    Ok(ResidualSeries { unit, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn grid() -> Vec<f64> {
        (0..16).map(|i| 1e4 * 10f64.powf(i as f64 * 0.25)).collect()
    }

    fn ratio_series(f: impl Fn(f64) -> f64) -> ResidualSeries<f64> {
        let rows = grid()
            .into_iter()
            .map(|x| ResidualRow { x, observed: f(x), model: 0.0, residual: f(x) })
            .collect();
        ResidualSeries { unit: SeriesUnit::Ratio, rows }
    }

    #[test]
    fn identical_series_give_zero_residuals() {
        let obs = ObservedSeries::new(
            SeriesUnit::Ratio,
            grid().into_iter().map(|x| (x, 0.25)).collect(),
        )
        .unwrap();
        let r = residuals_against(&obs, &obs.clone()).unwrap();
        assert!(r.rows.iter().all(|row| row.residual == 0.0));
    }

    #[test]
    fn synthetic_injection_recovered() {
        // observed = model + 7 / log x  =>  residual * log x = 7
        let model = ObservedSeries::new(
            SeriesUnit::Ratio,
            grid().into_iter().map(|x| (x, 0.25)).collect(),
        )
        .unwrap();
        let observed = ObservedSeries::new(
            SeriesUnit::Ratio,
            grid().into_iter().map(|x| (x, 0.25 + 7.0 / x.ln())).collect(),
        )
        .unwrap();
        let r = residuals_against(&observed, &model).unwrap();
        for row in &r.rows {
            assert!((row.residual * row.x.ln() - 7.0).abs() < 1e-9);
        }
    }

    #[test]
    fn unit_mismatch_is_an_error() {
        let a = ObservedSeries::new(SeriesUnit::Ratio, vec![(10.0, 0.2), (100.0, 0.3)]).unwrap();
        let b = ObservedSeries::new(SeriesUnit::Count, vec![(10.0, 2.0), (100.0, 25.0)]).unwrap();
        assert!(matches!(residuals_against(&a, &b), Err(Error::UnitMismatch(_))));
    }

    #[test]
    fn planted_coefficient_recovered_exactly() {
        let c0 = 2.0f64;
        let r = ratio_series(|x| c0 * x.ln().ln().powi(2) / x.ln().powi(2));
        let fit = fit_lower_order(&r).unwrap();
        assert!((fit.coefficient - c0).abs() < 1e-10, "c = {}", fit.coefficient);
        assert!(fit.rms_after < 1e-14);
        assert!(fit.rms_after <= fit.rms_before);
    }

    #[test]
    fn zero_residuals_fit_zero() {
        let r = ratio_series(|_| 0.0);
        let fit = fit_lower_order(&r).unwrap();
        assert_eq!(fit.coefficient, 0.0);
    }

    #[test]
    fn noisy_plant_recovered_within_three_standard_errors() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let c0 = 0.5f64;
        let sigma = 1e-5f64;
        let rows: Vec<ResidualRow<f64>> = grid()
            .into_iter()
            .map(|x| {
                let noise = sigma * (rng.gen::<f64>() * 2.0 - 1.0);
                let v = c0 * x.ln().ln().powi(2) / x.ln().powi(2) + noise;
                ResidualRow { x, observed: v, model: 0.0, residual: v }
            })
            .collect();
        let r = ResidualSeries { unit: SeriesUnit::Ratio, rows };
        let fit = fit_lower_order(&r).unwrap();
        let sum_phi2: f64 = grid()
            .into_iter()
            .map(|x| (x.ln().ln().powi(2) / x.ln().powi(2)).powi(2))
            .sum();
        let se = sigma / sum_phi2.sqrt();
        assert!(
            (fit.coefficient - c0).abs() < 3.0 * se,
            "c = {}, se = {se}",
            fit.coefficient
        );
    }

    #[test]
    fn fit_is_a_local_optimum() {
        let r = ratio_series(|x| 0.3 / x.ln() + 1e-4);
        let fit = fit_lower_order(&r).unwrap();
        let sse = |c: f64| -> f64 {
            r.rows
                .iter()
                .map(|row| {
                    let b = row.x.ln().ln().powi(2) / row.x.ln().powi(2);
                    (row.residual - c * b).powi(2)
                })
                .sum()
        };
        let at = sse(fit.coefficient);
        assert!(sse(fit.coefficient + 1e-6) >= at);
        assert!(sse(fit.coefficient - 1e-6) >= at);
    }

    #[test]
    fn scale_equivariance() {
        let r = ratio_series(|x| 0.2 / x.ln() + 3e-5 * x.cos());
        let fit = fit_lower_order(&r).unwrap();
        let lambda = 12.5f64;
        let scaled_rows = r
            .rows
            .iter()
            .map(|row| ResidualRow {
                x: row.x,
                observed: row.observed * lambda,
                model: row.model * lambda,
                residual: row.residual * lambda,
            })
            .collect();
        let scaled = ResidualSeries { unit: SeriesUnit::Ratio, rows: scaled_rows };
        let fit2 = fit_lower_order(&scaled).unwrap();
        assert!(
            (fit2.coefficient - lambda * fit.coefficient).abs()
                < 1e-12 * fit.coefficient.abs().max(1.0) * lambda,
        );
    }

    #[test]
    fn refit_after_subtraction_is_zero() {
        let r = ratio_series(|x| 1.7 * x.ln().ln().powi(2) / x.ln().powi(2) + 2e-4 / x.ln());
        let fit = fit_lower_order(&r).unwrap();
        let after = apply_fit(&r, &fit).unwrap();
        let refit = fit_lower_order(&after).unwrap();
        assert!(refit.coefficient.abs() < 1e-10, "refit = {}", refit.coefficient);
    }

    #[test]
    fn too_few_rows_rejected() {
        let rows = vec![ResidualRow { x: 100.0, observed: 0.0, model: 0.0, residual: 0.0 }; 5];
        let r = ResidualSeries { unit: SeriesUnit::Ratio, rows };
        assert!(fit_lower_order(&r).is_err());
    }

    #[test]
    fn degenerate_grid_is_singular() {
        let rows = vec![ResidualRow { x: 100.0, observed: 0.1, model: 0.0, residual: 0.1 }; 12];
        let r = ResidualSeries { unit: SeriesUnit::Ratio, rows };
        assert!(matches!(fit_lower_order(&r), Err(Error::SingularFit(_))));
    }

    #[test]
    fn plot_csv_and_empty_input() {
        let mut buf = Vec::new();
        write_xy_csv::<f64, _>(&[(10.0, 0.5)], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("x,value\n"));
        assert!(matches!(
            write_xy_csv::<f64, _>(&[], &mut Vec::new()),
            Err(Error::EmptyInput(_))
        ));
    }

    #[test]
    fn residual_csv_round_trip() {
        let r = ratio_series(|x| 0.1 / x.ln());
        let mut buf = Vec::new();
        write_residuals_csv(&r, &mut buf).unwrap();
        let parsed =
            parse_residuals_csv::<f64>(std::str::from_utf8(&buf).unwrap(), SeriesUnit::Ratio)
                .unwrap();
        assert_eq!(parsed.rows.len(), r.rows.len());
        for (a, b) in parsed.rows.iter().zip(&r.rows) {
            assert_eq!(a.residual, b.residual);
        }
    }
}
