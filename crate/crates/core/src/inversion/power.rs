//! Estimation of the photocurrent power law parameters.

use crate::error::{Error, Result};
use crate::photodynamics::{photocurrent_model, PowerCurveParams};

use super::lm::{least_squares, Bounds, FitResult, LmOptions};

/// Relative 95 % half-width above which an interval is reported as wide.
pub const WIDE_INTERVAL: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct PowerFit {
    pub params: PowerCurveParams,
    /// 95 % half-widths of (alpha, beta).
    pub alpha_ci: f64,
    pub beta_ci: f64,
    pub r_squared: f64,
    /// The data do not constrain both parameters well, typically because
    /// they cover only one regime.
    pub wide_intervals: bool,
    pub fit: FitResult,
}

pub fn r_squared(y: &[f64], model: &[f64]) -> f64 {
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let ss_tot: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let ss_res: f64 = y.iter().zip(model).map(|(a, b)| (a - b).powi(2)).sum();
    1.0 - ss_res / ss_tot
}

/// Start values from P²/I = αβ + βP, which is linear in P.
fn linearized_start(power: &[f64], current: &[f64]) -> Option<(f64, f64)> {
    let pts: Vec<(f64, f64)> = power
        .iter()
        .zip(current)
        .filter(|(p, i)| **p > 0.0 && **i > 0.0)
        .map(|(p, i)| (*p, p * p / i))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let beta = sxy / sxx;
    let alpha = (my - beta * mx) / beta;
    (beta > 0.0 && alpha > 0.0 && alpha.is_finite()).then_some((alpha, beta))
}

pub fn fit_power_curve(power: &[f64], current: &[f64]) -> Result<PowerFit> {
    if power.len() != current.len() {
        return Err(Error::invalid("data", "power and current lengths differ"));
    }
    if power.len() < 3 {
        return Err(Error::Underdetermined(format!("{} points, need at least 3", power.len())));
    }
    if power.iter().chain(current).any(|v| !v.is_finite()) || power.iter().any(|p| *p < 0.0) {
        return Err(Error::invalid("data", "values must be finite with power >= 0"));
    }
    let (a0, b0) = linearized_start(power, current).unwrap_or_else(|| {
        let pmax = power.iter().cloned().fold(0.0, f64::max);
        let imax = current.iter().cloned().fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        (0.5 * pmax, pmax / imax)
    });
    let model = |p: f64, q: &[f64]| {
        photocurrent_model(
            p,
            &PowerCurveParams {
                alpha: q[0],
                beta: q[1],
            },
        )
    };
    let bounds = Bounds {
        lower: vec![f64::MIN_POSITIVE, f64::MIN_POSITIVE],
        upper: vec![f64::INFINITY, f64::INFINITY],
    };
    let fit = least_squares(model, power, current, &[a0, b0], Some(&bounds), &LmOptions::default())?;
    let params = PowerCurveParams {
        alpha: fit.params[0],
        beta: fit.params[1],
    };
    let ci = fit.ci95();
    let predicted: Vec<f64> = power.iter().map(|p| photocurrent_model(*p, &params)).collect();
    let wide = ci[0] > WIDE_INTERVAL * params.alpha || ci[1] > WIDE_INTERVAL * params.beta || fit.singular;
    Ok(PowerFit {
        params,
        alpha_ci: ci[0],
        beta_ci: ci[1],
        r_squared: r_squared(current, &predicted),
        wide_intervals: wide,
        fit,
    })
}
