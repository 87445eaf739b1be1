//! Simultaneous fit of a flat baseline and several Lorentzian dips.

use crate::error::{Error, Result};

use super::lm::{least_squares, Bounds, FitResult, LmOptions, CI95};
use super::peaks::{detect_peaks, percentile, smooth, DipEstimate, PeakOptions};

#[derive(Debug, Clone, PartialEq)]
pub struct LorentzFit {
    pub baseline: f64,
    pub baseline_ci: f64,
    /// Sorted by center frequency.
    pub dips: Vec<DipEstimate>,
    /// Raw fit in normalized coordinates: x = (f − offset)/scale, y/baseline.
    pub fit: FitResult,
}

/// y = b − Σ aₖ / (1 + (2(x − cₖ)/wₖ)²), parameters [b, c₁, w₁, a₁, …].
pub fn dips_model(x: f64, p: &[f64]) -> f64 {
    let mut y = p[0];
    for d in p[1..].chunks_exact(3) {
        let u = 2.0 * (x - d[0]) / d[1];
        y -= d[2] / (1.0 + u * u);
    }
    y
}

fn initial_dips(freqs: &[f64], values: &[f64], n_dips: usize, options: &PeakOptions) -> Vec<DipEstimate> {
    let mut found = detect_peaks(freqs, values, options);
    if found.is_empty() {
        let (i, _) = values
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .expect("nonempty");
        let span = freqs[freqs.len() - 1] - freqs[0];
        let base = percentile(values, 0.75);
        found.push(DipEstimate::new(freqs[i], 0.05 * span, (base - values[i]).max(0.0)));
    }
    found.sort_by(|a, b| b.depth.total_cmp(&a.depth));
    found.truncate(n_dips);
    found.sort_by(|a, b| a.center.total_cmp(&b.center));
    found
}

/// Normalized-coordinate fit of a baseline and the dips in `init`.
fn fit_normalized(x: &[f64], y: &[f64], init: &[f64]) -> Result<FitResult> {
    let (x_lo, x_hi) = (x[0].min(x[x.len() - 1]), x[0].max(x[x.len() - 1]));
    let span = x_hi - x_lo;
    let min_width = 1e-6 * (x[1] - x[0]).abs().max(1e-12);
    let mut lower = vec![f64::NEG_INFINITY];
    let mut upper = vec![f64::INFINITY];
    for _ in init[1..].chunks_exact(3) {
        lower.extend([x_lo - 0.05 * span, min_width, 0.0]);
        upper.extend([x_hi + 0.05 * span, span, f64::INFINITY]);
    }
    let options = LmOptions {
        typical: Some(init.iter().map(|v| v.abs().max(1e-3)).collect()),
        ..LmOptions::default()
    };
    let bounds = Bounds { lower, upper };
    least_squares(dips_model, x, y, init, Some(&bounds), &options)
}

pub fn fit_lorentzians(freqs: &[f64], values: &[f64], n_dips: usize, peak_options: &PeakOptions) -> Result<LorentzFit> {
    if n_dips == 0 {
        return Err(Error::invalid("n_dips", "must be >= 1"));
    }
    if freqs.len() != values.len() || freqs.len() < 5 {
        return Err(Error::invalid("spectrum", "need at least five points of matching length"));
    }
    let init_dips = initial_dips(freqs, values, n_dips, peak_options);
    let offset = 0.5 * (freqs[0] + freqs[freqs.len() - 1]);
    let scale = ((freqs[freqs.len() - 1] - freqs[0]) / 2.0).max(f64::MIN_POSITIVE);
    let base = percentile(values, 0.75);
    if !(base.abs() > 0.0) {
        return Err(Error::invalid("spectrum", "baseline is zero"));
    }
    let x: Vec<f64> = freqs.iter().map(|f| (f - offset) / scale).collect();
    let y: Vec<f64> = values.iter().map(|v| v / base).collect();
    let min_width = 1e-6 * (x[1] - x[0]).abs().max(1e-12);
    let mut init = vec![1.0];
    for d in &init_dips {
        init.extend([(d.center - offset) / scale, (d.fwhm / scale).max(min_width * 10.0), d.depth / base]);
    }
    let mut fit = fit_normalized(&x, &y, &init)?;
    // add missing dips one at a time where the residual is most negative
    while (fit.params.len() - 1) / 3 < n_dips {
        let residual: Vec<f64> = x
            .iter()
            .zip(&y)
            .map(|(xi, yi)| yi - dips_model(*xi, &fit.params))
            .collect();
        let r = smooth(&residual, 2);
        let (i, _) = r
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .expect("nonempty");
        let widths: Vec<f64> = fit.params[1..].chunks_exact(3).map(|d| d[1]).collect();
        let width = widths.iter().sum::<f64>() / widths.len() as f64;
        let mut next = fit.params.clone();
        next.extend([x[i], width, (-r[i]).max(0.0)]);
        fit = fit_normalized(&x, &y, &next)?;
    }
    let ci: Vec<f64> = fit.sigma().iter().map(|s| CI95 * s).collect();
    let mut dips: Vec<DipEstimate> = fit.params[1..]
        .chunks_exact(3)
        .zip(ci[1..].chunks_exact(3))
        .map(|(p, c)| DipEstimate {
            center: offset + p[0] * scale,
            fwhm: p[1].abs() * scale,
            depth: p[2] * base,
            center_ci: c[0] * scale,
            fwhm_ci: c[1] * scale,
            depth_ci: c[2] * base.abs(),
        })
        .collect();
    dips.sort_by(|a, b| a.center.total_cmp(&b.center));
    Ok(LorentzFit {
        baseline: fit.params[0] * base,
        baseline_ci: ci[0] * base.abs(),
        dips,
        fit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn synth(f: &[f64], dips: &[(f64, f64, f64)]) -> Vec<f64> {
        f.iter()
            .map(|x| {
                1e-9 * (1.0
                    - dips
                        .iter()
                        .map(|(c, w, a)| a / (1.0 + (2.0 * (x - c) / w).powi(2)))
                        .sum::<f64>())
            })
            .collect()
    }

    fn grid() -> Vec<f64> {
        (0..701).map(|i| 2.8e9 + 0.14e9 * i as f64 / 700.0).collect()
    }

    #[test]
    fn exact_single_dip() {
        let f = grid();
        let y = synth(&f, &[(2.87e9, 20e6, 0.12)]);
        let r = fit_lorentzians(&f, &y, 1, &PeakOptions::default()).unwrap();
        assert!(r.fit.converged);
        let d = r.dips[0];
        assert_relative_eq!(d.center, 2.87e9, max_relative = 1e-6);
        assert_relative_eq!(d.fwhm, 20e6, max_relative = 1e-6);
        assert_relative_eq!(d.depth, 0.12e-9, max_relative = 1e-6);
        assert_relative_eq!(r.baseline, 1e-9, max_relative = 1e-6);
    }

    #[test]
    fn overlapping_pair_is_split() {
        let f = grid();
        let (c1, c2) = (2.865e9, 2.875e9);
        let y = synth(&f, &[(c1, 20e6, 0.06), (c2, 20e6, 0.06)]);
        let r = fit_lorentzians(&f, &y, 2, &PeakOptions::default()).unwrap();
        assert!(r.fit.converged);
        for d in &r.dips {
            assert!(d.center > c1 - 20e6 && d.center < c2 + 20e6);
        }
    }

    #[test]
    fn zero_dips_rejected() {
        let f = grid();
        assert!(fit_lorentzians(&f, &synth(&f, &[]), 0, &PeakOptions::default()).is_err());
    }
}
