//! Dip detection on sampled spectra.

use serde::{Deserialize, Serialize};

/// One resonance dip. Uncertainties are 95 % half-widths (zero for raw
/// detections).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DipEstimate {
    /// Hz.
    pub center: f64,
    /// Hz.
    pub fwhm: f64,
    /// Drop below baseline, in the units of the input signal.
    pub depth: f64,
    pub center_ci: f64,
    pub fwhm_ci: f64,
    pub depth_ci: f64,
}

impl DipEstimate {
    pub fn new(center: f64, fwhm: f64, depth: f64) -> Self {
        Self {
            center,
            fwhm,
            depth,
            center_ci: 0.0,
            fwhm_ci: 0.0,
            depth_ci: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeakOptions {
    /// Detection threshold in noise standard deviations.
    pub k: f64,
    /// Known noise level; estimated from the data when absent.
    pub noise_rms: Option<f64>,
    /// Threshold floor relative to the baseline.
    pub min_relative_depth: f64,
}

impl Default for PeakOptions {
    fn default() -> Self {
        Self {
            k: 3.0,
            noise_rms: None,
            min_relative_depth: 1e-4,
        }
    }
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Linear-interpolated percentile, `q` in [0, 1].
pub fn percentile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
}

/// Noise estimate from the MAD of second differences, which is insensitive
/// to slowly varying line shapes.
pub fn estimate_noise(values: &[f64]) -> f64 {
    if values.len() < 3 {
        return 0.0;
    }
    let mut d2: Vec<f64> = values.windows(3).map(|w| w[0] - 2.0 * w[1] + w[2]).collect();
    let m = median(&mut d2.clone());
    let mut dev: Vec<f64> = d2.iter_mut().map(|d| (*d - m).abs()).collect();
    // second difference of white noise has variance 6σ²
    1.4826 * median(&mut dev) / 6f64.sqrt()
}

pub(crate) fn smooth(values: &[f64], half: usize) -> Vec<f64> {
    let n = values.len();
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half).min(n - 1);
            values[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect()
}

fn half_width_crossings(freqs: &[f64], v: &[f64], i: usize, level: f64) -> Option<f64> {
    let n = v.len();
    let cross = |a: usize, b: usize| freqs[a] + (level - v[a]) / (v[b] - v[a]) * (freqs[b] - freqs[a]);
    let mut l = i;
    while l > 0 && v[l] < level {
        l -= 1;
    }
    let left = (v[l] >= level && l < i).then(|| cross(l, l + 1));
    let mut r = i;
    while r + 1 < n && v[r] < level {
        r += 1;
    }
    let right = (v[r] >= level && r > i).then(|| cross(r, r - 1));
    match (left, right) {
        (Some(a), Some(b)) => Some(b - a),
        (Some(a), None) => Some(2.0 * (freqs[i] - a)),
        (None, Some(b)) => Some(2.0 * (b - freqs[i])),
        (None, None) => None,
    }
}

/// Local minima deeper than the detection threshold, merged within half a
/// FWHM and sorted by frequency.
pub fn detect_peaks(freqs: &[f64], values: &[f64], options: &PeakOptions) -> Vec<DipEstimate> {
    let n = values.len();
    if n < 5 || freqs.len() != n {
        return Vec::new();
    }
    let baseline = percentile(values, 0.75);
    let sigma = options.noise_rms.unwrap_or_else(|| estimate_noise(values));
    let floor = options.min_relative_depth * baseline.abs();
    let threshold = (options.k * sigma).max(floor);
    let v = if options.k * sigma > floor {
        smooth(values, 2)
    } else {
        values.to_vec()
    };
    let mut dips: Vec<DipEstimate> = (0..n)
        .filter(|&i| {
            let left_ok = i == 0 || v[i] < v[i - 1];
            let right_ok = i + 1 == n || v[i] <= v[i + 1];
            left_ok && right_ok && baseline - v[i] > threshold
        })
        .filter_map(|i| {
            let depth = baseline - v[i];
            let fwhm = half_width_crossings(freqs, &v, i, baseline - 0.5 * depth)?;
            Some(DipEstimate::new(freqs[i], fwhm, depth))
        })
        .collect();
    // merge neighbours closer than half a FWHM, keeping the deeper one
    dips.sort_by(|a, b| b.depth.total_cmp(&a.depth));
    let mut kept: Vec<DipEstimate> = Vec::new();
    for d in dips {
        if kept
            .iter()
            .all(|k| (k.center - d.center).abs() > 0.5 * k.fwhm.max(d.fwhm))
        {
            kept.push(d);
        }
    }
    kept.sort_by(|a, b| a.center.total_cmp(&b.center));
    kept
}
