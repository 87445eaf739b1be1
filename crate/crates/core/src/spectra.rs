//! CW-PDMR spectra and magnet-sweep field maps.
//!
//! Each orientation family contributes carrier generation in proportion to
//! its weight; the summed generation is pushed through the transport model at
//! the readout bias. Two synthesis paths exist:
//!
//! * [`SynthesisPath::Full`] solves the rate model at every frequency point.
//! * [`SynthesisPath::Fast`] replaces those solves by Lorentzian lines whose
//!   depth and width come from a handful of solves per transition group.
//!
//! The fast path relies on the drop in generation following
//! ΔΓ(W) = A·W/(1 + W/W_s) for a single driven transition, so a Lorentzian
//! drive rate W(f) yields a Lorentzian dip whose width is widened by
//! √(1 + W₀/W_s).
//!
//! Excited-state lines are an overlay with a configurable fraction of the
//! matching ground-state depth, applied identically in both paths.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calibration::Calibration;
use crate::error::{Error, Result};
use crate::geometry::{project_all, MagneticField};
use crate::photodynamics::{drive_saturation, solve_with_drive, FamilySpin, MwTarget};
use crate::spin::{Manifold, MS_MINUS, MS_PLUS};
use crate::transport::{junction_current, Generation};

/// Transitions closer than this fraction of the line width are merged.
pub const MERGE_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthesisPath {
    Fast,
    Full,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumConfig {
    /// MW frequencies, Hz, ascending.
    pub freq_grid: Vec<f64>,
    pub field: MagneticField,
    /// Optical power, W.
    pub optical_power: f64,
    pub include_excited: bool,
    /// Gaussian current noise, A. Zero disables noise.
    pub noise_rms: f64,
    pub seed: u64,
    pub path: SynthesisPath,
    pub model: Calibration,
}

impl SpectrumConfig {
    pub fn new(freq_grid: Vec<f64>, field: MagneticField, optical_power: f64) -> Self {
        Self {
            freq_grid,
            field,
            optical_power,
            include_excited: false,
            noise_rms: 0.0,
            seed: 0,
            path: SynthesisPath::Fast,
            model: Calibration::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.freq_grid.is_empty() {
            return Err(Error::invalid("freq_grid", "must not be empty"));
        }
        if self.freq_grid.windows(2).any(|w| !(w[1] >= w[0])) {
            return Err(Error::invalid("freq_grid", "must be sorted ascending"));
        }
        if !(self.optical_power >= 0.0) || !self.optical_power.is_finite() {
            return Err(Error::invalid("optical_power", "must be finite and >= 0"));
        }
        if !(self.noise_rms >= 0.0) || !self.noise_rms.is_finite() {
            return Err(Error::invalid("noise_rms", "must be finite and >= 0"));
        }
        self.model.validate()
    }
}

/// Uniform grid of `n` points from `start` to `stop` inclusive.
pub fn linear_grid(start: f64, stop: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![start],
        _ => (0..n)
            .map(|i| start + (stop - start) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// One resonance line as it enters the fast path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub family: usize,
    pub manifold: Manifold,
    /// Driven transitions, `[m_s = −1, m_s = +1]`.
    pub labels: [bool; 2],
    /// Hz.
    pub center: f64,
    /// Weighted drop in Γ_e on resonance, s⁻¹·m⁻³.
    pub depth: f64,
    /// Hz.
    pub fwhm: f64,
}

impl Line {
    pub fn profile(&self, frequency: f64) -> f64 {
        let x = 2.0 * (frequency - self.center) / self.fwhm;
        self.depth / (1.0 + x * x)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumMeta {
    /// Cartesian field, T.
    pub field: [f64; 3],
    pub power: f64,
    pub seed: u64,
    pub noise_rms: f64,
    pub path: SynthesisPath,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub freqs: Vec<f64>,
    /// A.
    pub current: Vec<f64>,
    /// (baseline − current)/baseline.
    pub contrast: Vec<f64>,
    /// MW-off current, A.
    pub baseline: f64,
    pub lines: Vec<Line>,
    pub meta: SpectrumMeta,
}

impl Spectrum {
    /// Index of the lowest current.
    pub fn argmin(&self) -> usize {
        self.current
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap_or(0)
    }
}

/// Effective FWHM (Hz) of a CW dip.
///
/// `dephasing` is the total transverse rate Γ₂ including optical broadening,
/// `pump_rate` the optical repolarization rate that competes with the drive.
/// Reduces to Γ₂/π, twice the bare half width, without drive.
pub fn linewidth_model(rabi: f64, dephasing: f64, pump_rate: f64) -> f64 {
    let bare = dephasing / std::f64::consts::PI;
    if pump_rate.is_infinite() || rabi == 0.0 {
        return bare;
    }
    bare * (1.0 + rabi * rabi / (2.0 * dephasing * pump_rate)).sqrt()
}

struct FamilyResponse {
    off: Generation,
    lines: Vec<Line>,
}

fn family_response(
    model: &Calibration,
    power: f64,
    spin: &FamilySpin,
    family: usize,
    include_excited: bool,
) -> Result<FamilyResponse> {
    let weight = model.readout.family_weights[family];
    let photo = &model.photophysics;
    let off = solve_with_drive(photo, power, [0.0, 0.0], spin)?;
    let off = Generation::new(weight * off.gamma_e, weight * off.gamma_h);
    let mut lines = Vec::new();
    if weight == 0.0 || power == 0.0 {
        return Ok(FamilyResponse { off, lines });
    }
    let gamma2 = model.drive.dephasing_at(power);
    let rabi = model.drive.rabi;
    let w0 = rabi * rabi / (2.0 * gamma2);
    let active = match model.readout.mw_target {
        MwTarget::MinusOne => [true, false],
        MwTarget::PlusOne => [false, true],
        MwTarget::Both => [true, true],
    };
    let gs = [spin.gs_transitions.f_minus, spin.gs_transitions.f_plus];
    let es = [spin.es_transitions.f_minus, spin.es_transitions.f_plus];

    let mut single = [None, None];
    for k in 0..2 {
        if active[k] {
            let mut targets = [false, false];
            targets[k] = true;
            let s = drive_saturation(photo, power, spin, targets, w0)?;
            single[k] = Some((s.drop * weight, linewidth_model(rabi, gamma2, s.saturation_rate)));
        }
    }
    let merged = match single {
        [Some((_, wm)), Some((_, wp))] => (gs[1] - gs[0]).abs() < MERGE_FRACTION * wm.max(wp),
        _ => false,
    };
    if merged {
        let s = drive_saturation(photo, power, spin, [true, true], w0)?;
        lines.push(Line {
            family,
            manifold: Manifold::Ground,
            labels: [true, true],
            center: 0.5 * (gs[0] + gs[1]),
            depth: s.drop * weight,
            fwhm: linewidth_model(rabi, gamma2, s.saturation_rate),
        });
    } else {
        for k in 0..2 {
            if let Some((depth, fwhm)) = single[k] {
                let mut labels = [false, false];
                labels[k] = true;
                lines.push(Line {
                    family,
                    manifold: Manifold::Ground,
                    labels,
                    center: gs[k],
                    depth,
                    fwhm,
                });
            }
        }
    }
    if include_excited {
        for k in 0..2 {
            if let Some((depth, fwhm)) = single[k] {
                let mut labels = [false, false];
                labels[k] = true;
                lines.push(Line {
                    family,
                    manifold: Manifold::Excited,
                    labels,
                    center: es[k],
                    depth: model.readout.es_relative_depth * depth,
                    fwhm,
                });
            }
        }
    }
    Ok(FamilyResponse { off, lines })
}

fn current_for(model: &Calibration, generation: Generation) -> Result<f64> {
    Ok(junction_current(model.readout.bias, generation, &model.transport)?.current
        + model.readout.background_current)
}

/// Spectrum for one row; `stream` selects the noise stream.
fn synth_row(config: &SpectrumConfig, stream: u64) -> Result<Spectrum> {
    let model = &config.model;
    let power = config.optical_power;
    let projections = project_all(&config.field);
    let spins: Vec<FamilySpin> = projections
        .iter()
        .map(|p| FamilySpin::new(&model.spin, *p))
        .collect();
    let mut off = Generation::default();
    let mut lines = Vec::new();
    for (family, spin) in spins.iter().enumerate() {
        let r = family_response(model, power, spin, family, config.include_excited)?;
        off.gamma_e += r.off.gamma_e;
        off.gamma_h += r.off.gamma_h;
        lines.extend(r.lines);
    }
    let baseline = current_for(model, off)?;

    let overlay = |f: f64, manifold: Manifold| -> f64 {
        lines
            .iter()
            .filter(|l| l.manifold == manifold)
            .map(|l| l.profile(f))
            .sum()
    };

    let mut current = Vec::with_capacity(config.freq_grid.len());
    for &f in &config.freq_grid {
        let es_drop = overlay(f, Manifold::Excited);
        let generation = match config.path {
            SynthesisPath::Fast => {
                let drop = overlay(f, Manifold::Ground) + es_drop;
                Generation::new((off.gamma_e - drop).max(0.0), (off.gamma_h - drop).max(0.0))
            }
            SynthesisPath::Full => {
                let gamma2 = model.drive.dephasing_at(power);
                let drive = model.drive.drive(f, power, model.readout.mw_target);
                let mut g = Generation::default();
                for (family, spin) in spins.iter().enumerate() {
                    let w = model.readout.family_weights[family];
                    if w == 0.0 {
                        continue;
                    }
                    debug_assert_eq!(drive.dephasing, gamma2);
                    let r = solve_with_drive(&model.photophysics, power, drive.rates(&spin.gs_transitions), spin)?;
                    g.gamma_e += w * r.gamma_e;
                    g.gamma_h += w * r.gamma_h;
                }
                Generation::new((g.gamma_e - es_drop).max(0.0), (g.gamma_h - es_drop).max(0.0))
            }
        };
        current.push(current_for(model, generation)?);
    }

    if config.noise_rms > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(stream);
        let normal = Normal::new(0.0, config.noise_rms)
            .map_err(|e| Error::invalid("noise_rms", e.to_string()))?;
        for c in current.iter_mut() {
            *c += normal.sample(&mut rng);
        }
    }
    let contrast = current
        .iter()
        .map(|c| if baseline > 0.0 { (baseline - c) / baseline } else { 0.0 })
        .collect();
    Ok(Spectrum {
        freqs: config.freq_grid.clone(),
        current,
        contrast,
        baseline,
        lines,
        meta: SpectrumMeta {
            field: config.field.vector(),
            power,
            seed: config.seed,
            noise_rms: config.noise_rms,
            path: config.path,
        },
    })
}

pub fn synth_spectrum(config: &SpectrumConfig) -> Result<Spectrum> {
    config.validate()?;
    synth_row(config, 0)
}

/// Permanent magnet approximated by an on-axis dipole.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MagnetModel {
    /// Field at the reference distance, T.
    pub surface_field: f64,
    /// m.
    pub reference_distance: f64,
}

impl Default for MagnetModel {
    fn default() -> Self {
        Self {
            surface_field: 0.5,
            reference_distance: 1e-3,
        }
    }
}

impl MagnetModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.surface_field > 0.0) {
            return Err(Error::invalid("surface_field", "must be > 0"));
        }
        if !(self.reference_distance > 0.0) {
            return Err(Error::invalid("reference_distance", "must be > 0"));
        }
        Ok(())
    }
}

/// B(d) = B_s·(d_ref/d)³.
pub fn magnet_field(model: &MagnetModel, distance: f64) -> Result<f64> {
    if !(distance > 0.0) {
        return Err(Error::invalid("distance", "must be > 0"));
    }
    Ok(model.surface_field * (model.reference_distance / distance).powi(3))
}

/// Distance at which the magnet produces `field`.
pub fn distance_for_field(model: &MagnetModel, field: f64) -> Result<f64> {
    if !(field > 0.0) {
        return Err(Error::invalid("field", "must be > 0"));
    }
    Ok(model.reference_distance * (model.surface_field / field).cbrt())
}

#[derive(Debug, Clone, PartialEq)]
pub enum Sweep {
    /// Field magnitudes, T.
    Field(Vec<f64>),
    /// Magnet distances, m.
    Distance { distances: Vec<f64>, magnet: MagnetModel },
}

impl Sweep {
    pub fn len(&self) -> usize {
        match self {
            Sweep::Field(v) => v.len(),
            Sweep::Distance { distances, .. } => distances.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn fields(&self) -> Result<Vec<f64>> {
        match self {
            Sweep::Field(v) => {
                if v.iter().any(|b| !(*b >= 0.0)) {
                    return Err(Error::invalid("sweep", "field magnitudes must be >= 0"));
                }
                Ok(v.clone())
            }
            Sweep::Distance { distances, magnet } => {
                magnet.validate()?;
                distances.iter().map(|d| magnet_field(magnet, *d)).collect()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdmrMap {
    /// Field magnitude per row, T.
    pub fields: Vec<f64>,
    /// Magnet distance per row when sweeping distance, m.
    pub distances: Option<Vec<f64>>,
    pub freqs: Vec<f64>,
    /// Current, one row per sweep value, A.
    pub current: Vec<Vec<f64>>,
    pub contrast: Vec<Vec<f64>>,
    pub baseline: Vec<f64>,
    pub lines: Vec<Vec<Line>>,
}

/// One spectrum per sweep value along the direction of `base.field`.
///
/// `residual_transverse` (T) is added perpendicular to that direction. Rows
/// are computed in parallel; row `i` draws noise from stream `i` of the seed.
pub fn field_map(sweep: &Sweep, base: &SpectrumConfig, residual_transverse: f64) -> Result<PdmrMap> {
    if sweep.is_empty() {
        return Err(Error::invalid("sweep", "must not be empty"));
    }
    if !(residual_transverse >= 0.0) {
        return Err(Error::invalid("residual_transverse", "must be >= 0"));
    }
    base.validate()?;
    let fields = sweep.fields()?;
    let direction = base.field.direction;
    let rows: Vec<Spectrum> = fields
        .par_iter()
        .enumerate()
        .map(|(i, &b)| {
            let mut cfg = base.clone();
            cfg.field = MagneticField::new(b, direction)?.with_transverse(residual_transverse);
            synth_row(&cfg, i as u64)
        })
        .collect::<Result<_>>()?;
    let distances = match sweep {
        Sweep::Distance { distances, .. } => Some(distances.clone()),
        Sweep::Field(_) => None,
    };
    let mut map = PdmrMap {
        fields,
        distances,
        freqs: base.freq_grid.clone(),
        current: Vec::with_capacity(rows.len()),
        contrast: Vec::with_capacity(rows.len()),
        baseline: Vec::with_capacity(rows.len()),
        lines: Vec::with_capacity(rows.len()),
    };
    for r in rows {
        map.current.push(r.current);
        map.contrast.push(r.contrast);
        map.baseline.push(r.baseline);
        map.lines.push(r.lines);
    }
    Ok(map)
}

/// Single-transition contrast of one family's m_s = 0 ↔ `label` line, from
/// the line list of a spectrum or map row.
pub fn line_contrast(lines: &[Line], off_total: f64, family: usize, manifold: Manifold, label: usize) -> f64 {
    let k = if label == MS_PLUS { 1 } else { 0 };
    debug_assert!(label == MS_MINUS || label == MS_PLUS);
    lines
        .iter()
        .filter(|l| l.family == family && l.manifold == manifold && l.labels[k])
        .map(|l| l.depth)
        .sum::<f64>()
        / off_total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::direction_from_miller;
    use crate::spin::D_GROUND;
    use approx::assert_relative_eq;

    fn field(b: f64, h: i32, k: i32, l: i32) -> MagneticField {
        MagneticField::new(b, direction_from_miller(h, k, l).unwrap()).unwrap()
    }

    fn local_minima(s: &Spectrum, prominence: f64) -> Vec<f64> {
        let c = &s.current;
        (1..c.len() - 1)
            .filter(|&i| c[i] < c[i - 1] && c[i] <= c[i + 1] && s.baseline - c[i] > prominence * s.baseline)
            .map(|i| s.freqs[i])
            .collect()
    }

    #[test]
    fn linewidth_limits() {
        let g2 = 2e7;
        assert_relative_eq!(linewidth_model(0.0, g2, 1e6), g2 / std::f64::consts::PI);
        assert_relative_eq!(linewidth_model(1e7, g2, f64::INFINITY), g2 / std::f64::consts::PI);
        assert!(linewidth_model(2e7, g2, 1e6) > linewidth_model(1e7, g2, 1e6));
        assert!(linewidth_model(1e7, 2.0 * g2, 1e6) > linewidth_model(1e7, g2, 1e6));
    }

    #[test]
    fn zero_field_dip() {
        let grid = linear_grid(2.80e9, 2.94e9, 1401);
        let s = synth_spectrum(&SpectrumConfig::new(grid, field(0.0, 1, 0, 0), 0.1)).unwrap();
        assert!((s.freqs[s.argmin()] - D_GROUND).abs() <= 1e5);
        let depth = s.contrast[s.argmin()];
        assert!((depth - 0.12).abs() < 0.01, "depth {depth}");
        assert_eq!(local_minima(&s, 1e-3).len(), 1);
    }

    #[test]
    fn along_100_two_symmetric_dips() {
        let grid = linear_grid(2.6e9, 3.14e9, 2701);
        let s = synth_spectrum(&SpectrumConfig::new(grid, field(5e-3, 1, 0, 0), 0.1)).unwrap();
        let m = local_minima(&s, 1e-3);
        assert_eq!(m.len(), 2);
        // symmetric up to the common second-order shift from B⊥
        let exact = crate::spin::transition_frequencies(&crate::spin::SpinSystem::ground(
            project_all(&field(5e-3, 1, 0, 0))[0],
        ));
        assert!((m[0] - exact.f_minus).abs() < 0.5e6);
        assert!((m[1] - exact.f_plus).abs() < 0.5e6);
        assert!(((m[0] + m[1]) / 2.0 - D_GROUND).abs() < 10e6);
    }

    #[test]
    fn along_111_aligned_and_tilted_pairs() {
        let grid = linear_grid(2.6e9, 3.14e9, 2701);
        let s = synth_spectrum(&SpectrumConfig::new(grid, field(5e-3, 1, 1, 1), 0.1)).unwrap();
        let m = local_minima(&s, 1e-3);
        assert_eq!(m.len(), 4);
        assert!((m[0] - (D_GROUND - 28e9 * 5e-3)).abs() < 1e6);
        assert!((m[3] - (D_GROUND + 28e9 * 5e-3)).abs() < 1e6);
    }

    #[test]
    fn far_off_resonance_equals_mw_off() {
        let grid = linear_grid(20e9, 21e9, 11);
        let s = synth_spectrum(&SpectrumConfig::new(grid, field(3e-3, 1, 1, 0), 0.1)).unwrap();
        for c in &s.current {
            assert_relative_eq!(*c, s.baseline, max_relative = 1e-6);
        }
    }

    #[test]
    fn off_axis_tilt_splits_degeneracy() {
        let theta: f64 = 5f64.to_radians();
        let f = MagneticField::from_vector([20e-3 * theta.cos(), 20e-3 * theta.sin(), 0.0]);
        let grid = linear_grid(2.2e9, 3.5e9, 6501);
        let s = synth_spectrum(&SpectrumConfig::new(grid, f, 0.1)).unwrap();
        assert!(local_minima(&s, 1e-3).len() >= 3);
    }

    #[test]
    fn seeded_noise_is_reproducible() {
        let mut cfg = SpectrumConfig::new(linear_grid(2.8e9, 2.94e9, 101), field(0.0, 1, 0, 0), 0.1);
        cfg.noise_rms = 1e-12;
        cfg.seed = 7;
        let a = synth_spectrum(&cfg).unwrap();
        let b = synth_spectrum(&cfg).unwrap();
        assert_eq!(a, b);
        cfg.seed = 8;
        assert_ne!(a.current, synth_spectrum(&cfg).unwrap().current);
    }

    #[test]
    fn dark_spectrum_is_flat_zero() {
        let s = synth_spectrum(&SpectrumConfig::new(vec![2.87e9], field(0.0, 1, 0, 0), 0.0)).unwrap();
        assert_eq!(s.current, vec![0.0]);
    }

    #[test]
    fn magnet_law() {
        let m = MagnetModel::default();
        assert_eq!(magnet_field(&m, m.reference_distance).unwrap(), m.surface_field);
        assert_relative_eq!(magnet_field(&m, 2.0 * m.reference_distance).unwrap(), m.surface_field / 8.0);
        let d = distance_for_field(&m, 0.135).unwrap();
        assert_relative_eq!(magnet_field(&m, d).unwrap(), 0.135, max_relative = 1e-12);
        assert!(magnet_field(&m, 0.0).is_err());
    }

    #[test]
    fn rejects_unsorted_grid() {
        let cfg = SpectrumConfig::new(vec![3e9, 2e9], field(0.0, 1, 0, 0), 0.1);
        assert!(synth_spectrum(&cfg).is_err());
    }
}
