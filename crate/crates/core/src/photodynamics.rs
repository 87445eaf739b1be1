//! Nine-level CW rate model of the NV⁻/NV⁰ charge and spin cycle under green
//! pumping and microwave drive.
//!
//! Levels, in population-vector order: NV⁻ ground triplet (m_s = −1, 0, +1),
//! NV⁻ excited triplet (−1, 0, +1), one lumped NV⁻ singlet, NV⁰ ground (²E)
//! and NV⁰ excited (²A). Triplet levels are field eigenstates labeled by their
//! dominant m_s character; spin-selective rates are rotated onto them with the
//! mixing matrices.
//!
//! Charge conversion is two-photon in both directions: ³E → CB ionization at
//! `ionize_coeff · P` releases an electron, and ²A → ³A₂ back-conversion at
//! `backconvert_coeff · P` releases a hole.

use nalgebra::{SMatrix, SVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::FieldProjection;
use crate::spin::{labeled_levels, LabeledLevels, Manifold, SpinConstants, TransitionSet, MS_MINUS, MS_PLUS, MS_ZERO};

pub const LEVELS: usize = 9;

pub const GS_MINUS: usize = 0;
pub const GS_ZERO: usize = 1;
pub const GS_PLUS: usize = 2;
pub const ES_MINUS: usize = 3;
pub const ES_ZERO: usize = 4;
pub const ES_PLUS: usize = 5;
pub const SINGLET: usize = 6;
pub const NV0_GS: usize = 7;
pub const NV0_ES: usize = 8;

/// Photon and level energies in eV. Documentation only; they do not enter the
/// dynamics.
pub mod energies {
    pub const PUMP_PHOTON: f64 = 2.33;
    pub const ES_TO_CONDUCTION_BAND: f64 = 0.7;
    pub const VALENCE_BAND_TO_NV0: f64 = 1.21;
    pub const NV_MINUS_ZPL: f64 = 1.945;
    pub const NV_ZERO_ZPL: f64 = 2.15;
}

pub type RateMatrix = SMatrix<f64, LEVELS, LEVELS>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhotophysicsParams {
    /// ³A₂ → ³E excitation per unit optical power, Hz/W.
    pub pump_rate_coeff: f64,
    /// ³E → ³A₂ radiative rate, Hz.
    pub radiative_rate: f64,
    /// ³E → singlet intersystem crossing from m_s = 0, Hz.
    pub isc_es_ms0: f64,
    /// ³E → singlet intersystem crossing from m_s = ±1, Hz.
    pub isc_es_ms1: f64,
    /// Fraction of singlet decay landing in m_s = 0.
    pub singlet_decay_ms0_frac: f64,
    /// Total singlet → ³A₂ decay rate, Hz.
    pub singlet_rate: f64,
    /// ³E → conduction band photoionization per unit power, Hz/W.
    pub ionize_coeff: f64,
    /// ²E → ²A excitation per unit power, Hz/W.
    pub nv0_pump_coeff: f64,
    /// ²A → ²E radiative rate, Hz.
    pub nv0_radiative: f64,
    /// ²A + VB electron → NV⁻ back-conversion per unit power, Hz/W.
    pub backconvert_coeff: f64,
    /// NV density, m⁻³.
    pub nv_density: f64,
    /// Optically excited volume, m³.
    pub excitation_volume: f64,
}

impl Default for PhotophysicsParams {
    fn default() -> Self {
        Self {
            pump_rate_coeff: 2.17e8,
            radiative_rate: 32.2e6,
            isc_es_ms0: 12.6e6,
            isc_es_ms1: 80.7e6,
            singlet_decay_ms0_frac: 3.1 / 8.3,
            singlet_rate: 8.3e6,
            ionize_coeff: 5.0e5,
            nv0_pump_coeff: 4.0e8,
            nv0_radiative: 52.6e6,
            backconvert_coeff: 5.0e5,
            nv_density: 5.3e20,
            excitation_volume: 1.77e-17,
        }
    }
}

impl PhotophysicsParams {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("pump_rate_coeff", self.pump_rate_coeff),
            ("radiative_rate", self.radiative_rate),
            ("isc_es_ms0", self.isc_es_ms0),
            ("isc_es_ms1", self.isc_es_ms1),
            ("singlet_decay_ms0_frac", self.singlet_decay_ms0_frac),
            ("singlet_rate", self.singlet_rate),
            ("ionize_coeff", self.ionize_coeff),
            ("nv0_pump_coeff", self.nv0_pump_coeff),
            ("nv0_radiative", self.nv0_radiative),
            ("backconvert_coeff", self.backconvert_coeff),
            ("nv_density", self.nv_density),
            ("excitation_volume", self.excitation_volume),
        ];
        for (name, v) in fields {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::invalid(name, "rates and densities must be finite and >= 0"));
            }
        }
        if self.singlet_decay_ms0_frac > 1.0 {
            return Err(Error::invalid("singlet_decay_ms0_frac", "must lie in [0, 1]"));
        }
        if !(self.ionize_coeff > 0.0) {
            return Err(Error::invalid("ionize_coeff", "must be > 0"));
        }
        Ok(())
    }

    /// True when the m_s = ±1 excited states cross to the singlet faster than
    /// m_s = 0, the source of the negative-going resonance.
    pub fn is_spin_selective(&self) -> bool {
        self.isc_es_ms1 > self.isc_es_ms0
    }

    fn isc(&self, ms: usize) -> f64 {
        if ms == MS_ZERO {
            self.isc_es_ms0
        } else {
            self.isc_es_ms1
        }
    }

    fn singlet_branch(&self, ms: usize) -> f64 {
        if ms == MS_ZERO {
            self.singlet_decay_ms0_frac
        } else {
            0.5 * (1.0 - self.singlet_decay_ms0_frac)
        }
    }
}

/// Microwave drive settings that do not depend on the MW frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DriveParams {
    /// Rabi frequency Ω, s⁻¹.
    pub rabi: f64,
    /// Optical-power-independent transverse relaxation rate, s⁻¹.
    pub dephasing: f64,
    /// Pump-induced dephasing per unit optical power, s⁻¹/W.
    pub optical_dephasing_coeff: f64,
}

impl Default for DriveParams {
    fn default() -> Self {
        Self {
            rabi: 1.775e7,
            dephasing: 1.0e6,
            optical_dephasing_coeff: 4.17e8,
        }
    }
}

impl DriveParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.rabi >= 0.0) {
            return Err(Error::invalid("rabi", "must be >= 0"));
        }
        if !(self.dephasing > 0.0) {
            return Err(Error::invalid("dephasing", "must be > 0"));
        }
        if !(self.optical_dephasing_coeff >= 0.0) {
            return Err(Error::invalid("optical_dephasing_coeff", "must be >= 0"));
        }
        Ok(())
    }

    /// Total Γ₂ under optical pumping at `power`.
    pub fn dephasing_at(&self, power: f64) -> f64 {
        self.dephasing + self.optical_dephasing_coeff * power
    }

    pub fn drive(&self, frequency: f64, power: f64, target: MwTarget) -> MwDrive {
        MwDrive {
            frequency,
            rabi: self.rabi,
            dephasing: self.dephasing_at(power),
            target,
            on: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MwTarget {
    MinusOne,
    PlusOne,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MwDrive {
    pub frequency: f64,
    pub rabi: f64,
    /// Γ₂, s⁻¹. The Lorentzian half width in Hz is Γ₂/2π.
    pub dephasing: f64,
    pub target: MwTarget,
    pub on: bool,
}

impl MwDrive {
    pub fn off() -> Self {
        Self {
            frequency: 0.0,
            rabi: 0.0,
            dephasing: 1.0,
            target: MwTarget::Both,
            on: false,
        }
    }

    /// Peak incoherent transfer rate Ω²/(2Γ₂).
    pub fn peak_rate(&self) -> f64 {
        self.rabi * self.rabi / (2.0 * self.dephasing)
    }

    /// Incoherent transfer rate for a transition at `resonance` Hz.
    pub fn rate(&self, resonance: f64) -> f64 {
        if !self.on {
            return 0.0;
        }
        let x = 2.0 * std::f64::consts::PI * (self.frequency - resonance) / self.dephasing;
        self.peak_rate() / (1.0 + x * x)
    }

    /// (W₋, W₊) for the ground-state transitions in `t`.
    pub fn rates(&self, t: &TransitionSet) -> [f64; 2] {
        let (m, p) = match self.target {
            MwTarget::MinusOne => (true, false),
            MwTarget::PlusOne => (false, true),
            MwTarget::Both => (true, true),
        };
        [
            if m { self.rate(t.f_minus) } else { 0.0 },
            if p { self.rate(t.f_plus) } else { 0.0 },
        ]
    }
}

/// Labeled ground and excited eigenlevels of one NV family in a given field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FamilySpin {
    pub gs: LabeledLevels,
    pub es: LabeledLevels,
    pub gs_transitions: TransitionSet,
    pub es_transitions: TransitionSet,
}

impl FamilySpin {
    pub fn new(constants: &SpinConstants, projection: FieldProjection) -> Self {
        let gs = labeled_levels(&constants.system(Manifold::Ground, projection));
        let es = labeled_levels(&constants.system(Manifold::Excited, projection));
        Self {
            gs,
            es,
            gs_transitions: gs.transitions(Manifold::Ground),
            es_transitions: es.transitions(Manifold::Excited),
        }
    }

    pub fn zero_field() -> Self {
        Self::new(&SpinConstants::default(), FieldProjection::aligned(0.0))
    }
}

pub fn build_rate_matrix(
    params: &PhotophysicsParams,
    power: f64,
    mw: &MwDrive,
    spin: &FamilySpin,
) -> Result<RateMatrix> {
    if !(power >= 0.0) || !power.is_finite() {
        return Err(Error::invalid("power", "optical power must be finite and >= 0"));
    }
    Ok(rate_matrix_with_drive(params, power, mw.rates(&spin.gs_transitions), spin))
}

/// Rate matrix with explicit MW transfer rates (W₋, W₊) between the m_s = 0
/// ground eigenstate and the two others. Column `j` holds the outflow of
/// level `j`; columns sum to zero.
pub fn rate_matrix_with_drive(
    params: &PhotophysicsParams,
    power: f64,
    drive: [f64; 2],
    spin: &FamilySpin,
) -> RateMatrix {
    let mut m = RateMatrix::zeros();
    let mut add = |to: usize, from: usize, rate: f64| {
        if rate > 0.0 {
            m[(to, from)] += rate;
            m[(from, from)] -= rate;
        }
    };
    let gs = &spin.gs.mixing.0;
    let es = &spin.es.mixing.0;
    let pump = params.pump_rate_coeff * power;

    // spin-conserving optical transitions between rotated eigenbases
    for i in 0..3 {
        for k in 0..3 {
            let overlap: f64 = (0..3).map(|j| gs[i][j] * es[k][j]).sum();
            add(ES_MINUS + k, GS_MINUS + i, pump * overlap);
            add(GS_MINUS + i, ES_MINUS + k, params.radiative_rate * overlap);
        }
    }
    for k in 0..3 {
        let isc: f64 = (0..3).map(|j| es[k][j] * params.isc(j)).sum();
        add(SINGLET, ES_MINUS + k, isc);
        add(NV0_GS, ES_MINUS + k, params.ionize_coeff * power);
    }
    for i in 0..3 {
        let branch: f64 = (0..3).map(|j| gs[i][j] * params.singlet_branch(j)).sum();
        add(GS_MINUS + i, SINGLET, params.singlet_rate * branch);
        // back-conversion repopulates the three sublevels evenly
        add(GS_MINUS + i, NV0_ES, params.backconvert_coeff * power / 3.0);
    }
    add(NV0_ES, NV0_GS, params.nv0_pump_coeff * power);
    add(NV0_GS, NV0_ES, params.nv0_radiative);

    for (w, label) in drive.iter().zip([MS_MINUS, MS_PLUS]) {
        add(GS_MINUS + label, GS_ZERO, *w);
        add(GS_ZERO, GS_MINUS + label, *w);
    }
    m
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Populations(pub [f64; LEVELS]);

impl Populations {
    /// Dark-state convention: all population in the NV⁻ ground triplet,
    /// spread evenly across the three sublevels.
    pub fn dark() -> Self {
        let mut p = [0.0; LEVELS];
        p[GS_MINUS] = 1.0 / 3.0;
        p[GS_ZERO] = 1.0 / 3.0;
        p[GS_PLUS] = 1.0 / 3.0;
        Populations(p)
    }

    pub fn ground(&self) -> [f64; 3] {
        [self.0[GS_MINUS], self.0[GS_ZERO], self.0[GS_PLUS]]
    }

    pub fn excited(&self) -> [f64; 3] {
        [self.0[ES_MINUS], self.0[ES_ZERO], self.0[ES_PLUS]]
    }

    pub fn excited_total(&self) -> f64 {
        self.excited().iter().sum()
    }

    pub fn singlet(&self) -> f64 {
        self.0[SINGLET]
    }

    pub fn nv0_ground(&self) -> f64 {
        self.0[NV0_GS]
    }

    pub fn nv0_excited(&self) -> f64 {
        self.0[NV0_ES]
    }

    pub fn nv_minus_fraction(&self) -> f64 {
        1.0 - self.nv0_ground() - self.nv0_excited()
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }
}

/// Number of closed communicating classes of the transition graph.
fn closed_classes(m: &RateMatrix) -> usize {
    let mut reach = [[false; LEVELS]; LEVELS];
    for (i, row) in reach.iter_mut().enumerate() {
        row[i] = true;
        for (j, r) in row.iter_mut().enumerate() {
            if i != j && m[(j, i)] > 0.0 {
                *r = true;
            }
        }
    }
    for k in 0..LEVELS {
        for i in 0..LEVELS {
            if reach[i][k] {
                for j in 0..LEVELS {
                    if reach[k][j] {
                        reach[i][j] = true;
                    }
                }
            }
        }
    }
    let recurrent: Vec<usize> = (0..LEVELS)
        .filter(|&i| (0..LEVELS).all(|j| !reach[i][j] || reach[j][i]))
        .collect();
    let mut seen = [false; LEVELS];
    let mut classes = 0;
    for &i in &recurrent {
        if !seen[i] {
            classes += 1;
            for &j in &recurrent {
                if reach[i][j] {
                    seen[j] = true;
                }
            }
        }
    }
    classes
}

/// Grassmann–Taksar–Heyman state reduction. Subtraction-free, so small
/// flows keep full relative accuracy. Needs an irreducible chain.
fn gth(m: &RateMatrix) -> Option<[f64; LEVELS]> {
    // q[i][j]: rate i -> j
    let mut q = [[0.0; LEVELS]; LEVELS];
    for (i, row) in q.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            if i != j {
                *v = m[(j, i)];
            }
        }
    }
    let mut out = [0.0; LEVELS];
    for k in (1..LEVELS).rev() {
        let s: f64 = q[k][..k].iter().sum();
        if !(s > 0.0) {
            return None;
        }
        out[k] = s;
        for i in 0..k {
            let f = q[i][k] / s;
            if f != 0.0 {
                for j in 0..k {
                    if i != j {
                        q[i][j] += f * q[k][j];
                    }
                }
            }
        }
    }
    let mut pi = [0.0; LEVELS];
    pi[0] = 1.0;
    for k in 1..LEVELS {
        pi[k] = (0..k).map(|i| pi[i] * q[i][k]).sum::<f64>() / out[k];
    }
    let total: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|v| *v /= total);
    Some(pi)
}

fn lu_null_vector(m: &RateMatrix, scale: f64) -> Result<[f64; LEVELS]> {
    let mut a = m / scale;
    for j in 0..LEVELS {
        a[(LEVELS - 1, j)] = 1.0;
    }
    let mut b = SVector::<f64, LEVELS>::zeros();
    b[LEVELS - 1] = 1.0;
    let lu = a.lu();
    let mut x = lu
        .solve(&b)
        .ok_or_else(|| Error::SingularRateMatrix("LU solve failed".into()))?;
    let r = b - a * x;
    if let Some(dx) = lu.solve(&r) {
        x += dx;
    }
    let mut n = [0.0; LEVELS];
    for (k, v) in n.iter_mut().enumerate() {
        if x[k] < -1e-9 {
            return Err(Error::SingularRateMatrix(format!(
                "negative population {:.3e} in level {k}",
                x[k]
            )));
        }
        *v = x[k].max(0.0);
    }
    let total: f64 = n.iter().sum();
    n.iter_mut().for_each(|v| *v /= total);
    Ok(n)
}

/// Normalized null vector of a conservative rate matrix.
///
/// Irreducible chains use state reduction; chains with transient levels fall
/// back to an LU solve with one balance row replaced by normalization. Fails
/// when the level graph admits more than one stationary distribution.
pub fn steady_state(m: &RateMatrix) -> Result<Populations> {
    let classes = closed_classes(m);
    if classes != 1 {
        return Err(Error::NonUniqueSteadyState {
            closed_classes: classes,
        });
    }
    let scale = m.amax();
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::SingularRateMatrix("empty or non-finite matrix".into()));
    }
    let n = match gth(m) {
        Some(n) => n,
        None => lu_null_vector(m, scale)?,
    };
    let residual = (m * SVector::from(n)).amax();
    if !(residual <= 1e-10 * scale) {
        return Err(Error::SingularRateMatrix(format!(
            "residual {residual:.3e} exceeds tolerance"
        )));
    }
    Ok(Populations(n))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteadyStateResult {
    pub populations: Populations,
    /// Electron generation per unit volume, s⁻¹·m⁻³.
    pub gamma_e: f64,
    /// Hole generation per unit volume, s⁻¹·m⁻³.
    pub gamma_h: f64,
    /// Carrier pairs per second from the excited volume.
    pub photocurrent_flux: f64,
    /// Photons per second from the excited volume.
    pub pl_rate: f64,
}

/// (Γ_e, Γ_h) per unit volume from steady-state populations.
///
/// Electrons come from ³E ionization, holes from the ²A back-conversion step
/// that captures a valence-band electron.
pub fn carrier_rates(populations: &Populations, params: &PhotophysicsParams, power: f64) -> (f64, f64) {
    let gamma_e = params.ionize_coeff * power * populations.excited_total() * params.nv_density;
    let gamma_h = params.backconvert_coeff * power * populations.nv0_excited() * params.nv_density;
    (gamma_e, gamma_h)
}

fn result_from(populations: Populations, params: &PhotophysicsParams, power: f64) -> SteadyStateResult {
    let (gamma_e, gamma_h) = carrier_rates(&populations, params, power);
    let pl_per_nv = params.radiative_rate * populations.excited_total()
        + params.nv0_radiative * populations.nv0_excited();
    SteadyStateResult {
        populations,
        gamma_e,
        gamma_h,
        photocurrent_flux: gamma_e * params.excitation_volume,
        pl_rate: pl_per_nv * params.nv_density * params.excitation_volume,
    }
}

/// Steady state with explicit drive rates; P = 0 returns the dark state.
pub fn solve_with_drive(
    params: &PhotophysicsParams,
    power: f64,
    drive: [f64; 2],
    spin: &FamilySpin,
) -> Result<SteadyStateResult> {
    if !(power >= 0.0) || !power.is_finite() {
        return Err(Error::invalid("power", "optical power must be finite and >= 0"));
    }
    if power == 0.0 {
        return Ok(result_from(Populations::dark(), params, 0.0));
    }
    let m = rate_matrix_with_drive(params, power, drive, spin);
    Ok(result_from(steady_state(&m)?, params, power))
}

pub fn solve(
    params: &PhotophysicsParams,
    power: f64,
    mw: &MwDrive,
    spin: &FamilySpin,
) -> Result<SteadyStateResult> {
    solve_with_drive(params, power, mw.rates(&spin.gs_transitions), spin)
}

/// Closed-form power law for the NV photocurrent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PowerCurveParams {
    /// Saturation power of the ³E ↔ ³A₂ transition, W.
    pub alpha: f64,
    /// Inverse responsivity scale, W/A.
    pub beta: f64,
}

impl Default for PowerCurveParams {
    fn default() -> Self {
        Self {
            alpha: 75.5e-3,
            beta: 7.04,
        }
    }
}

impl PowerCurveParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) {
            return Err(Error::invalid("alpha", "must be > 0"));
        }
        if !(self.beta > 0.0) {
            return Err(Error::invalid("beta", "must be > 0"));
        }
        Ok(())
    }
}

/// I = (P²/(αβ)) / (1 + P/α).
pub fn photocurrent_model(power: f64, params: &PowerCurveParams) -> f64 {
    let (a, b) = (params.alpha, params.beta);
    power * power / (a * b) / (1.0 + power / a)
}

/// Relative drop of the electron generation rate when `mw` is applied.
pub fn pdmr_contrast(
    params: &PhotophysicsParams,
    power: f64,
    mw: &MwDrive,
    spin: &FamilySpin,
) -> Result<f64> {
    if !mw.on {
        return Err(Error::invalid("mw", "drive must be on to measure contrast"));
    }
    contrast_with_drive(params, power, mw.rates(&spin.gs_transitions), spin)
}

pub fn contrast_with_drive(
    params: &PhotophysicsParams,
    power: f64,
    drive: [f64; 2],
    spin: &FamilySpin,
) -> Result<f64> {
    let off = solve_with_drive(params, power, [0.0, 0.0], spin)?.gamma_e;
    if !(off > 0.0) {
        return Err(Error::ZeroCurrent);
    }
    let on = solve_with_drive(params, power, drive, spin)?.gamma_e;
    Ok((off - on) / off)
}

/// Saturation behaviour of one driven transition group.
///
/// The generation drop follows ΔΓ(W) = A·W / (1 + W/W_s) exactly when one
/// transition (or a symmetric pair) is driven, because the drive is a rank-one
/// perturbation of the rate matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveSaturation {
    /// Drop in Γ_e at the probe rate, s⁻¹·m⁻³.
    pub drop: f64,
    /// Saturation rate W_s, s⁻¹ (infinite in the linear regime).
    pub saturation_rate: f64,
}

/// Probes the response to drive rate `w` applied to the selected
/// transitions (`[minus, plus]`).
pub fn drive_saturation(
    params: &PhotophysicsParams,
    power: f64,
    spin: &FamilySpin,
    targets: [bool; 2],
    w: f64,
) -> Result<DriveSaturation> {
    let pick = |rate: f64| [if targets[0] { rate } else { 0.0 }, if targets[1] { rate } else { 0.0 }];
    let off = solve_with_drive(params, power, [0.0, 0.0], spin)?.gamma_e;
    let d1 = off - solve_with_drive(params, power, pick(w), spin)?.gamma_e;
    if !(w > 0.0) || d1.abs() <= 1e-14 * off {
        return Ok(DriveSaturation {
            drop: d1.max(0.0),
            saturation_rate: f64::INFINITY,
        });
    }
    let w2 = 4.0 * w;
    let d2 = off - solve_with_drive(params, power, pick(w2), spin)?.gamma_e;
    // (d1/w)/(d2/w2) = (1 + w2/Ws)/(1 + w/Ws)
    let r = (d1 / w) / (d2 / w2);
    let saturation_rate = if r - 1.0 > 1e-12 {
        (w2 - r * w) / (r - 1.0)
    } else {
        f64::INFINITY
    };
    Ok(DriveSaturation {
        drop: d1,
        saturation_rate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin::{D_GROUND, GAMMA_E};
    use approx::assert_relative_eq;

    fn p() -> PhotophysicsParams {
        PhotophysicsParams::default()
    }

    fn resonant(power: f64) -> MwDrive {
        DriveParams::default().drive(D_GROUND, power, MwTarget::Both)
    }

    #[test]
    fn dark_matrix_has_only_decays() {
        let m = build_rate_matrix(&p(), 0.0, &MwDrive::off(), &FamilySpin::zero_field()).unwrap();
        for i in 0..3 {
            for k in 3..6 {
                assert_eq!(m[(k, i)], 0.0, "no pumping without light");
            }
        }
        assert_eq!(m[(NV0_GS, ES_ZERO)], 0.0);
        assert_eq!(m[(NV0_ES, NV0_GS)], 0.0);
        assert!(m[(GS_ZERO, ES_ZERO)] > 0.0);
        assert!(m[(SINGLET, ES_PLUS)] > 0.0);
        assert!(m[(GS_ZERO, SINGLET)] > 0.0);
    }

    #[test]
    fn columns_conserve_population() {
        let spin = FamilySpin::new(&SpinConstants::default(), FieldProjection::from_components(0.03, 0.01));
        let m = build_rate_matrix(&p(), 0.2, &resonant(0.2), &spin).unwrap();
        for j in 0..LEVELS {
            let s: f64 = (0..LEVELS).map(|i| m[(i, j)]).sum();
            assert!(s.abs() <= 1e-12 * m.amax());
        }
    }

    #[test]
    fn identity_mixing_uses_bare_rates() {
        let m = build_rate_matrix(&p(), 0.1, &MwDrive::off(), &FamilySpin::zero_field()).unwrap();
        assert_eq!(m[(SINGLET, ES_ZERO)], p().isc_es_ms0);
        assert_eq!(m[(SINGLET, ES_MINUS)], p().isc_es_ms1);
        assert_eq!(m[(SINGLET, ES_PLUS)], p().isc_es_ms1);
    }

    #[test]
    fn rejects_negative_power() {
        assert!(build_rate_matrix(&p(), -1.0, &MwDrive::off(), &FamilySpin::zero_field()).is_err());
    }

    #[test]
    fn dark_state_convention() {
        let m = build_rate_matrix(&p(), 0.0, &MwDrive::off(), &FamilySpin::zero_field()).unwrap();
        assert!(matches!(steady_state(&m), Err(Error::NonUniqueSteadyState { .. })));
        let r = solve(&p(), 0.0, &MwDrive::off(), &FamilySpin::zero_field()).unwrap();
        assert_eq!(r.populations, Populations::dark());
        assert_eq!(r.photocurrent_flux, 0.0);
        assert_eq!(carrier_rates(&r.populations, &p(), 0.0), (0.0, 0.0));
    }

    #[test]
    fn optical_spin_polarization() {
        let r = solve(&p(), 0.1, &MwDrive::off(), &FamilySpin::zero_field()).unwrap();
        let g = r.populations.ground();
        assert!(g[1] > g[0] && g[1] > g[2]);
        assert!((r.populations.sum() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn resonance_lowers_ionization() {
        let spin = FamilySpin::zero_field();
        let off = solve(&p(), 0.1, &MwDrive::off(), &spin).unwrap();
        let on = solve(&p(), 0.1, &resonant(0.1), &spin).unwrap();
        let es_pm = |r: &SteadyStateResult| r.populations.excited()[0] + r.populations.excited()[2];
        assert!(es_pm(&on) > es_pm(&off));
        assert!(on.gamma_e < off.gamma_e);
    }

    #[test]
    fn charge_cycle_closes() {
        for power in [1e-4, 1e-2, 0.1, 1.0, 10.0] {
            let r = solve(&p(), power, &resonant(power), &FamilySpin::zero_field()).unwrap();
            assert_relative_eq!(r.gamma_e, r.gamma_h, max_relative = 1e-8);
        }
    }

    #[test]
    fn generation_linear_in_ionization_coefficient() {
        let r = solve(&p(), 0.1, &MwDrive::off(), &FamilySpin::zero_field()).unwrap();
        let mut doubled = p();
        doubled.ionize_coeff *= 2.0;
        let (ge2, _) = carrier_rates(&r.populations, &doubled, 0.1);
        assert_relative_eq!(ge2, 2.0 * r.gamma_e, max_relative = 1e-15);
    }

    #[test]
    fn transient_levels_get_no_population() {
        // a level with outflow but no inflow
        let mut m = RateMatrix::zeros();
        m[(1, 0)] = 2.0;
        m[(0, 0)] = -2.0;
        for k in 1..LEVELS {
            let next = if k + 1 == LEVELS { 1 } else { k + 1 };
            m[(next, k)] += 1.0;
            m[(k, k)] -= 1.0;
        }
        let n = steady_state(&m).unwrap();
        assert_eq!(n.0[0], 0.0);
        for k in 1..LEVELS {
            assert_relative_eq!(n.0[k], 1.0 / 8.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn power_law_identities() {
        let c = PowerCurveParams::default();
        assert_eq!(photocurrent_model(0.0, &c), 0.0);
        assert_relative_eq!(photocurrent_model(c.alpha, &c), c.alpha / (2.0 * c.beta), max_relative = 1e-15);
    }

    #[test]
    fn no_spin_selectivity_no_contrast() {
        let mut q = p();
        q.isc_es_ms1 = q.isc_es_ms0;
        q.singlet_decay_ms0_frac = 1.0 / 3.0;
        let c = pdmr_contrast(&q, 0.1, &resonant(0.1), &FamilySpin::zero_field()).unwrap();
        assert!(c.abs() < 1e-12, "contrast {c}");
    }

    #[test]
    fn contrast_needs_current() {
        let r = pdmr_contrast(&p(), 0.0, &resonant(0.0), &FamilySpin::zero_field());
        assert!(matches!(r, Err(Error::ZeroCurrent)));
    }

    #[test]
    fn reference_contrast() {
        let c = pdmr_contrast(&p(), 0.1, &resonant(0.1), &FamilySpin::zero_field()).unwrap();
        assert!((c - 0.12).abs() < 0.01, "contrast {c}");
    }

    #[test]
    fn saturation_probe_is_exact_for_single_transition() {
        let spin = FamilySpin::new(&SpinConstants::default(), FieldProjection::aligned(5e-3));
        let w = 3e6;
        let s = drive_saturation(&p(), 0.1, &spin, [true, false], w).unwrap();
        let off = solve_with_drive(&p(), 0.1, [0.0, 0.0], &spin).unwrap().gamma_e;
        let a = s.drop * (1.0 + w / s.saturation_rate) / w;
        for w3 in [1e5, 1e7, 1e9] {
            let d = off - solve_with_drive(&p(), 0.1, [w3, 0.0], &spin).unwrap().gamma_e;
            assert_relative_eq!(d, a * w3 / (1.0 + w3 / s.saturation_rate), max_relative = 1e-7);
        }
    }

    #[test]
    fn quench_at_gslac() {
        let consts = SpinConstants::default();
        let power = 0.1;
        let contrast_at = |b: f64| {
            let spin = FamilySpin::new(&consts, FieldProjection::from_components(b, 0.5e-3));
            let mw = DriveParams::default().drive(spin.gs_transitions.f_minus, power, MwTarget::MinusOne);
            pdmr_contrast(&p(), power, &mw, &spin).unwrap()
        };
        let mid = contrast_at(0.09);
        assert!(contrast_at(D_GROUND / GAMMA_E) < 0.5 * mid);
        assert!(contrast_at(0.051) < 0.5 * mid);
    }
}
