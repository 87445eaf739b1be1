//! Drift transport between the two graphitic electrodes.
//!
//! Carriers are generated homogeneously in the gap, so the photoconductivity
//! is σ = e·(τ_e·Γ_e·μ_e + τ_h·Γ_h·μ_h). At high field the drift velocity
//! saturates; the electrodes add an ohmic series resistance on each side.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;

/// Fraction of the linear velocity below which a point counts as saturated.
pub const OHMIC_THRESHOLD: f64 = 0.9;

const MAX_ITERATIONS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TransportParams {
    /// Electron drift mobility, m²/(V·s).
    pub mu_e: f64,
    /// Hole drift mobility, m²/(V·s).
    pub mu_h: f64,
    /// Electron lifetime, s.
    pub tau_e: f64,
    /// Hole lifetime, s.
    pub tau_h: f64,
    /// Electron saturation velocity, m/s.
    pub vsat_e: f64,
    /// Hole saturation velocity, m/s.
    pub vsat_h: f64,
    /// Electrode spacing, m.
    pub gap: f64,
    /// Effective collection area, m².
    pub cross_section: f64,
    /// Series resistance of one contact, Ω.
    pub contact_resistance: f64,
    /// Exponent β of the Caughey–Thomas velocity law (1 is the single-pole form).
    pub saturation_exponent: f64,
}

impl Default for TransportParams {
    fn default() -> Self {
        Self {
            mu_e: 0.08,
            mu_h: 0.08,
            tau_e: 6.8172e-11,
            tau_h: 6.8172e-11,
            vsat_e: 1.45e5,
            vsat_h: 1.45e5,
            gap: 10e-6,
            cross_section: 1e-9,
            contact_resistance: 240e3,
            saturation_exponent: 2.0,
        }
    }
}

impl TransportParams {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("mu_e", self.mu_e),
            ("mu_h", self.mu_h),
            ("tau_e", self.tau_e),
            ("tau_h", self.tau_h),
            ("vsat_e", self.vsat_e),
            ("vsat_h", self.vsat_h),
            ("gap", self.gap),
            ("cross_section", self.cross_section),
            ("saturation_exponent", self.saturation_exponent),
        ];
        for (name, v) in fields {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::invalid(name, "must be finite and > 0"));
            }
        }
        if !(self.contact_resistance >= 0.0) || !self.contact_resistance.is_finite() {
            return Err(Error::invalid("contact_resistance", "must be finite and >= 0"));
        }
        Ok(())
    }
}

/// Caughey–Thomas law v = μE / (1 + (μE/v_sat)^β)^(1/β).
pub fn drift_velocity(mu: f64, vsat: f64, exponent: f64, field: f64) -> f64 {
    let linear = mu * field.max(0.0);
    if linear == 0.0 {
        return 0.0;
    }
    let u = linear / vsat;
    if exponent == 1.0 {
        return linear / (1.0 + u);
    }
    // written in terms of u^-β to stay finite for very large fields
    if u > 1.0 {
        vsat / (1.0 + u.powf(-exponent)).powf(1.0 / exponent)
    } else {
        linear / (1.0 + u.powf(exponent)).powf(1.0 / exponent)
    }
}

/// Carrier generation per unit volume, s⁻¹·m⁻³.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Generation {
    pub gamma_e: f64,
    pub gamma_h: f64,
}

impl Generation {
    pub fn new(gamma_e: f64, gamma_h: f64) -> Self {
        Self { gamma_e, gamma_h }
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self::new(k * self.gamma_e, k * self.gamma_h)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Conductivity {
    /// S/m.
    pub sigma: f64,
    /// Electron density n = τ_e·Γ_e, m⁻³.
    pub n: f64,
    /// Hole density p = τ_h·Γ_h, m⁻³.
    pub p: f64,
}

pub fn conductivity(generation: Generation, params: &TransportParams) -> Conductivity {
    let n = params.tau_e * generation.gamma_e;
    let p = params.tau_h * generation.gamma_h;
    Conductivity {
        sigma: ELEMENTARY_CHARGE * (n * params.mu_e + p * params.mu_h),
        n,
        p,
    }
}

/// Low-field resistance of the photoconductive gap, Ω.
pub fn junction_resistance(generation: Generation, params: &TransportParams) -> f64 {
    params.gap / (conductivity(generation, params).sigma * params.cross_section)
}

/// Current at full velocity saturation, e·(n·v_sat,e + p·v_sat,h)·A.
pub fn saturation_current(generation: Generation, params: &TransportParams) -> f64 {
    let c = conductivity(generation, params);
    ELEMENTARY_CHARGE * (c.n * params.vsat_e + c.p * params.vsat_h) * params.cross_section
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Ohmic,
    Saturated,
}

impl Regime {
    pub fn code(self) -> u8 {
        match self {
            Regime::Ohmic => 0,
            Regime::Saturated => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IvPoint {
    /// Applied bias, V.
    pub voltage: f64,
    /// Junction field U_j/gap, V/m.
    pub field: f64,
    /// A.
    pub current: f64,
    pub regime: Regime,
}

impl IvPoint {
    /// Voltage across the gap.
    pub fn junction_voltage(&self, params: &TransportParams) -> f64 {
        self.field * params.gap
    }
}

/// Current through the gap at junction field `field`.
pub fn gap_current(field: f64, generation: Generation, params: &TransportParams) -> f64 {
    let c = conductivity(generation, params);
    let b = params.saturation_exponent;
    let ve = drift_velocity(params.mu_e, params.vsat_e, b, field);
    let vh = drift_velocity(params.mu_h, params.vsat_h, b, field);
    ELEMENTARY_CHARGE * (c.n * ve + c.p * vh) * params.cross_section
}

fn regime_at(field: f64, params: &TransportParams) -> Regime {
    let b = params.saturation_exponent;
    let ohmic = |mu: f64, vsat: f64| {
        let linear = mu * field;
        linear == 0.0 || drift_velocity(mu, vsat, b, field) >= OHMIC_THRESHOLD * linear
    };
    if ohmic(params.mu_e, params.vsat_e) && ohmic(params.mu_h, params.vsat_h) {
        Regime::Ohmic
    } else {
        Regime::Saturated
    }
}

/// Solves U = 2·R_C·I + U_j for the junction voltage U_j by bisection on the
/// monotone residual.
pub fn junction_current(voltage: f64, generation: Generation, params: &TransportParams) -> Result<IvPoint> {
    if !(voltage >= 0.0) || !voltage.is_finite() {
        return Err(Error::invalid("voltage", "must be finite and >= 0"));
    }
    if generation.gamma_e < 0.0 || generation.gamma_h < 0.0 {
        return Err(Error::invalid("generation", "rates must be >= 0"));
    }
    let series = 2.0 * params.contact_resistance;
    let residual = |uj: f64| uj + series * gap_current(uj / params.gap, generation, params) - voltage;
    let (mut lo, mut hi) = (0.0, voltage);
    let tol = 1e-10 * voltage;
    let mut uj = voltage;
    let mut converged = voltage == 0.0 || residual(voltage).abs() <= tol;
    let mut iterations = 0;
    while !converged {
        if iterations == MAX_ITERATIONS {
            return Err(Error::NoConvergence { iterations });
        }
        iterations += 1;
        uj = 0.5 * (lo + hi);
        let r = residual(uj);
        if r.abs() <= tol || hi - lo <= f64::EPSILON * voltage {
            converged = r.abs() <= tol;
            if !converged {
                return Err(Error::NoConvergence { iterations });
            }
        } else if r > 0.0 {
            hi = uj;
        } else {
            lo = uj;
        }
    }
    let field = uj / params.gap;
    Ok(IvPoint {
        voltage,
        field,
        current: gap_current(field, generation, params),
        regime: regime_at(field, params),
    })
}

pub fn iv_curve(voltages: &[f64], generation: Generation, params: &TransportParams) -> Result<Vec<IvPoint>> {
    if voltages.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::invalid("voltages", "must be sorted ascending"));
    }
    voltages
        .iter()
        .map(|&u| junction_current(u, generation, params))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn gen() -> Generation {
        Generation::new(2.86e24, 2.86e24)
    }

    #[test]
    fn velocity_limits() {
        let (mu, vs) = (0.08, 1.45e5);
        for b in [1.0, 2.0] {
            let e = 0.01 * vs / mu;
            assert_relative_eq!(drift_velocity(mu, vs, b, e), mu * e, max_relative = 1e-2);
            assert!(drift_velocity(mu, vs, b, 1e12) > 0.999 * vs);
            assert!(drift_velocity(mu, vs, b, 1e12) < vs);
        }
        assert_eq!(drift_velocity(mu, vs, 2.0, 0.0), 0.0);
    }

    #[test]
    fn single_pole_closed_form() {
        let v = drift_velocity(0.1, 1e5, 1.0, 1e6);
        assert_relative_eq!(v, 1e5 / 2.0, max_relative = 1e-15);
    }

    #[test]
    fn deviates_at_ten_kv_per_cm() {
        let p = TransportParams::default();
        let e = 1e6;
        let v = drift_velocity(p.mu_e, p.vsat_e, p.saturation_exponent, e);
        assert!(1.0 - v / (p.mu_e * e) >= 0.10);
    }

    #[test]
    fn conductivity_reductions() {
        let p = TransportParams::default();
        assert_eq!(conductivity(Generation::default(), &p).sigma, 0.0);
        let s1 = conductivity(gen(), &p).sigma;
        assert_relative_eq!(conductivity(gen().scaled(2.0), &p).sigma, 2.0 * s1, max_relative = 1e-15);
        let e_only = conductivity(Generation::new(3e18, 0.0), &p);
        assert_eq!(e_only.sigma, ELEMENTARY_CHARGE * p.tau_e * 3e18 * p.mu_e);
    }

    #[test]
    fn zero_bias_zero_current() {
        let pt = junction_current(0.0, gen(), &TransportParams::default()).unwrap();
        assert_eq!(pt.current, 0.0);
        assert_eq!(pt.regime, Regime::Ohmic);
    }

    #[test]
    fn ten_volts_over_ten_microns() {
        let pt = junction_current(10.0, gen(), &TransportParams::default()).unwrap();
        assert_relative_eq!(pt.field, 1e6, max_relative = 1e-3);
    }

    #[test]
    fn ohmic_limit_matches_conductivity() {
        let p = TransportParams::default();
        let u = 0.05;
        let pt = junction_current(u, gen(), &p).unwrap();
        let sigma = conductivity(gen(), &p).sigma;
        assert_relative_eq!(pt.current, sigma * u / p.gap * p.cross_section, max_relative = 1e-2);
    }

    #[test]
    fn saturates_at_sixty_volts() {
        let p = TransportParams::default();
        let pt = junction_current(60.0, gen(), &p).unwrap();
        assert!(pt.current >= 0.95 * saturation_current(gen(), &p));
        assert_eq!(pt.regime, Regime::Saturated);
        let doubled = junction_current(60.0, gen().scaled(2.0), &p).unwrap();
        assert_relative_eq!(doubled.current, 2.0 * pt.current, max_relative = 1e-3);
    }

    #[test]
    fn rejects_unsorted_or_negative() {
        let p = TransportParams::default();
        assert!(iv_curve(&[1.0, 0.5], gen(), &p).is_err());
        assert!(junction_current(-1.0, gen(), &p).is_err());
        let mut bad = p;
        bad.mu_e = -1.0;
        assert!(bad.validate().is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn iv_is_monotone_and_consistent(
            mu in 0.01f64..0.5,
            vsat in 3e4f64..3e5,
            beta in 1.0f64..3.0,
            rc in 0.0f64..1e7,
            g in 1e15f64..1e21,
            u1 in 0.0f64..100.0,
            du in 1e-3f64..50.0,
        ) {
            let p = TransportParams {
                mu_e: mu, mu_h: 0.5 * mu, vsat_e: vsat, vsat_h: vsat,
                saturation_exponent: beta, contact_resistance: rc,
                ..TransportParams::default()
            };
            let generation = Generation::new(g, 0.7 * g);
            let a = junction_current(u1, generation, &p).unwrap();
            let b = junction_current(u1 + du, generation, &p).unwrap();
            prop_assert!(b.current >= a.current);
            let rebuilt = 2.0 * rc * b.current + b.junction_voltage(&p);
            prop_assert!((rebuilt - b.voltage).abs() <= 1e-10 * b.voltage);
        }

        #[test]
        fn velocity_increasing_concave_bounded(
            mu in 0.01f64..0.5, vsat in 3e4f64..3e5, beta in 1.0f64..3.0,
            e in 0.0f64..1e8, de in 1.0f64..1e6,
        ) {
            let v = |x: f64| drift_velocity(mu, vsat, beta, x);
            let (v0, v1, v2) = (v(e), v(e + de), v(e + 2.0 * de));
            prop_assert!(v1 > v0);
            prop_assert!(v1 <= vsat);
            prop_assert!(v1 - v0 >= (v2 - v1) * (1.0 - 1e-9));
        }
    }
}
