//! Calibration profiles: named TOML files holding a full [`Calibration`],
//! with a provenance note per key.
//!
//! ```toml
//! name = "my-device"
//!
//! [transport]
//! gap = 7.5e-6
//! ```
//!
//! Omitted keys take the built-in defaults.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::calibration::{Calibration, ReadoutParams};
use crate::error::{Error, Result};
use crate::photodynamics::{DriveParams, PhotophysicsParams, PowerCurveParams};
use crate::spin::SpinConstants;
use crate::transport::TransportParams;

pub const BUILTIN_PROFILE: &str = "paper-2023-calibration";

/// Directory searched for `<name>.toml` profiles.
pub const PROFILE_DIR_ENV: &str = "PDMR_PROFILE_DIR";

/// Electrode spacings of the fabricated device set.
pub const GAP_PRESETS: [(&str, f64); 4] = [("5um", 5e-6), ("7.5um", 7.5e-6), ("10um", 10e-6), ("20um", 20e-6)];

/// Accepts a preset name (`10um`) or a length in metres (`10e-6`).
pub fn parse_gap(s: &str) -> Result<f64> {
    let s = s.trim();
    if let Some((_, g)) = GAP_PRESETS.iter().find(|(name, _)| *name == s) {
        return Ok(*g);
    }
    match s.parse::<f64>() {
        Ok(g) if g > 0.0 && g.is_finite() => Ok(g),
        _ => Err(Error::invalid(
            "gap",
            format!("`{s}` is neither a preset (5um, 7.5um, 10um, 20um) nor a positive length"),
        )),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Provenance {
    /// Reported for the device or read off its data.
    Measured,
    /// Typical value from the NV or diamond literature.
    Literature,
    /// Tuned so the model reproduces the measured observables.
    Calibrated,
    /// Modelling choice without a direct measurement.
    Assumed,
    /// Set explicitly in a profile file.
    Override,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Provenance::Measured => "measured",
            Provenance::Literature => "literature",
            Provenance::Calibrated => "calibrated",
            Provenance::Assumed => "assumed",
            Provenance::Override => "override",
        })
    }
}

const BUILTIN_PROVENANCE: &[(&str, Provenance)] = {
    use Provenance::*;
    &[
        ("spin.d_gs", Measured),
        ("spin.d_es", Measured),
        ("spin.gamma", Measured),
        ("photophysics.pump_rate_coeff", Calibrated),
        ("photophysics.radiative_rate", Literature),
        ("photophysics.isc_es_ms0", Literature),
        ("photophysics.isc_es_ms1", Literature),
        ("photophysics.singlet_decay_ms0_frac", Literature),
        ("photophysics.singlet_rate", Literature),
        ("photophysics.ionize_coeff", Calibrated),
        ("photophysics.nv0_pump_coeff", Calibrated),
        ("photophysics.nv0_radiative", Literature),
        ("photophysics.backconvert_coeff", Calibrated),
        ("photophysics.nv_density", Measured),
        ("photophysics.excitation_volume", Measured),
        ("drive.rabi", Calibrated),
        ("drive.dephasing", Literature),
        ("drive.optical_dephasing_coeff", Calibrated),
        ("transport.mu_e", Literature),
        ("transport.mu_h", Literature),
        ("transport.tau_e", Calibrated),
        ("transport.tau_h", Calibrated),
        ("transport.vsat_e", Literature),
        ("transport.vsat_h", Literature),
        ("transport.gap", Measured),
        ("transport.cross_section", Assumed),
        ("transport.contact_resistance", Measured),
        ("transport.saturation_exponent", Calibrated),
        ("power_curve.alpha", Measured),
        ("power_curve.beta", Measured),
        ("readout.bias", Measured),
        ("readout.background_current", Assumed),
        ("readout.es_relative_depth", Assumed),
        ("readout.family_weights", Assumed),
        ("readout.mw_target", Assumed),
    ]
};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProfileFile {
    name: Option<String>,
    #[serde(default)]
    spin: SpinConstants,
    #[serde(default)]
    photophysics: PhotophysicsParams,
    #[serde(default)]
    drive: DriveParams,
    #[serde(default)]
    transport: TransportParams,
    #[serde(default)]
    power_curve: PowerCurveParams,
    #[serde(default)]
    readout: ReadoutParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    pub name: String,
    pub calibration: Calibration,
    /// Keyed `section.key`.
    pub provenance: BTreeMap<String, Provenance>,
}

impl Profile {
    pub fn builtin() -> Self {
        Self {
            name: BUILTIN_PROFILE.to_string(),
            calibration: Calibration::default(),
            provenance: BUILTIN_PROVENANCE.iter().map(|(k, p)| (k.to_string(), *p)).collect(),
        }
    }

    pub fn parse(text: &str, fallback_name: &str) -> Result<Self> {
        let file: ProfileFile = toml::from_str(text).map_err(|e| Error::Profile(e.to_string()))?;
        let raw: toml::Table = toml::from_str(text).map_err(|e| Error::Profile(e.to_string()))?;
        let calibration = Calibration {
            spin: file.spin,
            photophysics: file.photophysics,
            drive: file.drive,
            transport: file.transport,
            power_curve: file.power_curve,
            readout: file.readout,
        };
        calibration
            .validate()
            .map_err(|e| Error::Profile(e.to_string()))?;
        let mut profile = Profile::builtin();
        profile.name = file.name.unwrap_or_else(|| fallback_name.to_string());
        profile.calibration = calibration;
        for (section, value) in &raw {
            if let toml::Value::Table(keys) = value {
                for key in keys.keys() {
                    profile
                        .provenance
                        .insert(format!("{section}.{key}"), Provenance::Override);
                }
            }
        }
        Ok(profile)
    }

    /// `section.key = value` lines with the provenance of each key.
    pub fn describe(&self) -> Result<Vec<(String, String, Provenance)>> {
        let value = toml::Value::try_from(self.calibration).map_err(|e| Error::Profile(e.to_string()))?;
        let mut out = Vec::new();
        if let toml::Value::Table(sections) = value {
            for (section, body) in sections {
                if let toml::Value::Table(keys) = body {
                    for (key, v) in keys {
                        let full = format!("{section}.{key}");
                        let prov = self
                            .provenance
                            .get(&full)
                            .copied()
                            .unwrap_or(Provenance::Assumed);
                        out.push((full, v.to_string(), prov));
                    }
                }
            }
        }
        Ok(out)
    }
}

pub fn load_profile(path: &Path) -> Result<Profile> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Profile(format!("{}: {e}", path.display())))?;
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "custom".to_string());
    Profile::parse(&text, &stem).map_err(|e| match e {
        Error::Profile(msg) => Error::Profile(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Resolves a profile by built-in name, file path, or name inside the
/// profile directory.
pub fn resolve_profile(name: Option<&str>) -> Result<Profile> {
    let Some(name) = name else {
        return Ok(Profile::builtin());
    };
    if name == BUILTIN_PROFILE {
        return Ok(Profile::builtin());
    }
    let direct = PathBuf::from(name);
    if direct.is_file() {
        return load_profile(&direct);
    }
    if let Some(dir) = std::env::var_os(PROFILE_DIR_ENV) {
        let candidate = Path::new(&dir).join(format!("{name}.toml"));
        if candidate.is_file() {
            return load_profile(&candidate);
        }
    }
    Err(Error::Profile(format!("unknown profile `{name}`")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin::lac_fields;

    #[test]
    fn empty_file_gives_defaults() {
        let p = Profile::parse("", "x").unwrap();
        assert_eq!(p.calibration, Calibration::default());
        assert_eq!(p.provenance, Profile::builtin().provenance);
    }

    #[test]
    fn override_propagates() {
        let p = Profile::parse("name = \"alt\"\n[spin]\nd_es = 1.5e9\n", "x").unwrap();
        assert_eq!(p.name, "alt");
        let s = p.calibration.spin;
        let (_, es) = lac_fields(s.d_gs, s.d_es, s.gamma);
        assert_eq!(es, 1.5e9 / s.gamma);
        assert_eq!(p.provenance["spin.d_es"], Provenance::Override);
        assert_eq!(p.provenance["spin.d_gs"], Provenance::Measured);
    }

    #[test]
    fn rejects_unknown_and_negative() {
        assert!(Profile::parse("[spin]\nzfs = 1.0\n", "x").is_err());
        assert!(Profile::parse("colour = 1\n", "x").is_err());
        assert!(Profile::parse("[transport]\nmu_e = -0.1\n", "x").is_err());
        assert!(Profile::parse("[photophysics]\nradiative_rate = -1\n", "x").is_err());
    }

    #[test]
    fn every_key_has_provenance() {
        let p = Profile::builtin();
        let keys = p.describe().unwrap();
        assert_eq!(keys.len(), BUILTIN_PROVENANCE.len());
        for (k, _, _) in keys {
            assert!(p.provenance.contains_key(&k), "{k}");
        }
    }

    #[test]
    fn gap_presets() {
        assert_eq!(parse_gap("7.5um").unwrap(), 7.5e-6);
        assert_eq!(parse_gap("10e-6").unwrap(), 10e-6);
        assert_eq!(GAP_PRESETS.map(|g| g.1), [5e-6, 7.5e-6, 10e-6, 20e-6]);
        assert!(parse_gap("-1").is_err());
        assert!(parse_gap("wide").is_err());
    }

    #[test]
    fn resolves_from_directory() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("bench.toml"), "[readout]\nbias = 30.0\n").unwrap();
        let direct = resolve_profile(Some(dir.path().join("bench.toml").to_str().unwrap())).unwrap();
        assert_eq!(direct.name, "bench");
        assert_eq!(direct.calibration.readout.bias, 30.0);
        assert_eq!(resolve_profile(None).unwrap().name, BUILTIN_PROFILE);
        assert!(resolve_profile(Some("no-such-profile")).is_err());
    }
}
