//! The complete parameter set behind a forward simulation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::photodynamics::{DriveParams, MwTarget, PhotophysicsParams, PowerCurveParams};
use crate::spin::SpinConstants;
use crate::transport::TransportParams;

/// How generation rates are turned into a measured current.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReadoutParams {
    /// Bias across the electrodes, V.
    pub bias: f64,
    /// MW-independent current from other photoactive defects, A.
    pub background_current: f64,
    /// Excited-state dip depth as a fraction of the matching ground-state dip.
    pub es_relative_depth: f64,
    /// Relative weight of the four orientation families.
    pub family_weights: [f64; 4],
    pub mw_target: MwTarget,
}

impl Default for ReadoutParams {
    fn default() -> Self {
        Self {
            bias: 60.0,
            background_current: 0.0,
            es_relative_depth: 0.2,
            family_weights: [0.25; 4],
            mw_target: MwTarget::Both,
        }
    }
}

impl ReadoutParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.bias >= 0.0) || !self.bias.is_finite() {
            return Err(Error::invalid("bias", "must be finite and >= 0"));
        }
        if !(self.background_current >= 0.0) || !self.background_current.is_finite() {
            return Err(Error::invalid("background_current", "must be finite and >= 0"));
        }
        if !(0.0..=1.0).contains(&self.es_relative_depth) {
            return Err(Error::invalid("es_relative_depth", "must lie in [0, 1]"));
        }
        if self.family_weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::invalid("family_weights", "weights must be finite and >= 0"));
        }
        if !(self.family_weights.iter().sum::<f64>() > 0.0) {
            return Err(Error::invalid("family_weights", "at least one weight must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Calibration {
    pub spin: SpinConstants,
    pub photophysics: PhotophysicsParams,
    pub drive: DriveParams,
    pub transport: TransportParams,
    pub power_curve: PowerCurveParams,
    pub readout: ReadoutParams,
}

impl Calibration {
    pub fn validate(&self) -> Result<()> {
        self.spin.validate()?;
        self.photophysics.validate()?;
        self.drive.validate()?;
        self.transport.validate()?;
        self.power_curve.validate()?;
        self.readout.validate()
    }
}
