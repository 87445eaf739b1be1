//! Inverse problems on a shared Levenberg–Marquardt core.

pub mod field;
pub mod lm;
pub mod lorentz;
pub mod peaks;
pub mod power;

pub use field::{invert_aligned, invert_field, AlignedInversion, DirectionClass, FieldInversion, InvertOptions};
pub use lm::{least_squares, least_squares_residuals, Bounds, FitResult, LmOptions};
pub use lorentz::{fit_lorentzians, LorentzFit};
pub use peaks::{detect_peaks, DipEstimate, PeakOptions};
pub use power::{fit_power_curve, PowerFit};
