pub mod profile;
pub mod table;

pub use profile::{load_profile, parse_gap, resolve_profile, Profile, Provenance, BUILTIN_PROFILE, GAP_PRESETS};
pub use table::{format_number, Column, DataTable};
