//! Crystal frame bookkeeping: the four NV orientation families and the
//! projection of an applied field onto each family axis.
//!
//! All vectors live in the cubic crystal frame, so Miller indices map directly
//! onto Cartesian directions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A direction in the crystal frame, normalized on construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitVector {
    x: f64,
    y: f64,
    z: f64,
}

impl UnitVector {
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        let norm = (x * x + y * y + z * z).sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::ZeroDirection);
        }
        Ok(Self {
            x: x / norm,
            y: y / norm,
            z: z / norm,
        })
    }

    pub fn from_array(v: [f64; 3]) -> Result<Self> {
        Self::new(v[0], v[1], v[2])
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn to_array(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn dot(&self, other: &UnitVector) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    /// A fixed unit vector orthogonal to `self`.
    ///
    /// Built from the cross product with ẑ, falling back to x̂ when `self` is
    /// (anti)parallel to ẑ, so the choice is reproducible.
    pub fn perpendicular(&self) -> UnitVector {
        let c = cross(self.to_array(), [0.0, 0.0, 1.0]);
        let c = if norm(c) < 1e-8 {
            cross(self.to_array(), [1.0, 0.0, 0.0])
        } else {
            c
        };
        UnitVector::from_array(c).expect("cross product with a non-parallel axis is nonzero")
    }
}

pub(crate) fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub(crate) fn norm(a: [f64; 3]) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

/// Static magnetic field, tesla.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MagneticField {
    pub magnitude: f64,
    pub direction: UnitVector,
}

impl MagneticField {
    pub fn new(magnitude: f64, direction: UnitVector) -> Result<Self> {
        if !(magnitude >= 0.0) || !magnitude.is_finite() {
            return Err(Error::invalid("magnitude", "field magnitude must be finite and >= 0"));
        }
        Ok(Self {
            magnitude,
            direction,
        })
    }

    /// Field from a Cartesian vector. A zero vector yields a zero field along x̂.
    pub fn from_vector(v: [f64; 3]) -> Self {
        let magnitude = norm(v);
        let direction = UnitVector::from_array(v)
            .unwrap_or(UnitVector { x: 1.0, y: 0.0, z: 0.0 });
        Self {
            magnitude,
            direction,
        }
    }

    pub fn vector(&self) -> [f64; 3] {
        let d = self.direction.to_array();
        [
            self.magnitude * d[0],
            self.magnitude * d[1],
            self.magnitude * d[2],
        ]
    }

    /// Adds a transverse component of fixed magnitude along
    /// [`UnitVector::perpendicular`] of the current direction.
    pub fn with_transverse(&self, b_perp: f64) -> Self {
        let p = self.direction.perpendicular().to_array();
        let v = self.vector();
        Self::from_vector([
            v[0] + b_perp * p[0],
            v[1] + b_perp * p[1],
            v[2] + b_perp * p[2],
        ])
    }
}

/// One of the four N-to-V orientation families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NvFamily {
    pub index: usize,
    pub axis: UnitVector,
}

/// Sign patterns of the four ⟨111⟩ family axes. Fixed so family indices are
/// stable across runs.
pub const NV_AXIS_SIGNS: [[f64; 3]; 4] = [
    [1.0, 1.0, 1.0],
    [1.0, -1.0, -1.0],
    [-1.0, 1.0, -1.0],
    [-1.0, -1.0, 1.0],
];

pub fn nv_axes() -> [UnitVector; 4] {
    NV_AXIS_SIGNS.map(|s| UnitVector::from_array(s).expect("nonzero axis"))
}

pub fn nv_families() -> [NvFamily; 4] {
    let axes = nv_axes();
    [0, 1, 2, 3].map(|index| NvFamily {
        index,
        axis: axes[index],
    })
}

pub fn direction_from_miller(h: i32, k: i32, l: i32) -> Result<UnitVector> {
    if h == 0 && k == 0 && l == 0 {
        return Err(Error::ZeroDirection);
    }
    UnitVector::new(h as f64, k as f64, l as f64)
}

/// Field components along and across one family axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldProjection {
    /// Unsigned component along the NV axis, tesla.
    pub b_par: f64,
    /// Transverse component, tesla.
    pub b_perp: f64,
    /// Angle between field and axis, folded into [0, π/2].
    pub tilt: f64,
}

impl FieldProjection {
    pub fn aligned(b_par: f64) -> Self {
        Self {
            b_par: b_par.abs(),
            b_perp: 0.0,
            tilt: 0.0,
        }
    }

    pub fn from_components(b_par: f64, b_perp: f64) -> Self {
        let (b_par, b_perp) = (b_par.abs(), b_perp.abs());
        Self {
            b_par,
            b_perp,
            tilt: b_perp.atan2(b_par),
        }
    }

    pub fn magnitude(&self) -> f64 {
        self.b_par.hypot(self.b_perp)
    }
}

fn folded_angle(direction: &UnitVector, axis: &UnitVector) -> f64 {
    let cos = direction.dot(axis).abs();
    let sin = norm(cross(direction.to_array(), axis.to_array()));
    sin.atan2(cos)
}

pub fn project_field(field: &MagneticField, family: &NvFamily) -> FieldProjection {
    let d = &field.direction;
    let b_par = field.magnitude * d.dot(&family.axis).abs();
    let b_perp = field.magnitude * norm(cross(d.to_array(), family.axis.to_array()));
    FieldProjection {
        b_par,
        b_perp,
        tilt: folded_angle(d, &family.axis),
    }
}

pub fn project_all(field: &MagneticField) -> [FieldProjection; 4] {
    nv_families().map(|f| project_field(field, &f))
}

pub fn family_angles(direction: &UnitVector) -> [f64; 4] {
    nv_axes().map(|axis| folded_angle(direction, &axis))
}
