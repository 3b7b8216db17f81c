//! Coordinate conventions and angular arithmetic.
//!
//! Azimuth is measured counter-clockwise from +x in the horizontal plane and
//! lies in (-180, 180] degrees; elevation is measured from the horizontal
//! plane toward +z and lies in [-90, 90] degrees. At the poles (|el| = 90)
//! the azimuth is reported as 0 so that conversions round-trip
//! deterministically.

use core::fmt;

#[allow(unused_imports)]
use num_traits::Float;

/// Tolerance on the squared-norm deviation accepted as "unit".
pub const UNIT_NORM_TOL: f64 = 1e-6;

/// A point on the unit sphere, or the all-zero "inactive" sentinel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectionVector {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

/// Azimuth/elevation pair in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AzEl {
    /// Degrees in (-180, 180], counter-clockwise from +x.
    pub azimuth_deg: f64,
    /// Degrees in [-90, 90], positive toward +z.
    pub elevation_deg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeometryError {
    /// Angle outside the documented azimuth/elevation ranges.
    AngleOutOfRange,
    /// Input vector is not unit norm (deviation beyond tolerance).
    NotUnitNorm,
    /// Angular distance is undefined for the inactive zero sentinel.
    UndefinedDistance,
}

impl fmt::Display for GeometryError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GeometryError::AngleOutOfRange => {
                write!(f, "azimuth/elevation outside valid ranges")
            }
            GeometryError::NotUnitNorm => write!(f, "direction vector is not unit norm"),
            GeometryError::UndefinedDistance => {
                write!(f, "angular distance undefined for inactive direction")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for GeometryError {}

impl DirectionVector {
    /// The inactive sentinel: all components zero.
    pub const ZERO: DirectionVector = DirectionVector {
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        DirectionVector { x, y, z }
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn dot(&self, other: &DirectionVector) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    /// True when this is the inactive all-zero sentinel.
    pub fn is_zero(&self) -> bool {
        self.x == 0.0 && self.y == 0.0 && self.z == 0.0
    }

    pub fn is_unit(&self) -> bool {
        (self.norm() - 1.0).abs() <= UNIT_NORM_TOL
    }

    /// Scale to unit norm. Returns the sentinel unchanged.
    pub fn normalized(&self) -> DirectionVector {
        let n = self.norm();
        if n == 0.0 {
            DirectionVector::ZERO
        } else {
            DirectionVector::new(self.x / n, self.y / n, self.z / n)
        }
    }

    pub fn scale(&self, s: f64) -> DirectionVector {
        DirectionVector::new(self.x * s, self.y * s, self.z * s)
    }
}

impl AzEl {
    pub const fn new(azimuth_deg: f64, elevation_deg: f64) -> Self {
        AzEl {
            azimuth_deg,
            elevation_deg,
        }
    }

    pub fn in_range(&self) -> bool {
        self.azimuth_deg > -180.0
            && self.azimuth_deg <= 180.0
            && self.elevation_deg >= -90.0
            && self.elevation_deg <= 90.0
    }
}

/// Convert azimuth/elevation to a unit direction vector.
///
/// (az=0, el=0) maps to +x; (az=90, el=0) to +y; el=90 to +z.
pub fn azel_to_unit(a: AzEl) -> Result<DirectionVector, GeometryError> {
    if !a.in_range() {
        return Err(GeometryError::AngleOutOfRange);
    }
    let az = a.azimuth_deg.to_radians();
    let el = a.elevation_deg.to_radians();
    Ok(DirectionVector::new(
        el.cos() * az.cos(),
        el.cos() * az.sin(),
        el.sin(),
    ))
}

/// Convert a unit direction vector back to azimuth/elevation degrees.
///
/// Inverse of [`azel_to_unit`]; at the poles the azimuth is 0.
pub fn unit_to_azel(d: DirectionVector) -> Result<AzEl, GeometryError> {
    if (d.norm() - 1.0).abs() > UNIT_NORM_TOL {
        return Err(GeometryError::NotUnitNorm);
    }
    let el = d.z.clamp(-1.0, 1.0).asin().to_degrees();
    let mut az = if d.x == 0.0 && d.y == 0.0 {
        0.0
    } else {
        d.y.atan2(d.x).to_degrees()
    };
    if az <= -180.0 {
        az += 360.0;
    }
    Ok(AzEl::new(az, el))
}

/// Great-circle angle between two unit directions, in degrees.
///
/// The dot product is clamped to [-1, 1] so near-parallel inputs never fall
/// outside the arccos domain. Errors on the inactive sentinel.
pub fn angular_distance_deg(
    a: DirectionVector,
    b: DirectionVector,
) -> Result<f64, GeometryError> {
    if a.is_zero() || b.is_zero() {
        return Err(GeometryError::UndefinedDistance);
    }
    Ok(a.dot(&b).clamp(-1.0, 1.0).acos().to_degrees())
}
