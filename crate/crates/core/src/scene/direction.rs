use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, SeldError};

/// Speed of sound used throughout synthesis and steering, in m/s.
pub const SPEED_OF_SOUND: f64 = 343.0;

/// A direction of arrival in degrees.
///
/// Azimuth is measured counter-clockwise from the +x axis and is kept in
/// `[-180, 180)`. Elevation is measured from the horizontal plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Direction {
    pub azimuth: f64,
    pub elevation: f64,
}

/// Wraps an angle in degrees into `[-180, 180)`.
pub fn wrap_azimuth(deg: f64) -> f64 {
    let w = (deg + 180.0).rem_euclid(360.0) - 180.0;
    // rem_euclid can return 360 - tiny for tiny negative inputs
    if w >= 180.0 {
        w - 360.0
    } else {
        w
    }
}

impl Direction {
    pub fn new(azimuth: f64, elevation: f64) -> Result<Self> {
        if !azimuth.is_finite() || !elevation.is_finite() {
            return Err(invalid("direction must be finite"));
        }
        if !(-90.0..=90.0).contains(&elevation) {
            return Err(invalid(format!("elevation {elevation} outside [-90, 90]")));
        }
        Ok(Self {
            azimuth: wrap_azimuth(azimuth),
            elevation,
        })
    }

    pub fn to_cartesian(self) -> CartesianDoa {
        let (az, el) = (self.azimuth.to_radians(), self.elevation.to_radians());
        CartesianDoa {
            x: el.cos() * az.cos(),
            y: el.cos() * az.sin(),
            z: el.sin(),
        }
    }

    /// Great-circle angle to another direction, in degrees.
    pub fn angle_to(self, other: Direction) -> f64 {
        let a = self.to_cartesian();
        let b = other.to_cartesian();
        let dot = (a.x * b.x + a.y * b.y + a.z * b.z).clamp(-1.0, 1.0);
        dot.acos().to_degrees()
    }

    /// Shifts both angles; elevation must stay within range.
    pub fn shifted(self, d_azimuth: f64, d_elevation: f64) -> Result<Self> {
        Direction::new(self.azimuth + d_azimuth, self.elevation + d_elevation)
    }
}

/// Point on the unit sphere; `(0, 0, 0)` marks an inactive class.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CartesianDoa {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl CartesianDoa {
    pub const INACTIVE: CartesianDoa = CartesianDoa {
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    /// Projects onto the unit sphere. Fails for the zero vector.
    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if !(n > 1e-12) || !n.is_finite() {
            return Err(SeldError::NotUnitNorm(n));
        }
        Ok(Self::new(self.x / n, self.y / n, self.z / n))
    }

    pub fn to_direction(&self) -> Result<Direction> {
        let u = self.normalized()?;
        let elevation = u.z.clamp(-1.0, 1.0).asin().to_degrees();
        let azimuth = u.y.atan2(u.x).to_degrees();
        Direction::new(azimuth, elevation)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn azimuth_wraps_into_half_open_range() {
        assert_eq!(wrap_azimuth(180.0), -180.0);
        assert_eq!(wrap_azimuth(-180.0), -180.0);
        assert_eq!(wrap_azimuth(190.0), -170.0);
        assert_eq!(wrap_azimuth(-190.0), 170.0);
        assert_eq!(wrap_azimuth(720.0 + 45.0), 45.0);
        assert!(wrap_azimuth(-1e-18) < 180.0);
    }

    #[test]
    fn elevation_out_of_range_rejected() {
        assert!(Direction::new(0.0, 91.0).is_err());
        assert!(Direction::new(0.0, f64::NAN).is_err());
    }

    #[test]
    fn axis_conventions() {
        let c = Direction::new(0.0, 0.0).unwrap().to_cartesian();
        assert!((c.x - 1.0).abs() < 1e-15 && c.y.abs() < 1e-15 && c.z.abs() < 1e-15);
        let c = Direction::new(90.0, 0.0).unwrap().to_cartesian();
        assert!(c.x.abs() < 1e-15 && (c.y - 1.0).abs() < 1e-15);
        let c = Direction::new(0.0, 90.0).unwrap().to_cartesian();
        assert!((c.z - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_vector_cannot_be_normalized() {
        assert!(CartesianDoa::INACTIVE.normalized().is_err());
    }

    proptest! {
        #[test]
        fn cartesian_round_trip(az in -180.0f64..180.0, el in -89.9f64..89.9) {
            let d = Direction::new(az, el).unwrap();
            let c = d.to_cartesian();
            prop_assert!((c.norm() - 1.0).abs() < 1e-9);
            let back = c.to_direction().unwrap();
            prop_assert!((back.elevation - el).abs() < 1e-9);
            let daz = wrap_azimuth(back.azimuth - az).abs();
            prop_assert!(daz < 1e-9, "az {} -> {}", az, back.azimuth);
        }
    }
}
