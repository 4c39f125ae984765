//! Reference frames, attitude rotations and spherical coordinates.
//!
//! Three frames are used throughout:
//!
//! * LLF: local-level East-North-Up frame (world / beacon-centric).
//! * VCF: vehicle-carried frame, ENU-aligned but centred on the vehicle.
//! * BFF: body-fixed frame, x forward, y port, z up.
//!
//! Angles are in degrees at every public boundary. Vehicle headings used by
//! the autonomy and the motion model are compass headings (clockwise from
//! North); the attitude yaw is the ENU yaw (counter-clockwise from East).
//! [`compass_to_yaw`] and [`yaw_to_compass`] convert between the two.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Wrap an angle in degrees to `[-180, 180)`.
pub fn wrap_180(deg: f64) -> f64 {
    let w = (deg + 180.0).rem_euclid(360.0) - 180.0;
    // rem_euclid can return exactly 360 - eps rounding up to 180
    if w >= 180.0 {
        w - 360.0
    } else {
        w
    }
}

/// Wrap an angle in degrees to `[0, 360)`.
pub fn wrap_360(deg: f64) -> f64 {
    let w = deg.rem_euclid(360.0);
    if w >= 360.0 {
        0.0
    } else {
        w
    }
}

/// Compass heading (deg, clockwise from North) to ENU yaw (deg, counter-clockwise from East).
pub fn compass_to_yaw(heading_deg: f64) -> f64 {
    wrap_180(90.0 - heading_deg)
}

/// ENU yaw to compass heading in `[0, 360)`.
pub fn yaw_to_compass(yaw_deg: f64) -> f64 {
    wrap_360(90.0 - yaw_deg)
}

/// Unit vector in the horizontal ENU plane for a compass heading.
pub fn heading_unit(heading_deg: f64) -> [f64; 2] {
    let h = heading_deg.to_radians();
    [h.sin(), h.cos()]
}

/// Compass heading of a horizontal ENU vector.
pub fn heading_of(dx: f64, dy: f64) -> f64 {
    wrap_360(dx.atan2(dy).to_degrees())
}

/// Vehicle attitude as roll, pitch and ENU yaw, in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EulerAttitude {
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
}

impl EulerAttitude {
    /// Build an attitude with roll and yaw wrapped to `[-180, 180)` and pitch clamped to `[-90, 90]`.
    pub fn new(roll: f64, pitch: f64, yaw: f64) -> Self {
        Self {
            roll: wrap_180(roll),
            pitch: pitch.clamp(-90.0, 90.0),
            yaw: wrap_180(yaw),
        }
    }

    pub fn from_compass(roll: f64, pitch: f64, heading_deg: f64) -> Self {
        Self::new(roll, pitch, compass_to_yaw(heading_deg))
    }

    pub fn compass_heading(&self) -> f64 {
        yaw_to_compass(self.yaw)
    }
}

/// Elemental rotation about z.
pub fn rot_z(deg: f64) -> Matrix3<f64> {
    let (s, c) = deg.to_radians().sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// Elemental rotation about y.
pub fn rot_y(deg: f64) -> Matrix3<f64> {
    let (s, c) = deg.to_radians().sin_cos();
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

/// Elemental rotation about x.
pub fn rot_x(deg: f64) -> Matrix3<f64> {
    let (s, c) = deg.to_radians().sin_cos();
    Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

/// The VCF/BFF attitude rotation `Rz(yaw) * Ry(pitch) * Rx(roll)`.
///
/// Applied to a body-frame vector it yields the same vector in the
/// vehicle-carried frame; its transpose maps VCF into BFF. With this
/// orientation a beacon straight ahead of the vehicle always lies at zero
/// body azimuth regardless of yaw.
pub fn attitude_rotation(att: &EulerAttitude) -> Matrix3<f64> {
    rot_z(att.yaw) * rot_y(att.pitch) * rot_x(att.roll)
}

pub fn vcf_to_bff(att: &EulerAttitude, v: &Vector3<f64>) -> Vector3<f64> {
    attitude_rotation(att).transpose() * v
}

pub fn bff_to_vcf(att: &EulerAttitude, v: &Vector3<f64>) -> Vector3<f64> {
    attitude_rotation(att) * v
}

/// Coordinate frame tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Frame {
    Llf,
    Vcf,
    Bff,
}

impl Frame {
    fn name(self) -> &'static str {
        match self {
            Frame::Llf => "LLF",
            Frame::Vcf => "VCF",
            Frame::Bff => "BFF",
        }
    }
}

/// A Cartesian position tagged with the frame it is expressed in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FramePosition {
    frame: Frame,
    pub coords: Vector3<f64>,
}

impl FramePosition {
    pub fn new(frame: Frame, x: f64, y: f64, z: f64) -> Self {
        Self {
            frame,
            coords: Vector3::new(x, y, z),
        }
    }

    pub fn from_vector(frame: Frame, coords: Vector3<f64>) -> Self {
        Self { frame, coords }
    }

    pub fn frame(&self) -> Frame {
        self.frame
    }

    fn expect(&self, frame: Frame) -> Result<()> {
        if self.frame == frame {
            Ok(())
        } else {
            Err(Error::FrameMismatch {
                expected: frame.name(),
                found: self.frame.name(),
            })
        }
    }

    /// Difference of two positions in the same frame.
    pub fn checked_sub(&self, other: &FramePosition) -> Result<FramePosition> {
        other.expect(self.frame)?;
        Ok(FramePosition::from_vector(self.frame, self.coords - other.coords))
    }

    pub fn checked_add(&self, other: &FramePosition) -> Result<FramePosition> {
        other.expect(self.frame)?;
        Ok(FramePosition::from_vector(self.frame, self.coords + other.coords))
    }
}

/// Beacon position in body-fixed spherical coordinates (r in meters, angles in degrees).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SphericalBff {
    pub r: f64,
    /// Inclination from the body z axis, `[0, 180]`.
    pub theta: f64,
    /// Azimuth from the body x axis, `[0, 360)`.
    pub phi: f64,
}

impl SphericalBff {
    pub fn new(r: f64, theta: f64, phi: f64) -> Self {
        Self { r, theta, phi }
    }
}

/// Unit direction vector for an inclination/azimuth pair.
pub fn direction_vector(theta_deg: f64, phi_deg: f64) -> Vector3<f64> {
    let (st, ct) = theta_deg.to_radians().sin_cos();
    let (sp, cp) = phi_deg.to_radians().sin_cos();
    Vector3::new(st * cp, st * sp, ct)
}

pub fn spherical_to_cartesian(s: &SphericalBff) -> FramePosition {
    FramePosition::from_vector(Frame::Bff, direction_vector(s.theta, s.phi) * s.r)
}

/// Inverse of [`spherical_to_cartesian`]; azimuth uses the quadrant-aware arctangent.
pub fn cartesian_to_spherical(v: &Vector3<f64>) -> Result<SphericalBff> {
    let r = v.norm();
    if r == 0.0 {
        return Err(Error::ZeroRadius);
    }
    let theta = (v.z / r).clamp(-1.0, 1.0).acos().to_degrees();
    let phi = wrap_360(v.y.atan2(v.x).to_degrees());
    Ok(SphericalBff { r, theta, phi })
}

/// Great-circle angle between two directions, in degrees.
pub fn angular_separation(a: (f64, f64), b: (f64, f64)) -> f64 {
    let u = direction_vector(a.0, a.1);
    let v = direction_vector(b.0, b.1);
    u.dot(&v).clamp(-1.0, 1.0).acos().to_degrees()
}

/// Vehicle position in the LLF from the beacon's LLF position and the filter's VCF estimate of it.
pub fn auv_position_llf(
    beacon_llf: &FramePosition,
    beacon_vcf_estimate: &FramePosition,
) -> Result<FramePosition> {
    beacon_llf.expect(Frame::Llf)?;
    beacon_vcf_estimate.expect(Frame::Vcf)?;
    Ok(FramePosition::from_vector(
        Frame::Llf,
        beacon_llf.coords - beacon_vcf_estimate.coords,
    ))
}

/// Beacon position in the beacon-centric LLF: pinned at the x-y origin at its known depth.
pub fn beacon_centric_llf(beacon_depth: f64) -> FramePosition {
    FramePosition::new(Frame::Llf, 0.0, 0.0, -beacon_depth)
}
