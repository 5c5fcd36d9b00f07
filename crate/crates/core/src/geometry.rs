//! Planar-navigation geometry: positions, head orientations and the two
//! angle measures every trajectory feature is built on.
//!
//! Coordinates are right-handed with `+y` up; the walkable ground plane is
//! `x`–`z`.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Displacements shorter than this (after projection onto the ground plane)
/// have no usable direction.
pub const EPS_DISP: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("degenerate vector: ground-plane length {0:e} is below {EPS_DISP:e}")]
    DegenerateVector(f64),
    #[error("non-finite component in {0}")]
    NonFinite(&'static str),
    #[error("quaternion has zero norm")]
    ZeroQuaternion,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 {
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };
    pub const UP: Vec3 = Vec3 {
        x: 0.0,
        y: 1.0,
        z: 0.0,
    };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    /// Checked constructor rejecting NaN and infinities.
    pub fn try_new(x: f64, y: f64, z: f64) -> Result<Self, GeometryError> {
        let v = Self { x, y, z };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(GeometryError::NonFinite("Vec3"))
        }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    /// Drops the vertical component.
    pub fn ground(self) -> Vec3 {
        Vec3::new(self.x, 0.0, self.z)
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

/// Rotation stored as a normalized quaternion `(w, x, y, z)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitQuaternion {
    w: f64,
    x: f64,
    y: f64,
    z: f64,
}

impl Default for UnitQuaternion {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl UnitQuaternion {
    pub const IDENTITY: UnitQuaternion = UnitQuaternion {
        w: 1.0,
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    /// Normalizes the given components.
    pub fn new(w: f64, x: f64, y: f64, z: f64) -> Result<Self, GeometryError> {
        if !(w.is_finite() && x.is_finite() && y.is_finite() && z.is_finite()) {
            return Err(GeometryError::NonFinite("UnitQuaternion"));
        }
        let n = (w * w + x * x + y * y + z * z).sqrt();
        if n == 0.0 || !n.is_finite() {
            return Err(GeometryError::ZeroQuaternion);
        }
        if (n - 1.0).abs() <= 4.0 * f64::EPSILON {
            // already unit up to rounding; keep the exact bits so text round-trips are lossless
            return Ok(Self { w, x, y, z });
        }
        Ok(Self {
            w: w / n,
            x: x / n,
            y: y / n,
            z: z / n,
        })
    }

    pub fn from_axis_angle(axis: Vec3, angle: f64) -> Result<Self, GeometryError> {
        let n = axis.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(GeometryError::DegenerateVector(n));
        }
        let (s, c) = (angle / 2.0).sin_cos();
        let a = axis * (1.0 / n);
        Self::new(c, a.x * s, a.y * s, a.z * s)
    }

    /// Rotation by `yaw` radians about `+y`.
    pub fn from_yaw(yaw: f64) -> Self {
        let (s, c) = (yaw / 2.0).sin_cos();
        Self {
            w: c,
            x: 0.0,
            y: s,
            z: 0.0,
        }
    }

    pub fn w(&self) -> f64 {
        self.w
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

    pub fn components(&self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }

    pub fn dot(&self, o: &UnitQuaternion) -> f64 {
        self.w * o.w + self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    /// Hamilton product `self * o`, renormalized to absorb rounding drift.
    pub fn compose(&self, o: &UnitQuaternion) -> UnitQuaternion {
        let (a, b) = (self, o);
        let w = a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z;
        let x = a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y;
        let y = a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x;
        let z = a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w;
        UnitQuaternion::new(w, x, y, z).expect("product of unit quaternions is nonzero")
    }

    /// Same rotation, opposite sign.
    pub fn antipode(&self) -> UnitQuaternion {
        UnitQuaternion {
            w: -self.w,
            x: -self.x,
            y: -self.y,
            z: -self.z,
        }
    }
}

/// Unsigned angle of the relative rotation between `a` and `b`, in `[0, π]`.
///
/// Equal to `2·acos(min(1, |a·b|))`, so `q` and `-q` count as the same
/// orientation. Evaluated as `2·atan2(|v|, |w|)` of the relative rotation
/// `a* b = (w, v)`, which keeps full precision near 0 and π.
pub fn quat_angle_between(a: &UnitQuaternion, b: &UnitQuaternion) -> f64 {
    let w = a.dot(b);
    let (av, bv) = (Vec3::new(a.x, a.y, a.z), Vec3::new(b.x, b.y, b.z));
    let v = bv * a.w - av * b.w - av.cross(bv);
    2.0 * v.norm().atan2(w.abs())
}

/// Signed turn from `u` to `v` in the ground plane, in `(-π, π]`.
///
/// Positive when `(u × v)·up > 0`. Exactly opposite directions give `+π`.
pub fn signed_plane_angle(u: Vec3, v: Vec3) -> Result<f64, GeometryError> {
    let (gu, gv) = (u.ground(), v.ground());
    let (nu, nv) = (gu.norm(), gv.norm());
    if nu.is_nan() || nu < EPS_DISP {
        return Err(GeometryError::DegenerateVector(nu));
    }
    if nv.is_nan() || nv < EPS_DISP {
        return Err(GeometryError::DegenerateVector(nv));
    }
    // atan2 of (sin, cos) scaled by |u||v|; same angle as acos of the
    // normalized dot but exact near 0 and π
    let side = gu.cross(gv).dot(Vec3::UP);
    let angle = side.abs().atan2(gu.dot(gv));
    Ok(if side < 0.0 { -angle } else { angle })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;
    use std::f64::consts::PI;

    #[test]
    fn quaternion_angle_examples() {
        let id = UnitQuaternion::IDENTITY;
        assert_eq!(quat_angle_between(&id, &id), 0.0);
        let c = (PI / 4.0).cos();
        let quarter = UnitQuaternion::new(c, 0.0, (PI / 4.0).sin(), 0.0).unwrap();
        assert!((quat_angle_between(&id, &quarter) - FRAC_PI_2).abs() < 1e-12);
        assert_eq!(quat_angle_between(&quarter, &quarter.antipode()), 0.0);
    }

    #[test]
    fn quaternion_normalizes_on_construction() {
        let q = UnitQuaternion::new(2.0, 0.0, 0.0, 0.0).unwrap();
        assert_eq!(q.components(), [1.0, 0.0, 0.0, 0.0]);
        let q = UnitQuaternion::new(1.0, 2.0, 3.0, 4.0).unwrap();
        assert!((q.norm() - 1.0).abs() < 1e-12);
        assert_eq!(
            UnitQuaternion::new(0.0, 0.0, 0.0, 0.0),
            Err(GeometryError::ZeroQuaternion)
        );
        assert!(UnitQuaternion::new(f64::NAN, 0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn yaw_matches_axis_angle() {
        let a = UnitQuaternion::from_yaw(0.7);
        let b = UnitQuaternion::from_axis_angle(Vec3::UP, 0.7).unwrap();
        assert!(quat_angle_between(&a, &b) < 1e-7);
    }

    #[test]
    fn plane_angle_examples() {
        let x = Vec3::new(1.0, 0.0, 0.0);
        assert_eq!(signed_plane_angle(x, x).unwrap(), 0.0);
        let a = signed_plane_angle(x, Vec3::new(0.0, 0.0, 1.0)).unwrap();
        assert!((a + FRAC_PI_2).abs() < 1e-15);
        assert_eq!(signed_plane_angle(x, -x).unwrap(), PI);
        assert_eq!(signed_plane_angle(-x, x).unwrap(), PI);
    }

    #[test]
    fn plane_angle_ignores_vertical_component() {
        let a = signed_plane_angle(Vec3::new(1.0, 5.0, 0.0), Vec3::new(0.0, -3.0, 1.0)).unwrap();
        assert!((a + FRAC_PI_2).abs() < 1e-15);
    }

    #[test]
    fn plane_angle_rejects_degenerate() {
        let x = Vec3::new(1.0, 0.0, 0.0);
        assert!(matches!(
            signed_plane_angle(Vec3::new(0.0, 1.0, 0.0), x),
            Err(GeometryError::DegenerateVector(_))
        ));
        assert!(signed_plane_angle(x, Vec3::new(1e-10, 0.0, 0.0)).is_err());
        assert!(signed_plane_angle(x, Vec3::new(f64::NAN, 0.0, 0.0)).is_err());
    }
}
