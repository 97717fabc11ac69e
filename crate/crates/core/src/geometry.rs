//! Planar geometry: vectors, poses, walls and the two surface-distance
//! primitives every collision and reward computation is built on.

use core::f64::consts::{PI, TAU};
use core::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

use crate::error::GeometryError;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    #[inline]
    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    #[inline]
    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// 2D cross product (z component of the 3D cross product).
    #[inline]
    pub fn det(self, other: Vec2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    #[inline]
    pub fn length_squared(self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn length(self) -> f64 {
        libm::sqrt(self.length_squared())
    }

    #[inline]
    pub fn distance(self, other: Vec2) -> f64 {
        (self - other).length()
    }

    /// Unit vector, or zero when the vector has no length.
    #[inline]
    pub fn normalize_or_zero(self) -> Vec2 {
        let len = self.length();
        if len > 0.0 {
            self / len
        } else {
            Vec2::ZERO
        }
    }

    /// Counter-clockwise perpendicular.
    #[inline]
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    #[inline]
    pub fn rotate(self, angle: f64) -> Vec2 {
        let (s, c) = libm::sincos(angle);
        Vec2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    #[inline]
    pub fn angle(self) -> f64 {
        libm::atan2(self.y, self.x)
    }

    #[inline]
    pub fn from_angle(angle: f64) -> Vec2 {
        let (s, c) = libm::sincos(angle);
        Vec2::new(c, s)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl From<[f64; 2]> for Vec2 {
    fn from(v: [f64; 2]) -> Self {
        Vec2::new(v[0], v[1])
    }
}

impl From<Vec2> for [f64; 2] {
    fn from(v: Vec2) -> Self {
        [v.x, v.y]
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    #[inline]
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl AddAssign for Vec2 {
    #[inline]
    fn add_assign(&mut self, o: Vec2) {
        self.x += o.x;
        self.y += o.y;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    #[inline]
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl SubAssign for Vec2 {
    #[inline]
    fn sub_assign(&mut self, o: Vec2) {
        self.x -= o.x;
        self.y -= o.y;
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    #[inline]
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

impl Mul<Vec2> for f64 {
    type Output = Vec2;
    #[inline]
    fn mul(self, v: Vec2) -> Vec2 {
        v * self
    }
}

impl Div<f64> for Vec2 {
    type Output = Vec2;
    #[inline]
    fn div(self, s: f64) -> Vec2 {
        Vec2::new(self.x / s, self.y / s)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    #[inline]
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Wraps an angle into `(-π, π]`.
///
/// Angles already inside the interval are returned untouched, which keeps the
/// operation idempotent bit-for-bit.
pub fn normalize_angle(theta: f64) -> Result<f64, GeometryError> {
    if !theta.is_finite() {
        return Err(GeometryError::NonFiniteAngle(theta));
    }
    Ok(wrap_angle(theta))
}

/// Infallible variant of [`normalize_angle`] for values known to be finite.
#[inline]
pub(crate) fn wrap_angle(theta: f64) -> f64 {
    if theta > -PI && theta <= PI {
        return theta;
    }
    // fmod is exact, so no rounding is introduced here.
    let mut r = libm::fmod(theta, TAU);
    if r > PI {
        r -= TAU;
    } else if r <= -PI {
        r += TAU;
    }
    r
}

/// True when `target` lies inside the cone of `fov_deg` degrees centred on the
/// heading of `pose`. The boundary counts as inside.
pub fn within_fov(pose: &Pose2D, fov_deg: f64, target: Vec2) -> bool {
    if fov_deg >= 360.0 {
        return true;
    }
    let to = target - pose.position();
    if to == Vec2::ZERO {
        return true;
    }
    let bearing = wrap_angle(to.angle() - pose.theta);
    bearing.abs() <= fov_deg.to_radians() / 2.0 + 1e-12
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Pose2D {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose2D {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Pose2D {
            x,
            y,
            theta: wrap_angle(theta),
        }
    }

    #[inline]
    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }

    #[inline]
    pub fn set_position(&mut self, p: Vec2) {
        self.x = p.x;
        self.y = p.y;
    }

    #[inline]
    pub fn set_theta(&mut self, theta: f64) {
        self.theta = wrap_angle(theta);
    }

    /// Expresses a world point in this pose's local frame.
    pub fn to_local(&self, p: Vec2) -> Vec2 {
        (p - self.position()).rotate(-self.theta)
    }

    /// Inverse of [`Pose2D::to_local`].
    pub fn to_world(&self, p: Vec2) -> Vec2 {
        p.rotate(self.theta) + self.position()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Velocity2D {
    pub vx: f64,
    pub vy: f64,
    pub omega: f64,
}

impl Velocity2D {
    pub const ZERO: Velocity2D = Velocity2D {
        vx: 0.0,
        vy: 0.0,
        omega: 0.0,
    };

    pub fn new(vx: f64, vy: f64, omega: f64) -> Self {
        Velocity2D { vx, vy, omega }
    }

    #[inline]
    pub fn linear(&self) -> Vec2 {
        Vec2::new(self.vx, self.vy)
    }

    #[inline]
    pub fn speed(&self) -> f64 {
        self.linear().length()
    }
}

/// A straight wall segment with thickness.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Wall {
    pub a: Vec2,
    pub b: Vec2,
    #[serde(default)]
    pub thickness: f64,
}

impl Wall {
    pub fn new(a: Vec2, b: Vec2, thickness: f64) -> Result<Self, GeometryError> {
        let wall = Wall { a, b, thickness };
        wall.validate()?;
        Ok(wall)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if !(self.a.is_finite() && self.b.is_finite()) || self.a == self.b {
            return Err(GeometryError::DegenerateWall);
        }
        if !(self.thickness >= 0.0) {
            return Err(GeometryError::NegativeThickness(self.thickness));
        }
        Ok(())
    }

    /// Closest point of the centre line to `p`.
    pub fn closest_point(&self, p: Vec2) -> Vec2 {
        let ab = self.b - self.a;
        let t = ((p - self.a).dot(ab) / ab.length_squared()).clamp(0.0, 1.0);
        self.a + ab * t
    }

    pub fn length(&self) -> f64 {
        self.a.distance(self.b)
    }
}

/// Surface distance between two discs; negative when they overlap.
#[inline]
pub fn circle_circle_dist(p1: Vec2, r1: f64, p2: Vec2, r2: f64) -> f64 {
    p1.distance(p2) - (r1 + r2)
}

/// Surface distance between a disc and a thick wall segment.
#[inline]
pub fn segment_circle_dist(seg: &Wall, p: Vec2, r: f64) -> f64 {
    point_segment_distance(p, seg.a, seg.b) - r - seg.thickness / 2.0
}

pub fn point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b - a;
    let len2 = ab.length_squared();
    if len2 == 0.0 {
        return p.distance(a);
    }
    let t = ((p - a).dot(ab) / len2).clamp(0.0, 1.0);
    p.distance(a + ab * t)
}

/// Even-odd point-in-polygon test. Points on an edge may land on either side.
pub fn point_in_polygon(p: Vec2, poly: &[Vec2]) -> bool {
    let n = poly.len();
    if n < 3 {
        return false;
    }
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (poly[i], poly[j]);
        if (a.y > p.y) != (b.y > p.y) {
            let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if p.x < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// Portion of the segment `a..b` that lies within `range` of `center`, if any.
pub fn clip_segment_to_disc(a: Vec2, b: Vec2, center: Vec2, range: f64) -> Option<(Vec2, Vec2)> {
    let d = b - a;
    let f = a - center;
    let qa = d.length_squared();
    let qb = 2.0 * f.dot(d);
    let qc = f.length_squared() - range * range;
    if qa == 0.0 {
        return (qc <= 0.0).then_some((a, b));
    }
    let disc = qb * qb - 4.0 * qa * qc;
    if disc < 0.0 {
        return None;
    }
    let sq = libm::sqrt(disc);
    let t0 = ((-qb - sq) / (2.0 * qa)).max(0.0);
    let t1 = ((-qb + sq) / (2.0 * qa)).min(1.0);
    if t0 > t1 {
        return None;
    }
    Some((a + d * t0, a + d * t1))
}
