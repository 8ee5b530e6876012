//! Value types shared by every module: points, planar poses and agent/rover state.
//!
//! World frame is z-up, meters and radians. Angles are kept in (-pi, pi].

use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Identifier of a drone in the swarm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AgentId(pub u32);

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3<T> {
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Real> Vec3<T> {
    pub fn new(x: T, y: T, z: T) -> Self {
        Self { x, y, z }
    }

    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero(), T::zero())
    }

    pub fn dot(self, other: Self) -> T {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn norm_squared(self) -> T {
        self.dot(self)
    }

    pub fn norm(self) -> T {
        // hypot-style scaling is unnecessary at the magnitudes this crate sees
        self.norm_squared().sqrt()
    }

    /// Norm of the x-y components.
    pub fn horizontal_norm(self) -> T {
        self.x.hypot(self.y)
    }

    pub fn horizontal(self) -> Self {
        Self::new(self.x, self.y, T::zero())
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// Returns `self` scaled down so its norm does not exceed `max`.
    pub fn clamp_norm(self, max: T) -> Self {
        let n = self.norm();
        if n > max && n > T::zero() {
            self * (max / n)
        } else {
            self
        }
    }

    pub fn cast<U: Real>(self) -> Vec3<U> {
        Vec3::new(
            U::from(self.x).unwrap(),
            U::from(self.y).unwrap(),
            U::from(self.z).unwrap(),
        )
    }
}

impl<T: Real> Add for Vec3<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl<T: Real> AddAssign for Vec3<T> {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl<T: Real> Sub for Vec3<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl<T: Real> SubAssign for Vec3<T> {
    fn sub_assign(&mut self, o: Self) {
        *self = *self - o;
    }
}

impl<T: Real> Mul<T> for Vec3<T> {
    type Output = Self;
    fn mul(self, s: T) -> Self {
        Self::new(self.x * s, self.y * s, self.z * s)
    }
}

impl<T: Real> Div<T> for Vec3<T> {
    type Output = Self;
    fn div(self, s: T) -> Self {
        Self::new(self.x / s, self.y / s, self.z / s)
    }
}

impl<T: Real> Neg for Vec3<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y, -self.z)
    }
}

/// Euclidean distance between two points.
pub fn distance<T: Real>(a: Vec3<T>, b: Vec3<T>) -> T {
    (a - b).norm()
}

/// Distance between the x-y projections of two points.
pub fn horizontal_distance<T: Real>(a: Vec3<T>, b: Vec3<T>) -> T {
    (a - b).horizontal_norm()
}

/// Wraps an angle into (-pi, pi].
pub fn normalize_angle<T: Real>(theta: T) -> Result<T> {
    if !theta.is_finite() {
        return Err(Error::NonFinite("angle"));
    }
    Ok(wrap_angle(theta))
}

/// Infallible variant of [`normalize_angle`] for values already known finite.
pub(crate) fn wrap_angle<T: Real>(theta: T) -> T {
    let pi = T::PI();
    let two_pi = T::TAU();
    if theta > -pi && theta <= pi {
        return theta;
    }
    let mut r = theta % two_pi;
    if r <= -pi {
        r = r + two_pi;
    } else if r > pi {
        r = r - two_pi;
    }
    // rounding in the addition above can land exactly on -pi
    if r <= -pi {
        r = pi;
    }
    r
}

/// Planar pose: position in meters, heading in (-pi, pi].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose2D<T> {
    pub x: T,
    pub y: T,
    pub theta: T,
}

impl<T: Real> Pose2D<T> {
    pub fn new(x: T, y: T, theta: T) -> Self {
        Self {
            x,
            y,
            theta: wrap_angle(theta),
        }
    }

    /// Maps a point expressed in this pose's frame into the parent frame.
    pub fn transform_point(&self, local: [T; 2]) -> [T; 2] {
        let (s, c) = self.theta.sin_cos();
        [
            self.x + c * local[0] - s * local[1],
            self.y + s * local[0] + c * local[1],
        ]
    }

    /// Rigid composition `self * other`.
    pub fn compose(&self, other: &Pose2D<T>) -> Pose2D<T> {
        let [x, y] = self.transform_point([other.x, other.y]);
        Pose2D::new(x, y, self.theta + other.theta)
    }

    pub fn position(&self, z: T) -> Vec3<T> {
        Vec3::new(self.x, self.y, z)
    }
}

/// State of one drone in the world frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentState<T> {
    pub id: AgentId,
    pub position: Vec3<T>,
    pub velocity: Vec3<T>,
    pub motors_on: bool,
}

impl<T: Real> AgentState<T> {
    pub fn new(id: AgentId, position: Vec3<T>) -> Self {
        Self {
            id,
            position,
            velocity: Vec3::zero(),
            motors_on: true,
        }
    }
}

/// Differential-drive rover carrying the landing pad.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoverState<T> {
    pub pose: Pose2D<T>,
    pub linear_speed: T,
    pub angular_speed: T,
    pub pad_height: T,
}

impl<T: Real> RoverState<T> {
    pub const DEFAULT_PAD_HEIGHT: f64 = 0.70;

    pub fn at_rest(pose: Pose2D<T>, pad_height: T) -> Self {
        Self {
            pose,
            linear_speed: T::zero(),
            angular_speed: T::zero(),
            pad_height,
        }
    }

    /// Center of the pad surface in the world frame.
    pub fn pad_center(&self) -> Vec3<T> {
        self.pose.position(self.pad_height)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn distance_examples() {
        let o = Vec3::new(0.0, 0.0, 0.0);
        assert_eq!(distance(o, o), 0.0);
        assert_eq!(distance(Vec3::new(1.0, 0.0, 0.0), o), 1.0);
        assert_eq!(distance(Vec3::new(1.0, 2.0, 2.0), o), 3.0);
        assert_eq!(distance(Vec3::new(1.0f32, 2.0, 2.0), Vec3::zero()), 3.0f32);
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize_angle(0.0).unwrap(), 0.0);
        assert!(normalize_angle(2.0 * PI).unwrap().abs() < 1e-15);
        assert!((normalize_angle(1.5 * PI).unwrap() + 0.5 * PI).abs() < 1e-15);
        assert_eq!(normalize_angle(PI).unwrap(), PI);
        assert_eq!(normalize_angle(-PI).unwrap(), PI);
        assert!(normalize_angle(f64::NAN).is_err());
        assert!(normalize_angle(f64::INFINITY).is_err());
    }

    #[test]
    fn pose_transform_rotates_then_translates() {
        let p = Pose2D::new(1.0, 0.0, PI / 2.0);
        let [x, y] = p.transform_point([0.0, 0.3]);
        assert!((x - 0.7).abs() < 1e-12 && y.abs() < 1e-12);
    }

    fn v3() -> impl Strategy<Value = Vec3<f64>> {
        (-50.0..50.0f64, -50.0..50.0f64, -50.0..50.0f64).prop_map(|(x, y, z)| Vec3::new(x, y, z))
    }

    proptest! {
        #[test]
        fn triangle_inequality(a in v3(), b in v3(), c in v3()) {
            prop_assert!(distance(a, c) <= distance(a, b) + distance(b, c) + 1e-9);
            prop_assert_eq!(distance(a, b), distance(b, a));
        }

        #[test]
        fn normalize_idempotent_and_in_range(theta in -1e4..1e4f64) {
            let n = normalize_angle(theta).unwrap();
            prop_assert!(n > -PI && n <= PI);
            prop_assert_eq!(normalize_angle(n).unwrap(), n);
            // equivalent mod 2pi
            let k = ((theta - n) / (2.0 * PI)).round();
            prop_assert!((theta - n - k * 2.0 * PI).abs() < 1e-9);
        }
    }
}
