//! Synthetic fiducial-tag sensor carried by the leader and the
//! feature-level motion estimators that sit behind it.
//!
//! Detection is a range gate plus a cone field of view around the camera's
//! optical axis; image-space processing is not modelled.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{wrap_angle, AgentState, Pose2D, Vec3};
use crate::scalar::Real;

/// Side length of the printed tag, meters.
pub const TAG_SIDE: f64 = 0.166;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CameraModel<T> {
    /// Camera position relative to the leader body origin (world-aligned axes).
    pub mount_offset: Vec3<T>,
    /// Unit vector along the optical axis (world-aligned axes).
    pub optical_axis: Vec3<T>,
    pub fov_half_angle: T,
    pub min_range: T,
    pub max_range: T,
    /// Frame rate, Hz.
    pub rate: T,
    /// Processing delay between capture and delivery, seconds.
    pub latency: T,
}

impl<T: Real> Default for CameraModel<T> {
    fn default() -> Self {
        Self {
            mount_offset: Vec3::zero(),
            optical_axis: Vec3::new(T::zero(), T::zero(), -T::one()),
            fov_half_angle: T::lit(1.2),
            min_range: T::lit(0.30),
            max_range: T::lit(4.0),
            rate: T::lit(30.0),
            latency: T::zero(),
        }
    }
}

impl<T: Real> CameraModel<T> {
    pub fn validate(&self) -> Vec<String> {
        let mut bad = Vec::new();
        if !(self.min_range > T::zero() && self.min_range < self.max_range && self.max_range.is_finite()) {
            bad.push("camera: 0 < min_range < max_range".to_string());
        }
        if !(self.rate > T::zero() && self.rate.is_finite()) {
            bad.push("camera.rate > 0".to_string());
        }
        if !(self.fov_half_angle > T::zero() && self.fov_half_angle <= T::PI()) {
            bad.push("camera.fov_half_angle in (0, pi]".to_string());
        }
        if !(self.latency >= T::zero() && self.latency.is_finite()) {
            bad.push("camera.latency >= 0".to_string());
        }
        if !self.mount_offset.is_finite() {
            bad.push("camera.mount_offset finite".to_string());
        }
        let n = self.optical_axis.norm();
        if !(n.is_finite() && (n - T::one()).abs() < T::lit(1e-6)) {
            bad.push("camera.optical_axis must be a unit vector".to_string());
        }
        bad
    }

    /// True when a point at `relative` (camera to target) is inside the
    /// range gate and the field-of-view cone.
    pub fn sees(&self, relative: Vec3<T>) -> bool {
        let range = relative.norm();
        if !(range >= self.min_range && range <= self.max_range) {
            return false;
        }
        let cos_angle = relative.dot(self.optical_axis) / range;
        cos_angle >= self.fov_half_angle.cos()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseModel<T> {
    /// Per-axis Gaussian position noise, meters.
    pub sigma_pos: T,
    /// Gaussian yaw noise, radians.
    pub sigma_yaw: T,
    /// Probability that a frame yields no detection.
    pub dropout_prob: T,
}

impl<T: Real> NoiseModel<T> {
    pub fn noiseless() -> Self {
        Self {
            sigma_pos: T::zero(),
            sigma_yaw: T::zero(),
            dropout_prob: T::zero(),
        }
    }

    pub fn validate(&self) -> Vec<String> {
        let mut bad = Vec::new();
        if !(self.sigma_pos >= T::zero() && self.sigma_pos.is_finite()) {
            bad.push("noise.sigma_pos >= 0".to_string());
        }
        if !(self.sigma_yaw >= T::zero() && self.sigma_yaw.is_finite()) {
            bad.push("noise.sigma_yaw >= 0".to_string());
        }
        if !(self.dropout_prob >= T::zero() && self.dropout_prob <= T::one()) {
            bad.push("noise.dropout_prob in [0, 1]".to_string());
        }
        bad
    }
}

impl<T: Real> Default for NoiseModel<T> {
    fn default() -> Self {
        Self {
            sigma_pos: T::lit(DEFAULT_SIGMA_POS),
            sigma_yaw: T::lit(0.01),
            dropout_prob: T::lit(0.02),
        }
    }
}

/// Position noise, rounded from the calibrated value that gives a 4.48 cm
/// static landing RMSE on the default scenario (`swarmsim calibrate`).
pub const DEFAULT_SIGMA_POS: f64 = 0.05;

/// Relative pose of the tag as reported by the leader's camera.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TagObservation<T> {
    /// Capture time, seconds.
    pub timestamp: T,
    /// Tag center minus camera position, world-aligned axes.
    pub relative_position: Vec3<T>,
    pub tag_yaw: T,
}

/// Samples the tag sensor.
///
/// Always consumes exactly five draws from `rng` (dropout, three position
/// axes, yaw) whether or not a detection results, so the random stream stays
/// aligned across scenarios that differ only in geometry. The gate is applied
/// to the true relative position; noise may push the reported range slightly
/// past the envelope.
#[allow(clippy::too_many_arguments)]
pub fn detect_tag<T, R>(
    leader: &AgentState<T>,
    tag_pose: &Pose2D<T>,
    tag_height: T,
    cam: &CameraModel<T>,
    noise: &NoiseModel<T>,
    timestamp: T,
    rng: &mut R,
) -> Option<TagObservation<T>>
where
    T: Real,
    R: Rng + ?Sized,
    StandardNormal: Distribution<T>,
{
    let u: f64 = rng.random();
    let nx: T = rng.sample(StandardNormal);
    let ny: T = rng.sample(StandardNormal);
    let nz: T = rng.sample(StandardNormal);
    let nyaw: T = rng.sample(StandardNormal);

    let camera = leader.position + cam.mount_offset;
    let relative = tag_pose.position(tag_height) - camera;
    if !cam.sees(relative) {
        return None;
    }
    if u < noise.dropout_prob.to_f64().unwrap_or(0.0) {
        return None;
    }
    Some(TagObservation {
        timestamp,
        relative_position: relative + Vec3::new(nx, ny, nz) * noise.sigma_pos,
        tag_yaw: wrap_angle(tag_pose.theta + nyaw * noise.sigma_yaw),
    })
}

/// Least-squares planar rigid transform between corresponding point sets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform2<T> {
    pub rotation: T,
    pub translation: [T; 2],
    pub rms_residual: T,
}

impl<T: Real> RigidTransform2<T> {
    pub fn apply(&self, p: [T; 2]) -> [T; 2] {
        let (s, c) = self.rotation.sin_cos();
        [
            c * p[0] - s * p[1] + self.translation[0],
            s * p[0] + c * p[1] + self.translation[1],
        ]
    }

    /// Root-mean-square distance between `apply(prev[i])` and `curr[i]`.
    pub fn rms_error(&self, prev: &[[T; 2]], curr: &[[T; 2]]) -> T {
        let n = T::from_usize(prev.len()).unwrap();
        let sum = prev.iter().zip(curr).fold(T::zero(), |acc, (p, q)| {
            let m = self.apply(*p);
            let dx = m[0] - q[0];
            let dy = m[1] - q[1];
            acc + dx * dx + dy * dy
        });
        (sum / n).sqrt()
    }
}

fn centroid<T: Real>(pts: &[[T; 2]]) -> [T; 2] {
    let n = T::from_usize(pts.len()).unwrap();
    let (sx, sy) = pts.iter().fold((T::zero(), T::zero()), |(sx, sy), p| (sx + p[0], sy + p[1]));
    [sx / n, sy / n]
}

/// Rotation + translation (no scale) taking `prev` onto `curr` in the least
/// squares sense. Closed-form 2-D orthogonal Procrustes: subtract centroids,
/// take the angle of the cross-covariance.
pub fn estimate_rigid_transform<T: Real>(prev: &[[T; 2]], curr: &[[T; 2]]) -> Result<RigidTransform2<T>> {
    if prev.len() != curr.len() {
        return Err(Error::LengthMismatch(prev.len(), curr.len()));
    }
    if prev.len() < 2 {
        return Err(Error::TooFew {
            what: "point correspondences",
            needed: 2,
            got: prev.len(),
        });
    }
    if prev.iter().chain(curr).any(|p| !(p[0].is_finite() && p[1].is_finite())) {
        return Err(Error::NonFinite("point coordinates"));
    }
    let cp = centroid(prev);
    let cc = centroid(curr);

    let mut dot = T::zero();
    let mut cross = T::zero();
    let mut spread_prev = T::zero();
    let mut spread_curr = T::zero();
    for (p, q) in prev.iter().zip(curr) {
        let a = [p[0] - cp[0], p[1] - cp[1]];
        let b = [q[0] - cc[0], q[1] - cc[1]];
        dot = dot + a[0] * b[0] + a[1] * b[1];
        cross = cross + a[0] * b[1] - a[1] * b[0];
        spread_prev = spread_prev + a[0] * a[0] + a[1] * a[1];
        spread_curr = spread_curr + b[0] * b[0] + b[1] * b[1];
    }
    if spread_prev == T::zero() || spread_curr == T::zero() {
        return Err(Error::DegeneratePoints);
    }

    let rotation = cross.atan2(dot);
    let (s, c) = rotation.sin_cos();
    let translation = [
        cc[0] - (c * cp[0] - s * cp[1]),
        cc[1] - (s * cp[0] + c * cp[1]),
    ];
    let mut t = RigidTransform2 {
        rotation,
        translation,
        rms_residual: T::zero(),
    };
    t.rms_residual = t.rms_error(prev, curr);
    Ok(t)
}

/// Mean of consecutive finite-difference velocities over timestamped samples.
pub fn finite_difference_velocity<T: Real>(samples: &[(T, Vec3<T>)]) -> Result<Vec3<T>> {
    if samples.len() < 2 {
        return Err(Error::TooFew {
            what: "samples",
            needed: 2,
            got: samples.len(),
        });
    }
    let mut sum = Vec3::zero();
    for w in samples.windows(2) {
        let dt = w[1].0 - w[0].0;
        if !(dt > T::zero()) {
            return Err(Error::NonIncreasingTimestamps);
        }
        sum += (w[1].1 - w[0].1) / dt;
    }
    Ok(sum / T::from_usize(samples.len() - 1).unwrap())
}

/// Velocity of the tag relative to the camera, as a moving average of the
/// finite differences across the given frames (oldest first).
pub fn compensated_tag_velocity<T: Real>(observations: &[TagObservation<T>]) -> Result<Vec3<T>> {
    let samples: Vec<_> = observations
        .iter()
        .map(|o| (o.timestamp, o.relative_position))
        .collect();
    finite_difference_velocity(&samples)
}
