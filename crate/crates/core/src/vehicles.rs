//! Discrete-time motion models for the drones and the rover.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{AgentState, Pose2D, RoverState, Vec3};
use crate::scalar::Real;

pub const LEADER_MASS_KG: f64 = 0.262;
pub const FOLLOWER_MASS_KG: f64 = 0.032;

/// Velocity-setpoint drone: point mass whose velocity relaxes toward the
/// clamped setpoint with a first-order time constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DroneParams<T> {
    pub v_max_xy: T,
    pub v_max_z: T,
    pub response_tau: T,
    pub collision_radius: T,
    /// Bookkeeping only; dynamics are mass independent.
    pub mass: T,
}

impl<T: Real> DroneParams<T> {
    pub fn follower() -> Self {
        Self {
            v_max_xy: T::lit(2.0),
            v_max_z: T::lit(1.0),
            response_tau: T::lit(0.15),
            collision_radius: T::lit(0.08),
            mass: T::lit(FOLLOWER_MASS_KG),
        }
    }

    pub fn leader() -> Self {
        Self {
            mass: T::lit(LEADER_MASS_KG),
            ..Self::follower()
        }
    }

    pub fn validate(&self, prefix: &str) -> Vec<String> {
        [
            ("v_max_xy", self.v_max_xy),
            ("v_max_z", self.v_max_z),
            ("response_tau", self.response_tau),
            ("collision_radius", self.collision_radius),
            ("mass", self.mass),
        ]
        .into_iter()
        .filter(|(_, v)| !(v.is_finite() && *v > T::zero()))
        .map(|(name, _)| format!("{prefix}.{name} > 0"))
        .collect()
    }

    /// Horizontal and vertical speed limits applied separately.
    pub fn clamp_velocity(&self, v: Vec3<T>) -> Vec3<T> {
        let h = v.horizontal_norm();
        let (x, y) = if h > self.v_max_xy {
            let k = self.v_max_xy / h;
            (v.x * k, v.y * k)
        } else {
            (v.x, v.y)
        };
        Vec3::new(x, y, v.z.max(-self.v_max_z).min(self.v_max_z))
    }
}

impl<T: Real> Default for DroneParams<T> {
    fn default() -> Self {
        Self::follower()
    }
}

/// Advances one drone by `dt`.
///
/// Velocity follows `v' = s + (v - s) exp(-dt/tau)` toward the clamped
/// setpoint `s`; position advances by the exact integral of that
/// exponential. Drones with motors off are returned unchanged.
pub fn drone_step<T: Real>(state: &AgentState<T>, setpoint: Vec3<T>, params: &DroneParams<T>, dt: T) -> AgentState<T> {
    if !state.motors_on {
        return *state;
    }
    let s = params.clamp_velocity(setpoint);
    let decay = (-dt / params.response_tau).exp();
    let v0 = state.velocity;
    let v1 = s + (v0 - s) * decay;
    let displacement = s * dt + (v0 - s) * (params.response_tau * (T::one() - decay));
    AgentState {
        position: state.position + displacement,
        velocity: params.clamp_velocity(v1),
        ..*state
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RoverCommand<T> {
    pub linear: T,
    pub angular: T,
}

/// sin(x)/x, accurate near zero.
fn sinc<T: Real>(x: T) -> T {
    if x.abs() < T::lit(1e-4) {
        let x2 = x * x;
        T::one() - x2 / T::lit(6.0) + x2 * x2 / T::lit(120.0)
    } else {
        x.sin() / x
    }
}

/// Unicycle update with exact arc integration.
///
/// Uses the chord form `d = v dt sinc(w dt / 2)` along heading
/// `theta + w dt / 2`, which equals the textbook `v/w (sin(theta + w dt) - sin theta)`
/// expression but stays well conditioned as `w -> 0`.
pub fn rover_step<T: Real>(state: &RoverState<T>, cmd: &RoverCommand<T>, dt: T) -> RoverState<T> {
    let half = cmd.angular * dt * T::lit(0.5);
    let chord = cmd.linear * dt * sinc(half);
    let mid = state.pose.theta + half;
    let pose = Pose2D::new(
        state.pose.x + chord * mid.cos(),
        state.pose.y + chord * mid.sin(),
        state.pose.theta + cmd.angular * dt,
    );
    RoverState {
        pose,
        linear_speed: cmd.linear,
        angular_speed: cmd.angular,
        pad_height: state.pad_height,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CommandSegment<T> {
    pub start: T,
    pub end: T,
    pub command: RoverCommand<T>,
}

/// Time-indexed rover command schedule; zero command outside every segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoverSchedule<T> {
    /// Heading the rover is placed at before the schedule starts.
    pub heading: T,
    pub segments: Vec<CommandSegment<T>>,
}

impl<T: Real> RoverSchedule<T> {
    pub fn command_at(&self, t: T) -> RoverCommand<T> {
        self.segments
            .iter()
            .find(|s| t >= s.start && t < s.end)
            .map(|s| s.command)
            .unwrap_or_default()
    }
}

/// Constant forward speed along `heading` for `duration` seconds.
pub fn straight_line_mission<T: Real>(speed: T, heading: T, duration: T) -> Result<RoverSchedule<T>> {
    if !(speed >= T::zero() && speed.is_finite()) {
        return Err(Error::InvalidScenario(vec!["rover speed >= 0".to_string()]));
    }
    if !(duration >= T::zero() && heading.is_finite()) {
        return Err(Error::InvalidScenario(vec!["rover mission duration >= 0".to_string()]));
    }
    Ok(RoverSchedule {
        heading,
        segments: vec![CommandSegment {
            start: T::zero(),
            end: duration,
            command: RoverCommand {
                linear: speed,
                angular: T::zero(),
            },
        }],
    })
}
