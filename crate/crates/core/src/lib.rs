//! Deterministic simulator and planning library for a leader-follower drone
//! swarm landing on a moving ground robot.
//!
//! The geometric and planning code ([`geometry`], [`apf`], [`formation`],
//! [`vision`], [`vehicles`]) is generic over the scalar type through
//! [`Real`]. The simulation layers ([`mission`], [`sim`], [`metrics`],
//! [`scenario`], [`output`]) run in `f64` through the aliases below.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod apf;
pub mod error;
pub mod formation;
pub mod geometry;
pub mod scalar;
pub mod vehicles;
pub mod vision;

pub use error::{Error, Result};
pub use geometry::{distance, normalize_angle, AgentId};
pub use scalar::Real;

pub type Vec3 = geometry::Vec3<f64>;
pub type Vec3f = geometry::Vec3<f32>;
pub type Pose2D = geometry::Pose2D<f64>;
pub type Pose2Df = geometry::Pose2D<f32>;
pub type AgentState = geometry::AgentState<f64>;
pub type AgentStatef = geometry::AgentState<f32>;
pub type RoverState = geometry::RoverState<f64>;
pub type ApfParams = apf::ApfParams<f64>;
pub type ApfParamsf = apf::ApfParams<f32>;
pub type Obstacle = apf::Obstacle<f64>;
pub type FormationSpec = formation::FormationSpec<f64>;
pub type CameraModel = vision::CameraModel<f64>;
pub type NoiseModel = vision::NoiseModel<f64>;
pub type TagObservation = vision::TagObservation<f64>;
pub type DroneParams = vehicles::DroneParams<f64>;
pub type RoverCommand = vehicles::RoverCommand<f64>;
pub type RoverSchedule = vehicles::RoverSchedule<f64>;

pub mod metrics;
pub mod mission;
pub mod output;
pub mod scenario;
pub mod sim;

pub use scenario::Scenario;
pub use sim::{run, run_batch, run_batch_with, SimTrace};
