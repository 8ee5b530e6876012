//! Scenario description, JSON parsing and validation.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::formation::slot_targets;
use crate::mission::MissionParams;
use crate::vehicles::straight_line_mission;
use crate::{
    distance, AgentId, ApfParams, CameraModel, DroneParams, FormationSpec, NoiseModel, Pose2D, RoverSchedule, Vec3,
};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DroneInit {
    pub id: AgentId,
    pub position: Vec3,
    /// Initial velocity; omitted means starting from a hover.
    #[serde(default, skip_serializing_if = "is_zero")]
    pub velocity: Vec3,
}

impl DroneInit {
    pub fn hovering(id: u32, x: f64, y: f64, z: f64) -> Self {
        Self { id: AgentId(id), position: Vec3::new(x, y, z), velocity: Vec3::zero() }
    }
}

fn is_zero(v: &Vec3) -> bool {
    *v == Vec3::zero()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RoverConfig {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    /// Straight-line speed, m/s.
    pub speed: f64,
    /// How long the rover drives; `None` drives for the whole run.
    pub mission_duration: Option<f64>,
    pub pad_height: f64,
    pub body_radius: f64,
}

impl Default for RoverConfig {
    fn default() -> Self {
        Self {
            x: 0.0,
            y: 0.0,
            heading: 0.0,
            speed: 0.0,
            mission_duration: None,
            pad_height: 0.70,
            body_radius: 0.30,
        }
    }
}

/// Expands one scenario into one copy per listed rover speed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub rover_speeds: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Scenario {
    pub schema_version: u32,
    pub seed: u64,
    pub dt: f64,
    pub duration: f64,
    pub drones: Vec<DroneInit>,
    pub rover: RoverConfig,
    pub apf: ApfParams,
    pub leader_drone: DroneParams,
    pub follower_drone: DroneParams,
    pub formation: FormationSpec,
    pub mission: MissionParams,
    pub camera: CameraModel,
    pub noise: NoiseModel,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Sweep>,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            seed: 0,
            dt: 0.01,
            duration: 40.0,
            drones: vec![
                DroneInit::hovering(0, -1.5, 0.0, 1.5),
                DroneInit::hovering(1, -1.8, 0.5, 1.5),
                DroneInit::hovering(2, -1.8, -0.5, 1.5),
            ],
            rover: RoverConfig::default(),
            apf: ApfParams::default(),
            leader_drone: DroneParams::leader(),
            follower_drone: DroneParams::follower(),
            formation: FormationSpec::default(),
            mission: MissionParams::default(),
            camera: CameraModel::default(),
            noise: NoiseModel::default(),
            sweep: None,
        }
    }
}

impl Scenario {
    pub fn with_speed(mut self, speed: f64) -> Self {
        self.rover.speed = speed;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Places every drone on its slot at follow altitude, already moving
    /// with the rover, so the run starts from settled tracking. Call after
    /// the rover config is final.
    pub fn starting_in_formation(mut self) -> Self {
        let pose = Pose2D::new(self.rover.x, self.rover.y, self.rover.heading);
        let altitude = self.rover.pad_height + self.mission.follow_altitude;
        let targets = slot_targets(&pose, &self.formation, altitude);
        let (s, c) = self.rover.heading.sin_cos();
        let velocity = Vec3::new(self.rover.speed * c, self.rover.speed * s, 0.0);
        self.drones = targets
            .into_iter()
            .map(|(id, position)| DroneInit { id, position, velocity })
            .collect();
        self
    }

    pub fn noiseless(mut self) -> Self {
        self.noise = NoiseModel::noiseless();
        self
    }

    pub fn drone_params(&self, id: AgentId) -> &DroneParams {
        if id == self.formation.leader {
            &self.leader_drone
        } else {
            &self.follower_drone
        }
    }

    pub fn collision_radius(&self) -> f64 {
        self.leader_drone.collision_radius.max(self.follower_drone.collision_radius)
    }

    pub fn tick_count(&self) -> usize {
        ((self.duration / self.dt) + 1e-9).floor() as usize
    }

    pub fn rover_schedule(&self) -> Result<RoverSchedule> {
        let duration = self.rover.mission_duration.unwrap_or(self.duration);
        straight_line_mission(self.rover.speed, self.rover.heading, duration)
    }

    /// Every violated invariant, as human-readable strings.
    pub fn violations(&self) -> Vec<String> {
        let mut bad = Vec::new();
        if self.schema_version != SCHEMA_VERSION {
            bad.push(format!("schema_version must be {SCHEMA_VERSION} (got {})", self.schema_version));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            bad.push(format!("dt > 0 (got {})", self.dt));
        }
        if !(self.duration >= self.dt && self.duration.is_finite()) {
            bad.push(format!("duration >= dt (got {})", self.duration));
        }
        if !(self.rover.speed >= 0.0 && self.rover.speed.is_finite()) {
            bad.push(format!("rover.speed >= 0 (got {})", self.rover.speed));
        }
        if let Some(d) = self.rover.mission_duration {
            if !(d >= 0.0) {
                bad.push(format!("rover.mission_duration >= 0 (got {d})"));
            }
        }
        if !(self.rover.pad_height > 0.0) {
            bad.push(format!("rover.pad_height > 0 (got {})", self.rover.pad_height));
        }
        if !(self.rover.body_radius > 0.0) {
            bad.push(format!("rover.body_radius > 0 (got {})", self.rover.body_radius));
        }
        if ![self.rover.x, self.rover.y, self.rover.heading].iter().all(|v| v.is_finite()) {
            bad.push("rover pose finite".to_string());
        }
        if let Err(Error::InvalidScenario(v)) = self.apf.validate() {
            bad.extend(v);
        }
        bad.extend(self.leader_drone.validate("leader_drone"));
        bad.extend(self.follower_drone.validate("follower_drone"));
        bad.extend(self.mission.validate());
        bad.extend(self.camera.validate());
        bad.extend(self.noise.validate());
        if let Err(e) = self.formation.validate(self.collision_radius()) {
            bad.push(e.to_string());
        }
        if let Some(s) = &self.sweep {
            if s.rover_speeds.is_empty() {
                bad.push("sweep.rover_speeds must not be empty".to_string());
            }
            for v in &s.rover_speeds {
                if !(*v >= 0.0 && v.is_finite()) {
                    bad.push(format!("sweep.rover_speeds >= 0 (got {v})"));
                }
            }
        }

        if self.drones.is_empty() {
            bad.push("at least one drone".to_string());
        }
        for (i, a) in self.drones.iter().enumerate() {
            if !a.position.is_finite() {
                bad.push(format!("drone {} position finite", a.id));
            }
            if self.formation.offset_of(a.id).is_none() {
                bad.push(format!("drone {} has no formation slot", a.id));
            }
            for b in &self.drones[i + 1..] {
                if a.id == b.id {
                    bad.push(format!("duplicate drone id {}", a.id));
                }
                let d = distance(a.position, b.position);
                if !(d >= 2.0 * self.collision_radius()) {
                    bad.push(format!(
                        "drones {} and {} start {d:.3} m apart, need >= 2*collision_radius",
                        a.id, b.id
                    ));
                }
            }
        }
        for id in self.formation.ids() {
            if !self.drones.iter().any(|d| d.id == id) {
                bad.push(format!("formation slot {id} has no drone"));
            }
        }
        match self.drones.iter().find(|d| d.id == self.formation.leader) {
            None => bad.push(format!("leader {} is not among the drones", self.formation.leader)),
            Some(l) => {
                let tag = Vec3::new(self.rover.x, self.rover.y, self.rover.pad_height);
                let d = distance(l.position + self.camera.mount_offset, tag);
                if !(d <= self.camera.max_range) {
                    bad.push(format!(
                        "initial leader-pad distance {d:.3} m exceeds camera max_range {}",
                        self.camera.max_range
                    ));
                }
            }
        }
        bad
    }

    pub fn validate(&self) -> Result<()> {
        let bad = self.violations();
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidScenario(bad))
        }
    }

    /// One scenario per sweep speed, or just `self` when there is no sweep.
    pub fn expand(&self) -> Vec<Scenario> {
        match &self.sweep {
            None => vec![self.clone()],
            Some(s) => s
                .rover_speeds
                .iter()
                .map(|&v| Scenario {
                    sweep: None,
                    ..self.clone()
                }
                .with_speed(v))
                .collect(),
        }
    }

    /// Short content hash of the scenario (seed included).
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("scenario serializes");
        let digest = Sha256::digest(&bytes);
        hex::encode(&digest[..8])
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }
}

/// Parses and validates scenario JSON text.
pub fn parse_scenario_str(text: &str) -> Result<Scenario> {
    let s: Scenario = serde_json::from_str(text).map_err(|e| Error::ScenarioSyntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    s.validate()?;
    Ok(s)
}

pub fn parse_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_scenario_str(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_file_gets_defaults() {
        let s = parse_scenario_str(r#"{"seed": 7, "rover": {"speed": 1.0}}"#).unwrap();
        assert_eq!(s, Scenario::default().with_seed(7).with_speed(1.0));
    }

    #[test]
    fn negative_speed_names_invariant() {
        let err = parse_scenario_str(r#"{"seed": 7, "rover": {"speed": -1}}"#).unwrap_err();
        assert!(err.to_string().contains("rover.speed >= 0"), "{err}");
    }

    #[test]
    fn unknown_keys_rejected() {
        let err = parse_scenario_str(r#"{"seed": 7, "rover": {"sped": 1.0}}"#).unwrap_err();
        assert!(matches!(err, Error::ScenarioSyntax { line: 1, .. }), "{err}");
        assert!(parse_scenario_str(r#"{"seed": 7, "bogus": 1}"#).is_err());
    }

    #[test]
    fn syntax_error_has_position() {
        let err = parse_scenario_str("{\n  \"seed\": 7,\n  \"dt\": }").unwrap_err();
        match err {
            Error::ScenarioSyntax { line, column, .. } => {
                assert_eq!(line, 3);
                assert!(column > 0);
            }
            e => panic!("{e}"),
        }
    }

    #[test]
    fn sweep_expands_per_speed() {
        let s = parse_scenario_str(r#"{"seed": 1, "sweep": {"rover_speeds": [0, 0.5, 1.0, 1.5]}}"#).unwrap();
        let all = s.expand();
        assert_eq!(all.len(), 4);
        let speeds: Vec<f64> = all.iter().map(|s| s.rover.speed).collect();
        assert_eq!(speeds, vec![0.0, 0.5, 1.0, 1.5]);
        assert!(all.iter().all(|s| s.sweep.is_none()));
    }

    #[test]
    fn crowded_start_rejected() {
        let mut s = Scenario::default();
        s.drones[1].position = s.drones[0].position + Vec3::new(0.1, 0.0, 0.0);
        let err = s.validate().unwrap_err();
        assert!(err.to_string().contains("collision_radius"), "{err}");
    }

    #[test]
    fn far_leader_rejected() {
        let mut s = Scenario::default();
        s.rover.x = 5.0;
        assert!(s.validate().unwrap_err().to_string().contains("max_range"));
    }

    #[test]
    fn default_is_valid() {
        Scenario::default().validate().unwrap();
    }

    #[test]
    fn hash_tracks_content() {
        let a = Scenario::default();
        assert_eq!(a.hash(), a.clone().hash());
        assert_ne!(a.hash(), a.clone().with_seed(1).hash());
    }
}
