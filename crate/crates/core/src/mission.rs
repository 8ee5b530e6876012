//! Swarm landing state machine.
//!
//! Search for the tag, follow the pad in formation at a fixed altitude,
//! descend together once the formation is inside the landing threshold and
//! cut each drone's motors as it reaches the pad surface.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::formation::{formation_error, slot_targets};
use crate::geometry::{horizontal_distance, wrap_angle};
use crate::{AgentId, AgentState, CameraModel, FormationSpec, Pose2D, TagObservation, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PhaseKind {
    Search,
    Follow,
    Descend,
    Touchdown,
    Aborted,
}

impl PhaseKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PhaseKind::Search => "search",
            PhaseKind::Follow => "follow",
            PhaseKind::Descend => "descend",
            PhaseKind::Touchdown => "touchdown",
            PhaseKind::Aborted => "aborted",
        }
    }

    pub fn is_terminal(self) -> bool {
        matches!(self, PhaseKind::Touchdown | PhaseKind::Aborted)
    }

    /// Edges of the transition graph: the forward chain
    /// Search -> Follow -> Descend -> Touchdown, the one regression
    /// Descend -> Follow, and an abort from any live phase.
    pub fn can_transition_to(self, next: PhaseKind) -> bool {
        use PhaseKind::*;
        matches!(
            (self, next),
            (Search, Follow)
                | (Follow, Descend)
                | (Descend, Touchdown)
                | (Descend, Follow)
                | (Search, Aborted)
                | (Follow, Aborted)
                | (Descend, Aborted)
        )
    }
}

impl fmt::Display for PhaseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MissionPhase {
    pub kind: PhaseKind,
    pub entered_at: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MissionParams {
    /// Cruise height above the pad surface while following, meters.
    pub follow_altitude: f64,
    /// Formation error at which descent starts; also the per-drone slot
    /// error allowed at touchdown, meters.
    pub landing_threshold: f64,
    /// How long the formation error must stay inside `landing_threshold`
    /// before descent starts, seconds. Zero descends on the first tick inside.
    pub settle_time: f64,
    /// Formation error that aborts a descent back to following, meters.
    pub regress_threshold: f64,
    /// Height above the pad surface counted as contact, meters.
    pub touchdown_tolerance: f64,
    pub descent_rate: f64,
    pub search_timeout: f64,
    /// Longest gap between detections before the pad estimate is dropped, s.
    pub estimate_hold: f64,
    /// Leader height above the pad under which the tag is expected to be
    /// inside the camera's minimum range; below it the estimate keeps
    /// extrapolating for up to `blind_hold` seconds.
    pub blind_descent_height: f64,
    pub blind_hold: f64,
    /// Number of camera frames averaged for the pad position.
    pub track_window: usize,
    /// Number of camera frames fitted for the velocity that carries the
    /// estimate past the newest detection. Longer than `track_window` so
    /// blind stretches do not amplify velocity noise, at the cost of slower
    /// reaction to rover maneuvers.
    pub velocity_window: usize,
}

/// Landings with a final horizontal error above this count as failures, meters.
pub const SUCCESS_THRESHOLD: f64 = 0.15;

impl Default for MissionParams {
    fn default() -> Self {
        Self {
            follow_altitude: 1.0,
            landing_threshold: 0.10,
            settle_time: 1.0,
            regress_threshold: 0.20,
            touchdown_tolerance: 0.03,
            descent_rate: 0.4,
            search_timeout: 10.0,
            estimate_hold: 0.5,
            blind_descent_height: 0.35,
            blind_hold: 2.0,
            track_window: 15,
            velocity_window: 60,
        }
    }
}

impl MissionParams {
    pub fn validate(&self) -> Vec<String> {
        let mut bad: Vec<String> = [
            ("mission.follow_altitude", self.follow_altitude),
            ("mission.landing_threshold", self.landing_threshold),
            ("mission.regress_threshold", self.regress_threshold),
            ("mission.touchdown_tolerance", self.touchdown_tolerance),
            ("mission.descent_rate", self.descent_rate),
            ("mission.search_timeout", self.search_timeout),
            ("mission.estimate_hold", self.estimate_hold),
            ("mission.blind_descent_height", self.blind_descent_height),
            ("mission.blind_hold", self.blind_hold),
        ]
        .into_iter()
        .filter(|(_, v)| !(v.is_finite() && *v > 0.0))
        .map(|(n, _)| format!("{n} > 0"))
        .collect();
        if self.landing_threshold > SUCCESS_THRESHOLD {
            bad.push(format!("mission.landing_threshold <= {SUCCESS_THRESHOLD}"));
        }
        if !(self.settle_time >= 0.0 && self.settle_time.is_finite()) {
            bad.push("mission.settle_time >= 0".to_string());
        }
        if self.regress_threshold < self.landing_threshold {
            bad.push("mission.regress_threshold >= mission.landing_threshold".to_string());
        }
        if self.track_window < 2 {
            bad.push("mission.track_window >= 2".to_string());
        }
        if self.velocity_window < 2 {
            bad.push("mission.velocity_window >= 2".to_string());
        }
        bad
    }
}

/// World-frame pad pose recovered from one detection: the leader's mocap
/// position plus the camera mount offset plus the observed relative vector.
/// Returns the pose and the observed pad surface height.
pub fn estimate_pad_pose(leader: &AgentState, obs: &TagObservation, cam: &CameraModel) -> (Pose2D, f64) {
    let p = leader.position + cam.mount_offset + obs.relative_position;
    (Pose2D::new(p.x, p.y, obs.tag_yaw), p.z)
}

/// Filtered pad state, valid at `now`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PadEstimate {
    pub pose: Pose2D,
    pub height: f64,
    /// Horizontal pad velocity, world frame.
    pub velocity: Vec3,
    /// Time since the newest detection, seconds.
    pub age: f64,
}

#[derive(Debug, Clone, Copy)]
struct PadSample {
    t: f64,
    position: Vec3,
    yaw: f64,
}

/// Sliding window over world-frame pad detections. The estimate is the
/// window mean moved forward by the fitted velocity, so it
/// extrapolates between frames and through short dropouts.
#[derive(Debug, Clone)]
pub struct PadTracker {
    window: usize,
    velocity_window: usize,
    max_gap: f64,
    samples: VecDeque<PadSample>,
}

impl PadTracker {
    /// Fits position and velocity over the last `window` samples; the
    /// velocity used to extrapolate past the newest sample is fitted over
    /// the last `velocity_window`.
    pub fn new(window: usize, velocity_window: usize, max_gap: f64) -> Self {
        Self {
            window: window.max(1),
            velocity_window: velocity_window.max(2),
            max_gap,
            samples: VecDeque::new(),
        }
    }

    pub fn push(&mut self, t: f64, pose: Pose2D, height: f64) {
        if let Some(last) = self.samples.back() {
            // a long gap means the old window no longer describes the pad
            if t - last.t > self.max_gap {
                self.samples.clear();
            }
        }
        self.samples.push_back(PadSample {
            t,
            position: pose.position(height),
            yaw: pose.theta,
        });
        while self.samples.len() > self.window.max(self.velocity_window) {
            self.samples.pop_front();
        }
    }

    /// Least-squares slope of position against time over the newest `n`
    /// samples; every sample weighs in, unlike a mean of consecutive
    /// differences.
    fn velocity(&self, n: usize) -> Vec3 {
        let n = self.samples.len().min(n);
        let fit = self.samples.iter().skip(self.samples.len() - n);
        let t_mean = fit.clone().map(|s| s.t).sum::<f64>() / n as f64;
        let p_mean = fit.clone().fold(Vec3::zero(), |acc, s| acc + s.position) / n as f64;
        let (mut stt, mut stp) = (0.0, Vec3::zero());
        for s in fit {
            let dt = s.t - t_mean;
            stt += dt * dt;
            stp += (s.position - p_mean) * dt;
        }
        if stt > 0.0 {
            (stp / stt).horizontal()
        } else {
            Vec3::zero()
        }
    }

    /// Pad pose at `now`: the short-window fit evaluated at the newest
    /// sample, then dead-reckoned with the long-window velocity.
    pub fn estimate(&self, now: f64) -> Option<PadEstimate> {
        let last = self.samples.back()?;
        let n = self.samples.len().min(self.window);
        let recent = self.samples.iter().skip(self.samples.len() - n);
        let (mut t_sum, mut p_sum, mut s_sum, mut c_sum) = (0.0, Vec3::zero(), 0.0, 0.0);
        for s in recent {
            t_sum += s.t;
            p_sum += s.position;
            s_sum += s.yaw.sin();
            c_sum += s.yaw.cos();
        }
        let t_mean = t_sum / n as f64;
        let p_mean = p_sum / n as f64;
        let v_short = self.velocity(self.window);
        let velocity = self.velocity(self.velocity_window);
        let p = p_mean + v_short * (last.t - t_mean) + velocity * (now - last.t);
        Some(PadEstimate {
            pose: Pose2D::new(p.x, p.y, wrap_angle(s_sum.atan2(c_sum))),
            height: p_mean.z,
            velocity,
            age: now - last.t,
        })
    }
}

/// Output of one state machine tick.
#[derive(Debug, Clone, PartialEq)]
pub struct MissionUpdate {
    pub phase: MissionPhase,
    pub transition: Option<(PhaseKind, PhaseKind)>,
    /// Position goals for every drone that is still flying.
    pub goals: BTreeMap<AgentId, Vec3>,
    /// Drones whose motors are cut this tick.
    pub touchdowns: Vec<AgentId>,
}

#[derive(Debug, Clone)]
pub struct Mission {
    params: MissionParams,
    formation: FormationSpec,
    /// Nominal pad surface height, known from the platform build.
    pad_height: f64,
    phase: MissionPhase,
    descent_started: f64,
    /// Start of the current run of ticks with the formation inside the threshold.
    settled_since: Option<f64>,
    /// When the pad estimate was lost while following.
    lost_since: Option<f64>,
    hold: BTreeMap<AgentId, Vec3>,
    landed: BTreeSet<AgentId>,
}

impl Mission {
    pub fn new(params: MissionParams, formation: FormationSpec, pad_height: f64, now: f64) -> Self {
        Self {
            params,
            formation,
            pad_height,
            phase: MissionPhase {
                kind: PhaseKind::Search,
                entered_at: now,
            },
            descent_started: now,
            settled_since: None,
            lost_since: None,
            hold: BTreeMap::new(),
            landed: BTreeSet::new(),
        }
    }

    pub fn phase(&self) -> MissionPhase {
        self.phase
    }

    pub fn params(&self) -> &MissionParams {
        &self.params
    }

    pub fn landed(&self) -> &BTreeSet<AgentId> {
        &self.landed
    }

    fn cruise_altitude(&self) -> f64 {
        self.pad_height + self.params.follow_altitude
    }

    /// Whether the pad estimate may still be trusted this tick.
    fn usable(&self, pad: &PadEstimate, swarm: &[AgentState]) -> bool {
        if pad.age <= self.params.estimate_hold {
            return true;
        }
        if self.phase.kind != PhaseKind::Descend || pad.age > self.params.blind_hold {
            return false;
        }
        swarm
            .iter()
            .find(|a| a.id == self.formation.leader)
            .is_some_and(|l| l.position.z - self.pad_height <= self.params.blind_descent_height)
    }

    fn enter(&mut self, kind: PhaseKind, now: f64) -> (PhaseKind, PhaseKind) {
        let from = self.phase.kind;
        debug_assert!(from.can_transition_to(kind), "{from} -> {kind}");
        self.phase = MissionPhase { kind, entered_at: now };
        match kind {
            PhaseKind::Descend => self.descent_started = now,
            PhaseKind::Follow => self.lost_since = None,
            _ => {}
        }
        if kind != PhaseKind::Follow {
            self.settled_since = None;
        }
        (from, kind)
    }

    /// Advances the state machine by one control tick.
    pub fn update(&mut self, swarm: &[AgentState], pad: Option<&PadEstimate>, now: f64) -> MissionUpdate {
        let flying: Vec<AgentState> = swarm
            .iter()
            .filter(|a| a.motors_on && !self.landed.contains(&a.id))
            .copied()
            .collect();
        if self.hold.is_empty() {
            self.hold = swarm.iter().map(|a| (a.id, a.position)).collect();
        }
        let pad = pad.filter(|p| self.usable(p, swarm)).copied();
        let mut transition = None;

        // at most one transition per tick
        match (self.phase.kind, pad) {
            (PhaseKind::Search, Some(_)) => transition = Some(self.enter(PhaseKind::Follow, now)),
            (PhaseKind::Search, None) if now - self.phase.entered_at >= self.params.search_timeout => {
                transition = Some(self.enter(PhaseKind::Aborted, now))
            }
            (PhaseKind::Follow, None) => {
                // hold in place; give up after as long as a search may take
                self.settled_since = None;
                let since = match self.lost_since {
                    Some(t) => t,
                    None => {
                        self.hold = flying.iter().map(|a| (a.id, a.position)).collect();
                        *self.lost_since.insert(now)
                    }
                };
                if now - since >= self.params.search_timeout {
                    transition = Some(self.enter(PhaseKind::Aborted, now));
                }
            }
            (PhaseKind::Descend, None) => transition = Some(self.enter(PhaseKind::Follow, now)),
            (PhaseKind::Follow, Some(p)) => {
                self.lost_since = None;
                let targets = slot_targets(&p.pose, &self.formation, self.cruise_altitude());
                let err = formation_error(&flying, &targets).unwrap_or(f64::INFINITY);
                if err <= self.params.landing_threshold {
                    let since = *self.settled_since.get_or_insert(now);
                    if now - since >= self.params.settle_time - 1e-9 {
                        transition = Some(self.enter(PhaseKind::Descend, now));
                    }
                } else {
                    self.settled_since = None;
                }
            }
            (PhaseKind::Descend, Some(p)) => {
                let targets = slot_targets(&p.pose, &self.formation, self.cruise_altitude());
                let err = formation_error(&flying, &targets).unwrap_or(f64::INFINITY);
                if err > self.params.regress_threshold {
                    transition = Some(self.enter(PhaseKind::Follow, now));
                }
            }
            _ => {}
        }

        let mut goals = BTreeMap::new();
        let mut touchdowns = Vec::new();
        match self.phase.kind {
            PhaseKind::Search => {
                let z = self.cruise_altitude();
                for a in &flying {
                    let h = self.hold.get(&a.id).copied().unwrap_or(a.position);
                    goals.insert(a.id, Vec3::new(h.x, h.y, z));
                }
            }
            PhaseKind::Follow => {
                let z = self.cruise_altitude();
                let targets = pad.map(|p| slot_targets(&p.pose, &self.formation, z));
                for a in &flying {
                    let goal = match &targets {
                        Some(t) => t.get(&a.id).copied(),
                        None => {
                            let h = self.hold.get(&a.id).copied().unwrap_or(a.position);
                            Some(Vec3::new(h.x, h.y, z))
                        }
                    };
                    if let Some(g) = goal {
                        goals.insert(a.id, g);
                    }
                }
            }
            PhaseKind::Descend => {
                let p = pad.expect("descend phase has a pad estimate");
                let z = (self.cruise_altitude() - self.params.descent_rate * (now - self.descent_started))
                    .max(self.pad_height);
                let targets = slot_targets(&p.pose, &self.formation, z);
                for a in &flying {
                    let Some(t) = targets.get(&a.id) else { continue };
                    let on_surface = a.position.z <= self.pad_height + self.params.touchdown_tolerance;
                    let on_slot = horizontal_distance(a.position, *t) <= self.params.landing_threshold;
                    if on_surface && on_slot {
                        touchdowns.push(a.id);
                        self.landed.insert(a.id);
                    } else {
                        goals.insert(a.id, *t);
                    }
                }
                if transition.is_none() && swarm.iter().all(|a| self.landed.contains(&a.id) || !a.motors_on) {
                    transition = Some(self.enter(PhaseKind::Touchdown, now));
                }
            }
            PhaseKind::Touchdown | PhaseKind::Aborted => {}
        }

        MissionUpdate {
            phase: self.phase,
            transition,
            goals,
            touchdowns,
        }
    }
}
