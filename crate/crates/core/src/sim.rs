//! Fixed-timestep orchestration of rover, camera, mission, planner and
//! drone dynamics.
//!
//! Each tick runs, in order: rover step, camera frame (when due), mission
//! update, potential-field setpoints for every flying drone (computed from
//! one snapshot), drone dynamics. A single ChaCha stream seeded from the
//! scenario seed is the only randomness.

use std::collections::{BTreeMap, VecDeque};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::apf::plan_step;
use crate::error::Result;
use crate::mission::{estimate_pad_pose, Mission, PadTracker, PhaseKind};
use crate::scenario::Scenario;
use crate::vehicles::{drone_step, rover_step};
use crate::vision::detect_tag;
use crate::{AgentId, AgentState, FormationSpec, Obstacle, Pose2D, RoverState, TagObservation, Vec3};

/// Extra simulated time after the last touchdown.
pub const TOUCHDOWN_GRACE: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickRecord {
    pub t: f64,
    pub agents: Vec<AgentState>,
    pub rover: RoverState,
    pub phase: PhaseKind,
    /// Present only on ticks where the camera captured a frame with a detection.
    pub observation: Option<TagObservation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum EventKind {
    Phase { from: PhaseKind, to: PhaseKind },
    Touchdown { agent: AgentId },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub t: f64,
    pub tick: usize,
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimTrace {
    pub seed: u64,
    pub scenario_hash: String,
    pub dt: f64,
    pub rover_speed: f64,
    pub collision_radius: f64,
    pub formation: FormationSpec,
    pub ticks: Vec<TickRecord>,
    pub events: Vec<Event>,
}

impl SimTrace {
    pub fn final_phase(&self) -> PhaseKind {
        self.ticks.last().map(|t| t.phase).unwrap_or(PhaseKind::Search)
    }

    pub fn aborted(&self) -> bool {
        self.final_phase() == PhaseKind::Aborted
    }

    pub fn touchdown_tick(&self, id: AgentId) -> Option<usize> {
        self.events.iter().find_map(|e| match e.kind {
            EventKind::Touchdown { agent } if agent == id => Some(e.tick),
            _ => None,
        })
    }

    /// Ordered list of phase changes.
    pub fn phase_changes(&self) -> impl Iterator<Item = (PhaseKind, PhaseKind)> + '_ {
        self.events.iter().filter_map(|e| match e.kind {
            EventKind::Phase { from, to } => Some((from, to)),
            _ => None,
        })
    }

    /// Smallest distance between any two drones over the whole trace.
    pub fn min_pairwise_distance(&self) -> f64 {
        let mut best = f64::INFINITY;
        for tick in &self.ticks {
            for (i, a) in tick.agents.iter().enumerate() {
                for b in &tick.agents[i + 1..] {
                    best = best.min((a.position - b.position).norm());
                }
            }
        }
        best
    }
}

/// Frame index of the camera at time `t`.
fn frame_index(t: f64, rate: f64) -> i64 {
    (t * rate + 1e-9).floor() as i64
}

/// Moves a point resting on the pad along with the pad.
fn carry(point: Vec3, from: &Pose2D, to: &Pose2D) -> Vec3 {
    let (s, c) = from.theta.sin_cos();
    let dx = point.x - from.x;
    let dy = point.y - from.y;
    let local = [c * dx + s * dy, -s * dx + c * dy];
    let [x, y] = to.transform_point(local);
    Vec3::new(x, y, point.z)
}

/// Runs one scenario to completion.
pub fn run(scenario: &Scenario) -> Result<SimTrace> {
    scenario.validate()?;
    let schedule = scenario.rover_schedule()?;
    let dt = scenario.dt;
    let cam = &scenario.camera;
    let leader_id = scenario.formation.leader;

    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let mut rover = RoverState::at_rest(
        Pose2D::new(scenario.rover.x, scenario.rover.y, schedule.heading),
        scenario.rover.pad_height,
    );
    let mut agents: Vec<AgentState> = {
        let mut v: Vec<_> = scenario
        .drones
        .iter()
        .map(|d| AgentState { velocity: d.velocity, ..AgentState::new(d.id, d.position) })
        .collect();
        v.sort_by_key(|a| a.id);
        v
    };
    let mut mission = Mission::new(scenario.mission, scenario.formation.clone(), scenario.rover.pad_height, 0.0);
    let mut tracker = PadTracker::new(
        scenario.mission.track_window,
        scenario.mission.velocity_window,
        scenario.mission.estimate_hold,
    );
    // (delivery time, capture time, pad pose, pad height)
    let mut pending: VecDeque<(f64, f64, Pose2D, f64)> = VecDeque::new();

    let mut ticks = Vec::with_capacity(scenario.tick_count());
    let mut events = Vec::new();
    let mut last_frame = i64::MIN;
    let mut stop_at: Option<f64> = None;

    for k in 0..scenario.tick_count() {
        let t_prev = k as f64 * dt;
        let now = (k + 1) as f64 * dt;

        // rover, carrying anything that has landed on it
        let next = rover_step(&rover, &schedule.command_at(t_prev), dt);
        for a in agents.iter_mut().filter(|a| !a.motors_on) {
            a.position = carry(a.position, &rover.pose, &next.pose);
        }
        rover = next;

        // camera
        let mut observation = None;
        let frame = frame_index(now, cam.rate);
        if frame > last_frame {
            last_frame = frame;
            let leader = agents.iter().find(|a| a.id == leader_id).expect("leader present");
            observation = detect_tag(leader, &rover.pose, rover.pad_height, cam, &scenario.noise, now, &mut rng);
            if let Some(obs) = &observation {
                let (pose, height) = estimate_pad_pose(leader, obs, cam);
                pending.push_back((now + cam.latency, now, pose, height));
            }
        }
        while pending.front().is_some_and(|p| p.0 <= now + 1e-12) {
            let (_, captured, pose, height) = pending.pop_front().unwrap();
            tracker.push(captured, pose, height);
        }

        // mission
        let estimate = tracker.estimate(now);
        let update = mission.update(&agents, estimate.as_ref(), now);
        if let Some((from, to)) = update.transition {
            events.push(Event { t: now, tick: k, kind: EventKind::Phase { from, to } });
        }
        for id in &update.touchdowns {
            if let Some(a) = agents.iter_mut().find(|a| a.id == *id) {
                a.motors_on = false;
                a.velocity = Vec3::zero();
            }
            events.push(Event { t: now, tick: k, kind: EventKind::Touchdown { agent: *id } });
        }

        // planner on a single snapshot, then dynamics
        let obstacles: Vec<Obstacle> = agents.iter().filter(|a| a.motors_on).map(Obstacle::from).collect();
        let setpoints: BTreeMap<AgentId, Vec3> = agents
            .iter()
            .filter(|a| a.motors_on)
            .map(|a| {
                let sp = match update.goals.get(&a.id) {
                    Some(goal) => plan_step(a, *goal, &obstacles, &scenario.apf),
                    None => Vec3::zero(),
                };
                (a.id, sp)
            })
            .collect();
        for a in agents.iter_mut().filter(|a| a.motors_on) {
            *a = drone_step(a, setpoints[&a.id], scenario.drone_params(a.id), dt);
        }

        ticks.push(TickRecord {
            t: now,
            agents: agents.clone(),
            rover,
            phase: update.phase.kind,
            observation,
        });

        match update.phase.kind {
            PhaseKind::Aborted => break,
            PhaseKind::Touchdown => {
                let end = *stop_at.get_or_insert(now + TOUCHDOWN_GRACE);
                if now >= end - 1e-9 {
                    break;
                }
            }
            _ => {}
        }
    }

    Ok(SimTrace {
        seed: scenario.seed,
        scenario_hash: scenario.hash(),
        dt,
        rover_speed: scenario.rover.speed,
        collision_radius: scenario.collision_radius(),
        formation: scenario.formation.clone(),
        ticks,
        events,
    })
}

/// Runs `n_runs` copies of `scenario` with seeds `seed_base + i`.
///
/// `threads == 0` runs serially; otherwise at most `threads` runs execute at
/// once. Output order is by run index either way.
pub fn run_batch(scenario: &Scenario, n_runs: usize, seed_base: u64, threads: usize) -> Result<Vec<SimTrace>> {
    run_batch_with(scenario, n_runs, seed_base, threads, Ok)
}

/// Like [`run_batch`] but reduces each trace with `f` as soon as it is
/// produced, so large batches never hold every trace in memory.
pub fn run_batch_with<R, F>(scenario: &Scenario, n_runs: usize, seed_base: u64, threads: usize, f: F) -> Result<Vec<R>>
where
    R: Send,
    F: Fn(SimTrace) -> Result<R> + Sync,
{
    scenario.validate()?;
    let job = |i: usize| run(&scenario.clone().with_seed(seed_base.wrapping_add(i as u64))).and_then(&f);
    if threads == 0 {
        return (0..n_runs).map(job).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .expect("thread pool");
    pool.install(|| (0..n_runs).into_par_iter().map(job).collect())
}
