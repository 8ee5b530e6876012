//! Evaluation quantities computed from traces: landing RMSE, per-run
//! reports, per-speed summaries and sensor-noise calibration.
//!
//! All RMSE values are in centimeters; distances elsewhere stay in meters.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formation::slot_targets;
use crate::mission::{PhaseKind, SUCCESS_THRESHOLD};
use crate::sim::{run_batch_with, EventKind, SimTrace};
use crate::{AgentId, FormationSpec, Scenario};

/// Upper end of the calibration bracket for `sigma_pos`, meters.
pub const SIGMA_BRACKET_HI: f64 = 0.2;

/// Which samples enter the landing RMSE.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RmseWindow {
    /// Every tick from the first Descend entry through each drone's touchdown.
    #[default]
    Phase,
    /// Only the error at the touchdown instant.
    Final,
}

impl fmt::Display for RmseWindow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RmseWindow::Phase => "phase",
            RmseWindow::Final => "final",
        })
    }
}

impl FromStr for RmseWindow {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "phase" => Ok(RmseWindow::Phase),
            "final" => Ok(RmseWindow::Final),
            other => Err(format!("unknown window {other:?}, expected phase or final")),
        }
    }
}

/// Root mean square of a series; `None` when empty.
pub fn rms(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    Some((values.iter().map(|v| v * v).sum::<f64>() / values.len() as f64).sqrt())
}

/// Row label of a drone: the leader, then followers by side of the pad.
pub fn drone_label(formation: &FormationSpec, id: AgentId) -> String {
    if id == formation.leader {
        return "Leader".to_string();
    }
    match formation.offset_of(id) {
        Some([_, y]) if y > 0.0 => "2L".to_string(),
        Some([_, y]) if y < 0.0 => "3R".to_string(),
        _ => format!("D{id}"),
    }
}

/// Horizontal distance of a drone from its slot at a given tick, meters.
pub fn slot_error(trace: &SimTrace, tick: usize, id: AgentId) -> Option<f64> {
    let rec = trace.ticks.get(tick)?;
    let agent = rec.agents.iter().find(|a| a.id == id)?;
    let target = *slot_targets(&rec.rover.pose, &trace.formation, 0.0).get(&id)?;
    Some((agent.position - target).horizontal_norm())
}

/// Tick at which the swarm first entered Descend.
pub fn descend_tick(trace: &SimTrace) -> Option<usize> {
    trace.events.iter().find_map(|e| match e.kind {
        EventKind::Phase { to: PhaseKind::Descend, .. } => Some(e.tick),
        _ => None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandingRmse {
    pub window: RmseWindow,
    pub per_drone: BTreeMap<AgentId, f64>,
    /// RMS of the per-drone values.
    pub overall: f64,
}

/// Per-drone and overall landing RMSE in centimeters.
pub fn landing_rmse(trace: &SimTrace, window: RmseWindow) -> Result<LandingRmse> {
    let mut per_drone = BTreeMap::new();
    for id in trace.formation.ids() {
        let errors: Vec<f64> = match window {
            RmseWindow::Phase => {
                let start = descend_tick(trace).ok_or_else(|| Error::EmptyWindow("trace never entered Descend".into()))?;
                let end = trace.touchdown_tick(id).unwrap_or(trace.ticks.len().saturating_sub(1));
                (start..=end).filter_map(|k| slot_error(trace, k, id)).collect()
            }
            RmseWindow::Final => {
                let k = trace
                    .touchdown_tick(id)
                    .ok_or_else(|| Error::EmptyWindow(format!("drone {id} never touched down")))?;
                slot_error(trace, k, id).into_iter().collect()
            }
        };
        let value = rms(&errors).ok_or_else(|| Error::EmptyWindow(format!("no samples for drone {id}")))?;
        per_drone.insert(id, value * 100.0);
    }
    let values: Vec<f64> = per_drone.values().copied().collect();
    let overall = rms(&values).ok_or_else(|| Error::EmptyWindow("formation has no drones".into()))?;
    Ok(LandingRmse { window, per_drone, overall })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroneReport {
    pub id: AgentId,
    pub label: String,
    pub rmse_cm: Option<f64>,
    /// Slot error at touchdown.
    pub final_error_cm: Option<f64>,
    /// Touched down within the success threshold of its slot.
    pub landed: bool,
    pub time_to_land: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub seed: u64,
    pub rover_speed: f64,
    pub window: RmseWindow,
    pub drones: Vec<DroneReport>,
    pub overall_rmse_cm: Option<f64>,
    pub min_pairwise_distance: f64,
    pub final_phase: PhaseKind,
    pub aborted: bool,
    /// Time of the last touchdown, when every drone landed.
    pub time_to_land: Option<f64>,
}

impl RunReport {
    pub fn from_trace(trace: &SimTrace, window: RmseWindow) -> Self {
        let rmse = landing_rmse(trace, window).ok();
        let drones: Vec<DroneReport> = trace
            .formation
            .ids()
            .map(|id| {
                let tick = trace.touchdown_tick(id);
                let final_error = tick.and_then(|k| slot_error(trace, k, id));
                DroneReport {
                    id,
                    label: drone_label(&trace.formation, id),
                    rmse_cm: rmse.as_ref().and_then(|r| r.per_drone.get(&id).copied()),
                    final_error_cm: final_error.map(|e| e * 100.0),
                    landed: final_error.is_some_and(|e| e <= SUCCESS_THRESHOLD),
                    time_to_land: tick.map(|k| trace.ticks[k].t),
                }
            })
            .collect();
        let time_to_land = if drones.iter().all(|d| d.time_to_land.is_some()) {
            drones.iter().filter_map(|d| d.time_to_land).reduce(f64::max)
        } else {
            None
        };
        RunReport {
            seed: trace.seed,
            rover_speed: trace.rover_speed,
            window,
            overall_rmse_cm: rmse.map(|r| r.overall),
            drones,
            min_pairwise_distance: trace.min_pairwise_distance(),
            final_phase: trace.final_phase(),
            aborted: trace.aborted(),
            time_to_land,
        }
    }

    pub fn success(&self) -> bool {
        !self.aborted && self.drones.iter().all(|d| d.landed)
    }
}

/// Batch means for one rover speed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedSummary {
    pub rover_speed: f64,
    pub runs: usize,
    /// Runs that produced an RMSE and so enter the means.
    pub scored: usize,
    pub successes: usize,
    /// Mean RMSE per drone label, cm.
    pub per_drone: BTreeMap<String, f64>,
    pub overall: Option<f64>,
    pub min_pairwise_distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub labels: Vec<String>,
    pub speeds: Vec<SpeedSummary>,
}

fn mean(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.into_iter().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Groups reports by rover speed (ascending) and averages each column.
pub fn summarize_batch(reports: &[RunReport]) -> BatchSummary {
    let mut labels: Vec<String> = Vec::new();
    for d in reports.iter().flat_map(|r| &r.drones) {
        if !labels.contains(&d.label) {
            labels.push(d.label.clone());
        }
    }
    let mut speeds: Vec<f64> = reports.iter().map(|r| r.rover_speed).collect();
    speeds.sort_by(f64::total_cmp);
    speeds.dedup();

    let speeds = speeds
        .into_iter()
        .map(|speed| {
            let group: Vec<&RunReport> = reports.iter().filter(|r| r.rover_speed == speed).collect();
            let scored: Vec<&&RunReport> = group.iter().filter(|r| r.overall_rmse_cm.is_some()).collect();
            let per_drone = labels
                .iter()
                .filter_map(|label| {
                    let values = scored
                        .iter()
                        .flat_map(|r| &r.drones)
                        .filter(|d| &d.label == label)
                        .filter_map(|d| d.rmse_cm);
                    mean(values).map(|m| (label.clone(), m))
                })
                .collect();
            SpeedSummary {
                rover_speed: speed,
                runs: group.len(),
                scored: scored.len(),
                successes: group.iter().filter(|r| r.success()).count(),
                per_drone,
                overall: mean(scored.iter().filter_map(|r| r.overall_rmse_cm)),
                min_pairwise_distance: group.iter().map(|r| r.min_pairwise_distance).fold(f64::INFINITY, f64::min),
            }
        })
        .collect();
    BatchSummary { labels, speeds }
}

impl fmt::Display for BatchSummary {
    /// Drones as rows, rover speeds as columns.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cell = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.2}"));
        write!(f, "{:<22}", "Rover speed, m/s")?;
        for s in &self.speeds {
            write!(f, "{:>9}", format!("{:.1}", s.rover_speed))?;
        }
        writeln!(f)?;
        for label in &self.labels {
            let name = if label == "Leader" {
                "Leader drone RMSE, cm".to_string()
            } else {
                format!("Drone {label} RMSE, cm")
            };
            write!(f, "{name:<22}")?;
            for s in &self.speeds {
                write!(f, "{:>9}", cell(s.per_drone.get(label).copied()))?;
            }
            writeln!(f)?;
        }
        write!(f, "{:<22}", "Overall RMSE, cm")?;
        for s in &self.speeds {
            write!(f, "{:>9}", cell(s.overall))?;
        }
        writeln!(f)?;
        write!(f, "{:<22}", "Landed / runs")?;
        for s in &self.speeds {
            write!(f, "{:>9}", format!("{}/{}", s.successes, s.runs))?;
        }
        writeln!(f)
    }
}

/// Mean overall RMSE of a batch, skipping runs that never produced one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatchRmse {
    pub mean_cm: f64,
    pub scored: usize,
    pub runs: usize,
}

pub fn batch_rmse(
    scenario: &Scenario,
    runs: usize,
    seed_base: u64,
    threads: usize,
    window: RmseWindow,
) -> Result<BatchRmse> {
    let values = run_batch_with(scenario, runs, seed_base, threads, |t| {
        Ok(landing_rmse(&t, window).ok().map(|r| r.overall))
    })?;
    let scored: Vec<f64> = values.into_iter().flatten().collect();
    let mean_cm = mean(scored.iter().copied())
        .ok_or_else(|| Error::EmptyWindow(format!("none of {runs} runs produced a landing RMSE")))?;
    Ok(BatchRmse { mean_cm, scored: scored.len(), runs })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationOptions {
    pub runs: usize,
    pub seed_base: u64,
    pub threads: usize,
    /// Accepted relative miss of the batch mean.
    pub rel_tol: f64,
    pub max_iterations: usize,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        Self {
            runs: 200,
            seed_base: 0,
            threads: 0,
            rel_tol: 0.02,
            max_iterations: 40,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub sigma_pos: f64,
    pub rmse_cm: f64,
    /// Every (sigma, batch mean) evaluated, in order.
    pub evaluations: Vec<(f64, f64)>,
}

/// Bisects `sigma_pos` on the static version of `scenario` until the batch
/// mean overall RMSE is within `rel_tol` of `target_cm`.
pub fn calibrate_noise(target_cm: f64, scenario: &Scenario, opts: &CalibrationOptions) -> Result<Calibration> {
    if !(target_cm >= 0.0 && target_cm.is_finite()) {
        return Err(Error::NonFinite("calibration target"));
    }
    if target_cm == 0.0 {
        return Ok(Calibration { sigma_pos: 0.0, rmse_cm: 0.0, evaluations: Vec::new() });
    }
    let base = scenario.clone().with_speed(0.0);
    let mut evaluations = Vec::new();
    let mut eval = |sigma: f64| -> Result<f64> {
        let mut s = base.clone();
        s.noise.sigma_pos = sigma;
        // a batch in which nothing ever descends is worse than any target
        let m = match batch_rmse(&s, opts.runs, opts.seed_base, opts.threads, RmseWindow::Phase) {
            Ok(b) => b.mean_cm,
            Err(Error::EmptyWindow(_)) => f64::INFINITY,
            Err(e) => return Err(e),
        };
        evaluations.push((sigma, m));
        Ok(m)
    };
    let close = |m: f64| (m - target_cm).abs() <= opts.rel_tol * target_cm;

    let (mut lo, mut hi) = (0.0, SIGMA_BRACKET_HI);
    let f_lo = eval(lo)?;
    if close(f_lo) {
        return Ok(Calibration { sigma_pos: lo, rmse_cm: f_lo, evaluations });
    }
    let f_hi = eval(hi)?;
    if close(f_hi) {
        return Ok(Calibration { sigma_pos: hi, rmse_cm: f_hi, evaluations });
    }
    if !(f_lo < target_cm && target_cm < f_hi) {
        return Err(Error::CalibrationUnreachable {
            target_cm,
            lo,
            hi,
            lo_rmse_cm: f_lo,
            hi_rmse_cm: f_hi,
        });
    }
    let mut best = (lo, f_lo);
    for _ in 0..opts.max_iterations {
        let mid = 0.5 * (lo + hi);
        let f_mid = eval(mid)?;
        if (f_mid - target_cm).abs() < (best.1 - target_cm).abs() {
            best = (mid, f_mid);
        }
        if close(f_mid) {
            break;
        }
        if f_mid < target_cm {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Calibration { sigma_pos: best.0, rmse_cm: best.1, evaluations })
}
