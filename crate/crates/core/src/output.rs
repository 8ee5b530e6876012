//! Serialized views of traces and reports: trace CSV, summary JSON and a
//! top-view SVG plot. Rendering is pure; nothing here touches the trace.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{BatchSummary, RmseWindow, RunReport};
use crate::scenario::SCHEMA_VERSION;
use crate::SimTrace;

pub const CSV_HEADER: &str = "t,agent_id,x,y,z,vx,vy,vz,phase,motors_on";

/// One row per drone per tick, rows ordered by tick then agent id.
pub fn trace_csv(trace: &SimTrace) -> String {
    let mut out = String::with_capacity(64 * trace.ticks.len() * 3 + CSV_HEADER.len());
    out.push_str(CSV_HEADER);
    out.push('\n');
    for tick in &trace.ticks {
        for a in &tick.agents {
            let (p, v) = (a.position, a.velocity);
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                tick.t, a.id, p.x, p.y, p.z, v.x, v.y, v.z, tick.phase, a.motors_on
            );
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub schema_version: u32,
    pub command: String,
    pub scenario_hash: String,
    pub window: RmseWindow,
    pub runs: Vec<RunReport>,
    pub summary: BatchSummary,
}

impl Summary {
    pub fn new(command: &str, scenario_hash: String, window: RmseWindow, runs: Vec<RunReport>) -> Self {
        let summary = crate::metrics::summarize_batch(&runs);
        Self {
            schema_version: SCHEMA_VERSION,
            command: command.to_string(),
            scenario_hash,
            window,
            runs,
            summary,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

const SVG_W: f64 = 800.0;
const SVG_H: f64 = 600.0;
const MARGIN: f64 = 40.0;
const COLORS: [&str; 6] = ["#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

/// Top view (x right, y up) of drone paths, the rover path and landing points.
pub fn trajectory_svg(trace: &SimTrace) -> String {
    let points = trace
        .ticks
        .iter()
        .flat_map(|t| t.agents.iter().map(|a| (a.position.x, a.position.y)).chain([(t.rover.pose.x, t.rover.pose.y)]));
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for (x, y) in points {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (-1.0, 1.0, -1.0, 1.0);
    }
    // equal axis scale, padded so single points still get a frame
    let span = (x1 - x0).max(y1 - y0).max(0.5);
    let scale = ((SVG_W - 2.0 * MARGIN) / span).min((SVG_H - 2.0 * MARGIN) / span);
    let (cx, cy) = (0.5 * (x0 + x1), 0.5 * (y0 + y1));
    let map = |x: f64, y: f64| (SVG_W / 2.0 + (x - cx) * scale, SVG_H / 2.0 - (y - cy) * scale);
    let polyline = |pts: &mut dyn Iterator<Item = (f64, f64)>| {
        let mut s = String::new();
        for (i, (x, y)) in pts.enumerate() {
            let (u, v) = map(x, y);
            if i > 0 {
                s.push(' ');
            }
            let _ = write!(s, "{u:.2},{v:.2}");
        }
        s
    };

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_W}" height="{SVG_H}" viewBox="0 0 {SVG_W} {SVG_H}">"#
    );
    let _ = writeln!(
        svg,
        r#"<title>Top view, seed {}, rover {} m/s</title>"#,
        trace.seed, trace.rover_speed
    );
    let _ = writeln!(svg, r##"<rect width="100%" height="100%" fill="#ffffff"/>"##);
    let rover = polyline(&mut trace.ticks.iter().map(|t| (t.rover.pose.x, t.rover.pose.y)));
    let _ = writeln!(
        svg,
        r##"<polyline class="rover" points="{rover}" fill="none" stroke="#555555" stroke-width="3" stroke-dasharray="8 4"/>"##
    );
    for (i, id) in trace.formation.ids().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let path = polyline(&mut trace.ticks.iter().filter_map(|t| {
            t.agents.iter().find(|a| a.id == id).map(|a| (a.position.x, a.position.y))
        }));
        let _ = writeln!(
            svg,
            r#"<polyline class="drone" data-agent="{id}" points="{path}" fill="none" stroke="{color}" stroke-width="1.5"/>"#
        );
        if let Some(k) = trace.touchdown_tick(id) {
            let a = trace.ticks[k].agents.iter().find(|a| a.id == id).expect("agent in tick");
            let (u, v) = map(a.position.x, a.position.y);
            let _ = writeln!(
                svg,
                r#"<circle class="landing" data-agent="{id}" cx="{u:.2}" cy="{v:.2}" r="5" fill="none" stroke="{color}" stroke-width="2"/>"#
            );
        }
    }
    svg.push_str("</svg>\n");
    svg
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// File stem shared by a run's CSV and SVG.
pub fn run_stem(trace: &SimTrace) -> String {
    format!("v{}_seed{}", trace.rover_speed, trace.seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Scenario;

    fn short_trace() -> SimTrace {
        let s = Scenario {
            duration: 0.05,
            ..Scenario::default()
        };
        crate::run(&s).unwrap()
    }

    #[test]
    fn csv_has_one_header_and_row_per_agent_tick() {
        let t = short_trace();
        let csv = trace_csv(&t);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines.len(), 1 + 3 * t.ticks.len());
        assert_eq!(lines[1].split(',').count(), 10);
        let cols: Vec<&str> = lines[1].split(',').collect();
        assert_eq!(cols[1], "0");
        assert_eq!(cols[8], t.ticks[0].phase.as_str());
        assert_eq!(cols[9], "true");
    }

    #[test]
    fn svg_has_documented_elements() {
        let svg = trajectory_svg(&short_trace());
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches(r#"class="drone""#).count(), 3);
        assert_eq!(svg.matches(r#"class="rover""#).count(), 1);
    }
}
