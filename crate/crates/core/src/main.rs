use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use swarmsim::metrics::{calibrate_noise, CalibrationOptions, RmseWindow, RunReport};
use swarmsim::output::{run_stem, trace_csv, trajectory_svg, write_file, Summary};
use swarmsim::scenario::{parse_scenario, SCHEMA_VERSION};
use swarmsim::{run_batch_with, Error, Result, Scenario};

/// Runs per parallel chunk; bounds how many rendered traces sit in memory.
const CHUNK: usize = 64;

const EXIT_VALIDATION: u8 = 2;
const EXIT_MISSION: u8 = 3;
const EXIT_IO: u8 = 4;

#[derive(Parser)]
#[command(name = "swarmsim", version, about = "Drone swarm landing on a moving platform")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario JSON; built-in defaults when omitted.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Seed (first seed of a batch); defaults to the scenario's.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// RMSE window: phase (Descend through touchdown) or final (touchdown instant).
    #[arg(long, default_value = "phase")]
    window: RmseWindow,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one run.
    Run(Common),
    /// Simulate consecutive seeds.
    Batch {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 10)]
        runs: usize,
    },
    /// Simulate a batch at each rover speed.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 10)]
        runs: usize,
        /// Comma separated speeds in m/s; falls back to the scenario's sweep.
        #[arg(long, value_delimiter = ',')]
        speeds: Vec<f64>,
    },
    /// Fit sensor noise to a static landing RMSE.
    Calibrate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 200)]
        runs: usize,
        /// Target static overall RMSE, cm.
        #[arg(long, default_value_t = 4.48)]
        target: f64,
    },
}

fn threads() -> usize {
    match std::env::var("SWARMSIM_THREADS") {
        Ok(v) => v.trim().parse().unwrap_or_else(|_| {
            eprintln!("warning: ignoring SWARMSIM_THREADS={v:?}, expected a non-negative integer");
            default_threads()
        }),
        Err(_) => default_threads(),
    }
}

fn default_threads() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn load(common: &Common) -> Result<Scenario> {
    let scenario = match &common.scenario {
        Some(path) => parse_scenario(path)?,
        None => Scenario::default(),
    };
    let scenario = match common.seed {
        Some(seed) => scenario.with_seed(seed),
        None => scenario,
    };
    scenario.validate()?;
    Ok(scenario)
}

/// Runs `runs` seeds of `scenario`, writing each trace and plot as it
/// completes; returns the per-run reports in seed order.
fn simulate(scenario: &Scenario, runs: usize, out: &Path, window: RmseWindow) -> Result<Vec<RunReport>> {
    let threads = threads();
    let mut reports = Vec::with_capacity(runs);
    let mut start = 0;
    while start < runs {
        let n = CHUNK.min(runs - start);
        let rendered = run_batch_with(scenario, n, scenario.seed.wrapping_add(start as u64), threads, |t| {
            Ok((run_stem(&t), trace_csv(&t), trajectory_svg(&t), RunReport::from_trace(&t, window)))
        })?;
        for (stem, csv, svg, report) in rendered {
            write_file(&out.join("traces").join(format!("{stem}.csv")), &csv)?;
            write_file(&out.join("plots").join(format!("{stem}.svg")), &svg)?;
            reports.push(report);
        }
        start += n;
    }
    Ok(reports)
}

fn finish(command: &str, scenario: &Scenario, common: &Common, reports: Vec<RunReport>) -> Result<u8> {
    let failed = reports.iter().filter(|r| !r.success()).count();
    let summary = Summary::new(command, scenario.hash(), common.window, reports);
    let table = summary.summary.to_string();
    write_file(&common.out.join("summary.json"), &summary.to_json()?)?;
    write_file(&common.out.join("summary.txt"), &table)?;
    print!("{table}");
    if failed > 0 {
        eprintln!("{failed} of {} runs aborted or missed the landing threshold", summary.runs.len());
        return Ok(EXIT_MISSION);
    }
    Ok(0)
}

#[derive(Serialize)]
struct CalibrationFile<'a> {
    schema_version: u32,
    scenario_hash: String,
    target_cm: f64,
    runs: usize,
    #[serde(flatten)]
    result: &'a swarmsim::metrics::Calibration,
}

fn execute(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Run(common) => {
            let scenario = load(&common)?;
            let reports = simulate(&scenario, 1, &common.out, common.window)?;
            finish("run", &scenario, &common, reports)
        }
        Command::Batch { common, runs } => {
            let scenario = load(&common)?;
            let reports = simulate(&scenario, runs, &common.out, common.window)?;
            finish("batch", &scenario, &common, reports)
        }
        Command::Sweep { common, runs, speeds } => {
            let scenario = load(&common)?;
            let variants: Vec<Scenario> = if speeds.is_empty() {
                scenario.expand()
            } else {
                speeds.iter().map(|v| scenario.clone().with_speed(*v)).collect()
            };
            let mut reports = Vec::new();
            for s in &variants {
                s.validate()?;
                reports.extend(simulate(s, runs, &common.out, common.window)?);
            }
            finish("sweep", &scenario, &common, reports)
        }
        Command::Calibrate { common, runs, target } => {
            let scenario = load(&common)?;
            let opts = CalibrationOptions {
                runs,
                seed_base: scenario.seed,
                threads: threads(),
                ..CalibrationOptions::default()
            };
            let result = calibrate_noise(target, &scenario, &opts)?;
            let file = CalibrationFile {
                schema_version: SCHEMA_VERSION,
                scenario_hash: scenario.hash(),
                target_cm: target,
                runs,
                result: &result,
            };
            write_file(&common.out.join("calibration.json"), &serde_json::to_string_pretty(&file)?)?;
            println!("sigma_pos = {:.5} m (static RMSE {:.3} cm over {runs} runs)", result.sigma_pos, result.rmse_cm);
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Io { .. } => EXIT_IO,
                _ => EXIT_VALIDATION,
            })
        }
    }
}
