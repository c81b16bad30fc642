//! Run-directory artifacts.
//!
//! Everything except `timing.csv` is a pure function of the configuration and
//! seed, so two runs with the same inputs produce byte-identical files.
//! Discrete and pruned paths are in cell indices; trajectories are in meters.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;
use std::time::Duration;

use crate::grid::{Cell, OccupancyGrid};
use crate::mrf::Optimization;
use crate::paths::{DiscretePath, PrunedPath};
use crate::rhp::{Phase, RunLog, RunMetrics, RunResult};

/// Named file contents, written together into one directory.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Artifacts {
    pub files: Vec<(String, String)>,
}

impl Artifacts {
    pub fn push(&mut self, name: &str, contents: String) {
        self.files.push((name.to_string(), contents));
    }

    pub fn get(&self, name: &str) -> Option<&str> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, c)| c.as_str())
    }

    pub fn write(&self, dir: &Path) -> io::Result<()> {
        fs::create_dir_all(dir)?;
        for (name, contents) in &self.files {
            fs::write(dir.join(name), contents)?;
        }
        Ok(())
    }
}

pub fn discrete_csv(paths: &[DiscretePath]) -> String {
    let mut out = String::from("robot,step,x,y\n");
    for p in paths {
        for (s, c) in p.cells.iter().enumerate() {
            let _ = writeln!(out, "{},{s},{},{}", p.robot, c.x, c.y);
        }
    }
    out
}

pub fn pruned_csv(paths: &[PrunedPath]) -> String {
    let mut out = String::from("robot,waypoint_index,x,y,source_step\n");
    for p in paths {
        for (w, (c, s)) in p.waypoints.iter().zip(&p.source_steps).enumerate() {
            let _ = writeln!(out, "{},{w},{},{},{s}", p.robot, c.x, c.y);
        }
    }
    out
}

pub fn trajectories_csv(log: &RunLog) -> String {
    let mut out = String::from("robot,t,x,y,vx,vy,ax,ay\n");
    for (r, samples) in log.samples.iter().enumerate() {
        for s in samples {
            let _ = writeln!(
                out,
                "{r},{:.6},{:.9},{:.9},{:.9},{:.9},{:.9},{:.9}",
                s.t, s.position.x, s.position.y, s.velocity.x, s.velocity.y, s.acceleration.x, s.acceleration.y
            );
        }
    }
    out
}

/// Polynomial coefficients per executed phase, in each segment's local time.
pub fn coefficients_csv(phases: &[Phase]) -> String {
    let mut out = String::from("phase,robot,dim,segment,j,alpha\n");
    for (k, ph) in phases.iter().enumerate() {
        for (r, tr) in ph.trajectories.iter().enumerate() {
            for line in tr.coefficient_rows(r).lines() {
                let _ = writeln!(out, "{k},{line}");
            }
        }
    }
    out
}

pub fn timing_csv(sweep_times: &[Duration]) -> String {
    let mut out = String::from("sweep,ms\n");
    for (i, d) in sweep_times.iter().enumerate() {
        let _ = writeln!(out, "{i},{:.6}", d.as_secs_f64() * 1e3);
    }
    out
}

/// Samples that fall inside an occupied or out-of-map cell.
pub fn occupied_samples(log: &RunLog, grid: &OccupancyGrid) -> usize {
    log.samples.iter().flatten().filter(|s| !grid.passable(Cell::containing(&s.position))).count()
}

fn cells_text(cells: &[Cell]) -> String {
    let v: Vec<String> = cells.iter().map(|c| format!("({},{})", c.x, c.y)).collect();
    v.join(" ")
}

pub fn run_summary(result: &RunResult, metrics: &RunMetrics, grid: &OccupancyGrid) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "status = {}", result.status.as_str());
    let _ = writeln!(out, "stalled = {}", result.stalled);
    let _ = writeln!(out, "horizons = {}", result.horizons);
    let _ = writeln!(out, "sweeps = {}", result.trace.iterations);
    let _ = writeln!(out, "phases = {}", result.executed_phases.len());
    let _ = writeln!(out, "stop_start_phases = {}", result.executed_phases.iter().filter(|p| p.stop_start).count());
    let _ = writeln!(out, "duration_s = {:.6}", result.log.duration());
    let _ = writeln!(out, "samples = {}", result.log.len());
    let _ = writeln!(out, "min_distance = {:.9}", metrics.overall_min_distance());
    let _ = writeln!(out, "occupied_samples = {}", occupied_samples(&result.log, grid));
    let lengths: Vec<String> = metrics.path_lengths.iter().map(|l| format!("{l:.6}")).collect();
    let _ = writeln!(out, "path_lengths = {}", lengths.join(" "));
    let _ = writeln!(out, "final_positions = {}", cells_text(&result.final_positions));
    if let Some(e) = &result.error {
        let _ = writeln!(out, "error = {e}");
    }
    out
}

/// Everything `plan` writes. `config_text` is the effective configuration and
/// `initial_cliques` the clique listing of the starting graph.
pub fn run_artifacts(
    config_text: &str,
    initial_cliques: &str,
    grid: &OccupancyGrid,
    result: &RunResult,
    metrics: &RunMetrics,
) -> Artifacts {
    let mut a = Artifacts::default();
    a.push("config.txt", config_text.to_string());
    a.push("cliques.txt", initial_cliques.to_string());
    a.push("energy.csv", result.trace.to_csv());
    a.push("discrete_paths.csv", discrete_csv(&result.discrete));
    a.push("pruned_paths.csv", pruned_csv(&result.pruned));
    a.push("trajectories.csv", trajectories_csv(&result.log));
    a.push("coefficients.csv", coefficients_csv(&result.executed_phases));
    a.push("metrics.csv", metrics.to_csv());
    a.push("summary.txt", run_summary(result, metrics, grid));
    a
}

/// Everything `mrf-only` writes.
pub fn mrf_artifacts(config_text: &str, initial_cliques: &str, opt: &Optimization) -> Artifacts {
    let mut a = Artifacts::default();
    a.push("config.txt", config_text.to_string());
    a.push("cliques.txt", initial_cliques.to_string());
    a.push("energy.csv", opt.trace.to_csv());
    a.push("discrete_paths.csv", discrete_csv(&opt.paths));
    let mut summary = String::new();
    let _ = writeln!(summary, "status = {}", if opt.trace.converged { "converged" } else { "iteration-limit" });
    let _ = writeln!(summary, "sweeps = {}", opt.trace.iterations);
    let _ = writeln!(summary, "final_energy = {:.12e}", opt.trace.energies.last().copied().unwrap_or(f64::NAN));
    let _ = writeln!(summary, "final_positions = {}", cells_text(opt.final_state.positions()));
    a.push("summary.txt", summary);
    a
}
