//! Receding-horizon driver.
//!
//! Each horizon runs a few ICM sweeps from the current state, prunes the
//! resulting discrete paths, smooths them into rest-to-rest phases and
//! executes the first part before replanning from where the swarm stopped.

use std::time::Duration;

use nalgebra::Point2;
use thiserror::Error;

use crate::fields::{InteractionParams, ScalarField};
use crate::grid::{Cell, OccupancyGrid};
use crate::mrf::{optimize, EnergyModel, EnergyTrace, MrfConfig, MrfError, OptimizeStatus, SwarmState};
use crate::par::{self, Exec};
use crate::paths::{prune_with_clearance, DiscretePath, PrunedPath};
use crate::trajopt::{
    sample_at, sample_times, smooth_and_repair, validate, PolynomialTrajectory, SegmentPlan, SmoothingConfig, TimeAllocation,
    TrajError, TrajectorySample,
};

#[derive(Debug, Error, PartialEq)]
pub enum RhpError {
    #[error(transparent)]
    Mrf(#[from] MrfError),
    #[error(transparent)]
    Traj(#[from] TrajError),
    #[error("invalid receding-horizon setting: {0}")]
    Config(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct RhpConfig {
    pub mrf: MrfConfig,
    pub smoothing: SmoothingConfig,
    /// ICM sweeps per horizon.
    pub horizon: usize,
    pub exec_fraction: f64,
    pub goal_radius: f64,
    pub max_horizons: usize,
}

impl Default for RhpConfig {
    fn default() -> Self {
        RhpConfig {
            mrf: MrfConfig::default(),
            smoothing: SmoothingConfig::default(),
            horizon: 4,
            exec_fraction: 0.5,
            goal_radius: 2.0,
            max_horizons: 200,
        }
    }
}

impl RhpConfig {
    pub fn validate(&self) -> Result<(), RhpError> {
        if self.horizon == 0 {
            return Err(RhpError::Config("horizon must be at least 1".into()));
        }
        if !(self.exec_fraction > 0.0 && self.exec_fraction <= 1.0) {
            return Err(RhpError::Config(format!("execution fraction {} not in (0, 1]", self.exec_fraction)));
        }
        if !(self.smoothing.dt > 0.0) {
            return Err(RhpError::Config("sampling step must be positive".into()));
        }
        Ok(())
    }
}

/// Map, fields and goal shared by every horizon.
#[derive(Clone, Copy, Debug)]
pub struct Problem<'a> {
    pub grid: &'a OccupancyGrid,
    pub static_field: &'a ScalarField,
    pub interaction: InteractionParams,
    pub goal: Point2<f64>,
}

impl Problem<'_> {
    fn model(&self) -> EnergyModel<'_> {
        EnergyModel { static_field: self.static_field, interaction: self.interaction, goal: Some(self.goal) }
    }

    pub fn at_goal(&self, positions: &[Cell], radius: f64) -> bool {
        positions.iter().all(|c| nalgebra::distance(&c.center(), &self.goal) <= radius + 1e-9)
    }

    /// A settled formation counts as arrived when it is centred within
    /// `radius` of the goal and no robot lags beyond twice that.
    pub fn settled_at_goal(&self, positions: &[Cell], radius: f64) -> bool {
        if positions.is_empty() {
            return false;
        }
        let sum = positions.iter().fold(nalgebra::Vector2::zeros(), |acc, c| acc + c.center().coords);
        let centroid = Point2::from(sum / positions.len() as f64);
        nalgebra::distance(&centroid, &self.goal) <= radius + 1e-9 && self.at_goal(positions, 2.0 * radius)
    }
}

/// Rest-to-rest stretch of the discrete plan between two phase boundaries.
#[derive(Clone, Debug)]
pub struct Phase {
    pub start_step: usize,
    pub end_step: usize,
    pub trajectories: Vec<PolynomialTrajectory>,
    pub repair_rounds: usize,
    /// Smoothing failed and the phase fell back to rest-to-rest chords.
    pub stop_start: bool,
}

impl Phase {
    /// Robots share the phase clock; the phase lasts until the slowest stops.
    pub fn duration(&self) -> f64 {
        self.trajectories.iter().map(|t| t.duration()).fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug)]
pub struct HorizonPlan {
    pub index: usize,
    pub discrete: Vec<DiscretePath>,
    pub pruned: Vec<PrunedPath>,
    /// Smoothed phases in order; planning stops at the first phase that
    /// cannot be repaired.
    pub phases: Vec<Phase>,
    pub trace: EnergyTrace,
    pub mrf_status: OptimizeStatus,
    pub sweep_times: Vec<Duration>,
    /// Swarm energy after each single-robot update, per sweep, under that
    /// sweep's frozen graph.
    pub update_energies: Vec<Vec<f64>>,
    /// Discrete steps per phase.
    pub phase_len: usize,
    /// Repair failure of the first unplanned phase, if any.
    pub failure: Option<TrajError>,
}

impl HorizonPlan {
    pub fn steps(&self) -> usize {
        self.discrete.first().map_or(0, |p| p.cells.len() - 1)
    }

    /// Nothing moved: the swarm is at an ICM fixed point.
    pub fn is_terminal(&self) -> bool {
        self.steps() == 0
    }

    pub fn planned_steps(&self) -> usize {
        self.phases.last().map_or(0, |p| p.end_step)
    }
}

fn pruned_window(path: &PrunedPath, from: usize, to: usize) -> (Vec<Point2<f64>>, Vec<usize>) {
    path.waypoints
        .iter()
        .zip(&path.source_steps)
        .filter(|(_, &s)| s >= from && s <= to)
        .map(|(c, &s)| (c.center(), s))
        .unzip()
}

/// Step-synchronous timing: every robot reaches the waypoint taken from
/// discrete step `s` at `(s - start) * tau`, where `tau` lets the fastest
/// chord of the phase run at nominal speed. Chords that are active at the
/// same time are then exactly those that overlap in steps.
pub fn step_synchronous_plans(
    windows: &[(Vec<Point2<f64>>, Vec<usize>)],
    cfg: &SmoothingConfig,
) -> Result<Vec<SegmentPlan>, TrajError> {
    let mut tau = cfg.t_floor;
    for (w, steps) in windows {
        for (p, s) in w.windows(2).zip(steps.windows(2)) {
            let span = (s[1] - s[0]).max(1) as f64;
            tau = tau.max(nalgebra::distance(&p[0], &p[1]) / span / cfg.v_nominal);
        }
    }
    windows
        .iter()
        .map(|(w, steps)| {
            if w.len() < 2 {
                let p = *w.first().ok_or(TrajError::TooFewWaypoints(0))?;
                return SegmentPlan::with_times(vec![p, p], TimeAllocation::new(vec![tau])?);
            }
            let durations = steps.windows(2).map(|s| (s[1] - s[0]).max(1) as f64 * tau).collect();
            SegmentPlan::with_times(w.clone(), TimeAllocation::new(durations)?)
        })
        .collect()
}

/// Fallback for a phase the repair loop gave up on: every robot halts at each
/// pruned waypoint and moves along its chords in step-synchronous time.
fn stop_start_phase(
    windows: &[(Vec<Point2<f64>>, Vec<usize>)],
    grid: &OccupancyGrid,
    cfg: &SmoothingConfig,
) -> Result<Option<Vec<PolynomialTrajectory>>, TrajError> {
    let trajs = step_synchronous_plans(windows, cfg)?
        .iter()
        .map(|p| PolynomialTrajectory::stop_start(&p.waypoints, &p.times))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(validate(&trajs, grid, cfg).is_empty().then_some(trajs))
}

/// Plans one horizon from `state`.
pub fn plan_horizon(problem: &Problem<'_>, state: &SwarmState, index: usize, cfg: &RhpConfig) -> Result<HorizonPlan, RhpError> {
    cfg.validate()?;
    let clearance = cfg.smoothing.d_safe;
    let mrf_cfg = MrfConfig { max_iters: cfg.horizon, clearance: cfg.mrf.clearance.max(clearance), ..cfg.mrf.clone() };
    let model = problem.model();
    let opt = optimize(problem.grid, state, &model, &mrf_cfg)?;
    let steps = opt.paths[0].cells.len() - 1;
    let phase_len = ((cfg.exec_fraction * steps as f64).ceil() as usize).max(1);
    let pruned = prune_with_clearance(&opt.paths, problem.grid, phase_len, clearance);

    let mut phases = Vec::new();
    let mut failure = None;
    let mut start = 0;
    while start < steps {
        let end = (start + phase_len).min(steps);
        let windows: Vec<_> = pruned.iter().map(|p| pruned_window(p, start, end)).collect();
        let mut plans = step_synchronous_plans(&windows, &cfg.smoothing)?;
        match smooth_and_repair(&mut plans, problem.grid, &cfg.smoothing) {
            Ok((trajectories, repair_rounds)) => {
                phases.push(Phase { start_step: start, end_step: end, trajectories, repair_rounds, stop_start: false })
            }
            Err(e) => match stop_start_phase(&windows, problem.grid, &cfg.smoothing)? {
                Some(trajectories) => phases.push(Phase {
                    start_step: start,
                    end_step: end,
                    trajectories,
                    repair_rounds: cfg.smoothing.max_repair_rounds,
                    stop_start: true,
                }),
                None => {
                    failure = Some(e);
                    break;
                }
            },
        }
        start = end;
    }
    Ok(HorizonPlan {
        index,
        discrete: opt.paths,
        pruned,
        phases,
        sweep_times: opt.sweeps.iter().map(|s| s.elapsed).collect(),
        update_energies: opt.sweeps.iter().map(|s| s.update_energies.clone()).collect(),
        trace: opt.trace,
        mrf_status: opt.status,
        phase_len,
        failure,
    })
}

/// What executing part of a plan produced.
#[derive(Clone, Debug)]
pub struct Execution {
    pub positions: Vec<Cell>,
    pub steps: usize,
    pub phases: Vec<Phase>,
}

/// Executes whole phases until at least `⌈fraction · steps⌉` discrete steps
/// are covered, never past the last successfully smoothed phase.
pub fn execute_fraction(plan: &HorizonPlan, fraction: f64) -> Execution {
    let steps = plan.steps();
    let want = ((fraction.clamp(0.0, 1.0) * steps as f64).ceil() as usize).min(steps);
    let mut phases = Vec::new();
    for ph in &plan.phases {
        if phases.last().is_some_and(|p: &Phase| p.end_step >= want) {
            break;
        }
        phases.push(ph.clone());
    }
    let reached = phases.last().map_or(0, |p| p.end_step);
    Execution {
        positions: plan.discrete.iter().map(|p| p.cells[reached]).collect(),
        steps: reached,
        phases,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RunStatus {
    GoalConverged,
    /// Goal not reached: out of horizons, or the swarm stopped moving short of it.
    MaxHorizons,
    Unrepairable,
}

impl RunStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RunStatus::GoalConverged => "goal-converged",
            RunStatus::MaxHorizons => "max-horizons",
            RunStatus::Unrepairable => "unrepairable",
        }
    }
}

/// Executed trajectory of every robot on the shared run clock.
#[derive(Clone, Debug, Default)]
pub struct RunLog {
    pub times: Vec<f64>,
    /// `samples[robot][i]` is taken at `times[i]`.
    pub samples: Vec<Vec<TrajectorySample>>,
}

impl RunLog {
    fn append_phase(&mut self, phase: &Phase, t0: f64, dt: f64) {
        if self.samples.is_empty() {
            self.samples = vec![Vec::new(); phase.trajectories.len()];
        }
        let skip_first = !self.times.is_empty();
        for (i, t) in sample_times(phase.duration(), dt).into_iter().enumerate() {
            if skip_first && i == 0 {
                continue;
            }
            self.times.push(t0 + t);
            for (r, tr) in phase.trajectories.iter().enumerate() {
                let mut s = sample_at(tr, t.min(tr.duration()));
                if t > tr.duration() {
                    s.velocity = Point2::origin();
                    s.acceleration = Point2::origin();
                }
                s.t = t0 + t;
                self.samples[r].push(s);
            }
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub status: RunStatus,
    /// True when the run stopped because nothing moved during a horizon.
    pub stalled: bool,
    pub horizons: usize,
    pub log: RunLog,
    /// Executed discrete positions per robot, including the start.
    pub discrete: Vec<DiscretePath>,
    /// Executed pruned waypoints with run-global source steps.
    pub pruned: Vec<PrunedPath>,
    /// Energy after each sweep of every horizon; each horizon contributes its
    /// starting energy followed by one entry per sweep.
    pub trace: EnergyTrace,
    pub sweep_times: Vec<Duration>,
    /// Per-sweep update energies of every horizon, see [`HorizonPlan`].
    pub update_energies: Vec<Vec<f64>>,
    pub executed_phases: Vec<Phase>,
    pub final_positions: Vec<Cell>,
    pub error: Option<String>,
}

/// Runs horizons until the whole swarm is within the goal radius, the swarm
/// stops moving, a phase cannot be repaired or the horizon budget is spent.
pub fn run(problem: &Problem<'_>, initial: &SwarmState, cfg: &RhpConfig) -> Result<RunResult, RhpError> {
    cfg.validate()?;
    let n = initial.len();
    let mut state = initial.clone();
    let mut result = RunResult {
        status: RunStatus::MaxHorizons,
        stalled: false,
        horizons: 0,
        log: RunLog::default(),
        discrete: (0..n).map(|robot| DiscretePath { robot, cells: vec![state.positions()[robot]] }).collect(),
        pruned: (0..n)
            .map(|robot| PrunedPath { robot, waypoints: vec![state.positions()[robot]], source_steps: vec![0] })
            .collect(),
        trace: EnergyTrace { energies: Vec::new(), moved: Vec::new(), converged: false, iterations: 0 },
        sweep_times: Vec::new(),
        update_energies: Vec::new(),
        executed_phases: Vec::new(),
        final_positions: state.positions().to_vec(),
        error: None,
    };
    let mut clock = 0.0;
    let mut global_step = 0;

    for h in 0..cfg.max_horizons {
        let plan = plan_horizon(problem, &state, h, cfg)?;
        result.horizons = h + 1;
        append_trace(&mut result.trace, &plan.trace);
        result.sweep_times.extend(&plan.sweep_times);
        result.update_energies.extend(plan.update_energies.iter().cloned());

        if plan.is_terminal() {
            if problem.at_goal(state.positions(), cfg.goal_radius)
                || problem.settled_at_goal(state.positions(), cfg.goal_radius)
            {
                result.status = RunStatus::GoalConverged;
            } else {
                result.stalled = true;
            }
            break;
        }
        let exec = execute_fraction(&plan, cfg.exec_fraction);
        if exec.phases.is_empty() {
            result.status = RunStatus::Unrepairable;
            result.error = plan.failure.as_ref().map(|e| e.to_string());
            break;
        }
        for ph in &exec.phases {
            result.log.append_phase(ph, clock, cfg.smoothing.dt);
            clock += ph.duration();
        }
        for (r, path) in plan.discrete.iter().enumerate() {
            result.discrete[r].cells.extend_from_slice(&path.cells[1..=exec.steps]);
            let pr = &plan.pruned[r];
            for (c, &s) in pr.waypoints.iter().zip(&pr.source_steps) {
                if s > 0 && s <= exec.steps {
                    result.pruned[r].waypoints.push(*c);
                    result.pruned[r].source_steps.push(global_step + s);
                }
            }
        }
        global_step += exec.steps;
        result.executed_phases.extend(exec.phases);
        state = SwarmState::new(problem.grid, exec.positions, cfg.mrf.k, cfg.mrf.r_comm)?;

        if problem.at_goal(state.positions(), cfg.goal_radius) {
            result.status = RunStatus::GoalConverged;
            break;
        }
    }
    result.trace.converged = result.status == RunStatus::GoalConverged;
    result.final_positions = state.positions().to_vec();
    Ok(result)
}

/// Later horizons start with a row for the executed state under its rebuilt
/// graph, recorded with zero moved robots.
fn append_trace(total: &mut EnergyTrace, part: &EnergyTrace) {
    if !total.energies.is_empty() {
        total.moved.push(0);
    }
    total.energies.extend(&part.energies);
    total.moved.extend(&part.moved);
    total.iterations += part.iterations;
}

/// Distance statistics and path lengths of an executed run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunMetrics {
    pub times: Vec<f64>,
    pub min_distance: Vec<f64>,
    pub avg_distance: Vec<f64>,
    pub path_lengths: Vec<f64>,
    pub horizons: usize,
    pub mean_sweep_ms: f64,
}

impl RunMetrics {
    pub fn overall_min_distance(&self) -> f64 {
        self.min_distance.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `t,min_distance,avg_distance` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,min_distance,avg_distance\n");
        for ((t, mn), avg) in self.times.iter().zip(&self.min_distance).zip(&self.avg_distance) {
            out.push_str(&format!("{t:.6},{mn:.9},{avg:.9}\n"));
        }
        out
    }
}

/// Min and mean pairwise distance at every sample; robots per sample time.
pub fn pairwise_stats(points: &[Point2<f64>]) -> (f64, f64) {
    let mut min = f64::INFINITY;
    let mut sum = 0.0;
    let mut count = 0usize;
    for a in 0..points.len() {
        for b in a + 1..points.len() {
            let d = nalgebra::distance(&points[a], &points[b]);
            min = min.min(d);
            sum += d;
            count += 1;
        }
    }
    (min, if count == 0 { 0.0 } else { sum / count as f64 })
}

pub fn metrics(result: &RunResult, exec: Exec) -> RunMetrics {
    let log = &result.log;
    let stats = par::map_range(exec, log.len(), |i| {
        let pts: Vec<Point2<f64>> = log.samples.iter().map(|s| s[i].position).collect();
        pairwise_stats(&pts)
    });
    let path_lengths = log
        .samples
        .iter()
        .map(|s| s.windows(2).map(|w| nalgebra::distance(&w[0].position, &w[1].position)).sum())
        .collect();
    let mean_sweep_ms = if result.sweep_times.is_empty() {
        0.0
    } else {
        result.sweep_times.iter().map(|d| d.as_secs_f64() * 1e3).sum::<f64>() / result.sweep_times.len() as f64
    };
    RunMetrics {
        times: log.times.clone(),
        min_distance: stats.iter().map(|s| s.0).collect(),
        avg_distance: stats.iter().map(|s| s.1).collect(),
        path_lengths,
        horizons: result.horizons,
        mean_sweep_ms,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{build_goal_field, build_obstacle_field, static_field, GoalParams, ObstacleParams};
    use crate::grid::threshold_map;

    struct Fixture {
        grid: OccupancyGrid,
        field: ScalarField,
        goal: Point2<f64>,
    }

    impl Fixture {
        fn new(grid: OccupancyGrid, goal: Point2<f64>) -> Self {
            let g = build_goal_field(&grid, &GoalParams::new(3.0, 20.0, goal).unwrap(), Exec::Sequential);
            let o = build_obstacle_field(&threshold_map(&grid, 5.0).unwrap(), &ObstacleParams::new(1.0, 5.0).unwrap(), Exec::Sequential);
            Fixture { field: static_field(&g, &o).unwrap(), grid, goal }
        }

        fn problem(&self) -> Problem<'_> {
            Problem { grid: &self.grid, static_field: &self.field, interaction: InteractionParams::table(), goal: self.goal }
        }
    }

    fn cells(xy: &[(i32, i32)]) -> Vec<Cell> {
        xy.iter().map(|&(x, y)| Cell::new(x, y)).collect()
    }

    fn cfg() -> RhpConfig {
        RhpConfig { mrf: MrfConfig { k: 3, ..MrfConfig::default() }, ..RhpConfig::default() }
    }

    #[test]
    fn free_space_plan_respects_horizon() {
        let fx = Fixture::new(OccupancyGrid::free(30, 30), Point2::new(22.0, 15.0));
        let state = SwarmState::new(&fx.grid, cells(&[(5, 15), (6, 13), (6, 17), (4, 14), (4, 16)]), 3, None).unwrap();
        let plan = plan_horizon(&fx.problem(), &state, 0, &cfg()).unwrap();
        assert!(plan.steps() >= 1 && plan.steps() <= 4);
        assert!(plan.failure.is_none());
        assert_eq!(plan.planned_steps(), plan.steps());
        for ph in &plan.phases {
            for tr in &ph.trajectories {
                assert!(tr.derivative(1, 0.0).coords.norm() < 1e-6);
                assert!(tr.derivative(1, tr.duration()).coords.norm() < 1e-6);
            }
        }
    }

    #[test]
    fn converged_state_gives_terminal_plan() {
        let fx = Fixture::new(OccupancyGrid::free(20, 20), Point2::new(10.0, 10.0));
        let state = SwarmState::new(&fx.grid, cells(&[(10, 10), (11, 10)]), 1, None).unwrap();
        let mut c = cfg();
        c.mrf.k = 1;
        let plan = plan_horizon(&fx.problem(), &state, 0, &c).unwrap();
        assert!(plan.is_terminal());
        assert!(plan.phases.is_empty());
        let res = run(&fx.problem(), &state, &c).unwrap();
        assert_eq!(res.status, RunStatus::GoalConverged);
        assert_eq!(res.horizons, 1);
    }

    fn fake_plan(steps: usize, phase_len: usize) -> HorizonPlan {
        let discrete = vec![DiscretePath { robot: 0, cells: (0..=steps as i32).map(|x| Cell::new(x, 0)).collect() }];
        let mut phases = Vec::new();
        let mut s = 0;
        while s < steps {
            let e = (s + phase_len).min(steps);
            phases.push(Phase { start_step: s, end_step: e, trajectories: Vec::new(), repair_rounds: 0, stop_start: false });
            s = e;
        }
        HorizonPlan {
            index: 0,
            pruned: Vec::new(),
            discrete,
            phases,
            trace: EnergyTrace { energies: vec![0.0], moved: vec![], converged: true, iterations: 0 },
            mrf_status: OptimizeStatus::Converged,
            sweep_times: Vec::new(),
            update_energies: Vec::new(),
            phase_len,
            failure: None,
        }
    }

    #[test]
    fn goal_arrival_rules() {
        let fx = Fixture::new(OccupancyGrid::free(20, 20), Point2::new(10.5, 10.5));
        let p = fx.problem();
        let tight = cells(&[(10, 10), (11, 10), (9, 10), (10, 11), (10, 9)]);
        assert!(p.at_goal(&tight, 2.0) && p.settled_at_goal(&tight, 2.0));
        // centred, one robot 3 cells out
        let wide = cells(&[(10, 10), (13, 10), (7, 10), (10, 11), (10, 9)]);
        assert!(!p.at_goal(&wide, 2.0));
        assert!(p.settled_at_goal(&wide, 2.0));
        // centroid still close but a straggler 6 cells out
        let straggler = cells(&[(11, 11), (12, 11), (11, 12), (12, 12), (6, 8)]);
        assert!(nalgebra::distance(&Point2::new(10.9, 11.3), &p.goal) < 2.0);
        assert!(!p.settled_at_goal(&straggler, 2.0));
        assert!(!p.settled_at_goal(&[], 2.0));
    }

    #[test]
    fn step_synchronous_timing() {
        let cfg = SmoothingConfig::default();
        let windows = vec![
            (vec![Point2::new(0.0, 0.0), Point2::new(3.0, 0.0), Point2::new(3.0, 1.0)], vec![0, 2, 3]),
            (vec![Point2::new(0.0, 5.0), Point2::new(1.0, 6.0)], vec![0, 3]),
            (vec![Point2::new(9.0, 9.0), Point2::new(9.0, 9.0)], vec![0, 3]),
        ];
        let plans = step_synchronous_plans(&windows, &cfg).unwrap();
        // fastest chord: 3 cells in 2 steps
        assert_eq!(plans[0].times.durations(), &[3.0, 1.5]);
        assert_eq!(plans[1].times.durations(), &[4.5]);
        assert_eq!(plans[2].times.durations(), &[4.5]);
    }

    #[test]
    fn execution_fraction_rounding() {
        assert_eq!(execute_fraction(&fake_plan(4, 2), 1.0).steps, 4);
        assert_eq!(execute_fraction(&fake_plan(4, 2), 0.5).steps, 2);
        assert_eq!(execute_fraction(&fake_plan(4, 2), 0.5).positions, vec![Cell::new(2, 0)]);
        assert_eq!(execute_fraction(&fake_plan(1, 1), 0.5).steps, 1);
        // phases are atomic: 3 of 4 steps rounds up to the end
        assert_eq!(execute_fraction(&fake_plan(4, 2), 0.75).steps, 4);
        assert_eq!(execute_fraction(&fake_plan(3, 2), 0.5).steps, 2);
    }

    #[test]
    fn walled_off_goal_ends_without_error() {
        let mut grid = OccupancyGrid::free(30, 20);
        for y in 0..20 {
            for x in 14..17 {
                grid.set_probability(Cell::new(x, y), 1.0).unwrap();
            }
        }
        let fx = Fixture::new(grid, Point2::new(25.0, 10.0));
        let state = SwarmState::new(&fx.grid, cells(&[(4, 10), (5, 9), (5, 11)]), 2, None).unwrap();
        let mut c = cfg();
        c.mrf.k = 2;
        c.max_horizons = 30;
        let res = run(&fx.problem(), &state, &c).unwrap();
        assert_eq!(res.status, RunStatus::MaxHorizons);
        assert!(res.horizons <= 30);
    }

    #[test]
    fn free_run_reaches_goal_safely() {
        let fx = Fixture::new(OccupancyGrid::free(30, 30), Point2::new(20.0, 15.0));
        let start = cells(&[(6, 15), (7, 13), (7, 17), (5, 13), (5, 17)]);
        let state = SwarmState::new(&fx.grid, start, 3, None).unwrap();
        let res = run(&fx.problem(), &state, &cfg()).unwrap();
        assert_eq!(res.status, RunStatus::GoalConverged, "{:?}", res.final_positions);
        let m = metrics(&res, Exec::Sequential);
        assert!(m.overall_min_distance() >= 1.0 - 1e-6);
        assert!(m.min_distance.iter().zip(&m.avg_distance).all(|(a, b)| a <= b));
        // horizon joints are rest states on the executed cells
        let mut t = 0.0;
        for ph in &res.executed_phases {
            t += ph.duration();
            let i = res.log.times.iter().position(|&x| (x - t).abs() < 1e-9).expect("joint sampled");
            for s in &res.log.samples {
                assert!(s[i].velocity.coords.norm() < 1e-6);
            }
        }
        for (r, path) in res.discrete.iter().enumerate() {
            assert_eq!(*path.cells.last().unwrap(), res.final_positions[r]);
            let end = res.log.samples[r].last().unwrap().position;
            assert!(nalgebra::distance(&end, &res.final_positions[r].center()) < 1e-6);
        }
    }

    #[test]
    fn stationary_pair_metrics() {
        let mut log = RunLog::default();
        let tr = vec![
            PolynomialTrajectory::hold(Point2::new(0.0, 0.0), 1.0),
            PolynomialTrajectory::hold(Point2::new(3.0, 4.0), 1.0),
        ];
        log.append_phase(&Phase { start_step: 0, end_step: 1, trajectories: tr, repair_rounds: 0, stop_start: false }, 0.0, 0.25);
        let res = RunResult {
            status: RunStatus::GoalConverged,
            stalled: false,
            horizons: 1,
            log,
            discrete: Vec::new(),
            pruned: Vec::new(),
            trace: EnergyTrace { energies: vec![], moved: vec![], converged: true, iterations: 0 },
            sweep_times: Vec::new(),
            update_energies: Vec::new(),
            executed_phases: Vec::new(),
            final_positions: Vec::new(),
            error: None,
        };
        let m = metrics(&res, Exec::Parallel);
        assert_eq!(m.times.len(), 5);
        assert!(m.min_distance.iter().chain(&m.avg_distance).all(|&d| (d - 5.0).abs() < 1e-12));
    }
}
