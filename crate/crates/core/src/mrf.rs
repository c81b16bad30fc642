//! Swarm energy model and its Iterated Conditional Modes optimizer.
//!
//! Robot positions are the labels of a Markov random field factorized over
//! the maximal cliques of the interaction graph. A clique's energy is the sum
//! of the static field (goal + obstacles) at its members plus the Morse
//! interaction over each member pair; the swarm energy is the sum over
//! cliques. One sweep updates robots in ascending id, each picking the
//! lowest-energy cell of its local search space with everyone else frozen.

use std::time::{Duration, Instant};

use nalgebra::Point2;
use thiserror::Error;

use crate::fields::{interaction_energy, InteractionParams, ScalarField};
use crate::graph::{build_interaction_graph, check_connectivity_condition, GraphError, InteractionGraph};
use crate::grid::{disk_cells, Cell, MapError, OccupancyGrid};
use crate::par::{self, Exec};
use crate::paths::{line_of_sight, segments_intersect, segments_too_close, DiscretePath};

/// Relative tolerance under which two candidate energies are considered tied.
pub const TIE_RTOL: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum MrfError {
    #[error("interaction graph leaves robot(s) without neighbours")]
    Disconnected,
    #[error("invalid swarm state: {0}")]
    InvalidState(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Map(#[from] MapError),
}

/// Robot labelling at one iteration, with the graph built from it.
#[derive(Clone, Debug, PartialEq)]
pub struct SwarmState {
    pub t: usize,
    positions: Vec<Cell>,
    graph: InteractionGraph,
}

impl SwarmState {
    pub fn new(
        grid: &OccupancyGrid,
        positions: Vec<Cell>,
        k: usize,
        r_comm: Option<f64>,
    ) -> Result<Self, MrfError> {
        for (i, &c) in positions.iter().enumerate() {
            if !grid.passable(c) {
                return Err(MrfError::InvalidState(format!("robot {i} at {c} is not on a free cell")));
            }
        }
        let points: Vec<Point2<f64>> = positions.iter().map(|c| c.center()).collect();
        let graph = build_interaction_graph(&points, k, r_comm)?;
        Ok(SwarmState { t: 0, positions, graph })
    }

    pub fn positions(&self) -> &[Cell] {
        &self.positions
    }

    pub fn graph(&self) -> &InteractionGraph {
        &self.graph
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn points(&self) -> Vec<Point2<f64>> {
        self.positions.iter().map(|c| c.center()).collect()
    }
}

/// Everything the energy depends on besides the labelling.
#[derive(Clone, Copy, Debug)]
pub struct EnergyModel<'a> {
    pub static_field: &'a ScalarField,
    pub interaction: InteractionParams,
    /// Group goal, used for tie-breaking and backward trimming only.
    pub goal: Option<Point2<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MrfConfig {
    /// Order `n` of the lattice disk used as local search space.
    pub order: u32,
    pub k: usize,
    pub r_comm: Option<f64>,
    pub trim_backward: bool,
    /// Minimum distance between simultaneous moves; zero only forbids crossing.
    pub clearance: f64,
    pub eps_converge: f64,
    pub patience: usize,
    pub max_iters: usize,
    pub exec: Exec,
}

impl Default for MrfConfig {
    fn default() -> Self {
        MrfConfig {
            order: 2,
            k: 3,
            r_comm: None,
            trim_backward: false,
            clearance: 0.0,
            eps_converge: 1e-6,
            patience: 2,
            max_iters: 500,
            exec: Exec::default(),
        }
    }
}

/// Candidate cells per robot.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SearchSpace {
    pub per_robot: Vec<Vec<Cell>>,
}

impl SearchSpace {
    /// Union of all robots' candidates, row-major, without duplicates.
    pub fn combined(&self) -> Vec<Cell> {
        let mut all: Vec<Cell> = self.per_robot.iter().flatten().copied().collect();
        all.sort_by_key(|c| c.row_major_key());
        all.dedup();
        all
    }
}

/// Free cells of the order-`n` disk around robot `i`.
pub fn local_search_space(grid: &OccupancyGrid, state: &SwarmState, i: usize, order: u32) -> Vec<Cell> {
    let here = state.positions[i];
    disk_cells(here, order, grid)
        .map(|cells| cells.into_iter().filter(|&c| grid.passable(c)).collect())
        .unwrap_or_else(|_| vec![here])
}

pub fn build_search_space(grid: &OccupancyGrid, state: &SwarmState, order: u32) -> SearchSpace {
    SearchSpace {
        per_robot: (0..state.len()).map(|i| local_search_space(grid, state, i, order)).collect(),
    }
}

/// Collision heuristics: drop other robots' cells, give shared cells to the
/// nearest robot (lower id on ties) and optionally drop cells behind the
/// robot relative to the goal. A robot's own cell always survives.
pub fn apply_heuristics(
    spaces: &SearchSpace,
    positions: &[Cell],
    goal: Option<Point2<f64>>,
    trim_backward: bool,
) -> SearchSpace {
    let owner = |c: Cell| -> Option<usize> {
        (0..positions.len())
            .filter(|&j| spaces.per_robot[j].contains(&c))
            .min_by_key(|&j| (positions[j].dist2(c), j))
    };
    let per_robot = spaces
        .per_robot
        .iter()
        .enumerate()
        .map(|(i, cells)| {
            let here = positions[i];
            let toward = goal.map(|g| g - here.center()).filter(|v| v.norm() > 0.0);
            cells
                .iter()
                .copied()
                .filter(|&c| {
                    if c == here {
                        return true;
                    }
                    if positions.iter().enumerate().any(|(j, &p)| j != i && p == c) {
                        return false;
                    }
                    if owner(c) != Some(i) {
                        return false;
                    }
                    match (trim_backward, toward) {
                        (true, Some(v)) => (c.center() - here.center()).dot(&v) >= 0.0,
                        _ => true,
                    }
                })
                .collect()
        })
        .collect();
    SearchSpace { per_robot }
}

/// Cells of `space` robot `i` can move to from `start[i]` without cutting
/// through an obstacle and without its move crossing, or passing closer than
/// `clearance` to, the current move of any other robot (`start[j] -> now[j]`,
/// a point for robots that have not moved).
pub fn admissible_candidates(
    grid: &OccupancyGrid,
    start: &[Cell],
    now: &[Cell],
    i: usize,
    space: &[Cell],
    clearance: f64,
) -> Vec<Cell> {
    let from = start[i];
    let fp = from.center();
    space
        .iter()
        .copied()
        .filter(|&c| {
            if c == from {
                return true;
            }
            if !line_of_sight(grid, from, c) {
                return false;
            }
            let cp = c.center();
            !(0..start.len())
                .filter(|&j| j != i)
                .any(|j| segments_too_close(&fp, &cp, &start[j].center(), &now[j].center(), clearance))
        })
        .collect()
}

/// Static terms of every member plus the interaction of every member pair.
pub fn clique_energy(labels: &[Cell], static_field: &ScalarField, iparams: &InteractionParams) -> f64 {
    let mut e: f64 = labels.iter().map(|&c| static_field.at(c)).sum();
    for a in 0..labels.len() {
        for b in a + 1..labels.len() {
            e += interaction_energy(&labels[a].center(), &labels[b].center(), iparams);
        }
    }
    e
}

/// Sum of clique energies for the given graph and labelling.
pub fn swarm_energy_of(graph: &InteractionGraph, positions: &[Cell], model: &EnergyModel<'_>) -> f64 {
    graph
        .cliques()
        .iter()
        .map(|c| {
            let labels: Vec<Cell> = c.iter().map(|&v| positions[v]).collect();
            clique_energy(&labels, model.static_field, &model.interaction)
        })
        .sum()
}

pub fn swarm_energy(state: &SwarmState, model: &EnergyModel<'_>) -> f64 {
    swarm_energy_of(&state.graph, &state.positions, model)
}

/// Energy of the cliques containing `i` with robot `i` placed at `candidate`.
pub fn local_energy(
    graph: &InteractionGraph,
    positions: &[Cell],
    i: usize,
    candidate: Cell,
    model: &EnergyModel<'_>,
) -> f64 {
    let mut labels = Vec::new();
    graph
        .cliques()
        .iter()
        .filter(|c| c.contains(&i))
        .map(|c| {
            labels.clear();
            labels.extend(c.iter().map(|&v| if v == i { candidate } else { positions[v] }));
            clique_energy(&labels, model.static_field, &model.interaction)
        })
        .sum()
}

/// Picks the lowest-energy cell among `candidates` for robot `i`.
///
/// Energies within [`TIE_RTOL`] of the minimum are ties, resolved by distance
/// to the goal (to the robot's own cell when there is no goal) and then by
/// row-major order.
pub fn icm_update(
    graph: &InteractionGraph,
    positions: &[Cell],
    i: usize,
    candidates: &[Cell],
    model: &EnergyModel<'_>,
    exec: Exec,
) -> Cell {
    let here = positions[i];
    if candidates.len() <= 1 {
        return candidates.first().copied().unwrap_or(here);
    }
    let energies = par::map_slice(exec, candidates, |&c| local_energy(graph, positions, i, c, model));
    let best = energies.iter().copied().fold(f64::INFINITY, f64::min);
    let tol = TIE_RTOL * best.abs().max(1.0);
    let reference = model.goal.unwrap_or_else(|| here.center());
    candidates
        .iter()
        .zip(&energies)
        .filter(|(_, &e)| e <= best + tol)
        .map(|(&c, _)| c)
        .min_by(|a, b| {
            let da = nalgebra::distance_squared(&a.center(), &reference);
            let db = nalgebra::distance_squared(&b.center(), &reference);
            da.total_cmp(&db).then(a.row_major_key().cmp(&b.row_major_key()))
        })
        .expect("at least one candidate")
}

/// Outcome of one ICM sweep under a frozen graph.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRecord {
    pub graph: InteractionGraph,
    pub positions: Vec<Cell>,
    pub moved: usize,
    /// Swarm energy before the sweep followed by the energy after each
    /// single-robot update, all under `graph`.
    pub update_energies: Vec<f64>,
    pub elapsed: Duration,
}

/// One full sweep in ascending robot id from `state`.
pub fn sweep(grid: &OccupancyGrid, state: &SwarmState, model: &EnergyModel<'_>, cfg: &MrfConfig) -> SweepRecord {
    let started = Instant::now();
    let spaces = build_search_space(grid, state, cfg.order);
    let spaces = apply_heuristics(&spaces, &state.positions, model.goal, cfg.trim_backward);
    let start = state.positions.clone();
    let mut now = start.clone();
    let mut update_energies = vec![swarm_energy_of(&state.graph, &now, model)];
    let mut moved = 0;
    for i in 0..now.len() {
        let candidates = admissible_candidates(grid, &start, &now, i, &spaces.per_robot[i], cfg.clearance);
        let next = icm_update(&state.graph, &now, i, &candidates, model, cfg.exec);
        if next != now[i] {
            moved += 1;
            now[i] = next;
        }
        update_energies.push(swarm_energy_of(&state.graph, &now, model));
    }
    SweepRecord {
        graph: state.graph.clone(),
        positions: now,
        moved,
        update_energies,
        elapsed: started.elapsed(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OptimizeStatus {
    Converged,
    /// `max_iters` sweeps ran without meeting a convergence test.
    IterationLimit,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnergyTrace {
    /// Initial energy followed by the energy after every sweep.
    pub energies: Vec<f64>,
    /// Robots that moved in each sweep.
    pub moved: Vec<usize>,
    pub converged: bool,
    pub iterations: usize,
}

impl EnergyTrace {
    /// `iteration,energy,moved_robots` rows, the first row being the initial state.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iteration,energy,moved_robots\n");
        for (i, e) in self.energies.iter().enumerate() {
            let moved = if i == 0 { 0 } else { self.moved[i - 1] };
            out.push_str(&format!("{i},{e:.12e},{moved}\n"));
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct Optimization {
    pub paths: Vec<DiscretePath>,
    pub trace: EnergyTrace,
    pub status: OptimizeStatus,
    pub final_state: SwarmState,
    pub sweeps: Vec<SweepRecord>,
}

/// Runs ICM sweeps until no robot moves, the energy change stays below
/// `eps_converge` for `patience` sweeps, or `max_iters` is hit. The graph is
/// rebuilt from scratch before every sweep.
pub fn optimize(
    grid: &OccupancyGrid,
    initial: &SwarmState,
    model: &EnergyModel<'_>,
    cfg: &MrfConfig,
) -> Result<Optimization, MrfError> {
    if !check_connectivity_condition(&initial.graph) {
        return Err(MrfError::Disconnected);
    }
    let mut state = initial.clone();
    let mut paths: Vec<DiscretePath> = state
        .positions
        .iter()
        .enumerate()
        .map(|(robot, &c)| DiscretePath { robot, cells: vec![c] })
        .collect();
    let mut energies = vec![swarm_energy(&state, model)];
    let mut moved_log = Vec::new();
    let mut sweeps = Vec::new();
    let mut streak = 0;
    let mut status = OptimizeStatus::IterationLimit;

    for it in 0..cfg.max_iters {
        if it > 0 {
            let points = state.points();
            state.graph = build_interaction_graph(&points, cfg.k, cfg.r_comm)?;
        }
        let record = sweep(grid, &state, model, cfg);
        let energy = *record.update_energies.last().expect("sweep records energies");
        let moved = record.moved;
        state.positions = record.positions.clone();
        state.t += 1;
        sweeps.push(record);
        moved_log.push(moved);
        let delta = (energy - energies.last().copied().unwrap_or(energy)).abs();
        energies.push(energy);

        if moved == 0 {
            status = OptimizeStatus::Converged;
            break;
        }
        for (path, &c) in paths.iter_mut().zip(&state.positions) {
            path.cells.push(c);
        }
        if delta < cfg.eps_converge {
            streak += 1;
            if streak >= cfg.patience {
                status = OptimizeStatus::Converged;
                break;
            }
        } else {
            streak = 0;
        }
    }
    // leave the graph consistent with the final labelling
    state.graph = build_interaction_graph(&state.points(), cfg.k, cfg.r_comm)?;
    Ok(Optimization {
        paths,
        trace: EnergyTrace {
            iterations: moved_log.len(),
            energies,
            moved: moved_log,
            converged: status == OptimizeStatus::Converged,
        },
        status,
        final_state: state,
        sweeps,
    })
}

/// True iff the moves of step `t -> t + 1` are pairwise non-crossing.
pub fn paths_noncrossing_check(paths: &[DiscretePath], t: usize) -> bool {
    let seg = |p: &DiscretePath| -> Option<(Point2<f64>, Point2<f64>)> {
        Some((p.cells.get(t)?.center(), p.cells.get(t + 1)?.center()))
    };
    for i in 0..paths.len() {
        for j in i + 1..paths.len() {
            if let (Some(a), Some(b)) = (seg(&paths[i]), seg(&paths[j])) {
                if segments_intersect(&a.0, &a.1, &b.0, &b.1) {
                    return false;
                }
            }
        }
    }
    true
}
