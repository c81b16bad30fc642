//! Minimum-snap piecewise polynomial trajectories through pruned waypoints.
//!
//! Each dimension is an independent equality-constrained QP over per-segment
//! monomial coefficients in local time. The trajectory starts and ends at
//! rest (zero velocity, acceleration and jerk), passes through every
//! waypoint and is continuous up to snap at interior knots. Corridor and
//! collision feasibility is checked afterwards by sampling, and violations
//! are repaired by retiming or by splitting chords.

use nalgebra::{DMatrix, DVector, Point2};
use thiserror::Error;

use crate::grid::{Cell, OccupancyGrid};
use crate::paths::point_segment_distance;

pub const DEFAULT_DEGREE: usize = 7;
pub const SNAP: usize = 4;
const REGULARIZATION: f64 = 1e-9;
const RESIDUAL_TOL: f64 = 1e-8;

#[derive(Clone, Debug, Error, PartialEq)]
pub enum TrajError {
    #[error("need at least 2 waypoints, got {0}")]
    TooFewWaypoints(usize),
    #[error("degree {degree} too low for derivative order {order}")]
    InsufficientDegree { degree: usize, order: usize },
    #[error("invalid time allocation: {0}")]
    BadTimes(String),
    #[error("waypoint count {waypoints} does not match {segments} segments")]
    DimensionMismatch { waypoints: usize, segments: usize },
    #[error("equality constraints are inconsistent (residual {residual:.3e})")]
    InconsistentConstraints { residual: f64 },
    #[error("KKT system is rank deficient even after regularization")]
    RankDeficient,
    #[error("trajectory still infeasible after {rounds} repair rounds ({violations} violations)")]
    Unrepairable { rounds: usize, violations: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct SmoothingConfig {
    pub v_nominal: f64,
    pub t_floor: f64,
    pub d_safe: f64,
    pub corridor_halfwidth: f64,
    pub dt: f64,
    pub max_repair_rounds: usize,
    pub max_scalings: u32,
}

impl Default for SmoothingConfig {
    fn default() -> Self {
        SmoothingConfig {
            v_nominal: 1.0,
            t_floor: 0.1,
            d_safe: 1.0,
            corridor_halfwidth: 1.0,
            dt: 0.05,
            max_repair_rounds: 10,
            max_scalings: 5,
        }
    }
}

/// Segment durations; knots are their running sum starting at 0.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeAllocation {
    durations: Vec<f64>,
}

impl TimeAllocation {
    pub fn new(durations: Vec<f64>) -> Result<Self, TrajError> {
        if durations.is_empty() {
            return Err(TrajError::BadTimes("no segments".into()));
        }
        if let Some(d) = durations.iter().find(|d| !(d.is_finite() && **d > 0.0)) {
            return Err(TrajError::BadTimes(format!("duration {d} is not positive")));
        }
        Ok(TimeAllocation { durations })
    }

    pub fn durations(&self) -> &[f64] {
        &self.durations
    }

    pub fn segments(&self) -> usize {
        self.durations.len()
    }

    pub fn knots(&self) -> Vec<f64> {
        std::iter::once(0.0)
            .chain(self.durations.iter().scan(0.0, |acc, d| {
                *acc += d;
                Some(*acc)
            }))
            .collect()
    }

    pub fn total(&self) -> f64 {
        self.durations.iter().sum()
    }

    pub fn scale_segment(&mut self, k: usize, factor: f64) {
        self.durations[k] *= factor;
    }

    pub fn scale_all(&mut self, factor: f64) {
        self.durations.iter_mut().for_each(|d| *d *= factor);
    }

    /// Replaces segment `k` by two halves of equal duration.
    pub fn split_segment(&mut self, k: usize) {
        let half = self.durations[k] / 2.0;
        self.durations[k] = half;
        self.durations.insert(k + 1, half);
    }
}

/// Constant-speed durations, floored so degenerate segments stay solvable.
pub fn allocate_times(waypoints: &[Point2<f64>], v_nominal: f64, t_floor: f64) -> Result<TimeAllocation, TrajError> {
    if waypoints.len() < 2 {
        return Err(TrajError::TooFewWaypoints(waypoints.len()));
    }
    if !(v_nominal > 0.0 && t_floor > 0.0) {
        return Err(TrajError::BadTimes(format!("speed {v_nominal} and floor {t_floor} must be positive")));
    }
    TimeAllocation::new(
        waypoints
            .windows(2)
            .map(|w| (nalgebra::distance(&w[0], &w[1]) / v_nominal).max(t_floor))
            .collect(),
    )
}

/// `j! / (j - r)!`, zero when `r > j`.
fn falling(j: usize, r: usize) -> f64 {
    if r > j {
        0.0
    } else {
        ((j - r + 1)..=j).map(|v| v as f64).product()
    }
}

/// One-dimensional equality-constrained QP: minimize `xᵀ A x` s.t. `B x = b`.
#[derive(Clone, Debug)]
pub struct QuadraticProgram {
    pub cost: DMatrix<f64>,
    pub constraints: DMatrix<f64>,
    pub rhs: DVector<f64>,
    pub durations: Vec<f64>,
    pub degree: usize,
    pub order: usize,
}

impl QuadraticProgram {
    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        (x.transpose() * &self.cost * x)[(0, 0)]
    }

    pub fn constraint_residual(&self, x: &DVector<f64>) -> f64 {
        (&self.constraints * x - &self.rhs).amax()
    }
}

/// Closed-form Gram matrix of the `q`-th derivative of local monomials on `[0, t]`.
pub fn derivative_gram(degree: usize, q: usize, t: f64) -> DMatrix<f64> {
    DMatrix::from_fn(degree + 1, degree + 1, |i, j| {
        if i < q || j < q {
            return 0.0;
        }
        let p = (i + j + 1 - 2 * q) as i32;
        falling(i, q) * falling(j, q) * t.powi(p) / p as f64
    })
}

/// Builds the per-dimension QP through `values` with the given durations.
///
/// Constraints: both ends of every segment pinned to their waypoints,
/// derivatives `1..q` zero at both ends of the trajectory and derivatives
/// `1..=q` continuous at interior knots.
pub fn build_qp(values: &[f64], times: &TimeAllocation, degree: usize, q: usize) -> Result<QuadraticProgram, TrajError> {
    if values.len() < 2 {
        return Err(TrajError::TooFewWaypoints(values.len()));
    }
    if degree + 1 < 2 * q {
        return Err(TrajError::InsufficientDegree { degree, order: q });
    }
    let m = times.segments();
    if values.len() != m + 1 {
        return Err(TrajError::DimensionMismatch { waypoints: values.len(), segments: m });
    }
    let nc = degree + 1;
    let n = m * nc;
    let mut cost = DMatrix::zeros(n, n);
    for (k, &t) in times.durations().iter().enumerate() {
        cost.view_mut((k * nc, k * nc), (nc, nc)).copy_from(&derivative_gram(degree, q, t));
    }

    let mut rows: Vec<(Vec<(usize, f64)>, f64)> = Vec::new();
    // derivative r of segment k at local time t as sparse row entries
    let deriv = |k: usize, r: usize, t: f64| -> Vec<(usize, f64)> {
        (r..nc).map(|j| (k * nc + j, falling(j, r) * t.powi((j - r) as i32))).collect()
    };
    for (k, &t) in times.durations().iter().enumerate() {
        rows.push((deriv(k, 0, 0.0), values[k]));
        rows.push((deriv(k, 0, t), values[k + 1]));
    }
    let last = m - 1;
    let t_last = times.durations()[last];
    for r in 1..q {
        rows.push((deriv(0, r, 0.0), 0.0));
        rows.push((deriv(last, r, t_last), 0.0));
    }
    for k in 0..last {
        let t = times.durations()[k];
        for r in 1..=q {
            let mut row = deriv(k, r, t);
            row.extend(deriv(k + 1, r, 0.0).into_iter().map(|(c, v)| (c, -v)));
            rows.push((row, 0.0));
        }
    }
    let mut constraints = DMatrix::zeros(rows.len(), n);
    let mut rhs = DVector::zeros(rows.len());
    for (i, (row, b)) in rows.into_iter().enumerate() {
        for (c, v) in row {
            constraints[(i, c)] += v;
        }
        rhs[i] = b;
    }
    Ok(QuadraticProgram { cost, constraints, rhs, durations: times.durations().to_vec(), degree, order: q })
}

/// Solves the QP through its KKT system.
///
/// Coefficients are rescaled to normalized segment time before factoring.
/// A singular or inaccurate factorization is retried with `1e-9 I` added to
/// the cost block and subtracted from the multiplier block.
pub fn solve_qp(qp: &QuadraticProgram) -> Result<DVector<f64>, TrajError> {
    let n = qp.cost.nrows();
    let m = qp.constraints.nrows();
    let nc = qp.degree + 1;
    // alpha = D^-1 beta with D = diag(T_k^j)
    let scale = DVector::from_fn(n, |i, _| qp.durations[i / nc].powi((i % nc) as i32));
    let mut a = qp.cost.clone();
    for i in 0..n {
        for j in 0..n {
            a[(i, j)] /= scale[i] * scale[j];
        }
    }
    let a_max = a.amax();
    if a_max > 0.0 {
        a /= a_max;
    }
    let mut b = qp.constraints.clone();
    let mut rhs = qp.rhs.clone();
    for j in 0..n {
        b.column_mut(j).unscale_mut(scale[j]);
    }
    for i in 0..m {
        let norm = b.row(i).amax();
        if norm > 0.0 {
            b.row_mut(i).unscale_mut(norm);
            rhs[i] /= norm;
        }
    }

    let assemble = |lambda: f64| {
        let mut k = DMatrix::zeros(n + m, n + m);
        k.view_mut((0, 0), (n, n)).copy_from(&a);
        k.view_mut((n, 0), (m, n)).copy_from(&b);
        k.view_mut((0, n), (n, m)).copy_from(&b.transpose());
        for i in 0..n {
            k[(i, i)] += lambda;
        }
        for i in 0..m {
            k[(n + i, n + i)] -= lambda;
        }
        k
    };
    let mut full_rhs = DVector::zeros(n + m);
    full_rhs.rows_mut(n, m).copy_from(&rhs);
    let tol = RESIDUAL_TOL * qp.rhs.amax().max(1.0);

    let mut best_residual = f64::INFINITY;
    for lambda in [0.0, REGULARIZATION] {
        let Some(sol) = assemble(lambda).lu().solve(&full_rhs) else {
            continue;
        };
        let beta = sol.rows(0, n).into_owned();
        if !beta.iter().all(|v| v.is_finite()) {
            continue;
        }
        let alpha = beta.component_div(&scale);
        let residual = qp.constraint_residual(&alpha);
        if residual <= tol {
            return Ok(alpha);
        }
        best_residual = best_residual.min(residual);
    }
    // distinguish an unsatisfiable constraint set from a degenerate system
    let svd = b.clone().svd(true, true);
    let ls = svd.solve(&rhs, 1e-12).map_err(|_| TrajError::RankDeficient)?;
    let ls_residual = (&b * ls - &rhs).amax();
    if ls_residual > RESIDUAL_TOL {
        return Err(TrajError::InconsistentConstraints { residual: ls_residual.max(best_residual.min(f64::MAX)) });
    }
    Err(TrajError::RankDeficient)
}

/// Planar trajectory: per-dimension, per-segment coefficients in local time.
#[derive(Clone, Debug, PartialEq)]
pub struct PolynomialTrajectory {
    pub waypoints: Vec<Point2<f64>>,
    pub times: TimeAllocation,
    pub degree: usize,
    /// `coeffs[dim][segment][j]`.
    pub coeffs: [Vec<Vec<f64>>; 2],
}

impl PolynomialTrajectory {
    /// A trajectory resting at `p` for `duration` seconds.
    pub fn hold(p: Point2<f64>, duration: f64) -> Self {
        let mut c = vec![0.0; DEFAULT_DEGREE + 1];
        c[0] = p.x;
        let mut cy = vec![0.0; DEFAULT_DEGREE + 1];
        cy[0] = p.y;
        PolynomialTrajectory {
            waypoints: vec![p, p],
            times: TimeAllocation { durations: vec![duration.max(f64::MIN_POSITIVE)] },
            degree: DEFAULT_DEGREE,
            coeffs: [vec![c], vec![cy]],
        }
    }

    /// Rest-to-rest motion through every waypoint: each segment is solved on
    /// its own, so the robot stops at each knot and stays on the chord.
    pub fn stop_start(waypoints: &[Point2<f64>], times: &TimeAllocation) -> Result<Self, TrajError> {
        if waypoints.len() != times.segments() + 1 {
            return Err(TrajError::DimensionMismatch { waypoints: waypoints.len(), segments: times.segments() });
        }
        let mut coeffs: [Vec<Vec<f64>>; 2] = [Vec::new(), Vec::new()];
        for (w, &d) in waypoints.windows(2).zip(times.durations()) {
            let seg = min_snap(w, &TimeAllocation::new(vec![d])?)?;
            for (dim, c) in seg.coeffs.into_iter().enumerate() {
                coeffs[dim].extend(c);
            }
        }
        Ok(PolynomialTrajectory { waypoints: waypoints.to_vec(), times: times.clone(), degree: DEFAULT_DEGREE, coeffs })
    }

    pub fn duration(&self) -> f64 {
        self.times.total()
    }

    pub fn segments(&self) -> usize {
        self.times.segments()
    }

    /// Segment index and local time at global time `t`, clamped to the span.
    pub fn locate(&self, t: f64) -> (usize, f64) {
        let mut rest = t.max(0.0);
        let last = self.segments() - 1;
        for (k, &d) in self.times.durations().iter().enumerate() {
            if rest <= d || k == last {
                return (k, rest.min(d));
            }
            rest -= d;
        }
        unreachable!("at least one segment")
    }

    /// Derivative `r` of dimension `dim` on segment `k` at local time `tau`.
    pub fn eval_segment(&self, dim: usize, k: usize, r: usize, tau: f64) -> f64 {
        let c = &self.coeffs[dim][k];
        (r..c.len()).rev().fold(0.0, |acc, j| acc * tau + c[j] * falling(j, r))
    }

    pub fn derivative(&self, r: usize, t: f64) -> Point2<f64> {
        let (k, tau) = self.locate(t);
        Point2::new(self.eval_segment(0, k, r, tau), self.eval_segment(1, k, r, tau))
    }

    pub fn position(&self, t: f64) -> Point2<f64> {
        self.derivative(0, t)
    }

    /// Sum of both dimensions' snap cost.
    pub fn snap_cost(&self) -> f64 {
        let mut total = 0.0;
        for dim in 0..2 {
            for (k, &t) in self.times.durations().iter().enumerate() {
                let g = derivative_gram(self.degree, SNAP, t);
                let x = DVector::from_column_slice(&self.coeffs[dim][k]);
                total += (x.transpose() * g * &x)[(0, 0)];
            }
        }
        total
    }

    /// `robot,dim,segment,j,alpha` rows without header.
    pub fn coefficient_rows(&self, robot: usize) -> String {
        let mut out = String::new();
        for (dim, name) in ["x", "y"].iter().enumerate() {
            for (k, seg) in self.coeffs[dim].iter().enumerate() {
                for (j, a) in seg.iter().enumerate() {
                    out.push_str(&format!("{robot},{name},{k},{j},{a:.12e}\n"));
                }
            }
        }
        out
    }
}

/// Solves the X and Y problems independently and assembles the trajectory.
pub fn min_snap(waypoints: &[Point2<f64>], times: &TimeAllocation) -> Result<PolynomialTrajectory, TrajError> {
    min_snap_with_degree(waypoints, times, DEFAULT_DEGREE)
}

pub fn min_snap_with_degree(
    waypoints: &[Point2<f64>],
    times: &TimeAllocation,
    degree: usize,
) -> Result<PolynomialTrajectory, TrajError> {
    if waypoints.len() < 2 {
        return Err(TrajError::TooFewWaypoints(waypoints.len()));
    }
    let nc = degree + 1;
    let mut coeffs: [Vec<Vec<f64>>; 2] = [Vec::new(), Vec::new()];
    for (dim, out) in coeffs.iter_mut().enumerate() {
        let values: Vec<f64> = waypoints.iter().map(|p| p[dim]).collect();
        let x = solve_qp(&build_qp(&values, times, degree, SNAP)?)?;
        *out = x.as_slice().chunks(nc).map(|c| c.to_vec()).collect();
    }
    Ok(PolynomialTrajectory { waypoints: waypoints.to_vec(), times: times.clone(), degree, coeffs })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrajectorySample {
    pub t: f64,
    pub position: Point2<f64>,
    pub velocity: Point2<f64>,
    pub acceleration: Point2<f64>,
}

/// Sample times `0, dt, 2dt, ...` plus the final time when not on the grid.
pub fn sample_times(duration: f64, dt: f64) -> Vec<f64> {
    assert!(dt > 0.0, "sampling step must be positive");
    let steps = (duration / dt + 1e-9).floor() as usize;
    let mut ts: Vec<f64> = (0..=steps).map(|i| i as f64 * dt).collect();
    if duration - ts[steps] > 1e-9 {
        ts.push(duration);
    }
    ts
}

pub fn sample(traj: &PolynomialTrajectory, dt: f64) -> Vec<TrajectorySample> {
    sample_times(traj.duration(), dt)
        .into_iter()
        .map(|t| sample_at(traj, t))
        .collect()
}

pub fn sample_at(traj: &PolynomialTrajectory, t: f64) -> TrajectorySample {
    TrajectorySample {
        t,
        position: traj.derivative(0, t),
        velocity: traj.derivative(1, t),
        acceleration: traj.derivative(2, t),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    Occupied { robot: usize, segment: usize, t: f64, cell: Cell },
    Proximity { a: usize, b: usize, t: f64, distance: f64 },
    Corridor { robot: usize, segment: usize, t: f64, deviation: f64 },
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ViolationReport {
    pub violations: Vec<Violation>,
}

impl ViolationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn len(&self) -> usize {
        self.violations.len()
    }
}

/// Samples all trajectories on a shared clock starting at 0 and reports
/// occupied-cell hits, pairs closer than `d_safe` and samples straying more
/// than the corridor half-width from their chord. A robot whose trajectory
/// has ended is held at its final waypoint.
pub fn validate(trajs: &[PolynomialTrajectory], grid: &OccupancyGrid, cfg: &SmoothingConfig) -> ViolationReport {
    let horizon = trajs.iter().map(|t| t.duration()).fold(0.0, f64::max);
    let mut ts = sample_times(horizon, cfg.dt);
    // every robot's own end time is sampled too
    for t in trajs {
        ts.push(t.duration());
    }
    ts.sort_by(f64::total_cmp);
    ts.dedup_by(|a, b| (*a - *b).abs() < 1e-12);

    let mut violations = Vec::new();
    for &t in &ts {
        let pos: Vec<Point2<f64>> = trajs.iter().map(|tr| tr.position(t.min(tr.duration()))).collect();
        for (r, tr) in trajs.iter().enumerate() {
            let (k, _) = tr.locate(t);
            let cell = Cell::containing(&pos[r]);
            if !grid.passable(cell) {
                violations.push(Violation::Occupied { robot: r, segment: k, t, cell });
            }
            let deviation = point_segment_distance(&pos[r], &tr.waypoints[k], &tr.waypoints[k + 1]);
            if deviation > cfg.corridor_halfwidth + 1e-9 {
                violations.push(Violation::Corridor { robot: r, segment: k, t, deviation });
            }
        }
        for a in 0..trajs.len() {
            for b in a + 1..trajs.len() {
                let distance = nalgebra::distance(&pos[a], &pos[b]);
                if distance < cfg.d_safe - 1e-9 {
                    violations.push(Violation::Proximity { a, b, t, distance });
                }
            }
        }
    }
    ViolationReport { violations }
}

/// Waypoints and timing of one robot's trajectory under repair.
#[derive(Clone, Debug, PartialEq)]
pub struct SegmentPlan {
    pub waypoints: Vec<Point2<f64>>,
    pub times: TimeAllocation,
    /// How often each segment has been shortened.
    pub scalings: Vec<u32>,
}

impl SegmentPlan {
    pub fn new(waypoints: Vec<Point2<f64>>, cfg: &SmoothingConfig) -> Result<Self, TrajError> {
        let times = allocate_times(&waypoints, cfg.v_nominal, cfg.t_floor)?;
        let scalings = vec![0; times.segments()];
        Ok(SegmentPlan { waypoints, times, scalings })
    }

    pub fn with_times(waypoints: Vec<Point2<f64>>, times: TimeAllocation) -> Result<Self, TrajError> {
        if waypoints.len() != times.segments() + 1 {
            return Err(TrajError::DimensionMismatch { waypoints: waypoints.len(), segments: times.segments() });
        }
        let scalings = vec![0; times.segments()];
        Ok(SegmentPlan { waypoints, times, scalings })
    }

    pub fn solve(&self) -> Result<PolynomialTrajectory, TrajError> {
        min_snap(&self.waypoints, &self.times)
    }
}

/// Applies one repair round for `report` and tells whether anything changed.
///
/// Segments with occupancy or corridor violations are shortened by 0.8 up to
/// `max_scalings` times and then split at their chord midpoint. For each
/// close pair the higher-id robot is slowed by 1.25.
pub fn repair(plans: &mut [SegmentPlan], report: &ViolationReport, cfg: &SmoothingConfig) -> bool {
    let mut bad_segments: Vec<(usize, usize)> = Vec::new();
    let mut slow: Vec<usize> = Vec::new();
    for v in &report.violations {
        match *v {
            Violation::Occupied { robot, segment, .. } | Violation::Corridor { robot, segment, .. } => {
                bad_segments.push((robot, segment))
            }
            Violation::Proximity { b, .. } => slow.push(b),
        }
    }
    bad_segments.sort_unstable();
    bad_segments.dedup();
    slow.sort_unstable();
    slow.dedup();
    let changed = !bad_segments.is_empty() || !slow.is_empty();

    // split from the back so earlier indices stay valid
    for &(robot, k) in bad_segments.iter().rev() {
        let plan = &mut plans[robot];
        if plan.scalings[k] < cfg.max_scalings {
            plan.times.scale_segment(k, 0.8);
            plan.scalings[k] += 1;
        } else {
            let mid = nalgebra::center(&plan.waypoints[k], &plan.waypoints[k + 1]);
            plan.waypoints.insert(k + 1, mid);
            plan.times.split_segment(k);
            plan.scalings[k] = 0;
            plan.scalings.insert(k + 1, 0);
        }
    }
    for robot in slow {
        plans[robot].times.scale_all(1.25);
    }
    changed
}

/// Solve, validate and repair until feasible or out of rounds.
pub fn smooth_and_repair(
    plans: &mut [SegmentPlan],
    grid: &OccupancyGrid,
    cfg: &SmoothingConfig,
) -> Result<(Vec<PolynomialTrajectory>, usize), TrajError> {
    let mut rounds = 0;
    loop {
        let trajs = plans.iter().map(SegmentPlan::solve).collect::<Result<Vec<_>, _>>()?;
        let report = validate(&trajs, grid, cfg);
        if report.is_empty() {
            return Ok((trajs, rounds));
        }
        if rounds >= cfg.max_repair_rounds {
            return Err(TrajError::Unrepairable { rounds, violations: report.len() });
        }
        repair(plans, &report, cfg);
        rounds += 1;
    }
}
