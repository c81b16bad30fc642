//! Waypoint pruning of discrete robot paths, plus the geometric predicates
//! (supercover line of sight, closed segment intersection) it relies on.

use nalgebra::Point2;

use crate::grid::{Cell, OccupancyGrid};

const GEOM_EPS: f64 = 1e-9;

/// Per-robot sequence of cells, one per optimization step.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DiscretePath {
    pub robot: usize,
    pub cells: Vec<Cell>,
}

/// Subsequence of a discrete path, with the step each waypoint came from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PrunedPath {
    pub robot: usize,
    pub waypoints: Vec<Cell>,
    pub source_steps: Vec<usize>,
}

impl PrunedPath {
    pub fn from_discrete(path: &DiscretePath) -> Self {
        PrunedPath {
            robot: path.robot,
            waypoints: path.cells.clone(),
            source_steps: (0..path.cells.len()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.waypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.waypoints.is_empty()
    }

    /// Consecutive `(from, to)` chords.
    pub fn chords(&self) -> impl Iterator<Item = (Cell, Cell)> + '_ {
        self.waypoints.windows(2).map(|w| (w[0], w[1]))
    }
}

fn cross(o: &Point2<f64>, a: &Point2<f64>, b: &Point2<f64>) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

fn orientation(o: &Point2<f64>, a: &Point2<f64>, b: &Point2<f64>) -> i8 {
    let c = cross(o, a, b);
    if c > GEOM_EPS {
        1
    } else if c < -GEOM_EPS {
        -1
    } else {
        0
    }
}

fn on_segment(p: &Point2<f64>, a: &Point2<f64>, b: &Point2<f64>) -> bool {
    p.x >= a.x.min(b.x) - GEOM_EPS
        && p.x <= a.x.max(b.x) + GEOM_EPS
        && p.y >= a.y.min(b.y) - GEOM_EPS
        && p.y <= a.y.max(b.y) + GEOM_EPS
}

/// Whether the closed segments `a1-a2` and `b1-b2` share any point.
/// Degenerate (point) segments are allowed.
pub fn segments_intersect(a1: &Point2<f64>, a2: &Point2<f64>, b1: &Point2<f64>, b2: &Point2<f64>) -> bool {
    let o1 = orientation(a1, a2, b1);
    let o2 = orientation(a1, a2, b2);
    let o3 = orientation(b1, b2, a1);
    let o4 = orientation(b1, b2, a2);
    if o1 * o2 < 0 && o3 * o4 < 0 {
        return true;
    }
    (o1 == 0 && on_segment(b1, a1, a2))
        || (o2 == 0 && on_segment(b2, a1, a2))
        || (o3 == 0 && on_segment(a1, b1, b2))
        || (o4 == 0 && on_segment(a2, b1, b2))
        // both degenerate to points that are not caught above
        || (a1 == a2 && b1 == b2 && a1 == b1)
}

/// Smallest distance between the closed segments `a1-a2` and `b1-b2`.
pub fn segment_distance(a1: &Point2<f64>, a2: &Point2<f64>, b1: &Point2<f64>, b2: &Point2<f64>) -> f64 {
    if segments_intersect(a1, a2, b1, b2) {
        return 0.0;
    }
    point_segment_distance(a1, b1, b2)
        .min(point_segment_distance(a2, b1, b2))
        .min(point_segment_distance(b1, a1, a2))
        .min(point_segment_distance(b2, a1, a2))
}

/// Distance from `p` to the closed segment `a b`.
pub fn point_segment_distance(p: &Point2<f64>, a: &Point2<f64>, b: &Point2<f64>) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 == 0.0 {
        return nalgebra::distance(p, a);
    }
    let s = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    nalgebra::distance(p, &(a + ab * s))
}

/// Whether two moves come closer than `clearance`; with zero clearance this
/// is plain intersection.
pub fn segments_too_close(
    a1: &Point2<f64>,
    a2: &Point2<f64>,
    b1: &Point2<f64>,
    b2: &Point2<f64>,
    clearance: f64,
) -> bool {
    if clearance <= 0.0 {
        segments_intersect(a1, a2, b1, b2)
    } else {
        segment_distance(a1, a2, b1, b2) < clearance - GEOM_EPS
    }
}

/// Cells whose closed unit square meets the segment between two cell
/// centres, corner contacts included. Row-major order.
pub fn supercover(a: Cell, b: Cell) -> Vec<Cell> {
    let (pa, pb) = (a.center(), b.center());
    let d = pb - pa;
    let mut out = Vec::new();
    for y in a.y.min(b.y) - 1..=a.y.max(b.y) + 1 {
        for x in a.x.min(b.x) - 1..=a.x.max(b.x) + 1 {
            // Liang-Barsky clip against the slightly inflated square
            let h = 0.5 + GEOM_EPS;
            let (mut t0, mut t1) = (0.0f64, 1.0f64);
            let mut hit = true;
            for (p, q) in [
                (-d.x, pa.x - (x as f64 - h)),
                (d.x, (x as f64 + h) - pa.x),
                (-d.y, pa.y - (y as f64 - h)),
                (d.y, (y as f64 + h) - pa.y),
            ] {
                if p == 0.0 {
                    if q < 0.0 {
                        hit = false;
                        break;
                    }
                } else {
                    let r = q / p;
                    if p < 0.0 {
                        t0 = t0.max(r);
                    } else {
                        t1 = t1.min(r);
                    }
                }
            }
            if hit && t0 <= t1 {
                out.push(Cell::new(x, y));
            }
        }
    }
    out
}

/// True iff every cell touched by the segment `a -> b` is free.
pub fn line_of_sight(grid: &OccupancyGrid, a: Cell, b: Cell) -> bool {
    supercover(a, b).into_iter().all(|c| grid.passable(c))
}

#[derive(Clone, Copy)]
struct Chord {
    from_step: usize,
    to_step: usize,
    from: Point2<f64>,
    to: Point2<f64>,
}

impl Chord {
    fn conflicts(&self, other: &Chord, clearance: f64) -> bool {
        self.from_step.max(other.from_step) < self.to_step.min(other.to_step)
            && segments_too_close(&self.from, &self.to, &other.from, &other.to, clearance)
    }
}

fn chords_of(p: &PrunedPath) -> Vec<Chord> {
    p.waypoints
        .windows(2)
        .zip(p.source_steps.windows(2))
        .map(|(w, s)| Chord {
            from_step: s[0],
            to_step: s[1],
            from: w[0].center(),
            to: w[1].center(),
        })
        .collect()
}

/// Prunes discrete paths within windows of `horizon_len` steps.
///
/// Robots are processed in ascending id. From each anchor the chord to the
/// farthest later waypoint of the same window is kept if it has line of sight
/// and does not cross, over an overlapping step range, another robot's input
/// segments or a lower-id robot's already chosen chords. Otherwise the next
/// waypoint is kept. Passes repeat until nothing changes, so the result is a
/// fixed point of the procedure.
pub fn prune(paths: &[DiscretePath], grid: &OccupancyGrid, horizon_len: usize) -> Vec<PrunedPath> {
    prune_with_clearance(paths, grid, horizon_len, 0.0)
}

/// [`prune`] where concurrent chords must also stay `clearance` apart.
pub fn prune_with_clearance(
    paths: &[DiscretePath],
    grid: &OccupancyGrid,
    horizon_len: usize,
    clearance: f64,
) -> Vec<PrunedPath> {
    let input: Vec<PrunedPath> = paths.iter().map(PrunedPath::from_discrete).collect();
    prune_waypoints(&input, grid, horizon_len, clearance)
}

/// Pruning applied to already (partially) pruned paths.
pub fn prune_waypoints(paths: &[PrunedPath], grid: &OccupancyGrid, horizon_len: usize, clearance: f64) -> Vec<PrunedPath> {
    let mut current = paths.to_vec();
    loop {
        let next = prune_pass(&current, grid, horizon_len.max(1), clearance);
        if next == current {
            return next;
        }
        current = next;
    }
}

fn prune_pass(paths: &[PrunedPath], grid: &OccupancyGrid, horizon_len: usize, clearance: f64) -> Vec<PrunedPath> {
    let input_chords: Vec<Vec<Chord>> = paths.iter().map(chords_of).collect();
    let mut chosen: Vec<Vec<Chord>> = Vec::with_capacity(paths.len());
    let mut out = Vec::with_capacity(paths.len());

    for (i, path) in paths.iter().enumerate() {
        if path.waypoints.len() <= 1 {
            out.push(path.clone());
            chosen.push(Vec::new());
            continue;
        }
        let origin = path.source_steps[0];
        let is_boundary = |idx: usize| (path.source_steps[idx] - origin) % horizon_len == 0;
        let last = path.waypoints.len() - 1;

        let blocked = |cand: &Chord, chosen: &[Vec<Chord>]| {
            input_chords
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .any(|(_, cs)| cs.iter().any(|c| cand.conflicts(c, clearance)))
                || chosen.iter().any(|cs| cs.iter().any(|c| cand.conflicts(c, clearance)))
        };

        let mut keep = vec![0usize];
        let mut mine = Vec::new();
        let mut anchor = 0;
        while anchor < last {
            // farthest index in this window: up to the next boundary
            let mut window_end = anchor + 1;
            while window_end < last && !is_boundary(window_end) {
                window_end += 1;
            }
            let mut next = anchor + 1;
            for b in (anchor + 2..=window_end).rev() {
                let cand = Chord {
                    from_step: path.source_steps[anchor],
                    to_step: path.source_steps[b],
                    from: path.waypoints[anchor].center(),
                    to: path.waypoints[b].center(),
                };
                if line_of_sight(grid, path.waypoints[anchor], path.waypoints[b]) && !blocked(&cand, &chosen) {
                    next = b;
                    break;
                }
            }
            mine.push(Chord {
                from_step: path.source_steps[anchor],
                to_step: path.source_steps[next],
                from: path.waypoints[anchor].center(),
                to: path.waypoints[next].center(),
            });
            keep.push(next);
            anchor = next;
        }
        chosen.push(mine);
        out.push(PrunedPath {
            robot: path.robot,
            waypoints: keep.iter().map(|&k| path.waypoints[k]).collect(),
            source_steps: keep.iter().map(|&k| path.source_steps[k]).collect(),
        });
    }
    out
}

/// True iff no two pruned chords over overlapping step ranges intersect.
pub fn chords_conflict_free(paths: &[PrunedPath]) -> bool {
    chords_clear(paths, 0.0)
}

/// True iff chords over overlapping step ranges stay `clearance` apart.
pub fn chords_clear(paths: &[PrunedPath], clearance: f64) -> bool {
    let chords: Vec<Vec<Chord>> = paths.iter().map(chords_of).collect();
    for i in 0..chords.len() {
        for j in i + 1..chords.len() {
            if chords[i].iter().any(|a| chords[j].iter().any(|b| a.conflicts(b, clearance))) {
                return false;
            }
        }
    }
    true
}
