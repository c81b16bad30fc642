//! Occupancy grids, the thresholded obstacle map and lattice helpers.
//!
//! Cells are addressed by integer `(x, y)` with `x` the column and `y` the
//! row; the continuous position of a cell is its integer coordinate, so a cell
//! covers the unit square centred there. Anything outside the grid is treated
//! as occupied.

use std::fmt;

use nalgebra::Point2;
use thiserror::Error;

/// Occupancy probability at or above which a cell counts as an obstacle.
pub const OCCUPIED_THRESHOLD: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cell {
    pub x: i32,
    pub y: i32,
}

impl Cell {
    pub const fn new(x: i32, y: i32) -> Self {
        Cell { x, y }
    }

    pub fn center(self) -> Point2<f64> {
        Point2::new(self.x as f64, self.y as f64)
    }

    /// Nearest cell to a continuous position.
    pub fn containing(p: &Point2<f64>) -> Self {
        Cell::new(p.x.round() as i32, p.y.round() as i32)
    }

    pub fn dist2(self, other: Cell) -> i64 {
        let dx = (self.x - other.x) as i64;
        let dy = (self.y - other.y) as i64;
        dx * dx + dy * dy
    }

    /// Row-major ordering key (`y` first, then `x`).
    pub fn row_major_key(self) -> (i32, i32) {
        (self.y, self.x)
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum MapError {
    #[error("line {line}: malformed header: {reason}")]
    Header { line: usize, reason: String },
    #[error("line {line}: row count mismatch: expected {expected} rows, found {found}")]
    RowCount {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: row length mismatch: expected {expected} values, found {found}")]
    RowLength {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: invalid number {token:?}")]
    Number { line: usize, token: String },
    #[error("line {line}: probability out of range: {value}")]
    OutOfRange { line: usize, value: f64 },
    #[error("cell {0} is outside the grid")]
    OutOfBounds(Cell),
    #[error("invalid grid: {0}")]
    Invalid(String),
}

/// Grid of occupancy probabilities, stored row-major with row 0 at `y = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct OccupancyGrid {
    width: usize,
    height: usize,
    resolution: f64,
    prob: Vec<f64>,
}

impl OccupancyGrid {
    pub fn new(
        width: usize,
        height: usize,
        resolution: f64,
        prob: Vec<f64>,
    ) -> Result<Self, MapError> {
        if width == 0 || height == 0 {
            return Err(MapError::Invalid("width and height must be at least 1".into()));
        }
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(MapError::Invalid(format!("resolution must be positive, got {resolution}")));
        }
        if prob.len() != width * height {
            return Err(MapError::Invalid(format!(
                "expected {} probabilities, got {}",
                width * height,
                prob.len()
            )));
        }
        if let Some(&p) = prob.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(MapError::Invalid(format!("probability out of range: {p}")));
        }
        Ok(OccupancyGrid {
            width,
            height,
            resolution,
            prob,
        })
    }

    /// Map with every cell free.
    pub fn free(width: usize, height: usize) -> Self {
        OccupancyGrid::new(width, height, 1.0, vec![0.0; width * height])
            .expect("free grid dimensions must be nonzero")
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.prob
    }

    pub fn contains(&self, c: Cell) -> bool {
        c.x >= 0 && c.y >= 0 && (c.x as usize) < self.width && (c.y as usize) < self.height
    }

    fn index(&self, c: Cell) -> usize {
        c.y as usize * self.width + c.x as usize
    }

    pub fn probability(&self, c: Cell) -> Result<f64, MapError> {
        if !self.contains(c) {
            return Err(MapError::OutOfBounds(c));
        }
        Ok(self.prob[self.index(c)])
    }

    pub fn set_probability(&mut self, c: Cell, p: f64) -> Result<(), MapError> {
        if !self.contains(c) {
            return Err(MapError::OutOfBounds(c));
        }
        if !(0.0..=1.0).contains(&p) {
            return Err(MapError::Invalid(format!("probability out of range: {p}")));
        }
        let i = self.index(c);
        self.prob[i] = p;
        Ok(())
    }

    pub fn is_free(&self, c: Cell) -> Result<bool, MapError> {
        Ok(self.probability(c)? < OCCUPIED_THRESHOLD)
    }

    /// Like [`is_free`](Self::is_free) but out-of-bounds cells are simply not free.
    pub fn passable(&self, c: Cell) -> bool {
        self.contains(c) && self.prob[self.index(c)] < OCCUPIED_THRESHOLD
    }

    pub fn occupied_count(&self) -> usize {
        self.prob.iter().filter(|&&p| p >= OCCUPIED_THRESHOLD).count()
    }

    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.height as i32).flat_map(move |y| (0..self.width as i32).map(move |x| Cell::new(x, y)))
    }

    /// Parses the `gridmap <width> <height> <resolution>` text format.
    pub fn parse(source: &str) -> Result<Self, MapError> {
        let mut lines = source
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());

        let (hline, header) = lines.next().ok_or(MapError::Header {
            line: 1,
            reason: "empty input".into(),
        })?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 4 || fields[0] != "gridmap" {
            return Err(MapError::Header {
                line: hline,
                reason: "expected `gridmap <width> <height> <resolution>`".into(),
            });
        }
        let bad = |what: &str| MapError::Header {
            line: hline,
            reason: format!("invalid {what}"),
        };
        let width: usize = fields[1].parse().map_err(|_| bad("width"))?;
        let height: usize = fields[2].parse().map_err(|_| bad("height"))?;
        let resolution: f64 = fields[3].parse().map_err(|_| bad("resolution"))?;
        if width == 0 || height == 0 {
            return Err(bad("dimensions"));
        }
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(bad("resolution"));
        }

        let mut prob = Vec::with_capacity(width * height);
        let mut rows = 0;
        let mut last_line = hline;
        for (line, text) in lines {
            last_line = line;
            rows += 1;
            if rows > height {
                return Err(MapError::RowCount {
                    line,
                    expected: height,
                    found: rows,
                });
            }
            let mut count = 0;
            for token in text.split_whitespace() {
                let value: f64 = token.parse().map_err(|_| MapError::Number {
                    line,
                    token: token.to_string(),
                })?;
                if !(0.0..=1.0).contains(&value) {
                    return Err(MapError::OutOfRange { line, value });
                }
                prob.push(value);
                count += 1;
            }
            if count != width {
                return Err(MapError::RowLength {
                    line,
                    expected: width,
                    found: count,
                });
            }
        }
        if rows != height {
            return Err(MapError::RowCount {
                line: last_line,
                expected: height,
                found: rows,
            });
        }
        OccupancyGrid::new(width, height, resolution, prob)
    }

    /// Inverse of [`parse`](Self::parse).
    pub fn to_text(&self) -> String {
        let mut out = format!("gridmap {} {} {}\n", self.width, self.height, self.resolution);
        for row in self.prob.chunks(self.width) {
            let line: Vec<String> = row.iter().map(|p| p.to_string()).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }
}

/// Obstacle map with every cell either `0` or `gamma`.
#[derive(Clone, Debug, PartialEq)]
pub struct BinaryObstacleMap {
    width: usize,
    height: usize,
    gamma: f64,
    value: Vec<f64>,
}

impl BinaryObstacleMap {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn values(&self) -> &[f64] {
        &self.value
    }

    /// Cell value; out-of-bounds cells read as `gamma`.
    pub fn value(&self, c: Cell) -> f64 {
        if c.x < 0 || c.y < 0 || c.x as usize >= self.width || c.y as usize >= self.height {
            self.gamma
        } else {
            self.value[c.y as usize * self.width + c.x as usize]
        }
    }
}

/// High-pass split of the grid: `gamma` where `P >= 0.5`, else `0`.
pub fn threshold_map(grid: &OccupancyGrid, gamma: f64) -> Result<BinaryObstacleMap, MapError> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(MapError::Invalid(format!("gamma must be positive, got {gamma}")));
    }
    let value = grid
        .prob
        .iter()
        .map(|&p| if p >= OCCUPIED_THRESHOLD { gamma } else { 0.0 })
        .collect();
    Ok(BinaryObstacleMap {
        width: grid.width,
        height: grid.height,
        gamma,
        value,
    })
}

/// In-bounds cells with squared distance to `center` at most `order`, row-major.
pub fn disk_cells(center: Cell, order: u32, grid: &OccupancyGrid) -> Result<Vec<Cell>, MapError> {
    if !grid.contains(center) {
        return Err(MapError::OutOfBounds(center));
    }
    let r = (order as f64).sqrt().floor() as i32;
    let n = order as i64;
    let mut out = Vec::new();
    for dy in -r..=r {
        for dx in -r..=r {
            let c = Cell::new(center.x + dx, center.y + dy);
            if (dx as i64 * dx as i64 + dy as i64 * dy as i64) <= n && grid.contains(c) {
                out.push(c);
            }
        }
    }
    Ok(out)
}
