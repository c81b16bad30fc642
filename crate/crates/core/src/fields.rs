//! Artificial potentials: Morse interaction between robots, the goal
//! attractor, and the obstacle field obtained by Gaussian smoothing of the
//! thresholded map.
//!
//! All distances are Euclidean in cell units.

use nalgebra::Point2;
use thiserror::Error;

use crate::grid::{BinaryObstacleMap, Cell, OccupancyGrid};
use crate::par::{self, Exec};

/// Factor applied to the minimum admissible offset when none is supplied.
pub const AUTO_ZETA_FACTOR: f64 = 1.1;

#[derive(Debug, Error, PartialEq)]
pub enum ParamError {
    #[error("{0}")]
    Invalid(String),
    #[error("field dimensions differ: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
}

fn positive(name: &str, v: f64) -> Result<(), ParamError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(ParamError::Invalid(format!("{name} must be positive, got {v}")))
    }
}

/// Shape of the Morse interaction, without the positivity offset.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MorseShape {
    /// Attraction amplitude.
    pub a: f64,
    /// Repulsion amplitude.
    pub b: f64,
    /// Attraction length scale (cells).
    pub k_a: f64,
    /// Repulsion length scale (cells).
    pub k_r: f64,
}

impl MorseShape {
    pub fn new(a: f64, b: f64, k_a: f64, k_r: f64) -> Result<Self, ParamError> {
        positive("a_I", a)?;
        positive("b_I", b)?;
        positive("k_a", k_a)?;
        positive("k_r", k_r)?;
        if b < a {
            return Err(ParamError::Invalid(format!("b_I ({b}) must be >= a_I ({a})")));
        }
        if k_a <= k_r {
            return Err(ParamError::Invalid(format!("k_a ({k_a}) must exceed k_r ({k_r})")));
        }
        if b * k_r / (a * k_a) >= 1.0 {
            return Err(ParamError::Invalid(format!(
                "b_I*k_r/(a_I*k_a) = {} must be < 1",
                b * k_r / (a * k_a)
            )));
        }
        Ok(MorseShape { a, b, k_a, k_r })
    }

    /// Raw Morse energy at separation `d` (can be negative).
    pub fn raw(&self, d: f64) -> f64 {
        -self.a * (-d / self.k_a).exp() + self.b * (-d / self.k_r).exp()
    }

    /// Separation minimizing [`raw`](Self::raw); the unique stationary point.
    pub fn equilibrium_distance(&self) -> f64 {
        (self.b * self.k_a / (self.a * self.k_r)).ln() * (self.k_r * self.k_a / (self.k_a - self.k_r))
    }

    /// Smallest offset keeping the shifted potential positive: `|raw(d_min)|`.
    pub fn min_zeta(&self) -> f64 {
        self.raw(self.equilibrium_distance()).abs()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InteractionParams {
    pub shape: MorseShape,
    pub zeta: f64,
}

impl InteractionParams {
    pub fn new(shape: MorseShape, zeta: Option<f64>) -> Result<Self, ParamError> {
        let floor = shape.min_zeta();
        let zeta = zeta.unwrap_or(AUTO_ZETA_FACTOR * floor);
        if !(zeta > floor && zeta.is_finite()) {
            return Err(ParamError::Invalid(format!("zeta ({zeta}) must exceed {floor}")));
        }
        Ok(InteractionParams { shape, zeta })
    }

    /// Parameter table defaults: `a_I = 0.7, b_I = 0.9, k_a = 14, k_r = 4`, automatic zeta.
    pub fn table() -> Self {
        let shape = MorseShape::new(0.7, 0.9, 14.0, 4.0).expect("table parameters are valid");
        InteractionParams::new(shape, None).expect("automatic zeta is valid")
    }

    pub fn energy_at(&self, d: f64) -> f64 {
        self.shape.raw(d) + self.zeta
    }
}

/// Pairwise interaction energy, strictly positive and symmetric.
pub fn interaction_energy(p: &Point2<f64>, q: &Point2<f64>, params: &InteractionParams) -> f64 {
    params.energy_at(nalgebra::distance(p, q))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GoalParams {
    pub a_g: f64,
    pub k_g: f64,
    pub goal: Point2<f64>,
}

impl GoalParams {
    pub fn new(a_g: f64, k_g: f64, goal: Point2<f64>) -> Result<Self, ParamError> {
        positive("a_G", a_g)?;
        positive("k_G", k_g)?;
        Ok(GoalParams { a_g, k_g, goal })
    }

    /// Checks that the goal lies inside the grid.
    pub fn check_bounds(&self, grid: &OccupancyGrid) -> Result<(), ParamError> {
        let w = grid.width() as f64 - 1.0;
        let h = grid.height() as f64 - 1.0;
        if self.goal.x < 0.0 || self.goal.y < 0.0 || self.goal.x > w || self.goal.y > h {
            return Err(ParamError::Invalid(format!(
                "goal ({}, {}) outside the map",
                self.goal.x, self.goal.y
            )));
        }
        Ok(())
    }
}

pub fn goal_energy(p: &Point2<f64>, params: &GoalParams) -> f64 {
    params.a_g * (nalgebra::distance(p, &params.goal) / params.k_g).exp()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ObstacleParams {
    pub sigma_hat: f64,
    pub gamma: f64,
}

impl ObstacleParams {
    pub fn new(sigma_hat: f64, gamma: f64) -> Result<Self, ParamError> {
        positive("sigma_hat", sigma_hat)?;
        positive("gamma", gamma)?;
        Ok(ObstacleParams { sigma_hat, gamma })
    }
}

/// Per-cell energy values over the grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    width: usize,
    height: usize,
    value: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(width: usize, height: usize) -> Self {
        ScalarField {
            width,
            height,
            value: vec![0.0; width * height],
        }
    }

    fn from_fn(width: usize, height: usize, exec: Exec, f: impl Fn(Cell) -> f64 + Sync + Send) -> Self {
        let value = par::map_range(exec, width * height, |i| {
            f(Cell::new((i % width) as i32, (i / width) as i32))
        });
        ScalarField { width, height, value }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.value
    }

    pub fn get(&self, c: Cell) -> Option<f64> {
        if c.x < 0 || c.y < 0 || c.x as usize >= self.width || c.y as usize >= self.height {
            None
        } else {
            Some(self.value[c.y as usize * self.width + c.x as usize])
        }
    }

    /// Value at an in-bounds cell.
    ///
    /// Panics when `c` is outside the field.
    pub fn at(&self, c: Cell) -> f64 {
        self.get(c).unwrap_or_else(|| panic!("cell {c} outside {}x{} field", self.width, self.height))
    }

    /// Cell holding the smallest value (first in row-major order on ties).
    pub fn argmin(&self) -> Cell {
        let (i, _) = self
            .value
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |best, (i, &v)| if v < best.1 { (i, v) } else { best });
        Cell::new((i % self.width) as i32, (i / self.width) as i32)
    }

    pub fn argmax(&self) -> Cell {
        let (i, _) = self
            .value
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best });
        Cell::new((i % self.width) as i32, (i / self.width) as i32)
    }

    /// `field <width> <height>` followed by rows in scientific notation.
    pub fn to_text(&self) -> String {
        let mut out = format!("field {} {}\n", self.width, self.height);
        for row in self.value.chunks(self.width) {
            let line: Vec<String> = row.iter().map(|v| format!("{v:.9e}")).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }
}

/// Normalized Gaussian kernel truncated at radius `ceil(3 sigma)`, row-major.
pub fn gaussian_kernel(sigma_hat: f64) -> (i32, Vec<f64>) {
    let r = (3.0 * sigma_hat).ceil() as i32;
    let side = (2 * r + 1) as usize;
    let mut k = Vec::with_capacity(side * side);
    for dy in -r..=r {
        for dx in -r..=r {
            k.push((-((dx * dx + dy * dy) as f64) / (2.0 * sigma_hat * sigma_hat)).exp());
        }
    }
    let total: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= total);
    (r, k)
}

/// Convolves the binary map with a normalized Gaussian; cells beyond the
/// border count as obstacles of height `gamma`.
pub fn build_obstacle_field(m_hat: &BinaryObstacleMap, params: &ObstacleParams, exec: Exec) -> ScalarField {
    let (r, kernel) = gaussian_kernel(params.sigma_hat);
    let side = (2 * r + 1) as usize;
    ScalarField::from_fn(m_hat.width(), m_hat.height(), exec, |c| {
        let mut acc = 0.0;
        for (ky, dy) in (-r..=r).enumerate() {
            for (kx, dx) in (-r..=r).enumerate() {
                let v = m_hat.value(Cell::new(c.x + dx, c.y + dy));
                if v != 0.0 {
                    acc += v * kernel[ky * side + kx];
                }
            }
        }
        acc
    })
}

/// Goal energy sampled at every cell position.
pub fn build_goal_field(grid: &OccupancyGrid, params: &GoalParams, exec: Exec) -> ScalarField {
    ScalarField::from_fn(grid.width(), grid.height(), exec, |c| goal_energy(&c.center(), params))
}

/// Cellwise sum of the goal and obstacle fields.
pub fn static_field(goal: &ScalarField, obstacle: &ScalarField) -> Result<ScalarField, ParamError> {
    if goal.width != obstacle.width || goal.height != obstacle.height {
        return Err(ParamError::DimensionMismatch(
            goal.width,
            goal.height,
            obstacle.width,
            obstacle.height,
        ));
    }
    Ok(ScalarField {
        width: goal.width,
        height: goal.height,
        value: goal.value.iter().zip(&obstacle.value).map(|(a, b)| a + b).collect(),
    })
}

/// Static field plus every robot's interaction energy. Diagnostic output only.
pub fn render_combined_field(
    static_field: &ScalarField,
    positions: &[Point2<f64>],
    iparams: &InteractionParams,
    exec: Exec,
) -> ScalarField {
    ScalarField::from_fn(static_field.width, static_field.height, exec, |c| {
        let p = c.center();
        static_field.at(c) + positions.iter().map(|q| interaction_energy(&p, q, iparams)).sum::<f64>()
    })
}
