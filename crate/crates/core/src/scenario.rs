//! Scenario configuration, map generators and seeded start sampling.
//!
//! All randomness comes from one 64-bit seed. Each consumer draws from its
//! own named stream: a `ChaCha8Rng` seeded with `seed ^ fnv1a64(name)`.

use std::collections::{BTreeMap, VecDeque};
use std::fmt::Write as _;
use std::path::PathBuf;

use nalgebra::{Matrix2, Point2, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::fields::{
    build_goal_field, build_obstacle_field, static_field, GoalParams, InteractionParams, MorseShape, ObstacleParams,
    ParamError, ScalarField,
};
use crate::graph::{build_interaction_graph, check_connectivity_condition};
use crate::grid::{threshold_map, Cell, MapError, OccupancyGrid};
use crate::mrf::{MrfConfig, MrfError, SwarmState};
use crate::par::Exec;
use crate::rhp::RhpConfig;
use crate::trajopt::SmoothingConfig;

pub const START_STREAM: &str = "start";
pub const MAP_STREAM: &str = "map";
const START_ATTEMPTS: usize = 1000;
const MAP_ATTEMPTS: usize = 100;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("unknown configuration key `{0}`")]
    UnknownKey(String),
    #[error("invalid value `{value}` for `{key}`")]
    Value { key: String, value: String },
    #[error("{0}")]
    Invalid(String),
    #[error("cannot read map file {path}: {source}")]
    MapFile { path: PathBuf, source: std::io::Error },
    #[error("map file {path}: {source}")]
    MapParse { path: PathBuf, source: MapError },
    #[error("no start region connected to the goal after {0} map regenerations")]
    Unconnected(usize),
    #[error("could not place {robots} robots around the start mean within {attempts} samples")]
    InfeasibleStart { robots: usize, attempts: usize },
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error(transparent)]
    Mrf(#[from] MrfError),
}

/// 64-bit FNV-1a hash of a stream name.
pub fn fnv1a64(name: &str) -> u64 {
    name.bytes()
        .fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3))
}

/// Independent generator for the named stream.
pub fn stream_rng(seed: u64, name: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ fnv1a64(name))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ScenarioKind {
    Free,
    Corridor,
    RandomBlocks,
    MapFile(PathBuf),
}

impl ScenarioKind {
    fn name(&self) -> &str {
        match self {
            ScenarioKind::Free => "free",
            ScenarioKind::Corridor => "corridor",
            ScenarioKind::RandomBlocks => "random-blocks",
            ScenarioKind::MapFile(_) => "map",
        }
    }
}

/// Every tunable of a run. Serialized as flat `key = value` lines.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    pub kind: ScenarioKind,
    pub width: usize,
    pub height: usize,
    pub wall_thickness: usize,
    pub gap: usize,
    pub blocks: usize,
    pub block_min: usize,
    pub block_max: usize,
    pub robots: usize,
    pub k: usize,
    pub order: u32,
    pub r_comm: Option<f64>,
    pub a_i: f64,
    pub b_i: f64,
    pub k_a: f64,
    pub k_r: f64,
    pub zeta: Option<f64>,
    pub a_g: f64,
    pub k_g: f64,
    pub sigma_hat: f64,
    pub gamma: f64,
    pub start: Point2<f64>,
    pub start_cov: Matrix2<f64>,
    pub goal: Point2<f64>,
    pub trim_backward: bool,
    pub eps_converge: f64,
    pub patience: usize,
    pub max_iters: usize,
    pub horizon: usize,
    pub exec_fraction: f64,
    pub v_nominal: f64,
    pub t_floor: f64,
    pub d_safe: f64,
    pub corridor_halfwidth: f64,
    pub dt: f64,
    pub goal_radius: f64,
    pub max_horizons: usize,
    pub seed: u64,
}

impl ScenarioConfig {
    /// Defaults for a scenario kind: parameter table values, 5 robots, k = 3.
    pub fn for_kind(kind: ScenarioKind) -> Self {
        let mut c = ScenarioConfig {
            kind: ScenarioKind::Free,
            width: 30,
            height: 30,
            wall_thickness: 6,
            gap: 3,
            blocks: 6,
            block_min: 2,
            block_max: 5,
            robots: 5,
            k: 3,
            order: 2,
            r_comm: None,
            a_i: 0.7,
            b_i: 0.9,
            k_a: 14.0,
            k_r: 4.0,
            zeta: None,
            a_g: 3.0,
            k_g: 20.0,
            sigma_hat: 1.0,
            gamma: 5.0,
            start: Point2::new(6.0, 15.0),
            start_cov: Matrix2::new(2.0, 0.0, 0.0, 2.0),
            goal: Point2::new(24.0, 15.0),
            trim_backward: false,
            eps_converge: 1e-6,
            patience: 2,
            max_iters: 500,
            horizon: 4,
            exec_fraction: 0.5,
            v_nominal: 1.0,
            t_floor: 0.1,
            d_safe: 1.0,
            corridor_halfwidth: 1.0,
            dt: 0.05,
            goal_radius: 2.0,
            max_horizons: 200,
            seed: 1,
        };
        match kind {
            ScenarioKind::Corridor => {
                c.width = 40;
                c.height = 40;
                c.start = Point2::new(20.0, 7.0);
                c.goal = Point2::new(20.0, 33.0);
                c.trim_backward = true;
            }
            ScenarioKind::RandomBlocks => {
                c.start = Point2::new(5.0, 5.0);
                c.goal = Point2::new(24.0, 24.0);
                c.trim_backward = true;
            }
            ScenarioKind::Free | ScenarioKind::MapFile(_) => {}
        }
        c.kind = kind;
        c
    }

    pub fn interaction(&self) -> Result<InteractionParams, ConfigError> {
        Ok(InteractionParams::new(MorseShape::new(self.a_i, self.b_i, self.k_a, self.k_r)?, self.zeta)?)
    }

    pub fn mrf_config(&self, exec: Exec) -> MrfConfig {
        MrfConfig {
            order: self.order,
            k: self.k,
            r_comm: self.r_comm,
            trim_backward: self.trim_backward,
            clearance: 0.0,
            eps_converge: self.eps_converge,
            patience: self.patience,
            max_iters: self.max_iters,
            exec,
        }
    }

    pub fn rhp_config(&self, exec: Exec) -> RhpConfig {
        RhpConfig {
            mrf: self.mrf_config(exec),
            smoothing: SmoothingConfig {
                v_nominal: self.v_nominal,
                t_floor: self.t_floor,
                d_safe: self.d_safe,
                corridor_halfwidth: self.corridor_halfwidth,
                dt: self.dt,
                ..SmoothingConfig::default()
            },
            horizon: self.horizon,
            exec_fraction: self.exec_fraction,
            goal_radius: self.goal_radius,
            max_horizons: self.max_horizons,
        }
    }

    /// Checks bounds that do not need the map.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.robots < 2 {
            return bad(format!("need at least 2 robots, got {}", self.robots));
        }
        if self.k == 0 || self.k > self.robots - 1 {
            return bad(format!("k = {} must be in 1..={}", self.k, self.robots - 1));
        }
        if self.order == 0 {
            return bad("search order must be at least 1".into());
        }
        self.interaction()?;
        GoalParams::new(self.a_g, self.k_g, self.goal)?;
        ObstacleParams::new(self.sigma_hat, self.gamma)?;
        let c = &self.start_cov;
        if !(c[(0, 0)] >= 0.0 && c[(1, 1)] >= 0.0 && c[(0, 0)] * c[(1, 1)] - c[(0, 1)] * c[(0, 1)] >= -1e-12) {
            return bad("start covariance is not positive semi-definite".into());
        }
        if (c[(0, 1)] - c[(1, 0)]).abs() > 0.0 {
            return bad("start covariance is not symmetric".into());
        }
        if self.block_min == 0 || self.block_min > self.block_max {
            return bad("block size range is empty".into());
        }
        if !(self.exec_fraction > 0.0 && self.exec_fraction <= 1.0) {
            return bad(format!("execution fraction {} not in (0, 1]", self.exec_fraction));
        }
        for (name, v) in [("v_nominal", self.v_nominal), ("t_floor", self.t_floor), ("dt", self.dt)] {
            if !(v > 0.0) {
                return bad(format!("{name} must be positive"));
            }
        }
        if self.horizon == 0 {
            return bad("horizon must be at least 1".into());
        }
        Ok(())
    }

    fn entries(&self) -> Vec<(&'static str, String)> {
        let opt = |v: Option<f64>| v.map_or_else(|| "auto".to_string(), |x| x.to_string());
        let mut e = vec![("scenario", self.kind.name().to_string())];
        if let ScenarioKind::MapFile(p) = &self.kind {
            e.push(("map", p.display().to_string()));
        }
        e.extend([
            ("width", self.width.to_string()),
            ("height", self.height.to_string()),
            ("wall_thickness", self.wall_thickness.to_string()),
            ("gap", self.gap.to_string()),
            ("blocks", self.blocks.to_string()),
            ("block_min", self.block_min.to_string()),
            ("block_max", self.block_max.to_string()),
            ("robots", self.robots.to_string()),
            ("k", self.k.to_string()),
            ("order", self.order.to_string()),
            ("r_comm", self.r_comm.map_or_else(|| "none".to_string(), |x| x.to_string())),
            ("a_i", self.a_i.to_string()),
            ("b_i", self.b_i.to_string()),
            ("k_a", self.k_a.to_string()),
            ("k_r", self.k_r.to_string()),
            ("zeta", opt(self.zeta)),
            ("a_g", self.a_g.to_string()),
            ("k_g", self.k_g.to_string()),
            ("sigma_hat", self.sigma_hat.to_string()),
            ("gamma", self.gamma.to_string()),
            ("start_x", self.start.x.to_string()),
            ("start_y", self.start.y.to_string()),
            ("start_var_x", self.start_cov[(0, 0)].to_string()),
            ("start_cov_xy", self.start_cov[(0, 1)].to_string()),
            ("start_var_y", self.start_cov[(1, 1)].to_string()),
            ("goal_x", self.goal.x.to_string()),
            ("goal_y", self.goal.y.to_string()),
            ("trim_backward", self.trim_backward.to_string()),
            ("eps_converge", self.eps_converge.to_string()),
            ("patience", self.patience.to_string()),
            ("max_iters", self.max_iters.to_string()),
            ("horizon", self.horizon.to_string()),
            ("exec_fraction", self.exec_fraction.to_string()),
            ("v_nominal", self.v_nominal.to_string()),
            ("t_floor", self.t_floor.to_string()),
            ("d_safe", self.d_safe.to_string()),
            ("corridor_halfwidth", self.corridor_halfwidth.to_string()),
            ("dt", self.dt.to_string()),
            ("goal_radius", self.goal_radius.to_string()),
            ("max_horizons", self.max_horizons.to_string()),
            ("seed", self.seed.to_string()),
        ]);
        e
    }

    /// Effective configuration, one `key = value` per line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.entries() {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    /// Parses `key = value` lines; `#` starts a comment. The `scenario` key
    /// selects the defaults the other keys override.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut pairs = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or(ConfigError::Syntax { line: n + 1 })?;
            pairs.push((k.trim().to_string(), v.trim().to_string()));
        }
        Self::from_pairs(&pairs)
    }

    /// Builds a config from ordered overrides, applying `scenario`/`map` first.
    pub fn from_pairs(pairs: &[(String, String)]) -> Result<Self, ConfigError> {
        let map: BTreeMap<&str, &str> = pairs.iter().map(|(k, v)| (k.as_str(), v.as_str())).collect();
        let kind = match (map.get("scenario").copied(), map.get("map").copied()) {
            (_, Some(path)) => ScenarioKind::MapFile(PathBuf::from(path)),
            (None | Some("free"), None) => ScenarioKind::Free,
            (Some("corridor"), None) => ScenarioKind::Corridor,
            (Some("random-blocks"), None) => ScenarioKind::RandomBlocks,
            (Some(other), None) => {
                return Err(ConfigError::Value { key: "scenario".into(), value: other.into() });
            }
        };
        let mut c = Self::for_kind(kind);
        for (k, v) in pairs {
            if k != "scenario" && k != "map" {
                c.set(k, v)?;
            }
        }
        Ok(c)
    }

    /// Overrides one key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, ConfigError> {
            v.parse().map_err(|_| ConfigError::Value { key: key.into(), value: v.into() })
        }
        let auto = |v: &str, word: &str| -> Result<Option<f64>, ConfigError> {
            if v == word {
                Ok(None)
            } else {
                num(key, v).map(Some)
            }
        };
        match key {
            "scenario" | "map" => {
                // switching scenario resets the geometry-dependent defaults
                let base = Self::from_pairs(&[(key.to_string(), value.to_string())])?;
                self.kind = base.kind;
                self.start = base.start;
                self.goal = base.goal;
                self.width = base.width;
                self.height = base.height;
                self.trim_backward = base.trim_backward;
            }
            "width" => self.width = num(key, value)?,
            "height" => self.height = num(key, value)?,
            "wall_thickness" => self.wall_thickness = num(key, value)?,
            "gap" => self.gap = num(key, value)?,
            "blocks" => self.blocks = num(key, value)?,
            "block_min" => self.block_min = num(key, value)?,
            "block_max" => self.block_max = num(key, value)?,
            "robots" => self.robots = num(key, value)?,
            "k" => self.k = num(key, value)?,
            "order" => self.order = num(key, value)?,
            "r_comm" => self.r_comm = auto(value, "none")?,
            "a_i" => self.a_i = num(key, value)?,
            "b_i" => self.b_i = num(key, value)?,
            "k_a" => self.k_a = num(key, value)?,
            "k_r" => self.k_r = num(key, value)?,
            "zeta" => self.zeta = auto(value, "auto")?,
            "a_g" => self.a_g = num(key, value)?,
            "k_g" => self.k_g = num(key, value)?,
            "sigma_hat" => self.sigma_hat = num(key, value)?,
            "gamma" => self.gamma = num(key, value)?,
            "start_x" => self.start.x = num(key, value)?,
            "start_y" => self.start.y = num(key, value)?,
            "start_var_x" => self.start_cov[(0, 0)] = num(key, value)?,
            "start_var_y" => self.start_cov[(1, 1)] = num(key, value)?,
            "start_cov_xy" => {
                let v = num(key, value)?;
                self.start_cov[(0, 1)] = v;
                self.start_cov[(1, 0)] = v;
            }
            "goal_x" => self.goal.x = num(key, value)?,
            "goal_y" => self.goal.y = num(key, value)?,
            "trim_backward" => self.trim_backward = num(key, value)?,
            "eps_converge" => self.eps_converge = num(key, value)?,
            "patience" => self.patience = num(key, value)?,
            "max_iters" => self.max_iters = num(key, value)?,
            "horizon" => self.horizon = num(key, value)?,
            "exec_fraction" => self.exec_fraction = num(key, value)?,
            "v_nominal" => self.v_nominal = num(key, value)?,
            "t_floor" => self.t_floor = num(key, value)?,
            "d_safe" => self.d_safe = num(key, value)?,
            "corridor_halfwidth" => self.corridor_halfwidth = num(key, value)?,
            "dt" => self.dt = num(key, value)?,
            "goal_radius" => self.goal_radius = num(key, value)?,
            "max_horizons" => self.max_horizons = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            other => return Err(ConfigError::UnknownKey(other.to_string())),
        }
        Ok(())
    }
}

/// Empty map.
pub fn free_map(width: usize, height: usize) -> OccupancyGrid {
    OccupancyGrid::free(width, height)
}

/// Full-width wall of `thickness` rows centred vertically, with a passage of
/// `gap` columns centred horizontally.
pub fn corridor_map(width: usize, height: usize, thickness: usize, gap: usize) -> Result<OccupancyGrid, ConfigError> {
    if thickness == 0 || thickness >= height || gap == 0 || gap >= width {
        return Err(ConfigError::Invalid(format!("corridor wall {thickness} rows with gap {gap} does not fit")));
    }
    let mut g = OccupancyGrid::free(width, height);
    let y0 = (height - thickness) / 2;
    let x0 = (width - gap) / 2;
    for y in y0..y0 + thickness {
        for x in (0..width).filter(|x| !(x0..x0 + gap).contains(x)) {
            g.set_probability(Cell::new(x as i32, y as i32), 1.0).expect("in bounds");
        }
    }
    Ok(g)
}

/// Free cells 4-connected to `from`.
pub fn flood_fill(grid: &OccupancyGrid, from: Cell) -> Vec<bool> {
    let mut seen = vec![false; grid.width() * grid.height()];
    if !grid.passable(from) {
        return seen;
    }
    let idx = |c: Cell| c.y as usize * grid.width() + c.x as usize;
    let mut queue = VecDeque::from([from]);
    seen[idx(from)] = true;
    while let Some(c) = queue.pop_front() {
        for (dx, dy) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
            let n = Cell::new(c.x + dx, c.y + dy);
            if grid.passable(n) && !seen[idx(n)] {
                seen[idx(n)] = true;
                queue.push_back(n);
            }
        }
    }
    seen
}

/// Seeded axis-aligned blocks that keep a disk of radius 3 around `start`
/// and radius 2 around `goal` free, regenerated until the two are connected.
pub fn random_blocks_map(cfg: &ScenarioConfig) -> Result<OccupancyGrid, ConfigError> {
    let (w, h) = (cfg.width, cfg.height);
    let start = Cell::containing(&cfg.start);
    let goal = Cell::containing(&cfg.goal);
    let probe = OccupancyGrid::free(w, h);
    if !probe.contains(start) || !probe.contains(goal) {
        return Err(ConfigError::Invalid("start or goal outside the map".into()));
    }
    let mut rng = stream_rng(cfg.seed, MAP_STREAM);
    for _ in 0..MAP_ATTEMPTS {
        let mut g = OccupancyGrid::free(w, h);
        let mut placed = 0;
        let mut tries = 0;
        while placed < cfg.blocks && tries < 50 * cfg.blocks.max(1) {
            tries += 1;
            let bw = rng.random_range(cfg.block_min..=cfg.block_max) as i32;
            let bh = rng.random_range(cfg.block_min..=cfg.block_max) as i32;
            let x0 = rng.random_range(0..=(w as i32 - bw).max(0));
            let y0 = rng.random_range(0..=(h as i32 - bh).max(0));
            let cells: Vec<Cell> = (y0..y0 + bh).flat_map(|y| (x0..x0 + bw).map(move |x| Cell::new(x, y))).collect();
            if cells.iter().any(|&c| c.dist2(start) <= 9 || c.dist2(goal) <= 4) {
                continue;
            }
            for c in cells {
                g.set_probability(c, 1.0).expect("in bounds");
            }
            placed += 1;
        }
        let reach = flood_fill(&g, start);
        if reach[goal.y as usize * w + goal.x as usize] {
            return Ok(g);
        }
    }
    Err(ConfigError::Unconnected(MAP_ATTEMPTS))
}

/// Builds the map for the configured scenario.
pub fn generate_map(cfg: &ScenarioConfig) -> Result<OccupancyGrid, ConfigError> {
    match &cfg.kind {
        ScenarioKind::Free => Ok(free_map(cfg.width, cfg.height)),
        ScenarioKind::Corridor => corridor_map(cfg.width, cfg.height, cfg.wall_thickness, cfg.gap),
        ScenarioKind::RandomBlocks => random_blocks_map(cfg),
        ScenarioKind::MapFile(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| ConfigError::MapFile { path: path.clone(), source })?;
            OccupancyGrid::parse(&text).map_err(|source| ConfigError::MapParse { path: path.clone(), source })
        }
    }
}

/// Lower-triangular factor of a PSD 2x2 covariance, tolerating zeros.
fn cholesky2(c: &Matrix2<f64>) -> Matrix2<f64> {
    let l00 = c[(0, 0)].max(0.0).sqrt();
    let l10 = if l00 > 0.0 { c[(1, 0)] / l00 } else { 0.0 };
    let l11 = (c[(1, 1)] - l10 * l10).max(0.0).sqrt();
    Matrix2::new(l00, 0.0, l10, l11)
}

/// Nearest free cell not in `taken`, by distance then row-major order.
fn nearest_free_unused(grid: &OccupancyGrid, from: Cell, taken: &[Cell]) -> Option<Cell> {
    let reach = grid.width().max(grid.height()) as i32;
    (0..=reach).find_map(|r| {
        let mut ring: Vec<Cell> = (-r..=r)
            .flat_map(|dy| (-r..=r).map(move |dx| Cell::new(from.x + dx, from.y + dy)))
            .filter(|&c| grid.passable(c) && !taken.contains(&c))
            .collect();
        ring.sort_by_key(|&c| (c.dist2(from), c.row_major_key()));
        // only trust candidates no farther than the square of radius r covers
        ring.into_iter().find(|&c| c.dist2(from) <= (r as i64) * (r as i64))
    })
}

/// Draws `robots` distinct free start cells from the start Gaussian.
///
/// Samples landing on occupied or off-map cells are redrawn. A sample landing
/// on a taken cell is moved to the nearest free unused cell. A full set whose
/// interaction graph leaves a robot without neighbours is discarded. At most
/// 1000 samples are drawn in total.
pub fn sample_start(cfg: &ScenarioConfig, grid: &OccupancyGrid) -> Result<SwarmState, ConfigError> {
    let mut rng = stream_rng(cfg.seed, START_STREAM);
    let l = cholesky2(&cfg.start_cov);
    let mut draws = 0;
    let infeasible = || ConfigError::InfeasibleStart { robots: cfg.robots, attempts: START_ATTEMPTS };
    loop {
        let mut cells: Vec<Cell> = Vec::with_capacity(cfg.robots);
        while cells.len() < cfg.robots {
            if draws >= START_ATTEMPTS {
                return Err(infeasible());
            }
            draws += 1;
            let z = Vector2::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal));
            let c = Cell::containing(&(cfg.start + l * z));
            if !grid.passable(c) {
                continue;
            }
            let c = if cells.contains(&c) {
                nearest_free_unused(grid, c, &cells).ok_or_else(infeasible)?
            } else {
                c
            };
            cells.push(c);
        }
        let points: Vec<Point2<f64>> = cells.iter().map(|c| c.center()).collect();
        let graph = build_interaction_graph(&points, cfg.k, cfg.r_comm).map_err(MrfError::from)?;
        if check_connectivity_condition(&graph) {
            return Ok(SwarmState::new(grid, cells, cfg.k, cfg.r_comm)?);
        }
    }
}

/// Map, static field and start state of a configured scenario.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub grid: OccupancyGrid,
    pub static_field: ScalarField,
    pub interaction: InteractionParams,
    pub start: SwarmState,
}

impl Scenario {
    pub fn build(config: &ScenarioConfig, exec: Exec) -> Result<Self, ConfigError> {
        config.validate()?;
        let grid = generate_map(config)?;
        let goal = GoalParams::new(config.a_g, config.k_g, config.goal)?;
        goal.check_bounds(&grid)?;
        let obstacles = ObstacleParams::new(config.sigma_hat, config.gamma)?;
        let m_hat = threshold_map(&grid, config.gamma).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let field = static_field(&build_goal_field(&grid, &goal, exec), &build_obstacle_field(&m_hat, &obstacles, exec))?;
        let start = sample_start(config, &grid)?;
        Ok(Scenario { config: config.clone(), grid, static_field: field, interaction: config.interaction()?, start })
    }

    pub fn problem(&self) -> crate::rhp::Problem<'_> {
        crate::rhp::Problem {
            grid: &self.grid,
            static_field: &self.static_field,
            interaction: self.interaction,
            goal: self.config.goal,
        }
    }
}
