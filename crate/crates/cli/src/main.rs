use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use nalgebra::Point2;

use swarm_mrf::fields::render_combined_field;
use swarm_mrf::mrf::{optimize, sweep, EnergyModel};
use swarm_mrf::par::Exec;
use swarm_mrf::report::{self, Artifacts};
use swarm_mrf::rhp::{metrics, run, RhpError, RunStatus};
use swarm_mrf::scenario::{ConfigError, Scenario, ScenarioConfig, ScenarioKind};
use swarm_mrf::trajopt::{allocate_times, min_snap, sample, SmoothingConfig};

#[derive(Parser)]
#[command(name = "swarm-mrf", version, about = "Swarm path planning by MRF energy minimization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Full receding-horizon pipeline: MRF paths, pruning, smoothing, execution.
    Plan {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[command(flatten)]
        swarm: SwarmArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Discrete MRF paths only, without smoothing.
    MrfOnly {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[command(flatten)]
        swarm: SwarmArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Minimum-snap smoothing of a waypoint CSV (`robot,x,y`, meters).
    Smooth {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        v_nominal: f64,
        #[arg(long, default_value_t = 0.1)]
        t_floor: f64,
        #[arg(long, default_value_t = 0.05)]
        dt: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Time ICM sweeps for several swarm sizes and search orders.
    Bench {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, value_delimiter = ',', default_values_t = [5usize, 10, 15])]
        robots: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_values_t = [2u32, 4, 8])]
        order: Vec<u32>,
        #[arg(long)]
        k: Option<usize>,
        /// Sweeps averaged per configuration.
        #[arg(long, default_value_t = 20)]
        sweeps: usize,
        /// Also write `bench.csv` here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Dump the map, static field and combined field at the start state.
    RenderField {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[command(flatten)]
        swarm: SwarmArgs,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct ScenarioArgs {
    /// `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// free, corridor or random-blocks.
    #[arg(long)]
    scenario: Option<String>,
    /// Occupancy map file; overrides --scenario.
    #[arg(long)]
    map: Option<PathBuf>,
    /// Override any configuration key, e.g. `--set k_a=10`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Run every loop on one thread.
    #[arg(long)]
    sequential: bool,
}

#[derive(Args)]
struct SwarmArgs {
    #[arg(long)]
    robots: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    /// Order of the local search neighbourhood.
    #[arg(long)]
    order: Option<u32>,
}

#[derive(Debug)]
enum Failure {
    Config(String),
    Io(PathBuf, std::io::Error),
    Run(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl ScenarioArgs {
    fn exec(&self) -> Exec {
        if self.sequential {
            Exec::Sequential
        } else {
            Exec::Parallel
        }
    }

    fn load(&self, swarm: Option<&SwarmArgs>) -> Result<ScenarioConfig, Failure> {
        let mut c = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| Failure::Config(format!("cannot read config {}: {e}", path.display())))?;
                ScenarioConfig::parse(&text)
                    .map_err(|e| Failure::Config(format!("config {}: {e}", path.display())))?
            }
            None => ScenarioConfig::for_kind(ScenarioKind::Free),
        };
        if let Some(s) = &self.scenario {
            c.set("scenario", s)?;
        }
        if let Some(m) = &self.map {
            c.set("map", &m.display().to_string())?;
        }
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Failure::Config(format!("--set expects KEY=VALUE, got `{kv}`")))?;
            c.set(k.trim(), v.trim())?;
        }
        if let Some(seed) = self.seed {
            c.seed = seed;
        }
        if let Some(sw) = swarm {
            if let Some(n) = sw.robots {
                c.robots = n;
            }
            if let Some(k) = sw.k {
                c.k = k;
            }
            if let Some(o) = sw.order {
                c.order = o;
            }
        }
        c.validate()?;
        Ok(c)
    }
}

fn write(artifacts: &Artifacts, dir: &Path) -> Result<(), Failure> {
    artifacts.write(dir).map_err(|e| Failure::Io(dir.to_path_buf(), e))
}

fn plan(args: &ScenarioArgs, swarm: &SwarmArgs, out: &Path) -> Result<RunStatus, Failure> {
    let exec = args.exec();
    let config = args.load(Some(swarm))?;
    let sc = Scenario::build(&config, exec)?;
    let result = match run(&sc.problem(), &sc.start, &config.rhp_config(exec)) {
        Ok(r) => r,
        Err(RhpError::Config(msg)) => return Err(Failure::Config(msg)),
        Err(e) => return Err(Failure::Run(e.to_string())),
    };
    let m = metrics(&result, exec);
    let mut files = report::run_artifacts(&config.to_text(), &sc.start.graph().cliques_text(), &sc.grid, &result, &m);
    files.push("timing.csv", report::timing_csv(&result.sweep_times));
    write(&files, out)?;
    print!("{}", files.get("summary.txt").unwrap_or_default());
    Ok(result.status)
}

fn mrf_only(args: &ScenarioArgs, swarm: &SwarmArgs, out: &Path) -> Result<(), Failure> {
    let exec = args.exec();
    let config = args.load(Some(swarm))?;
    let sc = Scenario::build(&config, exec)?;
    let model = EnergyModel { static_field: &sc.static_field, interaction: sc.interaction, goal: Some(config.goal) };
    let opt = optimize(&sc.grid, &sc.start, &model, &config.mrf_config(exec)).map_err(|e| Failure::Run(e.to_string()))?;
    let sweep_times: Vec<Duration> = opt.sweeps.iter().map(|s| s.elapsed).collect();
    let mut files = report::mrf_artifacts(&config.to_text(), &sc.start.graph().cliques_text(), &opt);
    files.push("timing.csv", report::timing_csv(&sweep_times));
    write(&files, out)?;
    print!("{}", files.get("summary.txt").unwrap_or_default());
    Ok(())
}

/// Reads `robot,x,y` rows (an optional header is skipped), grouped by robot
/// in order of first appearance.
fn read_waypoints(path: &Path) -> Result<Vec<(usize, Vec<Point2<f64>>)>, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut robots: Vec<(usize, Vec<Point2<f64>>)> = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (n == 0 && line.starts_with("robot")) {
            continue;
        }
        let bad = || Failure::Config(format!("{}:{}: expected `robot,x,y`", path.display(), n + 1));
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 3 {
            return Err(bad());
        }
        let id: usize = f[0].parse().map_err(|_| bad())?;
        let p = Point2::new(f[1].parse().map_err(|_| bad())?, f[2].parse().map_err(|_| bad())?);
        match robots.iter_mut().find(|(r, _)| *r == id) {
            Some((_, w)) => w.push(p),
            None => robots.push((id, vec![p])),
        }
    }
    Ok(robots)
}

fn smooth(input: &Path, cfg: &SmoothingConfig, out: &Path) -> Result<(), Failure> {
    let robots = read_waypoints(input)?;
    let mut traj = String::from("robot,t,x,y,vx,vy,ax,ay\n");
    let mut coeffs = String::from("robot,dim,segment,j,alpha\n");
    for (id, w) in &robots {
        let times =
            allocate_times(w, cfg.v_nominal, cfg.t_floor).map_err(|e| Failure::Config(format!("robot {id}: {e}")))?;
        let tr = min_snap(w, &times).map_err(|e| Failure::Run(format!("robot {id}: {e}")))?;
        for s in sample(&tr, cfg.dt) {
            let _ = writeln!(
                traj,
                "{id},{:.6},{:.9},{:.9},{:.9},{:.9},{:.9},{:.9}",
                s.t, s.position.x, s.position.y, s.velocity.x, s.velocity.y, s.acceleration.x, s.acceleration.y
            );
        }
        coeffs.push_str(&tr.coefficient_rows(*id));
    }
    let mut files = Artifacts::default();
    files.push("trajectories.csv", traj);
    files.push("coefficients.csv", coeffs);
    write(&files, out)
}

fn bench(
    args: &ScenarioArgs,
    robots: &[usize],
    orders: &[u32],
    k: Option<usize>,
    sweeps: usize,
    out: Option<&Path>,
) -> Result<(), Failure> {
    let exec = args.exec();
    let base = args.load(None)?;
    let mut csv = String::from("robots,order,ms_per_sweep\n");
    for &n in robots {
        for &order in orders {
            let mut c = base.clone();
            c.robots = n;
            c.order = order;
            c.k = k.unwrap_or(c.k).min(n.saturating_sub(1)).max(1);
            c.validate()?;
            let sc = Scenario::build(&c, exec)?;
            let model = EnergyModel { static_field: &sc.static_field, interaction: sc.interaction, goal: Some(c.goal) };
            let cfg = c.mrf_config(exec);
            let total: Duration = (0..sweeps.max(1)).map(|_| sweep(&sc.grid, &sc.start, &model, &cfg).elapsed).sum();
            let _ = writeln!(csv, "{n},{order},{:.6}", total.as_secs_f64() * 1e3 / sweeps.max(1) as f64);
        }
    }
    if let Some(dir) = out {
        let mut files = Artifacts::default();
        files.push("bench.csv", csv.clone());
        write(&files, dir)?;
    }
    print!("{csv}");
    Ok(())
}

fn render_field(args: &ScenarioArgs, swarm: &SwarmArgs, out: &Path) -> Result<(), Failure> {
    let exec = args.exec();
    let config = args.load(Some(swarm))?;
    let sc = Scenario::build(&config, exec)?;
    let points = sc.start.points();
    let combined = render_combined_field(&sc.static_field, &points, &sc.interaction, exec);
    let mut files = Artifacts::default();
    files.push("config.txt", config.to_text());
    files.push("map.txt", sc.grid.to_text());
    files.push("static_field.txt", sc.static_field.to_text());
    files.push("combined_field.txt", combined.to_text());
    files.push("start.csv", report::discrete_csv(&start_paths(&sc)));
    write(&files, out)
}

fn start_paths(sc: &Scenario) -> Vec<swarm_mrf::paths::DiscretePath> {
    sc.start
        .positions()
        .iter()
        .enumerate()
        .map(|(robot, &c)| swarm_mrf::paths::DiscretePath { robot, cells: vec![c] })
        .collect()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Plan { scenario, swarm, out } => plan(scenario, swarm, out).map(|status| match status {
            RunStatus::GoalConverged => 0,
            RunStatus::MaxHorizons => 2,
            RunStatus::Unrepairable => 3,
        }),
        Command::MrfOnly { scenario, swarm, out } => mrf_only(scenario, swarm, out).map(|_| 0),
        Command::Smooth { input, v_nominal, t_floor, dt, out } => {
            let cfg = SmoothingConfig { v_nominal: *v_nominal, t_floor: *t_floor, dt: *dt, ..SmoothingConfig::default() };
            smooth(input, &cfg, out).map(|_| 0)
        }
        Command::Bench { scenario, robots, order, k, sweeps, out } => {
            bench(scenario, robots, order, *k, *sweeps, out.as_deref()).map(|_| 0)
        }
        Command::RenderField { scenario, swarm, out } => render_field(scenario, swarm, out).map(|_| 0),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Io(path, e)) => {
            eprintln!("error: cannot write {}: {e}", path.display());
            ExitCode::from(1)
        }
        Err(Failure::Run(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}
