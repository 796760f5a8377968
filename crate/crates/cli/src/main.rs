use std::fmt::Write as _;
use std::io::{BufRead, Write as _};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use waiter_core::grid::{GridMap, Pose2D};
use waiter_core::layers::{DetectionLog, MapLayers};
use waiter_core::llm::{BackendConfig, BackendMode, ChatClient, RemoteBackend, RuleBackend, StubBackend};
use waiter_core::nav_goal::{select_goal, NavGoalParams};
use waiter_core::placement::{find_placement, ransac_plane, PlacementParams, PointCloud, RansacParams};
use waiter_core::sim::{load_scenario, run, Location, Metrics, Scenario, Session, SimConfig, TaskReport, World};
use waiter_core::task::{Backend, PipelineMode, Registry};
use waiter_core::Error;

#[derive(Parser)]
#[command(name = "waiter", version, about = "Layered restaurant map, task engine and simulator")]
struct Cli {
    #[command(flatten)]
    backend: BackendArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct BackendArgs {
    /// Task parser and reply generator; defaults to the config file's mode, else rules.
    #[arg(long, global = true, value_enum)]
    backend: Option<BackendChoice>,
    /// JSON backend configuration (endpoint, model, timeouts, key variable).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Base URL of an OpenAI-compatible service; overrides the config file.
    #[arg(long, global = true)]
    endpoint: Option<String>,
    #[arg(long, global = true)]
    model: Option<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendChoice {
    Rules,
    Stub,
    Remote,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Parallel,
    Sequential,
}

impl From<Mode> for PipelineMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Parallel => PipelineMode::Parallel,
            Mode::Sequential => PipelineMode::Sequential,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Build or inspect layer dumps.
    #[command(subcommand)]
    Map(MapCommand),
    /// Pick a navigation goal next to a piece of furniture.
    NavGoal {
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        layers: PathBuf,
        #[arg(long)]
        furniture: String,
        /// Robot pose as x,y,theta.
        #[arg(long, value_parser = parse_pose, allow_hyphen_values = true)]
        robot: Pose2D,
    },
    /// Fit the table plane in a point cloud and pick a free spot on it.
    Place {
        #[arg(long)]
        cloud: PathBuf,
        /// Object radius in meters.
        #[arg(long)]
        radius: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Replay a scenario and print its metrics.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, value_enum, default_value_t = Mode::Parallel)]
        mode: Mode,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the event log (one JSON record per line).
        #[arg(long)]
        log: Option<PathBuf>,
        /// Write the metrics document.
        #[arg(long)]
        metrics: Option<PathBuf>,
        /// JSON task registry replacing the scenario's own.
        #[arg(long)]
        registry: Option<PathBuf>,
    },
    /// Type customer utterances against a scenario's world.
    Repl {
        #[arg(long)]
        scenario: PathBuf,
        /// Table the customer sits at; defaults to the first non-kitchen table.
        #[arg(long)]
        table: Option<String>,
        #[arg(long, value_enum, default_value_t = Mode::Parallel)]
        mode: Mode,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// JSON task registry replacing the scenario's own.
        #[arg(long)]
        registry: Option<PathBuf>,
    },
    /// Compare metrics documents.
    #[command(subcommand)]
    Metrics(MetricsCommand),
}

#[derive(Subcommand)]
enum MapCommand {
    /// Track a detection log into a layer dump.
    Build {
        #[arg(long)]
        grid: PathBuf,
        #[arg(long)]
        detections: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print a layer dump as text.
    Dump {
        #[arg(long)]
        layers: PathBuf,
        /// Print the canonical JSON document instead.
        #[arg(long)]
        json: bool,
    },
}

#[derive(Subcommand)]
enum MetricsCommand {
    /// List fields that differ; exit 1 when any do.
    Diff { a: PathBuf, b: PathBuf },
}

fn parse_pose(s: &str) -> Result<Pose2D, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<Result<_, _>>()?;
    match v[..] {
        [x, y, theta] if v.iter().all(|c| c.is_finite()) => Ok(Pose2D::new(x, y, theta)),
        _ => Err("expected x,y,theta".into()),
    }
}

enum Failure {
    Domain(String),
    Usage(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Parse { .. }
            | Error::Document(_)
            | Error::Scenario { .. }
            | Error::Parameter(_)
            | Error::Io(_) => Failure::Usage(e.to_string()),
            _ => Failure::Domain(e.to_string()),
        }
    }
}

type CmdResult = Result<String, Failure>;

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn scenario(path: &Path, registry: Option<&Path>) -> Result<(Scenario, GridMap), Failure> {
    let (mut sc, grid) = load_scenario(path)?;
    if let Some(p) = registry {
        sc.world.registry = Some(Registry::from_json(&read(p)?)?);
        sc.validate()?;
    }
    Ok((sc, grid))
}

fn backend(args: &BackendArgs) -> Result<Box<dyn Backend>, Failure> {
    let mut cfg = match &args.config {
        Some(p) => serde_json::from_str::<BackendConfig>(&read(p)?)
            .map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))?,
        None => BackendConfig::default(),
    };
    if let Some(b) = args.backend {
        cfg.mode = match b {
            BackendChoice::Rules => BackendMode::Rules,
            BackendChoice::Stub => BackendMode::Stub,
            BackendChoice::Remote => BackendMode::Remote,
        };
    }
    if args.endpoint.is_some() {
        cfg.endpoint = args.endpoint.clone();
    }
    if args.model.is_some() {
        cfg.model = args.model.clone();
    }
    cfg.validate()?;
    Ok(match cfg.mode {
        BackendMode::Rules => Box::new(RuleBackend),
        // an empty script: every call falls back to the rules and the apology
        BackendMode::Stub => Box::new(StubBackend::new(Vec::new(), Vec::new())),
        BackendMode::Remote => Box::new(RemoteBackend::new(ChatClient::http(cfg)?)),
    })
}

fn layers_text(layers: &MapLayers) -> String {
    let mut s = String::new();
    let kitchen = layers.furniture.kitchen();
    let _ = writeln!(s, "zones: {}", layers.zones.len());
    for z in &layers.zones {
        let (lo, hi) = z.extent();
        let _ = writeln!(s, "  {} [{:.3}, {:.3}] - [{:.3}, {:.3}]", z.name, lo.x, lo.y, hi.x, hi.y);
    }
    let list = layers.furniture.list();
    let _ = writeln!(s, "furniture: {}", list.len());
    for f in list {
        let _ = writeln!(
            s,
            "  {} {} at ({:.3}, {:.3}) yaw {:.3} size {:.2} x {:.2} x {:.2}{}",
            f.id,
            f.class_name,
            f.pose.x,
            f.pose.y,
            f.pose.theta,
            f.dims.w,
            f.dims.d,
            f.dims.h,
            if kitchen == Some(f.id.as_str()) { " [kitchen]" } else { "" }
        );
    }
    let humans = layers.humans.humans();
    let _ = writeln!(s, "humans: {}", humans.len());
    for h in humans {
        let _ = writeln!(
            s,
            "  {} {} at ({:.3}, {:.3})",
            h.id,
            h.action,
            h.position.x,
            h.position.y
        );
    }
    s
}

fn map_build(grid: &Path, detections: &Path, out: &Path) -> CmdResult {
    let grid = GridMap::load(&read(grid)?)?;
    let log = DetectionLog::from_json(&read(detections)?)?;
    let (layers, _) = MapLayers::from_detection_log(&log)?;
    let with_furniture = layers.furniture.virtual_obstacles(&grid);
    let blocked = with_furniture.cells().iter().filter(|c| c.is_obstacle()).count()
        - grid.cells().iter().filter(|c| c.is_obstacle()).count();
    write(out, &layers.to_json())?;
    Ok(format!(
        "{}virtual obstacle cells: {blocked}\nwrote {}\n",
        layers_text(&layers),
        out.display()
    ))
}

fn nav_goal(map: &Path, layers: &Path, id: &str, robot: Pose2D) -> CmdResult {
    let grid = GridMap::load(&read(map)?)?;
    let layers = MapLayers::from_json(&read(layers)?)?;
    let target = layers.furniture.get(id)?;
    let params = NavGoalParams::for_resolution(grid.resolution());
    let risk = layers.furniture.virtual_obstacles(&grid).inflate(params.robot_radius)?;
    let footprints: Vec<_> = layers.furniture.list().iter().map(|f| f.footprint()).collect();
    let g = select_goal(&risk, &footprints, target, &robot, &params)?;
    Ok(format!(
        "goal: x={:.3} y={:.3} theta={:.3}\ncell: col={} row={}\ncost: {}\n",
        g.pose.x, g.pose.y, g.pose.theta, g.cell.col, g.cell.row, g.cost
    ))
}

fn place(cloud: &Path, radius: f64, seed: u64) -> CmdResult {
    let cloud = PointCloud::parse(&read(cloud)?)?;
    let fit = ransac_plane(&cloud, &RansacParams { seed, ..Default::default() })?;
    let p = find_placement(&cloud, &fit.plane, &fit.inliers, radius, &PlacementParams::default())?;
    let n = fit.plane.normal;
    Ok(format!(
        "plane: normal=({:.4}, {:.4}, {:.4}) d={:.4}\ninliers: {}/{}\npoint: x={:.3} y={:.3} z={:.3}\n",
        n[0],
        n[1],
        n[2],
        fit.plane.d,
        fit.inliers.len(),
        cloud.len(),
        p.x,
        p.y,
        p.z
    ))
}

struct RunArgs<'a> {
    scenario: &'a Path,
    registry: Option<&'a Path>,
    mode: Mode,
    seed: u64,
}

fn run_cmd(args: &BackendArgs, r: RunArgs, log: Option<&Path>, metrics: Option<&Path>) -> CmdResult {
    let (sc, grid) = scenario(r.scenario, r.registry)?;
    let (mode, seed) = (r.mode, r.seed);
    let config = SimConfig { mode: mode.into(), seed, ..Default::default() };
    let b = backend(args)?;
    let rep = run(&sc, grid, &config, b.as_ref())?;
    if let Some(p) = log {
        write(p, &rep.log_text())?;
    }
    if let Some(p) = metrics {
        write(p, &rep.metrics.to_json())?;
    }
    Ok(rep.metrics.to_string())
}

fn render_report(r: &TaskReport, world: &World) -> String {
    let task = &r.handled.task;
    let mut s = format!("robot: {}\ntask: {}", r.handled.response, task.name);
    for (k, v) in &task.slots {
        let _ = write!(s, " {k}={v}");
    }
    s.push('\n');
    s.push_str(&r.outcome.render());
    let p = world.robot;
    let _ = writeln!(
        s,
        "state: robot at ({:.2}, {:.2}) near {}, holding [{}], table has [{}]",
        p.x,
        p.y,
        world.at.as_deref().unwrap_or("-"),
        world.items_at(&Location::Gripper).join(", "),
        world.items_at(&Location::Table(r.table.clone())).join(", ")
    );
    s
}

fn repl(args: &BackendArgs, r: RunArgs, table: Option<String>) -> Result<(), Failure> {
    let (sc, grid) = scenario(r.scenario, r.registry)?;
    let (mode, seed) = (r.mode, r.seed);
    let config = SimConfig { mode: mode.into(), seed, ..Default::default() };
    let b = backend(args)?;
    let mut session = Session::new(&sc, grid, &config)?;
    let table = match table {
        Some(t) => t,
        None => session
            .world
            .layers
            .furniture
            .list()
            .iter()
            .map(|f| f.id.clone())
            .find(|id| *id != session.world.kitchen)
            .ok_or_else(|| Failure::Usage("the scenario has no customer table".into()))?,
    };
    session.world.layers.furniture.get(&table)?;
    let stdin = std::io::stdin();
    let mut out = std::io::stdout();
    let prompt = format!("{table}> ");
    let _ = write!(out, "{prompt}");
    let _ = out.flush();
    for line in stdin.lock().lines() {
        let line = line.map_err(|e| Failure::Usage(e.to_string()))?;
        let text = line.trim();
        if text == ":quit" {
            break;
        }
        if !text.is_empty() {
            match session.ask(&table, text, b.as_ref()) {
                Ok(r) => {
                    let _ = write!(out, "{}", render_report(&r, &session.world));
                }
                Err(e) => {
                    let _ = writeln!(out, "error: {e}");
                }
            }
        }
        let _ = write!(out, "{prompt}");
        let _ = out.flush();
    }
    let _ = writeln!(out);
    Ok(())
}

fn metrics_diff(a: &Path, b: &Path) -> Result<(String, bool), Failure> {
    let ma = Metrics::from_json(&read(a)?)?;
    let mb = Metrics::from_json(&read(b)?)?;
    let d = ma.diff(&mb);
    if d.is_empty() {
        return Ok(("metrics identical\n".into(), true));
    }
    let mut s = String::new();
    for (field, x, y) in d {
        let _ = writeln!(s, "{field}: {x} -> {y}");
    }
    let (an, ad) = ma.accuracy_ratio();
    let (bn, bd) = mb.accuracy_ratio();
    let _ = writeln!(s, "accuracy: {an}/{ad} -> {bn}/{bd}");
    Ok((s, false))
}

fn dispatch(cli: Cli) -> Result<(String, bool), Failure> {
    let ok = |s: String| Ok((s, true));
    match cli.command {
        Command::Map(MapCommand::Build { grid, detections, out }) => ok(map_build(&grid, &detections, &out)?),
        Command::Map(MapCommand::Dump { layers, json }) => {
            let l = MapLayers::from_json(&read(&layers)?)?;
            ok(if json { l.to_json() } else { layers_text(&l) })
        }
        Command::NavGoal { map, layers, furniture, robot } => ok(nav_goal(&map, &layers, &furniture, robot)?),
        Command::Place { cloud, radius, seed } => ok(place(&cloud, radius, seed)?),
        Command::Run { scenario, mode, seed, log, metrics, registry } => {
            let r = RunArgs { scenario: &scenario, registry: registry.as_deref(), mode, seed };
            ok(run_cmd(&cli.backend, r, log.as_deref(), metrics.as_deref())?)
        }
        Command::Repl { scenario, table, mode, seed, registry } => {
            let r = RunArgs { scenario: &scenario, registry: registry.as_deref(), mode, seed };
            repl(&cli.backend, r, table)?;
            ok(String::new())
        }
        Command::Metrics(MetricsCommand::Diff { a, b }) => metrics_diff(&a, &b),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("error")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match dispatch(cli) {
        Ok((text, same)) => {
            print!("{text}");
            if same {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(Failure::Domain(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
