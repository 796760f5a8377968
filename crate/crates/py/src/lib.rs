//! Python bindings: `import waiter`.

use std::path::PathBuf;

use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use waiter_core::grid::{GridMap, Pose2D};
use waiter_core::layers::{DetectionLog, MapLayers};
use waiter_core::llm::{BackendConfig, BackendMode, ChatClient, RemoteBackend, RuleBackend, StubBackend};
use waiter_core::nav_goal::{select_goal, NavGoalParams};
use waiter_core::placement::{find_placement, ransac_plane, PlacementParams, PointCloud, RansacParams};
use waiter_core::sim::{load_scenario, run, Location, Scenario, Session as CoreSession, SimConfig};
use waiter_core::task::{Backend, PipelineMode, Registry};
use waiter_core::Error;

create_exception!(waiter, WaiterError, PyException, "A request the world could not satisfy (no goal, no space, unreachable, ...).");

fn err(e: Error) -> PyErr {
    if e.is_domain() {
        WaiterError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

fn mode(name: &str) -> PyResult<PipelineMode> {
    name.parse().map_err(PyValueError::new_err)
}

fn backend(config: Option<&str>) -> PyResult<Box<dyn Backend + Send>> {
    let cfg: BackendConfig = match config {
        Some(text) => serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?,
        None => BackendConfig::default(),
    };
    cfg.validate().map_err(err)?;
    Ok(match cfg.mode {
        BackendMode::Rules => Box::new(RuleBackend),
        BackendMode::Stub => Box::new(StubBackend::new(Vec::new(), Vec::new())),
        BackendMode::Remote => Box::new(RemoteBackend::new(ChatClient::http(cfg).map_err(err)?)),
    })
}

fn scenario(path: PathBuf, registry: Option<&str>) -> PyResult<(Scenario, GridMap)> {
    let (mut sc, grid) = load_scenario(&path).map_err(err)?;
    if let Some(text) = registry {
        sc.world.registry = Some(Registry::from_json(text).map_err(err)?);
        sc.validate().map_err(err)?;
    }
    Ok((sc, grid))
}

/// Furniture, zone and human layers.
#[pyclass(module = "waiter")]
struct Layers {
    inner: MapLayers,
}

#[pymethods]
impl Layers {
    /// Tracks a detection log (JSON text) into layers.
    #[staticmethod]
    fn from_detections(log_json: &str) -> PyResult<Self> {
        let log = DetectionLog::from_json(log_json).map_err(err)?;
        let (inner, _) = MapLayers::from_detection_log(&log).map_err(err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: MapLayers::from_json(text).map_err(err)?,
        })
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[getter]
    fn kitchen(&self) -> Option<String> {
        self.inner.furniture.kitchen().map(str::to_string)
    }

    /// One dict per furniture instance, in id order.
    fn furniture<'py>(&self, py: Python<'py>) -> PyResult<Vec<Bound<'py, PyDict>>> {
        self.inner
            .furniture
            .list()
            .iter()
            .map(|f| {
                let d = PyDict::new(py);
                d.set_item("id", &f.id)?;
                d.set_item("class", &f.class_name)?;
                d.set_item("pose", (f.pose.x, f.pose.y, f.pose.theta))?;
                d.set_item("size", (f.dims.w, f.dims.d, f.dims.h))?;
                Ok(d)
            })
            .collect()
    }

    fn zones(&self) -> Vec<String> {
        self.inner.zones.iter().map(|z| z.name.clone()).collect()
    }

    fn __len__(&self) -> usize {
        self.inner.furniture.len()
    }
}

/// Navigation goal next to furniture `target`; `grid` is occupancy-grid text.
#[pyfunction]
fn nav_goal<'py>(
    py: Python<'py>,
    grid: &str,
    layers: &Layers,
    target: &str,
    robot: (f64, f64, f64),
) -> PyResult<Bound<'py, PyDict>> {
    let grid = GridMap::load(grid).map_err(err)?;
    let furniture = &layers.inner.furniture;
    let instance = furniture.get(target).map_err(err)?;
    let params = NavGoalParams::for_resolution(grid.resolution());
    let risk = furniture.virtual_obstacles(&grid).inflate(params.robot_radius).map_err(err)?;
    let footprints: Vec<_> = furniture.list().iter().map(|f| f.footprint()).collect();
    let g = select_goal(&risk, &footprints, instance, &Pose2D::new(robot.0, robot.1, robot.2), &params).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("pose", (g.pose.x, g.pose.y, g.pose.theta))?;
    d.set_item("cell", (g.cell.col, g.cell.row))?;
    d.set_item("cost", g.cost)?;
    Ok(d)
}

/// Fits the dominant plane of `cloud` ("x y z" lines) and picks a free spot for a disc of `radius`.
#[pyfunction]
#[pyo3(signature = (cloud, radius, seed = 0))]
fn place<'py>(py: Python<'py>, cloud: &str, radius: f64, seed: u64) -> PyResult<Bound<'py, PyDict>> {
    let cloud = PointCloud::parse(cloud).map_err(err)?;
    let fit = ransac_plane(&cloud, &RansacParams { seed, ..Default::default() }).map_err(err)?;
    let p = find_placement(&cloud, &fit.plane, &fit.inliers, radius, &PlacementParams::default()).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("normal", fit.plane.normal.to_vec())?;
    d.set_item("d", fit.plane.d)?;
    d.set_item("inliers", fit.inliers.len())?;
    d.set_item("points", cloud.len())?;
    d.set_item("point", (p.x, p.y, p.z))?;
    Ok(d)
}

/// Replays a scenario file. Returns metrics plus the JSONL event log.
#[pyfunction]
#[pyo3(signature = (path, mode = "parallel", seed = 0, registry = None, backend_config = None))]
fn run_scenario<'py>(
    py: Python<'py>,
    path: PathBuf,
    mode: &str,
    seed: u64,
    registry: Option<&str>,
    backend_config: Option<&str>,
) -> PyResult<Bound<'py, PyDict>> {
    let (sc, grid) = scenario(path, registry)?;
    let config = SimConfig {
        mode: self::mode(mode)?,
        seed,
        ..Default::default()
    };
    let b = backend(backend_config)?;
    let rep = py.detach(|| run(&sc, grid, &config, b.as_ref())).map_err(err)?;
    let m = &rep.metrics;
    let d = PyDict::new(py);
    d.set_item("orders_total", m.orders_total)?;
    d.set_item("served_correct", m.served_correct)?;
    d.set_item("served_incorrect", m.served_incorrect)?;
    d.set_item("assisted", m.assisted)?;
    d.set_item("collisions", m.collisions)?;
    d.set_item("accuracy", m.accuracy_ratio())?;
    d.set_item("metrics_json", m.to_json())?;
    d.set_item("log", rep.log.clone())?;
    Ok(d)
}

/// A scenario's world ready for typed customer requests.
#[pyclass(module = "waiter", unsendable)]
struct Session {
    inner: CoreSession,
    backend: Box<dyn Backend + Send>,
}

#[pymethods]
impl Session {
    #[new]
    #[pyo3(signature = (path, mode = "parallel", seed = 0, registry = None, backend_config = None))]
    fn new(path: PathBuf, mode: &str, seed: u64, registry: Option<&str>, backend_config: Option<&str>) -> PyResult<Self> {
        let (sc, grid) = scenario(path, registry)?;
        let config = SimConfig {
            mode: self::mode(mode)?,
            seed,
            ..Default::default()
        };
        Ok(Self {
            inner: CoreSession::new(&sc, grid, &config).map_err(err)?,
            backend: backend(backend_config)?,
        })
    }

    /// Furniture ids other than the kitchen table.
    fn tables(&self) -> Vec<String> {
        let w = &self.inner.world;
        w.layers
            .furniture
            .list()
            .iter()
            .map(|f| f.id.clone())
            .filter(|id| *id != w.kitchen)
            .collect()
    }

    #[getter]
    fn kitchen(&self) -> String {
        self.inner.world.kitchen.clone()
    }

    #[getter]
    fn robot(&self) -> (f64, f64, f64) {
        let p = self.inner.world.robot;
        (p.x, p.y, p.theta)
    }

    #[getter]
    fn transcript(&self) -> Vec<String> {
        self.inner.world.transcript.clone()
    }

    /// Item names resting on a table, or held when `table` is None.
    #[pyo3(signature = (table = None))]
    fn items(&self, table: Option<String>) -> Vec<String> {
        let loc = table.map_or(Location::Gripper, Location::Table);
        self.inner.world.items_at(&loc)
    }

    /// Handles one utterance from `table` and runs the resulting task.
    fn ask<'py>(&mut self, py: Python<'py>, table: &str, utterance: &str) -> PyResult<Bound<'py, PyDict>> {
        let r = self.inner.ask(table, utterance, self.backend.as_ref()).map_err(err)?;
        let d = PyDict::new(py);
        d.set_item("response", &r.handled.response)?;
        d.set_item("task", &r.handled.task.name)?;
        d.set_item("slots", r.handled.task.slots.clone())?;
        d.set_item("state", r.outcome.state.to_string())?;
        d.set_item("trace", r.outcome.trace.iter().map(|e| e.to_string()).collect::<Vec<_>>())?;
        d.set_item("help", r.outcome.help_messages.clone())?;
        d.set_item("delivered", r.delivered.clone())?;
        Ok(d)
    }
}

#[pymodule]
fn waiter(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("WaiterError", m.py().get_type::<WaiterError>())?;
    m.add_class::<Layers>()?;
    m.add_class::<Session>()?;
    m.add_function(wrap_pyfunction!(nav_goal, m)?)?;
    m.add_function(wrap_pyfunction!(place, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    Ok(())
}
