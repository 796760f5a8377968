//! Discrete-event restaurant simulation.

mod planner;
mod runner;
mod scenario;
mod world;

pub use planner::{neighbors, path_cost, plan_path};
pub use runner::{run, Metrics, Session, SimReport};
pub use scenario::{load_scenario, Event, FaultKind, Scenario, TimedEvent, WorldConfig};
pub use world::{Location, Score, SimConfig, TaskReport, World};
