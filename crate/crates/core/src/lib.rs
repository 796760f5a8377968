//! Layered restaurant map, navigation goals, placement, task execution and
//! a scenario simulator for a waiter robot.

pub mod error;
pub mod furniture;
pub mod geometry;
pub mod grid;
pub mod layers;
pub mod llm;
pub mod nav_goal;
pub mod placement;
pub mod semantic;
pub mod sim;
pub mod task;

pub use error::{Error, Result};
