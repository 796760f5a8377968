use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::furniture::{Detection3D, TrackStatus};
use crate::geometry::{OrientedRect, Point2, Point3};
use crate::grid::{CellIndex, GridMap, Pose2D, RiskField};
use crate::layers::{MapLayers, ObservedBox};
use crate::nav_goal::{select_goal, NavGoalParams};
use crate::placement::{find_placement, ransac_plane, PlacementParams, PointCloud, RansacParams};
use crate::semantic::{describe, HumanObservation};
use crate::task::{
    execute, Backend, BackendHelp, Handled, OutcomeState, Pipeline, PipelineMode, SkillInvocation, SkillKind,
    SkillResult, SkillRunner, TaskOutcome,
};

use super::planner::{path_cost, plan_path};
use super::scenario::{FaultKind, WorldConfig};

/// Simulation settings that are not part of the scenario itself.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub mode: PipelineMode,
    pub seed: u64,
    /// Defaults to [`NavGoalParams::for_resolution`] of the scenario grid.
    pub nav: Option<NavGoalParams>,
    pub ransac: RansacParams,
    pub placement: PlacementParams,
    /// Footprint radius of a served item, meters.
    pub object_radius: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            mode: PipelineMode::Parallel,
            seed: 0,
            nav: None,
            ransac: RansacParams::default(),
            placement: PlacementParams::default(),
            object_radius: 0.04,
        }
    }
}

/// Where an item instance currently is.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Location {
    /// On the furniture with this id (the kitchen table included).
    Table(String),
    Gripper,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Item {
    name: String,
    /// Resting point on a table top, when known.
    at: Option<Point3>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Score {
    Correct,
    Incorrect,
    Failed,
}

/// One handled utterance.
#[derive(Debug, Clone)]
pub struct TaskReport {
    pub table: String,
    pub utterance: String,
    pub handled: Handled,
    pub outcome: TaskOutcome,
    /// Set for serve_order tasks only.
    pub score: Option<Score>,
    pub delivered: Option<String>,
}

#[derive(Debug, Clone, Copy)]
struct PendingFault {
    kind: FaultKind,
    skip: usize,
}

/// The simulated restaurant: map layers, robot, items and injected faults.
#[derive(Debug, Clone)]
pub struct World {
    config: SimConfig,
    nav: NavGoalParams,
    grid: GridMap,
    pub layers: MapLayers,
    risk: RiskField,
    footprints: Vec<OrientedRect>,
    pub robot: Pose2D,
    /// Furniture the robot last navigated to.
    pub at: Option<String>,
    pub kitchen: String,
    items: BTreeMap<String, Vec<Item>>,
    gripper: Option<Item>,
    detected: Option<String>,
    spot: Option<(String, Point3)>,
    delivered: Option<(String, String)>,
    faults: Vec<PendingFault>,
    placements: u64,
    pub transcript: Vec<String>,
    /// Every executed path, in order.
    pub trajectories: Vec<Vec<CellIndex>>,
    /// Path cells that were lethal when traversed.
    pub collisions: usize,
    pending_log: Vec<Value>,
}

impl World {
    pub fn new(world: &WorldConfig, grid: GridMap, config: SimConfig) -> Result<Self> {
        let nav = config.nav.unwrap_or_else(|| NavGoalParams::for_resolution(grid.resolution()));
        nav.validate()?;
        let mut items = BTreeMap::new();
        let stock: Vec<Item> = world
            .stock
            .iter()
            .flat_map(|(name, &n)| (0..n).map(move |_| Item { name: name.clone(), at: None }))
            .collect();
        items.insert(world.kitchen_table.clone(), stock);
        let risk = grid.inflate(nav.robot_radius)?;
        let mut layers = MapLayers::new();
        for z in &world.zones {
            layers.add_zone(z.clone())?;
        }
        Ok(Self {
            config,
            nav,
            grid,
            layers,
            risk,
            footprints: Vec::new(),
            robot: world.robot_start,
            at: None,
            kitchen: world.kitchen_table.clone(),
            items,
            gripper: None,
            detected: None,
            spot: None,
            delivered: None,
            faults: Vec::new(),
            placements: 0,
            transcript: Vec::new(),
            trajectories: Vec::new(),
            collisions: 0,
            pending_log: Vec::new(),
        })
    }

    pub fn risk(&self) -> &RiskField {
        &self.risk
    }

    pub fn nav_params(&self) -> &NavGoalParams {
        &self.nav
    }

    /// Tracks one detection frame and rebuilds the risk field.
    pub fn apply_detections(&mut self, frame_id: u64, detections: &[ObservedBox]) -> Result<Vec<(String, TrackStatus)>> {
        let dets: Vec<Detection3D> = detections.iter().map(|d| d.at_frame(frame_id)).collect();
        let tracks = self.layers.furniture.track_frame(&dets)?;
        if self.layers.furniture.get(&self.kitchen).is_ok() && self.layers.furniture.kitchen().is_none() {
            self.layers.furniture.designate_kitchen(&self.kitchen.clone())?;
        }
        let with_furniture = self.layers.furniture.virtual_obstacles(&self.grid);
        self.risk = with_furniture.inflate(self.nav.robot_radius)?;
        self.footprints = self.layers.furniture.list().iter().map(|f| f.footprint()).collect();
        Ok(tracks)
    }

    /// Returns the person id and a sentence about them.
    pub fn observe_human(&mut self, obs: &HumanObservation) -> Result<(String, String)> {
        let id = self.layers.humans.upsert(obs)?;
        let h = self.layers.humans.get(&id)?;
        Ok((id.clone(), describe(h, &self.layers.zones, &self.layers.furniture)))
    }

    pub fn add_fault(&mut self, kind: FaultKind, trigger: usize) {
        self.faults.push(PendingFault { kind, skip: trigger });
    }

    /// Item counts per name over every location, gripper included.
    pub fn inventory(&self) -> BTreeMap<String, usize> {
        let mut out = BTreeMap::new();
        for it in self.items.values().flatten().chain(self.gripper.iter()) {
            *out.entry(it.name.clone()).or_insert(0) += 1;
        }
        out
    }

    /// Item names at one location.
    pub fn items_at(&self, location: &Location) -> Vec<String> {
        match location {
            Location::Gripper => self.gripper.iter().map(|i| i.name.clone()).collect(),
            Location::Table(t) => self.items.get(t).map(|v| v.iter().map(|i| i.name.clone()).collect()).unwrap_or_default(),
        }
    }

    /// Records drained by the scenario runner.
    pub(crate) fn take_log(&mut self) -> Vec<Value> {
        std::mem::take(&mut self.pending_log)
    }

    fn fire_fault(&mut self, kind: SkillKind) -> Option<FaultKind> {
        let mut fired = None;
        let mut keep = Vec::with_capacity(self.faults.len());
        for f in self.faults.drain(..) {
            if f.kind.skill() != kind {
                keep.push(f);
            } else if fired.is_none() && f.skip == 0 {
                fired = Some(f.kind);
            } else {
                keep.push(PendingFault {
                    kind: f.kind,
                    skip: f.skip.saturating_sub(1),
                });
            }
        }
        self.faults = keep;
        fired
    }

    /// Moves the robot to the navigation goal of `target`.
    pub fn navigate_to(&mut self, target: &str) -> std::result::Result<(), String> {
        let inst = self
            .layers
            .furniture
            .get(target)
            .map_err(|_| format!("unknown destination {target}"))?
            .clone();
        let goal = select_goal(&self.risk, &self.footprints, &inst, &self.robot, &self.nav)
            .map_err(|e| e.to_string())?;
        let start = self
            .risk
            .geometry()
            .world_to_cell(self.robot.position())
            .map_err(|e| e.to_string())?;
        let path = plan_path(&self.risk, start, goal.cell).map_err(|e| e.to_string())?;
        let lethal = path.iter().filter(|c| self.risk.is_lethal(**c)).count();
        self.collisions += lethal;
        self.pending_log.push(json!({
            "event": "move",
            "target": target,
            "from": [start.col, start.row],
            "to": [goal.cell.col, goal.cell.row],
            "cells": path.len(),
            "length_m": path_cost(&path) * self.risk.geometry().resolution,
            "goal_cost": goal.cost,
            "lethal_cells": lethal,
        }));
        self.trajectories.push(path);
        self.robot = goal.pose;
        self.at = Some(target.to_string());
        Ok(())
    }

    fn here(&self) -> std::result::Result<String, String> {
        self.at.clone().ok_or_else(|| "robot is not at any table".to_string())
    }

    fn detect(&mut self, arg: &str, fault: Option<FaultKind>) -> SkillResult {
        let here = match self.here() {
            Ok(h) => h,
            Err(e) => return SkillResult::Failed(e),
        };
        if fault == Some(FaultKind::Fail(SkillKind::Detect)) {
            return SkillResult::Failed("not found".into());
        }
        let stock = self.items.get(&here).cloned().unwrap_or_default();
        let wanted = crate::llm::normalize(arg);
        if fault == Some(FaultKind::DetectWrongItem) {
            if let Some(other) = stock.iter().find(|i| crate::llm::normalize(&i.name) != wanted) {
                self.detected = Some(other.name.clone());
                return SkillResult::Ok;
            }
        }
        let found = if wanted == "dish" {
            stock.first()
        } else {
            stock.iter().find(|i| crate::llm::normalize(&i.name) == wanted)
        };
        match found {
            Some(i) => {
                self.detected = Some(i.name.clone());
                SkillResult::Ok
            }
            None => SkillResult::Failed("not found".into()),
        }
    }

    fn grasp(&mut self, arg: &str) -> SkillResult {
        if let Some(held) = &self.gripper {
            let wanted = crate::llm::normalize(arg);
            return if wanted == "dish" || crate::llm::normalize(&held.name) == wanted {
                SkillResult::Ok
            } else {
                SkillResult::Failed("gripper busy".into())
            };
        }
        let here = match self.here() {
            Ok(h) => h,
            Err(e) => return SkillResult::Failed(e),
        };
        let Some(name) = self.detected.take() else {
            return SkillResult::Failed("nothing detected".into());
        };
        let shelf = self.items.entry(here).or_default();
        match shelf.iter().position(|i| i.name == name) {
            Some(k) => {
                self.gripper = Some(shelf.remove(k));
                SkillResult::Ok
            }
            None => SkillResult::Failed("not found".into()),
        }
    }

    fn place(&mut self) -> SkillResult {
        let here = match self.here() {
            Ok(h) => h,
            Err(e) => return SkillResult::Failed(e),
        };
        let Some(mut item) = self.gripper.take() else {
            return SkillResult::Failed("empty gripper".into());
        };
        item.at = match self.spot.take() {
            Some((table, p)) if table == here => Some(p),
            _ => None,
        };
        if here != self.kitchen {
            self.delivered = Some((here.clone(), item.name.clone()));
        }
        self.items.entry(here).or_default().push(item);
        SkillResult::Ok
    }

    fn hand_over(&mut self, arg: &str) -> SkillResult {
        if self.gripper.is_some() {
            return SkillResult::Failed("gripper busy".into());
        }
        let wanted = crate::llm::normalize(arg);
        let shelf = self.items.entry(self.kitchen.clone()).or_default();
        match shelf.iter().position(|i| crate::llm::normalize(&i.name) == wanted) {
            Some(k) => {
                self.gripper = Some(shelf.remove(k));
                self.detected = None;
                SkillResult::Ok
            }
            None => SkillResult::Failed("out of stock".into()),
        }
    }

    /// Synthetic table-top cloud with one small cluster per resting item.
    fn tabletop_cloud(&mut self, table: &str) -> std::result::Result<PointCloud, String> {
        let inst = self.layers.furniture.get(table).map_err(|e| e.to_string())?.clone();
        let rect = inst.footprint();
        let top = inst.base_z + inst.dims.h;
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed.wrapping_add(self.placements.wrapping_mul(0x9e37_79b9)));
        self.placements += 1;
        let mut pts = Vec::new();
        for _ in 0..1200 {
            let u = rng.random_range(-rect.half_w..=rect.half_w);
            let v = rng.random_range(-rect.half_d..=rect.half_d);
            let p = rect.to_world(Point2::new(u, v));
            pts.push(Point3::new(p.x, p.y, top + rng.random_range(-0.002..=0.002)));
        }
        for it in self.items.get(table).into_iter().flatten() {
            let c = it.at.map(|p| p.xy()).unwrap_or(rect.center);
            for _ in 0..40 {
                let a = rng.random_range(0.0..std::f64::consts::TAU);
                let r = 0.03 * rng.random::<f64>().sqrt();
                pts.push(Point3::new(
                    c.x + r * a.cos(),
                    c.y + r * a.sin(),
                    top + rng.random_range(0.02..=0.12),
                ));
            }
        }
        PointCloud::new(pts).map_err(|e| e.to_string())
    }

    fn find_spot(&mut self, table: &str) -> SkillResult {
        let cloud = match self.tabletop_cloud(table) {
            Ok(c) => c,
            Err(e) => return SkillResult::Failed(e),
        };
        let params = RansacParams {
            seed: self.config.seed,
            ..self.config.ransac
        };
        let result = ransac_plane(&cloud, &params).and_then(|fit| {
            find_placement(&cloud, &fit.plane, &fit.inliers, self.config.object_radius, &self.config.placement)
        });
        match result {
            Ok(p) => {
                self.spot = Some((table.to_string(), p));
                SkillResult::Ok
            }
            Err(Error::NoSpace(_)) => SkillResult::Failed("no space".into()),
            Err(e) => SkillResult::Failed(e.to_string()),
        }
    }

    /// Runs one bound skill against the world.
    pub fn simulate_skill(&mut self, inv: &SkillInvocation) -> SkillResult {
        let fault = self.fire_fault(inv.kind);
        if let Some(FaultKind::Fail(kind)) = fault {
            if kind != SkillKind::Detect {
                return SkillResult::Failed(format!("{kind} fault"));
            }
        }
        match inv.kind {
            SkillKind::Navigate => match self.navigate_to(&inv.arg) {
                Ok(()) => SkillResult::Ok,
                Err(e) => SkillResult::Failed(e),
            },
            SkillKind::Detect => self.detect(&inv.arg, fault),
            SkillKind::Grasp => self.grasp(&inv.arg),
            SkillKind::Place => self.place(),
            SkillKind::FindPlacement => self.find_spot(&inv.arg),
            SkillKind::HandOver => self.hand_over(&inv.arg),
            SkillKind::Speak => {
                self.transcript.push(format!("robot: {}", inv.arg));
                SkillResult::Ok
            }
        }
    }

    /// Understands an utterance from `table`, replies and executes the task.
    /// The robot is expected to be at the table already.
    pub fn serve(
        &mut self,
        table: &str,
        utterance: &str,
        pipeline: &Pipeline,
        backend: &dyn Backend,
        mode: PipelineMode,
    ) -> Result<TaskReport> {
        self.transcript.push(format!("{table}: {utterance}"));
        let handled = pipeline.handle(utterance, backend, mode);
        self.transcript.push(format!("robot: {}", handled.response));
        let item = handled.task.slot("item").map(str::to_string);
        let mut ctx = BTreeMap::new();
        ctx.insert("kitchen_table".to_string(), self.kitchen.clone());
        ctx.insert("caller_table".to_string(), table.to_string());
        ctx.insert(
            "confirmation".to_string(),
            match &item {
                Some(i) if i.ends_with('s') => format!("Here are your {i}. Enjoy!"),
                Some(i) => format!("Here is your {i}. Enjoy!"),
                None => "Here you are. Enjoy!".to_string(),
            },
        );
        ctx.insert("menu_description".to_string(), pipeline.menu.description());
        ctx.insert("response".to_string(), handled.response.clone());
        self.delivered = None;
        let help = BackendHelp(backend);
        let outcome = execute(&handled.task, &pipeline.registry, &ctx, self, &help)?;
        let delivered = self.delivered.take().filter(|(t, _)| t == table).map(|(_, name)| name);
        let score = (handled.task.name == "serve_order").then(|| {
            if outcome.state == OutcomeState::Failed {
                Score::Failed
            } else if delivered.as_deref().map(crate::llm::normalize) == item.as_deref().map(crate::llm::normalize) {
                Score::Correct
            } else {
                Score::Incorrect
            }
        });
        Ok(TaskReport {
            table: table.to_string(),
            utterance: utterance.to_string(),
            handled,
            outcome,
            score,
            delivered,
        })
    }
}

impl SkillRunner for World {
    fn run(&mut self, invocation: &SkillInvocation) -> SkillResult {
        self.simulate_skill(invocation)
    }
}
