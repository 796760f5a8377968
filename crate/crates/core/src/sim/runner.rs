use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::grid::GridMap;
use crate::layers::MapLayers;
use crate::task::{default_registry, Backend, Pipeline};

use super::scenario::{Event, Scenario};
use super::world::{Score, SimConfig, TaskReport, World};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Metrics {
    pub orders_total: usize,
    pub served_correct: usize,
    pub served_incorrect: usize,
    pub assisted: usize,
    pub collisions: usize,
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

impl Metrics {
    /// served_correct / orders_total, zero when there were no orders.
    pub fn accuracy(&self) -> f64 {
        if self.orders_total == 0 {
            0.0
        } else {
            self.served_correct as f64 / self.orders_total as f64
        }
    }

    /// Accuracy as a reduced fraction.
    pub fn accuracy_ratio(&self) -> (usize, usize) {
        match gcd(self.served_correct, self.orders_total) {
            0 => (0, 0),
            g => (self.served_correct / g, self.orders_total / g),
        }
    }

    pub fn to_json(&self) -> String {
        let (n, d) = self.accuracy_ratio();
        let v = json!({
            "orders_total": self.orders_total,
            "served_correct": self.served_correct,
            "served_incorrect": self.served_incorrect,
            "assisted": self.assisted,
            "collisions": self.collisions,
            "accuracy": self.accuracy(),
            "accuracy_exact": format!("{n}/{d}"),
        });
        let mut s = serde_json::to_string_pretty(&v).expect("metrics serialize");
        s.push('\n');
        s
    }

    /// Reads the counts back; derived accuracy fields are ignored.
    pub fn from_json(text: &str) -> Result<Self> {
        let m: Metrics = serde_json::from_str(text)?;
        if m.served_correct + m.served_incorrect > m.orders_total {
            return Err(Error::Document("served counts exceed orders_total".into()));
        }
        Ok(m)
    }

    /// Field-by-field differences as `(name, left, right)`.
    pub fn diff(&self, other: &Metrics) -> Vec<(&'static str, usize, usize)> {
        [
            ("orders_total", self.orders_total, other.orders_total),
            ("served_correct", self.served_correct, other.served_correct),
            ("served_incorrect", self.served_incorrect, other.served_incorrect),
            ("assisted", self.assisted, other.assisted),
            ("collisions", self.collisions, other.collisions),
        ]
        .into_iter()
        .filter(|(_, a, b)| a != b)
        .collect()
    }
}

impl fmt::Display for Metrics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (n, d) = self.accuracy_ratio();
        writeln!(f, "orders_total: {}", self.orders_total)?;
        writeln!(f, "served_correct: {}", self.served_correct)?;
        writeln!(f, "served_incorrect: {}", self.served_incorrect)?;
        writeln!(f, "assisted: {}", self.assisted)?;
        writeln!(f, "collisions: {}", self.collisions)?;
        writeln!(f, "accuracy: {n}/{d} ({:.4})", self.accuracy())
    }
}

/// Everything a run produces.
#[derive(Debug, Clone)]
pub struct SimReport {
    pub metrics: Metrics,
    /// One JSON record per line.
    pub log: Vec<String>,
    pub reports: Vec<TaskReport>,
    pub world: World,
}

impl SimReport {
    pub fn log_text(&self) -> String {
        let mut s = self.log.join("\n");
        if !s.is_empty() {
            s.push('\n');
        }
        s
    }

    pub fn layers(&self) -> &MapLayers {
        &self.world.layers
    }
}

struct Recorder {
    lines: Vec<String>,
}

impl Recorder {
    fn push(&mut self, t: f64, mut v: Value) {
        if let Value::Object(m) = &mut v {
            m.insert("t".into(), json!(t));
        }
        self.lines.push(v.to_string());
    }
}

fn task_record(r: &TaskReport) -> Value {
    json!({
        "event": "task",
        "table": r.table,
        "utterance": r.utterance,
        "task": r.handled.task.name,
        "slots": r.handled.task.slots,
        "response": r.handled.response,
        "understand_fallback": r.handled.understand_fallback,
        "respond_fallback": r.handled.respond_fallback,
        "trace": r.outcome.trace.iter().map(|e| e.to_string()).collect::<Vec<_>>(),
        "help": r.outcome.help_messages,
        "state": r.outcome.state,
        "delivered": r.delivered,
        "score": r.score,
    })
}

/// Replays a scenario through perception layers, the task pipeline and the
/// simulated robot. Calls are served first come, first served, as soon as
/// the calling table's utterance is available.
pub fn run(scenario: &Scenario, grid: GridMap, config: &SimConfig, backend: &dyn Backend) -> Result<SimReport> {
    scenario.validate()?;
    let w = &scenario.world;
    let registry = w.registry.clone().unwrap_or_else(default_registry);
    let pipeline = Pipeline::new(&w.environment, registry, w.menu.clone())?;
    let mut world = World::new(w, grid, *config)?;
    let mut rec = Recorder { lines: Vec::new() };
    let mut metrics = Metrics::default();
    let mut reports = Vec::new();
    let mut queue: VecDeque<String> = VecDeque::new();
    let mut said: BTreeMap<String, VecDeque<String>> = BTreeMap::new();

    for (index, ev) in scenario.events.iter().enumerate() {
        let t = ev.t;
        let bad = |msg: String| Error::Scenario { index, msg };
        match &ev.event {
            Event::Detections { frame_id, detections } => {
                let tracks = world.apply_detections(*frame_id, detections).map_err(|e| bad(e.to_string()))?;
                rec.push(t, json!({"event": "detections", "frame": frame_id, "tracks": tracks}));
            }
            Event::HumanObs { observation } => {
                let (id, sentence) = world.observe_human(observation).map_err(|e| bad(e.to_string()))?;
                rec.push(t, json!({"event": "human", "id": id, "description": sentence}));
            }
            Event::Call { table } => {
                if world.layers.furniture.get(table).is_err() {
                    return Err(bad(format!("call from unknown table {table:?}")));
                }
                queue.push_back(table.clone());
                rec.push(t, json!({"event": "call", "table": table}));
            }
            Event::Utterance { table, text } => {
                if world.layers.furniture.get(table).is_err() {
                    return Err(bad(format!("utterance from unknown table {table:?}")));
                }
                said.entry(table.clone()).or_default().push_back(text.clone());
                rec.push(t, json!({"event": "utterance", "table": table, "text": text}));
            }
            Event::Fault { skill, trigger } => {
                world.add_fault(*skill, *trigger);
                rec.push(t, json!({"event": "fault", "skill": skill, "trigger": trigger}));
            }
        }

        while let Some(table) = queue.front().cloned() {
            let Some(text) = said.get_mut(&table).and_then(|q| q.pop_front()) else {
                break;
            };
            queue.pop_front();
            if world.layers.furniture.get(&world.kitchen).is_err() {
                return Err(bad(format!("kitchen table {:?} has not been detected", world.kitchen)));
            }
            let approach = world.navigate_to(&table);
            for v in world.take_log() {
                rec.push(t, v);
            }
            if let Err(reason) = approach {
                rec.push(t, json!({"event": "approach_failed", "table": table, "reason": reason}));
                continue;
            }
            let report = world.serve(&table, &text, &pipeline, backend, config.mode)?;
            for v in world.take_log() {
                rec.push(t, v);
            }
            match report.score {
                Some(Score::Correct) => metrics.served_correct += 1,
                Some(Score::Incorrect) => metrics.served_incorrect += 1,
                _ => {}
            }
            if report.score.is_some() {
                metrics.orders_total += 1;
            }
            if report.outcome.state == crate::task::OutcomeState::CompletedWithAssist {
                metrics.assisted += 1;
            }
            rec.push(t, task_record(&report));
            reports.push(report);
        }
    }
    let t_end = scenario.events.last().map_or(0.0, |e| e.t);
    for table in &queue {
        rec.push(t_end, json!({"event": "unanswered", "table": table}));
    }
    metrics.collisions = world.collisions;
    rec.push(t_end, json!({"event": "end", "metrics": metrics}));
    Ok(SimReport {
        metrics,
        log: rec.lines,
        reports,
        world,
    })
}

/// A world with the scenario's perception applied, answering one typed
/// utterance at a time. Faults are armed up front and count from the first
/// request; call and utterance events are ignored.
pub struct Session {
    pub world: World,
    pub pipeline: Pipeline,
    pub mode: crate::task::PipelineMode,
}

impl Session {
    pub fn new(scenario: &Scenario, grid: GridMap, config: &SimConfig) -> Result<Self> {
        scenario.validate()?;
        let w = &scenario.world;
        let registry = w.registry.clone().unwrap_or_else(default_registry);
        let pipeline = Pipeline::new(&w.environment, registry, w.menu.clone())?;
        let mut world = World::new(w, grid, *config)?;
        for (index, ev) in scenario.events.iter().enumerate() {
            let bad = |e: Error| Error::Scenario { index, msg: e.to_string() };
            match &ev.event {
                Event::Detections { frame_id, detections } => {
                    world.apply_detections(*frame_id, detections).map_err(bad)?;
                }
                Event::HumanObs { observation } => {
                    world.observe_human(observation).map_err(bad)?;
                }
                Event::Fault { skill, trigger } => world.add_fault(*skill, *trigger),
                _ => {}
            }
        }
        world.take_log();
        Ok(Self {
            world,
            pipeline,
            mode: config.mode,
        })
    }

    /// Moves to the table, then handles and executes the utterance.
    pub fn ask(&mut self, table: &str, utterance: &str, backend: &dyn Backend) -> Result<TaskReport> {
        self.world.layers.furniture.get(table)?;
        self.world.layers.furniture.get(&self.world.kitchen)?;
        let approach = self.world.navigate_to(table);
        self.world.take_log();
        approach.map_err(Error::Unreachable)?;
        let report = self.world.serve(table, utterance, &self.pipeline, backend, self.mode);
        self.world.take_log();
        report
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accuracy_is_exact() {
        let m = Metrics {
            orders_total: 41,
            served_correct: 37,
            served_incorrect: 4,
            assisted: 7,
            collisions: 0,
        };
        assert_eq!(m.accuracy_ratio(), (37, 41));
        assert!((m.accuracy() - 0.9024).abs() < 1e-4);
        assert!(m.to_string().contains("accuracy: 37/41 (0.9024)"));
        assert_eq!(Metrics::from_json(&m.to_json()).unwrap(), m);
        assert_eq!(Metrics::default().accuracy(), 0.0);
    }

    #[test]
    fn diff_lists_changed_fields() {
        let a = Metrics::default();
        let b = Metrics {
            collisions: 2,
            ..a
        };
        assert_eq!(a.diff(&b), [("collisions", 0, 2)]);
        assert!(a.diff(&a).is_empty());
    }
}
