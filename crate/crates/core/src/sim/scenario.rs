use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridMap, Pose2D};
use crate::layers::ObservedBox;
use crate::llm::Menu;
use crate::semantic::{HumanObservation, Zone};
use crate::task::{Registry, SkillKind};

const DEFAULT_ENVIRONMENT: &str = "a small restaurant with a kitchen counter and several customer tables";

/// Which skill a fault targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum FaultKind {
    /// The skill returns FAILED.
    Fail(SkillKind),
    /// Detect reports a different menu item than the one asked for.
    DetectWrongItem,
}

impl FaultKind {
    pub fn skill(self) -> SkillKind {
        match self {
            FaultKind::Fail(k) => k,
            FaultKind::DetectWrongItem => SkillKind::Detect,
        }
    }
}

impl fmt::Display for FaultKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FaultKind::Fail(k) => f.write_str(k.as_str()),
            FaultKind::DetectWrongItem => f.write_str("detect_wrong_item"),
        }
    }
}

impl TryFrom<String> for FaultKind {
    type Error = String;

    fn try_from(s: String) -> std::result::Result<Self, String> {
        if s == "detect_wrong_item" {
            return Ok(FaultKind::DetectWrongItem);
        }
        SkillKind::parse(&s)
            .map(FaultKind::Fail)
            .ok_or_else(|| format!("unknown fault skill {s:?}"))
    }
}

impl From<FaultKind> for String {
    fn from(k: FaultKind) -> String {
        k.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Event {
    /// A customer presses the call button at a table.
    Call { table: String },
    /// What the customer at `table` will say once the robot arrives.
    Utterance { table: String, text: String },
    Detections { frame_id: u64, detections: Vec<ObservedBox> },
    HumanObs { observation: HumanObservation },
    /// Forces a later invocation of `skill` to misbehave: `trigger` further
    /// matching invocations pass untouched before the fault fires once.
    Fault {
        skill: FaultKind,
        #[serde(default)]
        trigger: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimedEvent {
    pub t: f64,
    #[serde(flatten)]
    pub event: Event,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldConfig {
    /// Grid file, relative to the scenario file.
    pub grid: String,
    #[serde(default = "default_environment")]
    pub environment: String,
    #[serde(default)]
    pub zones: Vec<Zone>,
    #[serde(default)]
    pub menu: Menu,
    pub kitchen_table: String,
    /// Item counts initially on the kitchen table.
    #[serde(default)]
    pub stock: BTreeMap<String, usize>,
    pub robot_start: Pose2D,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub registry: Option<Registry>,
}

fn default_environment() -> String {
    DEFAULT_ENVIRONMENT.into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub world: WorldConfig,
    pub events: Vec<TimedEvent>,
}

#[derive(Deserialize)]
struct RawScenario {
    world: WorldConfig,
    #[serde(default)]
    events: Vec<serde_json::Value>,
}

impl Scenario {
    /// Parses and validates; event errors carry the event index.
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: RawScenario =
            serde_json::from_str(text).map_err(|e| Error::Document(format!("scenario: {e}")))?;
        let events = raw
            .events
            .into_iter()
            .enumerate()
            .map(|(index, v)| {
                serde_json::from_value(v).map_err(|e| Error::Scenario {
                    index,
                    msg: e.to_string(),
                })
            })
            .collect::<Result<Vec<TimedEvent>>>()?;
        let s = Scenario {
            world: raw.world,
            events,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("scenario serializes");
        s.push('\n');
        s
    }

    pub fn validate(&self) -> Result<()> {
        let w = &self.world;
        w.menu.validate()?;
        if let Some(r) = &w.registry {
            r.validate()?;
        }
        for z in &w.zones {
            z.validate()?;
        }
        if w.kitchen_table.trim().is_empty() {
            return Err(Error::Document("kitchen_table must not be empty".into()));
        }
        for item in w.stock.keys() {
            if !w.menu.contains(item) {
                return Err(Error::Document(format!("stock item {item:?} is not on the menu")));
            }
        }
        let mut last = 0.0;
        for (index, ev) in self.events.iter().enumerate() {
            let bad = |msg: String| Error::Scenario { index, msg };
            if !ev.t.is_finite() || ev.t < 0.0 {
                return Err(bad(format!("bad timestamp {}", ev.t)));
            }
            if ev.t < last {
                return Err(bad(format!("timestamp {} precedes {}", ev.t, last)));
            }
            last = ev.t;
            match &ev.event {
                Event::Call { table } if table.is_empty() => return Err(bad("empty table id".into())),
                Event::Utterance { table, text } if table.is_empty() || text.trim().is_empty() => {
                    return Err(bad("utterance needs a table and text".into()))
                }
                Event::Detections { detections, .. } => {
                    for d in detections {
                        d.dims.validate().map_err(|e| bad(e.to_string()))?;
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }
}

/// Reads a scenario file and the grid it names.
pub fn load_scenario(path: &Path) -> Result<(Scenario, GridMap)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let scenario = Scenario::from_json(&text)?;
    let grid_path: PathBuf = path.parent().unwrap_or(Path::new(".")).join(&scenario.world.grid);
    let grid_text = std::fs::read_to_string(&grid_path)
        .map_err(|e| Error::Io(format!("{}: {e}", grid_path.display())))?;
    let grid = GridMap::load(&grid_text)?;
    Ok((scenario, grid))
}
