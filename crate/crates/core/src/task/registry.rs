use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Name every registry must define: the catch-all for unparsable input.
pub const FALLBACK_TASK: &str = "casual_chat";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkillKind {
    Navigate,
    Detect,
    Grasp,
    Place,
    FindPlacement,
    Speak,
    HandOver,
}

impl SkillKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SkillKind::Navigate => "navigate",
            SkillKind::Detect => "detect",
            SkillKind::Grasp => "grasp",
            SkillKind::Place => "place",
            SkillKind::FindPlacement => "find_placement",
            SkillKind::Speak => "speak",
            SkillKind::HandOver => "hand_over",
        }
    }

    pub fn parse(s: &str) -> Option<SkillKind> {
        Some(match s {
            "navigate" => SkillKind::Navigate,
            "detect" => SkillKind::Detect,
            "grasp" => SkillKind::Grasp,
            "place" => SkillKind::Place,
            "find_placement" => SkillKind::FindPlacement,
            "speak" => SkillKind::Speak,
            "hand_over" => SkillKind::HandOver,
            _ => return None,
        })
    }
}

impl fmt::Display for SkillKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A skill with an argument template. `{name}` placeholders are filled from
/// the parsed slots and the execution context.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkillSpec {
    pub kind: SkillKind,
    #[serde(default)]
    pub arg: String,
}

impl SkillSpec {
    pub fn new(kind: SkillKind, arg: &str) -> Self {
        Self {
            kind,
            arg: arg.to_string(),
        }
    }

    /// Placeholder names referenced by the template.
    pub fn placeholders(&self) -> Vec<&str> {
        let mut out = Vec::new();
        let mut rest = self.arg.as_str();
        while let Some(start) = rest.find('{') {
            let Some(len) = rest[start..].find('}') else { break };
            out.push(&rest[start + 1..start + len]);
            rest = &rest[start + len + 1..];
        }
        out
    }

    pub fn bind(&self, values: &BTreeMap<String, String>) -> Result<SkillInvocation> {
        let mut arg = String::with_capacity(self.arg.len());
        let mut rest = self.arg.as_str();
        while let Some(start) = rest.find('{') {
            let len = rest[start..]
                .find('}')
                .ok_or_else(|| Error::Parameter(format!("unterminated placeholder in {:?}", self.arg)))?;
            let key = &rest[start + 1..start + len];
            let value = values
                .get(key)
                .ok_or_else(|| Error::Parameter(format!("unbound placeholder {{{key}}} for {}", self.kind)))?;
            arg.push_str(&rest[..start]);
            arg.push_str(value);
            rest = &rest[start + len + 1..];
        }
        arg.push_str(rest);
        Ok(SkillInvocation { kind: self.kind, arg })
    }
}

/// A skill with its argument filled in.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkillInvocation {
    pub kind: SkillKind,
    pub arg: String,
}

impl fmt::Display for SkillInvocation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.kind, self.arg)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskRepresentation {
    pub name: String,
    #[serde(default)]
    pub slots: Vec<String>,
    pub skills: Vec<SkillSpec>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub recovery: BTreeMap<SkillKind, Vec<SkillSpec>>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
}

impl TaskRepresentation {
    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() {
            return Err(Error::Document("task representation without a name".into()));
        }
        if self.skills.is_empty() {
            return Err(Error::Document(format!("task {:?} has no skills", self.name)));
        }
        for key in self.recovery.keys() {
            if !self.skills.iter().any(|s| s.kind == *key) {
                return Err(Error::Document(format!(
                    "task {:?} defines recovery for {key}, which it never runs",
                    self.name
                )));
            }
        }
        Ok(())
    }

    /// One-line rendering used in prompts: `serve_order(item): navigate -> detect -> ...`.
    pub fn signature(&self) -> String {
        let steps: Vec<&str> = self.skills.iter().map(|s| s.kind.as_str()).collect();
        format!("{}({}): {}", self.name, self.slots.join(", "), steps.join(" -> "))
    }
}

/// Task predicted for an utterance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParsedTask {
    pub name: String,
    pub slots: BTreeMap<String, String>,
    pub confidence: f64,
}

impl ParsedTask {
    pub fn new(name: &str, confidence: f64) -> Self {
        Self {
            name: name.to_string(),
            slots: BTreeMap::new(),
            confidence,
        }
    }

    pub fn with_slot(mut self, key: &str, value: &str) -> Self {
        self.slots.insert(key.to_string(), value.to_string());
        self
    }

    pub fn fallback(confidence: f64) -> Self {
        Self::new(FALLBACK_TASK, confidence)
    }

    pub fn slot(&self, key: &str) -> Option<&str> {
        self.slots.get(key).map(String::as_str)
    }
}

/// Ordered set of task representations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Registry {
    pub representations: Vec<TaskRepresentation>,
}

impl Registry {
    pub fn new(representations: Vec<TaskRepresentation>) -> Result<Self> {
        let reg = Self { representations };
        reg.validate()?;
        Ok(reg)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for rep in &self.representations {
            rep.validate()?;
            if !seen.insert(rep.name.as_str()) {
                return Err(Error::Document(format!("duplicate task {:?}", rep.name)));
            }
        }
        if !seen.contains(FALLBACK_TASK) {
            return Err(Error::Document(format!("registry must define {FALLBACK_TASK:?}")));
        }
        Ok(())
    }

    /// Loads a JSON registry override (`{"representations": [...]}`).
    pub fn from_json(text: &str) -> Result<Self> {
        let reg: Registry = serde_json::from_str(text)?;
        reg.validate()?;
        Ok(reg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("registry serializes")
    }

    pub fn get(&self, name: &str) -> Option<&TaskRepresentation> {
        self.representations.iter().find(|r| r.name == name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.get(name).is_some()
    }

    pub fn len(&self) -> usize {
        self.representations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.representations.is_empty()
    }

    /// Checks a parsed task against its representation's slot schema.
    pub fn check(&self, task: &ParsedTask) -> Result<&TaskRepresentation> {
        let rep = self
            .get(&task.name)
            .ok_or_else(|| Error::NotFound(format!("task {:?}", task.name)))?;
        for slot in &rep.slots {
            if task.slot(slot).is_none_or(str::is_empty) {
                return Err(Error::Parameter(format!("task {:?} is missing slot {slot:?}", task.name)));
            }
        }
        Ok(rep)
    }
}

impl Default for Registry {
    fn default() -> Self {
        default_registry()
    }
}

/// The restaurant waiter task set.
pub fn default_registry() -> Registry {
    use SkillKind::*;
    let s = SkillSpec::new;
    let mut serve_recovery = BTreeMap::new();
    serve_recovery.insert(Detect, vec![s(Speak, "{help}"), s(HandOver, "{item}")]);
    Registry {
        representations: vec![
            TaskRepresentation {
                name: "serve_order".into(),
                slots: vec!["item".into()],
                skills: vec![
                    s(Navigate, "{kitchen_table}"),
                    s(Detect, "{item}"),
                    s(Grasp, "{item}"),
                    s(Navigate, "{caller_table}"),
                    s(FindPlacement, "{caller_table}"),
                    s(Place, "{item}"),
                    s(Speak, "{confirmation}"),
                ],
                recovery: serve_recovery,
                description: "bring an ordered menu item from the kitchen table to the customer".into(),
            },
            TaskRepresentation {
                name: "clean_table".into(),
                slots: vec![],
                skills: vec![
                    s(Navigate, "{caller_table}"),
                    s(Detect, "dish"),
                    s(Grasp, "dish"),
                    s(Navigate, "{kitchen_table}"),
                    s(Place, "dish"),
                ],
                recovery: BTreeMap::new(),
                description: "carry used dishes from the customer's table to the kitchen table".into(),
            },
            TaskRepresentation {
                name: "describe_menu".into(),
                slots: vec![],
                skills: vec![s(Speak, "{menu_description}")],
                recovery: BTreeMap::new(),
                description: "tell the customer which items are available".into(),
            },
            TaskRepresentation {
                name: FALLBACK_TASK.into(),
                slots: vec![],
                skills: vec![s(Speak, "{response}")],
                recovery: BTreeMap::new(),
                description: "reply to small talk".into(),
            },
        ],
    }
}
