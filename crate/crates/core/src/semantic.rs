//! Semi-static zones and the dynamic human layer.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::furniture::FurnitureLayer;
use crate::geometry::{Point2, Point3};

/// Humans closer than this to a new observation are treated as the same person.
pub const ASSOCIATION_GATE: f64 = 0.5;
/// Furniture farther than this is not mentioned in a description.
pub const FURNITURE_MENTION_RANGE: f64 = 1.0;

/// Named rectangle given by any two diagonal corners.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Zone {
    pub name: String,
    pub p1: Point2,
    pub p2: Point2,
}

impl Zone {
    pub fn new(name: impl Into<String>, p1: Point2, p2: Point2) -> Result<Self> {
        let z = Self {
            name: name.into(),
            p1,
            p2,
        };
        z.validate()?;
        Ok(z)
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.extent();
        if hi.x - lo.x > 0.0 && hi.y - lo.y > 0.0 {
            Ok(())
        } else {
            Err(Error::Parameter(format!("zone {:?} has zero area", self.name)))
        }
    }

    /// Normalized `(min, max)` corners.
    pub fn extent(&self) -> (Point2, Point2) {
        (
            Point2::new(self.p1.x.min(self.p2.x), self.p1.y.min(self.p2.y)),
            Point2::new(self.p1.x.max(self.p2.x), self.p1.y.max(self.p2.y)),
        )
    }

    pub fn contains(&self, p: Point2) -> bool {
        let (lo, hi) = self.extent();
        lo.x <= p.x && p.x <= hi.x && lo.y <= p.y && p.y <= hi.y
    }
}

/// First zone in insertion order whose closed rectangle contains `p`.
pub fn zone_at(zones: &[Zone], p: Point2) -> Option<&str> {
    zones.iter().find(|z| z.contains(p)).map(|z| z.name.as_str())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Action {
    Sitting,
    Standing,
    Walking,
    Waving,
    #[default]
    Unknown,
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Action::Sitting => "sitting",
            Action::Standing => "standing",
            Action::Walking => "walking",
            Action::Waving => "waving",
            Action::Unknown => "unknown",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HumanEntity {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub position: Point3,
    pub action: Action,
    pub attributes: BTreeMap<String, String>,
    pub last_seen: u64,
}

/// A labeled person observation as delivered by the perception stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HumanObservation {
    pub position: Point3,
    #[serde(default)]
    pub action: Action,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default)]
    pub attributes: BTreeMap<String, String>,
    pub frame_id: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct HumanLayer {
    humans: Vec<HumanEntity>,
    next_index: usize,
    frame: u64,
}

impl HumanLayer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn humans(&self) -> &[HumanEntity] {
        &self.humans
    }

    pub fn get(&self, id: &str) -> Result<&HumanEntity> {
        self.humans
            .iter()
            .find(|h| h.id == id)
            .ok_or_else(|| Error::NotFound(format!("person {id:?}")))
    }

    /// Updates the nearest known person within [`ASSOCIATION_GATE`] or
    /// creates `person_<k>`.
    pub fn upsert(&mut self, obs: &HumanObservation) -> Result<String> {
        if obs.frame_id < self.frame {
            return Err(Error::Ordering(format!(
                "observation frame {} precedes layer frame {}",
                obs.frame_id, self.frame
            )));
        }
        self.frame = obs.frame_id;
        let here = obs.position.xy();
        let nearest = self
            .humans
            .iter_mut()
            .map(|h| (h.position.xy().dist(&here), h))
            .filter(|(d, _)| *d <= ASSOCIATION_GATE)
            .min_by(|a, b| a.0.total_cmp(&b.0));
        if let Some((_, h)) = nearest {
            h.position = obs.position;
            h.action = obs.action;
            h.last_seen = obs.frame_id;
            if obs.name.is_some() {
                h.name = obs.name.clone();
            }
            h.attributes.extend(obs.attributes.iter().map(|(k, v)| (k.clone(), v.clone())));
            return Ok(h.id.clone());
        }
        let id = format!("person_{}", self.next_index);
        self.next_index += 1;
        self.humans.push(HumanEntity {
            id: id.clone(),
            name: obs.name.clone(),
            position: obs.position,
            action: obs.action,
            attributes: obs.attributes.clone(),
            last_seen: obs.frame_id,
        });
        Ok(id)
    }
}

fn possessive(attrs: &BTreeMap<String, String>) -> &'static str {
    match attrs.get("gender").map(|g| g.to_ascii_lowercase()) {
        Some(g) if g == "male" || g == "man" => "his",
        Some(g) if g == "female" || g == "woman" => "her",
        _ => "their",
    }
}

fn gesture_phrase(gesture: &str, attrs: &BTreeMap<String, String>) -> String {
    match gesture {
        "waving" => format!("waving {} hand", possessive(attrs)),
        "pointing" => format!("pointing with {} hand", possessive(attrs)),
        other => other.to_string(),
    }
}

/// Composes one sentence about a person from the zone, furniture and human
/// layers. Clauses whose data is missing are left out.
pub fn describe(human: &HumanEntity, zones: &[Zone], furniture: &FurnitureLayer) -> String {
    let here = human.position.xy();
    let subject = human.name.as_deref().unwrap_or(&human.id);
    let nearby = furniture
        .list()
        .into_iter()
        .map(|f| (f.pose.position().dist(&here), f))
        .filter(|(d, _)| *d <= FURNITURE_MENTION_RANGE)
        .min_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.id.cmp(&b.1.id)))
        .map(|(_, f)| f.class_name.as_str());
    let zone = zone_at(zones, here);

    let mut s = format!("{subject} is");
    let mut placed = false;
    if human.action != Action::Unknown {
        s.push(' ');
        s.push_str(&human.action.to_string());
        placed = true;
    }
    if let Some(f) = nearby {
        let prep = match (human.action, f) {
            (Action::Sitting, "chair" | "sofa" | "bench" | "stool") => "on",
            (Action::Sitting, _) => "at",
            _ => "near",
        };
        s.push_str(&format!(" {prep} the {f}"));
        placed = true;
    }
    if let Some(z) = zone {
        s.push_str(&format!(" in the {z}"));
        placed = true;
    }
    if !placed {
        s.push_str(" here");
    }

    let clothing = human.attributes.get("clothing").filter(|c| !c.is_empty());
    let gesture = human
        .attributes
        .get("gesture")
        .filter(|g| !g.is_empty())
        .map(|g| gesture_phrase(g, &human.attributes));
    match (clothing, gesture) {
        (Some(c), Some(g)) => s.push_str(&format!(", wearing {c} and {g}")),
        (Some(c), None) => s.push_str(&format!(", wearing {c}")),
        (None, Some(g)) => s.push_str(&format!(", {g}")),
        (None, None) => {}
    }
    s.push('.');
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::furniture::{Detection3D, Dims};

    fn zones() -> Vec<Zone> {
        vec![
            Zone::new("living room", Point2::new(0.0, 0.0), Point2::new(4.0, 4.0)).unwrap(),
            Zone::new("kitchen", Point2::new(8.0, 4.0), Point2::new(4.0, 0.0)).unwrap(),
        ]
    }

    fn obs(x: f64, y: f64, frame: u64) -> HumanObservation {
        HumanObservation {
            position: Point3::new(x, y, 0.0),
            action: Action::Unknown,
            name: None,
            attributes: BTreeMap::new(),
            frame_id: frame,
        }
    }

    #[test]
    fn zone_lookup() {
        let z = zones();
        assert_eq!(zone_at(&z, Point2::new(1.0, 1.0)), Some("living room"));
        assert_eq!(zone_at(&z, Point2::new(9.0, 1.0)), None);
        // shared edge belongs to the first zone inserted
        assert_eq!(zone_at(&z, Point2::new(4.0, 2.0)), Some("living room"));
        assert_eq!(zone_at(&z, Point2::new(8.0, 2.0)), Some("kitchen"));
        assert!(Zone::new("flat", Point2::new(0.0, 0.0), Point2::new(3.0, 0.0)).is_err());
    }

    #[test]
    fn association_gate() {
        let mut layer = HumanLayer::new();
        assert_eq!(layer.upsert(&obs(1.0, 1.0, 0)).unwrap(), "person_0");
        assert_eq!(layer.upsert(&obs(1.1, 1.0, 1)).unwrap(), "person_0");
        assert_eq!(layer.upsert(&obs(4.1, 1.0, 2)).unwrap(), "person_1");
        assert_eq!(layer.humans().len(), 2);
        assert!(layer.upsert(&obs(4.1, 1.0, 1)).is_err());
    }

    #[test]
    fn full_record_sentence() {
        let mut furniture = FurnitureLayer::new();
        furniture
            .track_frame(&[Detection3D {
                class_name: "chair".into(),
                center: Point3::new(1.0, 1.3, 0.45),
                dims: Dims::new(0.5, 0.5, 0.9),
                yaw: 0.0,
                frame_id: 0,
            }])
            .unwrap();
        let mut attributes = BTreeMap::new();
        attributes.insert("clothing".into(), "a T-shirt".into());
        attributes.insert("gesture".into(), "waving".into());
        attributes.insert("gender".into(), "male".into());
        let h = HumanEntity {
            id: "person_0".into(),
            name: Some("Mr. Smith".into()),
            position: Point3::new(1.0, 1.0, 0.0),
            action: Action::Sitting,
            attributes,
            last_seen: 0,
        };
        assert_eq!(
            describe(&h, &zones(), &furniture),
            "Mr. Smith is sitting on the chair in the living room, wearing a T-shirt and waving his hand."
        );
    }

    #[test]
    fn clauses_drop_out() {
        let furniture = FurnitureLayer::new();
        let mut layer = HumanLayer::new();
        layer.upsert(&obs(5.0, 1.0, 0)).unwrap();
        let h = layer.get("person_0").unwrap();
        assert_eq!(describe(h, &zones(), &furniture), "person_0 is in the kitchen.");

        let mut o = obs(20.0, 20.0, 1);
        o.action = Action::Standing;
        o.attributes.insert("clothing".into(), "a coat".into());
        layer.upsert(&o).unwrap();
        let h = layer.get("person_1").unwrap();
        assert_eq!(describe(h, &zones(), &furniture), "person_1 is standing, wearing a coat.");

        let far = HumanEntity {
            id: "person_9".into(),
            name: None,
            position: Point3::new(-5.0, -5.0, 0.0),
            action: Action::Unknown,
            attributes: BTreeMap::new(),
            last_seen: 0,
        };
        let s = describe(&far, &zones(), &furniture);
        assert_eq!(s, "person_9 is here.");
        assert!(!s.contains('{'));
    }
}
