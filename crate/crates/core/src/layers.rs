//! The combined map-layer document (zones, furniture, humans) and the
//! recorded detection log it is built from.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::furniture::{Detection3D, Dims, FurnitureDump, FurnitureLayer, TrackStatus};
use crate::geometry::Point3;
use crate::semantic::{HumanLayer, Zone};

pub const LAYER_DUMP_VERSION: u32 = 1;

/// A detected box without its frame number (carried by the frame).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservedBox {
    pub class_name: String,
    pub center: Point3,
    pub dims: Dims,
    #[serde(default)]
    pub yaw: f64,
}

impl ObservedBox {
    pub fn at_frame(&self, frame_id: u64) -> Detection3D {
        Detection3D {
            class_name: self.class_name.clone(),
            center: self.center,
            dims: self.dims,
            yaw: self.yaw,
            frame_id,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionFrame {
    pub frame_id: u64,
    pub detections: Vec<ObservedBox>,
}

/// Recorded furniture detections plus optional designations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionLog {
    pub frames: Vec<DetectionFrame>,
    /// Id of the table used as the kitchen pick-up point.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kitchen: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub zones: Vec<Zone>,
}

impl DetectionLog {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// The semi-static, semi-dynamic and dynamic layers kept above the grid.
#[derive(Debug, Clone, Default)]
pub struct MapLayers {
    pub zones: Vec<Zone>,
    pub furniture: FurnitureLayer,
    pub humans: HumanLayer,
}

#[derive(Serialize, Deserialize)]
struct LayerDump {
    version: u32,
    zones: Vec<Zone>,
    furniture: FurnitureDump,
    humans: HumanLayer,
}

impl MapLayers {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_zone(&mut self, zone: Zone) -> Result<()> {
        zone.validate()?;
        self.zones.push(zone);
        Ok(())
    }

    /// Replays a detection log into fresh layers.
    pub fn from_detection_log(log: &DetectionLog) -> Result<(Self, Vec<Vec<(String, TrackStatus)>>)> {
        let mut layers = MapLayers::new();
        for z in &log.zones {
            layers.add_zone(z.clone())?;
        }
        let mut statuses = Vec::with_capacity(log.frames.len());
        for frame in &log.frames {
            let dets: Vec<Detection3D> = frame.detections.iter().map(|d| d.at_frame(frame.frame_id)).collect();
            statuses.push(layers.furniture.track_frame(&dets)?);
        }
        if let Some(k) = &log.kitchen {
            layers.furniture.designate_kitchen(k)?;
        }
        Ok((layers, statuses))
    }

    /// Pretty JSON with a fixed key order and a trailing newline.
    pub fn to_json(&self) -> String {
        let dump = LayerDump {
            version: LAYER_DUMP_VERSION,
            zones: self.zones.clone(),
            furniture: self.furniture.dump(),
            humans: self.humans.clone(),
        };
        let mut s = serde_json::to_string_pretty(&dump).expect("layer dump serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let dump: LayerDump = serde_json::from_str(text)?;
        if dump.version != LAYER_DUMP_VERSION {
            return Err(Error::Document(format!("unsupported layer dump version {}", dump.version)));
        }
        for z in &dump.zones {
            z.validate()?;
        }
        Ok(Self {
            zones: dump.zones,
            furniture: FurnitureLayer::from_dump(&dump.furniture)?,
            humans: dump.humans,
        })
    }
}
