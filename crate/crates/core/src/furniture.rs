//! Semi-dynamic layer: furniture registered from 3D detections, scaled from
//! unit templates and tracked across frames by box overlap.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{convex_intersection_area, normalize_angle, OrientedRect, Point2, Point3};
use crate::grid::{Cell, GridMap, Pose2D};

/// Minimum 3D IoU for a detection to continue an existing instance.
pub const MATCH_IOU: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dims {
    pub w: f64,
    pub d: f64,
    pub h: f64,
}

impl Dims {
    pub const fn new(w: f64, d: f64, h: f64) -> Self {
        Self { w, d, h }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = [self.w, self.d, self.h].iter().all(|v| v.is_finite() && *v > 0.0);
        if ok {
            Ok(())
        } else {
            Err(Error::Parameter(format!(
                "dimensions must be positive, got ({}, {}, {})",
                self.w, self.d, self.h
            )))
        }
    }

    pub fn volume(&self) -> f64 {
        self.w * self.d * self.h
    }
}

/// Axis-aligned box in a template's unit cube.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitBox {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl UnitBox {
    pub const fn new(min: [f64; 3], max: [f64; 3]) -> Self {
        Self { min, max }
    }

    fn in_unit_cube(&self) -> bool {
        (0..3).all(|k| 0.0 <= self.min[k] && self.min[k] < self.max[k] && self.max[k] <= 1.0)
    }

    pub fn extent(&self) -> [f64; 3] {
        [self.max[0] - self.min[0], self.max[1] - self.min[1], self.max[2] - self.min[2]]
    }
}

/// Box in world coordinates, rotated by `yaw` about the vertical axis
/// through its center.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrientedBox {
    pub center: Point3,
    pub dims: Dims,
    pub yaw: f64,
}

impl OrientedBox {
    pub fn footprint(&self) -> OrientedRect {
        OrientedRect::new(self.center.xy(), self.dims.w, self.dims.d, self.yaw)
    }

    pub fn z_range(&self) -> (f64, f64) {
        (self.center.z - self.dims.h / 2.0, self.center.z + self.dims.h / 2.0)
    }
}

/// Intersection over union of two yaw-rotated boxes: plan-view overlap
/// area times vertical overlap, over the union volume.
pub fn iou_3d(a: &OrientedBox, b: &OrientedBox) -> f64 {
    let (a0, a1) = a.z_range();
    let (b0, b1) = b.z_range();
    let dz = (a1.min(b1) - a0.max(b0)).max(0.0);
    if dz == 0.0 {
        return 0.0;
    }
    let area = convex_intersection_area(&a.footprint().corners(), &b.footprint().corners());
    let inter = area * dz;
    let union = a.dims.volume() + b.dims.volume() - inter;
    if union <= 0.0 {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FurnitureTemplate {
    pub class_name: String,
    pub primitives: Vec<UnitBox>,
}

impl FurnitureTemplate {
    pub fn new(class_name: impl Into<String>, primitives: Vec<UnitBox>) -> Result<Self> {
        if primitives.is_empty() {
            return Err(Error::Parameter("template needs at least one primitive".into()));
        }
        if let Some(bad) = primitives.iter().find(|p| !p.in_unit_cube()) {
            return Err(Error::Parameter(format!("primitive {bad:?} leaves the unit cube")));
        }
        Ok(Self {
            class_name: class_name.into(),
            primitives,
        })
    }

    /// Slab over the top 10% of the height plus four 10% x 10% corner legs.
    pub fn table() -> Self {
        let mut prims = vec![UnitBox::new([0.0, 0.0, 0.9], [1.0, 1.0, 1.0])];
        prims.extend(corner_legs(0.9));
        Self {
            class_name: "table".into(),
            primitives: prims,
        }
    }

    /// Seat slab, four legs and a backrest along the rear edge.
    pub fn chair() -> Self {
        let mut prims = vec![UnitBox::new([0.0, 0.0, 0.45], [1.0, 1.0, 0.55])];
        prims.extend(corner_legs(0.45));
        prims.push(UnitBox::new([0.0, 0.9, 0.55], [1.0, 1.0, 1.0]));
        Self {
            class_name: "chair".into(),
            primitives: prims,
        }
    }

    /// Solid unit cube, used for classes without a dedicated template.
    pub fn solid(class_name: impl Into<String>) -> Self {
        Self {
            class_name: class_name.into(),
            primitives: vec![UnitBox::new([0.0; 3], [1.0; 3])],
        }
    }

    pub fn for_class(class_name: &str) -> Self {
        match class_name {
            "table" => Self::table(),
            "chair" => Self::chair(),
            other => Self::solid(other),
        }
    }
}

fn corner_legs(top: f64) -> [UnitBox; 4] {
    [
        UnitBox::new([0.0, 0.0, 0.0], [0.1, 0.1, top]),
        UnitBox::new([0.9, 0.0, 0.0], [1.0, 0.1, top]),
        UnitBox::new([0.0, 0.9, 0.0], [0.1, 1.0, top]),
        UnitBox::new([0.9, 0.9, 0.0], [1.0, 1.0, top]),
    ]
}

/// Scales each unit-space primitive componentwise by `dims`; the result
/// stays in the template frame (corner at the origin).
pub fn scale_template(template: &FurnitureTemplate, dims: Dims) -> Result<Vec<UnitBox>> {
    dims.validate()?;
    let s = [dims.w, dims.d, dims.h];
    Ok(template
        .primitives
        .iter()
        .map(|p| UnitBox::new(
            [p.min[0] * s[0], p.min[1] * s[1], p.min[2] * s[2]],
            [p.max[0] * s[0], p.max[1] * s[1], p.max[2] * s[2]],
        ))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection3D {
    pub class_name: String,
    /// Box center, meters.
    pub center: Point3,
    pub dims: Dims,
    pub yaw: f64,
    pub frame_id: u64,
}

impl Detection3D {
    pub fn bounding_box(&self) -> OrientedBox {
        OrientedBox {
            center: self.center,
            dims: self.dims,
            yaw: normalize_angle(self.yaw),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FurnitureInstance {
    pub id: String,
    pub class_name: String,
    /// Plan-view center and heading of the footprint.
    pub pose: Pose2D,
    /// Height of the footprint plane (bottom of the box).
    pub base_z: f64,
    pub dims: Dims,
    /// Template primitives scaled by `dims` and placed at `pose`.
    pub primitives: Vec<OrientedBox>,
    pub last_seen: u64,
}

impl FurnitureInstance {
    pub fn from_parts(
        id: String,
        template: &FurnitureTemplate,
        pose: Pose2D,
        base_z: f64,
        dims: Dims,
        last_seen: u64,
    ) -> Result<Self> {
        let scaled = scale_template(template, dims)?;
        let frame = OrientedRect::new(pose.position(), dims.w, dims.d, pose.theta);
        let primitives = scaled
            .iter()
            .map(|b| {
                let e = b.extent();
                let local = Point2::new(
                    (b.min[0] + b.max[0]) / 2.0 - dims.w / 2.0,
                    (b.min[1] + b.max[1]) / 2.0 - dims.d / 2.0,
                );
                let c = frame.to_world(local);
                OrientedBox {
                    center: Point3::new(c.x, c.y, base_z + (b.min[2] + b.max[2]) / 2.0),
                    dims: Dims::new(e[0], e[1], e[2]),
                    yaw: pose.theta,
                }
            })
            .collect();
        Ok(Self {
            id,
            class_name: template.class_name.clone(),
            pose,
            base_z,
            dims,
            primitives,
            last_seen,
        })
    }

    pub fn bounding_box(&self) -> OrientedBox {
        OrientedBox {
            center: Point3::new(self.pose.x, self.pose.y, self.base_z + self.dims.h / 2.0),
            dims: self.dims,
            yaw: self.pose.theta,
        }
    }

    /// Full plan-view rectangle (an over-approximation of the primitives).
    pub fn footprint(&self) -> OrientedRect {
        OrientedRect::new(self.pose.position(), self.dims.w, self.dims.d, self.pose.theta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TrackStatus {
    Matched,
    New,
}

/// Box handed to an arm planner, tagged with its owning instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollisionBox {
    pub owner: String,
    #[serde(flatten)]
    pub shape: OrientedBox,
}

/// Serialized form of one instance in a layer dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FurnitureRecord {
    pub id: String,
    pub class: String,
    pub pose: Pose2D,
    pub base_z: f64,
    pub dims: Dims,
    pub last_seen: u64,
}

/// Serialized form of the whole layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct FurnitureDump {
    pub last_frame: Option<u64>,
    pub kitchen: Option<String>,
    pub instances: Vec<FurnitureRecord>,
    /// Ids issued earlier and since deleted; never handed out again.
    pub retired: Vec<String>,
}

/// Registry of tracked furniture. Frames must arrive in increasing order.
#[derive(Debug, Clone, Default)]
pub struct FurnitureLayer {
    instances: BTreeMap<String, FurnitureInstance>,
    templates: BTreeMap<String, FurnitureTemplate>,
    issued: BTreeSet<String>,
    class_counts: BTreeMap<String, usize>,
    last_frame: Option<u64>,
    kitchen: Option<String>,
}

impl FurnitureLayer {
    pub fn new() -> Self {
        Self::default()
    }

    /// Overrides the template used for a class.
    pub fn set_template(&mut self, template: FurnitureTemplate) {
        self.templates.insert(template.class_name.clone(), template);
    }

    pub fn template(&self, class_name: &str) -> FurnitureTemplate {
        self.templates
            .get(class_name)
            .cloned()
            .unwrap_or_else(|| FurnitureTemplate::for_class(class_name))
    }

    pub fn last_frame(&self) -> Option<u64> {
        self.last_frame
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn get(&self, id: &str) -> Result<&FurnitureInstance> {
        self.instances
            .get(id)
            .ok_or_else(|| Error::NotFound(format!("furniture {id:?}")))
    }

    /// All instances ordered by id.
    pub fn list(&self) -> Vec<&FurnitureInstance> {
        self.instances.values().collect()
    }

    pub fn kitchen(&self) -> Option<&str> {
        self.kitchen.as_deref()
    }

    pub fn designate_kitchen(&mut self, id: &str) -> Result<()> {
        self.get(id)?;
        self.kitchen = Some(id.to_string());
        Ok(())
    }

    /// Removes an instance. Its id stays retired.
    pub fn remove(&mut self, id: &str) -> Result<FurnitureInstance> {
        if self.kitchen.as_deref() == Some(id) {
            self.kitchen = None;
        }
        self.instances
            .remove(id)
            .ok_or_else(|| Error::NotFound(format!("furniture {id:?}")))
    }

    fn next_auto_id(&mut self, class_name: &str) -> String {
        let count = self.class_counts.entry(class_name.to_string()).or_insert(0);
        loop {
            let id = format!("{class_name}_{count}");
            *count += 1;
            if !self.issued.contains(&id) {
                return id;
            }
        }
    }

    fn instance_from_detection(&self, id: String, det: &Detection3D) -> Result<FurnitureInstance> {
        det.dims.validate()?;
        let template = self.template(&det.class_name);
        let pose = Pose2D::new(det.center.x, det.center.y, det.yaw);
        FurnitureInstance::from_parts(id, &template, pose, det.center.z - det.dims.h / 2.0, det.dims, det.frame_id)
    }

    /// Registers a detection under a caller-chosen id.
    pub fn register(&mut self, id: &str, det: &Detection3D) -> Result<&FurnitureInstance> {
        if id.is_empty() {
            return Err(Error::Parameter("furniture id must not be empty".into()));
        }
        if self.issued.contains(id) {
            return Err(Error::Parameter(format!("furniture id {id:?} already issued")));
        }
        let inst = self.instance_from_detection(id.to_string(), det)?;
        self.issued.insert(id.to_string());
        Ok(self.instances.entry(id.to_string()).or_insert(inst))
    }

    /// Associates one frame of detections with tracked instances.
    ///
    /// Candidate pairs of the same class with IoU of at least [`MATCH_IOU`]
    /// are accepted greedily in descending IoU order; each instance and each
    /// detection is used at most once. Leftover detections become new
    /// instances with automatic ids.
    pub fn track_frame(&mut self, detections: &[Detection3D]) -> Result<Vec<(String, TrackStatus)>> {
        let Some(first) = detections.first() else {
            return Ok(Vec::new());
        };
        let frame = first.frame_id;
        if detections.iter().any(|d| d.frame_id != frame) {
            return Err(Error::Ordering("detections in one batch span several frames".into()));
        }
        if let Some(last) = self.last_frame {
            if frame <= last {
                return Err(Error::Ordering(format!("frame {frame} is not after frame {last}")));
            }
        }
        for d in detections {
            d.dims.validate()?;
        }

        let mut pairs: Vec<(f64, usize, &str)> = Vec::new();
        for (i, det) in detections.iter().enumerate() {
            let b = det.bounding_box();
            for inst in self.instances.values() {
                if inst.class_name != det.class_name {
                    continue;
                }
                let iou = iou_3d(&b, &inst.bounding_box());
                if iou >= MATCH_IOU {
                    pairs.push((iou, i, inst.id.as_str()));
                }
            }
        }
        pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(b.2)));

        let mut assigned: Vec<Option<String>> = vec![None; detections.len()];
        let mut taken: BTreeSet<&str> = BTreeSet::new();
        for (_, i, id) in pairs {
            if assigned[i].is_none() && !taken.contains(id) {
                taken.insert(id);
                assigned[i] = Some(id.to_string());
            }
        }

        let mut out = Vec::with_capacity(detections.len());
        for (det, slot) in detections.iter().zip(assigned) {
            match slot {
                Some(id) => {
                    let inst = self.instance_from_detection(id.clone(), det)?;
                    self.instances.insert(id.clone(), inst);
                    out.push((id, TrackStatus::Matched));
                }
                None => {
                    let id = self.next_auto_id(&det.class_name);
                    let inst = self.instance_from_detection(id.clone(), det)?;
                    self.issued.insert(id.clone());
                    self.instances.insert(id.clone(), inst);
                    out.push((id, TrackStatus::New));
                }
            }
        }
        self.last_frame = Some(frame);
        Ok(out)
    }

    /// Copy of `map` with every cell whose center lies inside a registered
    /// footprint marked occupied.
    pub fn virtual_obstacles(&self, map: &GridMap) -> GridMap {
        let mut out = map.clone();
        let g = *map.geometry();
        for inst in self.instances.values() {
            let rect = inst.footprint();
            let (lo, hi) = rect.bounds();
            let c0 = (((lo.x - g.origin.x) / g.resolution).floor() - 1.0).max(0.0) as usize;
            let r0 = (((lo.y - g.origin.y) / g.resolution).floor() - 1.0).max(0.0) as usize;
            let c1 = ((((hi.x - g.origin.x) / g.resolution).ceil() + 1.0).max(0.0) as usize).min(g.width);
            let r1 = ((((hi.y - g.origin.y) / g.resolution).ceil() + 1.0).max(0.0) as usize).min(g.height);
            let cells = out.cells_mut();
            for row in r0..r1 {
                for col in c0..c1 {
                    let c = crate::grid::CellIndex::new(col, row);
                    if rect.contains(g.center(c)) {
                        cells[g.index(c)] = Cell::Occupied;
                    }
                }
            }
        }
        out
    }

    /// One box per scaled primitive, instances in id order.
    pub fn export_collision_world(&self) -> Vec<CollisionBox> {
        self.instances
            .values()
            .flat_map(|inst| {
                inst.primitives.iter().map(move |p| CollisionBox {
                    owner: inst.id.clone(),
                    shape: *p,
                })
            })
            .collect()
    }

    pub fn dump(&self) -> FurnitureDump {
        FurnitureDump {
            last_frame: self.last_frame,
            kitchen: self.kitchen.clone(),
            instances: self
                .instances
                .values()
                .map(|i| FurnitureRecord {
                    id: i.id.clone(),
                    class: i.class_name.clone(),
                    pose: i.pose,
                    base_z: i.base_z,
                    dims: i.dims,
                    last_seen: i.last_seen,
                })
                .collect(),
            retired: self
                .issued
                .iter()
                .filter(|id| !self.instances.contains_key(*id))
                .cloned()
                .collect(),
        }
    }

    pub fn from_dump(dump: &FurnitureDump) -> Result<Self> {
        let mut layer = FurnitureLayer::new();
        for rec in &dump.instances {
            if layer.issued.contains(&rec.id) {
                return Err(Error::Document(format!("duplicate furniture id {:?}", rec.id)));
            }
            let template = layer.template(&rec.class);
            let inst = FurnitureInstance::from_parts(
                rec.id.clone(),
                &template,
                rec.pose,
                rec.base_z,
                rec.dims,
                rec.last_seen,
            )?;
            layer.issued.insert(rec.id.clone());
            layer.instances.insert(rec.id.clone(), inst);
        }
        layer.issued.extend(dump.retired.iter().cloned());
        for id in &layer.issued {
            if let Some((class, k)) = id.rsplit_once('_') {
                if let Ok(k) = k.parse::<usize>() {
                    let count = layer.class_counts.entry(class.to_string()).or_insert(0);
                    *count = (*count).max(k + 1);
                }
            }
        }
        layer.last_frame = dump.last_frame;
        if let Some(k) = &dump.kitchen {
            layer.designate_kitchen(k)?;
        }
        Ok(layer)
    }
}
