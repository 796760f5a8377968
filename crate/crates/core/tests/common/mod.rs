//! Reference implementations shared by the integration tests. Each one is
//! written from the operation's definition, independently of the library.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::sync::{Condvar, Mutex};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use waiter_core::furniture::{Dims, FurnitureInstance, FurnitureTemplate, OrientedBox};
use waiter_core::geometry::{Point2, Point3};
use waiter_core::grid::{Cell, CellIndex, GridGeometry, GridMap, Pose2D, RiskField};
use waiter_core::nav_goal::NavGoalParams;
use waiter_core::task::{Backend, ParsedTask, RespondRequest, UnderstandRequest};
use waiter_core::Result;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------- polygons

pub fn rect_corners(cx: f64, cy: f64, w: f64, d: f64, yaw: f64) -> Vec<(f64, f64)> {
    let (s, c) = yaw.sin_cos();
    [(1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0), (1.0, -1.0)]
        .iter()
        .map(|(sx, sy)| {
            let (lx, ly) = (sx * w / 2.0, sy * d / 2.0);
            (cx + c * lx - s * ly, cy + s * lx + c * ly)
        })
        .collect()
}

pub fn shoelace(poly: &[(f64, f64)]) -> f64 {
    let n = poly.len();
    if n < 3 {
        return 0.0;
    }
    let mut a = 0.0;
    for i in 0..n {
        let (x0, y0) = poly[i];
        let (x1, y1) = poly[(i + 1) % n];
        a += x0 * y1 - x1 * y0;
    }
    a.abs() / 2.0
}

/// Sutherland–Hodgman clipping of `subject` by the convex CCW `clip`.
pub fn clip_polygon(subject: &[(f64, f64)], clip: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut out = subject.to_vec();
    let n = clip.len();
    for i in 0..n {
        if out.is_empty() {
            break;
        }
        let a = clip[i];
        let b = clip[(i + 1) % n];
        let side = |p: (f64, f64)| (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
        let input = std::mem::take(&mut out);
        for j in 0..input.len() {
            let cur = input[j];
            let prev = input[(j + input.len() - 1) % input.len()];
            let (sc, sp) = (side(cur), side(prev));
            let cross = |p: (f64, f64), q: (f64, f64)| {
                let t = side(p) / (side(p) - side(q));
                (p.0 + t * (q.0 - p.0), p.1 + t * (q.1 - p.1))
            };
            if sc >= 0.0 {
                if sp < 0.0 {
                    out.push(cross(prev, cur));
                }
                out.push(cur);
            } else if sp >= 0.0 {
                out.push(cross(prev, cur));
            }
        }
    }
    out
}

pub fn iou_oracle(a: &OrientedBox, b: &OrientedBox) -> f64 {
    let pa = rect_corners(a.center.x, a.center.y, a.dims.w, a.dims.d, a.yaw);
    let pb = rect_corners(b.center.x, b.center.y, b.dims.w, b.dims.d, b.yaw);
    let area = shoelace(&clip_polygon(&pa, &pb));
    let lo = (a.center.z - a.dims.h / 2.0).max(b.center.z - b.dims.h / 2.0);
    let hi = (a.center.z + a.dims.h / 2.0).min(b.center.z + b.dims.h / 2.0);
    let inter = area * (hi - lo).max(0.0);
    let va = a.dims.w * a.dims.d * a.dims.h;
    let vb = b.dims.w * b.dims.d * b.dims.h;
    inter / (va + vb - inter)
}

pub fn random_box(r: &mut ChaCha8Rng) -> OrientedBox {
    OrientedBox {
        center: Point3::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0), r.random_range(0.0..1.0)),
        dims: Dims::new(r.random_range(0.1..1.5), r.random_range(0.1..1.5), r.random_range(0.1..1.5)),
        yaw: r.random_range(-std::f64::consts::PI..std::f64::consts::PI),
    }
}

// ------------------------------------------------------------------- grids

pub fn random_map(r: &mut ChaCha8Rng, w: usize, h: usize, res: f64, p_obstacle: f64) -> GridMap {
    let geo = GridGeometry::new(res, Point2::new(0.0, 0.0), w, h).unwrap();
    let cells = (0..w * h)
        .map(|_| {
            let x: f64 = r.random();
            if x < p_obstacle * 0.8 {
                Cell::Occupied
            } else if x < p_obstacle {
                Cell::Unknown
            } else {
                Cell::Free
            }
        })
        .collect();
    GridMap::new(geo, cells).unwrap()
}

/// All-pairs inflation in cell units.
pub fn inflate_oracle(map: &GridMap, radius_cells: f64) -> Vec<u32> {
    let (w, h) = (map.width(), map.height());
    let seeds: Vec<(usize, usize)> = (0..w * h)
        .filter(|&i| map.cells()[i] != Cell::Free)
        .map(|i| (i % w, i / w))
        .collect();
    (0..w * h)
        .map(|i| {
            let (c, r) = (i % w, i / w);
            let hit = seeds.iter().any(|&(sc, sr)| {
                let dx = sc as f64 - c as f64;
                let dy = sr as f64 - r as f64;
                (dx * dx + dy * dy).sqrt() <= radius_cells + 1e-9
            });
            if hit {
                100
            } else {
                0
            }
        })
        .collect()
}

pub fn window_sum_naive(values: &[u32], w: usize, h: usize, c: usize, r: usize, k: usize) -> i64 {
    let mut s = 0i64;
    for rr in r.saturating_sub(k)..=(r + k).min(h - 1) {
        for cc in c.saturating_sub(k)..=(c + k).min(w - 1) {
            s += i64::from(values[rr * w + cc]);
        }
    }
    s
}

// ------------------------------------------------------------ path costs

/// Shortest 8-connected cost by repeated relaxation (no heap), with the
/// same no-corner-cutting rule.
pub fn bellman_ford_cost(risk: &RiskField, start: CellIndex, goal: CellIndex) -> Option<f64> {
    let g = risk.geometry();
    let (w, h) = (g.width, g.height);
    let lethal = |c: isize, r: isize| {
        c < 0 || r < 0 || c >= w as isize || r >= h as isize || risk.values()[r as usize * w + c as usize] >= 100
    };
    let mut dist = vec![f64::INFINITY; w * h];
    dist[start.row * w + start.col] = 0.0;
    loop {
        let mut changed = false;
        for i in 0..w * h {
            if dist[i].is_infinite() {
                continue;
            }
            let (c, r) = ((i % w) as isize, (i / w) as isize);
            for dc in -1..=1isize {
                for dr in -1..=1isize {
                    if (dc, dr) == (0, 0) || lethal(c + dc, r + dr) {
                        continue;
                    }
                    let diag = dc != 0 && dr != 0;
                    if diag && (lethal(c + dc, r) || lethal(c, r + dr)) {
                        continue;
                    }
                    let j = (r + dr) as usize * w + (c + dc) as usize;
                    let alt = dist[i] + if diag { std::f64::consts::SQRT_2 } else { 1.0 };
                    if alt < dist[j] - 1e-12 {
                        dist[j] = alt;
                        changed = true;
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }
    let d = dist[goal.row * w + goal.col];
    d.is_finite().then_some(d)
}

// --------------------------------------------------------------- nav goal

pub fn table(id: &str, x: f64, y: f64, w: f64, d: f64, yaw: f64) -> FurnitureInstance {
    FurnitureInstance::from_parts(
        id.into(),
        &FurnitureTemplate::table(),
        Pose2D::new(x, y, yaw),
        0.0,
        Dims::new(w, d, 0.7),
        0,
    )
    .unwrap()
}

/// Goal search written directly from the definition: candidate point,
/// window, admissibility, distance-weighted neighborhood sums, tie-breaks.
pub fn nav_goal_oracle(
    risk: &RiskField,
    furniture: &[FurnitureInstance],
    target: &FurnitureInstance,
    robot: (f64, f64),
    p: &NavGoalParams,
) -> Option<(CellIndex, i64)> {
    let g = risk.geometry();
    let (w, h, res) = (g.width, g.height, g.resolution);
    let center = |c: usize, r: usize| (g.origin.x + (c as f64 + 0.5) * res, g.origin.y + (r as f64 + 0.5) * res);
    let off = p.robot_radius + p.clearance;
    let (s, co) = target.pose.theta.sin_cos();
    let (hw, hd) = (target.dims.w / 2.0 + off, target.dims.d / 2.0 + off);
    let cands = [(hw, 0.0), (-hw, 0.0), (0.0, hd), (0.0, -hd)]
        .map(|(lx, ly)| (target.pose.x + co * lx - s * ly, target.pose.y + s * lx + co * ly));
    let mut cand = cands[0];
    let dist_robot = |q: (f64, f64)| ((q.0 - robot.0).powi(2) + (q.1 - robot.1).powi(2)).sqrt();
    for q in &cands[1..] {
        if dist_robot(*q) < dist_robot(cand) {
            cand = *q;
        }
    }
    let dcand = |c: usize, r: usize| {
        let (x, y) = center(c, r);
        ((x - cand.0).powi(2) + (y - cand.1).powi(2)).sqrt()
    };
    let inside = |f: &FurnitureInstance, (x, y): (f64, f64)| {
        let (s, c) = f.pose.theta.sin_cos();
        let (dx, dy) = (x - f.pose.x, y - f.pose.y);
        let (lx, ly) = (c * dx + s * dy, -s * dx + c * dy);
        lx.abs() <= f.dims.w / 2.0 + 1e-9 && ly.abs() <= f.dims.d / 2.0 + 1e-9
    };
    let total = |c: usize, r: usize| i64::from(risk.values()[r * w + c]) + (p.alpha * dcand(c, r)).round() as i64;
    let k = p.neighborhood_radius as isize;
    let mut best: Option<(i64, f64, usize, usize)> = None;
    for r in 0..h {
        for c in 0..w {
            let (x, y) = center(c, r);
            if (x - cand.0).abs() > p.window_half_width || (y - cand.1).abs() > p.window_half_width {
                continue;
            }
            if risk.values()[r * w + c] >= 100 || furniture.iter().any(|f| inside(f, (x, y))) {
                continue;
            }
            let mut cost = 0;
            for dr in -k..=k {
                for dc in -k..=k {
                    let (cc, rr) = (c as isize + dc, r as isize + dr);
                    if cc >= 0 && rr >= 0 && (cc as usize) < w && (rr as usize) < h {
                        cost += total(cc as usize, rr as usize);
                    }
                }
            }
            let key = (cost, dcand(c, r), r, c);
            let better = match best {
                None => true,
                Some(b) => key.0 < b.0 || (key.0 == b.0 && (key.1 < b.1 || (key.1 == b.1 && (r, c) < (b.2, b.3)))),
            };
            if better {
                best = Some(key);
            }
        }
    }
    best.map(|(cost, _, r, c)| (CellIndex::new(c, r), cost))
}

/// A random restaurant-like instance: grid with clutter, 1-3 tables, robot.
pub struct NavInstance {
    pub risk: RiskField,
    pub furniture: Vec<FurnitureInstance>,
    pub robot: Pose2D,
    pub params: NavGoalParams,
}

pub fn random_nav_instance(r: &mut ChaCha8Rng, max_side: usize) -> NavInstance {
    let w = r.random_range(8..=max_side);
    let h = r.random_range(8..=max_side);
    let res = [0.05, 0.1, 0.2][r.random_range(0..3)];
    let clutter = r.random_range(0.0..0.12);
    let map = random_map(r, w, h, res, clutter);
    let (mw, mh) = (w as f64 * res, h as f64 * res);
    let n = r.random_range(1..=3);
    let furniture: Vec<FurnitureInstance> = (0..n)
        .map(|i| {
            let (x, y) = (r.random_range(0.0..mw), r.random_range(0.0..mh));
            let (fw, fd) = (r.random_range(0.2..(mw / 3.0).max(0.3)), r.random_range(0.2..(mh / 3.0).max(0.3)));
            table(&format!("table_{i}"), x, y, fw, fd, r.random_range(-std::f64::consts::PI..std::f64::consts::PI))
        })
        .collect();
    let mut layer = waiter_core::furniture::FurnitureLayer::new();
    for f in &furniture {
        let det = waiter_core::furniture::Detection3D {
            class_name: "table".into(),
            center: Point3::new(f.pose.x, f.pose.y, 0.35),
            dims: f.dims,
            yaw: f.pose.theta,
            frame_id: 0,
        };
        layer.register(&f.id, &det).unwrap();
    }
    let params = NavGoalParams {
        robot_radius: r.random_range(0.0..0.4),
        clearance: r.random_range(0.0..0.3),
        alpha: [0.0, 1.0, 10.0, 55.5][r.random_range(0..4)],
        window_half_width: r.random_range(0.4..1.6),
        neighborhood_radius: r.random_range(0..4),
    };
    let with_furniture = layer.virtual_obstacles(&map);
    let risk = with_furniture.inflate(params.robot_radius.min(res * 2.0)).unwrap();
    let robot = Pose2D::new(r.random_range(0.0..mw), r.random_range(0.0..mh), 0.0);
    let furniture = layer.list().into_iter().cloned().collect();
    NavInstance {
        risk,
        furniture,
        robot,
        params,
    }
}

// ------------------------------------------------------------------ RANSAC

/// 70% points on z = 0.74 with sigma 2 mm, 30% uniform in a box above it.
/// Returns the cloud and the indices of the true plane points.
pub fn table_cloud(seed: u64, n: usize) -> (Vec<Point3>, Vec<usize>) {
    let mut r = rng(seed);
    let mut pts = Vec::with_capacity(n);
    let mut truth = Vec::new();
    for i in 0..n {
        if r.random::<f64>() < 0.7 {
            pts.push(Point3::new(
                r.random_range(-0.5..0.5),
                r.random_range(-0.4..0.4),
                0.74 + gaussian(&mut r) * 0.002,
            ));
            truth.push(i);
        } else {
            pts.push(Point3::new(
                r.random_range(-0.5..0.5),
                r.random_range(-0.4..0.4),
                r.random_range(0.0..1.5),
            ));
        }
    }
    (pts, truth)
}

/// Box–Muller standard normal.
pub fn gaussian(r: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = r.random_range(f64::EPSILON..1.0);
    let u2: f64 = r.random();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

// ---------------------------------------------------------------- pipeline

/// Gate that blocks until opened.
#[derive(Default)]
pub struct Latch {
    open: Mutex<bool>,
    cv: Condvar,
}

impl Latch {
    /// False if the gate stayed shut for `limit` (a broken pipeline would
    /// otherwise hang the test instead of failing it).
    pub fn wait(&self, limit: std::time::Duration) -> bool {
        let g = self.open.lock().unwrap();
        let (g, _) = self.cv.wait_timeout_while(g, limit, |open| !*open).unwrap();
        *g
    }

    pub fn release(&self) {
        *self.open.lock().unwrap() = true;
        self.cv.notify_all();
    }

    pub fn is_open(&self) -> bool {
        *self.open.lock().unwrap()
    }
}

/// Backend whose understand step waits on a latch that only the respond
/// step may release. Events are recorded in order.
#[derive(Default)]
pub struct LatchedBackend {
    pub latch: Latch,
    pub events: Mutex<Vec<String>>,
}

impl LatchedBackend {
    fn note(&self, e: String) {
        self.events.lock().unwrap().push(e);
    }

    pub fn events(&self) -> Vec<String> {
        self.events.lock().unwrap().clone()
    }
}

impl Backend for LatchedBackend {
    fn understand(&self, req: &UnderstandRequest<'_>) -> Result<ParsedTask> {
        self.note("understand:start".into());
        if !self.latch.wait(std::time::Duration::from_secs(5)) {
            self.note("understand:timeout".into());
        }
        self.note("understand:done".into());
        Ok(waiter_core::llm::rule_parse(req.utterance, req.menu, req.registry))
    }

    fn respond(&self, req: &RespondRequest<'_>) -> Result<String> {
        let held = !self.latch.is_open();
        let seen = req.understood.map(|t| t.name.clone()).unwrap_or_else(|| "-".into());
        self.note(format!("respond:latch_held={held}:understood={seen}"));
        // the respond branch opens the gate; in sequential mode it is
        // already open because understand had to finish first
        self.latch.release();
        Ok(format!("reply ({seen})"))
    }
}

/// Sequential mode has to open the latch from outside before handle runs.
pub fn released() -> LatchedBackend {
    let b = LatchedBackend::default();
    b.latch.release();
    b
}

pub fn ctx(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
    pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
}
