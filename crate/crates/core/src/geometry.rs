//! Planar geometry shared by the map layers: points, oriented rectangles,
//! convex polygon overlap and hulls.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

const EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist(&self, other: &Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    fn sub(&self, o: &Point2) -> Point2 {
        Point2::new(self.x - o.x, self.y - o.y)
    }

    fn cross(&self, o: &Point2) -> f64 {
        self.x * o.y - self.y * o.x
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn xy(&self) -> Point2 {
        Point2::new(self.x, self.y)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

/// Wraps an angle into (−π, π].
pub fn normalize_angle(theta: f64) -> f64 {
    let mut a = theta % (2.0 * PI);
    if a <= -PI {
        a += 2.0 * PI;
    } else if a > PI {
        a -= 2.0 * PI;
    }
    a
}

/// A rectangle in the plane rotated by `yaw` about its center.
/// `half_w` runs along the local x axis, `half_d` along local y.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientedRect {
    pub center: Point2,
    pub half_w: f64,
    pub half_d: f64,
    pub yaw: f64,
}

impl OrientedRect {
    pub fn new(center: Point2, width: f64, depth: f64, yaw: f64) -> Self {
        Self {
            center,
            half_w: width / 2.0,
            half_d: depth / 2.0,
            yaw,
        }
    }

    pub fn area(&self) -> f64 {
        4.0 * self.half_w * self.half_d
    }

    /// Maps a point in the rectangle's local frame to world coordinates.
    pub fn to_world(&self, local: Point2) -> Point2 {
        let (s, c) = self.yaw.sin_cos();
        Point2::new(
            self.center.x + c * local.x - s * local.y,
            self.center.y + s * local.x + c * local.y,
        )
    }

    pub fn to_local(&self, p: Point2) -> Point2 {
        let (s, c) = self.yaw.sin_cos();
        let dx = p.x - self.center.x;
        let dy = p.y - self.center.y;
        Point2::new(c * dx + s * dy, -s * dx + c * dy)
    }

    /// Corners in counter-clockwise order starting at local (+w, +d).
    pub fn corners(&self) -> [Point2; 4] {
        let (w, d) = (self.half_w, self.half_d);
        [
            self.to_world(Point2::new(w, d)),
            self.to_world(Point2::new(-w, d)),
            self.to_world(Point2::new(-w, -d)),
            self.to_world(Point2::new(w, -d)),
        ]
    }

    /// Closed containment test.
    pub fn contains(&self, p: Point2) -> bool {
        let l = self.to_local(p);
        l.x.abs() <= self.half_w + EPS && l.y.abs() <= self.half_d + EPS
    }

    /// Axis-aligned bounds `(min, max)` of the rotated rectangle.
    pub fn bounds(&self) -> (Point2, Point2) {
        let c = self.corners();
        let mut lo = c[0];
        let mut hi = c[0];
        for p in &c[1..] {
            lo.x = lo.x.min(p.x);
            lo.y = lo.y.min(p.y);
            hi.x = hi.x.max(p.x);
            hi.y = hi.y.max(p.y);
        }
        (lo, hi)
    }
}

/// Shoelace area of a simple polygon (positive for counter-clockwise).
pub fn signed_area(poly: &[Point2]) -> f64 {
    if poly.len() < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..poly.len() {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        acc += a.x * b.y - b.x * a.y;
    }
    acc / 2.0
}

/// Closed point-in-convex-polygon test; `poly` must be counter-clockwise.
pub fn convex_contains(poly: &[Point2], p: Point2) -> bool {
    let n = poly.len();
    (0..n).all(|i| {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        b.sub(&a).cross(&p.sub(&a)) >= -EPS
    })
}

fn segment_intersection(p1: Point2, p2: Point2, q1: Point2, q2: Point2) -> Option<Point2> {
    let r = p2.sub(&p1);
    let s = q2.sub(&q1);
    let denom = r.cross(&s);
    if denom.abs() < EPS {
        return None;
    }
    let qp = q1.sub(&p1);
    let t = qp.cross(&s) / denom;
    let u = qp.cross(&r) / denom;
    if (-EPS..=1.0 + EPS).contains(&t) && (-EPS..=1.0 + EPS).contains(&u) {
        Some(Point2::new(p1.x + t * r.x, p1.y + t * r.y))
    } else {
        None
    }
}

/// Area of the intersection of two convex counter-clockwise polygons.
///
/// Collects every vertex of one polygon lying inside the other plus all
/// pairwise edge crossings, orders them by angle about their centroid and
/// integrates the resulting convex polygon.
pub fn convex_intersection_area(a: &[Point2], b: &[Point2]) -> f64 {
    let mut pts: Vec<Point2> = Vec::with_capacity(16);
    pts.extend(a.iter().copied().filter(|p| convex_contains(b, *p)));
    pts.extend(b.iter().copied().filter(|p| convex_contains(a, *p)));
    for i in 0..a.len() {
        let (a1, a2) = (a[i], a[(i + 1) % a.len()]);
        for j in 0..b.len() {
            let (b1, b2) = (b[j], b[(j + 1) % b.len()]);
            if let Some(p) = segment_intersection(a1, a2, b1, b2) {
                pts.push(p);
            }
        }
    }
    if pts.len() < 3 {
        return 0.0;
    }
    let n = pts.len() as f64;
    let cx = pts.iter().map(|p| p.x).sum::<f64>() / n;
    let cy = pts.iter().map(|p| p.y).sum::<f64>() / n;
    pts.sort_by(|p, q| {
        let ap = (p.y - cy).atan2(p.x - cx);
        let aq = (q.y - cy).atan2(q.x - cx);
        ap.total_cmp(&aq)
    });
    pts.dedup_by(|p, q| (p.x - q.x).abs() < 1e-10 && (p.y - q.y).abs() < 1e-10);
    signed_area(&pts).abs()
}

/// Andrew's monotone chain. Returns the hull counter-clockwise without the
/// closing point; collinear boundary points are dropped.
pub fn convex_hull(points: &[Point2]) -> Vec<Point2> {
    let mut pts: Vec<Point2> = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let turn = |o: &Point2, a: &Point2, b: &Point2| a.sub(o).cross(&b.sub(o));
    let mut lower: Vec<Point2> = Vec::new();
    for p in &pts {
        while lower.len() >= 2 && turn(&lower[lower.len() - 2], &lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(*p);
    }
    let mut upper: Vec<Point2> = Vec::new();
    for p in pts.iter().rev() {
        while upper.len() >= 2 && turn(&upper[upper.len() - 2], &upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(*p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// Euclidean distance from `p` to the segment `a`–`b`.
pub fn segment_distance(p: Point2, a: Point2, b: Point2) -> f64 {
    let ab = b.sub(&a);
    let len2 = ab.x * ab.x + ab.y * ab.y;
    if len2 == 0.0 {
        return p.dist(&a);
    }
    let t = (((p.x - a.x) * ab.x + (p.y - a.y) * ab.y) / len2).clamp(0.0, 1.0);
    p.dist(&Point2::new(a.x + t * ab.x, a.y + t * ab.y))
}

/// Distance from `p` to the nearest edge of a polygon boundary.
pub fn boundary_distance(poly: &[Point2], p: Point2) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|i| segment_distance(p, poly[i], poly[(i + 1) % n]))
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn angles_wrap_into_half_open_interval() {
        assert_eq!(normalize_angle(PI), PI);
        assert!((normalize_angle(-PI) - PI).abs() < 1e-12);
        assert!((normalize_angle(3.0 * PI) - PI).abs() < 1e-12);
        assert!((normalize_angle(0.5) - 0.5).abs() < 1e-15);
        assert!((normalize_angle(-0.5 - 2.0 * PI) + 0.5).abs() < 1e-12);
    }

    #[test]
    fn identical_squares_overlap_fully() {
        let r = OrientedRect::new(Point2::new(1.0, 2.0), 1.0, 1.0, 0.3);
        let a = convex_intersection_area(&r.corners(), &r.corners());
        assert!((a - 1.0).abs() < 1e-12);
    }

    #[test]
    fn shifted_squares_overlap_by_strip() {
        let a = OrientedRect::new(Point2::new(0.0, 0.0), 1.0, 1.0, 0.0);
        let b = OrientedRect::new(Point2::new(0.3, 0.0), 1.0, 1.0, 0.0);
        let area = convex_intersection_area(&a.corners(), &b.corners());
        assert!((area - 0.7).abs() < 1e-12);
    }

    #[test]
    fn disjoint_rects_have_no_overlap() {
        let a = OrientedRect::new(Point2::new(0.0, 0.0), 1.0, 1.0, 0.0);
        let b = OrientedRect::new(Point2::new(3.0, 0.0), 1.0, 1.0, 0.7);
        assert_eq!(convex_intersection_area(&a.corners(), &b.corners()), 0.0);
    }

    #[test]
    fn hull_of_square_with_interior_point() {
        let pts = [
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(0.0, 1.0),
            Point2::new(0.5, 0.5),
        ];
        let h = convex_hull(&pts);
        assert_eq!(h.len(), 4);
        assert!((signed_area(&h) - 1.0).abs() < 1e-12);
        assert!((boundary_distance(&h, Point2::new(0.5, 0.5)) - 0.5).abs() < 1e-12);
    }
}
