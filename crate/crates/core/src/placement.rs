//! Placement-area detection: RANSAC plane fit over a point cloud, then the
//! free spot on the fitted surface with the most clearance.

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{boundary_distance, convex_contains, convex_hull, Point2, Point3};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PointCloud {
    pub points: Vec<Point3>,
}

impl PointCloud {
    pub fn new(points: Vec<Point3>) -> Result<Self> {
        if let Some(i) = points.iter().position(|p| !p.is_finite()) {
            return Err(Error::Parameter(format!("point {i} is not finite")));
        }
        Ok(Self { points })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Parses one `x y z` triple per line. Blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut points = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let vals: Vec<f64> = line
                .split_whitespace()
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Parse { line: i + 1, msg: format!("{e}") })?;
            if vals.len() != 3 {
                return Err(Error::Parse {
                    line: i + 1,
                    msg: format!("expected 3 coordinates, got {}", vals.len()),
                });
            }
            let p = Point3::new(vals[0], vals[1], vals[2]);
            if !p.is_finite() {
                return Err(Error::Parse { line: i + 1, msg: "non-finite coordinate".into() });
            }
            points.push(p);
        }
        Ok(Self { points })
    }

    pub fn to_text(&self) -> String {
        self.points.iter().map(|p| format!("{} {} {}\n", p.x, p.y, p.z)).collect()
    }
}

/// Plane `n·p + d = 0` with a unit normal pointing up (`n_z >= 0`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Plane {
    pub normal: [f64; 3],
    pub d: f64,
}

impl Plane {
    /// Builds a plane through `point` with the given normal, normalizing
    /// and orienting it. Returns `None` for a zero normal.
    pub fn from_point_normal(point: Vector3<f64>, normal: Vector3<f64>) -> Option<Self> {
        let len = normal.norm();
        if !(len > 1e-12) || !len.is_finite() {
            return None;
        }
        let mut n = normal / len;
        let flip = n.z < 0.0 || (n.z == 0.0 && (n.y < 0.0 || (n.y == 0.0 && n.x < 0.0)));
        if flip {
            n = -n;
        }
        Some(Self {
            normal: [n.x, n.y, n.z],
            d: -n.dot(&point),
        })
    }

    pub fn normal(&self) -> Vector3<f64> {
        Vector3::new(self.normal[0], self.normal[1], self.normal[2])
    }

    pub fn signed_distance(&self, p: &Point3) -> f64 {
        self.normal[0] * p.x + self.normal[1] * p.y + self.normal[2] * p.z + self.d
    }

    /// Angle between normals in radians.
    pub fn angle_to(&self, n: Vector3<f64>) -> f64 {
        self.normal().dot(&n.normalize()).clamp(-1.0, 1.0).acos()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RansacParams {
    pub iterations: usize,
    pub inlier_eps: f64,
    pub min_inlier_fraction: f64,
    pub seed: u64,
}

impl Default for RansacParams {
    fn default() -> Self {
        Self {
            iterations: 200,
            inlier_eps: 0.01,
            min_inlier_fraction: 0.3,
            seed: 0,
        }
    }
}

impl RansacParams {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::Parameter("iterations must be >= 1".into()));
        }
        if !(self.inlier_eps > 0.0) {
            return Err(Error::Parameter("inlier_eps must be > 0".into()));
        }
        if !(0.0..=1.0).contains(&self.min_inlier_fraction) {
            return Err(Error::Parameter("min_inlier_fraction must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlaneFit {
    /// Least-squares refit over the inliers.
    pub plane: Plane,
    /// Indices of the winning hypothesis' inliers, ascending.
    pub inliers: Vec<usize>,
    /// The best three-point hypothesis before refitting.
    pub hypothesis: Plane,
}

fn vec3(p: &Point3) -> Vector3<f64> {
    Vector3::new(p.x, p.y, p.z)
}

fn inliers_of(cloud: &PointCloud, plane: &Plane, eps: f64) -> Vec<usize> {
    cloud
        .points
        .iter()
        .enumerate()
        .filter(|(_, p)| plane.signed_distance(p).abs() <= eps)
        .map(|(i, _)| i)
        .collect()
}

/// Orthogonal least-squares plane: through the centroid, normal along the
/// eigenvector of the scatter matrix with the smallest eigenvalue.
pub fn fit_plane_least_squares(points: &[Point3]) -> Option<Plane> {
    if points.len() < 3 {
        return None;
    }
    let n = points.len() as f64;
    let centroid = points.iter().map(vec3).sum::<Vector3<f64>>() / n;
    let mut scatter = Matrix3::zeros();
    for p in points {
        let q = vec3(p) - centroid;
        scatter += q * q.transpose();
    }
    let eig = SymmetricEigen::new(scatter);
    let k = eig.eigenvalues.imin();
    Plane::from_point_normal(centroid, eig.eigenvectors.column(k).into_owned())
}

/// Root-mean-square point-to-plane distance over `indices`.
pub fn rms_distance(cloud: &PointCloud, plane: &Plane, indices: &[usize]) -> f64 {
    if indices.is_empty() {
        return 0.0;
    }
    let ss: f64 = indices
        .iter()
        .map(|&i| plane.signed_distance(&cloud.points[i]).powi(2))
        .sum();
    (ss / indices.len() as f64).sqrt()
}

/// Best-of-N three-point plane hypotheses scored by inlier count (first
/// best wins), then refit on the winner's inliers.
pub fn ransac_plane(cloud: &PointCloud, params: &RansacParams) -> Result<PlaneFit> {
    params.validate()?;
    let n = cloud.len();
    if n < 3 {
        return Err(Error::Fit(format!("need at least 3 points, got {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut best: Option<(usize, Plane)> = None;
    for _ in 0..params.iterations {
        let idx = sample(&mut rng, n, 3);
        let (a, b, c) = (
            vec3(&cloud.points[idx.index(0)]),
            vec3(&cloud.points[idx.index(1)]),
            vec3(&cloud.points[idx.index(2)]),
        );
        let Some(h) = Plane::from_point_normal(a, (b - a).cross(&(c - a))) else {
            continue;
        };
        let count = cloud
            .points
            .iter()
            .filter(|p| h.signed_distance(p).abs() <= params.inlier_eps)
            .count();
        if best.is_none_or(|(bc, _)| count > bc) {
            best = Some((count, h));
        }
    }
    let (_, hypothesis) = best.ok_or_else(|| Error::Fit("every sampled triple was degenerate".into()))?;
    let inliers = inliers_of(cloud, &hypothesis, params.inlier_eps);
    let needed = params.min_inlier_fraction * n as f64;
    if (inliers.len() as f64) < needed {
        return Err(Error::InsufficientSupport {
            found: inliers.len(),
            total: n,
        });
    }
    let support: Vec<Point3> = inliers.iter().map(|&i| cloud.points[i]).collect();
    let plane = fit_plane_least_squares(&support).unwrap_or(hypothesis);
    Ok(PlaneFit {
        plane,
        inliers,
        hypothesis,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlacementParams {
    /// Side of a free-space grid cell, meters.
    pub pitch: f64,
    /// Points up to this height above the plane count as clutter.
    pub occupancy_band: f64,
    /// Required gap beyond the object radius.
    pub margin: f64,
}

impl Default for PlacementParams {
    fn default() -> Self {
        Self {
            pitch: 0.02,
            occupancy_band: 0.30,
            margin: 0.02,
        }
    }
}

/// Orthonormal in-plane axes with the plane point nearest the world origin.
#[derive(Debug, Clone, Copy)]
pub struct PlaneFrame {
    pub origin: Vector3<f64>,
    pub u: Vector3<f64>,
    pub v: Vector3<f64>,
    pub n: Vector3<f64>,
}

impl PlaneFrame {
    pub fn new(plane: &Plane) -> Self {
        let n = plane.normal();
        let seed = if n.x.abs() > 0.9 { Vector3::y() } else { Vector3::x() };
        let u = n.cross(&seed).normalize();
        let v = n.cross(&u);
        Self {
            origin: -plane.d * n,
            u,
            v,
            n,
        }
    }

    pub fn project(&self, p: &Point3) -> Point2 {
        let q = vec3(p) - self.origin;
        Point2::new(q.dot(&self.u), q.dot(&self.v))
    }

    pub fn lift(&self, p: Point2) -> Point3 {
        let w = self.origin + self.u * p.x + self.v * p.y;
        Point3::new(w.x, w.y, w.z)
    }
}

/// Raster of the fitted surface in plane coordinates.
#[derive(Debug, Clone)]
pub struct SurfaceGrid {
    pub frame: PlaneFrame,
    pub hull: Vec<Point2>,
    pub min: Point2,
    pub pitch: f64,
    pub cols: usize,
    pub rows: usize,
    pub in_hull: Vec<bool>,
    pub occupied: Vec<bool>,
}

impl SurfaceGrid {
    pub fn build(
        cloud: &PointCloud,
        plane: &Plane,
        inliers: &[usize],
        params: &PlacementParams,
    ) -> Result<Self> {
        if !(params.pitch > 0.0) || !(params.occupancy_band > 0.0) || !(params.margin >= 0.0) {
            return Err(Error::Parameter(format!("invalid placement parameters {params:?}")));
        }
        let frame = PlaneFrame::new(plane);
        let flat: Vec<Point2> = inliers.iter().map(|&i| frame.project(&cloud.points[i])).collect();
        let hull = convex_hull(&flat);
        if hull.len() < 3 {
            return Err(Error::NoSpace("supporting surface has no area".into()));
        }
        let mut min = hull[0];
        let mut max = hull[0];
        for p in &hull {
            min.x = min.x.min(p.x);
            min.y = min.y.min(p.y);
            max.x = max.x.max(p.x);
            max.y = max.y.max(p.y);
        }
        let cols = (((max.x - min.x) / params.pitch).ceil() as usize).max(1);
        let rows = (((max.y - min.y) / params.pitch).ceil() as usize).max(1);
        let mut grid = Self {
            frame,
            hull,
            min,
            pitch: params.pitch,
            cols,
            rows,
            in_hull: vec![false; cols * rows],
            occupied: vec![false; cols * rows],
        };
        for i in 0..cols * rows {
            grid.in_hull[i] = convex_contains(&grid.hull, grid.center(i));
        }
        let mut is_inlier = vec![false; cloud.len()];
        for &i in inliers {
            is_inlier[i] = true;
        }
        for (i, p) in cloud.points.iter().enumerate() {
            if is_inlier[i] {
                continue;
            }
            let h = plane.signed_distance(p);
            if h <= 0.0 || h > params.occupancy_band {
                continue;
            }
            let q = frame.project(p);
            let c = ((q.x - min.x) / params.pitch).floor();
            let r = ((q.y - min.y) / params.pitch).floor();
            if c >= 0.0 && r >= 0.0 && (c as usize) < cols && (r as usize) < rows {
                grid.occupied[r as usize * cols + c as usize] = true;
            }
        }
        Ok(grid)
    }

    pub fn center(&self, i: usize) -> Point2 {
        let (c, r) = (i % self.cols, i / self.cols);
        Point2::new(
            self.min.x + (c as f64 + 0.5) * self.pitch,
            self.min.y + (r as f64 + 0.5) * self.pitch,
        )
    }

    /// Per-cell clearance in meters: distance to the nearest occupied cell
    /// center or the hull boundary, whichever is closer. `None` for cells
    /// outside the hull or occupied.
    pub fn clearance(&self) -> Vec<Option<f64>> {
        let sq = squared_distance_transform(&self.occupied, self.cols, self.rows);
        (0..self.cols * self.rows)
            .map(|i| {
                if !self.in_hull[i] || self.occupied[i] {
                    return None;
                }
                let to_clutter = sq[i].sqrt() * self.pitch;
                Some(to_clutter.min(boundary_distance(&self.hull, self.center(i))))
            })
            .collect()
    }
}

/// Exact squared Euclidean distance transform (in cells) to the nearest
/// `true` cell, by separable lower envelopes of parabolas. Cells with no
/// seed anywhere get infinity.
pub fn squared_distance_transform(seeds: &[bool], cols: usize, rows: usize) -> Vec<f64> {
    let mut f: Vec<f64> = seeds.iter().map(|&s| if s { 0.0 } else { f64::INFINITY }).collect();
    let mut line = Vec::new();
    for c in 0..cols {
        line.clear();
        line.extend((0..rows).map(|r| f[r * cols + c]));
        let out = envelope_1d(&line);
        for r in 0..rows {
            f[r * cols + c] = out[r];
        }
    }
    for r in 0..rows {
        let out = envelope_1d(&f[r * cols..(r + 1) * cols]);
        f[r * cols..(r + 1) * cols].copy_from_slice(&out);
    }
    f
}

fn envelope_1d(f: &[f64]) -> Vec<f64> {
    let n = f.len();
    let sites: Vec<usize> = (0..n).filter(|&q| f[q].is_finite()).collect();
    if sites.is_empty() {
        return vec![f64::INFINITY; n];
    }
    let mut v: Vec<usize> = Vec::with_capacity(sites.len());
    let mut z: Vec<f64> = Vec::with_capacity(sites.len() + 1);
    let inter = |p: usize, q: usize| {
        let (pf, qf) = (p as f64, q as f64);
        ((f[q] + qf * qf) - (f[p] + pf * pf)) / (2.0 * (qf - pf))
    };
    for &q in &sites {
        while let Some(&p) = v.last() {
            let s = inter(p, q);
            if v.len() > 1 && s <= z[z.len() - 1] {
                v.pop();
                z.pop();
            } else {
                z.push(s);
                break;
            }
        }
        if v.is_empty() {
            z.clear();
            z.push(f64::NEG_INFINITY);
        }
        v.push(q);
    }
    z.push(f64::INFINITY);
    let mut out = vec![0.0; n];
    let mut k = 0;
    for (q, slot) in out.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let d = q as f64 - v[k] as f64;
        *slot = d * d + f[v[k]];
    }
    out
}

/// Center of the free surface cell with the largest clearance, lifted back
/// onto the plane. Ties go to the first cell in row-major order.
pub fn find_placement(
    cloud: &PointCloud,
    plane: &Plane,
    inliers: &[usize],
    object_radius: f64,
    params: &PlacementParams,
) -> Result<Point3> {
    if !(object_radius > 0.0) {
        return Err(Error::Parameter(format!("object radius must be > 0, got {object_radius}")));
    }
    let grid = SurfaceGrid::build(cloud, plane, inliers, params)?;
    let clearance = grid.clearance();
    let mut best: Option<(f64, usize)> = None;
    for (i, c) in clearance.iter().enumerate() {
        if let Some(c) = *c {
            if best.is_none_or(|(b, _)| c > b) {
                best = Some((c, i));
            }
        }
    }
    let required = object_radius + params.margin;
    match best {
        Some((c, i)) if c >= required => Ok(grid.frame.lift(grid.center(i))),
        Some((c, _)) => Err(Error::NoSpace(format!(
            "largest clearance {c:.3} m is below the required {required:.3} m"
        ))),
        None => Err(Error::NoSpace("surface has no free cell".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat(n: usize, z: f64) -> PointCloud {
        let side = (n as f64).sqrt().ceil() as usize;
        let pts = (0..n)
            .map(|i| {
                let (a, b) = ((i % side) as f64, (i / side) as f64);
                Point3::new(a * 0.037 - 0.4, b * 0.029 - 0.3, z)
            })
            .collect();
        PointCloud::new(pts).unwrap()
    }

    #[test]
    fn noiseless_plane_is_exact() {
        let cloud = flat(500, 1.0);
        let fit = ransac_plane(&cloud, &RansacParams::default()).unwrap();
        let n = fit.plane.normal;
        assert!(n[0].abs() < 1e-12 && n[1].abs() < 1e-12 && (n[2] - 1.0).abs() < 1e-12);
        assert!((fit.plane.d + 1.0).abs() < 1e-12);
        assert_eq!(fit.inliers.len(), 500);
    }

    #[test]
    fn too_few_points() {
        let cloud = PointCloud::new(vec![Point3::new(0.0, 0.0, 0.0), Point3::new(1.0, 0.0, 0.0)]).unwrap();
        assert!(matches!(ransac_plane(&cloud, &RansacParams::default()), Err(Error::Fit(_))));
    }

    #[test]
    fn collinear_points_are_degenerate() {
        let pts = (0..20).map(|i| Point3::new(i as f64, 2.0 * i as f64, 0.0)).collect();
        let cloud = PointCloud::new(pts).unwrap();
        assert!(matches!(ransac_plane(&cloud, &RansacParams::default()), Err(Error::Fit(_))));
    }

    #[test]
    fn insufficient_support_reported() {
        let mut cloud = flat(100, 0.0);
        cloud.points.truncate(10);
        // scatter most points far off any common plane
        for i in 0..90 {
            let t = i as f64;
            cloud.points.push(Point3::new((t * 1.3).sin(), (t * 2.1).cos(), (t * 0.7).sin() * 3.0 + t * 0.05));
        }
        let params = RansacParams { min_inlier_fraction: 0.9, ..Default::default() };
        assert!(matches!(ransac_plane(&cloud, &params), Err(Error::InsufficientSupport { .. })));
    }

    #[test]
    fn cloud_text_round_trip_and_errors() {
        let cloud = PointCloud::parse("# table\n0 0 1\n0.5 0.25 1\n\n1 1 1\n").unwrap();
        assert_eq!(cloud.len(), 3);
        assert_eq!(PointCloud::parse(&cloud.to_text()).unwrap(), cloud);
        assert!(matches!(PointCloud::parse("0 0\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(PointCloud::parse("0 0 1\n0 x 1\n"), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn distance_transform_single_seed() {
        let mut seeds = vec![false; 25];
        seeds[12] = true;
        let d = squared_distance_transform(&seeds, 5, 5);
        assert_eq!(d[0], 8.0);
        assert_eq!(d[12], 0.0);
        assert_eq!(d[14], 4.0);
        let none = squared_distance_transform(&[false; 4], 2, 2);
        assert!(none.iter().all(|v| v.is_infinite()));
    }

    #[test]
    fn covered_surface_has_no_space() {
        let mut cloud = flat(400, 0.0);
        let inliers: Vec<usize> = (0..400).collect();
        let plane = fit_plane_least_squares(&cloud.points).unwrap();
        for p in cloud.points.clone() {
            cloud.points.push(Point3::new(p.x, p.y, 0.1));
        }
        let err = find_placement(&cloud, &plane, &inliers, 0.05, &PlacementParams::default());
        assert!(matches!(err, Err(Error::NoSpace(_))));
        assert!(find_placement(&cloud, &plane, &inliers, 0.0, &PlacementParams::default()).is_err());
    }
}
