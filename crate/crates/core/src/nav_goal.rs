//! Navigation goal selection next to a registered piece of furniture.
//!
//! The robot picks the approach point (one of four points just outside the
//! furniture's edges) nearest to itself, then searches a square window
//! around it. Each cell's risk is increased with its distance to the
//! approach point and the goal is the admissible cell whose neighborhood
//! sum of that weighted risk is lowest.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::furniture::FurnitureInstance;
use crate::geometry::{OrientedRect, Point2};
use crate::grid::{CellIndex, GridGeometry, Pose2D, RiskField, SummedArea, DEFAULT_RESOLUTION};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NavGoalParams {
    /// Radius of the robot base, meters. Also the inflation radius.
    pub robot_radius: f64,
    /// Extra gap between the base and the furniture edge, meters.
    pub clearance: f64,
    /// Risk units added per meter of distance from the approach point.
    pub alpha: f64,
    /// Half side of the square search window, meters.
    pub window_half_width: f64,
    /// Half side of the summation neighborhood, cells.
    pub neighborhood_radius: usize,
}

impl NavGoalParams {
    /// Defaults with the neighborhood sized to cover the robot base at
    /// the given grid resolution.
    pub fn for_resolution(resolution: f64) -> Self {
        let robot_radius = 0.22;
        Self {
            robot_radius,
            clearance: 0.2,
            alpha: 10.0,
            window_half_width: 1.5,
            neighborhood_radius: (robot_radius / resolution - 1e-9).ceil().max(0.0) as usize,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let vals = [self.robot_radius, self.clearance, self.alpha, self.window_half_width];
        if vals.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Parameter(format!("navigation parameters must be non-negative: {self:?}")));
        }
        if self.window_half_width < self.robot_radius {
            return Err(Error::Parameter("window_half_width must be >= robot_radius".into()));
        }
        Ok(())
    }

    pub fn approach_offset(&self) -> f64 {
        self.robot_radius + self.clearance
    }
}

impl Default for NavGoalParams {
    fn default() -> Self {
        Self::for_resolution(DEFAULT_RESOLUTION)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NavGoal {
    pub cell: CellIndex,
    /// Cell center, facing the furniture centroid.
    pub pose: Pose2D,
    pub cost: i64,
}

/// Midpoints of the footprint edges pushed outward by the approach offset,
/// in the order east, west, north, south of the furniture's own frame.
pub fn candidate_points(instance: &FurnitureInstance, params: &NavGoalParams) -> [Point2; 4] {
    let rect = instance.footprint();
    let off = params.approach_offset();
    let (w, d) = (rect.half_w + off, rect.half_d + off);
    [
        rect.to_world(Point2::new(w, 0.0)),
        rect.to_world(Point2::new(-w, 0.0)),
        rect.to_world(Point2::new(0.0, d)),
        rect.to_world(Point2::new(0.0, -d)),
    ]
}

/// Point nearest the robot; earlier points win ties.
pub fn select_candidate(points: &[Point2], robot: &Pose2D) -> Result<Point2> {
    let here = robot.position();
    let mut best: Option<(f64, Point2)> = None;
    for p in points {
        let d = p.dist(&here);
        if best.is_none_or(|(bd, _)| d < bd) {
            best = Some((d, *p));
        }
    }
    best.map(|(_, p)| p)
        .ok_or_else(|| Error::Parameter("no candidate points".into()))
}

/// Everything both goal searches share: the approach point and the
/// per-cell predicates, so that the two differ only in how sums are taken.
struct GoalProblem<'a> {
    geometry: GridGeometry,
    risk: &'a RiskField,
    footprints: &'a [OrientedRect],
    candidate: Point2,
    centroid: Point2,
    params: NavGoalParams,
}

impl<'a> GoalProblem<'a> {
    fn new(
        risk: &'a RiskField,
        footprints: &'a [OrientedRect],
        instance: &FurnitureInstance,
        robot: &Pose2D,
        params: &NavGoalParams,
    ) -> Result<Self> {
        params.validate()?;
        let candidate = select_candidate(&candidate_points(instance, params), robot)?;
        Ok(Self {
            geometry: *risk.geometry(),
            risk,
            footprints,
            candidate,
            centroid: instance.pose.position(),
            params: *params,
        })
    }

    fn in_window(&self, c: CellIndex) -> bool {
        let p = self.geometry.center(c);
        let hw = self.params.window_half_width;
        (p.x - self.candidate.x).abs() <= hw && (p.y - self.candidate.y).abs() <= hw
    }

    fn admissible(&self, c: CellIndex) -> bool {
        if self.risk.is_lethal(c) {
            return false;
        }
        let p = self.geometry.center(c);
        !self.footprints.iter().any(|f| f.contains(p))
    }

    fn distance(&self, c: CellIndex) -> f64 {
        self.geometry.center(c).dist(&self.candidate)
    }

    fn weighted_risk(&self, c: CellIndex) -> i64 {
        let base = i64::from(self.risk.values()[self.geometry.index(c)]);
        base + (self.params.alpha * self.distance(c)).round() as i64
    }

    /// Lower is better: cost, then distance to the approach point, then
    /// row-major position.
    fn better(&self, a: (i64, CellIndex), b: (i64, CellIndex)) -> bool {
        let ord = a
            .0
            .cmp(&b.0)
            .then_with(|| self.distance(a.1).total_cmp(&self.distance(b.1)))
            .then_with(|| (a.1.row, a.1.col).cmp(&(b.1.row, b.1.col)));
        ord == Ordering::Less
    }

    fn goal(&self, best: Option<(i64, CellIndex)>) -> Result<NavGoal> {
        let (cost, cell) = best.ok_or_else(|| {
            Error::NoGoal(format!(
                "no free cell within {} m of approach point ({:.3}, {:.3})",
                self.params.window_half_width, self.candidate.x, self.candidate.y
            ))
        })?;
        let p = self.geometry.center(cell);
        let heading = (self.centroid.y - p.y).atan2(self.centroid.x - p.x);
        Ok(NavGoal {
            cell,
            pose: Pose2D::new(p.x, p.y, heading),
            cost,
        })
    }
}

fn cell_span(origin: f64, res: f64, lo: f64, hi: f64, n: usize) -> Option<(usize, usize)> {
    let a = ((lo - origin) / res - 0.5).floor() - 1.0;
    let b = ((hi - origin) / res - 0.5).ceil() + 1.0;
    if b < 0.0 || a > (n as f64 - 1.0) {
        return None;
    }
    Some((a.max(0.0) as usize, (b as usize).min(n - 1)))
}

/// Picks the navigation goal for `instance`.
///
/// `footprints` lists every furniture footprint the goal must stay out of
/// (normally all registered instances, including the target). Neighborhood
/// sums are taken from a summed-area table over the weighted risk of the
/// search window plus its margin.
pub fn select_goal(
    risk: &RiskField,
    footprints: &[OrientedRect],
    instance: &FurnitureInstance,
    robot: &Pose2D,
    params: &NavGoalParams,
) -> Result<NavGoal> {
    let prob = GoalProblem::new(risk, footprints, instance, robot, params)?;
    let g = prob.geometry;
    let hw = params.window_half_width;
    let cols = cell_span(g.origin.x, g.resolution, prob.candidate.x - hw, prob.candidate.x + hw, g.width);
    let rows = cell_span(g.origin.y, g.resolution, prob.candidate.y - hw, prob.candidate.y + hw, g.height);
    let (Some((c0, c1)), Some((r0, r1))) = (cols, rows) else {
        return prob.goal(None);
    };

    // weighted risk over the window grown by the neighborhood, clipped to the map
    let nr = params.neighborhood_radius;
    let (mc0, mr0) = (c0.saturating_sub(nr), r0.saturating_sub(nr));
    let (mc1, mr1) = ((c1 + nr).min(g.width - 1), (r1 + nr).min(g.height - 1));
    let (mw, mh) = (mc1 - mc0 + 1, mr1 - mr0 + 1);
    let mut weighted = Vec::with_capacity(mw * mh);
    for row in mr0..=mr1 {
        for col in mc0..=mc1 {
            weighted.push(prob.weighted_risk(CellIndex::new(col, row)));
        }
    }
    let sums = SummedArea::new(mw, mh, &weighted);

    let mut best: Option<(i64, CellIndex)> = None;
    for row in r0..=r1 {
        for col in c0..=c1 {
            let c = CellIndex::new(col, row);
            if !prob.in_window(c) || !prob.admissible(c) {
                continue;
            }
            let cost = sums.window_sum(CellIndex::new(col - mc0, row - mr0), nr);
            if best.is_none_or(|b| prob.better((cost, c), b)) {
                best = Some((cost, c));
            }
        }
    }
    prob.goal(best)
}

/// Reference search with the same contract as [`select_goal`]: visits
/// every map cell and sums each neighborhood directly.
pub fn brute_force_goal(
    risk: &RiskField,
    footprints: &[OrientedRect],
    instance: &FurnitureInstance,
    robot: &Pose2D,
    params: &NavGoalParams,
) -> Result<NavGoal> {
    let prob = GoalProblem::new(risk, footprints, instance, robot, params)?;
    let g = prob.geometry;
    let nr = params.neighborhood_radius as isize;
    let mut best: Option<(i64, CellIndex)> = None;
    for row in 0..g.height {
        for col in 0..g.width {
            let c = CellIndex::new(col, row);
            if !prob.in_window(c) || !prob.admissible(c) {
                continue;
            }
            let mut cost = 0i64;
            for dr in -nr..=nr {
                for dc in -nr..=nr {
                    let (nc, nrow) = (col as isize + dc, row as isize + dr);
                    if nc < 0 || nrow < 0 || nc >= g.width as isize || nrow >= g.height as isize {
                        continue;
                    }
                    cost += prob.weighted_risk(CellIndex::new(nc as usize, nrow as usize));
                }
            }
            if best.is_none_or(|b| prob.better((cost, c), b)) {
                best = Some((cost, c));
            }
        }
    }
    prob.goal(best)
}
