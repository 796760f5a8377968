use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::grid::{CellIndex, RiskField};

/// Moves in expansion order: E, W, N, S, then the diagonals.
const MOVES: [(isize, isize); 8] = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (-1, 1), (1, -1), (-1, -1)];

#[derive(Debug, Clone, Copy, PartialEq)]
struct Entry {
    cost: f64,
    index: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    // min-heap on (cost, index)
    fn cmp(&self, other: &Self) -> Ordering {
        other.cost.total_cmp(&self.cost).then_with(|| other.index.cmp(&self.index))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Neighbors of `c` reachable in one step. A diagonal step needs both
/// orthogonal cells it passes between to be free.
pub fn neighbors(risk: &RiskField, c: CellIndex) -> Vec<(CellIndex, f64)> {
    let g = risk.geometry();
    let free = |col: isize, row: isize| {
        col >= 0
            && row >= 0
            && (col as usize) < g.width
            && (row as usize) < g.height
            && !risk.is_lethal(CellIndex::new(col as usize, row as usize))
    };
    let (col, row) = (c.col as isize, c.row as isize);
    let mut out = Vec::with_capacity(8);
    for (dc, dr) in MOVES {
        let (nc, nr) = (col + dc, row + dr);
        if !free(nc, nr) {
            continue;
        }
        let diagonal = dc != 0 && dr != 0;
        if diagonal && !(free(col + dc, row) && free(col, row + dr)) {
            continue;
        }
        let step = if diagonal { std::f64::consts::SQRT_2 } else { 1.0 };
        out.push((CellIndex::new(nc as usize, nr as usize), step));
    }
    out
}

/// Total step cost of a cell path.
pub fn path_cost(path: &[CellIndex]) -> f64 {
    path.windows(2)
        .map(|w| {
            if w[0].col != w[1].col && w[0].row != w[1].row {
                std::f64::consts::SQRT_2
            } else {
                1.0
            }
        })
        .sum()
}

/// Shortest 8-connected path over non-lethal cells, start and goal
/// included. Among equal-cost frontiers the lower row-major index is
/// expanded first, and a cell keeps the first predecessor that reached it
/// at its final cost, so the result is deterministic.
pub fn plan_path(risk: &RiskField, start: CellIndex, goal: CellIndex) -> Result<Vec<CellIndex>> {
    let g = *risk.geometry();
    for (what, c) in [("start", start), ("goal", goal)] {
        g.check(c)?;
        if risk.is_lethal(c) {
            return Err(Error::Parameter(format!("{what} cell ({}, {}) is inside an obstacle", c.col, c.row)));
        }
    }
    let n = g.len();
    let mut dist = vec![f64::INFINITY; n];
    let mut prev = vec![usize::MAX; n];
    let mut done = vec![false; n];
    let (s, t) = (g.index(start), g.index(goal));
    dist[s] = 0.0;
    let mut heap = BinaryHeap::new();
    heap.push(Entry { cost: 0.0, index: s });
    while let Some(Entry { cost, index }) = heap.pop() {
        if done[index] {
            continue;
        }
        done[index] = true;
        if index == t {
            break;
        }
        for (nb, step) in neighbors(risk, g.cell_of(index)) {
            let j = g.index(nb);
            let alt = cost + step;
            if !done[j] && alt < dist[j] {
                dist[j] = alt;
                prev[j] = index;
                heap.push(Entry { cost: alt, index: j });
            }
        }
    }
    if !done[t] {
        return Err(Error::Unreachable(format!(
            "no free path from ({}, {}) to ({}, {})",
            start.col, start.row, goal.col, goal.row
        )));
    }
    let mut path = vec![goal];
    let mut i = t;
    while i != s {
        i = prev[i];
        path.push(g.cell_of(i));
    }
    path.reverse();
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point2;
    use crate::grid::{Cell, GridGeometry, GridMap};

    fn field(rows: &[&str]) -> RiskField {
        let h = rows.len();
        let w = rows[0].len();
        let geo = GridGeometry::new(1.0, Point2::new(0.0, 0.0), w, h).unwrap();
        let cells = rows
            .iter()
            .flat_map(|r| r.chars().map(|c| Cell::from_glyph(c).unwrap()))
            .collect();
        GridMap::new(geo, cells).unwrap().inflate(0.0).unwrap()
    }

    #[test]
    fn straight_corridor() {
        let r = field(&["......"]);
        let p = plan_path(&r, CellIndex::new(0, 0), CellIndex::new(5, 0)).unwrap();
        assert_eq!(p.len(), 6);
        assert_eq!(path_cost(&p), 5.0);
    }

    #[test]
    fn diagonal_is_cheaper() {
        let r = field(&["....", "....", "....", "...."]);
        let p = plan_path(&r, CellIndex::new(0, 0), CellIndex::new(3, 3)).unwrap();
        assert!((path_cost(&p) - 3.0 * std::f64::consts::SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn start_equals_goal() {
        let r = field(&["..."]);
        assert_eq!(plan_path(&r, CellIndex::new(1, 0), CellIndex::new(1, 0)).unwrap(), [CellIndex::new(1, 0)]);
    }

    #[test]
    fn walled_off_goal() {
        let r = field(&["..#..", "..#..", "..#.."]);
        assert!(matches!(
            plan_path(&r, CellIndex::new(0, 0), CellIndex::new(4, 2)),
            Err(Error::Unreachable(_))
        ));
    }

    #[test]
    fn no_corner_cutting() {
        let r = field(&[".#", "#."]);
        assert!(plan_path(&r, CellIndex::new(0, 0), CellIndex::new(1, 1)).is_err());
    }

    #[test]
    fn lethal_endpoints_rejected() {
        let r = field(&[".#"]);
        assert!(matches!(
            plan_path(&r, CellIndex::new(0, 0), CellIndex::new(1, 0)),
            Err(Error::Parameter(_))
        ));
    }
}
