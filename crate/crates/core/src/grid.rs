//! Static layer: occupancy grid, obstacle inflation into a risk field and
//! windowed risk sums.
//!
//! Row 0 is the row nearest `origin.y`; in the text format it is the first
//! row after the header.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{normalize_angle, Point2};

/// Risk assigned to every cell within the inflation radius of an obstacle.
pub const LETHAL_RISK: u32 = 100;

/// Default cell pitch in meters.
pub const DEFAULT_RESOLUTION: f64 = 0.05;

const DIST_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Cell {
    Free,
    Occupied,
    Unknown,
}

impl Cell {
    pub fn glyph(self) -> char {
        match self {
            Cell::Free => '.',
            Cell::Occupied => '#',
            Cell::Unknown => '?',
        }
    }

    pub fn from_glyph(c: char) -> Option<Cell> {
        match c {
            '.' => Some(Cell::Free),
            '#' => Some(Cell::Occupied),
            '?' => Some(Cell::Unknown),
            _ => None,
        }
    }

    /// Occupied and unknown cells both seed inflation.
    pub fn is_obstacle(self) -> bool {
        !matches!(self, Cell::Free)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellIndex {
    pub col: usize,
    pub row: usize,
}

impl CellIndex {
    pub const fn new(col: usize, row: usize) -> Self {
        Self { col, row }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct Pose2D {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose2D {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self {
            x,
            y,
            theta: normalize_angle(theta),
        }
    }

    pub fn position(&self) -> Point2 {
        Point2::new(self.x, self.y)
    }
}

/// Metric placement of a raster: shared by maps and the fields derived from them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridGeometry {
    pub resolution: f64,
    pub origin: Point2,
    pub width: usize,
    pub height: usize,
}

impl GridGeometry {
    pub fn new(resolution: f64, origin: Point2, width: usize, height: usize) -> Result<Self> {
        if !(resolution > 0.0) || !resolution.is_finite() {
            return Err(Error::Parameter(format!("resolution must be > 0, got {resolution}")));
        }
        if width == 0 || height == 0 {
            return Err(Error::Parameter(format!("grid must be at least 1x1, got {width}x{height}")));
        }
        if !origin.x.is_finite() || !origin.y.is_finite() {
            return Err(Error::Parameter("origin must be finite".into()));
        }
        Ok(Self {
            resolution,
            origin,
            width,
            height,
        })
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn in_bounds(&self, c: CellIndex) -> bool {
        c.col < self.width && c.row < self.height
    }

    pub fn index(&self, c: CellIndex) -> usize {
        c.row * self.width + c.col
    }

    pub fn cell_of(&self, i: usize) -> CellIndex {
        CellIndex::new(i % self.width, i / self.width)
    }

    pub fn world_to_cell(&self, p: Point2) -> Result<CellIndex> {
        let fx = ((p.x - self.origin.x) / self.resolution).floor();
        let fy = ((p.y - self.origin.y) / self.resolution).floor();
        if !(fx >= 0.0 && fy >= 0.0 && fx < self.width as f64 && fy < self.height as f64) {
            return Err(Error::Bounds(format!(
                "point ({}, {}) outside {}x{} map",
                p.x, p.y, self.width, self.height
            )));
        }
        Ok(CellIndex::new(fx as usize, fy as usize))
    }

    pub fn cell_to_world(&self, c: CellIndex) -> Result<Point2> {
        if !self.in_bounds(c) {
            return Err(Error::Bounds(format!(
                "cell ({}, {}) outside {}x{} map",
                c.col, c.row, self.width, self.height
            )));
        }
        Ok(self.center(c))
    }

    /// Cell center without a bounds check.
    pub fn center(&self, c: CellIndex) -> Point2 {
        Point2::new(
            self.origin.x + (c.col as f64 + 0.5) * self.resolution,
            self.origin.y + (c.row as f64 + 0.5) * self.resolution,
        )
    }

    pub fn check(&self, c: CellIndex) -> Result<()> {
        if self.in_bounds(c) {
            Ok(())
        } else {
            Err(Error::Bounds(format!(
                "cell ({}, {}) outside {}x{} map",
                c.col, c.row, self.width, self.height
            )))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridMap {
    geometry: GridGeometry,
    cells: Vec<Cell>,
}

impl GridMap {
    pub fn new(geometry: GridGeometry, cells: Vec<Cell>) -> Result<Self> {
        if cells.len() != geometry.len() {
            return Err(Error::Parameter(format!(
                "expected {} cells, got {}",
                geometry.len(),
                cells.len()
            )));
        }
        Ok(Self { geometry, cells })
    }

    pub fn filled(geometry: GridGeometry, cell: Cell) -> Self {
        Self {
            cells: vec![cell; geometry.len()],
            geometry,
        }
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn width(&self) -> usize {
        self.geometry.width
    }

    pub fn height(&self) -> usize {
        self.geometry.height
    }

    pub fn resolution(&self) -> f64 {
        self.geometry.resolution
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn get(&self, c: CellIndex) -> Result<Cell> {
        self.geometry.check(c)?;
        Ok(self.cells[self.geometry.index(c)])
    }

    /// Returns a copy with one cell replaced.
    pub fn with_cell(&self, c: CellIndex, value: Cell) -> Result<GridMap> {
        self.geometry.check(c)?;
        let mut out = self.clone();
        let i = out.geometry.index(c);
        out.cells[i] = value;
        Ok(out)
    }

    pub(crate) fn cells_mut(&mut self) -> &mut [Cell] {
        &mut self.cells
    }

    pub fn world_to_cell(&self, p: Point2) -> Result<CellIndex> {
        self.geometry.world_to_cell(p)
    }

    pub fn cell_to_world(&self, c: CellIndex) -> Result<Point2> {
        self.geometry.cell_to_world(c)
    }

    /// Marks every cell within `radius` meters (center to center) of an
    /// occupied or unknown cell with [`LETHAL_RISK`].
    pub fn inflate(&self, radius: f64) -> Result<RiskField> {
        if !(radius >= 0.0) || !radius.is_finite() {
            return Err(Error::Parameter(format!("inflation radius must be >= 0, got {radius}")));
        }
        let g = self.geometry;
        let reach = (radius / g.resolution).floor() as isize + 1;
        let offsets: Vec<(isize, isize)> = (-reach..=reach)
            .flat_map(|dy| (-reach..=reach).map(move |dx| (dx, dy)))
            .filter(|&(dx, dy)| {
                (dx as f64).hypot(dy as f64) * g.resolution <= radius + DIST_TOLERANCE
            })
            .collect();

        let (w, h) = (g.width as isize, g.height as isize);
        let mut risk = vec![0u32; g.len()];
        for (i, cell) in self.cells.iter().enumerate() {
            if !cell.is_obstacle() {
                continue;
            }
            let (col, row) = ((i % g.width) as isize, (i / g.width) as isize);
            for &(dx, dy) in &offsets {
                let (c, r) = (col + dx, row + dy);
                if c >= 0 && r >= 0 && c < w && r < h {
                    risk[(r * w + c) as usize] = LETHAL_RISK;
                }
            }
        }
        Ok(RiskField::from_values(g, risk))
    }

    /// Writes the `gridmap v1` text document.
    pub fn save(&self) -> String {
        let g = &self.geometry;
        let mut out = String::with_capacity(g.len() + g.height + 64);
        let _ = writeln!(
            out,
            "gridmap v1 {} {} {} {} {}",
            g.width, g.height, g.resolution, g.origin.x, g.origin.y
        );
        for row in self.cells.chunks(g.width) {
            out.extend(row.iter().map(|c| c.glyph()));
            out.push('\n');
        }
        out
    }

    /// Parses a `gridmap v1` document. Line numbers in errors are 1-based.
    pub fn load(doc: &str) -> Result<GridMap> {
        let mut lines = doc.split_terminator('\n');
        let header = lines.next().ok_or_else(|| parse_err(1, "empty document"))?;
        let fields: Vec<&str> = header.split(' ').collect();
        if fields.len() != 7 || fields[0] != "gridmap" || fields[1] != "v1" {
            return Err(parse_err(1, "expected `gridmap v1 <w> <h> <res> <ox> <oy>`"));
        }
        let width: usize = fields[2].parse().map_err(|_| parse_err(1, "bad width"))?;
        let height: usize = fields[3].parse().map_err(|_| parse_err(1, "bad height"))?;
        let res: f64 = fields[4].parse().map_err(|_| parse_err(1, "bad resolution"))?;
        let ox: f64 = fields[5].parse().map_err(|_| parse_err(1, "bad origin x"))?;
        let oy: f64 = fields[6].parse().map_err(|_| parse_err(1, "bad origin y"))?;
        let geometry = GridGeometry::new(res, Point2::new(ox, oy), width, height)
            .map_err(|e| parse_err(1, &e.to_string()))?;

        let mut cells = Vec::with_capacity(geometry.len());
        for row in 0..height {
            let line_no = row + 2;
            let line = lines
                .next()
                .ok_or_else(|| parse_err(line_no, &format!("missing row {row}")))?;
            let before = cells.len();
            for ch in line.chars() {
                let cell = Cell::from_glyph(ch)
                    .ok_or_else(|| parse_err(line_no, &format!("unknown cell glyph {ch:?}")))?;
                cells.push(cell);
            }
            let got = cells.len() - before;
            if got != width {
                return Err(parse_err(
                    line_no,
                    &format!("row {row} has {got} cells, expected {width}"),
                ));
            }
        }
        if lines.next().is_some() {
            return Err(parse_err(height + 2, "trailing content after last row"));
        }
        if !doc.ends_with('\n') {
            return Err(parse_err(height + 1, "document must be newline-terminated"));
        }
        GridMap::new(geometry, cells)
    }
}

fn parse_err(line: usize, msg: &str) -> Error {
    Error::Parse {
        line,
        msg: msg.to_string(),
    }
}

/// 2D prefix sums over an integer raster, giving O(1) rectangle sums.
#[derive(Debug, Clone, PartialEq)]
pub struct SummedArea {
    width: usize,
    height: usize,
    // (width + 1) x (height + 1), zero first row and column
    table: Vec<i64>,
}

impl SummedArea {
    pub fn new(width: usize, height: usize, values: &[i64]) -> Self {
        assert_eq!(values.len(), width * height);
        let stride = width + 1;
        let mut table = vec![0i64; stride * (height + 1)];
        for r in 0..height {
            let mut row_acc = 0i64;
            for c in 0..width {
                row_acc += values[r * width + c];
                table[(r + 1) * stride + c + 1] = table[r * stride + c + 1] + row_acc;
            }
        }
        Self {
            width,
            height,
            table,
        }
    }

    /// Sum over the inclusive rectangle `[c0, c1] x [r0, r1]`.
    pub fn rect_sum(&self, c0: usize, r0: usize, c1: usize, r1: usize) -> i64 {
        debug_assert!(c1 < self.width && r1 < self.height && c0 <= c1 && r0 <= r1);
        let s = self.width + 1;
        self.table[(r1 + 1) * s + c1 + 1] - self.table[r0 * s + c1 + 1] - self.table[(r1 + 1) * s + c0]
            + self.table[r0 * s + c0]
    }

    /// Sum over the `(2r+1)^2` window centered on `c`, clipped to the raster.
    pub fn window_sum(&self, c: CellIndex, r: usize) -> i64 {
        let c0 = c.col.saturating_sub(r);
        let r0 = c.row.saturating_sub(r);
        let c1 = (c.col + r).min(self.width - 1);
        let r1 = (c.row + r).min(self.height - 1);
        self.rect_sum(c0, r0, c1, r1)
    }
}

/// Per-cell integer risk over the geometry of its source map.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskField {
    geometry: GridGeometry,
    risk: Vec<u32>,
    sums: SummedArea,
}

impl RiskField {
    pub fn from_values(geometry: GridGeometry, risk: Vec<u32>) -> Self {
        assert_eq!(risk.len(), geometry.len());
        let wide: Vec<i64> = risk.iter().map(|&r| i64::from(r)).collect();
        let sums = SummedArea::new(geometry.width, geometry.height, &wide);
        Self {
            geometry,
            risk,
            sums,
        }
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn values(&self) -> &[u32] {
        &self.risk
    }

    pub fn get(&self, c: CellIndex) -> Result<u32> {
        self.geometry.check(c)?;
        Ok(self.risk[self.geometry.index(c)])
    }

    pub fn is_lethal(&self, c: CellIndex) -> bool {
        self.risk[self.geometry.index(c)] >= LETHAL_RISK
    }

    /// Sum of risk over the `(2r+1)^2` window centered on `c`, clipped to the map.
    pub fn neighborhood_cost(&self, c: CellIndex, r: usize) -> Result<i64> {
        self.geometry.check(c)?;
        Ok(self.sums.window_sum(c, r))
    }
}
