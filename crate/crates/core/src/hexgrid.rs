//! Hexagonal tessellation over a planar bounding box in miles.
//!
//! Cells are axial-indexed `(q, r)` with the origin cell's centroid anchored
//! at the bounding box's lower-left corner. A cell belongs to the grid when
//! its hexagon intersects the box, so every interior point maps to exactly
//! one cell. All queries are pure; the grid is immutable after construction.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SQRT_3: f64 = 1.732_050_807_568_877_2;

/// Axial cell coordinates. Ordering is lexicographic (q, then r), which is
/// the tie-break order used everywhere determinism is needed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellId {
    pub q: i32,
    pub r: i32,
}

impl CellId {
    pub fn new(q: i32, r: i32) -> Self {
        Self { q, r }
    }
}

/// The six axial neighbor offsets (edge adjacency).
pub const NEIGHBOR_OFFSETS: [(i32, i32); 6] = [(1, 0), (1, -1), (0, -1), (-1, 0), (-1, 1), (0, 1)];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Orientation {
    PointyTop,
    FlatTop,
}

impl std::str::FromStr for Orientation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pointy" | "pointy-top" | "pointy_top" => Ok(Orientation::PointyTop),
            "flat" | "flat-top" | "flat_top" => Ok(Orientation::FlatTop),
            other => Err(Error::Config(format!(
                "unknown orientation `{other}` (expected `pointy` or `flat`)"
            ))),
        }
    }
}

/// Planar axis-aligned rectangle in miles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl Rect {
    pub fn new(min_x: f64, min_y: f64, max_x: f64, max_y: f64) -> Self {
        Self { min_x, min_y, max_x, max_y }
    }

    pub fn width(&self) -> f64 {
        self.max_x - self.min_x
    }

    pub fn height(&self) -> f64 {
        self.max_y - self.min_y
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.min_x && x <= self.max_x && y >= self.min_y && y <= self.max_y
    }
}

/// A geocoded input record: establishment (weight = employees) or amenity
/// point (weight = 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointRecord {
    pub x: f64,
    pub y: f64,
    pub weight: f64,
}

impl PointRecord {
    pub fn new(x: f64, y: f64, weight: f64) -> Self {
        Self { x, y, weight }
    }

    fn validate(&self, index: usize) -> Result<()> {
        if !self.x.is_finite() || !self.y.is_finite() {
            return Err(Error::Data(format!(
                "point {index} has non-finite coordinates ({}, {})",
                self.x, self.y
            )));
        }
        if !(self.weight >= 0.0) || !self.weight.is_finite() {
            return Err(Error::Data(format!(
                "point {index} has invalid weight {}",
                self.weight
            )));
        }
        Ok(())
    }
}

/// What to do with points outside the bounding box during aggregation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutOfBoundsPolicy {
    /// Error on the first offending record.
    Strict,
    /// Drop them, reporting count and total weight.
    Drop,
}

/// Count and weight of records dropped under [`OutOfBoundsPolicy::Drop`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct DropReport {
    pub dropped: usize,
    pub dropped_weight: f64,
}

/// The hexagonal tessellation: cell set, centroid geometry, point lookup.
#[derive(Debug, Clone)]
pub struct HexGrid {
    bbox: Rect,
    cell_area: f64,
    side_length: f64,
    orientation: Orientation,
    cells: Vec<CellId>,
    centroids: Vec<(f64, f64)>,
    index: HashMap<CellId, usize>,
}

/// Build the tessellation covering `bbox`. Cells whose hexagon intersects
/// the box are included; identical inputs produce an identical cell set.
pub fn build_grid(bbox: Rect, cell_area: f64, orientation: Orientation) -> Result<HexGrid> {
    if !(bbox.width() > 0.0) || !(bbox.height() > 0.0) {
        return Err(Error::Config(format!(
            "degenerate bounding box: width {} mi, height {} mi (both must be positive)",
            bbox.width(),
            bbox.height()
        )));
    }
    if !(cell_area > 0.0) || !cell_area.is_finite() {
        return Err(Error::Config(format!("cell area must be positive, got {cell_area}")));
    }

    // Regular hexagon: area = (3*sqrt(3)/2) * side^2.
    let side = (2.0 * cell_area / (3.0 * SQRT_3)).sqrt();
    let proto = HexGrid {
        bbox,
        cell_area,
        side_length: side,
        orientation,
        cells: Vec::new(),
        centroids: Vec::new(),
        index: HashMap::new(),
    };

    // Candidate (q, r) ranges from the fractional axial coordinates of the
    // box corners, padded so boundary hexagons are not missed.
    let corners = [
        (bbox.min_x, bbox.min_y),
        (bbox.max_x, bbox.min_y),
        (bbox.min_x, bbox.max_y),
        (bbox.max_x, bbox.max_y),
    ];
    let mut q_lo = i32::MAX;
    let mut q_hi = i32::MIN;
    let mut r_lo = i32::MAX;
    let mut r_hi = i32::MIN;
    for &(x, y) in &corners {
        let (qf, rf) = proto.fractional_axial(x, y);
        q_lo = q_lo.min(qf.floor() as i32 - 2);
        q_hi = q_hi.max(qf.ceil() as i32 + 2);
        r_lo = r_lo.min(rf.floor() as i32 - 2);
        r_hi = r_hi.max(rf.ceil() as i32 + 2);
    }

    let mut cells = Vec::new();
    for q in q_lo..=q_hi {
        for r in r_lo..=r_hi {
            let cell = CellId::new(q, r);
            if proto.hexagon_intersects_bbox(cell) {
                cells.push(cell);
            }
        }
    }
    cells.sort_unstable();

    let centroids: Vec<(f64, f64)> = cells.iter().map(|&c| proto.axial_to_xy(c)).collect();
    let index: HashMap<CellId, usize> = cells.iter().enumerate().map(|(i, &c)| (c, i)).collect();

    Ok(HexGrid { cells, centroids, index, ..proto })
}

impl HexGrid {
    pub fn bbox(&self) -> Rect {
        self.bbox
    }

    pub fn cell_area(&self) -> f64 {
        self.cell_area
    }

    pub fn side_length(&self) -> f64 {
        self.side_length
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Cells in lexicographic (q, r) order.
    pub fn cells(&self) -> &[CellId] {
        &self.cells
    }

    pub fn contains_cell(&self, cell: CellId) -> bool {
        self.index.contains_key(&cell)
    }

    /// Dense index of a cell in [`HexGrid::cells`] order.
    pub fn cell_index(&self, cell: CellId) -> Result<usize> {
        self.index
            .get(&cell)
            .copied()
            .ok_or(Error::UnknownCell { q: cell.q, r: cell.r })
    }

    pub fn centroid(&self, cell: CellId) -> Result<(f64, f64)> {
        Ok(self.centroids[self.cell_index(cell)?])
    }

    pub fn centroid_at(&self, idx: usize) -> (f64, f64) {
        self.centroids[idx]
    }

    /// Euclidean planar distance between two cell centroids, in miles.
    pub fn centroid_distance(&self, a: CellId, b: CellId) -> Result<f64> {
        let (ax, ay) = self.centroid(a)?;
        let (bx, by) = self.centroid(b)?;
        Ok(((ax - bx).powi(2) + (ay - by).powi(2)).sqrt())
    }

    /// In-grid edge neighbors of a cell (interior cells have six).
    pub fn neighbors(&self, cell: CellId) -> impl Iterator<Item = CellId> + '_ {
        NEIGHBOR_OFFSETS
            .iter()
            .map(move |&(dq, dr)| CellId::new(cell.q + dq, cell.r + dr))
            .filter(|c| self.contains_cell(*c))
    }

    /// The unique cell whose hexagon contains `(x, y)`. Points on a shared
    /// edge resolve to the lexicographically smallest of the tied cells.
    pub fn assign_point(&self, x: f64, y: f64) -> Result<CellId> {
        if !self.bbox.contains(x, y) {
            return Err(Error::OutOfDomain(format!(
                "point ({x}, {y}) lies outside the bounding box \
                 [{}, {}] x [{}, {}]",
                self.bbox.min_x, self.bbox.max_x, self.bbox.min_y, self.bbox.max_y
            )));
        }

        // Containment in a regular hex grid is the nearest-centroid rule.
        // Cube rounding gives the candidate; the true nearest is it or one
        // of its six neighbors.
        let (qf, rf) = self.fractional_axial(x, y);
        let rounded = axial_round(qf, rf);

        let tie_eps = 1e-12 * self.side_length * self.side_length;
        let mut best: Option<(f64, CellId)> = None;
        for (dq, dr) in std::iter::once((0, 0)).chain(NEIGHBOR_OFFSETS) {
            let cell = CellId::new(rounded.q + dq, rounded.r + dr);
            if !self.contains_cell(cell) {
                continue;
            }
            let (cx, cy) = self.axial_to_xy(cell);
            let d2 = (x - cx).powi(2) + (y - cy).powi(2);
            best = match best {
                None => Some((d2, cell)),
                Some((bd2, bc)) => {
                    if d2 < bd2 - tie_eps {
                        Some((d2, cell))
                    } else if d2 <= bd2 + tie_eps && cell < bc {
                        Some((d2.min(bd2), cell))
                    } else {
                        Some((bd2, bc))
                    }
                }
            };
        }
        best.map(|(_, c)| c).ok_or_else(|| {
            Error::Data(format!("no grid cell near point ({x}, {y}); grid construction bug"))
        })
    }

    /// Centroid of a cell whether or not it belongs to the grid.
    fn axial_to_xy(&self, cell: CellId) -> (f64, f64) {
        let s = self.side_length;
        let q = cell.q as f64;
        let r = cell.r as f64;
        let (dx, dy) = match self.orientation {
            Orientation::PointyTop => (s * SQRT_3 * (q + r / 2.0), s * 1.5 * r),
            Orientation::FlatTop => (s * 1.5 * q, s * SQRT_3 * (r + q / 2.0)),
        };
        (self.bbox.min_x + dx, self.bbox.min_y + dy)
    }

    fn fractional_axial(&self, x: f64, y: f64) -> (f64, f64) {
        let s = self.side_length;
        let dx = x - self.bbox.min_x;
        let dy = y - self.bbox.min_y;
        match self.orientation {
            Orientation::PointyTop => ((SQRT_3 / 3.0 * dx - dy / 3.0) / s, (2.0 / 3.0 * dy) / s),
            Orientation::FlatTop => ((2.0 / 3.0 * dx) / s, (-dx / 3.0 + SQRT_3 / 3.0 * dy) / s),
        }
    }

    fn hexagon_vertices(&self, cell: CellId) -> [(f64, f64); 6] {
        let (cx, cy) = self.axial_to_xy(cell);
        let start_deg = match self.orientation {
            Orientation::PointyTop => 30.0,
            Orientation::FlatTop => 0.0,
        };
        let mut verts = [(0.0, 0.0); 6];
        for (k, v) in verts.iter_mut().enumerate() {
            let angle = (start_deg + 60.0 * k as f64).to_radians();
            *v = (cx + self.side_length * angle.cos(), cy + self.side_length * angle.sin());
        }
        verts
    }

    /// Separating-axis test between a cell's hexagon and the bounding box.
    fn hexagon_intersects_bbox(&self, cell: CellId) -> bool {
        let hex = self.hexagon_vertices(cell);
        let rect = [
            (self.bbox.min_x, self.bbox.min_y),
            (self.bbox.max_x, self.bbox.min_y),
            (self.bbox.max_x, self.bbox.max_y),
            (self.bbox.min_x, self.bbox.max_y),
        ];

        let mut axes: Vec<(f64, f64)> = vec![(1.0, 0.0), (0.0, 1.0)];
        for k in 0..6 {
            let (x0, y0) = hex[k];
            let (x1, y1) = hex[(k + 1) % 6];
            axes.push((y1 - y0, x0 - x1));
        }

        for (ax, ay) in axes {
            let project = |pts: &[(f64, f64)]| {
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                for &(px, py) in pts {
                    let d = px * ax + py * ay;
                    lo = lo.min(d);
                    hi = hi.max(d);
                }
                (lo, hi)
            };
            let (alo, ahi) = project(&hex);
            let (blo, bhi) = project(&rect);
            if ahi < blo || bhi < alo {
                return false;
            }
        }
        true
    }
}

fn axial_round(qf: f64, rf: f64) -> CellId {
    // Round in cube coordinates, fixing the component with the largest error.
    let sf = -qf - rf;
    let mut q = qf.round();
    let mut r = rf.round();
    let s = sf.round();
    let dq = (q - qf).abs();
    let dr = (r - rf).abs();
    let ds = (s - sf).abs();
    if dq > dr && dq > ds {
        q = -r - s;
    } else if dr > ds {
        r = -q - s;
    }
    CellId::new(q as i32, r as i32)
}

/// Nonnegative job totals per cell, dense in the grid's cell order.
#[derive(Debug, Clone, PartialEq)]
pub struct EmploymentField {
    values: Vec<f64>,
}

impl EmploymentField {
    pub fn zeros(grid: &HexGrid) -> Self {
        Self { values: vec![0.0; grid.len()] }
    }

    pub fn new(grid: &HexGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Data(format!(
                "field length {} does not match grid cell count {}",
                values.len(),
                grid.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
            return Err(Error::Data(format!("field values must be nonnegative and finite, got {v}")));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, idx: usize) -> f64 {
        self.values[idx]
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Jobs per square mile for one cell.
    pub fn density(&self, grid: &HexGrid, idx: usize) -> f64 {
        self.values[idx] / grid.cell_area()
    }

    /// The full density distribution in cell order.
    pub fn densities(&self, grid: &HexGrid) -> Vec<f64> {
        self.values.iter().map(|v| v / grid.cell_area()).collect()
    }
}

/// Bin weighted points into a per-cell employment field.
pub fn aggregate_points(
    grid: &HexGrid,
    points: &[PointRecord],
    policy: OutOfBoundsPolicy,
) -> Result<(EmploymentField, DropReport)> {
    let mut field = EmploymentField::zeros(grid);
    let mut report = DropReport::default();
    for (i, p) in points.iter().enumerate() {
        p.validate(i)?;
        if !grid.bbox().contains(p.x, p.y) {
            match policy {
                OutOfBoundsPolicy::Strict => {
                    return Err(Error::OutOfDomain(format!(
                        "record {i} at ({}, {}) lies outside the bounding box",
                        p.x, p.y
                    )));
                }
                OutOfBoundsPolicy::Drop => {
                    report.dropped += 1;
                    report.dropped_weight += p.weight;
                    continue;
                }
            }
        }
        let cell = grid.assign_point(p.x, p.y)?;
        let idx = grid.cell_index(cell)?;
        field.values[idx] += p.weight;
    }
    Ok((field, report))
}

/// Equirectangular lon/lat -> planar miles pre-projection.
#[derive(Debug, Clone, Copy)]
pub struct LonLatProjection {
    pub ref_lat_deg: f64,
}

const EARTH_RADIUS_MI: f64 = 3958.7613;

impl LonLatProjection {
    pub fn to_miles(&self, lon_deg: f64, lat_deg: f64) -> (f64, f64) {
        let x = EARTH_RADIUS_MI * self.ref_lat_deg.to_radians().cos() * lon_deg.to_radians();
        let y = EARTH_RADIUS_MI * lat_deg.to_radians();
        (x, y)
    }
}

/// Coordinate convention of a point CSV.
#[derive(Debug, Clone, Copy)]
pub enum CoordMode {
    /// Columns `x_mi,y_mi,weight`.
    Miles,
    /// Columns `lon,lat,weight`, pre-projected to miles.
    LonLat(LonLatProjection),
}

/// Read a point CSV (`x_mi,y_mi,weight` or `lon,lat,weight`).
pub fn read_points_csv(path: &Path, mode: CoordMode) -> Result<Vec<PointRecord>> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    let find = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h.trim().eq_ignore_ascii_case(name))
            .ok_or_else(|| {
                Error::Data(format!("{}: missing required column `{name}`", path.display()))
            })
    };
    let (ix, iy) = match mode {
        CoordMode::Miles => (find("x_mi")?, find("y_mi")?),
        CoordMode::LonLat(_) => (find("lon")?, find("lat")?),
    };
    let iw = find("weight")?;

    let mut out = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let parse = |i: usize, what: &str| -> Result<f64> {
            record
                .get(i)
                .and_then(|v| v.trim().parse::<f64>().ok())
                .ok_or_else(|| {
                    Error::Data(format!("{}: row {}: unparseable {what}", path.display(), row + 2))
                })
        };
        let a = parse(ix, "x coordinate")?;
        let b = parse(iy, "y coordinate")?;
        let w = parse(iw, "weight")?;
        let (x, y) = match mode {
            CoordMode::Miles => (a, b),
            CoordMode::LonLat(p) => p.to_miles(a, b),
        };
        out.push(PointRecord::new(x, y, w));
    }
    Ok(out)
}

/// Write points in the `x_mi,y_mi,weight` schema.
pub fn write_points_csv(path: &Path, points: &[PointRecord]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(["x_mi", "y_mi", "weight"])?;
    for p in points {
        writer.write_record([p.x.to_string(), p.y.to_string(), p.weight.to_string()])?;
    }
    writer.flush()?;
    Ok(())
}
