//! Gravity accessibility indices.
//!
//! The employment index for cell i sums jobs over all other cells with
//! quadratic distance damping, adds the own-cell jobs undamped, and divides
//! by a reporting scale (10,000 by default):
//!
//! ```text
//! acc_i = ( sum_{j != i} E_j / D_ij^2  +  E_i ) / scale
//! ```
//!
//! Instrument layers use the same kernel with binary weights and no scale,
//! plus a first-power inverse distance to a single anchor cell. Sums are
//! accumulated in fixed cell order with Neumaier compensation so parallel
//! and serial runs agree.

use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hexgrid::{CellId, EmploymentField, HexGrid};
use crate::numeric::KahanSum;
use crate::subcenter::CellClassification;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum AccessKind {
    EmploymentGravity,
    AmenityGravity,
    AnchorInverseDistance,
}

/// A per-cell accessibility vector, dense in grid cell order.
#[derive(Debug, Clone, PartialEq)]
pub struct AccessVector {
    pub values: Vec<f64>,
    pub kind: AccessKind,
    /// Divisor applied to the gravity sum (10,000 for employment, 1 otherwise).
    pub scale: f64,
    /// Human-readable description of which source cells were counted.
    pub mask_desc: String,
}

impl AccessVector {
    pub fn value(&self, idx: usize) -> f64 {
        self.values[idx]
    }
}

/// Per-cell binary indicator layer (historic stations, lines, highways).
#[derive(Debug, Clone, PartialEq)]
pub struct AmenityField {
    values: Vec<f64>,
}

impl AmenityField {
    pub fn new(grid: &HexGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Data(format!(
                "amenity field length {} does not match grid cell count {}",
                values.len(),
                grid.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| **v != 0.0 && **v != 1.0) {
            return Err(Error::Data(format!(
                "amenity indicators must be exactly 0 or 1, got {v}"
            )));
        }
        Ok(Self { values })
    }

    /// Mark cells containing at least one of the given points.
    pub fn from_points(grid: &HexGrid, points: &[(f64, f64)]) -> Result<Self> {
        let mut values = vec![0.0; grid.len()];
        for &(x, y) in points {
            if !grid.bbox().contains(x, y) {
                continue; // historic layers may extend past the study area
            }
            let idx = grid.cell_index(grid.assign_point(x, y)?)?;
            values[idx] = 1.0;
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Gravity index over the masked source cells (Eq. 1 kernel).
pub fn gravity_access(
    grid: &HexGrid,
    field: &EmploymentField,
    mask: &[bool],
    scale: f64,
    mask_desc: &str,
) -> Result<AccessVector> {
    if !(scale > 0.0) {
        return Err(Error::Config(format!("access scale must be positive, got {scale}")));
    }
    if field.values().len() != grid.len() || mask.len() != grid.len() {
        return Err(Error::Data(
            "field/mask length does not match grid cell count".into(),
        ));
    }

    let n = grid.len();
    let values: Result<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let (xi, yi) = grid.centroid_at(i);
            let mut acc = KahanSum::new();
            for j in 0..n {
                if !mask[j] {
                    continue;
                }
                let e = field.value(j);
                if e == 0.0 {
                    continue;
                }
                if j == i {
                    acc.add(e);
                    continue;
                }
                let (xj, yj) = grid.centroid_at(j);
                let d2 = (xi - xj).powi(2) + (yi - yj).powi(2);
                if d2 == 0.0 {
                    return Err(Error::Data(format!(
                        "cells {:?} and {:?} have coincident centroids",
                        grid.cells()[i],
                        grid.cells()[j]
                    )));
                }
                acc.add(e / d2);
            }
            Ok(acc.total() / scale)
        })
        .collect();

    Ok(AccessVector {
        values: values?,
        kind: AccessKind::EmploymentGravity,
        scale,
        mask_desc: mask_desc.to_string(),
    })
}

/// Access to all jobs plus one vector per classification label plus the
/// outside remainder. The labeled vectors and the outside vector partition
/// the all-jobs vector cell-wise.
pub fn partition_access(
    grid: &HexGrid,
    field: &EmploymentField,
    classification: &CellClassification,
    scale: f64,
) -> Result<Vec<(String, AccessVector)>> {
    if classification.labels.len() != grid.len() {
        return Err(Error::Data(format!(
            "classification covers {} cells but the grid has {}",
            classification.labels.len(),
            grid.len()
        )));
    }

    let mut out = Vec::new();
    let all_mask = vec![true; grid.len()];
    out.push(("all".to_string(), gravity_access(grid, field, &all_mask, scale, "all cells")?));

    for (label, interval) in classification.scheme.intervals().iter().enumerate() {
        let mask = classification.mask(label);
        let name = interval.label();
        let desc = format!("centers with rank in {name}");
        out.push((name, gravity_access(grid, field, &mask, scale, &desc)?));
    }

    let outside = classification.outside_mask();
    out.push((
        "outside".to_string(),
        gravity_access(grid, field, &outside, scale, "cells outside all centers")?,
    ));

    Ok(out)
}

/// Instrument gravity index over a binary layer (Eq. 3): unit weights,
/// no scale divisor, own-cell indicator undamped.
pub fn amenity_access(grid: &HexGrid, amenity: &AmenityField) -> Result<AccessVector> {
    let field = EmploymentField::new(grid, amenity.values().to_vec())?;
    let mask = vec![true; grid.len()];
    let mut v = gravity_access(grid, &field, &mask, 1.0, "binary amenity layer")?;
    v.kind = AccessKind::AmenityGravity;
    Ok(v)
}

/// First-power inverse distance to an anchor cell; the anchor's own value
/// is 1 by convention.
pub fn anchor_inverse_distance(grid: &HexGrid, anchor: CellId) -> Result<AccessVector> {
    let a = grid.cell_index(anchor)?;
    let (ax, ay) = grid.centroid_at(a);
    let values: Vec<f64> = (0..grid.len())
        .map(|i| {
            if i == a {
                1.0
            } else {
                let (x, y) = grid.centroid_at(i);
                1.0 / ((x - ax).powi(2) + (y - ay).powi(2)).sqrt()
            }
        })
        .collect();
    Ok(AccessVector {
        values,
        kind: AccessKind::AnchorInverseDistance,
        scale: 1.0,
        mask_desc: format!("inverse distance to anchor cell ({}, {})", anchor.q, anchor.r),
    })
}

/// Rank cells ascending and split into k classes; class c holds ranks in
/// ((c-1)*n/k, c*n/k]. Tied values all take the class of the tie run's
/// first occurrence in the (value, cell id) sort.
pub fn quantile_classes(grid: &HexGrid, v: &AccessVector, k: usize) -> Result<Vec<u32>> {
    if k < 2 {
        return Err(Error::Config(format!("quantile count must be at least 2, got {k}")));
    }
    let n = v.values.len();
    if n < k {
        return Err(Error::Config(format!(
            "cannot split {n} cells into {k} quantile classes"
        )));
    }
    if n != grid.len() {
        return Err(Error::Data("access vector length does not match grid".into()));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        v.values[a]
            .partial_cmp(&v.values[b])
            .expect("access values are finite")
            .then_with(|| grid.cells()[a].cmp(&grid.cells()[b]))
    });

    let mut classes = vec![0u32; n];
    let mut run_start = 0;
    for t in 0..n {
        if v.values[order[t]] != v.values[order[run_start]] {
            run_start = t;
        }
        // nearest-rank class of the run's first element (1-based rank)
        classes[order[t]] = (((run_start + 1) * k + n - 1) / n) as u32;
    }
    Ok(classes)
}

/// `access.csv`: `cell_q,cell_r` plus one column per named vector.
pub fn write_access_csv(
    path: &Path,
    grid: &HexGrid,
    named: &[(String, AccessVector)],
) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    let mut header = vec!["cell_q".to_string(), "cell_r".to_string()];
    header.extend(named.iter().map(|(name, _)| name.clone()));
    writer.write_record(&header)?;
    for (i, cell) in grid.cells().iter().enumerate() {
        let mut row = vec![cell.q.to_string(), cell.r.to_string()];
        row.extend(named.iter().map(|(_, v)| v.values[i].to_string()));
        writer.write_record(&row)?;
    }
    writer.flush()?;
    Ok(())
}

/// Read `access.csv` back into named per-cell columns.
pub fn read_access_csv(path: &Path) -> Result<(Vec<CellId>, Vec<(String, Vec<f64>)>)> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    if headers.len() < 3 || &headers[0] != "cell_q" || &headers[1] != "cell_r" {
        return Err(Error::Data(format!(
            "{}: expected header starting with cell_q,cell_r",
            path.display()
        )));
    }
    let names: Vec<String> = headers.iter().skip(2).map(str::to_string).collect();
    let mut cells = Vec::new();
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); names.len()];
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let bad = |what: &str| {
            Error::Data(format!("{}: row {}: bad {what}", path.display(), row + 2))
        };
        let q: i32 = record
            .get(0)
            .and_then(|v| v.trim().parse().ok())
            .ok_or_else(|| bad("cell_q"))?;
        let r: i32 = record
            .get(1)
            .and_then(|v| v.trim().parse().ok())
            .ok_or_else(|| bad("cell_r"))?;
        cells.push(CellId::new(q, r));
        for (k, col) in columns.iter_mut().enumerate() {
            let v: f64 = record
                .get(k + 2)
                .and_then(|v| v.trim().parse().ok())
                .ok_or_else(|| bad(&names[k]))?;
            col.push(v);
        }
    }
    Ok((cells, names.into_iter().zip(columns).collect()))
}
