//! Household survey ingestion and design-matrix construction.
//!
//! Samples are column-oriented numeric tables. Loading applies the VMT
//! outlier cap and listwise deletion of rows with missing values, reporting
//! both drop counts. Income enters models as nine category dummies against
//! the lowest category.

use std::collections::HashMap;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::hexgrid::CellId;

pub const DEFAULT_OUTLIER_CAP: f64 = 200.0;

/// Column-oriented household table with ingestion accounting.
#[derive(Debug, Clone)]
pub struct HouseholdSample {
    columns: Vec<String>,
    data: Vec<Vec<f64>>,
    pub n_read: usize,
    pub n_dropped_outlier: usize,
    pub n_dropped_missing: usize,
}

impl HouseholdSample {
    pub fn from_columns(columns: Vec<(String, Vec<f64>)>) -> Result<Self> {
        let n = columns.first().map(|(_, v)| v.len()).unwrap_or(0);
        if columns.iter().any(|(_, v)| v.len() != n) {
            return Err(Error::Data("sample columns have unequal lengths".into()));
        }
        let (names, data) = columns.into_iter().unzip();
        Ok(Self {
            columns: names,
            data,
            n_read: n,
            n_dropped_outlier: 0,
            n_dropped_missing: 0,
        })
    }

    pub fn n(&self) -> usize {
        self.data.first().map(|c| c.len()).unwrap_or(0)
    }

    pub fn column_names(&self) -> &[String] {
        &self.columns
    }

    pub fn has_column(&self, name: &str) -> bool {
        self.columns.iter().any(|c| c == name)
    }

    pub fn column(&self, name: &str) -> Result<&[f64]> {
        let idx = self
            .columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))?;
        Ok(&self.data[idx])
    }

    /// Fraction of rows at the censor point (VMT exactly zero).
    pub fn censoring_share(&self) -> Result<f64> {
        let vmt = self.column("vmt")?;
        if vmt.is_empty() {
            return Ok(0.0);
        }
        Ok(vmt.iter().filter(|&&v| v == 0.0).count() as f64 / vmt.len() as f64)
    }

    /// Append a derived column (e.g. joined access values).
    pub fn attach(&mut self, name: &str, values: Vec<f64>) -> Result<()> {
        if values.len() != self.n() {
            return Err(Error::Data(format!(
                "attached column `{name}` has {} values for {} rows",
                values.len(),
                self.n()
            )));
        }
        if self.has_column(name) {
            return Err(Error::Data(format!("column `{name}` already present")));
        }
        self.columns.push(name.to_string());
        self.data.push(values);
        Ok(())
    }

    /// Keep only rows where `keep` is true.
    pub fn filter(&self, keep: &[bool]) -> Result<Self> {
        if keep.len() != self.n() {
            return Err(Error::Data("filter mask length mismatch".into()));
        }
        let data = self
            .data
            .iter()
            .map(|col| {
                col.iter()
                    .zip(keep)
                    .filter_map(|(&v, &k)| k.then_some(v))
                    .collect::<Vec<f64>>()
            })
            .collect();
        Ok(Self {
            columns: self.columns.clone(),
            data,
            n_read: self.n_read,
            n_dropped_outlier: self.n_dropped_outlier,
            n_dropped_missing: self.n_dropped_missing,
        })
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut writer = csv::Writer::from_path(path)?;
        writer.write_record(&self.columns)?;
        for row in 0..self.n() {
            let rec: Vec<String> = self.data.iter().map(|col| col[row].to_string()).collect();
            writer.write_record(&rec)?;
        }
        writer.flush()?;
        Ok(())
    }
}

/// Load a household CSV, dropping outliers (VMT at or above the cap) and
/// rows with any missing or unparseable field (listwise deletion). Both
/// counts are recorded on the returned sample.
pub fn load_households(path: &Path, outlier_cap: f64) -> Result<HouseholdSample> {
    if !(outlier_cap > 0.0) {
        return Err(Error::Config(format!("outlier cap must be positive, got {outlier_cap}")));
    }
    let mut reader = csv::Reader::from_path(path)?;
    let headers: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let vmt_idx = headers.iter().position(|h| h == "vmt").ok_or_else(|| {
        Error::Data(format!("{}: missing required column `vmt`", path.display()))
    })?;

    let mut data: Vec<Vec<f64>> = vec![Vec::new(); headers.len()];
    let mut n_read = 0usize;
    let mut n_missing = 0usize;
    let mut n_outlier = 0usize;

    'rows: for record in reader.records() {
        let record = record?;
        n_read += 1;
        let mut parsed = Vec::with_capacity(headers.len());
        for i in 0..headers.len() {
            match record.get(i).map(str::trim) {
                Some(s) if !s.is_empty() => match s.parse::<f64>() {
                    Ok(v) if v.is_finite() => parsed.push(v),
                    _ => {
                        n_missing += 1;
                        continue 'rows;
                    }
                },
                _ => {
                    n_missing += 1;
                    continue 'rows;
                }
            }
        }
        let vmt = parsed[vmt_idx];
        if vmt < 0.0 {
            n_missing += 1;
            continue;
        }
        if vmt >= outlier_cap {
            n_outlier += 1;
            continue;
        }
        for (col, v) in data.iter_mut().zip(parsed) {
            col.push(v);
        }
    }

    if data[vmt_idx].is_empty() {
        return Err(Error::Data(format!(
            "{}: no rows retained after filtering ({} read, {} missing, {} outliers)",
            path.display(),
            n_read,
            n_missing,
            n_outlier
        )));
    }

    Ok(HouseholdSample {
        columns: headers,
        data,
        n_read,
        n_dropped_outlier: n_outlier,
        n_dropped_missing: n_missing,
    })
}

/// Join per-cell columns onto households via their residence cell
/// (`cell_q`, `cell_r`). Access is read from the hexagon of residence; no
/// sub-cell interpolation.
pub fn attach_access(
    sample: &mut HouseholdSample,
    cells: &[CellId],
    columns: &[(String, Vec<f64>)],
) -> Result<()> {
    let lookup: HashMap<CellId, usize> =
        cells.iter().enumerate().map(|(i, &c)| (c, i)).collect();
    let row_cells: Vec<CellId> = {
        let qs = sample.column("cell_q")?;
        let rs = sample.column("cell_r")?;
        qs.iter()
            .zip(rs)
            .map(|(&q, &r)| {
                if q.fract() != 0.0 || r.fract() != 0.0 {
                    return Err(Error::Data(format!(
                        "non-integer residence cell ({q}, {r})"
                    )));
                }
                Ok(CellId::new(q as i32, r as i32))
            })
            .collect::<Result<_>>()?
    };

    for (name, values) in columns {
        if values.len() != cells.len() {
            return Err(Error::Data(format!(
                "access column `{name}` has {} values for {} cells",
                values.len(),
                cells.len()
            )));
        }
        let joined: Vec<f64> = row_cells
            .iter()
            .map(|cell| {
                lookup
                    .get(cell)
                    .map(|&i| values[i])
                    .ok_or(Error::UnknownCell { q: cell.q, r: cell.r })
            })
            .collect::<Result<_>>()?;
        sample.attach(name, joined)?;
    }
    Ok(())
}

/// Which columns play which role in the regression.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelSpec {
    pub response: String,
    pub access: Vec<String>,
    pub controls: Vec<String>,
    pub instruments: Vec<String>,
}

/// A ready-to-fit design: intercept first, then access columns, then
/// expanded controls. `access_idx` points at the access columns inside `x`.
#[derive(Debug, Clone)]
pub struct Design {
    pub names: Vec<String>,
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub access_idx: Vec<usize>,
    pub instruments: DMatrix<f64>,
    pub instrument_names: Vec<String>,
}

const INCOME_CATEGORIES: usize = 10;

/// Build the design matrix. The `income_cat` control expands into dummies
/// for categories 2..=10 (category 1 is the reference).
pub fn build_design(sample: &HouseholdSample, spec: &ModelSpec) -> Result<Design> {
    let n = sample.n();
    if n == 0 {
        return Err(Error::Data("sample has no rows".into()));
    }
    let y = DVector::from_column_slice(sample.column(&spec.response)?);

    let mut names = vec!["intercept".to_string()];
    let mut cols: Vec<Vec<f64>> = vec![vec![1.0; n]];
    let mut access_idx = Vec::new();

    for name in &spec.access {
        access_idx.push(cols.len());
        names.push(name.clone());
        cols.push(sample.column(name)?.to_vec());
    }

    for name in &spec.controls {
        if name == "income_cat" {
            let raw = sample.column(name)?;
            for (i, &v) in raw.iter().enumerate() {
                if v.fract() != 0.0 || !(1.0..=INCOME_CATEGORIES as f64).contains(&v) {
                    return Err(Error::Data(format!(
                        "row {i}: income category {v} outside 1..={INCOME_CATEGORIES}"
                    )));
                }
            }
            for cat in 2..=INCOME_CATEGORIES {
                names.push(format!("income_cat_{cat}"));
                cols.push(raw.iter().map(|&v| if v as usize == cat { 1.0 } else { 0.0 }).collect());
            }
        } else {
            names.push(name.clone());
            cols.push(sample.column(name)?.to_vec());
        }
    }

    let p = cols.len();
    let x = DMatrix::from_fn(n, p, |i, j| cols[j][i]);

    let m = spec.instruments.len();
    let mut instruments = DMatrix::zeros(n, m);
    for (k, name) in spec.instruments.iter().enumerate() {
        let col = sample.column(name)?;
        for i in 0..n {
            instruments[(i, k)] = col[i];
        }
    }

    Ok(Design {
        names,
        x,
        y,
        access_idx,
        instruments,
        instrument_names: spec.instruments.clone(),
    })
}
