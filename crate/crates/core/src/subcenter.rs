//! Employment sub-center identification.
//!
//! A sub-center is an edge-connected cluster of hexagons whose employment
//! density each strictly exceeds a regional percentile threshold and whose
//! total employment clears a minimum-jobs floor (the "95%-10k" rule with
//! the default parameters).

use std::collections::VecDeque;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::hexgrid::{CellId, EmploymentField, HexGrid, NEIGHBOR_OFFSETS};

/// Which cells enter the density-percentile population.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ThresholdPopulation {
    /// All grid cells, zero-employment cells included (the default).
    #[default]
    AllCells,
    /// Only cells with positive employment, for sensitivity analysis.
    PositiveOnly,
}

/// One identified sub-center.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubCenter {
    /// 1-based rank by total jobs, descending.
    pub rank: u32,
    /// Member cells, sorted lexicographically.
    pub cells: Vec<CellId>,
    pub total_jobs: f64,
    /// Highest member density, jobs per square mile.
    pub peak_density: f64,
}

/// The ranked, disjoint set of sub-centers plus the parameters that
/// produced it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubCenterSet {
    pub centers: Vec<SubCenter>,
    pub threshold_density: f64,
    pub min_total_jobs: f64,
}

impl SubCenterSet {
    /// Rank of the center containing `cell`, if any.
    pub fn rank_of(&self, cell: CellId) -> Option<u32> {
        self.centers
            .iter()
            .find(|c| c.cells.binary_search(&cell).is_ok())
            .map(|c| c.rank)
    }
}

/// Nearest-rank percentile of the per-cell density distribution.
pub fn density_threshold(
    grid: &HexGrid,
    field: &EmploymentField,
    percentile: f64,
    population: ThresholdPopulation,
) -> Result<f64> {
    if !(percentile > 0.0 && percentile < 1.0) {
        return Err(Error::Config(format!(
            "percentile must lie in (0, 1), got {percentile}"
        )));
    }
    if grid.is_empty() {
        return Err(Error::Config("grid has no cells".into()));
    }
    check_field(grid, field)?;

    let mut densities: Vec<f64> = match population {
        ThresholdPopulation::AllCells => field.densities(grid),
        ThresholdPopulation::PositiveOnly => field
            .densities(grid)
            .into_iter()
            .filter(|&d| d > 0.0)
            .collect(),
    };
    if densities.is_empty() {
        return Err(Error::Data(
            "no positive-employment cells; the positive-only percentile is undefined".into(),
        ));
    }
    densities.sort_unstable_by(|a, b| a.partial_cmp(b).expect("densities are finite"));
    let n = densities.len();
    let rank = (percentile * n as f64).ceil() as usize;
    Ok(densities[rank.clamp(1, n) - 1])
}

/// Identify sub-centers: strictly-above-threshold cells, grouped into
/// edge-connected components, kept when their job total clears the floor,
/// ranked by total descending (ties broken by the lexicographically
/// smallest member cell).
pub fn identify_subcenters(
    grid: &HexGrid,
    field: &EmploymentField,
    percentile: f64,
    min_total_jobs: f64,
    population: ThresholdPopulation,
) -> Result<SubCenterSet> {
    if !(min_total_jobs >= 0.0) {
        return Err(Error::Config(format!(
            "minimum total jobs must be nonnegative, got {min_total_jobs}"
        )));
    }
    let threshold = density_threshold(grid, field, percentile, population)?;

    let candidate: Vec<bool> = (0..grid.len())
        .map(|i| field.density(grid, i) > threshold)
        .collect();

    // Flood fill over candidates in fixed cell order.
    let mut visited = vec![false; grid.len()];
    let mut components: Vec<Vec<usize>> = Vec::new();
    for start in 0..grid.len() {
        if !candidate[start] || visited[start] {
            continue;
        }
        let mut members = Vec::new();
        let mut queue = VecDeque::from([start]);
        visited[start] = true;
        while let Some(i) = queue.pop_front() {
            members.push(i);
            let cell = grid.cells()[i];
            for (dq, dr) in NEIGHBOR_OFFSETS {
                let nb = CellId::new(cell.q + dq, cell.r + dr);
                if let Ok(j) = grid.cell_index(nb) {
                    if candidate[j] && !visited[j] {
                        visited[j] = true;
                        queue.push_back(j);
                    }
                }
            }
        }
        members.sort_unstable();
        components.push(members);
    }

    let mut centers: Vec<SubCenter> = components
        .into_iter()
        .filter_map(|members| {
            let total: f64 = members.iter().map(|&i| field.value(i)).sum();
            if total < min_total_jobs {
                return None;
            }
            let peak = members
                .iter()
                .map(|&i| field.density(grid, i))
                .fold(f64::NEG_INFINITY, f64::max);
            Some(SubCenter {
                rank: 0,
                cells: members.iter().map(|&i| grid.cells()[i]).collect(),
                total_jobs: total,
                peak_density: peak,
            })
        })
        .collect();

    centers.sort_by(|a, b| {
        b.total_jobs
            .partial_cmp(&a.total_jobs)
            .expect("totals are finite")
            .then_with(|| a.cells[0].cmp(&b.cells[0]))
    });
    for (i, c) in centers.iter_mut().enumerate() {
        c.rank = (i + 1) as u32;
    }

    Ok(SubCenterSet { centers, threshold_density: threshold, min_total_jobs })
}

/// A half-open partition of ranks `[1, inf)` into intervals.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RankInterval {
    pub lo: u32,
    /// Inclusive upper rank; `None` means unbounded.
    pub hi: Option<u32>,
}

impl RankInterval {
    pub fn contains(&self, rank: u32) -> bool {
        rank >= self.lo && self.hi.map_or(true, |hi| rank <= hi)
    }

    /// Short label used for access column names: `rank1`, `rank2_5`,
    /// `rank3plus`; the full-range interval is `centered`.
    pub fn label(&self) -> String {
        match self.hi {
            Some(hi) if hi == self.lo => format!("rank{}", self.lo),
            Some(hi) => format!("rank{}_{}", self.lo, hi),
            None if self.lo == 1 => "centered".to_string(),
            None => format!("rank{}plus", self.lo),
        }
    }
}

/// Validated rank-grouping scheme: disjoint intervals covering `[1, inf)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RankScheme {
    intervals: Vec<RankInterval>,
}

impl RankScheme {
    pub fn new(mut intervals: Vec<RankInterval>) -> Result<Self> {
        if intervals.is_empty() {
            return Err(Error::Config("rank scheme needs at least one interval".into()));
        }
        intervals.sort_by_key(|iv| iv.lo);
        let mut expected = 1u32;
        for (k, iv) in intervals.iter().enumerate() {
            if iv.lo != expected {
                return Err(Error::Config(format!(
                    "rank intervals must be disjoint and cover [1, inf): \
                     interval {} starts at {} but {} was expected",
                    k + 1,
                    iv.lo,
                    expected
                )));
            }
            match iv.hi {
                Some(hi) if hi < iv.lo => {
                    return Err(Error::Config(format!(
                        "empty rank interval [{}, {}]",
                        iv.lo, hi
                    )));
                }
                Some(hi) => expected = hi + 1,
                None => {
                    if k + 1 != intervals.len() {
                        return Err(Error::Config(
                            "an unbounded rank interval must come last".into(),
                        ));
                    }
                    expected = u32::MAX;
                }
            }
        }
        if expected != u32::MAX {
            return Err(Error::Config(
                "rank intervals must cover [1, inf): add a final open interval like `3+`".into(),
            ));
        }
        Ok(Self { intervals })
    }

    /// Parse `1;2;3+` or `1-2;3+` style grouping strings.
    pub fn parse(text: &str) -> Result<Self> {
        let mut intervals = Vec::new();
        for part in text.split(';').map(str::trim).filter(|p| !p.is_empty()) {
            let iv = if let Some(lo) = part.strip_suffix('+') {
                let lo: u32 = lo.trim().parse().map_err(|_| {
                    Error::Config(format!("bad rank interval `{part}` in `{text}`"))
                })?;
                RankInterval { lo, hi: None }
            } else if let Some((lo, hi)) = part.split_once('-') {
                let lo: u32 = lo.trim().parse().map_err(|_| {
                    Error::Config(format!("bad rank interval `{part}` in `{text}`"))
                })?;
                let hi: u32 = hi.trim().parse().map_err(|_| {
                    Error::Config(format!("bad rank interval `{part}` in `{text}`"))
                })?;
                RankInterval { lo, hi: Some(hi) }
            } else {
                let v: u32 = part.parse().map_err(|_| {
                    Error::Config(format!("bad rank interval `{part}` in `{text}`"))
                })?;
                RankInterval { lo: v, hi: Some(v) }
            };
            intervals.push(iv);
        }
        Self::new(intervals)
    }

    pub fn intervals(&self) -> &[RankInterval] {
        &self.intervals
    }

    pub fn label_of_rank(&self, rank: u32) -> usize {
        self.intervals
            .iter()
            .position(|iv| iv.contains(rank))
            .expect("scheme covers [1, inf)")
    }
}

/// Per-cell sub-center membership label under a rank scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct CellClassification {
    /// For each grid cell: index into the scheme's intervals, or `None`
    /// when the cell is in no center.
    pub labels: Vec<Option<usize>>,
    pub scheme: RankScheme,
}

impl CellClassification {
    /// Boolean mask of cells carrying the given interval label.
    pub fn mask(&self, label: usize) -> Vec<bool> {
        self.labels.iter().map(|l| *l == Some(label)).collect()
    }

    /// Mask of cells belonging to no center.
    pub fn outside_mask(&self) -> Vec<bool> {
        self.labels.iter().map(|l| l.is_none()).collect()
    }
}

/// Label every cell by the rank interval of the center containing it.
pub fn classify_cells(
    grid: &HexGrid,
    centers: &SubCenterSet,
    scheme: &RankScheme,
) -> Result<CellClassification> {
    let mut labels = vec![None; grid.len()];
    for center in &centers.centers {
        let label = scheme.label_of_rank(center.rank);
        for &cell in &center.cells {
            let idx = grid.cell_index(cell)?;
            labels[idx] = Some(label);
        }
    }
    Ok(CellClassification { labels, scheme: scheme.clone() })
}

fn check_field(grid: &HexGrid, field: &EmploymentField) -> Result<()> {
    if field.values().len() != grid.len() {
        return Err(Error::Data(format!(
            "field length {} does not match grid cell count {}",
            field.values().len(),
            grid.len()
        )));
    }
    Ok(())
}

/// `centers.csv`: one row per member cell.
pub fn write_centers_csv(path: &Path, set: &SubCenterSet) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(["cell_q", "cell_r", "center_rank", "center_total_jobs"])?;
    for center in &set.centers {
        for cell in &center.cells {
            writer.write_record([
                cell.q.to_string(),
                cell.r.to_string(),
                center.rank.to_string(),
                center.total_jobs.to_string(),
            ])?;
        }
    }
    writer.flush()?;
    Ok(())
}

/// Read the per-cell ranks back from `centers.csv`.
pub fn read_centers_csv(path: &Path) -> Result<Vec<(CellId, u32)>> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let get = |i: usize| -> Result<&str> {
            record.get(i).ok_or_else(|| {
                Error::Data(format!("{}: row {}: too few columns", path.display(), row + 2))
            })
        };
        let q: i32 = get(0)?.trim().parse().map_err(|_| {
            Error::Data(format!("{}: row {}: bad cell_q", path.display(), row + 2))
        })?;
        let r: i32 = get(1)?.trim().parse().map_err(|_| {
            Error::Data(format!("{}: row {}: bad cell_r", path.display(), row + 2))
        })?;
        let rank: u32 = get(2)?.trim().parse().map_err(|_| {
            Error::Data(format!("{}: row {}: bad center_rank", path.display(), row + 2))
        })?;
        out.push((CellId::new(q, r), rank));
    }
    Ok(out)
}

/// Summary JSON payload for a sub-center run.
#[derive(Debug, Serialize)]
pub struct CentersSummary {
    pub threshold_density: f64,
    pub min_total_jobs: f64,
    pub n_centers: usize,
    pub centers: Vec<CenterSummaryRow>,
}

#[derive(Debug, Serialize)]
pub struct CenterSummaryRow {
    pub rank: u32,
    pub total_jobs: f64,
    pub n_cells: usize,
    pub peak_density: f64,
}

impl CentersSummary {
    pub fn from_set(set: &SubCenterSet) -> Self {
        Self {
            threshold_density: set.threshold_density,
            min_total_jobs: set.min_total_jobs,
            n_centers: set.centers.len(),
            centers: set
                .centers
                .iter()
                .map(|c| CenterSummaryRow {
                    rank: c.rank,
                    total_jobs: c.total_jobs,
                    n_cells: c.cells.len(),
                    peak_density: c.peak_density,
                })
                .collect(),
        }
    }
}
