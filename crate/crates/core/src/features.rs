//! Supervised dataset construction from a travel-time matrix.
//!
//! Each row predicts the travel time `h` intervals ahead from the `omega`
//! most recent observed intervals plus calendar context, optionally
//! augmented with the latest travel time of the upstream and downstream
//! neighbors. Rows are anchored inside one segment-day, so no window ever
//! straddles the nightly gap.

use chrono::{DateTime, Datelike};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::Error;
use crate::estimation::TravelTimeMatrix;
use crate::Result;

/// Shape of the supervised problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSpec {
    /// Number of lagged travel times per row, in 1..=6.
    pub omega: usize,
    /// Forecast horizon in intervals ahead, in 1..=6.
    pub horizon_steps: usize,
    /// Include lag-1 travel times of the upstream and downstream
    /// neighbors.
    pub spatial: bool,
}

impl FeatureSpec {
    pub fn new(omega: usize, horizon_steps: usize, spatial: bool) -> Result<Self> {
        if !(1..=6).contains(&omega) {
            return Err(Error::validation(format!("omega must lie in 1..=6, got {omega}")));
        }
        if !(1..=6).contains(&horizon_steps) {
            return Err(Error::validation(format!(
                "horizon_steps must lie in 1..=6, got {horizon_steps}"
            )));
        }
        Ok(FeatureSpec { omega, horizon_steps, spatial })
    }

    /// Column names in row order.
    pub fn feature_names(&self) -> Vec<String> {
        let mut names: Vec<String> = (1..=self.omega).map(|k| format!("tt_lag_{k}")).collect();
        names.push("day_of_week".to_string());
        names.push("hour_of_day".to_string());
        if self.spatial {
            names.push("up_tt_lag_1".to_string());
            names.push("down_tt_lag_1".to_string());
        }
        names
    }
}

impl Default for FeatureSpec {
    fn default() -> Self {
        FeatureSpec { omega: 3, horizon_steps: 1, spatial: false }
    }
}

/// Upstream and downstream neighbor ids per segment.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NeighborMap {
    entries: BTreeMap<String, (Option<String>, Option<String>)>,
}

impl NeighborMap {
    pub fn insert(
        &mut self,
        segment_id: impl Into<String>,
        upstream: Option<String>,
        downstream: Option<String>,
    ) {
        self.entries.insert(segment_id.into(), (upstream, downstream));
    }

    pub fn upstream(&self, segment_id: &str) -> Option<&str> {
        self.entries.get(segment_id).and_then(|(u, _)| u.as_deref())
    }

    pub fn downstream(&self, segment_id: &str) -> Option<&str> {
        self.entries.get(segment_id).and_then(|(_, d)| d.as_deref())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Reads a `segment_id,upstream_id,downstream_id` table. Empty cells
    /// mean the segment has no neighbor on that side.
    pub fn from_csv(path: &Path) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| csv_open_error(path, e))?;
        let headers = reader.headers().map_err(|e| csv_open_error(path, e))?.clone();
        let col = |name: &str| -> Result<usize> {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::format(path, None, format!("missing column {name}")))
        };
        let id_col = col("segment_id")?;
        let up_col = col("upstream_id")?;
        let down_col = col("downstream_id")?;
        let mut map = NeighborMap::default();
        for (i, record) in reader.records().enumerate() {
            let line = Some(i as u64 + 2);
            let record = record.map_err(|e| Error::format(path, line, e.to_string()))?;
            let cell = |c: usize| -> Option<String> {
                record.get(c).filter(|s| !s.is_empty()).map(|s| s.to_string())
            };
            let id = cell(id_col)
                .ok_or_else(|| Error::format(path, line, "empty segment_id".to_string()))?;
            if map.entries.contains_key(&id) {
                return Err(Error::format(path, line, format!("duplicate segment_id {id:?}")));
            }
            map.insert(id, cell(up_col), cell(down_col));
        }
        Ok(map)
    }
}

fn csv_open_error(path: &Path, e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            _ => unreachable!(),
        }
    } else {
        Error::format(path, None, e.to_string())
    }
}

/// Where a supervised row came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowOrigin {
    pub segment_id: String,
    /// Interval start (epoch seconds) of the row's most recent lag.
    pub anchor_epoch: i64,
}

/// A feature matrix with aligned targets and per-row provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct SupervisedDataset {
    pub feature_names: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
    pub origins: Vec<RowOrigin>,
}

impl SupervisedDataset {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Distinct segment ids present, in order of first appearance.
    pub fn segment_ids(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for origin in &self.origins {
            if out.last().map(String::as_str) != Some(origin.segment_id.as_str())
                && !out.contains(&origin.segment_id)
            {
                out.push(origin.segment_id.clone());
            }
        }
        out
    }
}

/// Counts of rows kept and dropped while building a dataset.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FeatureBuildReport {
    pub rows_emitted: u64,
    /// Rows skipped because a lag or target cell was missing.
    pub rows_dropped_missing: u64,
    /// Rows skipped because a neighbor cell was missing or the segment
    /// has no neighbor on one side.
    pub rows_dropped_neighbor: u64,
}

/// Weekday of a local epoch, Monday = 1 through Sunday = 7.
pub fn day_index(local_epoch_s: i64) -> Result<u32> {
    let dt = DateTime::from_timestamp(local_epoch_s, 0)
        .ok_or_else(|| Error::validation(format!("epoch {local_epoch_s} out of range")))?;
    Ok(dt.weekday().number_from_monday())
}

/// One-based hour position of a slot within the daily window: slot 0 maps
/// to 1, and each following hour adds 1.
pub fn hour_index(slot: usize, slots_per_day: usize) -> Result<u32> {
    if slot >= slots_per_day {
        return Err(Error::validation(format!(
            "slot {slot} outside daily window of {slots_per_day} slots"
        )));
    }
    Ok((slot / crate::estimation::SLOTS_PER_HOUR) as u32 + 1)
}

/// Builds the supervised dataset for every segment-day in the matrix.
/// Row order is (segment, day, interval), ascending.
pub fn build_supervised(
    matrix: &TravelTimeMatrix,
    spec: &FeatureSpec,
    neighbors: Option<&NeighborMap>,
) -> Result<(SupervisedDataset, FeatureBuildReport)> {
    let neighbors = if spec.spatial {
        Some(neighbors.ok_or_else(|| {
            Error::validation("spatial features requested but no neighbor map given")
        })?)
    } else {
        None
    };
    let ids = matrix.segment_ids();
    let seg_index = |id: &str| -> Result<usize> {
        ids.binary_search_by(|probe| probe.as_str().cmp(id))
            .map_err(|_| Error::validation(format!("neighbor id {id:?} not in matrix")))
    };
    // Resolve neighbor indexes up front so a bad map fails fast.
    let mut neighbor_idx: Vec<(Option<usize>, Option<usize>)> = Vec::new();
    if let Some(map) = neighbors {
        for id in ids {
            let up = map.upstream(id).map(&seg_index).transpose()?;
            let down = map.downstream(id).map(&seg_index).transpose()?;
            neighbor_idx.push((up, down));
        }
    }
    let slots = matrix.window().slots_per_day();
    let omega = spec.omega;
    let h = spec.horizon_steps;
    let mut rows = Vec::new();
    let mut targets = Vec::new();
    let mut origins = Vec::new();
    let mut report = FeatureBuildReport::default();
    let tz_s = i64::from(matrix.tz_offset_min()) * 60;
    for (si, id) in ids.iter().enumerate() {
        for day in 0..matrix.n_days() {
            for s in omega..=slots.saturating_sub(h) {
                let lag_tts: Option<Vec<f64>> =
                    (1..=omega).map(|k| matrix.cell(si, day, s - k).tt_s).collect();
                let target = matrix.cell(si, day, s + h - 1).tt_s;
                let (lags, target) = match (lag_tts, target) {
                    (Some(l), Some(t)) => (l, t),
                    _ => {
                        report.rows_dropped_missing += 1;
                        continue;
                    }
                };
                let anchor_slot = s - 1;
                let anchor_epoch = matrix.interval_start_epoch(day, anchor_slot);
                let day_of_week = day_index(anchor_epoch + tz_s)?;
                let hour_of_day = hour_index(anchor_slot, slots)?;
                let mut row = lags;
                row.push(f64::from(day_of_week));
                row.push(f64::from(hour_of_day));
                if spec.spatial {
                    let (up, down) = neighbor_idx[si];
                    let up_tt = up.and_then(|u| matrix.cell(u, day, anchor_slot).tt_s);
                    let down_tt = down.and_then(|d| matrix.cell(d, day, anchor_slot).tt_s);
                    match (up_tt, down_tt) {
                        (Some(u), Some(d)) => {
                            row.push(u);
                            row.push(d);
                        }
                        _ => {
                            report.rows_dropped_neighbor += 1;
                            continue;
                        }
                    }
                }
                rows.push(row);
                targets.push(target);
                origins.push(RowOrigin { segment_id: id.clone(), anchor_epoch });
                report.rows_emitted += 1;
            }
        }
    }
    let dataset =
        SupervisedDataset { feature_names: spec.feature_names(), rows, targets, origins };
    Ok((dataset, report))
}

/// Writes a dataset as CSV: feature columns, then `target`, `segment_id`,
/// and `interval_start` (the anchor interval's start epoch).
pub fn write_dataset_csv(ds: &SupervisedDataset, path: &Path) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    write_dataset(ds, &mut out).map_err(|e| Error::io(path, e))
}

fn write_dataset(ds: &SupervisedDataset, out: &mut impl Write) -> std::io::Result<()> {
    let mut header: Vec<&str> = ds.feature_names.iter().map(String::as_str).collect();
    header.extend(["target", "segment_id", "interval_start"]);
    writeln!(out, "{}", header.join(","))?;
    for ((row, target), origin) in ds.rows.iter().zip(&ds.targets).zip(&ds.origins) {
        for v in row {
            write!(out, "{v},")?;
        }
        writeln!(out, "{target},{},{}", origin.segment_id, origin.anchor_epoch)?;
    }
    out.flush()
}

/// Reads a dataset written by [`write_dataset_csv`]. Every column before
/// `target` is a feature.
pub fn read_dataset_csv(path: &Path) -> Result<SupervisedDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_open_error(path, e))?;
    let headers = reader.headers().map_err(|e| csv_open_error(path, e))?.clone();
    let cols: Vec<String> = headers.iter().map(|h| h.to_string()).collect();
    let target_pos = cols
        .iter()
        .position(|c| c == "target")
        .ok_or_else(|| Error::format(path, None, "missing target column".to_string()))?;
    if cols.len() != target_pos + 3
        || cols[target_pos + 1] != "segment_id"
        || cols[target_pos + 2] != "interval_start"
    {
        return Err(Error::format(
            path,
            None,
            "expected trailing columns target,segment_id,interval_start".to_string(),
        ));
    }
    if target_pos == 0 {
        return Err(Error::format(path, None, "no feature columns".to_string()));
    }
    let feature_names = cols[..target_pos].to_vec();
    let mut rows = Vec::new();
    let mut targets = Vec::new();
    let mut origins = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = Some(i as u64 + 2);
        let record = record.map_err(|e| Error::format(path, line, e.to_string()))?;
        if record.len() != cols.len() {
            return Err(Error::format(
                path,
                line,
                format!("expected {} fields, found {}", cols.len(), record.len()),
            ));
        }
        let num = |c: usize| -> Result<f64> {
            let raw = record.get(c).unwrap_or("");
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::format(path, line, format!("bad number {raw:?}")))
        };
        let mut row = Vec::with_capacity(target_pos);
        for c in 0..target_pos {
            row.push(num(c)?);
        }
        rows.push(row);
        targets.push(num(target_pos)?);
        let anchor_raw = record.get(target_pos + 2).unwrap_or("");
        let anchor_epoch = anchor_raw
            .parse::<i64>()
            .map_err(|_| Error::format(path, line, format!("bad epoch {anchor_raw:?}")))?;
        origins.push(RowOrigin {
            segment_id: record.get(target_pos + 1).unwrap_or("").to_string(),
            anchor_epoch,
        });
    }
    Ok(SupervisedDataset { feature_names, rows, targets, origins })
}

/// Pearson correlation coefficient. Errors on mismatched or short input
/// and when either side has zero variance.
pub fn pearson_r(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::validation("correlation inputs differ in length"));
    }
    if a.len() < 2 {
        return Err(Error::validation("correlation needs at least two pairs"));
    }
    let n = a.len() as f64;
    let mean_a = a.iter().sum::<f64>() / n;
    let mean_b = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var_a = 0.0;
    let mut var_b = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        let dx = x - mean_a;
        let dy = y - mean_b;
        cov += dx * dy;
        var_a += dx * dx;
        var_b += dy * dy;
    }
    if var_a == 0.0 || var_b == 0.0 {
        return Err(Error::validation("correlation undefined for constant input"));
    }
    Ok(cov / (var_a * var_b).sqrt())
}

/// Correlation of one segment (or the pooled corpus) between an
/// interval's observations and the next interval's travel time.
#[derive(Debug, Clone, PartialEq)]
pub struct ScreenRow {
    /// `None` marks the pooled row over all segments.
    pub segment_id: Option<String>,
    pub n_pairs: u64,
    pub r_tt: Option<f64>,
    pub r_ax: Option<f64>,
    pub r_ay: Option<f64>,
}

/// Correlates travel time and the acceleration summaries at interval `s`
/// with travel time at `s + 1`, per segment and pooled. Pairs with a
/// missing side are skipped; correlations that are undefined (fewer than
/// two pairs, or constant input) come back as `None`.
pub fn screen_features(matrix: &TravelTimeMatrix) -> Vec<ScreenRow> {
    let slots = matrix.window().slots_per_day();
    let mut pooled: [Vec<(f64, f64)>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    let mut out = Vec::new();
    for (si, id) in matrix.segment_ids().iter().enumerate() {
        let mut pairs: [Vec<(f64, f64)>; 3] = [Vec::new(), Vec::new(), Vec::new()];
        for day in 0..matrix.n_days() {
            for s in 0..slots.saturating_sub(1) {
                let next_tt = match matrix.cell(si, day, s + 1).tt_s {
                    Some(v) => v,
                    None => continue,
                };
                let cell = matrix.cell(si, day, s);
                for (k, value) in [cell.tt_s, cell.mean_ax, cell.mean_ay].into_iter().enumerate() {
                    if let Some(v) = value {
                        pairs[k].push((v, next_tt));
                        pooled[k].push((v, next_tt));
                    }
                }
            }
        }
        out.push(screen_row(Some(id.clone()), &pairs));
    }
    out.push(screen_row(None, &pooled));
    out
}

fn screen_row(segment_id: Option<String>, pairs: &[Vec<(f64, f64)>; 3]) -> ScreenRow {
    let r_of = |ps: &Vec<(f64, f64)>| -> Option<f64> {
        let (a, b): (Vec<f64>, Vec<f64>) = ps.iter().copied().unzip();
        pearson_r(&a, &b).ok()
    };
    ScreenRow {
        segment_id,
        n_pairs: pairs[0].len() as u64,
        r_tt: r_of(&pairs[0]),
        r_ax: r_of(&pairs[1]),
        r_ay: r_of(&pairs[2]),
    }
}
