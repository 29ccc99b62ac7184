//! From raw BSM stamps to a travel-time matrix.
//!
//! The pipeline is: parse, partition by longitude slice, match and
//! aggregate each partition independently, merge, build the matrix,
//! interpolate gaps. Per-cell means use exact integer accumulation
//! (values quantized once to 1e-6 units, summed in i128), so the result
//! is bit-identical no matter how the stream is partitioned or how many
//! workers run, and merging partitions is lossless.

mod bsm;
mod matrix;

pub use bsm::{read_bsm_file, BsmRecord, BsmStream, ReductionReport, REQUIRED_COLUMNS};
pub use matrix::{
    build_matrix, interpolate_missing, interval_to_slot, read_matrix_csv, read_matrix_file,
    write_matrix_csv, write_matrix_file, BuildStats, Cell, DayWindow, InterpolationReport, SlotRef,
    TravelTimeMatrix, INTERVAL_S, SLOTS_PER_HOUR,
};

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;

use crate::error::Error;
use crate::geodata::{match_point_idx, MatchGates, Segment};
use crate::Result;

/// Quantization scale for exact accumulation: one micro-unit.
const MICRO: f64 = 1e6;

fn quantize(v: f64) -> i64 {
    (v * MICRO).round() as i64
}

/// Geographic bounding box in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub lat_min: f64,
    pub lat_max: f64,
    pub lon_min: f64,
    pub lon_max: f64,
}

impl BoundingBox {
    pub fn new(lat_min: f64, lat_max: f64, lon_min: f64, lon_max: f64) -> Result<Self> {
        if !(lat_min < lat_max && lon_min < lon_max) {
            return Err(Error::validation(format!(
                "degenerate bounding box: lat {lat_min}..{lat_max} lon {lon_min}..{lon_max}"
            )));
        }
        Ok(BoundingBox { lat_min, lat_max, lon_min, lon_max })
    }

    /// Bounding box of all segment vertices, padded where degenerate so
    /// that partitioning stays well-defined for single-point extents.
    pub fn from_segments(segments: &[Segment]) -> Result<Self> {
        let mut vertices = segments.iter().flat_map(|s| s.polyline.iter());
        let first = vertices
            .next()
            .ok_or_else(|| Error::validation("cannot derive a bounding box from zero segments"))?;
        let (mut lat_min, mut lat_max, mut lon_min, mut lon_max) =
            (first.lat, first.lat, first.lon, first.lon);
        for v in vertices {
            lat_min = lat_min.min(v.lat);
            lat_max = lat_max.max(v.lat);
            lon_min = lon_min.min(v.lon);
            lon_max = lon_max.max(v.lon);
        }
        const PAD: f64 = 5e-4;
        if lat_max - lat_min < 1e-9 {
            lat_min -= PAD;
            lat_max += PAD;
        }
        if lon_max - lon_min < 1e-9 {
            lon_min -= PAD;
            lon_max += PAD;
        }
        BoundingBox::new(lat_min, lat_max, lon_min, lon_max)
    }
}

/// Longitude-slice partition index for a record. Records outside the box
/// clamp to the nearest slice, so the key is total.
pub fn partition_key(record: &BsmRecord, n_partitions: usize, bbox: &BoundingBox) -> usize {
    debug_assert!(n_partitions >= 1);
    let frac = (record.lon - bbox.lon_min) / (bbox.lon_max - bbox.lon_min);
    let idx = (frac * n_partitions as f64).floor() as i64;
    idx.clamp(0, n_partitions as i64 - 1) as usize
}

/// Aggregated stamps for one `(segment, 5-minute interval)` cell.
///
/// Means are exposed as derived values; internally the cell carries exact
/// micro-unit sums so that merging partitions is associative and lossless.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntervalAggregate {
    pub segment_id: String,
    /// `floor(time_s / 300)`.
    pub interval_index: i64,
    pub n_stamps: u64,
    speed_sum_micro: i128,
    ax_sum_micro: i128,
    ay_sum_micro: i128,
}

impl IntervalAggregate {
    /// Builds an aggregate from already-computed means, e.g. when merging
    /// data produced elsewhere. Means are quantized to 1e-6.
    pub fn from_means(
        segment_id: impl Into<String>,
        interval_index: i64,
        mean_speed_mps: f64,
        mean_ax: f64,
        mean_ay: f64,
        n_stamps: u64,
    ) -> Self {
        let n = n_stamps as i128;
        IntervalAggregate {
            segment_id: segment_id.into(),
            interval_index,
            n_stamps,
            speed_sum_micro: quantize(mean_speed_mps) as i128 * n,
            ax_sum_micro: quantize(mean_ax) as i128 * n,
            ay_sum_micro: quantize(mean_ay) as i128 * n,
        }
    }

    pub fn mean_speed_mps(&self) -> f64 {
        self.speed_sum_micro as f64 / (MICRO * self.n_stamps as f64)
    }

    pub fn mean_ax(&self) -> f64 {
        self.ax_sum_micro as f64 / (MICRO * self.n_stamps as f64)
    }

    pub fn mean_ay(&self) -> f64 {
        self.ay_sum_micro as f64 / (MICRO * self.n_stamps as f64)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct CellAccum {
    speed: i128,
    ax: i128,
    ay: i128,
    n: u64,
}

impl CellAccum {
    fn add_record(&mut self, r: &BsmRecord) {
        self.speed += quantize(r.speed_mps) as i128;
        self.ax += quantize(r.ax) as i128;
        self.ay += quantize(r.ay) as i128;
        self.n += 1;
    }

    fn merge(&mut self, agg: &IntervalAggregate) {
        self.speed += agg.speed_sum_micro;
        self.ax += agg.ax_sum_micro;
        self.ay += agg.ay_sum_micro;
        self.n += agg.n_stamps;
    }
}

/// Result of aggregating one partition's records.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionAggregates {
    /// Sorted by `(segment_id, interval_index)`.
    pub aggregates: Vec<IntervalAggregate>,
    pub matched_stamps: u64,
    pub unmatched_stamps: u64,
}

/// Matches every record of one partition and folds it into its
/// `(segment, interval)` cell. Unmatched records are counted and dropped.
pub fn aggregate_partition(
    records: impl IntoIterator<Item = BsmRecord>,
    segments: &[Segment],
    gates: &MatchGates,
) -> PartitionAggregates {
    let mut cells: BTreeMap<(usize, i64), CellAccum> = BTreeMap::new();
    let mut matched = 0u64;
    let mut unmatched = 0u64;
    for record in records {
        match match_point_idx(record.lat, record.lon, record.heading_deg, segments, gates) {
            Some((seg, _, _)) => {
                matched += 1;
                let interval = record.time_s.div_euclid(INTERVAL_S as f64) as i64;
                cells.entry((seg, interval)).or_default().add_record(&record);
            }
            None => unmatched += 1,
        }
    }
    let mut aggregates: Vec<IntervalAggregate> = cells
        .into_iter()
        .map(|((seg, interval_index), acc)| IntervalAggregate {
            segment_id: segments[seg].id.clone(),
            interval_index,
            n_stamps: acc.n,
            speed_sum_micro: acc.speed,
            ax_sum_micro: acc.ax,
            ay_sum_micro: acc.ay,
        })
        .collect();
    aggregates.sort_by(|a, b| (&a.segment_id, a.interval_index).cmp(&(&b.segment_id, b.interval_index)));
    PartitionAggregates { aggregates, matched_stamps: matched, unmatched_stamps: unmatched }
}

/// Combines per-partition aggregates. Cells sharing
/// `(segment_id, interval_index)` merge by stamp-count-weighted mean;
/// because cells carry exact sums, the result is identical to
/// single-partition processing of the concatenated input.
pub fn merge_partitions(parts: &[Vec<IntervalAggregate>]) -> Vec<IntervalAggregate> {
    let mut cells: BTreeMap<(String, i64), CellAccum> = BTreeMap::new();
    for part in parts {
        for agg in part {
            cells
                .entry((agg.segment_id.clone(), agg.interval_index))
                .or_default()
                .merge(agg);
        }
    }
    cells
        .into_iter()
        .map(|((segment_id, interval_index), acc)| IntervalAggregate {
            segment_id,
            interval_index,
            n_stamps: acc.n,
            speed_sum_micro: acc.speed,
            ax_sum_micro: acc.ax,
            ay_sum_micro: acc.ay,
        })
        .collect()
}

/// Knobs for the end-to-end estimation pipeline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineConfig {
    pub gates: MatchGates,
    pub n_partitions: usize,
    pub window: DayWindow,
    pub tz_offset_min: i32,
    pub v_floor_mps: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            gates: MatchGates::default(),
            n_partitions: 1,
            window: DayWindow::default(),
            tz_offset_min: 0,
            v_floor_mps: 0.5,
        }
    }
}

/// Stamp accounting across the whole pipeline. Every parsed stamp is
/// matched or dropped-with-reason; nothing vanishes silently.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PipelineReport {
    pub parse: ReductionReport,
    pub matched_stamps: u64,
    pub unmatched_stamps: u64,
    pub build: BuildStats,
    pub interpolation: InterpolationReport,
}

/// Runs partition, aggregate, merge, build and interpolate over
/// already-parsed records. Partitions are processed in parallel; output is
/// independent of partition count and worker count.
pub fn estimate_from_records(
    records: Vec<BsmRecord>,
    segments: &[Segment],
    config: &PipelineConfig,
    parse_report: ReductionReport,
) -> Result<(TravelTimeMatrix, PipelineReport)> {
    if config.n_partitions == 0 {
        return Err(Error::validation("n_partitions must be at least 1"));
    }
    let bbox = BoundingBox::from_segments(segments)?;
    let mut partitions: Vec<Vec<BsmRecord>> = (0..config.n_partitions).map(|_| Vec::new()).collect();
    for record in records {
        let key = partition_key(&record, config.n_partitions, &bbox);
        partitions[key].push(record);
    }
    let parts: Vec<PartitionAggregates> = partitions
        .into_par_iter()
        .map(|part| aggregate_partition(part, segments, &config.gates))
        .collect();
    let mut report = PipelineReport { parse: parse_report, ..PipelineReport::default() };
    for p in &parts {
        report.matched_stamps += p.matched_stamps;
        report.unmatched_stamps += p.unmatched_stamps;
    }
    let merged = merge_partitions(&parts.iter().map(|p| p.aggregates.clone()).collect::<Vec<_>>());
    let (mut matrix, build) = build_matrix(&merged, segments, config.window, config.tz_offset_min, config.v_floor_mps)?;
    report.build = build;
    report.interpolation = interpolate_missing(&mut matrix);
    Ok((matrix, report))
}

/// File-level entry point: parses every BSM file (each subject to the
/// malformed-majority check), then runs the pipeline.
pub fn estimate_from_files(
    paths: &[impl AsRef<Path>],
    segments: &[Segment],
    config: &PipelineConfig,
) -> Result<(TravelTimeMatrix, PipelineReport)> {
    if paths.is_empty() {
        return Err(Error::validation("no BSM input files"));
    }
    let mut records = Vec::new();
    let mut parse = ReductionReport::default();
    for path in paths {
        let (mut file_records, file_report) = read_bsm_file(path)?;
        records.append(&mut file_records);
        parse.absorb(&file_report);
    }
    estimate_from_records(records, segments, config, parse)
}
