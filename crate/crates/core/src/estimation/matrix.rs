//! Travel-time matrix: segments x 5-minute intervals inside a daily window.
//!
//! The matrix is a dense grid over whole local days. Cells outside the
//! window do not exist; a `(5, 20)` window has 180 slots per day. Cell
//! identity on disk is `(segment_id, interval_start_epoch)`.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::error::Error;
use crate::estimation::IntervalAggregate;
use crate::geodata::Segment;
use crate::Result;

/// Seconds per aggregation interval.
pub const INTERVAL_S: i64 = 300;

/// Aggregation intervals per hour.
pub const SLOTS_PER_HOUR: usize = (3600 / INTERVAL_S) as usize;

const SECONDS_PER_DAY: i64 = 86_400;

/// Daily processing window in whole local hours, half-open.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DayWindow {
    pub start_hour: u8,
    pub end_hour: u8,
}

impl Default for DayWindow {
    fn default() -> Self {
        DayWindow { start_hour: 5, end_hour: 20 }
    }
}

impl DayWindow {
    pub fn new(start_hour: u8, end_hour: u8) -> Result<Self> {
        if start_hour >= end_hour || end_hour > 24 {
            return Err(Error::validation(format!(
                "day window must satisfy start < end <= 24, got {start_hour}..{end_hour}"
            )));
        }
        Ok(DayWindow { start_hour, end_hour })
    }

    pub fn slots_per_day(&self) -> usize {
        (self.end_hour - self.start_hour) as usize * (3600 / INTERVAL_S as usize)
    }
}

/// One matrix cell. `tt_s` is missing until observed or interpolated;
/// accelerations exist only for observed cells.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Cell {
    pub tt_s: Option<f64>,
    pub mean_ax: Option<f64>,
    pub mean_ay: Option<f64>,
    pub n_stamps: u64,
    pub interpolated: bool,
}

/// Dense per-segment, per-interval travel-time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TravelTimeMatrix {
    segment_ids: Vec<String>,
    /// First covered local day, in days since the epoch of local time.
    first_day: i64,
    n_days: usize,
    window: DayWindow,
    tz_offset_min: i32,
    cells: Vec<Cell>,
}

/// Slot coordinates of an interval that falls inside the window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SlotRef {
    pub day: i64,
    pub slot: usize,
}

/// Maps a UTC interval index to its local day and window slot, or `None`
/// when the interval starts outside the daily window.
pub fn interval_to_slot(interval_index: i64, window: DayWindow, tz_offset_min: i32) -> Option<SlotRef> {
    let local_s = interval_index * INTERVAL_S + tz_offset_min as i64 * 60;
    let day = local_s.div_euclid(SECONDS_PER_DAY);
    let sod = local_s.rem_euclid(SECONDS_PER_DAY);
    let start = window.start_hour as i64 * 3600;
    let end = window.end_hour as i64 * 3600;
    if sod < start || sod >= end {
        return None;
    }
    Some(SlotRef { day, slot: ((sod - start) / INTERVAL_S) as usize })
}

impl TravelTimeMatrix {
    /// Creates an all-missing matrix. Segment ids are sorted and must be
    /// unique; `first_day` is a local day number (days since epoch).
    pub fn new(
        mut segment_ids: Vec<String>,
        first_day: i64,
        n_days: usize,
        window: DayWindow,
        tz_offset_min: i32,
    ) -> Result<Self> {
        if segment_ids.is_empty() {
            return Err(Error::validation("matrix needs at least one segment"));
        }
        if n_days == 0 {
            return Err(Error::validation("matrix needs at least one day"));
        }
        segment_ids.sort();
        segment_ids.dedup();
        let cells = vec![Cell::default(); segment_ids.len() * n_days * window.slots_per_day()];
        Ok(TravelTimeMatrix { segment_ids, first_day, n_days, window, tz_offset_min, cells })
    }

    pub fn segment_ids(&self) -> &[String] {
        &self.segment_ids
    }

    pub fn segment_index(&self, id: &str) -> Option<usize> {
        self.segment_ids.binary_search_by(|s| s.as_str().cmp(id)).ok()
    }

    pub fn first_day(&self) -> i64 {
        self.first_day
    }

    pub fn n_days(&self) -> usize {
        self.n_days
    }

    pub fn window(&self) -> DayWindow {
        self.window
    }

    pub fn tz_offset_min(&self) -> i32 {
        self.tz_offset_min
    }

    pub fn slots_per_day(&self) -> usize {
        self.window.slots_per_day()
    }

    /// Total intervals covered per segment.
    pub fn n_intervals(&self) -> usize {
        self.n_days * self.slots_per_day()
    }

    fn idx(&self, seg: usize, day: usize, slot: usize) -> usize {
        debug_assert!(seg < self.segment_ids.len() && day < self.n_days && slot < self.slots_per_day());
        (seg * self.n_days + day) * self.slots_per_day() + slot
    }

    pub fn cell(&self, seg: usize, day: usize, slot: usize) -> &Cell {
        &self.cells[self.idx(seg, day, slot)]
    }

    pub fn cell_mut(&mut self, seg: usize, day: usize, slot: usize) -> &mut Cell {
        let i = self.idx(seg, day, slot);
        &mut self.cells[i]
    }

    /// Copies a contiguous run of days into a new matrix.
    pub fn slice_days(&self, first: usize, len: usize) -> Result<TravelTimeMatrix> {
        if len == 0 || first + len > self.n_days {
            return Err(Error::validation(format!(
                "day slice {first}..{} outside 0..{}",
                first + len,
                self.n_days
            )));
        }
        let mut out = TravelTimeMatrix::new(
            self.segment_ids.clone(),
            self.first_day + first as i64,
            len,
            self.window,
            self.tz_offset_min,
        )?;
        for seg in 0..self.segment_ids.len() {
            for day in 0..len {
                for slot in 0..self.slots_per_day() {
                    *out.cell_mut(seg, day, slot) = *self.cell(seg, first + day, slot);
                }
            }
        }
        Ok(out)
    }

    /// UTC epoch seconds at which the interval at `(day, slot)` starts.
    pub fn interval_start_epoch(&self, day: usize, slot: usize) -> i64 {
        (self.first_day + day as i64) * SECONDS_PER_DAY
            + self.window.start_hour as i64 * 3600
            + slot as i64 * INTERVAL_S
            - self.tz_offset_min as i64 * 60
    }

    /// Locates an interval-start epoch inside this matrix.
    pub fn locate_epoch(&self, epoch_s: i64) -> Option<(usize, usize)> {
        let slot_ref = interval_to_slot(epoch_s.div_euclid(INTERVAL_S), self.window, self.tz_offset_min)?;
        let day = slot_ref.day - self.first_day;
        if day < 0 || day as usize >= self.n_days {
            return None;
        }
        Some((day as usize, slot_ref.slot))
    }
}

/// Counters from matrix construction.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BuildStats {
    pub stamps_in_window: u64,
    pub stamps_outside_window: u64,
    pub aggregates_outside_window: u64,
    /// Cells whose mean speed fell below the floor; travel time uses the
    /// floor instead of blowing up.
    pub floored_cells: u64,
}

/// Builds the dense matrix from merged aggregates. Travel time per cell is
/// `length / max(mean_speed, v_floor)`; aggregates outside the daily
/// window are dropped and counted.
pub fn build_matrix(
    aggregates: &[IntervalAggregate],
    segments: &[Segment],
    window: DayWindow,
    tz_offset_min: i32,
    v_floor_mps: f64,
) -> Result<(TravelTimeMatrix, BuildStats)> {
    if !v_floor_mps.is_finite() || v_floor_mps <= 0.0 {
        return Err(Error::validation(format!("v_floor must be positive, got {v_floor_mps}")));
    }
    if segments.is_empty() {
        return Err(Error::validation("no segments"));
    }
    let mut length_by_id: Vec<(&str, f64)> =
        segments.iter().map(|s| (s.id.as_str(), s.length_m())).collect();
    length_by_id.sort_by(|a, b| a.0.cmp(b.0));

    let mut placed: Vec<(usize, SlotRef, &IntervalAggregate)> = Vec::new();
    let mut stats = BuildStats::default();
    let mut day_span: Option<(i64, i64)> = None;
    for agg in aggregates {
        let seg = length_by_id
            .binary_search_by(|(id, _)| (*id).cmp(agg.segment_id.as_str()))
            .map_err(|_| Error::validation(format!("aggregate references unknown segment {}", agg.segment_id)))?;
        match interval_to_slot(agg.interval_index, window, tz_offset_min) {
            Some(slot_ref) => {
                stats.stamps_in_window += agg.n_stamps;
                day_span = Some(match day_span {
                    None => (slot_ref.day, slot_ref.day),
                    Some((lo, hi)) => (lo.min(slot_ref.day), hi.max(slot_ref.day)),
                });
                placed.push((seg, slot_ref, agg));
            }
            None => {
                stats.stamps_outside_window += agg.n_stamps;
                stats.aggregates_outside_window += 1;
            }
        }
    }
    let (first_day, last_day) =
        day_span.ok_or_else(|| Error::validation("no aggregates fall inside the daily window"))?;

    let ids = length_by_id.iter().map(|(id, _)| id.to_string()).collect();
    let mut matrix =
        TravelTimeMatrix::new(ids, first_day, (last_day - first_day + 1) as usize, window, tz_offset_min)?;
    for (seg, slot_ref, agg) in placed {
        let day = (slot_ref.day - first_day) as usize;
        let cell = matrix.cell_mut(seg, day, slot_ref.slot);
        if cell.tt_s.is_some() {
            return Err(Error::validation(format!(
                "duplicate aggregate for segment {} interval {}",
                agg.segment_id, agg.interval_index
            )));
        }
        let mean_speed = agg.mean_speed_mps();
        let speed = if mean_speed < v_floor_mps {
            stats.floored_cells += 1;
            v_floor_mps
        } else {
            mean_speed
        };
        *cell = Cell {
            tt_s: Some(length_by_id[seg].1 / speed),
            mean_ax: Some(agg.mean_ax()),
            mean_ay: Some(agg.mean_ay()),
            n_stamps: agg.n_stamps,
            interpolated: false,
        };
    }
    Ok((matrix, stats))
}

/// Outcome of gap interpolation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct InterpolationReport {
    pub cells_filled: u64,
    /// Segment-days with zero observations, left entirely missing.
    pub empty_segment_days: Vec<(String, i64)>,
}

/// Fills missing cells per segment per day: interior gaps linearly between
/// the nearest observed neighbors, edges by copying the nearest observed
/// value. Already-present cells are untouched, so the operation is
/// idempotent. Days without any observation for a segment stay missing.
pub fn interpolate_missing(matrix: &mut TravelTimeMatrix) -> InterpolationReport {
    let slots = matrix.slots_per_day();
    let mut report = InterpolationReport::default();
    for seg in 0..matrix.segment_ids().len() {
        for day in 0..matrix.n_days() {
            let present: Vec<usize> =
                (0..slots).filter(|&s| matrix.cell(seg, day, s).tt_s.is_some()).collect();
            if present.is_empty() {
                report
                    .empty_segment_days
                    .push((matrix.segment_ids()[seg].clone(), matrix.first_day() + day as i64));
                continue;
            }
            if present.len() == slots {
                continue;
            }
            let tt_at = |s: usize| matrix.cell(seg, day, s).tt_s.unwrap();
            let mut fills: Vec<(usize, f64)> = Vec::new();
            for s in 0..slots {
                if matrix.cell(seg, day, s).tt_s.is_some() {
                    continue;
                }
                let next = present.partition_point(|&p| p < s);
                let value = match (next.checked_sub(1).map(|i| present[i]), present.get(next)) {
                    (Some(prev), Some(&nxt)) => {
                        let frac = (s - prev) as f64 / (nxt - prev) as f64;
                        tt_at(prev) + (tt_at(nxt) - tt_at(prev)) * frac
                    }
                    (Some(prev), None) => tt_at(prev),
                    (None, Some(&nxt)) => tt_at(nxt),
                    (None, None) => unreachable!("present is non-empty"),
                };
                fills.push((s, value));
            }
            for (s, value) in fills {
                let cell = matrix.cell_mut(seg, day, s);
                *cell = Cell { tt_s: Some(value), mean_ax: None, mean_ay: None, n_stamps: 0, interpolated: true };
                report.cells_filled += 1;
            }
        }
    }
    report
}

const MATRIX_META_PREFIX: &str = "# ttcast-matrix v=1";

/// Writes the matrix as CSV. A single leading `#` comment line records the
/// window and timezone so downstream commands need no re-specification;
/// the column schema follows on the next line.
pub fn write_matrix_csv(matrix: &TravelTimeMatrix, mut out: impl Write) -> Result<()> {
    let io_err = |e: std::io::Error| Error::io("<matrix csv>", e);
    writeln!(
        out,
        "{MATRIX_META_PREFIX} window={}:{} tz_offset_min={} interval_s={}",
        matrix.window.start_hour, matrix.window.end_hour, matrix.tz_offset_min, INTERVAL_S
    )
    .map_err(io_err)?;
    writeln!(out, "segment_id,interval_start_epoch,tt_s,mean_ax,mean_ay,n_stamps,interpolated").map_err(io_err)?;
    let fmt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for seg in 0..matrix.segment_ids.len() {
        for day in 0..matrix.n_days {
            for slot in 0..matrix.slots_per_day() {
                let cell = matrix.cell(seg, day, slot);
                writeln!(
                    out,
                    "{},{},{},{},{},{},{}",
                    matrix.segment_ids[seg],
                    matrix.interval_start_epoch(day, slot),
                    fmt(cell.tt_s),
                    fmt(cell.mean_ax),
                    fmt(cell.mean_ay),
                    cell.n_stamps,
                    cell.interpolated,
                )
                .map_err(io_err)?;
            }
        }
    }
    Ok(())
}

pub fn write_matrix_file(matrix: &TravelTimeMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_matrix_csv(matrix, std::io::BufWriter::new(file))
}

/// Reads a matrix written by [`write_matrix_csv`].
pub fn read_matrix_csv(reader: impl Read, path: impl AsRef<Path>) -> Result<TravelTimeMatrix> {
    let path = path.as_ref();
    let mut lines = BufReader::new(reader);
    let mut meta = String::new();
    lines.read_line(&mut meta).map_err(|e| Error::io(path, e))?;
    let meta = meta.trim_end();
    if !meta.starts_with(MATRIX_META_PREFIX) {
        return Err(Error::format(path, Some(1), "missing matrix metadata line (# ttcast-matrix v=1 ...)"));
    }
    let mut window = None;
    let mut tz_offset_min = None;
    for token in meta.split_whitespace() {
        if let Some(w) = token.strip_prefix("window=") {
            let (a, b) = w
                .split_once(':')
                .ok_or_else(|| Error::format(path, Some(1), format!("bad window token {token:?}")))?;
            let bad = |_| Error::format(path, Some(1), format!("bad window token {token:?}"));
            window = Some(DayWindow::new(a.parse().map_err(bad)?, b.parse().map_err(bad)?)?);
        } else if let Some(tz) = token.strip_prefix("tz_offset_min=") {
            tz_offset_min =
                Some(tz.parse::<i32>().map_err(|_| Error::format(path, Some(1), format!("bad tz token {token:?}")))?);
        } else if let Some(iv) = token.strip_prefix("interval_s=") {
            if iv != INTERVAL_S.to_string() {
                return Err(Error::format(path, Some(1), format!("unsupported interval length {iv}")));
            }
        }
    }
    let window = window.ok_or_else(|| Error::format(path, Some(1), "metadata line lacks window="))?;
    let tz_offset_min = tz_offset_min.ok_or_else(|| Error::format(path, Some(1), "metadata line lacks tz_offset_min="))?;

    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(lines);
    let headers = rdr.headers().map_err(|e| Error::format(path, None, format!("unreadable header: {e}")))?;
    let expected = ["segment_id", "interval_start_epoch", "tt_s", "mean_ax", "mean_ay", "n_stamps", "interpolated"];
    let actual: Vec<&str> = headers.iter().collect();
    if actual != expected {
        return Err(Error::format(path, Some(2), format!("unexpected columns {actual:?}")));
    }

    struct Row {
        segment_id: String,
        epoch: i64,
        cell: Cell,
    }
    let mut rows: Vec<Row> = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| Error::format(path, e.position().map(|p| p.line()), e.to_string()))?;
        let line = record.position().map(|p| p.line());
        let field = |i: usize| record.get(i).unwrap_or("");
        let opt_f64 = |i: usize| -> Result<Option<f64>> {
            let cell = field(i);
            if cell.is_empty() {
                return Ok(None);
            }
            cell.parse::<f64>()
                .map(Some)
                .map_err(|_| Error::format(path, line, format!("bad float {cell:?}")))
        };
        let epoch: i64 = field(1)
            .parse()
            .map_err(|_| Error::format(path, line, format!("bad epoch {:?}", field(1))))?;
        if epoch.rem_euclid(INTERVAL_S) != 0 {
            return Err(Error::format(path, line, format!("epoch {epoch} is not interval-aligned")));
        }
        let n_stamps: u64 = field(5)
            .parse()
            .map_err(|_| Error::format(path, line, format!("bad n_stamps {:?}", field(5))))?;
        let interpolated = match field(6) {
            "true" => true,
            "false" => false,
            other => return Err(Error::format(path, line, format!("bad interpolated flag {other:?}"))),
        };
        rows.push(Row {
            segment_id: field(0).to_string(),
            epoch,
            cell: Cell {
                tt_s: opt_f64(2)?,
                mean_ax: opt_f64(3)?,
                mean_ay: opt_f64(4)?,
                n_stamps,
                interpolated,
            },
        });
    }
    if rows.is_empty() {
        return Err(Error::format(path, None, "matrix file has no rows"));
    }

    let mut ids: Vec<String> = rows.iter().map(|r| r.segment_id.clone()).collect();
    ids.sort();
    ids.dedup();
    let mut day_span: Option<(i64, i64)> = None;
    let mut slotted: Vec<(String, SlotRef, Cell)> = Vec::with_capacity(rows.len());
    for row in rows {
        let slot_ref = interval_to_slot(row.epoch.div_euclid(INTERVAL_S), window, tz_offset_min)
            .ok_or_else(|| {
                Error::format(path, None, format!("epoch {} lies outside the {}:{} window", row.epoch, window.start_hour, window.end_hour))
            })?;
        day_span = Some(match day_span {
            None => (slot_ref.day, slot_ref.day),
            Some((lo, hi)) => (lo.min(slot_ref.day), hi.max(slot_ref.day)),
        });
        slotted.push((row.segment_id, slot_ref, row.cell));
    }
    let (first_day, last_day) = day_span.unwrap();
    let mut matrix = TravelTimeMatrix::new(ids, first_day, (last_day - first_day + 1) as usize, window, tz_offset_min)?;
    for (segment_id, slot_ref, cell) in slotted {
        let seg = matrix.segment_index(&segment_id).expect("id collected above");
        let day = (slot_ref.day - first_day) as usize;
        let target = matrix.cell_mut(seg, day, slot_ref.slot);
        if *target != Cell::default() && cell != *target {
            return Err(Error::validation(format!(
                "duplicate matrix rows for segment {segment_id} at slot {}/{}",
                slot_ref.day, slot_ref.slot
            )));
        }
        *target = cell;
    }
    Ok(matrix)
}

pub fn read_matrix_file(path: impl AsRef<Path>) -> Result<TravelTimeMatrix> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_matrix_csv(file, path)
}
