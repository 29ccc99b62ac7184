//! Streaming BSM reader.
//!
//! Input is header-bearing CSV addressed by column name; anything with at
//! least the eight retained columns parses, so both full SPMD-shaped files
//! and the reduced form work unchanged. Malformed rows are counted and
//! skipped, never fatal, unless they exceed half the file, which points at
//! the wrong file rather than dirty data.

use std::fs::File;
use std::io::Read;
use std::path::{Path, PathBuf};

use crate::error::Error;
use crate::Result;

/// Columns a BSM file must provide, by exact header name.
pub const REQUIRED_COLUMNS: [&str; 8] =
    ["Device", "GPS_Time", "Latitude", "Longitude", "Heading", "Speed", "Ax", "Ay"];

/// Absolute magnitude cap on speeds, accelerations and timestamps; values
/// beyond it are sensor garbage and would overflow exact accumulation.
const MAX_ABS_VALUE: f64 = 1e6;
const MAX_ABS_TIME_S: f64 = 1e12;

/// One vehicle stamp, after column reduction.
#[derive(Debug, Clone, PartialEq)]
pub struct BsmRecord {
    pub device_id: String,
    /// Epoch seconds, fractional part preserved.
    pub time_s: f64,
    pub lat: f64,
    pub lon: f64,
    /// Degrees clockwise from north, in [0, 360).
    pub heading_deg: f64,
    pub speed_mps: f64,
    pub ax: f64,
    pub ay: f64,
}

/// Row accounting for one parsed stream.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ReductionReport {
    pub rows_read: u64,
    pub rows_kept: u64,
    pub rows_malformed: u64,
}

impl ReductionReport {
    pub fn absorb(&mut self, other: &ReductionReport) {
        self.rows_read += other.rows_read;
        self.rows_kept += other.rows_kept;
        self.rows_malformed += other.rows_malformed;
    }
}

/// Streaming reader over one BSM CSV source.
pub struct BsmStream<R: Read> {
    reader: csv::Reader<R>,
    columns: [usize; 8],
    report: ReductionReport,
    path: PathBuf,
    row: csv::StringRecord,
}

impl BsmStream<File> {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(file, path)
    }
}

impl<R: Read> BsmStream<R> {
    /// Wraps any reader; `path` only labels errors.
    pub fn from_reader(reader: R, path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let mut reader = csv::ReaderBuilder::new().flexible(true).trim(csv::Trim::All).from_reader(reader);
        let headers = reader
            .headers()
            .map_err(|e| Error::format(&path, None, format!("unreadable header: {e}")))?;
        let mut columns = [0usize; 8];
        let mut missing = Vec::new();
        for (slot, name) in REQUIRED_COLUMNS.iter().enumerate() {
            match headers.iter().position(|h| h == *name) {
                Some(idx) => columns[slot] = idx,
                None => missing.push(*name),
            }
        }
        if !missing.is_empty() {
            return Err(Error::format(&path, None, format!("missing columns: {}", missing.join(", "))));
        }
        Ok(BsmStream { reader, columns, report: ReductionReport::default(), path, row: csv::StringRecord::new() })
    }

    /// Next well-formed record, skipping and counting malformed rows.
    /// `Ok(None)` at end of input; `Err` only for real I/O failures.
    pub fn next_record(&mut self) -> Result<Option<BsmRecord>> {
        loop {
            let more = self.reader.read_record(&mut self.row).map_err(|e| {
                if e.is_io_error() {
                    match e.into_kind() {
                        csv::ErrorKind::Io(io) => Error::io(&self.path, io),
                        _ => unreachable!(),
                    }
                } else {
                    // Structural noise (stray quotes etc.): one bad row.
                    Error::format(&self.path, e.position().map(|p| p.line()), e.to_string())
                }
            });
            let more = match more {
                Ok(m) => m,
                Err(err @ Error::Io { .. }) => return Err(err),
                Err(_) => {
                    self.report.rows_read += 1;
                    self.report.rows_malformed += 1;
                    continue;
                }
            };
            if !more {
                return Ok(None);
            }
            self.report.rows_read += 1;
            match parse_row(&self.row, &self.columns) {
                Some(record) => {
                    self.report.rows_kept += 1;
                    return Ok(Some(record));
                }
                None => self.report.rows_malformed += 1,
            }
        }
    }

    pub fn report(&self) -> ReductionReport {
        self.report
    }

    /// Drains the stream and applies the wrong-file heuristic: more than
    /// half the rows malformed is a format error, not dirty data.
    pub fn finish(mut self) -> Result<ReductionReport> {
        while self.next_record()?.is_some() {}
        let r = self.report;
        if r.rows_read > 0 && r.rows_malformed * 2 > r.rows_read {
            return Err(Error::format(
                &self.path,
                None,
                format!("{} of {} rows malformed; is this a BSM file?", r.rows_malformed, r.rows_read),
            ));
        }
        Ok(r)
    }
}

fn parse_row(row: &csv::StringRecord, columns: &[usize; 8]) -> Option<BsmRecord> {
    let cell = |slot: usize| row.get(columns[slot]);
    let num = |slot: usize| cell(slot).and_then(|c| c.parse::<f64>().ok()).filter(|v| v.is_finite());

    let device_id = cell(0).filter(|c| !c.is_empty())?.to_string();
    let time_s = num(1).filter(|t| t.abs() <= MAX_ABS_TIME_S)?;
    let lat = num(2).filter(|v| (-90.0..=90.0).contains(v))?;
    let lon = num(3).filter(|v| (-180.0..=180.0).contains(v))?;
    let heading_deg = num(4).filter(|v| (0.0..360.0).contains(v))?;
    let speed_mps = num(5).filter(|v| (0.0..MAX_ABS_VALUE).contains(v))?;
    let ax = num(6).filter(|v| v.abs() < MAX_ABS_VALUE)?;
    let ay = num(7).filter(|v| v.abs() < MAX_ABS_VALUE)?;
    Some(BsmRecord { device_id, time_s, lat, lon, heading_deg, speed_mps, ax, ay })
}

/// Reads a whole file, applying the malformed-majority check.
pub fn read_bsm_file(path: impl AsRef<Path>) -> Result<(Vec<BsmRecord>, ReductionReport)> {
    let mut stream = BsmStream::open(path)?;
    let mut records = Vec::new();
    while let Some(r) = stream.next_record()? {
        records.push(r);
    }
    let report = stream.finish()?;
    Ok((records, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stream(text: &str) -> BsmStream<&[u8]> {
        BsmStream::from_reader(text.as_bytes(), "test.csv").unwrap()
    }

    fn collect(text: &str) -> (Vec<BsmRecord>, ReductionReport) {
        let mut s = stream(text);
        let mut out = Vec::new();
        while let Some(r) = s.next_record().unwrap() {
            out.push(r);
        }
        let report = s.finish().unwrap();
        (out, report)
    }

    const REDUCED_HEADER: &str = "Device,GPS_Time,Latitude,Longitude,Heading,Speed,Ax,Ay";

    #[test]
    fn parses_reduced_form() {
        let text = format!("{REDUCED_HEADER}\n101,1364774400.1,42.0,-83.7,90.0,20.5,0.1,-0.2\n");
        let (records, report) = collect(&text);
        assert_eq!(records.len(), 1);
        let r = &records[0];
        assert_eq!(r.device_id, "101");
        assert_eq!(r.time_s, 1364774400.1);
        assert_eq!(r.speed_mps, 20.5);
        assert_eq!(r.ay, -0.2);
        assert_eq!(report, ReductionReport { rows_read: 1, rows_kept: 1, rows_malformed: 0 });
    }

    #[test]
    fn parses_wide_rows_keeping_retained_columns() {
        // SPMD-shaped: extra columns in arbitrary positions are ignored.
        let text = "RxDevice,FileId,Device,GPS_Time,Latitude,Longitude,Elevation,Speed,Heading,Ax,Ay,Az,Yawrate\n\
                    5,9001,101,1364774400,42.0,-83.7,210.0,20.0,90.0,0.0,0.0,-9.8,0.1\n";
        let (records, report) = collect(text);
        assert_eq!(records.len(), 1);
        assert_eq!(records[0].device_id, "101");
        assert_eq!(records[0].heading_deg, 90.0);
        assert_eq!(records[0].speed_mps, 20.0);
        assert_eq!(report.rows_kept, 1);
    }

    #[test]
    fn counts_and_skips_malformed_rows() {
        let text = format!(
            "{REDUCED_HEADER}\n\
             101,1364774400,42.0,-83.7,90.0,20.0,0.0,0.0\n\
             101,1364774401,42.0,-83.7,90.0,-1,0.0,0.0\n\
             101,1364774402,42.0,-83.7,360.0,20.0,0.0,0.0\n\
             101,1364774403,42.0,-83.7,90.0,20.0,0.0,0.0\n"
        );
        let (records, report) = collect(&text);
        assert_eq!(records.len(), 2);
        assert_eq!(report, ReductionReport { rows_read: 4, rows_kept: 2, rows_malformed: 2 });
    }

    #[test]
    fn out_of_range_coordinates_are_malformed() {
        let text = format!(
            "{REDUCED_HEADER}\n\
             101,1,91.0,-83.7,90.0,20.0,0.0,0.0\n\
             101,2,42.0,-183.7,90.0,20.0,0.0,0.0\n\
             101,3,42.0,-83.7,90.0,20.0,0.0,0.0\n\
             101,4,42.0,-83.7,90.0,20.0,0.0,0.0\n"
        );
        let (records, report) = collect(&text);
        assert_eq!(records.len(), 2);
        assert_eq!(report.rows_malformed, 2);
    }

    #[test]
    fn majority_malformed_is_a_format_error() {
        let text = format!(
            "{REDUCED_HEADER}\n\
             101,x,42.0,-83.7,90.0,20.0,0.0,0.0\n\
             101,y,42.0,-83.7,90.0,20.0,0.0,0.0\n\
             101,3,42.0,-83.7,90.0,20.0,0.0,0.0\n"
        );
        let mut s = stream(&text);
        while s.next_record().unwrap().is_some() {}
        let err = s.finish().unwrap_err();
        assert!(matches!(err, Error::Format { .. }), "{err}");
    }

    #[test]
    fn missing_required_column_is_a_format_error() {
        let result = BsmStream::from_reader(
            "Device,GPS_Time,Latitude,Longitude,Heading,Speed,Ax\n".as_bytes(),
            "test.csv",
        );
        match result {
            Ok(_) => panic!("expected a format error for the missing Ay column"),
            Err(Error::Format { message, .. }) => assert!(message.contains("Ay"), "{message}"),
            Err(other) => panic!("expected format error, got {other}"),
        }
    }

    #[test]
    fn short_rows_are_malformed_not_fatal() {
        let text = format!(
            "{REDUCED_HEADER}\n\
             101,1\n\
             101,2,42.0,-83.7,90.0,20.0,0.0,0.0\n\
             101,3,42.0,-83.7,90.0,20.0,0.0,0.0\n"
        );
        let (records, report) = collect(&text);
        assert_eq!(records.len(), 2);
        assert_eq!(report.rows_malformed, 1);
    }
}
