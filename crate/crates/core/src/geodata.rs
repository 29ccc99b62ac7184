//! Segment geometry and map matching.
//!
//! Segments are directed freeway stretches described by a polyline of
//! `lat lon` vertices. Probe positions are matched to the nearest segment
//! with a distance gate and a heading gate; distances use an
//! equirectangular projection local to the probe point, which is accurate
//! to well under a meter at the scales involved (points within tens of
//! meters of a segment).

use std::collections::BTreeSet;
use std::io::Read;
use std::path::Path;

use crate::error::Error;
use crate::estimation::BsmRecord;
use crate::Result;

/// Mean Earth radius in meters.
const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// Maximum relative disagreement tolerated between a declared segment
/// length and the length recomputed from its polyline.
const LENGTH_TOLERANCE: f64 = 0.005;

/// Segment length above which the loader warns that 5-minute interval
/// aggregation will be coarse.
const LONG_SEGMENT_WARN_KM: f64 = 2.0;

/// A geographic vertex in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

/// A directed freeway segment.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub id: String,
    pub direction: String,
    /// Geodesic polyline length. Recomputed from the vertices at load time.
    pub length_km: f64,
    pub polyline: Vec<GeoPoint>,
}

impl Segment {
    /// Builds a segment from vertices, computing its length and validating
    /// the geometry (at least two vertices, no consecutive duplicates).
    pub fn new(id: impl Into<String>, direction: impl Into<String>, polyline: Vec<GeoPoint>) -> Result<Self> {
        let id = id.into();
        if polyline.len() < 2 {
            return Err(Error::validation(format!(
                "segment {id}: polyline needs at least 2 vertices, got {}",
                polyline.len()
            )));
        }
        for (i, pair) in polyline.windows(2).enumerate() {
            if pair[0] == pair[1] {
                return Err(Error::validation(format!(
                    "segment {id}: degenerate geometry, vertices {i} and {} are identical",
                    i + 1
                )));
            }
        }
        for (i, p) in polyline.iter().enumerate() {
            if !(-90.0..=90.0).contains(&p.lat) || !(-180.0..=180.0).contains(&p.lon) {
                return Err(Error::validation(format!(
                    "segment {id}: vertex {i} out of range: lat {} lon {}",
                    p.lat, p.lon
                )));
            }
        }
        let length_km = polyline_length_km(&polyline);
        Ok(Segment { id, direction: direction.into(), length_km, polyline })
    }

    pub fn length_m(&self) -> f64 {
        self.length_km * 1000.0
    }
}

/// Result of loading a segment file: validated segments plus non-fatal
/// warnings (currently: segments longer than 2 km).
#[derive(Debug, Clone)]
pub struct SegmentLoad {
    pub segments: Vec<Segment>,
    pub warnings: Vec<String>,
}

/// Gates applied during matching.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchGates {
    pub max_dist_m: f64,
    pub max_heading_delta_deg: f64,
}

impl Default for MatchGates {
    fn default() -> Self {
        MatchGates { max_dist_m: 30.0, max_heading_delta_deg: 45.0 }
    }
}

/// Matching outcome for one probe point. `segment_id` is `None` when no
/// segment passed both gates; `distance_m` / `heading_delta_deg` then refer
/// to the nearest segment regardless of gates (infinite / 180 when the
/// segment list is empty).
#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    pub segment_id: Option<String>,
    pub distance_m: f64,
    pub heading_delta_deg: f64,
}

/// Great-circle distance in meters between two points.
pub fn haversine_m(a: GeoPoint, b: GeoPoint) -> f64 {
    let lat1 = a.lat.to_radians();
    let lat2 = b.lat.to_radians();
    let dlat = (b.lat - a.lat).to_radians();
    let dlon = (b.lon - a.lon).to_radians();
    let s = (dlat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * s.sqrt().asin()
}

/// Geodesic polyline length in kilometers.
pub fn polyline_length_km(polyline: &[GeoPoint]) -> f64 {
    polyline.windows(2).map(|w| haversine_m(w[0], w[1])).sum::<f64>() / 1000.0
}

/// Smallest angle between two headings on the compass circle, in [0, 180].
pub fn heading_delta_deg(a: f64, b: f64) -> f64 {
    let d = (a - b).abs() % 360.0;
    d.min(360.0 - d)
}

/// Distance in meters from a point to a segment's polyline, plus the
/// bearing (degrees clockwise from north) of the nearest edge.
pub fn point_to_polyline_distance(p: GeoPoint, segment: &Segment) -> (f64, f64) {
    let cos_lat = p.lat.to_radians().cos();
    let project = |v: GeoPoint| -> (f64, f64) {
        (
            (v.lon - p.lon).to_radians() * cos_lat * EARTH_RADIUS_M,
            (v.lat - p.lat).to_radians() * EARTH_RADIUS_M,
        )
    };
    let mut best_dist = f64::INFINITY;
    let mut best_bearing = 0.0;
    for w in segment.polyline.windows(2) {
        let (ax, ay) = project(w[0]);
        let (bx, by) = project(w[1]);
        let (dx, dy) = (bx - ax, by - ay);
        let len2 = dx * dx + dy * dy;
        let t = if len2 > 0.0 { (-(ax * dx + ay * dy) / len2).clamp(0.0, 1.0) } else { 0.0 };
        let (cx, cy) = (ax + t * dx, ay + t * dy);
        let dist = (cx * cx + cy * cy).sqrt();
        if dist < best_dist {
            best_dist = dist;
            best_bearing = edge_bearing_deg(dx, dy);
        }
    }
    (best_dist, best_bearing)
}

fn edge_bearing_deg(dx: f64, dy: f64) -> f64 {
    let deg = dx.atan2(dy).to_degrees();
    if deg < 0.0 {
        deg + 360.0
    } else {
        deg
    }
}

/// Bearing from `a` to `b` in degrees clockwise from north, using the
/// same local projection as the matcher so synthetic headings line up
/// with matched edge bearings.
pub fn bearing_deg(a: GeoPoint, b: GeoPoint) -> f64 {
    let cos_lat = a.lat.to_radians().cos();
    let dx = (b.lon - a.lon).to_radians() * cos_lat * EARTH_RADIUS_M;
    let dy = (b.lat - a.lat).to_radians() * EARTH_RADIUS_M;
    edge_bearing_deg(dx, dy)
}

/// Matches one probe record against the segment set. The nearest segment
/// within both gates wins; equal distances break toward the
/// lexicographically smaller id.
pub fn match_point(record: &BsmRecord, segments: &[Segment], gates: &MatchGates) -> MatchResult {
    match match_point_idx(record.lat, record.lon, record.heading_deg, segments, gates) {
        Some((idx, dist, delta)) => MatchResult {
            segment_id: Some(segments[idx].id.clone()),
            distance_m: dist,
            heading_delta_deg: delta,
        },
        None => {
            // Report the ungated nearest segment for diagnostics.
            let mut nearest = (f64::INFINITY, 180.0);
            for seg in segments {
                let (dist, bearing) = point_to_polyline_distance(GeoPoint { lat: record.lat, lon: record.lon }, seg);
                if dist < nearest.0 {
                    nearest = (dist, heading_delta_deg(record.heading_deg, bearing));
                }
            }
            MatchResult { segment_id: None, distance_m: nearest.0, heading_delta_deg: nearest.1 }
        }
    }
}

/// Index-based matching core shared by `match_point` and the aggregation
/// pipeline. Returns `(segment index, distance, heading delta)` of the best
/// gated candidate.
pub(crate) fn match_point_idx(
    lat: f64,
    lon: f64,
    heading_deg: f64,
    segments: &[Segment],
    gates: &MatchGates,
) -> Option<(usize, f64, f64)> {
    let p = GeoPoint { lat, lon };
    let mut best: Option<(usize, f64, f64)> = None;
    for (idx, seg) in segments.iter().enumerate() {
        let (dist, bearing) = point_to_polyline_distance(p, seg);
        if dist > gates.max_dist_m {
            continue;
        }
        let delta = heading_delta_deg(heading_deg, bearing);
        if delta > gates.max_heading_delta_deg {
            continue;
        }
        let better = match &best {
            None => true,
            Some((bidx, bdist, _)) => {
                dist < *bdist || (dist == *bdist && segments[idx].id < segments[*bidx].id)
            }
        };
        if better {
            best = Some((idx, dist, delta));
        }
    }
    best
}

/// Loads segments from CSV with columns `id,direction,length_km,polyline`.
///
/// The polyline cell holds `lat lon` pairs separated by `;`. `length_km`
/// may be empty or the column absent entirely; when present it must agree
/// with the recomputed geodesic length within 0.5%. The stored length is
/// always the recomputed one.
pub fn load_segments(path: impl AsRef<Path>) -> Result<SegmentLoad> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    load_segments_from(file, path)
}

fn load_segments_from(reader: impl Read, path: &Path) -> Result<SegmentLoad> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::format(path, None, format!("unreadable header: {e}")))?
        .clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let id_col = col("id").ok_or_else(|| Error::format(path, None, "missing column: id"))?;
    let dir_col = col("direction").ok_or_else(|| Error::format(path, None, "missing column: direction"))?;
    let len_col = col("length_km");
    let poly_col = col("polyline").ok_or_else(|| Error::format(path, None, "missing column: polyline"))?;

    let mut segments = Vec::new();
    let mut warnings = Vec::new();
    let mut seen = BTreeSet::new();
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line());
            Error::format(path, line, format!("bad csv record: {e}"))
        })?;
        let line = record.position().map(|p| p.line());
        let id = record.get(id_col).unwrap_or("").to_string();
        if id.is_empty() {
            return Err(Error::format(path, line, "empty segment id"));
        }
        if !seen.insert(id.clone()) {
            return Err(Error::validation(format!("duplicate segment id: {id}")));
        }
        let direction = record.get(dir_col).unwrap_or("").to_string();
        let polyline = parse_polyline(record.get(poly_col).unwrap_or(""))
            .map_err(|msg| Error::format(path, line, format!("segment {id}: {msg}")))?;
        let segment = Segment::new(id.clone(), direction, polyline)?;
        if let Some(cell) = len_col.and_then(|c| record.get(c)).filter(|c| !c.is_empty()) {
            let declared: f64 = cell
                .parse()
                .map_err(|_| Error::format(path, line, format!("segment {id}: bad length_km: {cell:?}")))?;
            let rel = (declared - segment.length_km).abs() / segment.length_km;
            if rel.is_nan() || rel > LENGTH_TOLERANCE {
                return Err(Error::validation(format!(
                    "segment {id}: declared length {declared} km disagrees with computed {:.4} km by {:.1}%",
                    segment.length_km,
                    rel * 100.0
                )));
            }
        }
        if segment.length_km > LONG_SEGMENT_WARN_KM {
            warnings.push(format!(
                "segment {id} is {:.2} km long; 5-minute interval aggregation will be coarse",
                segment.length_km
            ));
        }
        segments.push(segment);
    }
    Ok(SegmentLoad { segments, warnings })
}

fn parse_polyline(cell: &str) -> std::result::Result<Vec<GeoPoint>, String> {
    let mut points = Vec::new();
    for (i, pair) in cell.split(';').enumerate() {
        let pair = pair.trim();
        if pair.is_empty() {
            continue;
        }
        let mut it = pair.split_whitespace();
        let (lat, lon) = match (it.next(), it.next(), it.next()) {
            (Some(lat), Some(lon), None) => (lat, lon),
            _ => return Err(format!("vertex {i}: expected \"lat lon\", got {pair:?}")),
        };
        let lat: f64 = lat.parse().map_err(|_| format!("vertex {i}: bad latitude {lat:?}"))?;
        let lon: f64 = lon.parse().map_err(|_| format!("vertex {i}: bad longitude {lon:?}"))?;
        points.push(GeoPoint { lat, lon });
    }
    Ok(points)
}
