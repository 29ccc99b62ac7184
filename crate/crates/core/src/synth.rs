//! Seeded synthetic data generators.
//!
//! A [`CongestionProfile`] defines a closed-form mean speed per segment
//! and local time of day: a base speed, multiplicative peak-period
//! slowdowns, and a smooth diurnal dip. Generators layer seeded Gaussian
//! noise on top. Output ordering is part of the contract: the same
//! profile and seed produce byte-identical files.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::Error;
use crate::estimation::{DayWindow, TravelTimeMatrix, INTERVAL_S, REQUIRED_COLUMNS};
use crate::geodata::{bearing_deg, haversine_m, GeoPoint, Segment};
use crate::Result;

/// Default first covered local day (days since epoch): Monday 2013-04-01.
pub const DEFAULT_FIRST_DAY: i64 = 15_796;

/// Slowest speed any profile evaluates to, m/s.
pub const MIN_SPEED_MPS: f64 = 1.0;

/// A recurring slow period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakWindow {
    pub start_hour: u8,
    pub end_hour: u8,
    /// Speed multiplier inside the window, in (0, 1).
    pub multiplier: f64,
}

/// Closed-form congestion model driving both generators.
#[derive(Debug, Clone, PartialEq)]
pub struct CongestionProfile {
    /// Free-flow speed for segments without an override, m/s.
    pub base_speed_mps: f64,
    /// Per-segment free-flow overrides.
    pub segment_speeds: BTreeMap<String, f64>,
    pub peak_windows: Vec<PeakWindow>,
    /// Fractional mid-day dip depth, in [0, 1): speed is scaled by
    /// `1 - dip * sin^2(pi * time_of_day)`.
    pub diurnal_dip: f64,
    /// Per-draw Gaussian speed noise, as a fraction of the mean speed.
    pub noise_sd_frac: f64,
    pub seed: u64,
}

impl Default for CongestionProfile {
    fn default() -> Self {
        CongestionProfile {
            base_speed_mps: 25.0,
            segment_speeds: BTreeMap::new(),
            peak_windows: vec![
                PeakWindow { start_hour: 6, end_hour: 9, multiplier: 0.6 },
                PeakWindow { start_hour: 16, end_hour: 19, multiplier: 0.6 },
            ],
            diurnal_dip: 0.15,
            noise_sd_frac: 0.0,
            seed: 0,
        }
    }
}

impl CongestionProfile {
    pub fn validate(&self) -> Result<()> {
        if !(self.base_speed_mps.is_finite() && self.base_speed_mps >= MIN_SPEED_MPS) {
            return Err(Error::validation(format!(
                "base speed must be at least {MIN_SPEED_MPS} m/s, got {}",
                self.base_speed_mps
            )));
        }
        for (id, &v) in &self.segment_speeds {
            if !(v.is_finite() && v >= MIN_SPEED_MPS) {
                return Err(Error::validation(format!("speed override for {id:?} must be at least {MIN_SPEED_MPS} m/s")));
            }
        }
        for w in &self.peak_windows {
            if w.start_hour >= w.end_hour || w.end_hour > 24 {
                return Err(Error::validation(format!(
                    "bad peak window {}:{}",
                    w.start_hour, w.end_hour
                )));
            }
            if !(w.multiplier.is_finite() && w.multiplier > 0.0 && w.multiplier < 1.0) {
                return Err(Error::validation("peak multiplier must lie in (0, 1)".to_string()));
            }
        }
        if !(self.diurnal_dip.is_finite() && (0.0..1.0).contains(&self.diurnal_dip)) {
            return Err(Error::validation("diurnal dip must lie in [0, 1)".to_string()));
        }
        if !(self.noise_sd_frac.is_finite() && (0.0..0.5).contains(&self.noise_sd_frac)) {
            return Err(Error::validation("noise SD fraction must lie in [0, 0.5)".to_string()));
        }
        Ok(())
    }

    /// Free-flow speed of a segment, before any time-of-day effect.
    pub fn free_speed(&self, segment_id: &str) -> f64 {
        *self.segment_speeds.get(segment_id).unwrap_or(&self.base_speed_mps)
    }

    /// Mean speed of a segment at a local time of day (seconds since
    /// local midnight). Deterministic; noise is added by the generators.
    pub fn mean_speed(&self, segment_id: &str, local_sod_s: i64) -> f64 {
        let mut speed = self.free_speed(segment_id);
        let hour = local_sod_s as f64 / 3600.0;
        for w in &self.peak_windows {
            if hour >= f64::from(w.start_hour) && hour < f64::from(w.end_hour) {
                speed *= w.multiplier;
            }
        }
        let frac = local_sod_s as f64 / 86_400.0;
        speed *= 1.0 - self.diurnal_dip * (std::f64::consts::PI * frac).sin().powi(2);
        speed.max(MIN_SPEED_MPS)
    }
}

fn sorted_unique_ids(segments: &[Segment]) -> Result<Vec<String>> {
    let mut ids: Vec<String> = segments.iter().map(|s| s.id.clone()).collect();
    ids.sort();
    if ids.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::validation("duplicate segment ids"));
    }
    Ok(ids)
}

fn check_tz_alignment(tz_offset_min: i32) -> Result<()> {
    if tz_offset_min % 5 != 0 {
        return Err(Error::validation(
            "tz offset must be a multiple of 5 minutes so local slots align with the interval grid"
                .to_string(),
        ));
    }
    Ok(())
}

/// Builds a travel-time matrix directly from the profile, skipping the
/// BSM layer. Every cell is observed (`n_stamps = 1`, not interpolated).
/// The generator draws three Gaussians per cell (speed, ax, ay) in
/// (segment, day, slot) order from the profile seed.
pub fn generate_matrix(
    profile: &CongestionProfile,
    segments: &[Segment],
    n_days: usize,
    window: DayWindow,
    tz_offset_min: i32,
    first_day: i64,
) -> Result<TravelTimeMatrix> {
    profile.validate()?;
    check_tz_alignment(tz_offset_min)?;
    let ids = sorted_unique_ids(segments)?;
    let length_m: BTreeMap<&str, f64> =
        segments.iter().map(|s| (s.id.as_str(), s.length_m())).collect();
    let mut matrix = TravelTimeMatrix::new(ids.clone(), first_day, n_days, window, tz_offset_min)?;
    let mut rng = ChaCha8Rng::seed_from_u64(profile.seed);
    let unit = Normal::new(0.0, 1.0).expect("valid normal");
    let slots = window.slots_per_day();
    for (si, id) in ids.iter().enumerate() {
        let len = length_m[id.as_str()];
        let free = profile.free_speed(id);
        for day in 0..n_days {
            for slot in 0..slots {
                let local_sod = i64::from(window.start_hour) * 3600 + slot as i64 * INTERVAL_S;
                let mean = profile.mean_speed(id, local_sod);
                let eps: f64 = unit.sample(&mut rng);
                let ax_eps: f64 = unit.sample(&mut rng);
                let ay_eps: f64 = unit.sample(&mut rng);
                let speed = (mean + eps * profile.noise_sd_frac * mean).max(MIN_SPEED_MPS);
                let cell = matrix.cell_mut(si, day, slot);
                cell.tt_s = Some(len / speed);
                // Gentle deceleration signal when running below free flow.
                cell.mean_ax = Some(0.02 * (speed - free) + 0.05 * ax_eps);
                cell.mean_ay = Some(0.01 * ay_eps);
                cell.n_stamps = 1;
                cell.interpolated = false;
            }
        }
    }
    Ok(matrix)
}

/// Counts from one trajectory generation run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SynthReport {
    pub vehicles: u64,
    pub stamps: u64,
}

/// Generates 10 Hz probe trajectories and writes them as a BSM CSV, plus
/// a ground-truth sidecar `segment_id,interval_index,true_mean_speed_mps`
/// holding each cell's stamp-weighted mean speed.
///
/// Per interval and segment, `vehicles_per_interval` vehicles enter at
/// evenly spread offsets and traverse at a constant per-vehicle speed
/// (profile mean plus noise). Stamps stop at the segment end or the
/// interval end, whichever comes first, so each vehicle's stamps live in
/// exactly one cell. The generator draws three Gaussians per vehicle
/// (speed, ax, ay) in (segment, day, slot, vehicle) order.
#[allow(clippy::too_many_arguments)]
pub fn generate_trajectories(
    segments: &[Segment],
    profile: &CongestionProfile,
    vehicles_per_interval: usize,
    n_days: usize,
    window: DayWindow,
    tz_offset_min: i32,
    first_day: i64,
    bsm_path: &Path,
    truth_path: &Path,
) -> Result<SynthReport> {
    profile.validate()?;
    check_tz_alignment(tz_offset_min)?;
    if vehicles_per_interval < 1 {
        return Err(Error::validation("need at least one vehicle per interval"));
    }
    if n_days < 1 {
        return Err(Error::validation("need at least one day"));
    }
    let ids = sorted_unique_ids(segments)?;
    let by_id: BTreeMap<&str, &Segment> = segments.iter().map(|s| (s.id.as_str(), s)).collect();
    let geometries: Vec<SegmentGeometry> =
        ids.iter().map(|id| SegmentGeometry::new(by_id[id.as_str()])).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(profile.seed);
    let unit = Normal::new(0.0, 1.0).expect("valid normal");
    let slots = window.slots_per_day();
    let file = fs::File::create(bsm_path).map_err(|e| Error::io(bsm_path, e))?;
    let mut bsm = BufWriter::new(file);
    let mut truth: BTreeMap<(String, i64), (f64, u64)> = BTreeMap::new();
    let mut report = SynthReport::default();
    let result: std::io::Result<()> = (|| {
        writeln!(bsm, "{}", REQUIRED_COLUMNS.join(","))?;
        let mut vehicle_no: u64 = 0;
        for (si, id) in ids.iter().enumerate() {
            let geom = &geometries[si];
            for day in 0..n_days {
                for slot in 0..slots {
                    let local_sod = i64::from(window.start_hour) * 3600 + slot as i64 * INTERVAL_S;
                    let interval_start = (first_day + day as i64) * 86_400 + local_sod
                        - i64::from(tz_offset_min) * 60;
                    let interval_index = interval_start.div_euclid(INTERVAL_S);
                    let mean = profile.mean_speed(id, local_sod);
                    for v in 0..vehicles_per_interval {
                        let eps: f64 = unit.sample(&mut rng);
                        let ax_eps: f64 = unit.sample(&mut rng);
                        let ay_eps: f64 = unit.sample(&mut rng);
                        let speed = (mean + eps * profile.noise_sd_frac * mean).max(MIN_SPEED_MPS);
                        let ax = 0.02 * (speed - profile.free_speed(id)) + 0.05 * ax_eps;
                        let ay = 0.01 * ay_eps;
                        let offset_ds = (v as i64 * INTERVAL_S * 10) / vehicles_per_interval as i64;
                        let entry_ds = interval_start * 10 + offset_ds;
                        let end_ds = (interval_start + INTERVAL_S) * 10;
                        vehicle_no += 1;
                        report.vehicles += 1;
                        let device = format!("v{vehicle_no:06}");
                        let mut j: i64 = 0;
                        loop {
                            let t_ds = entry_ds + j;
                            if t_ds >= end_ds {
                                break;
                            }
                            let dist = speed * j as f64 / 10.0;
                            if dist > geom.length_m {
                                break;
                            }
                            let (p, heading) = geom.position_at(dist);
                            writeln!(
                                bsm,
                                "{device},{},{},{},{heading},{speed},{ax},{ay}",
                                t_ds as f64 / 10.0,
                                p.lat,
                                p.lon
                            )?;
                            report.stamps += 1;
                            let entry =
                                truth.entry((id.clone(), interval_index)).or_insert((0.0, 0));
                            entry.0 += speed;
                            entry.1 += 1;
                            j += 1;
                        }
                    }
                }
            }
        }
        bsm.flush()
    })();
    result.map_err(|e| Error::io(bsm_path, e))?;
    let truth_file = fs::File::create(truth_path).map_err(|e| Error::io(truth_path, e))?;
    let mut tw = BufWriter::new(truth_file);
    let truth_result: std::io::Result<()> = (|| {
        writeln!(tw, "segment_id,interval_index,true_mean_speed_mps")?;
        for ((id, interval), (speed_sum, n)) in &truth {
            writeln!(tw, "{id},{interval},{}", speed_sum / *n as f64)?;
        }
        tw.flush()
    })();
    truth_result.map_err(|e| Error::io(truth_path, e))?;
    Ok(report)
}

/// Ground-truth rows from a trajectory run's sidecar file.
pub fn read_truth_csv(path: &Path) -> Result<Vec<(String, i64, f64)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    match lines.next() {
        Some("segment_id,interval_index,true_mean_speed_mps") => {}
        _ => return Err(Error::format(path, Some(1), "bad ground-truth header".to_string())),
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let line_no = Some(i as u64 + 2);
        let mut parts = line.split(',');
        let bad = || Error::format(path, line_no, format!("bad ground-truth row {line:?}"));
        let id = parts.next().ok_or_else(bad)?;
        let interval = parts.next().and_then(|s| s.parse::<i64>().ok()).ok_or_else(bad)?;
        let speed = parts.next().and_then(|s| s.parse::<f64>().ok()).ok_or_else(bad)?;
        if parts.next().is_some() {
            return Err(bad());
        }
        out.push((id.to_string(), interval, speed));
    }
    Ok(out)
}

/// Polyline walk support for one segment.
struct SegmentGeometry {
    length_m: f64,
    /// Per edge: start point, end point, cumulative length at edge start,
    /// edge length, and bearing.
    edges: Vec<(GeoPoint, GeoPoint, f64, f64, f64)>,
}

impl SegmentGeometry {
    fn new(segment: &Segment) -> Self {
        let mut edges = Vec::with_capacity(segment.polyline.len() - 1);
        let mut at = 0.0;
        for w in segment.polyline.windows(2) {
            let len = haversine_m(w[0], w[1]);
            edges.push((w[0], w[1], at, len, bearing_deg(w[0], w[1])));
            at += len;
        }
        SegmentGeometry { length_m: at, edges }
    }

    /// Point and heading at a distance from the segment start. Distances
    /// past the end clamp to the final vertex.
    fn position_at(&self, dist_m: f64) -> (GeoPoint, f64) {
        for &(a, b, start, len, bearing) in &self.edges {
            if dist_m <= start + len {
                let t = if len > 0.0 { ((dist_m - start) / len).clamp(0.0, 1.0) } else { 0.0 };
                let p = GeoPoint { lat: a.lat + t * (b.lat - a.lat), lon: a.lon + t * (b.lon - a.lon) };
                return (p, bearing);
            }
        }
        let last = self.edges.last().expect("segment has at least one edge");
        (last.1, last.4)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn segment(id: &str, length_km: f64) -> Segment {
        let dlon = length_km / (111.195 * 42.0f64.to_radians().cos());
        Segment::new(
            id,
            "EB",
            vec![GeoPoint { lat: 42.0, lon: -83.7 }, GeoPoint { lat: 42.0, lon: -83.7 + dlon }],
        )
        .unwrap()
    }

    fn flat_profile(speed: f64) -> CongestionProfile {
        CongestionProfile {
            base_speed_mps: speed,
            peak_windows: Vec::new(),
            diurnal_dip: 0.0,
            noise_sd_frac: 0.0,
            ..CongestionProfile::default()
        }
    }

    #[test]
    fn mean_speed_composes_peaks_and_dip() {
        let mut profile = flat_profile(20.0);
        assert_eq!(profile.mean_speed("s", 3 * 3600), 20.0);
        profile.peak_windows =
            vec![PeakWindow { start_hour: 6, end_hour: 9, multiplier: 0.5 }];
        assert_eq!(profile.mean_speed("s", 7 * 3600), 10.0);
        // Window end is exclusive.
        assert_eq!(profile.mean_speed("s", 9 * 3600), 20.0);
        profile.peak_windows.clear();
        profile.diurnal_dip = 0.2;
        // The dip peaks at local noon and vanishes at midnight.
        assert!((profile.mean_speed("s", 43_200) - 16.0).abs() < 1e-12);
        assert_eq!(profile.mean_speed("s", 0), 20.0);
    }

    #[test]
    fn mean_speed_never_drops_below_the_floor() {
        let mut profile = flat_profile(1.0);
        profile.peak_windows =
            vec![PeakWindow { start_hour: 0, end_hour: 24, multiplier: 0.01 }];
        assert_eq!(profile.mean_speed("s", 12 * 3600), MIN_SPEED_MPS);
    }

    #[test]
    fn segment_overrides_take_precedence() {
        let mut profile = flat_profile(25.0);
        profile.segment_speeds.insert("fast".to_string(), 32.0);
        assert_eq!(profile.free_speed("fast"), 32.0);
        assert_eq!(profile.free_speed("other"), 25.0);
    }

    #[test]
    fn profile_validation_catches_bad_fields() {
        let ok = CongestionProfile::default();
        assert!(ok.validate().is_ok());
        let mut p = ok.clone();
        p.base_speed_mps = 0.5;
        assert!(p.validate().is_err());
        p = ok.clone();
        p.segment_speeds.insert("s".to_string(), 0.0);
        assert!(p.validate().is_err());
        p = ok.clone();
        p.peak_windows = vec![PeakWindow { start_hour: 9, end_hour: 9, multiplier: 0.5 }];
        assert!(p.validate().is_err());
        p = ok.clone();
        p.peak_windows = vec![PeakWindow { start_hour: 6, end_hour: 25, multiplier: 0.5 }];
        assert!(p.validate().is_err());
        p = ok.clone();
        p.peak_windows = vec![PeakWindow { start_hour: 6, end_hour: 9, multiplier: 1.0 }];
        assert!(p.validate().is_err());
        p = ok.clone();
        p.diurnal_dip = 1.0;
        assert!(p.validate().is_err());
        p = ok.clone();
        p.noise_sd_frac = 0.5;
        assert!(p.validate().is_err());
    }

    #[test]
    fn noiseless_matrix_holds_exact_travel_times() {
        let seg = segment("s1", 1.2);
        let profile = flat_profile(24.0);
        let m = generate_matrix(&profile, std::slice::from_ref(&seg), 2, DayWindow::default(), -240, DEFAULT_FIRST_DAY)
            .unwrap();
        let expect = seg.length_m() / 24.0;
        for day in 0..2 {
            for slot in 0..m.slots_per_day() {
                let cell = m.cell(0, day, slot);
                assert_eq!(cell.tt_s, Some(expect));
                assert_eq!(cell.n_stamps, 1);
                assert!(!cell.interpolated);
            }
        }
    }

    #[test]
    fn matrix_draws_follow_cell_order() {
        let seg = segment("s1", 1.0);
        let profile =
            CongestionProfile { noise_sd_frac: 0.05, seed: 31, ..CongestionProfile::default() };
        let window = DayWindow::new(5, 7).unwrap();
        let m = generate_matrix(&profile, std::slice::from_ref(&seg), 1, window, 0, DEFAULT_FIRST_DAY).unwrap();
        // Replaying the generator's draw order (speed, ax, ay per cell)
        // must reproduce each cell exactly.
        let mut rng = ChaCha8Rng::seed_from_u64(profile.seed);
        let unit = Normal::new(0.0, 1.0).unwrap();
        for slot in 0..window.slots_per_day() {
            let eps: f64 = unit.sample(&mut rng);
            let ax_eps: f64 = unit.sample(&mut rng);
            let _ay_eps: f64 = unit.sample(&mut rng);
            let mean = profile.mean_speed("s1", 5 * 3600 + slot as i64 * INTERVAL_S);
            let speed = (mean + eps * profile.noise_sd_frac * mean).max(MIN_SPEED_MPS);
            let cell = m.cell(0, 0, slot);
            assert_eq!(cell.tt_s, Some(seg.length_m() / speed));
            let ax = 0.02 * (speed - profile.free_speed("s1")) + 0.05 * ax_eps;
            assert_eq!(cell.mean_ax, Some(ax));
        }
    }

    #[test]
    fn matrix_generation_is_deterministic() {
        let seg = segment("s1", 1.0);
        let mut profile =
            CongestionProfile { noise_sd_frac: 0.1, seed: 5, ..CongestionProfile::default() };
        let window = DayWindow::new(6, 8).unwrap();
        let a = generate_matrix(&profile, std::slice::from_ref(&seg), 2, window, 0, DEFAULT_FIRST_DAY).unwrap();
        let b = generate_matrix(&profile, std::slice::from_ref(&seg), 2, window, 0, DEFAULT_FIRST_DAY).unwrap();
        assert_eq!(a, b);
        profile.seed = 6;
        let c = generate_matrix(&profile, &[seg], 2, window, 0, DEFAULT_FIRST_DAY).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn misaligned_timezone_is_rejected() {
        let seg = segment("s1", 1.0);
        let profile = flat_profile(20.0);
        let err = generate_matrix(&profile, std::slice::from_ref(&seg), 1, DayWindow::default(), 7, DEFAULT_FIRST_DAY);
        assert!(err.is_err());
        let dup = generate_matrix(
            &profile,
            &[seg.clone(), seg],
            1,
            DayWindow::default(),
            0,
            DEFAULT_FIRST_DAY,
        );
        assert!(dup.is_err());
    }

    #[test]
    fn trajectories_cover_every_interval_with_constant_speed() {
        let seg = segment("s1", 0.5);
        let profile = flat_profile(20.0);
        let window = DayWindow::new(5, 6).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let bsm = dir.path().join("probes.csv");
        let truth = dir.path().join("truth.csv");
        let report = generate_trajectories(
            std::slice::from_ref(&seg),
            &profile,
            2,
            1,
            window,
            0,
            DEFAULT_FIRST_DAY,
            &bsm,
            &truth,
        )
        .unwrap();
        assert_eq!(report.vehicles, 2 * 12);
        // Each vehicle emits one stamp per decisecond until it leaves the
        // 500 m segment.
        let per_vehicle = (seg.length_m() / 20.0 * 10.0).floor() as u64 + 1;
        assert_eq!(report.stamps, report.vehicles * per_vehicle);
        let rows = read_truth_csv(&truth).unwrap();
        assert_eq!(rows.len(), 12);
        let first_interval = (DEFAULT_FIRST_DAY * 86_400 + 5 * 3600) / INTERVAL_S;
        for (i, (id, interval, speed)) in rows.iter().enumerate() {
            assert_eq!(id, "s1");
            assert_eq!(*interval, first_interval + i as i64);
            assert_eq!(*speed, 20.0);
        }
        let text = fs::read_to_string(&bsm).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("Device,GPS_Time,Latitude,Longitude,Heading,Speed,Ax,Ay"));
        assert_eq!(text.lines().count() as u64, report.stamps + 1);
        // Second vehicle of the first interval enters halfway through.
        let offset_row = lines.nth(per_vehicle as usize).unwrap();
        let entry_s: f64 = offset_row.split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(entry_s, (DEFAULT_FIRST_DAY * 86_400 + 5 * 3600 + 150) as f64);
    }

    #[test]
    fn trajectory_files_are_byte_identical_across_runs() {
        let seg = segment("s1", 0.4);
        let profile =
            CongestionProfile { noise_sd_frac: 0.05, seed: 77, ..CongestionProfile::default() };
        let window = DayWindow::new(5, 6).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let paths: Vec<_> = (0..2)
            .map(|i| (dir.path().join(format!("b{i}.csv")), dir.path().join(format!("t{i}.csv"))))
            .collect();
        for (bsm, truth) in &paths {
            generate_trajectories(
                std::slice::from_ref(&seg),
                &profile,
                3,
                1,
                window,
                -300,
                DEFAULT_FIRST_DAY,
                bsm,
                truth,
            )
            .unwrap();
        }
        assert_eq!(fs::read(&paths[0].0).unwrap(), fs::read(&paths[1].0).unwrap());
        assert_eq!(fs::read(&paths[0].1).unwrap(), fs::read(&paths[1].1).unwrap());
    }

    #[test]
    fn truth_reader_rejects_malformed_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("truth.csv");
        fs::write(&path, "wrong,header\n").unwrap();
        assert!(read_truth_csv(&path).is_err());
        fs::write(&path, "segment_id,interval_index,true_mean_speed_mps\ns1,notanint,20\n").unwrap();
        assert!(read_truth_csv(&path).is_err());
        fs::write(&path, "segment_id,interval_index,true_mean_speed_mps\ns1,5,20,extra\n").unwrap();
        assert!(read_truth_csv(&path).is_err());
        fs::write(&path, "segment_id,interval_index,true_mean_speed_mps\ns1,5,19.5\n").unwrap();
        assert_eq!(read_truth_csv(&path).unwrap(), vec![("s1".to_string(), 5, 19.5)]);
    }
}
