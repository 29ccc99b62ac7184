//! Deterministic input builders shared by the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ttcast_core::geodata::GeoPoint;
use ttcast_core::Segment;

/// Feature matrix with a piecewise target: a step on feature 0, a linear
/// term on the last feature, and uniform noise. Splits on both ends of the
/// feature list pay off, so scans and fits do representative work.
pub fn learning_rows(n: usize, m: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<f64>) {
    assert!(m >= 1, "need at least one feature");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let row: Vec<f64> = (0..m).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let step = if row[0] > 0.0 { 40.0 } else { 10.0 };
        let slope = 3.0 * row[m - 1];
        y.push(step + slope + rng.gen_range(-1.0..1.0));
        rows.push(row);
    }
    (rows, y)
}

/// Straight eastbound segments of the given length, stacked northward a
/// tenth of a degree apart so they never share probe points.
pub fn demo_segments(count: usize, length_km: f64) -> Vec<Segment> {
    (0..count)
        .map(|i| {
            let lat = 42.30 + 0.1 * i as f64;
            let lon = -83.75;
            let dlon = length_km / (111.195 * lat.to_radians().cos());
            Segment::new(
                format!("seg-{i}"),
                "E",
                vec![GeoPoint { lat, lon }, GeoPoint { lat, lon: lon + dlon }],
            )
            .expect("two distinct vertices")
        })
        .collect()
}
