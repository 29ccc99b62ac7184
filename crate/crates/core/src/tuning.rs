//! Hyperparameter search and the evaluation protocol.
//!
//! Tuning scores a parameter combination by k-fold cross-validated MAPE,
//! averaged over segments within a fold and then over folds. The tree
//! count t is never refit per value: one fit at the largest t serves
//! every smaller t through staged prediction.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::Error;
use crate::estimation::TravelTimeMatrix;
use crate::features::{build_supervised, FeatureSpec, NeighborMap, SupervisedDataset};
use crate::learners::{fit, predict_at_stages, Hyperparams, Kind};
use crate::Result;

/// Mean absolute percentage error in percent. Actuals must be positive.
pub fn mape(actual: &[f64], predicted: &[f64]) -> Result<f64> {
    if actual.len() != predicted.len() {
        return Err(Error::validation("actual and predicted differ in length"));
    }
    if actual.is_empty() {
        return Err(Error::validation("mape needs at least one pair"));
    }
    let mut sum = 0.0;
    for (&a, &p) in actual.iter().zip(predicted) {
        if !(a.is_finite() && a > 0.0) {
            return Err(Error::validation(format!("actual value {a} is not positive")));
        }
        if !p.is_finite() {
            return Err(Error::validation("predicted value is non-finite"));
        }
        sum += (a - p).abs() / a;
    }
    Ok(sum / actual.len() as f64 * 100.0)
}

/// Splits `0..n` into `k` disjoint folds: a seeded shuffle followed by
/// contiguous slicing. The first `n % k` folds hold one extra index.
pub fn kfold_split(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::validation("k must be at least 2"));
    }
    if n < k {
        return Err(Error::validation(format!("cannot split {n} rows into {k} folds")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let base = n / k;
    let extra = n % k;
    let mut folds = Vec::with_capacity(k);
    let mut at = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        folds.push(order[at..at + size].to_vec());
        at += size;
    }
    Ok(folds)
}

/// Cross-validation outcome for one parameter combination.
#[derive(Debug, Clone, PartialEq)]
pub struct CvScore {
    /// Mean over folds of the fold's segment-averaged MAPE, percent.
    pub mean_mape: f64,
    /// Sample standard deviation over folds.
    pub sd_mape: f64,
    pub fold_mapes: Vec<f64>,
    /// Segments that some fold could not score, e.g. `"fold 2: segment
    /// \"s1\" has no held-out rows"`.
    pub warnings: Vec<String>,
}

fn fold_seed(seed: u64, fold: usize) -> u64 {
    seed ^ ((fold as u64 + 1) << 32)
}

fn sd(values: &[f64], mean: f64) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (ss / (values.len() - 1) as f64).sqrt()
}

/// Per-segment MAPE of held-out rows, averaged over the segments present.
/// `universe` lists every segment of the dataset so that missing ones can
/// be reported.
fn segment_averaged_mape(
    ds: &SupervisedDataset,
    test_idx: &[usize],
    preds: &[f64],
    universe: &[String],
    fold: usize,
    warnings: &mut Vec<String>,
) -> Result<f64> {
    let mut by_segment: BTreeMap<&str, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for (pos, &row) in test_idx.iter().enumerate() {
        let entry = by_segment.entry(ds.origins[row].segment_id.as_str()).or_default();
        entry.0.push(ds.targets[row]);
        entry.1.push(preds[pos]);
    }
    for id in universe {
        if !by_segment.contains_key(id.as_str()) {
            warnings.push(format!("fold {fold}: segment {id:?} has no held-out rows"));
        }
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for (actuals, predicted) in by_segment.values() {
        sum += mape(actuals, predicted)?;
        count += 1;
    }
    if count == 0 {
        return Err(Error::validation("fold has no scorable segments"));
    }
    Ok(sum / count as f64)
}

/// Cross-validated score of one combination at each tree count in
/// `t_values` (ascending), from a single fit per fold at the largest.
fn cv_surface(
    ds: &SupervisedDataset,
    kind: Kind,
    params: &Hyperparams,
    t_values: &[usize],
    k: usize,
    seed: u64,
) -> Result<Vec<CvScore>> {
    debug_assert!(t_values.windows(2).all(|w| w[0] < w[1]));
    let folds = kfold_split(ds.len(), k, seed)?;
    let universe = ds.segment_ids();
    let t_max = *t_values.last().expect("non-empty t grid");
    let fit_params = Hyperparams { t: t_max, ..params.clone() };
    // One entry per fold: MAPE per t value plus warnings.
    let per_fold: Vec<Result<(Vec<f64>, Vec<String>)>> = folds
        .par_iter()
        .enumerate()
        .map(|(fi, test_idx)| {
            let mut in_test = vec![false; ds.len()];
            for &i in test_idx {
                in_test[i] = true;
            }
            let mut train_rows = Vec::with_capacity(ds.len() - test_idx.len());
            let mut train_y = Vec::with_capacity(ds.len() - test_idx.len());
            for (i, row) in ds.rows.iter().enumerate() {
                if !in_test[i] {
                    train_rows.push(row.clone());
                    train_y.push(ds.targets[i]);
                }
            }
            let model = fit(kind, &train_rows, &train_y, &fit_params, fold_seed(seed, fi))?;
            let test_rows: Vec<Vec<f64>> = test_idx.iter().map(|&i| ds.rows[i].clone()).collect();
            let staged = predict_at_stages(&model, &test_rows, t_values)?;
            let mut warnings = Vec::new();
            let mut scores = Vec::with_capacity(t_values.len());
            for (ti, preds) in staged.iter().enumerate() {
                // Warn once per fold, not once per t value.
                let mut sink = Vec::new();
                let w = if ti == 0 { &mut warnings } else { &mut sink };
                scores.push(segment_averaged_mape(ds, test_idx, preds, &universe, fi, w)?);
            }
            Ok((scores, warnings))
        })
        .collect();
    let mut fold_scores: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut warnings = Vec::new();
    for outcome in per_fold {
        let (scores, mut w) = outcome?;
        fold_scores.push(scores);
        warnings.append(&mut w);
    }
    let mut out = Vec::with_capacity(t_values.len());
    for ti in 0..t_values.len() {
        let fold_mapes: Vec<f64> = fold_scores.iter().map(|f| f[ti]).collect();
        let mean = fold_mapes.iter().sum::<f64>() / fold_mapes.len() as f64;
        out.push(CvScore {
            mean_mape: mean,
            sd_mape: sd(&fold_mapes, mean),
            fold_mapes,
            warnings: if ti == 0 { warnings.clone() } else { Vec::new() },
        });
    }
    Ok(out)
}

/// Cross-validated MAPE of a single parameter combination.
pub fn cv_score(
    ds: &SupervisedDataset,
    kind: Kind,
    params: &Hyperparams,
    k: usize,
    seed: u64,
) -> Result<CvScore> {
    let scores = cv_surface(ds, kind, params, &[params.t], k, seed)?;
    Ok(scores.into_iter().next().expect("one t value"))
}

/// The search space for one learner kind.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub kind: Kind,
    /// Tree counts to score; required, each in 1..=8000.
    pub t_values: Vec<usize>,
    /// Learning rates, each in (0, 1]. Ignored by dt, bagging, and rf.
    pub learning_rates: Vec<f64>,
    /// Split depths, each in 1..=7. Varied for gb and xgb only.
    pub depths: Vec<usize>,
    pub k: usize,
    pub seed: u64,
}

/// Learning rates scored when a grid does not specify its own.
pub const DEFAULT_LEARNING_RATES: [f64; 9] =
    [0.0001, 0.0005, 0.001, 0.005, 0.01, 0.05, 0.1, 0.5, 1.0];

/// Depths scored when a grid does not specify its own.
pub const DEFAULT_DEPTHS: [usize; 7] = [1, 2, 3, 4, 5, 6, 7];

pub const MAX_GRID_T: usize = 8000;
pub const MAX_GRID_DEPTH: usize = 7;

impl GridSpec {
    /// A grid over the given tree counts with the default learning-rate
    /// and depth menus.
    pub fn new(kind: Kind, t_values: Vec<usize>, k: usize, seed: u64) -> Result<Self> {
        let spec = GridSpec {
            kind,
            t_values,
            learning_rates: DEFAULT_LEARNING_RATES.to_vec(),
            depths: DEFAULT_DEPTHS.to_vec(),
            k,
            seed,
        };
        spec.validated()
    }

    /// Normalizes (sorts, dedups) and validates the grid.
    pub fn validated(mut self) -> Result<Self> {
        self.t_values.sort_unstable();
        self.t_values.dedup();
        self.depths.sort_unstable();
        self.depths.dedup();
        self.learning_rates.sort_by(|a, b| a.partial_cmp(b).expect("finite learning rates"));
        self.learning_rates.dedup();
        if self.t_values.is_empty() {
            return Err(Error::validation("grid needs at least one t value"));
        }
        if self.t_values.iter().any(|&t| !(1..=MAX_GRID_T).contains(&t)) {
            return Err(Error::validation(format!("t values must lie in 1..={MAX_GRID_T}")));
        }
        if self.learning_rates.is_empty() {
            return Err(Error::validation("grid needs at least one learning rate"));
        }
        if self.learning_rates.iter().any(|&l| !(l.is_finite() && l > 0.0 && l <= 1.0)) {
            return Err(Error::validation("learning rates must lie in (0, 1]"));
        }
        if self.depths.is_empty() {
            return Err(Error::validation("grid needs at least one depth"));
        }
        if self.depths.iter().any(|&d| !(1..=MAX_GRID_DEPTH).contains(&d)) {
            return Err(Error::validation(format!("depths must lie in 1..={MAX_GRID_DEPTH}")));
        }
        if self.k < 2 {
            return Err(Error::validation("k must be at least 2"));
        }
        Ok(self)
    }

    /// Parses a `key = values` grid file. Keys: `t`, `L`, `d`, `k`;
    /// values are comma or space separated; `#` starts a comment. `t` is
    /// required; `L` and `d` fall back to the default menus.
    pub fn from_config_str(kind: Kind, text: &str, seed: u64) -> Result<Self> {
        let mut t_values: Option<Vec<usize>> = None;
        let mut learning_rates: Option<Vec<f64>> = None;
        let mut depths: Option<Vec<usize>> = None;
        let mut k: usize = 5;
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, rest) = line.split_once('=').ok_or_else(|| {
                Error::validation(format!("grid config line {}: expected key = values", ln + 1))
            })?;
            let values: Vec<&str> = rest
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|s| !s.is_empty())
                .collect();
            if values.is_empty() {
                return Err(Error::validation(format!(
                    "grid config line {}: no values for {}",
                    ln + 1,
                    key.trim()
                )));
            }
            let parse_usizes = || -> Result<Vec<usize>> {
                values
                    .iter()
                    .map(|v| {
                        v.parse::<usize>().map_err(|_| {
                            Error::validation(format!("grid config line {}: bad integer {v:?}", ln + 1))
                        })
                    })
                    .collect()
            };
            match key.trim() {
                "t" => t_values = Some(parse_usizes()?),
                "d" => depths = Some(parse_usizes()?),
                "L" => {
                    let parsed: Result<Vec<f64>> = values
                        .iter()
                        .map(|v| {
                            v.parse::<f64>().map_err(|_| {
                                Error::validation(format!(
                                    "grid config line {}: bad number {v:?}",
                                    ln + 1
                                ))
                            })
                        })
                        .collect();
                    learning_rates = Some(parsed?);
                }
                "k" => {
                    let parsed = parse_usizes()?;
                    if parsed.len() != 1 {
                        return Err(Error::validation(format!(
                            "grid config line {}: k takes one value",
                            ln + 1
                        )));
                    }
                    k = parsed[0];
                }
                other => {
                    return Err(Error::validation(format!(
                        "grid config line {}: unknown key {other:?} (expected t, L, d, k)",
                        ln + 1
                    )))
                }
            }
        }
        let t_values =
            t_values.ok_or_else(|| Error::validation("grid config must set t".to_string()))?;
        GridSpec {
            kind,
            t_values,
            learning_rates: learning_rates.unwrap_or_else(|| DEFAULT_LEARNING_RATES.to_vec()),
            depths: depths.unwrap_or_else(|| DEFAULT_DEPTHS.to_vec()),
            k,
            seed,
        }
        .validated()
    }

    /// `(learning_rate, depth)` combinations this kind actually varies.
    /// Parameters a learner ignores stay at their tuned defaults.
    fn base_combos(&self) -> Vec<(f64, Option<usize>)> {
        let defaults = Hyperparams::defaults(self.kind);
        match self.kind {
            Kind::Dt | Kind::Bagging | Kind::Rf => {
                vec![(defaults.learning_rate, defaults.max_depth)]
            }
            Kind::Adaboost => {
                self.learning_rates.iter().map(|&l| (l, defaults.max_depth)).collect()
            }
            Kind::Gb | Kind::Xgb => {
                let mut combos = Vec::with_capacity(self.learning_rates.len() * self.depths.len());
                for &d in &self.depths {
                    for &l in &self.learning_rates {
                        combos.push((l, Some(d)));
                    }
                }
                combos
            }
        }
    }
}

/// One scored grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct TuneRow {
    pub t: usize,
    pub learning_rate: f64,
    pub max_depth: Option<usize>,
    pub mean_mape: f64,
    pub sd_mape: f64,
    pub fold_mapes: Vec<f64>,
}

/// Full search surface plus the tie-broken best point.
#[derive(Debug, Clone, PartialEq)]
pub struct TuneResult {
    pub kind: Kind,
    pub rows: Vec<TuneRow>,
    /// Index into `rows` of the selected combination.
    pub best: usize,
    pub warnings: Vec<String>,
}

impl TuneResult {
    pub fn best_row(&self) -> &TuneRow {
        &self.rows[self.best]
    }

    /// Hyperparameters of the selected combination, on top of the kind's
    /// defaults.
    pub fn best_params(&self) -> Hyperparams {
        let row = self.best_row();
        Hyperparams {
            t: row.t,
            learning_rate: row.learning_rate,
            max_depth: row.max_depth,
            ..Hyperparams::defaults(self.kind)
        }
    }

    /// Writes the surface as CSV, one row per combination, with the
    /// selected row marked.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        let write = |out: &mut BufWriter<fs::File>| -> std::io::Result<()> {
            writeln!(out, "kind,t,learning_rate,max_depth,mean_mape_pct,sd_mape_pct,selected")?;
            for (i, row) in self.rows.iter().enumerate() {
                let depth = row.max_depth.map(|d| d.to_string()).unwrap_or_default();
                writeln!(
                    out,
                    "{},{},{},{},{},{},{}",
                    self.kind,
                    row.t,
                    row.learning_rate,
                    depth,
                    row.mean_mape,
                    row.sd_mape,
                    i == self.best
                )?;
            }
            out.flush()
        };
        write(&mut out).map_err(|e| Error::io(path, e))
    }
}

/// True when `a` beats `b`: lower MAPE, with ties preferring the smaller
/// t, then the smaller depth, then the larger learning rate.
fn beats(a: &TuneRow, b: &TuneRow) -> bool {
    if a.mean_mape != b.mean_mape {
        return a.mean_mape < b.mean_mape;
    }
    if a.t != b.t {
        return a.t < b.t;
    }
    let da = a.max_depth.unwrap_or(usize::MAX);
    let db = b.max_depth.unwrap_or(usize::MAX);
    if da != db {
        return da < db;
    }
    a.learning_rate > b.learning_rate
}

/// Scores every combination of the grid by cross-validated MAPE and
/// selects the best. Deterministic in `(dataset, grid)`.
pub fn grid_search(ds: &SupervisedDataset, grid: &GridSpec) -> Result<TuneResult> {
    let grid = grid.clone().validated()?;
    let defaults = Hyperparams::defaults(grid.kind);
    let t_values: Vec<usize> = if grid.kind == Kind::Dt { vec![1] } else { grid.t_values.clone() };
    let mut rows = Vec::new();
    let mut warnings: Vec<String> = Vec::new();
    for (learning_rate, max_depth) in grid.base_combos() {
        let params = Hyperparams { learning_rate, max_depth, ..defaults.clone() };
        let scores = cv_surface(ds, grid.kind, &params, &t_values, grid.k, grid.seed)?;
        for (ti, score) in scores.into_iter().enumerate() {
            for w in score.warnings {
                if !warnings.contains(&w) {
                    warnings.push(w);
                }
            }
            rows.push(TuneRow {
                t: t_values[ti],
                learning_rate,
                max_depth,
                mean_mape: score.mean_mape,
                sd_mape: score.sd_mape,
                fold_mapes: score.fold_mapes,
            });
        }
    }
    let mut best = 0;
    for i in 1..rows.len() {
        if beats(&rows[i], &rows[best]) {
            best = i;
        }
    }
    Ok(TuneResult { kind: grid.kind, rows, best, warnings })
}

/// Splits a matrix into chronological train and test parts: the earliest
/// `train_fraction` of days (floored, at least one day on each side).
pub fn split_matrix_chronological(
    matrix: &TravelTimeMatrix,
    train_fraction: f64,
) -> Result<(TravelTimeMatrix, TravelTimeMatrix)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::validation("train fraction must lie in (0, 1)"));
    }
    let n = matrix.n_days();
    if n < 2 {
        return Err(Error::validation("chronological split needs at least two days"));
    }
    let train_days = ((n as f64 * train_fraction).floor() as usize).clamp(1, n - 1);
    Ok((matrix.slice_days(0, train_days)?, matrix.slice_days(train_days, n - train_days)?))
}

/// Test MAPE of one horizon, with optional peak/non-peak breakdown.
#[derive(Debug, Clone, PartialEq)]
pub struct HorizonScore {
    pub horizon_steps: usize,
    /// Segment-averaged test MAPE, percent.
    pub mape: f64,
    /// Set when peak windows were given and the partition is non-empty.
    pub peak_mape: Option<f64>,
    pub nonpeak_mape: Option<f64>,
    pub train_rows: u64,
    pub test_rows: u64,
}

/// One test-set prediction, kept for external plotting.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRecord {
    pub horizon_steps: usize,
    pub segment_id: String,
    pub anchor_epoch: i64,
    pub actual: f64,
    pub predicted: f64,
}

/// Evaluation protocol: for each horizon, build train and test datasets
/// from the two matrices, fit one model on the train side, and report the
/// segment-averaged test MAPE. Peak membership is decided by the row's
/// hour feature against the given local-hour windows.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_horizons(
    train: &TravelTimeMatrix,
    test: &TravelTimeMatrix,
    kind: Kind,
    params: &Hyperparams,
    horizons: &[usize],
    omega: usize,
    spatial: bool,
    neighbors: Option<&NeighborMap>,
    peak_windows: Option<&[(u32, u32)]>,
    seed: u64,
) -> Result<(Vec<HorizonScore>, Vec<PredictionRecord>)> {
    if horizons.is_empty() {
        return Err(Error::validation("need at least one horizon"));
    }
    if train.window() != test.window() || train.tz_offset_min() != test.tz_offset_min() {
        return Err(Error::validation("train and test matrices disagree on window or timezone"));
    }
    let mut scores = Vec::with_capacity(horizons.len());
    let mut records = Vec::new();
    for &h in horizons {
        let spec = FeatureSpec::new(omega, h, spatial)?;
        let (train_ds, _) = build_supervised(train, &spec, neighbors)?;
        let (test_ds, _) = build_supervised(test, &spec, neighbors)?;
        if train_ds.is_empty() || test_ds.is_empty() {
            return Err(Error::validation(format!(
                "horizon {h}: empty train or test dataset"
            )));
        }
        let model = fit(kind, &train_ds.rows, &train_ds.targets, params, seed)?;
        let preds = model.predict_batch(&test_ds.rows)?;
        let all_idx: Vec<usize> = (0..test_ds.len()).collect();
        let mape_all = mape_over(&test_ds, &all_idx, &preds)?;
        let (peak_mape, nonpeak_mape) = match peak_windows {
            None => (None, None),
            Some(windows) => {
                let start = test.window().start_hour;
                let (peak_idx, nonpeak_idx) = split_peak(&test_ds, u32::from(start), windows)?;
                let score = |idx: &[usize]| -> Result<Option<f64>> {
                    if idx.is_empty() {
                        Ok(None)
                    } else {
                        mape_over(&test_ds, idx, &preds).map(Some)
                    }
                };
                (score(&peak_idx)?, score(&nonpeak_idx)?)
            }
        };
        for (i, origin) in test_ds.origins.iter().enumerate() {
            records.push(PredictionRecord {
                horizon_steps: h,
                segment_id: origin.segment_id.clone(),
                anchor_epoch: origin.anchor_epoch,
                actual: test_ds.targets[i],
                predicted: preds[i],
            });
        }
        scores.push(HorizonScore {
            horizon_steps: h,
            mape: mape_all,
            peak_mape,
            nonpeak_mape,
            train_rows: train_ds.len() as u64,
            test_rows: test_ds.len() as u64,
        });
    }
    Ok((scores, records))
}

/// Segment-averaged MAPE over a row subset; `preds` is aligned with the
/// full dataset.
fn mape_over(ds: &SupervisedDataset, idx: &[usize], preds: &[f64]) -> Result<f64> {
    let mut by_segment: BTreeMap<&str, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for &i in idx {
        let entry = by_segment.entry(ds.origins[i].segment_id.as_str()).or_default();
        entry.0.push(ds.targets[i]);
        entry.1.push(preds[i]);
    }
    if by_segment.is_empty() {
        return Err(Error::validation("no rows to score"));
    }
    let mut sum = 0.0;
    for (actuals, predicted) in by_segment.values() {
        sum += mape(actuals, predicted)?;
    }
    Ok(sum / by_segment.len() as f64)
}

/// Partitions dataset rows into peak and non-peak index sets. The
/// `hour_of_day` feature is one-based within the daily window, so
/// `window_start_hour` maps it back to a local hour, which is peak when
/// it falls in any `[start, end)` window. An empty window list marks
/// everything non-peak.
pub fn split_peak(
    ds: &SupervisedDataset,
    window_start_hour: u32,
    peak_windows: &[(u32, u32)],
) -> Result<(Vec<usize>, Vec<usize>)> {
    for &(start, end) in peak_windows {
        if start >= end || end > 24 {
            return Err(Error::validation(format!("bad peak window {start}:{end}")));
        }
    }
    let hour_col = ds
        .feature_names
        .iter()
        .position(|n| n == "hour_of_day")
        .ok_or_else(|| Error::validation("dataset has no hour_of_day feature"))?;
    let mut peak = Vec::new();
    let mut nonpeak = Vec::new();
    for (i, row) in ds.rows.iter().enumerate() {
        let local_hour = row[hour_col] - 1.0 + f64::from(window_start_hour);
        let is_peak =
            peak_windows.iter().any(|&(s, e)| local_hour >= f64::from(s) && local_hour < f64::from(e));
        if is_peak {
            peak.push(i);
        } else {
            nonpeak.push(i);
        }
    }
    Ok((peak, nonpeak))
}

/// Default peak windows in local hours.
pub const DEFAULT_PEAK_WINDOWS: [(u32, u32); 2] = [(6, 9), (16, 19)];
