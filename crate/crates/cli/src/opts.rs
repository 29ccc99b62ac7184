//! Argument definitions and flag-value parsers.
//!
//! Malformed flag values fail at parse time and are reported in the
//! `usage` category; range and consistency checks that need more context
//! run inside the commands and surface as `validation` errors.

use std::path::PathBuf;

use clap::{ArgGroup, Args, Parser, Subcommand};
use ttcast_core::learners::Kind;
use ttcast_core::synth::{PeakWindow, DEFAULT_FIRST_DAY};
use ttcast_core::DayWindow;

#[derive(Debug, Parser)]
#[command(
    name = "ttcast",
    version,
    about = "Freeway travel-time estimation from probe-vehicle streams and short-term forecasting",
    propagate_version = true
)]
pub struct Opts {
    /// Worker threads for parallel stages. Defaults to all cores; results
    /// do not depend on it.
    #[arg(long, global = true, value_name = "N")]
    pub workers: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a travel-time matrix from BSM files.
    Estimate(EstimateArgs),
    /// Generate synthetic inputs with known ground truth.
    #[command(subcommand)]
    Synth(SynthCommand),
    /// Build a supervised lag dataset from a matrix.
    Features(FeaturesArgs),
    /// Correlation screen of candidate features.
    Screen(ScreenArgs),
    /// Grid-search hyperparameters by cross-validated MAPE.
    Tune(TuneArgs),
    /// Fit one model and save it.
    Train(TrainArgs),
    /// Predict targets for a dataset with a saved model.
    Predict(PredictArgs),
    /// Train-test MAPE per forecast horizon.
    Evaluate(EvaluateArgs),
    /// Per-feature gain shares of a saved model.
    Importance(ImportanceArgs),
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// BSM CSV files (shell globs expand to several).
    #[arg(long, required = true, num_args = 1.., value_name = "FILE")]
    pub bsm: Vec<PathBuf>,

    /// Segment geometry CSV.
    #[arg(long, value_name = "FILE")]
    pub segments: PathBuf,

    /// Output matrix CSV.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,

    /// Geographic partitions to process independently.
    #[arg(long, default_value_t = 1, value_name = "N")]
    pub partitions: usize,

    /// Map-matching distance gate, meters.
    #[arg(long, default_value_t = 30.0, value_name = "M")]
    pub max_dist_m: f64,

    /// Map-matching heading gate, degrees.
    #[arg(long, default_value_t = 45.0, value_name = "DEG")]
    pub max_heading_delta: f64,

    /// Daily window as start:end local hours.
    #[arg(long, default_value = "5:20", value_parser = window_from_str)]
    pub window: DayWindow,

    /// Local time offset from UTC, minutes (multiple of 5).
    #[arg(long, default_value_t = 0, value_name = "MIN")]
    pub tz_offset_min: i32,

    /// Mean-speed floor applied before travel-time conversion, m/s.
    #[arg(long, default_value_t = 0.5, value_name = "MPS")]
    pub v_floor_mps: f64,
}

#[derive(Debug, Subcommand)]
pub enum SynthCommand {
    /// 10 Hz probe trajectories plus a ground-truth sidecar.
    Trajectories(SynthTrajectoriesArgs),
    /// A travel-time matrix drawn directly from the profile.
    Matrix(SynthMatrixArgs),
}

/// Congestion profile knobs shared by the synth generators.
#[derive(Debug, Args)]
pub struct ProfileArgs {
    /// Free-flow speed, m/s.
    #[arg(long, default_value_t = 25.0, value_name = "MPS")]
    pub base_speed_mps: f64,

    /// Per-segment free-flow override as id=mps. Repeatable.
    #[arg(long = "segment-speed", value_parser = segment_speed_from_str, value_name = "ID=MPS")]
    pub segment_speeds: Vec<(String, f64)>,

    /// Slow windows as start:end@multiplier, comma separated; "none"
    /// disables them.
    #[arg(long, default_value = "6:9@0.6,16:19@0.6", value_parser = profile_peaks_from_str)]
    pub peaks: ProfilePeaks,

    /// Mid-day dip depth, in [0, 1).
    #[arg(long, default_value_t = 0.15)]
    pub dip: f64,

    /// Gaussian speed noise as a fraction of the mean, in [0, 0.5).
    #[arg(long, default_value_t = 0.0)]
    pub noise_sd: f64,
}

/// Flags shared by both synth generators.
#[derive(Debug, Args)]
pub struct SynthCommonArgs {
    /// Segment geometry CSV.
    #[arg(long, value_name = "FILE")]
    pub segments: PathBuf,

    /// Number of days to generate.
    #[arg(long, value_name = "N")]
    pub days: usize,

    /// Daily window as start:end local hours.
    #[arg(long, default_value = "5:20", value_parser = window_from_str)]
    pub window: DayWindow,

    /// Local time offset from UTC, minutes (multiple of 5).
    #[arg(long, default_value_t = 0, value_name = "MIN")]
    pub tz_offset_min: i32,

    /// First day as days since the epoch.
    #[arg(long, default_value_t = DEFAULT_FIRST_DAY, value_name = "DAYS")]
    pub first_day: i64,

    /// Random seed for the profile draws.
    #[arg(long)]
    pub seed: u64,

    #[command(flatten)]
    pub profile: ProfileArgs,
}

#[derive(Debug, Args)]
pub struct SynthTrajectoriesArgs {
    #[command(flatten)]
    pub common: SynthCommonArgs,

    /// Vehicles entering each segment per interval.
    #[arg(long, default_value_t = 2, value_name = "N")]
    pub vehicles: usize,

    /// Output BSM CSV.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,

    /// Output ground-truth sidecar CSV.
    #[arg(long, value_name = "FILE")]
    pub truth: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthMatrixArgs {
    #[command(flatten)]
    pub common: SynthCommonArgs,

    /// Output matrix CSV.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FeaturesArgs {
    /// Input matrix CSV.
    #[arg(long, value_name = "FILE")]
    pub matrix: PathBuf,

    /// Output dataset CSV.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,

    /// Lagged travel times per row, in 1..=6.
    #[arg(long, default_value_t = 3)]
    pub omega: usize,

    /// Forecast horizon in 5-minute steps, in 1..=6.
    #[arg(long, default_value_t = 1)]
    pub horizon: usize,

    /// Add lag-1 travel times of the upstream and downstream neighbors.
    #[arg(long, requires = "neighbors")]
    pub spatial: bool,

    /// Neighbor CSV (segment_id,upstream_id,downstream_id).
    #[arg(long, value_name = "FILE")]
    pub neighbors: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ScreenArgs {
    /// Input matrix CSV.
    #[arg(long, value_name = "FILE")]
    pub matrix: PathBuf,

    /// Output correlation CSV.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    /// Learner kind: dt, bagging, rf, adaboost, gb, or xgb.
    #[arg(long)]
    pub algo: Kind,

    /// Input dataset CSV.
    #[arg(long, value_name = "FILE")]
    pub dataset: PathBuf,

    /// Output surface CSV (one row per combination).
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,

    /// Random seed for fold assignment and tree sampling.
    #[arg(long)]
    pub seed: u64,

    /// Grid config file (t/L/d/k as key = value lists).
    #[arg(long, value_name = "FILE")]
    pub grid: Option<PathBuf>,

    /// Tree counts to score. Overrides the grid file; required without one.
    #[arg(long, value_parser = usize_list_from_str, value_name = "LIST")]
    pub t: Option<UsizeList>,

    /// Learning rates to score. Overrides the grid file and default menu.
    #[arg(long = "learning-rates", value_parser = f64_list_from_str, value_name = "LIST")]
    pub learning_rates: Option<F64List>,

    /// Depths to score. Overrides the grid file and default menu.
    #[arg(long, value_parser = usize_list_from_str, value_name = "LIST")]
    pub depths: Option<UsizeList>,

    /// Cross-validation folds. Overrides the grid file.
    #[arg(long)]
    pub k: Option<usize>,
}

/// Hyperparameter overrides on top of the learner's reference defaults.
#[derive(Debug, Args)]
pub struct ParamArgs {
    /// Trees or boosting rounds.
    #[arg(long)]
    pub t: Option<usize>,

    /// Shrinkage, in (0, 1].
    #[arg(long)]
    pub learning_rate: Option<f64>,

    /// Maximum split depth; 0 grows until no split improves.
    #[arg(long)]
    pub max_depth: Option<usize>,

    /// Minimum rows on each side of a split.
    #[arg(long)]
    pub min_leaf: Option<usize>,

    /// L2 leaf penalty (xgb).
    #[arg(long)]
    pub lambda: Option<f64>,

    /// Per-leaf split penalty (xgb).
    #[arg(long)]
    pub gamma: Option<f64>,

    /// Features sampled per node (rf).
    #[arg(long)]
    pub mtry: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Learner kind: dt, bagging, rf, adaboost, gb, or xgb.
    #[arg(long)]
    pub algo: Kind,

    /// Input dataset CSV.
    #[arg(long, value_name = "FILE")]
    pub dataset: PathBuf,

    /// Output model file.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,

    /// Random seed for tree sampling.
    #[arg(long)]
    pub seed: u64,

    #[command(flatten)]
    pub params: ParamArgs,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Saved model file.
    #[arg(long, value_name = "FILE")]
    pub model: PathBuf,

    /// Input dataset CSV.
    #[arg(long, value_name = "FILE")]
    pub dataset: PathBuf,

    /// Output predictions CSV.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("source").required(true).args(["matrix", "train_matrix"])))]
pub struct EvaluateArgs {
    /// Learner kind: dt, bagging, rf, adaboost, gb, or xgb.
    #[arg(long)]
    pub algo: Kind,

    /// Matrix CSV split chronologically by --train-frac.
    #[arg(long, value_name = "FILE")]
    pub matrix: Option<PathBuf>,

    /// Fraction of days used for training when --matrix is given.
    #[arg(long, default_value_t = 0.75)]
    pub train_frac: f64,

    /// Training matrix CSV (with --test-matrix).
    #[arg(long, value_name = "FILE", requires = "test_matrix")]
    pub train_matrix: Option<PathBuf>,

    /// Test matrix CSV (with --train-matrix).
    #[arg(long, value_name = "FILE", requires = "train_matrix", conflicts_with = "matrix")]
    pub test_matrix: Option<PathBuf>,

    /// Horizons in 5-minute steps: a..b range or comma list.
    #[arg(long, default_value = "1..6", value_parser = horizons_from_str)]
    pub horizons: HorizonList,

    /// Lagged travel times per row, in 1..=6.
    #[arg(long, default_value_t = 3)]
    pub omega: usize,

    /// Add lag-1 travel times of the upstream and downstream neighbors.
    #[arg(long, requires = "neighbors")]
    pub spatial: bool,

    /// Neighbor CSV (segment_id,upstream_id,downstream_id).
    #[arg(long, value_name = "FILE")]
    pub neighbors: Option<PathBuf>,

    /// Peak windows as start:end local hours, comma separated.
    #[arg(long, value_parser = peaks_from_str, value_name = "LIST")]
    pub peak: Option<PeakList>,

    /// Random seed for tree sampling.
    #[arg(long)]
    pub seed: u64,

    /// Output horizon table CSV.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,

    /// Optional per-row predictions CSV for external plotting.
    #[arg(long, value_name = "FILE")]
    pub predictions_out: Option<PathBuf>,

    #[command(flatten)]
    pub params: ParamArgs,
}

#[derive(Debug, Args)]
pub struct ImportanceArgs {
    /// Saved model file.
    #[arg(long, value_name = "FILE")]
    pub model: PathBuf,

    /// Output importance CSV.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

#[derive(Debug, Clone)]
pub struct UsizeList(pub Vec<usize>);

#[derive(Debug, Clone)]
pub struct F64List(pub Vec<f64>);

#[derive(Debug, Clone)]
pub struct HorizonList(pub Vec<usize>);

#[derive(Debug, Clone)]
pub struct PeakList(pub Vec<(u32, u32)>);

#[derive(Debug, Clone)]
pub struct ProfilePeaks(pub Vec<PeakWindow>);

fn window_from_str(s: &str) -> Result<DayWindow, String> {
    let (start, end) = s
        .split_once(':')
        .ok_or_else(|| format!("window must look like 5:20, got {s:?}"))?;
    let start: u8 = start.trim().parse().map_err(|_| format!("bad window start {start:?}"))?;
    let end: u8 = end.trim().parse().map_err(|_| format!("bad window end {end:?}"))?;
    DayWindow::new(start, end).map_err(|e| e.to_string())
}

fn segment_speed_from_str(s: &str) -> Result<(String, f64), String> {
    let (id, speed) = s
        .split_once('=')
        .ok_or_else(|| format!("segment speed must look like id=26.5, got {s:?}"))?;
    if id.is_empty() {
        return Err("segment speed needs a non-empty id".to_string());
    }
    let speed: f64 = speed.trim().parse().map_err(|_| format!("bad speed {speed:?}"))?;
    Ok((id.to_string(), speed))
}

fn hour_pair_from_str(s: &str) -> Result<(u32, u32), String> {
    let (start, end) = s
        .split_once(':')
        .ok_or_else(|| format!("peak window must look like 6:9, got {s:?}"))?;
    let start: u32 = start.trim().parse().map_err(|_| format!("bad peak start {start:?}"))?;
    let end: u32 = end.trim().parse().map_err(|_| format!("bad peak end {end:?}"))?;
    Ok((start, end))
}

fn peaks_from_str(s: &str) -> Result<PeakList, String> {
    if s == "none" || s.trim().is_empty() {
        return Ok(PeakList(Vec::new()));
    }
    s.split(',').map(|part| hour_pair_from_str(part.trim())).collect::<Result<Vec<_>, _>>().map(PeakList)
}

fn profile_peaks_from_str(s: &str) -> Result<ProfilePeaks, String> {
    if s == "none" || s.trim().is_empty() {
        return Ok(ProfilePeaks(Vec::new()));
    }
    let mut windows = Vec::new();
    for part in s.split(',') {
        let part = part.trim();
        let (hours, multiplier) = part
            .split_once('@')
            .ok_or_else(|| format!("peak must look like 6:9@0.6, got {part:?}"))?;
        let (start, end) = hour_pair_from_str(hours)?;
        let start = u8::try_from(start).map_err(|_| format!("bad peak start in {part:?}"))?;
        let end = u8::try_from(end).map_err(|_| format!("bad peak end in {part:?}"))?;
        let multiplier: f64 =
            multiplier.trim().parse().map_err(|_| format!("bad multiplier {multiplier:?}"))?;
        windows.push(PeakWindow { start_hour: start, end_hour: end, multiplier });
    }
    Ok(ProfilePeaks(windows))
}

fn horizons_from_str(s: &str) -> Result<HorizonList, String> {
    let s = s.trim();
    if let Some((lo, hi)) = s.split_once("..") {
        let lo: usize = lo.trim().parse().map_err(|_| format!("bad horizon {lo:?}"))?;
        let hi: usize = hi.trim().parse().map_err(|_| format!("bad horizon {hi:?}"))?;
        if lo > hi {
            return Err(format!("empty horizon range {s:?}"));
        }
        return Ok(HorizonList((lo..=hi).collect()));
    }
    s.split(',')
        .map(|part| part.trim().parse::<usize>().map_err(|_| format!("bad horizon {part:?}")))
        .collect::<Result<Vec<_>, _>>()
        .map(HorizonList)
}

fn usize_list_from_str(s: &str) -> Result<UsizeList, String> {
    s.split(',')
        .map(|part| part.trim().parse::<usize>().map_err(|_| format!("bad integer {part:?}")))
        .collect::<Result<Vec<_>, _>>()
        .map(UsizeList)
}

fn f64_list_from_str(s: &str) -> Result<F64List, String> {
    s.split(',')
        .map(|part| part.trim().parse::<f64>().map_err(|_| format!("bad number {part:?}")))
        .collect::<Result<Vec<_>, _>>()
        .map(F64List)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_parses_and_validates() {
        let w = window_from_str("5:20").unwrap();
        assert_eq!((w.start_hour, w.end_hour), (5, 20));
        assert!(window_from_str("5").is_err());
        assert!(window_from_str("20:5").is_err());
        assert!(window_from_str("x:y").is_err());
    }

    #[test]
    fn horizons_accept_ranges_and_lists() {
        assert_eq!(horizons_from_str("1..6").unwrap().0, vec![1, 2, 3, 4, 5, 6]);
        assert_eq!(horizons_from_str("2,4").unwrap().0, vec![2, 4]);
        assert!(horizons_from_str("6..1").is_err());
        assert!(horizons_from_str("a").is_err());
    }

    #[test]
    fn peak_lists_parse() {
        assert_eq!(peaks_from_str("6:9,16:19").unwrap().0, vec![(6, 9), (16, 19)]);
        assert!(peaks_from_str("none").unwrap().0.is_empty());
        assert!(peaks_from_str("6-9").is_err());
    }

    #[test]
    fn profile_peaks_parse_with_multipliers() {
        let p = profile_peaks_from_str("6:9@0.6,16:19@0.5").unwrap().0;
        assert_eq!(p.len(), 2);
        assert_eq!(p[0].start_hour, 6);
        assert_eq!(p[1].multiplier, 0.5);
        assert!(profile_peaks_from_str("6:9").is_err());
        assert!(profile_peaks_from_str("none").unwrap().0.is_empty());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Opts::command().debug_assert();
    }
}
