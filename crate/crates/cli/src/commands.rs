//! One function per subcommand. Each reads its inputs, delegates to the
//! library, writes the outputs, and records a run manifest next to the
//! primary output file.

use std::fs;
use std::path::Path;

use serde_json::json;
use ttcast_core::estimation::{
    estimate_from_files, read_matrix_file, write_matrix_file, PipelineConfig, PipelineReport,
};
use ttcast_core::features::{
    build_supervised, read_dataset_csv, screen_features, write_dataset_csv, FeatureSpec,
    NeighborMap,
};
use ttcast_core::geodata::{load_segments, MatchGates, Segment};
use ttcast_core::learners::{
    feature_importance, fit, load_model, save_model, Hyperparams, Kind,
};
use ttcast_core::synth::{generate_matrix, generate_trajectories, CongestionProfile, PeakWindow};
use ttcast_core::tuning::{
    evaluate_horizons, grid_search, split_matrix_chronological, GridSpec,
};
use ttcast_core::Error;

use crate::manifest::RunRecorder;
use crate::opts::{
    EstimateArgs, EvaluateArgs, FeaturesArgs, ImportanceArgs, ParamArgs, PredictArgs,
    ProfileArgs, ScreenArgs, SynthCommonArgs, SynthMatrixArgs, SynthTrajectoriesArgs, TrainArgs,
    TuneArgs,
};
use crate::CliError;

type CmdResult = Result<(), CliError>;

pub fn estimate(args: &EstimateArgs) -> CmdResult {
    let config = json!({
        "bsm": paths_json(&args.bsm),
        "segments": args.segments.display().to_string(),
        "out": args.out.display().to_string(),
        "partitions": args.partitions,
        "max_dist_m": args.max_dist_m,
        "max_heading_delta_deg": args.max_heading_delta,
        "window": window_str(args.window),
        "tz_offset_min": args.tz_offset_min,
        "v_floor_mps": args.v_floor_mps,
    });
    let mut rec = RunRecorder::new("estimate", config, None);
    for path in &args.bsm {
        rec.input(path);
    }
    rec.input(&args.segments);

    let segments = load_segments_warned(&args.segments)?;
    let pipeline = PipelineConfig {
        gates: MatchGates {
            max_dist_m: args.max_dist_m,
            max_heading_delta_deg: args.max_heading_delta,
        },
        n_partitions: args.partitions,
        window: args.window,
        tz_offset_min: args.tz_offset_min,
        v_floor_mps: args.v_floor_mps,
    };
    let (matrix, report) = estimate_from_files(&args.bsm, &segments, &pipeline)?;
    write_matrix_file(&matrix, &args.out)?;
    rec.output(&args.out);

    print_pipeline_report(&report);
    println!("wrote {}", args.out.display());
    finish(rec, &args.out)
}

pub fn synth_trajectories(args: &SynthTrajectoriesArgs) -> CmdResult {
    let common = &args.common;
    let mut config = common_synth_json(common);
    merge(&mut config, json!({
        "vehicles": args.vehicles,
        "out": args.out.display().to_string(),
        "truth": args.truth.display().to_string(),
    }));
    let mut rec = RunRecorder::new("synth trajectories", config, Some(common.seed));
    rec.input(&common.segments);

    let segments = load_segments_warned(&common.segments)?;
    let profile = build_profile(&common.profile, common.seed);
    let report = generate_trajectories(
        &segments,
        &profile,
        args.vehicles,
        common.days,
        common.window,
        common.tz_offset_min,
        common.first_day,
        &args.out,
        &args.truth,
    )?;
    rec.output(&args.out);
    rec.output(&args.truth);

    println!("wrote {} stamps from {} vehicles", report.stamps, report.vehicles);
    println!("wrote {}", args.out.display());
    println!("wrote {}", args.truth.display());
    finish(rec, &args.out)
}

pub fn synth_matrix(args: &SynthMatrixArgs) -> CmdResult {
    let common = &args.common;
    let mut config = common_synth_json(common);
    merge(&mut config, json!({ "out": args.out.display().to_string() }));
    let mut rec = RunRecorder::new("synth matrix", config, Some(common.seed));
    rec.input(&common.segments);

    let segments = load_segments_warned(&common.segments)?;
    let profile = build_profile(&common.profile, common.seed);
    let matrix = generate_matrix(
        &profile,
        &segments,
        common.days,
        common.window,
        common.tz_offset_min,
        common.first_day,
    )?;
    write_matrix_file(&matrix, &args.out)?;
    rec.output(&args.out);

    println!(
        "wrote matrix: {} segments x {} days x {} slots",
        matrix.segment_ids().len(),
        matrix.n_days(),
        matrix.slots_per_day()
    );
    println!("wrote {}", args.out.display());
    finish(rec, &args.out)
}

pub fn features(args: &FeaturesArgs) -> CmdResult {
    let config = json!({
        "matrix": args.matrix.display().to_string(),
        "out": args.out.display().to_string(),
        "omega": args.omega,
        "horizon": args.horizon,
        "spatial": args.spatial,
        "neighbors": args.neighbors.as_ref().map(|p| p.display().to_string()),
    });
    let mut rec = RunRecorder::new("features", config, None);
    rec.input(&args.matrix);

    let matrix = read_matrix_file(&args.matrix)?;
    let spec = FeatureSpec::new(args.omega, args.horizon, args.spatial)?;
    let neighbors = match &args.neighbors {
        Some(path) => {
            rec.input(path);
            Some(NeighborMap::from_csv(path)?)
        }
        None => None,
    };
    let (dataset, report) = build_supervised(&matrix, &spec, neighbors.as_ref())?;
    write_dataset_csv(&dataset, &args.out)?;
    rec.output(&args.out);

    println!(
        "rows: {} emitted, {} dropped missing, {} dropped neighborless",
        report.rows_emitted, report.rows_dropped_missing, report.rows_dropped_neighbor
    );
    println!("wrote {}", args.out.display());
    finish(rec, &args.out)
}

pub fn screen(args: &ScreenArgs) -> CmdResult {
    let config = json!({
        "matrix": args.matrix.display().to_string(),
        "out": args.out.display().to_string(),
    });
    let mut rec = RunRecorder::new("screen", config, None);
    rec.input(&args.matrix);

    let matrix = read_matrix_file(&args.matrix)?;
    let rows = screen_features(&matrix);
    let mut w = csv_writer(&args.out)?;
    write_record(&mut w, &args.out, ["segment_id", "n_pairs", "r_tt", "r_ax", "r_ay"])?;
    for row in &rows {
        write_record(
            &mut w,
            &args.out,
            &[
                row.segment_id.clone().unwrap_or_default(),
                row.n_pairs.to_string(),
                opt_f64(row.r_tt),
                opt_f64(row.r_ax),
                opt_f64(row.r_ay),
            ],
        )?;
    }
    flush_writer(w, &args.out)?;
    rec.output(&args.out);

    println!("wrote {} rows (blank segment_id = pooled)", rows.len());
    println!("wrote {}", args.out.display());
    finish(rec, &args.out)
}

pub fn tune(args: &TuneArgs) -> CmdResult {
    let mut rec_inputs = vec![args.dataset.clone()];
    let mut spec = match (&args.grid, &args.t) {
        (Some(path), _) => {
            rec_inputs.push(path.clone());
            let text = fs::read_to_string(path)
                .map_err(|e| Error::Io { path: path.clone(), source: e })?;
            GridSpec::from_config_str(args.algo, &text, args.seed)?
        }
        (None, Some(t)) => GridSpec::new(args.algo, t.0.clone(), args.k.unwrap_or(5), args.seed)?,
        (None, None) if args.algo == Kind::Dt => {
            GridSpec::new(Kind::Dt, vec![1], args.k.unwrap_or(5), args.seed)?
        }
        (None, None) => {
            return Err(CliError::Usage(
                "tune needs --t or a --grid file naming the tree counts".to_string(),
            ))
        }
    };
    if let Some(t) = &args.t {
        spec.t_values = t.0.clone();
    }
    if let Some(l) = &args.learning_rates {
        spec.learning_rates = l.0.clone();
    }
    if let Some(d) = &args.depths {
        spec.depths = d.0.clone();
    }
    if let Some(k) = args.k {
        spec.k = k;
    }
    let spec = spec.validated()?;

    let config = json!({
        "algo": args.algo.name(),
        "dataset": args.dataset.display().to_string(),
        "out": args.out.display().to_string(),
        "grid_file": args.grid.as_ref().map(|p| p.display().to_string()),
        "t": spec.t_values,
        "learning_rates": spec.learning_rates,
        "depths": spec.depths,
        "k": spec.k,
    });
    let mut rec = RunRecorder::new("tune", config, Some(args.seed));
    for path in &rec_inputs {
        rec.input(path);
    }

    let dataset = read_dataset_csv(&args.dataset)?;
    let result = grid_search(&dataset, &spec)?;
    for w in &result.warnings {
        eprintln!("warning: {w}");
    }
    result.write_csv(&args.out)?;
    rec.output(&args.out);

    let best = result.best_row();
    println!(
        "best: t={} L={} d={} mape={:.4}% sd={:.4}%",
        best.t,
        best.learning_rate,
        best.max_depth.map_or("none".to_string(), |d| d.to_string()),
        best.mean_mape,
        best.sd_mape
    );
    println!("wrote {}", args.out.display());
    finish(rec, &args.out)
}

pub fn train(args: &TrainArgs) -> CmdResult {
    let params = resolve_params(args.algo, &args.params);
    let config = json!({
        "algo": args.algo.name(),
        "dataset": args.dataset.display().to_string(),
        "out": args.out.display().to_string(),
        "params": params,
    });
    let mut rec = RunRecorder::new("train", config, Some(args.seed));
    rec.input(&args.dataset);

    let dataset = read_dataset_csv(&args.dataset)?;
    let mut model = fit(args.algo, &dataset.rows, &dataset.targets, &params, args.seed)?;
    model.feature_names = dataset.feature_names.clone();
    save_model(&model, &args.out)?;
    rec.output(&args.out);

    println!(
        "trained {} on {} rows: {} trees, base score {}",
        args.algo,
        dataset.len(),
        model.trees.len(),
        model.base_score
    );
    println!("wrote {}", args.out.display());
    finish(rec, &args.out)
}

pub fn predict(args: &PredictArgs) -> CmdResult {
    let config = json!({
        "model": args.model.display().to_string(),
        "dataset": args.dataset.display().to_string(),
        "out": args.out.display().to_string(),
    });
    let mut rec = RunRecorder::new("predict", config, None);
    rec.input(&args.model);
    rec.input(&args.dataset);

    let model = load_model(&args.model)?;
    let dataset = read_dataset_csv(&args.dataset)?;
    if !model.feature_names.is_empty() && model.feature_names != dataset.feature_names {
        return Err(Error::Validation(format!(
            "dataset features {:?} do not match the model's {:?}",
            dataset.feature_names, model.feature_names
        ))
        .into());
    }
    let preds = model.predict_batch(&dataset.rows)?;

    let mut w = csv_writer(&args.out)?;
    write_record(&mut w, &args.out, ["segment_id", "interval_start", "actual", "predicted"])?;
    for (i, origin) in dataset.origins.iter().enumerate() {
        write_record(
            &mut w,
            &args.out,
            &[
                origin.segment_id.clone(),
                origin.anchor_epoch.to_string(),
                dataset.targets[i].to_string(),
                preds[i].to_string(),
            ],
        )?;
    }
    flush_writer(w, &args.out)?;
    rec.output(&args.out);

    println!("predicted {} rows with {} ({} trees)", preds.len(), model.kind, model.trees.len());
    println!("wrote {}", args.out.display());
    finish(rec, &args.out)
}

pub fn evaluate(args: &EvaluateArgs) -> CmdResult {
    let params = resolve_params(args.algo, &args.params);
    let config = json!({
        "algo": args.algo.name(),
        "matrix": args.matrix.as_ref().map(|p| p.display().to_string()),
        "train_frac": args.train_frac,
        "train_matrix": args.train_matrix.as_ref().map(|p| p.display().to_string()),
        "test_matrix": args.test_matrix.as_ref().map(|p| p.display().to_string()),
        "horizons": args.horizons.0,
        "omega": args.omega,
        "spatial": args.spatial,
        "neighbors": args.neighbors.as_ref().map(|p| p.display().to_string()),
        "peak": args.peak.as_ref().map(|p| p.0.clone()),
        "out": args.out.display().to_string(),
        "predictions_out": args.predictions_out.as_ref().map(|p| p.display().to_string()),
        "params": params,
    });
    let mut rec = RunRecorder::new("evaluate", config, Some(args.seed));

    let (train, test) = match (&args.matrix, &args.train_matrix, &args.test_matrix) {
        (Some(path), None, None) => {
            rec.input(path);
            let matrix = read_matrix_file(path)?;
            split_matrix_chronological(&matrix, args.train_frac)?
        }
        (None, Some(train_path), Some(test_path)) => {
            rec.input(train_path);
            rec.input(test_path);
            (read_matrix_file(train_path)?, read_matrix_file(test_path)?)
        }
        _ => unreachable!("argument group enforces the matrix source"),
    };
    let neighbors = match &args.neighbors {
        Some(path) => {
            rec.input(path);
            Some(NeighborMap::from_csv(path)?)
        }
        None => None,
    };
    let peaks = args.peak.as_ref().map(|p| p.0.as_slice());
    let (scores, records) = evaluate_horizons(
        &train,
        &test,
        args.algo,
        &params,
        &args.horizons.0,
        args.omega,
        args.spatial,
        neighbors.as_ref(),
        peaks,
        args.seed,
    )?;

    let mut w = csv_writer(&args.out)?;
    write_record(
        &mut w,
        &args.out,
        ["horizon_steps", "mape_pct", "peak_mape_pct", "nonpeak_mape_pct", "train_rows", "test_rows"],
    )?;
    for s in &scores {
        write_record(
            &mut w,
            &args.out,
            &[
                s.horizon_steps.to_string(),
                s.mape.to_string(),
                opt_f64(s.peak_mape),
                opt_f64(s.nonpeak_mape),
                s.train_rows.to_string(),
                s.test_rows.to_string(),
            ],
        )?;
    }
    flush_writer(w, &args.out)?;
    rec.output(&args.out);

    if let Some(pred_path) = &args.predictions_out {
        let mut w = csv_writer(pred_path)?;
        write_record(
            &mut w,
            pred_path,
            ["horizon_steps", "segment_id", "interval_start", "actual", "predicted"],
        )?;
        for r in &records {
            write_record(
                &mut w,
                pred_path,
                &[
                    r.horizon_steps.to_string(),
                    r.segment_id.clone(),
                    r.anchor_epoch.to_string(),
                    r.actual.to_string(),
                    r.predicted.to_string(),
                ],
            )?;
        }
        flush_writer(w, pred_path)?;
        rec.output(pred_path);
        println!("wrote {}", pred_path.display());
    }

    for s in &scores {
        let peak = s.peak_mape.map_or("-".to_string(), |v| format!("{v:.4}%"));
        let nonpeak = s.nonpeak_mape.map_or("-".to_string(), |v| format!("{v:.4}%"));
        println!(
            "h={} mape={:.4}% peak={} nonpeak={} (train {} rows, test {})",
            s.horizon_steps, s.mape, peak, nonpeak, s.train_rows, s.test_rows
        );
    }
    println!("wrote {}", args.out.display());
    finish(rec, &args.out)
}

pub fn importance(args: &ImportanceArgs) -> CmdResult {
    let config = json!({
        "model": args.model.display().to_string(),
        "out": args.out.display().to_string(),
    });
    let mut rec = RunRecorder::new("importance", config, None);
    rec.input(&args.model);

    let model = load_model(&args.model)?;
    let shares = feature_importance(&model)?;
    let names: Vec<String> = if model.feature_names.is_empty() {
        (0..shares.len()).map(|i| format!("f{i}")).collect()
    } else {
        model.feature_names.clone()
    };

    let mut w = csv_writer(&args.out)?;
    write_record(&mut w, &args.out, ["feature", "gain_share"])?;
    for (name, share) in names.iter().zip(&shares) {
        write_record(&mut w, &args.out, &[name.clone(), share.to_string()])?;
    }
    flush_writer(w, &args.out)?;
    rec.output(&args.out);

    let top = shares
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty importance");
    println!("top feature: {} (share {:.4})", names[top.0], top.1);
    println!("wrote {}", args.out.display());
    finish(rec, &args.out)
}

fn finish(rec: RunRecorder, primary_out: &Path) -> CmdResult {
    let path = rec.finish(primary_out)?;
    println!("manifest {}", path.display());
    Ok(())
}

fn load_segments_warned(path: &Path) -> Result<Vec<Segment>, CliError> {
    let load = load_segments(path)?;
    for w in &load.warnings {
        eprintln!("warning: {w}");
    }
    Ok(load.segments)
}

fn build_profile(args: &ProfileArgs, seed: u64) -> CongestionProfile {
    CongestionProfile {
        base_speed_mps: args.base_speed_mps,
        segment_speeds: args.segment_speeds.iter().cloned().collect(),
        peak_windows: args.peaks.0.clone(),
        diurnal_dip: args.dip,
        noise_sd_frac: args.noise_sd,
        seed,
    }
}

fn resolve_params(kind: Kind, args: &ParamArgs) -> Hyperparams {
    let mut params = Hyperparams::defaults(kind);
    if let Some(t) = args.t {
        params.t = t;
    }
    if let Some(lr) = args.learning_rate {
        params.learning_rate = lr;
    }
    if let Some(depth) = args.max_depth {
        params.max_depth = if depth == 0 { None } else { Some(depth) };
    }
    if let Some(min_leaf) = args.min_leaf {
        params.min_leaf = min_leaf;
    }
    if let Some(lambda) = args.lambda {
        params.lambda = lambda;
    }
    if let Some(gamma) = args.gamma {
        params.gamma = gamma;
    }
    if let Some(mtry) = args.mtry {
        params.mtry = Some(mtry);
    }
    params
}

fn common_synth_json(common: &SynthCommonArgs) -> serde_json::Value {
    json!({
        "segments": common.segments.display().to_string(),
        "days": common.days,
        "window": window_str(common.window),
        "tz_offset_min": common.tz_offset_min,
        "first_day": common.first_day,
        "base_speed_mps": common.profile.base_speed_mps,
        "segment_speeds": common.profile.segment_speeds
            .iter()
            .map(|(id, v)| (id.clone(), *v))
            .collect::<std::collections::BTreeMap<String, f64>>(),
        "peaks": common.profile.peaks.0.iter().map(peak_str).collect::<Vec<_>>(),
        "dip": common.profile.dip,
        "noise_sd": common.profile.noise_sd,
    })
}

fn merge(base: &mut serde_json::Value, extra: serde_json::Value) {
    let (Some(base), Some(extra)) = (base.as_object_mut(), extra.as_object()) else {
        unreachable!("manifest configs are json objects");
    };
    for (k, v) in extra {
        base.insert(k.clone(), v.clone());
    }
}

fn window_str(window: ttcast_core::DayWindow) -> String {
    format!("{}:{}", window.start_hour, window.end_hour)
}

fn peak_str(peak: &PeakWindow) -> String {
    format!("{}:{}@{}", peak.start_hour, peak.end_hour, peak.multiplier)
}

fn print_pipeline_report(report: &PipelineReport) {
    println!(
        "rows: {} read, {} kept, {} malformed",
        report.parse.rows_read, report.parse.rows_kept, report.parse.rows_malformed
    );
    println!(
        "stamps: {} matched, {} unmatched, {} outside window",
        report.matched_stamps, report.unmatched_stamps, report.build.stamps_outside_window
    );
    println!(
        "cells: {} interpolated, {} floored, {} empty segment-days",
        report.interpolation.cells_filled,
        report.build.floored_cells,
        report.interpolation.empty_segment_days.len()
    );
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>, CliError> {
    csv::Writer::from_path(path).map_err(|e| csv_error(path, e).into())
}

fn write_record<I, T>(w: &mut csv::Writer<fs::File>, path: &Path, record: I) -> Result<(), CliError>
where
    I: IntoIterator<Item = T>,
    T: AsRef<[u8]>,
{
    w.write_record(record).map_err(|e| csv_error(path, e).into())
}

fn flush_writer(mut w: csv::Writer<fs::File>, path: &Path) -> Result<(), CliError> {
    w.flush().map_err(|e| Error::Io { path: path.to_path_buf(), source: e }.into())
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io { path: path.to_path_buf(), source: io },
        other => Error::Validation(format!("csv write failed on {}: {other:?}", path.display())),
    }
}

fn opt_f64(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn paths_json(paths: &[std::path::PathBuf]) -> Vec<String> {
    paths.iter().map(|p| p.display().to_string()).collect()
}
