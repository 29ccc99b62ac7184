//! Fitted ensembles: prediction, staged evaluation, feature importance,
//! and versioned persistence.

use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;

use super::fit::{Hyperparams, Kind};
use super::tree::RegressionTree;
use crate::error::Error;
use crate::Result;

/// A fitted model: a list of trees plus the recipe that produced them.
///
/// Combination rule by kind:
/// * `dt`, `bagging`, `rf`: unweighted mean of tree outputs
/// * `adaboost`: weighted median of tree outputs under `tree_weights`
/// * `gb`, `xgb`: `base_score + learning_rate * sum` of tree outputs
///
/// An ensemble with no trees predicts `base_score`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    pub kind: Kind,
    pub params: Hyperparams,
    pub seed: u64,
    pub base_score: f64,
    pub trees: Vec<RegressionTree>,
    /// One weight per tree. Only the weighted-median combiner reads them;
    /// other kinds store 1.0.
    pub tree_weights: Vec<f64>,
    pub n_features: usize,
    /// Column names for reports; empty when unknown, otherwise one per
    /// feature.
    pub feature_names: Vec<String>,
}

impl Ensemble {
    /// Predicts one sample. The sample must have exactly `n_features`
    /// finite values.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        self.check_sample(x)?;
        Ok(self.predict_unchecked(x))
    }

    /// Predicts a batch of samples.
    pub fn predict_batch(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
        for row in rows {
            self.check_sample(row)?;
        }
        Ok(rows.iter().map(|x| self.predict_unchecked(x)).collect())
    }

    fn check_sample(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n_features {
            return Err(Error::validation(format!(
                "sample has {} features, model expects {}",
                x.len(),
                self.n_features
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation("sample contains a non-finite feature"));
        }
        Ok(())
    }

    fn predict_unchecked(&self, x: &[f64]) -> f64 {
        if self.trees.is_empty() {
            return self.base_score;
        }
        match self.kind {
            Kind::Dt | Kind::Bagging | Kind::Rf => {
                let sum: f64 = self.trees.iter().map(|t| t.predict(x)).sum();
                sum / self.trees.len() as f64
            }
            Kind::Adaboost => {
                let pairs: Vec<(f64, f64)> = self
                    .trees
                    .iter()
                    .zip(&self.tree_weights)
                    .map(|(t, &w)| (t.predict(x), w))
                    .collect();
                weighted_median(pairs)
            }
            Kind::Gb | Kind::Xgb => {
                let sum: f64 = self.trees.iter().map(|t| t.predict(x)).sum();
                self.base_score + self.params.learning_rate * sum
            }
        }
    }

    /// The number of trees actually fitted; boosting may stop before `t`.
    pub fn tree_count(&self) -> usize {
        self.trees.len()
    }

    /// A copy of the model keeping only the first `k` trees.
    pub fn truncated(&self, k: usize) -> Ensemble {
        let k = k.min(self.trees.len());
        Ensemble {
            trees: self.trees[..k].to_vec(),
            tree_weights: self.tree_weights[..k].to_vec(),
            ..self.clone()
        }
    }
}

/// Median of `(value, weight)` pairs: values are sorted and the answer is
/// the first value whose running weight reaches half the total.
pub(crate) fn weighted_median(mut pairs: Vec<(f64, f64)>) -> f64 {
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite predictions"));
    let total: f64 = pairs.iter().map(|p| p.1).sum();
    let half = 0.5 * total;
    let mut acc = 0.0;
    for &(v, w) in &pairs {
        acc += w;
        if acc >= half {
            return v;
        }
    }
    pairs.last().map(|p| p.0).unwrap_or(0.0)
}

/// Predictions of every tree-count prefix, one inner vector per stage.
/// Stage `k` (1-based) equals `predict` on the ensemble truncated to `k`
/// trees, bit for bit. An ensemble with no trees yields no stages.
pub fn staged_predict(e: &Ensemble, rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let stages: Vec<usize> = (1..=e.trees.len()).collect();
    predict_at_stages(e, rows, &stages)
}

/// Predictions at selected prefix sizes. Stages must be positive and
/// strictly increasing; a stage beyond the fitted tree count evaluates
/// the full model, which is what a boosting run that stopped early means
/// by "the model at round t".
pub fn predict_at_stages(e: &Ensemble, rows: &[Vec<f64>], stages: &[usize]) -> Result<Vec<Vec<f64>>> {
    for row in rows {
        e.check_sample(row)?;
    }
    if stages.is_empty() {
        return Ok(Vec::new());
    }
    if stages[0] == 0 || stages.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::validation("stages must be positive and strictly increasing"));
    }
    let k_max = e.trees.len();
    let effective: Vec<usize> = stages.iter().map(|&s| s.min(k_max)).collect();
    if k_max == 0 {
        return Ok(stages.iter().map(|_| vec![e.base_score; rows.len()]).collect());
    }
    let n = rows.len();
    match e.kind {
        Kind::Dt | Kind::Bagging | Kind::Rf | Kind::Gb | Kind::Xgb => {
            let mut sums = vec![0.0; n];
            let mut out: Vec<Vec<f64>> = Vec::with_capacity(stages.len());
            let mut next = 0;
            for (k, tree) in e.trees.iter().enumerate() {
                for (i, x) in rows.iter().enumerate() {
                    sums[i] += tree.predict(x);
                }
                while next < effective.len() && effective[next] == k + 1 {
                    let snapshot: Vec<f64> = match e.kind {
                        Kind::Gb | Kind::Xgb => sums
                            .iter()
                            .map(|&s| e.base_score + e.params.learning_rate * s)
                            .collect(),
                        _ => sums.iter().map(|&s| s / (k + 1) as f64).collect(),
                    };
                    out.push(snapshot);
                    next += 1;
                }
                if next == effective.len() {
                    break;
                }
            }
            Ok(out)
        }
        Kind::Adaboost => {
            // Evaluate every tree once per row, then take prefix medians
            // only at the requested stages.
            let outputs: Vec<Vec<f64>> = rows
                .iter()
                .map(|x| e.trees.iter().map(|t| t.predict(x)).collect())
                .collect();
            let mut out = Vec::with_capacity(stages.len());
            for &k in &effective {
                let stage: Vec<f64> = outputs
                    .iter()
                    .map(|per_tree| {
                        let pairs: Vec<(f64, f64)> = per_tree[..k]
                            .iter()
                            .zip(&e.tree_weights[..k])
                            .map(|(&v, &w)| (v, w))
                            .collect();
                        weighted_median(pairs)
                    })
                    .collect();
                out.push(stage);
            }
            Ok(out)
        }
    }
}

/// Share of total recorded split gain per feature index. Shares sum to 1.
/// Errors when the model contains no splits at all.
pub fn feature_importance(e: &Ensemble) -> Result<Vec<f64>> {
    let mut gains = vec![0.0; e.n_features];
    for tree in &e.trees {
        tree.for_each_split(|f, g| gains[f] += g);
    }
    let total: f64 = gains.iter().sum();
    if total.is_nan() || total <= 0.0 {
        return Err(Error::validation("model has no splits, importance is undefined"));
    }
    for g in &mut gains {
        *g /= total;
    }
    Ok(gains)
}

/// Regularized training objective of every boosted prefix: stage `k`
/// holds `0.5 * sum((yhat_k - y)^2)` plus, for each of the first `k`
/// trees, `gamma * leaves + 0.5 * lambda * sum(leaf_weight^2)`. Stage 0
/// is the base-score-only objective.
pub fn boosting_objective_curve(e: &Ensemble, rows: &[Vec<f64>], y: &[f64]) -> Result<Vec<f64>> {
    if !matches!(e.kind, Kind::Gb | Kind::Xgb) {
        return Err(Error::validation("objective curve is defined for gb and xgb models"));
    }
    if rows.len() != y.len() {
        return Err(Error::validation("rows and targets differ in length"));
    }
    for row in rows {
        e.check_sample(row)?;
    }
    let sq = |preds: &[f64]| -> f64 {
        0.5 * preds.iter().zip(y).map(|(p, t)| (p - t) * (p - t)).sum::<f64>()
    };
    let mut curve = Vec::with_capacity(e.trees.len() + 1);
    let mut preds = vec![e.base_score; rows.len()];
    curve.push(sq(&preds));
    let mut penalty = 0.0;
    for tree in &e.trees {
        for (p, x) in preds.iter_mut().zip(rows) {
            *p += e.params.learning_rate * tree.predict(x);
        }
        penalty += e.params.gamma * tree.leaf_count() as f64;
        let weight_sq: f64 = tree.leaf_scores().iter().map(|w| w * w).sum();
        penalty += 0.5 * e.params.lambda * weight_sq;
        curve.push(sq(&preds) + penalty);
    }
    Ok(curve)
}

const MODEL_FORMAT: &str = "ttcast-model";
/// Current on-disk model schema version.
pub const MODEL_VERSION: u32 = 1;

#[derive(Serialize)]
struct ModelFileRef<'a> {
    format: &'static str,
    version: u32,
    model: &'a Ensemble,
}

#[derive(Deserialize)]
struct ModelFile {
    #[allow(dead_code)]
    format: String,
    #[allow(dead_code)]
    version: u32,
    model: Ensemble,
}

#[derive(Deserialize)]
struct ModelProbe {
    format: Option<String>,
    version: Option<u32>,
}

/// Writes the model as a single JSON document with a format marker and
/// schema version. Reloading reproduces predictions exactly.
pub fn save_model(e: &Ensemble, path: &Path) -> Result<()> {
    let doc = ModelFileRef { format: MODEL_FORMAT, version: MODEL_VERSION, model: e };
    let mut json = serde_json::to_string(&doc)
        .map_err(|err| Error::validation(format!("model not serializable: {err}")))?;
    json.push('\n');
    fs::write(path, json).map_err(|err| Error::io(path, err))
}

/// Reads a model written by [`save_model`], rejecting unknown versions
/// and structurally invalid documents.
pub fn load_model(path: &Path) -> Result<Ensemble> {
    let text = fs::read_to_string(path).map_err(|err| Error::io(path, err))?;
    let probe: ModelProbe = serde_json::from_str(&text)
        .map_err(|err| Error::ModelCorrupt(format!("{}: not a model document: {err}", path.display())))?;
    match probe.format.as_deref() {
        Some(MODEL_FORMAT) => {}
        _ => {
            return Err(Error::ModelCorrupt(format!(
                "{}: missing or unexpected format marker",
                path.display()
            )))
        }
    }
    match probe.version {
        Some(MODEL_VERSION) => {}
        Some(found) => return Err(Error::ModelVersion { found, supported: MODEL_VERSION }),
        None => {
            return Err(Error::ModelCorrupt(format!("{}: missing schema version", path.display())))
        }
    }
    let doc: ModelFile = serde_json::from_str(&text)
        .map_err(|err| Error::ModelCorrupt(format!("{}: {err}", path.display())))?;
    validate_ensemble(&doc.model)
        .map_err(|msg| Error::ModelCorrupt(format!("{}: {msg}", path.display())))?;
    Ok(doc.model)
}

fn validate_ensemble(e: &Ensemble) -> std::result::Result<(), String> {
    if e.n_features == 0 {
        return Err("n_features is zero".into());
    }
    if e.trees.len() != e.tree_weights.len() {
        return Err(format!("{} trees but {} tree weights", e.trees.len(), e.tree_weights.len()));
    }
    if !e.feature_names.is_empty() && e.feature_names.len() != e.n_features {
        return Err(format!(
            "{} feature names for {} features",
            e.feature_names.len(),
            e.n_features
        ));
    }
    if !e.base_score.is_finite() {
        return Err("base_score is non-finite".into());
    }
    if e.tree_weights.iter().any(|w| !w.is_finite()) {
        return Err("a tree weight is non-finite".into());
    }
    for (i, tree) in e.trees.iter().enumerate() {
        tree.validate(e.n_features).map_err(|msg| format!("tree {i}: {msg}"))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::fit::{fit, fit_adaboost, fit_dt, fit_gb, fit_xgb};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn column(values: &[f64]) -> Vec<Vec<f64>> {
        values.iter().map(|&v| vec![v]).collect()
    }

    fn params(t: usize) -> Hyperparams {
        Hyperparams { t, max_depth: Some(3), ..Hyperparams::defaults(Kind::Dt) }
    }

    fn random_data(seed: u64, n: usize, m: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> =
            (0..n).map(|_| (0..m).map(|_| rng.gen::<f64>() * 10.0).collect()).collect();
        let y: Vec<f64> = rows.iter().map(|r| r[0] - 0.5 * r[m - 1] + rng.gen::<f64>()).collect();
        (rows, y)
    }

    #[test]
    fn weighted_median_hand_cases() {
        assert_eq!(weighted_median(vec![(9.0, 3.0), (1.0, 1.0), (5.0, 1.0)]), 9.0);
        assert_eq!(weighted_median(vec![(3.0, 1.0), (1.0, 1.0)]), 1.0);
        assert_eq!(weighted_median(vec![(4.0, 2.0)]), 4.0);
        // Zero-weight outliers cannot move the median.
        assert_eq!(weighted_median(vec![(100.0, 0.0), (2.0, 1.0)]), 2.0);
    }

    #[test]
    fn staged_matches_truncated_for_every_kind() {
        let (rows, y) = random_data(5, 30, 2);
        for kind in Kind::ALL {
            let model = fit(kind, &rows, &y, &params(6), 11).unwrap();
            let staged = staged_predict(&model, &rows).unwrap();
            assert_eq!(staged.len(), model.tree_count());
            for (k, stage) in staged.iter().enumerate() {
                let direct = model.truncated(k + 1).predict_batch(&rows).unwrap();
                assert_eq!(stage, &direct, "{kind} stage {}", k + 1);
            }
        }
    }

    #[test]
    fn stages_beyond_the_fitted_count_evaluate_the_full_model() {
        let (rows, y) = random_data(7, 20, 2);
        let model = fit_gb(&rows, &y, &params(3), 0).unwrap();
        let out = predict_at_stages(&model, &rows, &[2, 50]).unwrap();
        assert_eq!(out[1], model.predict_batch(&rows).unwrap());
    }

    #[test]
    fn stage_lists_must_be_positive_and_increasing() {
        let (rows, y) = random_data(9, 10, 2);
        let model = fit_gb(&rows, &y, &params(2), 0).unwrap();
        assert!(predict_at_stages(&model, &rows, &[0]).is_err());
        assert!(predict_at_stages(&model, &rows, &[2, 2]).is_err());
        assert!(predict_at_stages(&model, &rows, &[3, 1]).is_err());
        assert!(predict_at_stages(&model, &rows, &[]).unwrap().is_empty());
    }

    #[test]
    fn treeless_model_predicts_its_base_score() {
        // Opposite targets on identical inputs stop adaptive boosting
        // before any tree is kept.
        let rows = column(&[0.0, 0.0]);
        let y = [0.0, 10.0];
        let model = fit_adaboost(&rows, &y, &params(5), 0).unwrap();
        assert_eq!(model.tree_count(), 0);
        assert_eq!(model.predict(&[1.0]).unwrap(), 5.0);
        let staged = predict_at_stages(&model, &rows, &[1, 4]).unwrap();
        assert_eq!(staged, vec![vec![5.0, 5.0], vec![5.0, 5.0]]);
    }

    #[test]
    fn prediction_rejects_bad_samples() {
        let (rows, y) = random_data(13, 10, 2);
        let model = fit_dt(&rows, &y, &params(1), 0).unwrap();
        assert!(model.predict(&[1.0]).is_err());
        assert!(model.predict(&[1.0, f64::NAN]).is_err());
        assert!(model.predict(&[1.0, 2.0]).is_ok());
    }

    #[test]
    fn importance_concentrates_on_the_informative_feature() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rows: Vec<Vec<f64>> =
            (0..40).map(|i| vec![rng.gen::<f64>(), f64::from(i)]).collect();
        let y: Vec<f64> = rows.iter().map(|r| if r[1] < 20.0 { 0.0 } else { 10.0 }).collect();
        let model = fit_dt(&rows, &y, &params(1), 0).unwrap();
        let imp = feature_importance(&model).unwrap();
        assert_eq!(imp.len(), 2);
        assert!((imp.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(imp[1] > 0.99, "informative share {}", imp[1]);
    }

    #[test]
    fn importance_needs_at_least_one_split() {
        let rows = column(&[1.0, 2.0]);
        let y = [3.0, 3.0];
        let model = fit_dt(&rows, &y, &params(1), 0).unwrap();
        assert!(feature_importance(&model).is_err());
    }

    #[test]
    fn gb_objective_curve_is_non_increasing() {
        let (rows, y) = random_data(15, 30, 2);
        let p = Hyperparams { learning_rate: 0.3, lambda: 0.0, gamma: 0.0, ..params(8) };
        let model = fit_gb(&rows, &y, &p, 0).unwrap();
        let curve = boosting_objective_curve(&model, &rows, &y).unwrap();
        assert_eq!(curve.len(), model.tree_count() + 1);
        for w in curve.windows(2) {
            assert!(w[1] <= w[0] + 1e-9 * w[0].abs().max(1.0), "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn objective_curve_counts_xgb_penalties() {
        let rows = column(&[1.0, 2.0]);
        let y = [0.0, 10.0];
        let p = Hyperparams { lambda: 1.0, gamma: 0.5, ..params(1) };
        let model = fit_xgb(&rows, &y, &p, 0).unwrap();
        let curve = boosting_objective_curve(&model, &rows, &y).unwrap();
        // Stage 0: residuals [-5, 5] under the base score.
        assert_eq!(curve[0], 25.0);
        // Stage 1: leaves hold -2.5 and 2.5, so the squared loss drops to
        // 0.5*(2.5^2)*2 and the penalty adds 2*gamma + 0.5*lambda*12.5.
        let expect = 6.25 + 2.0 * 0.5 + 0.5 * 1.0 * 12.5;
        assert!((curve[1] - expect).abs() < 1e-12);
        let bag = fit(Kind::Bagging, &rows, &y, &params(2), 0).unwrap();
        assert!(boosting_objective_curve(&bag, &rows, &y).is_err());
    }

    #[test]
    fn save_load_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let (rows, y) = random_data(19, 25, 3);
        for kind in Kind::ALL {
            let mut model = fit(kind, &rows, &y, &params(4), 21).unwrap();
            model.feature_names = vec!["a".into(), "b".into(), "c".into()];
            save_model(&model, &path).unwrap();
            let loaded = load_model(&path).unwrap();
            assert_eq!(model, loaded, "{kind} round trip");
            let first = fs::read(&path).unwrap();
            save_model(&loaded, &path).unwrap();
            assert_eq!(first, fs::read(&path).unwrap(), "{kind} re-save bytes");
        }
    }

    #[test]
    fn loader_rejects_garbage_and_foreign_documents() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        fs::write(&path, "not json at all").unwrap();
        assert!(matches!(load_model(&path), Err(Error::ModelCorrupt(_))));
        fs::write(&path, "{\"something\":1}").unwrap();
        assert!(matches!(load_model(&path), Err(Error::ModelCorrupt(_))));
        fs::write(&path, "{\"format\":\"other\",\"version\":1}").unwrap();
        assert!(matches!(load_model(&path), Err(Error::ModelCorrupt(_))));
    }

    #[test]
    fn loader_rejects_future_versions() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let (rows, y) = random_data(25, 10, 2);
        let model = fit_dt(&rows, &y, &params(1), 0).unwrap();
        save_model(&model, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let bumped = text.replace("\"version\":1", "\"version\":2");
        assert_ne!(text, bumped);
        fs::write(&path, bumped).unwrap();
        match load_model(&path) {
            Err(Error::ModelVersion { found, supported }) => {
                assert_eq!(found, 2);
                assert_eq!(supported, MODEL_VERSION);
            }
            other => panic!("expected version error, got {other:?}"),
        }
    }

    #[test]
    fn loader_rejects_structurally_broken_models() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        // Only feature 1 is informative, so the tree must reference it.
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![0.0, f64::from(i)]).collect();
        let y: Vec<f64> = (0..10).map(|i| if i < 5 { 0.0 } else { 10.0 }).collect();
        let model = fit_dt(&rows, &y, &params(1), 0).unwrap();
        save_model(&model, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        // Claiming fewer features than the trees reference must fail
        // structural validation.
        let shrunk = text.replace("\"n_features\":2", "\"n_features\":1");
        assert_ne!(text, shrunk);
        fs::write(&path, shrunk).unwrap();
        match load_model(&path) {
            Err(Error::ModelCorrupt(msg)) => assert!(msg.contains("tree"), "{msg}"),
            other => panic!("expected corrupt error, got {other:?}"),
        }
    }
}
