//! Fitting routines for the six tree-based learners.
//!
//! Stochastic fits derive one generator per tree from `seed ^ tree_index`,
//! and each tree draws its row sample fully before any split-time feature
//! draws. Parallel fits collect trees in index order, so the fitted model
//! is identical for any worker count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use super::model::Ensemble;
use super::tree::{
    check_training_data, fit_tree, grow_tree, FeatureSampler, RegressionTree, VarianceObjective,
    XgbObjective,
};
use crate::error::Error;
use crate::Result;

/// Learner family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Dt,
    Bagging,
    Rf,
    Adaboost,
    Gb,
    Xgb,
}

impl Kind {
    pub const ALL: [Kind; 6] = [Kind::Dt, Kind::Bagging, Kind::Rf, Kind::Adaboost, Kind::Gb, Kind::Xgb];

    pub fn name(self) -> &'static str {
        match self {
            Kind::Dt => "dt",
            Kind::Bagging => "bagging",
            Kind::Rf => "rf",
            Kind::Adaboost => "adaboost",
            Kind::Gb => "gb",
            Kind::Xgb => "xgb",
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Kind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dt" => Ok(Kind::Dt),
            "bagging" => Ok(Kind::Bagging),
            "rf" => Ok(Kind::Rf),
            "adaboost" => Ok(Kind::Adaboost),
            "gb" => Ok(Kind::Gb),
            "xgb" => Ok(Kind::Xgb),
            other => Err(Error::validation(format!(
                "unknown model kind {other:?}, expected one of dt, bagging, rf, adaboost, gb, xgb"
            ))),
        }
    }
}

/// Hyperparameters shared by all learners. Fields a learner does not use
/// are ignored by its fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    /// Number of boosting rounds or bagged trees.
    pub t: usize,
    /// Shrinkage for boosted learners, in (0, 1].
    pub learning_rate: f64,
    /// Maximum split depth; `None` grows until no split improves.
    pub max_depth: Option<usize>,
    /// Minimum rows on each side of a split.
    pub min_leaf: usize,
    /// L2 penalty on leaf weights (second-order boosting).
    pub lambda: f64,
    /// Per-leaf penalty subtracted from every split gain (second-order
    /// boosting).
    pub gamma: f64,
    /// Features sampled per node in a random forest; `None` means
    /// `ceil(m / 3)`.
    pub mtry: Option<usize>,
}

impl Hyperparams {
    /// Reference configuration for each learner.
    pub fn defaults(kind: Kind) -> Self {
        let base = Hyperparams {
            t: 1,
            learning_rate: 1.0,
            max_depth: None,
            min_leaf: 1,
            lambda: 0.0,
            gamma: 0.0,
            mtry: None,
        };
        match kind {
            Kind::Dt => base,
            Kind::Bagging => Hyperparams { t: 3000, ..base },
            Kind::Rf => Hyperparams { t: 5000, ..base },
            Kind::Adaboost => Hyperparams {
                t: 3000,
                learning_rate: 0.0001,
                max_depth: Some(3),
                ..base
            },
            Kind::Gb => Hyperparams { t: 5000, learning_rate: 0.001, max_depth: Some(6), ..base },
            Kind::Xgb => Hyperparams {
                t: 40,
                learning_rate: 0.1,
                max_depth: Some(6),
                lambda: 1.0,
                gamma: 1.0,
                ..base
            },
        }
    }
}

fn mean(y: &[f64]) -> f64 {
    y.iter().sum::<f64>() / y.len() as f64
}

fn common_checks(rows: &[Vec<f64>], y: &[f64], params: &Hyperparams) -> Result<usize> {
    let m = check_training_data(rows, y)?;
    if params.t < 1 {
        return Err(Error::validation("t must be at least 1"));
    }
    if params.min_leaf < 1 {
        return Err(Error::validation("min_leaf must be at least 1"));
    }
    if params.max_depth == Some(0) {
        return Err(Error::validation("max_depth must be at least 1 when set"));
    }
    Ok(m)
}

fn check_learning_rate(lr: f64) -> Result<()> {
    if !(lr.is_finite() && lr > 0.0 && lr <= 1.0) {
        return Err(Error::validation(format!("learning_rate must lie in (0, 1], got {lr}")));
    }
    Ok(())
}

fn make_ensemble(
    kind: Kind,
    params: &Hyperparams,
    seed: u64,
    base_score: f64,
    trees: Vec<RegressionTree>,
    tree_weights: Vec<f64>,
    n_features: usize,
) -> Ensemble {
    Ensemble {
        kind,
        params: params.clone(),
        seed,
        base_score,
        trees,
        tree_weights,
        n_features,
        feature_names: Vec::new(),
    }
}

/// Fits the given learner kind. `seed` drives any row or feature sampling
/// and is recorded on the model either way.
pub fn fit(kind: Kind, rows: &[Vec<f64>], y: &[f64], params: &Hyperparams, seed: u64) -> Result<Ensemble> {
    match kind {
        Kind::Dt => fit_dt(rows, y, params, seed),
        Kind::Bagging => fit_bagging(rows, y, params, seed),
        Kind::Rf => fit_rf(rows, y, params, seed),
        Kind::Adaboost => fit_adaboost(rows, y, params, seed),
        Kind::Gb => fit_gb(rows, y, params, seed),
        Kind::Xgb => fit_xgb(rows, y, params, seed),
    }
}

/// Single CART tree on the full sample.
pub fn fit_dt(rows: &[Vec<f64>], y: &[f64], params: &Hyperparams, seed: u64) -> Result<Ensemble> {
    common_checks(rows, y, params)?;
    let m = rows[0].len();
    let tree = fit_tree(rows, y, params.max_depth, params.min_leaf)?;
    let mut params = params.clone();
    params.t = 1;
    Ok(make_ensemble(Kind::Dt, &params, seed, mean(y), vec![tree], vec![1.0], m))
}

/// Bagging: `t` trees on bootstrap resamples, averaged.
pub fn fit_bagging(rows: &[Vec<f64>], y: &[f64], params: &Hyperparams, seed: u64) -> Result<Ensemble> {
    fit_bagged(Kind::Bagging, rows, y, params, seed, true, None)
}

/// Bagging with resampling switched off: every tree sees the full sample.
/// With `t = 1` this reproduces `fit_dt` exactly, which makes it a useful
/// reference point in tests.
pub fn fit_bagging_unsampled(
    rows: &[Vec<f64>],
    y: &[f64],
    params: &Hyperparams,
    seed: u64,
) -> Result<Ensemble> {
    fit_bagged(Kind::Bagging, rows, y, params, seed, false, None)
}

/// Random forest: bagging plus per-node sampling of `mtry` features.
pub fn fit_rf(rows: &[Vec<f64>], y: &[f64], params: &Hyperparams, seed: u64) -> Result<Ensemble> {
    let m = common_checks(rows, y, params)?;
    let mtry = params.mtry.unwrap_or(m.div_ceil(3));
    if mtry < 1 || mtry > m {
        return Err(Error::validation(format!("mtry must lie in [1, {m}], got {mtry}")));
    }
    fit_bagged(Kind::Rf, rows, y, params, seed, true, Some(mtry))
}

fn fit_bagged(
    kind: Kind,
    rows: &[Vec<f64>],
    y: &[f64],
    params: &Hyperparams,
    seed: u64,
    resample: bool,
    mtry: Option<usize>,
) -> Result<Ensemble> {
    let m = common_checks(rows, y, params)?;
    let n = rows.len();
    let depth = params.max_depth.unwrap_or(usize::MAX);
    let min_leaf = params.min_leaf;
    let trees: Vec<RegressionTree> = (0..params.t)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ k as u64);
            let idx: Vec<usize> = if resample {
                (0..n).map(|_| rng.gen_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            let sampler = match mtry {
                None => FeatureSampler::All,
                Some(mt) => FeatureSampler::Subset { mtry: mt, rng: Box::new(rng) },
            };
            let mut obj = VarianceObjective { rows, y, sampler };
            grow_tree(&mut obj, idx, depth, min_leaf)
        })
        .collect();
    let weights = vec![1.0; trees.len()];
    Ok(make_ensemble(kind, params, seed, mean(y), trees, weights, m))
}

/// Diagnostics for one boosting round of the adaptive learner.
#[derive(Debug, Clone, PartialEq)]
pub struct BoostRound {
    /// Zero-based round index.
    pub round: usize,
    /// Weighted average linear loss over all rows.
    pub avg_loss: f64,
    /// `avg_loss / (1 - avg_loss)`; zero when the round fit perfectly.
    pub beta: f64,
    /// Vote weight assigned to the round's tree.
    pub tree_weight: f64,
    /// Row weights after the round's multiplicative update, normalized.
    pub weights: Vec<f64>,
}

/// Adaptive boosting for regression with the linear loss. Rounds stop
/// early once the weighted average loss reaches 0.5, or immediately after
/// a perfectly fitting round.
pub fn fit_adaboost(rows: &[Vec<f64>], y: &[f64], params: &Hyperparams, seed: u64) -> Result<Ensemble> {
    fit_adaboost_traced(rows, y, params, seed).map(|(e, _)| e)
}

/// Same as [`fit_adaboost`] but also returns per-round diagnostics.
pub fn fit_adaboost_traced(
    rows: &[Vec<f64>],
    y: &[f64],
    params: &Hyperparams,
    seed: u64,
) -> Result<(Ensemble, Vec<BoostRound>)> {
    let m = common_checks(rows, y, params)?;
    check_learning_rate(params.learning_rate)?;
    let n = rows.len();
    let depth = params.max_depth.unwrap_or(usize::MAX);
    let mut w = vec![1.0 / n as f64; n];
    let mut trees = Vec::new();
    let mut tree_weights = Vec::new();
    let mut trace = Vec::new();
    for k in 0..params.t {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ k as u64);
        let idx = weighted_indices(&w, n, &mut rng);
        let mut obj = VarianceObjective { rows, y, sampler: FeatureSampler::All };
        let tree = grow_tree(&mut obj, idx, depth, params.min_leaf);
        let errs: Vec<f64> = rows.iter().zip(y).map(|(x, &t)| (tree.predict(x) - t).abs()).collect();
        let max_err = errs.iter().cloned().fold(0.0, f64::max);
        if max_err == 0.0 {
            trees.push(tree);
            tree_weights.push(1.0);
            trace.push(BoostRound { round: k, avg_loss: 0.0, beta: 0.0, tree_weight: 1.0, weights: w.clone() });
            break;
        }
        let losses: Vec<f64> = errs.iter().map(|e| e / max_err).collect();
        let avg_loss: f64 = w.iter().zip(&losses).map(|(wi, li)| wi * li).sum();
        if avg_loss >= 0.5 {
            break;
        }
        if avg_loss <= 0.0 {
            trees.push(tree);
            tree_weights.push(1.0);
            trace.push(BoostRound { round: k, avg_loss, beta: 0.0, tree_weight: 1.0, weights: w.clone() });
            break;
        }
        let beta = avg_loss / (1.0 - avg_loss);
        let tree_weight = params.learning_rate * (1.0 / beta).ln();
        for (wi, li) in w.iter_mut().zip(&losses) {
            *wi *= beta.powf(1.0 - li);
        }
        let wsum: f64 = w.iter().sum();
        for wi in w.iter_mut() {
            *wi /= wsum;
        }
        trees.push(tree);
        tree_weights.push(tree_weight);
        trace.push(BoostRound { round: k, avg_loss, beta, tree_weight, weights: w.clone() });
    }
    Ok((make_ensemble(Kind::Adaboost, params, seed, mean(y), trees, tree_weights, m), trace))
}

/// Draws `n_draws` row indexes with replacement, proportional to `w`, by
/// inverting the cumulative distribution.
fn weighted_indices(w: &[f64], n_draws: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut cum = Vec::with_capacity(w.len());
    let mut acc = 0.0;
    for &wi in w {
        acc += wi;
        cum.push(acc);
    }
    let total = acc;
    (0..n_draws)
        .map(|_| {
            let u = rng.gen::<f64>() * total;
            cum.partition_point(|&c| c <= u).min(w.len() - 1)
        })
        .collect()
}

/// Gradient boosting on squared loss: each round fits a CART tree to the
/// current residuals and shrinks its contribution by the learning rate.
pub fn fit_gb(rows: &[Vec<f64>], y: &[f64], params: &Hyperparams, seed: u64) -> Result<Ensemble> {
    let m = common_checks(rows, y, params)?;
    check_learning_rate(params.learning_rate)?;
    let n = rows.len();
    let depth = params.max_depth.unwrap_or(usize::MAX);
    let base = mean(y);
    let mut yhat = vec![base; n];
    let mut residuals = vec![0.0; n];
    let mut trees = Vec::with_capacity(params.t);
    for _ in 0..params.t {
        for i in 0..n {
            residuals[i] = y[i] - yhat[i];
        }
        let mut obj = VarianceObjective { rows, y: &residuals, sampler: FeatureSampler::All };
        let tree = grow_tree(&mut obj, (0..n).collect(), depth, params.min_leaf);
        for i in 0..n {
            yhat[i] += params.learning_rate * tree.predict(&rows[i]);
        }
        trees.push(tree);
    }
    let weights = vec![1.0; trees.len()];
    Ok(make_ensemble(Kind::Gb, params, seed, base, trees, weights, m))
}

/// Second-order boosting on squared loss. Gradients are `yhat - y` and
/// hessians are 1, so leaves take `-G/(H+lambda)` and splits must clear
/// the `gamma` penalty. Trees store unshrunk leaf weights; the learning
/// rate is applied at prediction time.
pub fn fit_xgb(rows: &[Vec<f64>], y: &[f64], params: &Hyperparams, seed: u64) -> Result<Ensemble> {
    let m = common_checks(rows, y, params)?;
    check_learning_rate(params.learning_rate)?;
    if !(params.lambda.is_finite() && params.lambda >= 0.0) {
        return Err(Error::validation(format!("lambda must be finite and non-negative, got {}", params.lambda)));
    }
    if !(params.gamma.is_finite() && params.gamma >= 0.0) {
        return Err(Error::validation(format!("gamma must be finite and non-negative, got {}", params.gamma)));
    }
    let n = rows.len();
    let depth = params.max_depth.unwrap_or(usize::MAX);
    let base = mean(y);
    let mut yhat = vec![base; n];
    let mut g = vec![0.0; n];
    let h = vec![1.0; n];
    let mut trees = Vec::with_capacity(params.t);
    for _ in 0..params.t {
        for i in 0..n {
            g[i] = yhat[i] - y[i];
        }
        let mut obj = XgbObjective { rows, g: &g, h: &h, lambda: params.lambda, gamma: params.gamma };
        let tree = grow_tree(&mut obj, (0..n).collect(), depth, params.min_leaf);
        for i in 0..n {
            yhat[i] += params.learning_rate * tree.predict(&rows[i]);
        }
        trees.push(tree);
    }
    let weights = vec![1.0; trees.len()];
    Ok(make_ensemble(Kind::Xgb, params, seed, base, trees, weights, m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn column(values: &[f64]) -> Vec<Vec<f64>> {
        values.iter().map(|&v| vec![v]).collect()
    }

    fn params(t: usize) -> Hyperparams {
        Hyperparams { t, ..Hyperparams::defaults(Kind::Dt) }
    }

    fn random_data(seed: u64, n: usize, m: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> =
            (0..n).map(|_| (0..m).map(|_| rng.gen::<f64>() * 10.0).collect()).collect();
        let y: Vec<f64> = rows
            .iter()
            .map(|r| r[0] * 2.0 - r[m - 1] + rng.gen::<f64>())
            .collect();
        (rows, y)
    }

    #[test]
    fn kind_names_round_trip() {
        for kind in Kind::ALL {
            assert_eq!(kind.name().parse::<Kind>().unwrap(), kind);
        }
        assert!("cart".parse::<Kind>().is_err());
    }

    #[test]
    fn dt_is_a_single_tree_regardless_of_t() {
        let rows = column(&[1.0, 2.0, 3.0, 4.0]);
        let y = [0.0, 0.0, 10.0, 10.0];
        let model = fit(Kind::Dt, &rows, &y, &params(7), 0).unwrap();
        assert_eq!(model.tree_count(), 1);
        assert_eq!(model.params.t, 1);
        assert_eq!(model.predict(&[1.0]).unwrap(), 0.0);
        assert_eq!(model.predict(&[4.0]).unwrap(), 10.0);
    }

    #[test]
    fn min_leaf_carries_through_to_the_tree() {
        let rows = column(&[0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
        let y = [0.0, 0.0, 0.0, 10.0, 10.0, 10.0];
        let p3 = Hyperparams { min_leaf: 3, ..params(1) };
        assert_eq!(fit_dt(&rows, &y, &p3, 0).unwrap().trees[0].leaf_count(), 2);
        let p4 = Hyperparams { min_leaf: 4, ..params(1) };
        assert_eq!(fit_dt(&rows, &y, &p4, 0).unwrap().trees[0].leaf_count(), 1);
    }

    #[test]
    fn unsampled_bagging_with_one_tree_matches_dt() {
        let (rows, y) = random_data(3, 30, 2);
        let dt = fit_dt(&rows, &y, &params(1), 0).unwrap();
        let bag = fit_bagging_unsampled(&rows, &y, &params(1), 0).unwrap();
        assert_eq!(dt.trees, bag.trees);
    }

    #[test]
    fn gb_single_round_matches_hand_arithmetic() {
        let rows = column(&[1.0, 2.0]);
        let y = [0.0, 10.0];
        let p = Hyperparams { learning_rate: 0.1, ..params(1) };
        let model = fit_gb(&rows, &y, &p, 0).unwrap();
        assert_eq!(model.base_score, 5.0);
        assert_eq!(model.predict(&[1.0]).unwrap(), 4.5);
        assert_eq!(model.predict(&[2.0]).unwrap(), 5.5);
    }

    #[test]
    fn gb_equals_xgb_without_penalties() {
        let (rows, y) = random_data(17, 40, 3);
        let p = Hyperparams {
            learning_rate: 0.3,
            max_depth: Some(3),
            lambda: 0.0,
            gamma: 0.0,
            ..params(6)
        };
        let gb = fit_gb(&rows, &y, &p, 0).unwrap();
        let xgb = fit_xgb(&rows, &y, &p, 0).unwrap();
        for row in &rows {
            let d = (gb.predict(row).unwrap() - xgb.predict(row).unwrap()).abs();
            assert!(d < 1e-9, "prediction gap {d}");
        }
    }

    #[test]
    fn xgb_lambda_shrinks_leaf_weights() {
        let rows = column(&[1.0, 2.0]);
        let y = [0.0, 10.0];
        let p = Hyperparams { lambda: 1.0, ..params(1) };
        let model = fit_xgb(&rows, &y, &p, 0).unwrap();
        // Gradients at the base score 5 are [5, -5]; each leaf holds one
        // row, so the weight is -g / (1 + 1).
        assert_eq!(model.predict(&[1.0]).unwrap(), 2.5);
        assert_eq!(model.predict(&[2.0]).unwrap(), 7.5);
    }

    #[test]
    fn xgb_gamma_can_block_every_split() {
        let rows = column(&[1.0, 2.0]);
        let y = [0.0, 10.0];
        let p = Hyperparams { gamma: 100.0, ..params(4) };
        let model = fit_xgb(&rows, &y, &p, 0).unwrap();
        assert_eq!(model.tree_count(), 4);
        assert!(model.trees.iter().all(|t| t.node_count() == 1));
        // The root gradient sum is zero, so every stump weight is zero.
        assert_eq!(model.predict(&[1.0]).unwrap(), 5.0);
    }

    #[test]
    fn adaboost_perfect_round_short_circuits() {
        let rows = column(&[1.0, 2.0, 3.0]);
        let y = [4.0, 4.0, 4.0];
        let (model, trace) = fit_adaboost_traced(&rows, &y, &params(10), 1).unwrap();
        assert_eq!(model.tree_count(), 1);
        assert_eq!(model.tree_weights, vec![1.0]);
        assert_eq!(model.predict(&[2.0]).unwrap(), 4.0);
        assert_eq!(trace.len(), 1);
        assert_eq!(trace[0].avg_loss, 0.0);
    }

    #[test]
    fn adaboost_stops_when_average_loss_reaches_half() {
        // Identical inputs with opposite targets: every stump leaves at
        // least half the weight at full loss.
        let rows = column(&[0.0, 0.0]);
        let y = [0.0, 10.0];
        let (model, trace) = fit_adaboost_traced(&rows, &y, &params(10), 1).unwrap();
        assert_eq!(model.tree_count(), 0);
        assert!(trace.is_empty());
        assert_eq!(model.predict(&[0.0]).unwrap(), 5.0);
    }

    #[test]
    fn adaboost_trace_is_self_consistent() {
        let rows = column(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let y = [1.0, 2.0, 3.0, 10.0, 11.0, 12.0];
        let p = Hyperparams { learning_rate: 0.5, max_depth: Some(1), ..params(4) };
        let (model, trace) = fit_adaboost_traced(&rows, &y, &p, 9).unwrap();
        assert_eq!(model.tree_count(), trace.len());
        let n = rows.len();
        let mut w_pre = vec![1.0 / n as f64; n];
        for (k, round) in trace.iter().enumerate() {
            assert_eq!(round.round, k);
            let errs: Vec<f64> =
                rows.iter().zip(&y).map(|(x, t)| (model.trees[k].predict(x) - t).abs()).collect();
            let max_err = errs.iter().cloned().fold(0.0, f64::max);
            if round.beta == 0.0 {
                assert_eq!(k + 1, trace.len());
                assert_eq!(round.tree_weight, 1.0);
                continue;
            }
            let losses: Vec<f64> = errs.iter().map(|e| e / max_err).collect();
            let avg: f64 = w_pre.iter().zip(&losses).map(|(w, l)| w * l).sum();
            assert!((avg - round.avg_loss).abs() < 1e-12);
            assert!(avg < 0.5);
            let beta = avg / (1.0 - avg);
            assert!((beta - round.beta).abs() < 1e-12);
            assert!((p.learning_rate * (1.0 / beta).ln() - round.tree_weight).abs() < 1e-12);
            let mut w_post: Vec<f64> =
                w_pre.iter().zip(&losses).map(|(w, l)| w * beta.powf(1.0 - l)).collect();
            let sum: f64 = w_post.iter().sum();
            for w in &mut w_post {
                *w /= sum;
            }
            for (a, b) in w_post.iter().zip(&round.weights) {
                assert!((a - b).abs() < 1e-12);
            }
            let total: f64 = round.weights.iter().sum();
            assert!((total - 1.0).abs() < 1e-12);
            w_pre = round.weights.clone();
        }
    }

    #[test]
    fn rf_with_full_mtry_matches_bagging() {
        let (rows, y) = random_data(23, 40, 3);
        let p = Hyperparams { mtry: Some(3), ..params(12) };
        let bag = fit_bagging(&rows, &y, &p, 5).unwrap();
        let rf = fit_rf(&rows, &y, &p, 5).unwrap();
        assert_eq!(bag.trees, rf.trees);
    }

    #[test]
    fn rf_with_mtry_one_sometimes_draws_the_dead_feature() {
        // Feature 1 is constant, so trees whose root draws it cannot
        // split at all.
        let rows: Vec<Vec<f64>> = (0..12).map(|i| vec![f64::from(i), 7.0]).collect();
        let y: Vec<f64> = (0..12).map(|i| f64::from(i) * 2.0).collect();
        let p = Hyperparams { mtry: Some(1), ..params(20) };
        let rf = fit_rf(&rows, &y, &p, 7).unwrap();
        assert!(rf.trees.iter().any(|t| t.node_count() == 1));
        assert!(rf.trees.iter().any(|t| t.node_count() > 1));
        rf.trees.iter().for_each(|t| t.for_each_split(|f, _| assert_eq!(f, 0)));
    }

    #[test]
    fn default_mtry_is_a_third_of_the_features_rounded_up() {
        let (rows, y) = random_data(29, 30, 4);
        let explicit = Hyperparams { mtry: Some(2), ..params(6) };
        let implied = Hyperparams { mtry: None, ..params(6) };
        let a = fit_rf(&rows, &y, &explicit, 2).unwrap();
        let b = fit_rf(&rows, &y, &implied, 2).unwrap();
        assert_eq!(a.trees, b.trees);
    }

    #[test]
    fn every_kind_is_deterministic_in_seed_and_worker_count() {
        let (rows, y) = random_data(31, 25, 3);
        let p = Hyperparams { max_depth: Some(3), ..params(8) };
        let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let quad = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        for kind in Kind::ALL {
            let a = fit(kind, &rows, &y, &p, 42).unwrap();
            let b = fit(kind, &rows, &y, &p, 42).unwrap();
            assert_eq!(a, b, "{kind} refit differs");
            let c = single.install(|| fit(kind, &rows, &y, &p, 42)).unwrap();
            let d = quad.install(|| fit(kind, &rows, &y, &p, 42)).unwrap();
            assert_eq!(c, d, "{kind} differs across worker counts");
            assert_eq!(a, c, "{kind} differs under an explicit pool");
        }
    }

    #[test]
    fn different_seeds_give_different_forests() {
        let (rows, y) = random_data(37, 30, 2);
        let a = fit_bagging(&rows, &y, &params(4), 1).unwrap();
        let b = fit_bagging(&rows, &y, &params(4), 2).unwrap();
        assert_ne!(a.trees, b.trees);
    }

    #[test]
    fn invalid_inputs_are_rejected() {
        let rows = column(&[1.0, 2.0]);
        let y = [0.0, 1.0];
        assert!(fit_dt(&rows, &y, &params(0), 0).is_err());
        let bad_lr = Hyperparams { learning_rate: 0.0, ..params(1) };
        assert!(fit_gb(&rows, &y, &bad_lr, 0).is_err());
        let bad_lambda = Hyperparams { lambda: -1.0, ..params(1) };
        assert!(fit_xgb(&rows, &y, &bad_lambda, 0).is_err());
        let bad_mtry = Hyperparams { mtry: Some(2), ..params(1) };
        assert!(fit_rf(&rows, &y, &bad_mtry, 0).is_err());
        assert!(fit_dt(&[], &[], &params(1), 0).is_err());
        assert!(fit_dt(&rows, &[0.0], &params(1), 0).is_err());
        assert!(fit_dt(&rows, &[0.0, f64::NAN], &params(1), 0).is_err());
        let ragged = vec![vec![1.0], vec![1.0, 2.0]];
        assert!(fit_dt(&ragged, &y, &params(1), 0).is_err());
        let zero_depth = Hyperparams { max_depth: Some(0), ..params(1) };
        assert!(fit_dt(&rows, &y, &zero_depth, 0).is_err());
    }
}
