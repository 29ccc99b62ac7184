//! Tree-based regression learners.
//!
//! Everything is built on one exact greedy CART scanner. The six fitting
//! entry points differ only in how rows are sampled, how targets are
//! transformed between rounds, and how tree outputs combine:
//!
//! * [`fit_dt`]: one tree on the full sample
//! * [`fit_bagging`]: averaged trees on bootstrap resamples
//! * [`fit_rf`]: bagging plus per-node feature subsampling
//! * [`fit_adaboost`]: reweighted resampling with a weighted-median vote
//! * [`fit_gb`]: residual fitting with shrinkage
//! * [`fit_xgb`]: second-order gains with leaf and split regularization
//!
//! All fits are deterministic in `(data, params, seed)` and independent
//! of the worker count.

mod fit;
mod model;
mod tree;

pub use fit::{
    fit, fit_adaboost, fit_adaboost_traced, fit_bagging, fit_bagging_unsampled, fit_dt, fit_gb,
    fit_rf, fit_xgb, BoostRound, Hyperparams, Kind,
};
pub use model::{
    boosting_objective_curve, feature_importance, load_model, predict_at_stages, save_model,
    staged_predict, Ensemble, MODEL_VERSION,
};
pub use tree::{
    best_split_variance, fit_tree, xgb_leaf_weight, xgb_split_gain, RegressionTree, SplitCandidate,
    TreeNode,
};
