//! Regression trees: structure, prediction, and exact greedy growth.
//!
//! Splits scan every feature and every midpoint between consecutive
//! distinct sorted values. Two scoring rules share the scanner: variance
//! reduction (CART) and the second-order gain with leaf regularization.
//! Ties break toward the lower feature index, then the lower threshold,
//! so trees are reproducible regardless of evaluation order.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::Result;

/// One node of a regression tree, arena-indexed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        /// Score improvement recorded when the split was accepted.
        gain: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        score: f64,
    },
}

/// A fitted regression tree. Node 0 is the root; a sample goes left when
/// `x[feature] <= threshold`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub(crate) nodes: Vec<TreeNode>,
}

impl RegressionTree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut at = 0usize;
        loop {
            match &self.nodes[at] {
                TreeNode::Leaf { score } => return *score,
                TreeNode::Split { feature, threshold, left, right, .. } => {
                    at = if x[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, TreeNode::Leaf { .. })).count()
    }

    pub fn split_count(&self) -> usize {
        self.nodes.len() - self.leaf_count()
    }

    /// Leaf scores in node order.
    pub fn leaf_scores(&self) -> Vec<f64> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                TreeNode::Leaf { score } => Some(*score),
                _ => None,
            })
            .collect()
    }

    /// Calls `f(feature, recorded_gain)` for every split node.
    pub fn for_each_split(&self, mut f: impl FnMut(usize, f64)) {
        for node in &self.nodes {
            if let TreeNode::Split { feature, gain, .. } = node {
                f(*feature, *gain);
            }
        }
    }

    /// Largest feature index referenced by any split.
    pub fn max_feature_index(&self) -> Option<usize> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                TreeNode::Split { feature, .. } => Some(*feature),
                _ => None,
            })
            .max()
    }

    /// Root node of a constant tree.
    pub fn constant(score: f64) -> Self {
        RegressionTree { nodes: vec![TreeNode::Leaf { score }] }
    }

    /// Structural integrity check for deserialized trees. The builder
    /// always places children after their parent, so requiring that here
    /// also rules out reference cycles.
    pub(crate) fn validate(&self, n_features: usize) -> std::result::Result<(), String> {
        if self.nodes.is_empty() {
            return Err("tree has no nodes".into());
        }
        for (i, node) in self.nodes.iter().enumerate() {
            match node {
                TreeNode::Leaf { score } => {
                    if !score.is_finite() {
                        return Err(format!("node {i}: non-finite leaf score"));
                    }
                }
                TreeNode::Split { feature, threshold, gain, left, right } => {
                    if *feature >= n_features {
                        return Err(format!("node {i}: feature {feature} out of range"));
                    }
                    if !threshold.is_finite() || !gain.is_finite() {
                        return Err(format!("node {i}: non-finite threshold or gain"));
                    }
                    if *left <= i || *right <= i || *left >= self.nodes.len() || *right >= self.nodes.len() {
                        return Err(format!("node {i}: child index out of order or range"));
                    }
                }
            }
        }
        Ok(())
    }
}

/// A candidate split: feature, threshold, and the score improvement that
/// accepting it yields.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitCandidate {
    pub feature: usize,
    pub threshold: f64,
    pub gain: f64,
}

/// Optimal leaf weight under squared loss with L2 leaf regularization:
/// `-G / (H + lambda)`.
pub fn xgb_leaf_weight(g_sum: f64, h_sum: f64, lambda: f64) -> f64 {
    -g_sum / (h_sum + lambda)
}

/// Second-order split gain with per-leaf penalty:
/// `0.5 * (GL^2/(HL+l) + GR^2/(HR+l) - (GL+GR)^2/(HL+HR+l)) - gamma`.
pub fn xgb_split_gain(gl: f64, hl: f64, gr: f64, hr: f64, lambda: f64, gamma: f64) -> f64 {
    0.5 * (gl * gl / (hl + lambda) + gr * gr / (hr + lambda)
        - (gl + gr) * (gl + gr) / (hl + hr + lambda))
        - gamma
}

/// Midpoint of two consecutive distinct sorted values, adjusted so that
/// `x <= threshold` reproduces the scanned partition even when the
/// floating-point midpoint collapses onto the upper value.
fn split_threshold(a: f64, b: f64) -> f64 {
    debug_assert!(a < b);
    let mid = a + (b - a) / 2.0;
    if mid < b {
        mid
    } else {
        a
    }
}

/// How candidate features are picked at each node.
pub(crate) enum FeatureSampler {
    /// Scan all features in index order.
    All,
    /// Scan a without-replacement sample of `mtry` features per node,
    /// drawn from the tree's random stream.
    Subset { mtry: usize, rng: Box<ChaCha8Rng> },
}

impl FeatureSampler {
    fn draw(&mut self, m: usize) -> Vec<usize> {
        match self {
            FeatureSampler::All => (0..m).collect(),
            FeatureSampler::Subset { mtry, rng } => {
                let mut pool: Vec<usize> = (0..m).collect();
                let take = (*mtry).min(m);
                for i in 0..take {
                    let j = rng.gen_range(i..m);
                    pool.swap(i, j);
                }
                pool.truncate(take);
                // Scan order stays ascending so tie-breaking is unchanged.
                pool.sort_unstable();
                pool
            }
        }
    }
}

/// Node scoring used by the generic grower.
pub(crate) trait NodeObjective {
    fn n_features(&self) -> usize;
    fn feature_value(&self, row: usize, feature: usize) -> f64;
    fn leaf_score(&self, idx: &[usize]) -> f64;
    fn best_split(&mut self, idx: &[usize], min_leaf: usize) -> Option<SplitCandidate>;
}

/// CART objective: leaves average their targets, splits maximize the
/// reduction in sum of squared errors.
pub(crate) struct VarianceObjective<'a> {
    pub rows: &'a [Vec<f64>],
    pub y: &'a [f64],
    pub sampler: FeatureSampler,
}

impl NodeObjective for VarianceObjective<'_> {
    fn n_features(&self) -> usize {
        self.rows[0].len()
    }

    fn feature_value(&self, row: usize, feature: usize) -> f64 {
        self.rows[row][feature]
    }

    fn leaf_score(&self, idx: &[usize]) -> f64 {
        let sum: f64 = idx.iter().map(|&i| self.y[i]).sum();
        sum / idx.len() as f64
    }

    fn best_split(&mut self, idx: &[usize], min_leaf: usize) -> Option<SplitCandidate> {
        let m = self.n_features();
        let features = self.sampler.draw(m);
        let total: f64 = idx.iter().map(|&i| self.y[i]).sum();
        let n = idx.len() as f64;
        let parent_term = total * total / n;
        let mut order: Vec<usize> = Vec::with_capacity(idx.len());
        let mut best: Option<SplitCandidate> = None;
        for &feature in &features {
            order.clear();
            order.extend_from_slice(idx);
            order.sort_by(|&a, &b| {
                self.rows[a][feature]
                    .partial_cmp(&self.rows[b][feature])
                    .expect("finite feature values")
                    .then(a.cmp(&b))
            });
            let mut left_sum = 0.0;
            for i in 1..order.len() {
                left_sum += self.y[order[i - 1]];
                let a = self.rows[order[i - 1]][feature];
                let b = self.rows[order[i]][feature];
                if a == b || i < min_leaf || order.len() - i < min_leaf {
                    continue;
                }
                let left_n = i as f64;
                let right_sum = total - left_sum;
                let right_n = n - left_n;
                let gain = left_sum * left_sum / left_n + right_sum * right_sum / right_n - parent_term;
                if gain > 0.0 && best.map_or(true, |bst| gain > bst.gain) {
                    best = Some(SplitCandidate { feature, threshold: split_threshold(a, b), gain });
                }
            }
        }
        best
    }
}

/// Second-order objective: leaves take `-G/(H+lambda)`, splits maximize
/// the regularized gain and are accepted only when it is positive.
pub(crate) struct XgbObjective<'a> {
    pub rows: &'a [Vec<f64>],
    pub g: &'a [f64],
    pub h: &'a [f64],
    pub lambda: f64,
    pub gamma: f64,
}

impl NodeObjective for XgbObjective<'_> {
    fn n_features(&self) -> usize {
        self.rows[0].len()
    }

    fn feature_value(&self, row: usize, feature: usize) -> f64 {
        self.rows[row][feature]
    }

    fn leaf_score(&self, idx: &[usize]) -> f64 {
        let g: f64 = idx.iter().map(|&i| self.g[i]).sum();
        let h: f64 = idx.iter().map(|&i| self.h[i]).sum();
        xgb_leaf_weight(g, h, self.lambda)
    }

    fn best_split(&mut self, idx: &[usize], min_leaf: usize) -> Option<SplitCandidate> {
        let m = self.n_features();
        let g_total: f64 = idx.iter().map(|&i| self.g[i]).sum();
        let h_total: f64 = idx.iter().map(|&i| self.h[i]).sum();
        let mut order: Vec<usize> = Vec::with_capacity(idx.len());
        let mut best: Option<SplitCandidate> = None;
        for feature in 0..m {
            order.clear();
            order.extend_from_slice(idx);
            order.sort_by(|&a, &b| {
                self.rows[a][feature]
                    .partial_cmp(&self.rows[b][feature])
                    .expect("finite feature values")
                    .then(a.cmp(&b))
            });
            let mut gl = 0.0;
            let mut hl = 0.0;
            for i in 1..order.len() {
                gl += self.g[order[i - 1]];
                hl += self.h[order[i - 1]];
                let a = self.rows[order[i - 1]][feature];
                let b = self.rows[order[i]][feature];
                if a == b || i < min_leaf || order.len() - i < min_leaf {
                    continue;
                }
                let gain = xgb_split_gain(gl, hl, g_total - gl, h_total - hl, self.lambda, self.gamma);
                if gain > 0.0 && best.map_or(true, |bst| gain > bst.gain) {
                    best = Some(SplitCandidate { feature, threshold: split_threshold(a, b), gain });
                }
            }
        }
        best
    }
}

/// Grows a tree depth-first: root, then the whole left subtree, then the
/// right. `max_depth` counts split levels, so depth 1 means one split.
pub(crate) fn grow_tree<O: NodeObjective>(
    obj: &mut O,
    idx: Vec<usize>,
    max_depth: usize,
    min_leaf: usize,
) -> RegressionTree {
    let mut nodes = Vec::new();
    grow_node(obj, &mut nodes, idx, max_depth, min_leaf);
    RegressionTree { nodes }
}

fn grow_node<O: NodeObjective>(
    obj: &mut O,
    nodes: &mut Vec<TreeNode>,
    idx: Vec<usize>,
    depth_left: usize,
    min_leaf: usize,
) -> usize {
    let split = if depth_left == 0 || idx.len() < 2 * min_leaf {
        None
    } else {
        obj.best_split(&idx, min_leaf)
    };
    match split {
        None => {
            nodes.push(TreeNode::Leaf { score: obj.leaf_score(&idx) });
            nodes.len() - 1
        }
        Some(SplitCandidate { feature, threshold, gain }) => {
            let (left_idx, right_idx): (Vec<usize>, Vec<usize>) =
                idx.iter().partition(|&&i| obj.feature_value(i, feature) <= threshold);
            debug_assert!(!left_idx.is_empty() && !right_idx.is_empty());
            let me = nodes.len();
            nodes.push(TreeNode::Leaf { score: f64::NAN });
            let left = grow_node(obj, nodes, left_idx, depth_left - 1, min_leaf);
            let right = grow_node(obj, nodes, right_idx, depth_left - 1, min_leaf);
            nodes[me] = TreeNode::Split { feature, threshold, gain, left, right };
            me
        }
    }
}

/// Validates a training design: non-empty, rectangular, finite, with one
/// target per row. Returns the feature count.
pub(crate) fn check_training_data(rows: &[Vec<f64>], y: &[f64]) -> Result<usize> {
    if rows.is_empty() {
        return Err(Error::validation("empty training set"));
    }
    if rows.len() != y.len() {
        return Err(Error::validation(format!("{} rows but {} targets", rows.len(), y.len())));
    }
    let m = rows[0].len();
    if m == 0 {
        return Err(Error::validation("rows have zero features"));
    }
    for (i, row) in rows.iter().enumerate() {
        if row.len() != m {
            return Err(Error::validation(format!("row {i} has {} features, expected {m}", row.len())));
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation(format!("row {i} contains a non-finite feature")));
        }
    }
    if let Some(i) = y.iter().position(|v| !v.is_finite()) {
        return Err(Error::validation(format!("target {i} is non-finite")));
    }
    Ok(m)
}

/// Fits a single CART regression tree on all rows.
pub fn fit_tree(rows: &[Vec<f64>], y: &[f64], max_depth: Option<usize>, min_leaf: usize) -> Result<RegressionTree> {
    check_training_data(rows, y)?;
    if min_leaf == 0 {
        return Err(Error::validation("min_leaf must be at least 1"));
    }
    if max_depth == Some(0) {
        return Err(Error::validation("max_depth must be at least 1 when set"));
    }
    let mut obj = VarianceObjective { rows, y, sampler: FeatureSampler::All };
    let idx: Vec<usize> = (0..rows.len()).collect();
    Ok(grow_tree(&mut obj, idx, max_depth.unwrap_or(usize::MAX), min_leaf))
}

/// Best variance-reduction split over an explicit feature set, or `None`
/// when no split strictly reduces the squared error.
pub fn best_split_variance(
    rows: &[Vec<f64>],
    y: &[f64],
    feature_indices: &[usize],
    min_leaf: usize,
) -> Result<Option<SplitCandidate>> {
    let m = check_training_data(rows, y)?;
    if min_leaf == 0 {
        return Err(Error::validation("min_leaf must be at least 1"));
    }
    let mut features: Vec<usize> = feature_indices.to_vec();
    features.sort_unstable();
    features.dedup();
    if features.iter().any(|&f| f >= m) {
        return Err(Error::validation(format!("feature index out of range (m = {m})")));
    }
    if features.is_empty() {
        return Err(Error::validation("empty feature set"));
    }
    let idx: Vec<usize> = (0..rows.len()).collect();
    let total: f64 = y.iter().sum();
    let n = rows.len() as f64;
    let parent_term = total * total / n;
    let mut best: Option<SplitCandidate> = None;
    let mut order: Vec<usize> = Vec::with_capacity(idx.len());
    for &feature in &features {
        order.clear();
        order.extend_from_slice(&idx);
        order.sort_by(|&a, &b| {
            rows[a][feature]
                .partial_cmp(&rows[b][feature])
                .expect("finite feature values")
                .then(a.cmp(&b))
        });
        let mut left_sum = 0.0;
        for i in 1..order.len() {
            left_sum += y[order[i - 1]];
            let a = rows[order[i - 1]][feature];
            let b = rows[order[i]][feature];
            if a == b || i < min_leaf || order.len() - i < min_leaf {
                continue;
            }
            let left_n = i as f64;
            let right_sum = total - left_sum;
            let right_n = n - left_n;
            let gain = left_sum * left_sum / left_n + right_sum * right_sum / right_n - parent_term;
            if gain > 0.0 && best.map_or(true, |bst| gain > bst.gain) {
                best = Some(SplitCandidate { feature, threshold: split_threshold(a, b), gain });
            }
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn column(values: &[f64]) -> Vec<Vec<f64>> {
        values.iter().map(|&v| vec![v]).collect()
    }

    /// Brute-force reference: recomputes every candidate's reduction from
    /// two independent SSE evaluations rather than the cancellation form.
    fn oracle_best(rows: &[Vec<f64>], y: &[f64], min_leaf: usize) -> Option<(usize, f64, f64)> {
        let n = rows.len();
        let m = rows[0].len();
        let sse = |idx: &[usize]| -> f64 {
            let mean = idx.iter().map(|&i| y[i]).sum::<f64>() / idx.len() as f64;
            idx.iter().map(|&i| (y[i] - mean) * (y[i] - mean)).sum()
        };
        let all: Vec<usize> = (0..n).collect();
        let parent = sse(&all);
        let mut best: Option<(usize, f64, f64)> = None;
        for f in 0..m {
            let mut values: Vec<f64> = rows.iter().map(|r| r[f]).collect();
            values.sort_by(|a, b| a.partial_cmp(b).unwrap());
            values.dedup();
            for w in values.windows(2) {
                let mid = w[0] + (w[1] - w[0]) / 2.0;
                let threshold = if mid < w[1] { mid } else { w[0] };
                let (left, right): (Vec<usize>, Vec<usize>) =
                    all.iter().partition(|&&i| rows[i][f] <= threshold);
                if left.len() < min_leaf || right.len() < min_leaf {
                    continue;
                }
                let reduction = parent - sse(&left) - sse(&right);
                if reduction > 0.0 && best.map_or(true, |(_, _, bg)| reduction > bg) {
                    best = Some((f, threshold, reduction));
                }
            }
        }
        best
    }

    #[test]
    fn two_cluster_split() {
        let rows = column(&[1.0, 2.0, 3.0, 4.0]);
        let y = [0.0, 0.0, 10.0, 10.0];
        let split = best_split_variance(&rows, &y, &[0], 1).unwrap().unwrap();
        assert_eq!(split.feature, 0);
        assert_eq!(split.threshold, 2.5);
        assert_eq!(split.gain, 100.0);
    }

    #[test]
    fn depth_one_tree_has_two_mean_leaves() {
        let rows = column(&[1.0, 2.0, 3.0, 4.0]);
        let y = [0.0, 0.0, 10.0, 10.0];
        let tree = fit_tree(&rows, &y, Some(1), 1).unwrap();
        assert_eq!(tree.leaf_count(), 2);
        assert_eq!(tree.predict(&[1.7]), 0.0);
        assert_eq!(tree.predict(&[2.5]), 0.0);
        assert_eq!(tree.predict(&[2.6]), 10.0);
    }

    #[test]
    fn constant_targets_never_split() {
        let rows = column(&[1.0, 2.0, 3.0]);
        let y = [7.0, 7.0, 7.0];
        assert!(best_split_variance(&rows, &y, &[0], 1).unwrap().is_none());
        let tree = fit_tree(&rows, &y, None, 1).unwrap();
        assert_eq!(tree.node_count(), 1);
        assert_eq!(tree.predict(&[9.9]), 7.0);
    }

    #[test]
    fn min_leaf_blocks_edge_boundaries() {
        let rows = column(&[1.0, 2.0, 3.0, 4.0]);
        let y = [0.0, 5.0, 5.0, 100.0];
        // min_leaf 2 leaves only the middle boundary; unrestricted the
        // best cut isolates the 100.
        let free = best_split_variance(&rows, &y, &[0], 1).unwrap().unwrap();
        assert_eq!(free.threshold, 3.5);
        let constrained = best_split_variance(&rows, &y, &[0], 2).unwrap().unwrap();
        assert_eq!(constrained.threshold, 2.5);
    }

    #[test]
    fn feature_tie_prefers_lower_index() {
        let rows: Vec<Vec<f64>> = vec![vec![1.0, 1.0], vec![2.0, 2.0]];
        let y = [0.0, 10.0];
        let split = best_split_variance(&rows, &y, &[0, 1], 1).unwrap().unwrap();
        assert_eq!(split.feature, 0);
    }

    #[test]
    fn threshold_tie_prefers_lower_value() {
        // Boundaries after rows 1 and 3 reduce SSE equally.
        let rows = column(&[1.0, 2.0, 3.0, 4.0]);
        let y = [0.0, 10.0, 10.0, 0.0];
        let split = best_split_variance(&rows, &y, &[0], 1).unwrap().unwrap();
        assert_eq!(split.threshold, 1.5);
    }

    #[test]
    fn collapsed_midpoint_falls_back_to_lower_value() {
        let a = 1.0_f64;
        let b = f64::from_bits(a.to_bits() + 1);
        let rows = column(&[a, b]);
        let y = [0.0, 10.0];
        let split = best_split_variance(&rows, &y, &[0], 1).unwrap().unwrap();
        assert_eq!(split.threshold, a);
        let tree = fit_tree(&rows, &y, None, 1).unwrap();
        assert_eq!(tree.predict(&[a]), 0.0);
        assert_eq!(tree.predict(&[b]), 10.0);
    }

    #[test]
    fn restricted_feature_set_is_respected() {
        // Feature 0 separates perfectly; feature 1 only partially.
        let rows: Vec<Vec<f64>> = vec![
            vec![1.0, 5.0],
            vec![2.0, 1.0],
            vec![3.0, 6.0],
            vec![4.0, 2.0],
        ];
        let y = [0.0, 0.0, 10.0, 10.0];
        let split = best_split_variance(&rows, &y, &[1], 1).unwrap().unwrap();
        assert_eq!(split.feature, 1);
        assert!(best_split_variance(&rows, &y, &[2], 1).is_err());
        assert!(best_split_variance(&rows, &y, &[], 1).is_err());
    }

    #[test]
    fn leaf_weight_matches_worked_case() {
        // Residuals [1, 3] under squared loss: g = [-1, -3], h = [1, 1].
        let w = xgb_leaf_weight(-4.0, 2.0, 1.0);
        assert!((w - 4.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn split_gain_matches_worked_case() {
        let gain = xgb_split_gain(-4.0, 2.0, 2.0, 3.0, 1.0, 1.0);
        assert!((gain - 11.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn gamma_shifts_gain_linearly() {
        let g0 = xgb_split_gain(-4.0, 2.0, 2.0, 3.0, 1.0, 0.0);
        let g2 = xgb_split_gain(-4.0, 2.0, 2.0, 3.0, 1.0, 2.0);
        assert!((g0 - g2 - 2.0).abs() < 1e-12);
    }

    #[test]
    fn scanner_matches_brute_force_on_random_data() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..25 {
            let n = rng.gen_range(2..=12);
            let m = rng.gen_range(1..=3);
            let min_leaf = rng.gen_range(1..=2);
            let rows: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..m).map(|_| f64::from(rng.gen_range(0..5))).collect())
                .collect();
            let y: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * 10.0).collect();
            let got = best_split_variance(&rows, &y, &(0..m).collect::<Vec<_>>(), min_leaf)
                .unwrap();
            let want = oracle_best(&rows, &y, min_leaf);
            match (got, want) {
                (None, None) => {}
                (Some(g), Some((f, thr, red))) => {
                    assert_eq!(g.feature, f);
                    assert_eq!(g.threshold, thr);
                    assert!((g.gain - red).abs() < 1e-9, "gain {} vs {}", g.gain, red);
                }
                (g, w) => panic!("scanner {g:?} disagrees with oracle {w:?}"),
            }
        }
    }

    #[test]
    fn tree_serde_round_trip() {
        let rows = column(&[1.0, 2.0, 3.0, 4.0]);
        let y = [0.0, 1.0, 8.0, 9.0];
        let tree = fit_tree(&rows, &y, None, 1).unwrap();
        let json = serde_json::to_string(&tree).unwrap();
        let back: RegressionTree = serde_json::from_str(&json).unwrap();
        assert_eq!(tree, back);
    }

    proptest! {
        #[test]
        fn fitted_tree_never_beats_data_or_breaks_bounds(
            data in proptest::collection::vec((0.0..10.0f64, 0.0..10.0f64, -5.0..5.0f64), 2..40),
            depth in 1usize..5,
        ) {
            let rows: Vec<Vec<f64>> = data.iter().map(|&(a, b, _)| vec![a, b]).collect();
            let y: Vec<f64> = data.iter().map(|&(_, _, t)| t).collect();
            let tree = fit_tree(&rows, &y, Some(depth), 1).unwrap();
            prop_assert!(tree.max_feature_index().map_or(true, |f| f < 2));
            // SSE of the tree at the training points never exceeds the
            // SSE of the constant mean predictor.
            let mean = y.iter().sum::<f64>() / y.len() as f64;
            let sse_mean: f64 = y.iter().map(|t| (t - mean) * (t - mean)).sum();
            let sse_tree: f64 = rows
                .iter()
                .zip(&y)
                .map(|(x, t)| {
                    let p = tree.predict(x);
                    (t - p) * (t - p)
                })
                .sum();
            prop_assert!(sse_tree <= sse_mean + 1e-9 * sse_mean.max(1.0));
            // Recorded gains are strictly positive.
            tree.for_each_split(|_, g| assert!(g > 0.0));
        }
    }
}
