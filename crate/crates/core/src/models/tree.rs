//! CART decision tree with Gini impurity.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::rng;

use super::space::HpAssignment;
use super::{clamped_logit, ModelFamily, ProbabilisticClassifier};

const SALT_TREE: u64 = 0x7133;

/// Feature subsampling rule at each split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaxFeatures {
    Sqrt,
    All,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecisionTreeParams {
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub min_samples_split: usize,
    pub max_features: MaxFeatures,
}

impl DecisionTreeParams {
    pub fn from_hp(hp: &HpAssignment) -> Result<DecisionTreeParams> {
        let get_int = |name: &str| -> Result<usize> {
            hp.get(name)
                .and_then(|v| v.as_int())
                .map(|v| v as usize)
                .ok_or_else(|| {
                    Error::ModelConfig(format!("missing integer hyperparameter '{name}'"))
                })
        };
        let max_features = match hp.get("max_features").and_then(|v| v.as_cat()) {
            Some("all") => MaxFeatures::All,
            _ => MaxFeatures::Sqrt,
        };
        let params = DecisionTreeParams {
            max_depth: get_int("max_depth")?,
            min_samples_leaf: get_int("min_samples_leaf")?,
            min_samples_split: get_int("min_samples_split")?,
            max_features,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if self.min_samples_split < 2 {
            return Err(Error::ModelConfig(
                "min_samples_split must be at least 2".into(),
            ));
        }
        if self.min_samples_leaf < 1 {
            return Err(Error::ModelConfig(
                "min_samples_leaf must be at least 1".into(),
            ));
        }
        if self.max_depth < 1 {
            return Err(Error::ModelConfig("max_depth must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        p_pos: f64,
        n: usize,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecisionTreeModel {
    pub nodes: Vec<TreeNode>,
    pub params: DecisionTreeParams,
    pub seed: u64,
    pub feature_names: Vec<String>,
}

/// Gini impurity of a node with the given class counts.
pub fn gini(n_pos: usize, n_neg: usize) -> f64 {
    let n = (n_pos + n_neg) as f64;
    if n == 0.0 {
        return 0.0;
    }
    let p = n_pos as f64 / n;
    let q = n_neg as f64 / n;
    1.0 - p * p - q * q
}

struct Builder<'a> {
    x: &'a DenseMatrix,
    y: &'a [u8],
    params: &'a DecisionTreeParams,
    seed: u64,
    nodes: Vec<TreeNode>,
}

impl Builder<'_> {
    /// Grows one node; `path` identifies it for seeded tie-breaking that
    /// does not depend on how sibling subtrees grow.
    fn grow(&mut self, rows: Vec<usize>, depth: usize, path: u64) -> usize {
        let n_pos = rows.iter().filter(|&&r| self.y[r] != 0).count();
        let n = rows.len();
        let make_leaf = |nodes: &mut Vec<TreeNode>| {
            nodes.push(TreeNode::Leaf {
                p_pos: n_pos as f64 / n as f64,
                n,
            });
            nodes.len() - 1
        };
        // Pure nodes are leaves regardless of remaining depth budget.
        if n_pos == 0
            || n_pos == n
            || depth >= self.params.max_depth
            || n < self.params.min_samples_split
        {
            return make_leaf(&mut self.nodes);
        }

        let d = self.x.n_cols;
        // Canonical feature order keeps the all-features tree fully
        // deterministic; the seeded shuffle drives both the subsampling and
        // equal-gain tie-breaks in sqrt mode.
        let candidates: Vec<usize> = match self.params.max_features {
            MaxFeatures::All => (0..d).collect(),
            MaxFeatures::Sqrt => {
                let mut node_rng = rng::stream(self.seed, SALT_TREE, path);
                let mut c = rng::shuffled_indices(d, &mut node_rng);
                let k = (d as f64).sqrt().ceil() as usize;
                c.truncate(k.max(1));
                c
            }
        };

        let parent_gini = gini(n_pos, n - n_pos);
        let mut best: Option<(f64, usize, f64)> = None; // (weighted_gini, feature, threshold)
        for &feat in &candidates {
            let mut order: Vec<usize> = rows.clone();
            order.sort_by(|&a, &b| {
                self.x
                    .get(a, feat)
                    .partial_cmp(&self.x.get(b, feat))
                    .expect("non-finite feature value")
            });
            let mut left_pos = 0usize;
            for i in 0..n - 1 {
                if self.y[order[i]] != 0 {
                    left_pos += 1;
                }
                let v = self.x.get(order[i], feat);
                let v_next = self.x.get(order[i + 1], feat);
                if v == v_next {
                    continue;
                }
                let n_left = i + 1;
                let n_right = n - n_left;
                if n_left < self.params.min_samples_leaf || n_right < self.params.min_samples_leaf {
                    continue;
                }
                let right_pos = n_pos - left_pos;
                let w = (n_left as f64 * gini(left_pos, n_left - left_pos)
                    + n_right as f64 * gini(right_pos, n_right - right_pos))
                    / n as f64;
                // Strict improvement; candidate order (seeded) breaks ties.
                if best.is_none_or(|(bw, _, _)| w < bw - 1e-15) {
                    best = Some((w, feat, 0.5 * (v + v_next)));
                }
            }
        }

        let Some((w, feature, threshold)) = best else {
            return make_leaf(&mut self.nodes);
        };
        if w >= parent_gini - 1e-15 {
            // No impurity reduction available.
            return make_leaf(&mut self.nodes);
        }

        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
            .into_iter()
            .partition(|&r| self.x.get(r, feature) <= threshold);
        let idx = self.nodes.len();
        self.nodes.push(TreeNode::Leaf { p_pos: 0.0, n: 0 }); // placeholder
        let left = self.grow(left_rows, depth + 1, path.wrapping_mul(2).wrapping_add(1));
        let right = self.grow(right_rows, depth + 1, path.wrapping_mul(2).wrapping_add(2));
        self.nodes[idx] = TreeNode::Split {
            feature,
            threshold,
            left,
            right,
        };
        idx
    }
}

/// Fits a CART tree. The seed drives per-split feature subsampling and
/// equal-gain tie-breaks.
pub fn fit_decision_tree(
    x: &DenseMatrix,
    y: &[u8],
    params: &DecisionTreeParams,
    seed: u64,
    feature_names: Vec<String>,
) -> Result<DecisionTreeModel> {
    params.validate()?;
    if x.n_rows == 0 || x.n_rows != y.len() {
        return Err(Error::ModelConfig(
            "empty or mismatched training data".into(),
        ));
    }
    let mut builder = Builder {
        x,
        y,
        params,
        seed,
        nodes: Vec::new(),
    };
    builder.grow((0..x.n_rows).collect(), 0, 0);
    Ok(DecisionTreeModel {
        nodes: builder.nodes,
        params: params.clone(),
        seed,
        feature_names,
    })
}

impl DecisionTreeModel {
    fn leaf_probability(&self, x: &[f64]) -> f64 {
        let mut i = 0usize;
        loop {
            match &self.nodes[i] {
                TreeNode::Leaf { p_pos, .. } => return *p_pos,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if x[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    };
                }
            }
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, TreeNode::Leaf { .. }))
            .count()
    }
}

impl ProbabilisticClassifier for DecisionTreeModel {
    fn family(&self) -> ModelFamily {
        ModelFamily::DecisionTree
    }

    fn predict_proba(&self, x: &[f64]) -> f64 {
        self.leaf_probability(x)
    }

    fn raw_score(&self, x: &[f64]) -> f64 {
        clamped_logit(self.leaf_probability(x))
    }
}

/// Shared helper: draws `k` distinct indices from `0..n` (seeded).
pub(crate) fn sample_without_replacement<R: Rng>(n: usize, k: usize, rng: &mut R) -> Vec<usize> {
    let mut idx = rng::shuffled_indices(n, rng);
    idx.truncate(k.min(n));
    idx
}
