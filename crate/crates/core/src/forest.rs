//! CART regression trees and a bagged random forest.
//!
//! Each tree draws a bootstrap resample of the training rows and, at every
//! node, a random subset of `mtry` candidate features. Nodes split on the
//! threshold with the largest reduction in the sum of squared deviations and
//! grow until pure (or until `min_leaf` rows remain).
//!
//! Randomness comes from ChaCha8 streams: tree `t` of a forest seeded with
//! `s` uses `ChaCha8Rng::seed_from_u64(s)` on stream `t`. The generator is
//! portable, so forests are reproducible across platforms and independent of
//! the number of worker threads.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{DomainError, ForestConfig};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ForestError {
    #[error("expected {expected} features, got {got}")]
    SpecMismatch { expected: usize, got: usize },
    #[error("training set is empty")]
    Empty,
    #[error(transparent)]
    Config(#[from] DomainError),
}

/// Splits whose quality is within this fraction of the node's sum of squares
/// of the best one count as ties.
pub const TIE_TOLERANCE: f64 = 1e-9;
/// A split must reduce the node's sum of squares by more than this fraction.
pub const MIN_IMPROVEMENT: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    Internal {
        feature: usize,
        /// Rows with `x[feature] <= threshold` go left.
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf {
        prediction: f64,
        n_samples: usize,
    },
}

impl TreeNode {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { prediction, .. } => return *prediction,
                TreeNode::Internal {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    node = if x[*feature] <= *threshold { left } else { right };
                }
            }
        }
    }

    pub fn n_leaves(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Internal { left, right, .. } => left.n_leaves() + right.n_leaves(),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Internal { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }
}

/// Threshold between two consecutive distinct values, guaranteed to send
/// `lo` left and `hi` right.
pub fn midpoint(lo: f64, hi: f64) -> f64 {
    let mid = lo + (hi - lo) / 2.0;
    if mid < hi {
        mid
    } else {
        lo
    }
}

struct Candidate {
    feature: usize,
    threshold: f64,
    reduction: f64,
    split_at: usize,
}

struct Grower<'a> {
    x: &'a [Vec<f64>],
    y: &'a [f64],
    mtry: usize,
    min_leaf: usize,
}

impl Grower<'_> {
    fn grow(&self, rows: &mut [usize], rng: &mut ChaCha8Rng) -> TreeNode {
        let n = rows.len();
        let sum: f64 = rows.iter().map(|&r| self.y[r]).sum();
        let mean = sum / n as f64;
        let first = self.y[rows[0]];
        let pure = rows.iter().all(|&r| self.y[r] == first);
        let leaf = TreeNode::Leaf {
            prediction: if pure { first } else { mean },
            n_samples: n,
        };
        if pure || n <= self.min_leaf {
            return leaf;
        }

        let p = self.x[0].len();
        let mut features = index::sample(rng, p, self.mtry).into_vec();
        features.sort_unstable();

        let parent_sse: f64 = rows.iter().map(|&r| (self.y[r] - mean).powi(2)).sum();
        let mut candidates: Vec<Candidate> = Vec::new();
        for &f in &features {
            rows.sort_by(|&a, &b| self.x[a][f].total_cmp(&self.x[b][f]).then(a.cmp(&b)));
            let (mut left_sum, mut left_n) = (0.0, 0usize);
            for k in 0..n - 1 {
                left_sum += self.y[rows[k]];
                left_n += 1;
                let (lo, hi) = (self.x[rows[k]][f], self.x[rows[k + 1]][f]);
                if lo == hi {
                    continue;
                }
                let right_sum = sum - left_sum;
                let right_n = n - left_n;
                let reduction = left_sum * left_sum / left_n as f64
                    + right_sum * right_sum / right_n as f64
                    - sum * sum / n as f64;
                candidates.push(Candidate {
                    feature: f,
                    threshold: midpoint(lo, hi),
                    reduction,
                    split_at: left_n,
                });
            }
        }

        let Some(best) = select_split(
            candidates.iter().map(|c| (c.feature, c.threshold, c.reduction)),
            parent_sse,
        ) else {
            return leaf;
        };
        let chosen = &candidates[best];
        let (feature, threshold) = (chosen.feature, chosen.threshold);
        rows.sort_by(|&a, &b| self.x[a][feature].total_cmp(&self.x[b][feature]).then(a.cmp(&b)));
        let (left_rows, right_rows) = rows.split_at_mut(chosen.split_at);
        let left = self.grow(left_rows, rng);
        let right = self.grow(right_rows, rng);
        TreeNode::Internal {
            feature,
            threshold,
            left: Box::new(left),
            right: Box::new(right),
        }
    }
}

/// Index of the winning split among `(feature, threshold, reduction)`
/// candidates: the largest reduction, ties broken by lowest feature then
/// lowest threshold. `None` when no candidate improves the node.
pub fn select_split(
    candidates: impl Iterator<Item = (usize, f64, f64)>,
    parent_sse: f64,
) -> Option<usize> {
    let cands: Vec<(usize, f64, f64)> = candidates.collect();
    let best = cands.iter().map(|c| c.2).fold(f64::NEG_INFINITY, f64::max);
    if cands.is_empty() || best <= MIN_IMPROVEMENT * parent_sse {
        return None;
    }
    let cutoff = best - TIE_TOLERANCE * parent_sse;
    cands
        .iter()
        .enumerate()
        .filter(|(_, c)| c.2 >= cutoff)
        .min_by(|(_, a), (_, b)| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)))
        .map(|(i, _)| i)
}

/// Fits one tree on the given row multiset (indices into `x`/`y`).
pub fn tree_fit_rows(
    x: &[Vec<f64>],
    y: &[f64],
    rows: &mut [usize],
    mtry: usize,
    min_leaf: usize,
    rng: &mut ChaCha8Rng,
) -> TreeNode {
    assert!(!rows.is_empty(), "tree_fit needs at least one row");
    let p = x[0].len();
    assert!(mtry >= 1 && mtry <= p, "mtry must lie in 1..=p");
    Grower {
        x,
        y,
        mtry,
        min_leaf: min_leaf.max(1),
    }
    .grow(rows, rng)
}

/// Fits one tree on every row of `x`.
pub fn tree_fit(
    x: &[Vec<f64>],
    y: &[f64],
    mtry: usize,
    min_leaf: usize,
    rng: &mut ChaCha8Rng,
) -> TreeNode {
    let mut rows: Vec<usize> = (0..x.len()).collect();
    tree_fit_rows(x, y, &mut rows, mtry, min_leaf, rng)
}

/// Generator for tree `tree` of a forest seeded with `seed`.
pub fn tree_rng(seed: u64, tree: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(tree as u64);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub config: ForestConfig,
    pub mtry: usize,
    pub n_features: usize,
    pub trees: Vec<TreeNode>,
}

pub fn forest_fit(x: &[Vec<f64>], y: &[f64], cfg: &ForestConfig) -> Result<Forest, ForestError> {
    if x.is_empty() {
        return Err(ForestError::Empty);
    }
    let p = x[0].len();
    let cfg = cfg.validate(p)?;
    let mtry = cfg.resolve_mtry(p)?;
    let n = x.len();
    let trees = (0..cfg.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = tree_rng(cfg.seed, t);
            let mut rows: Vec<usize> = if cfg.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            tree_fit_rows(x, y, &mut rows, mtry, cfg.min_leaf, &mut rng)
        })
        .collect();
    Ok(Forest {
        config: cfg,
        mtry,
        n_features: p,
        trees,
    })
}

impl Forest {
    pub fn predict_one(&self, x: &[f64]) -> Result<f64, ForestError> {
        if x.len() != self.n_features {
            return Err(ForestError::SpecMismatch {
                expected: self.n_features,
                got: x.len(),
            });
        }
        // Running mean, exact when every tree agrees.
        let mean = self
            .trees
            .iter()
            .enumerate()
            .fold(0.0, |m, (k, t)| m + (t.predict(x) - m) / (k + 1) as f64);
        Ok(mean)
    }
}

pub fn forest_predict(forest: &Forest, x_new: &[Vec<f64>]) -> Result<Vec<f64>, ForestError> {
    x_new.iter().map(|row| forest.predict_one(row)).collect()
}
