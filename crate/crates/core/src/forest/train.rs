//! CART training with Gini impurity, bootstrap sampling and per-split
//! feature subsampling.
//!
//! Tree `k` draws from its own ChaCha stream `(seed, k)`, so the result does
//! not depend on how trees are scheduled across threads.

use rand::seq::index;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{DecisionTree, Forest, Node, NodeStats, TrainParams};
use crate::dataset::Dataset;
use crate::error::{Error, Result};

pub fn train_forest(dataset: &Dataset, params: &TrainParams) -> Result<Forest> {
    let n_features = dataset.n_features();
    let train: Vec<usize> = dataset.train_indices().collect();
    if train.is_empty() {
        return Err(Error::Training("train split is empty".into()));
    }
    if params.trees == 0 {
        return Err(Error::Training("need at least one tree".into()));
    }
    if params.max_depth == Some(0) {
        return Err(Error::Training("max_depth must be at least 1".into()));
    }
    let features_per_split = params
        .features_per_split
        .unwrap_or_else(|| (n_features as f64).sqrt().ceil() as usize);
    if features_per_split == 0 || features_per_split > n_features {
        return Err(Error::Training(format!(
            "features_per_split {features_per_split} outside [1, {n_features}]"
        )));
    }

    let grower = Grower {
        x: dataset.instances(),
        y: dataset.labels(),
        n_classes: dataset.n_classes(),
        n_features,
        features_per_split,
        max_depth: params.max_depth,
    };
    let trees: Vec<DecisionTree> = (0..params.trees)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
            rng.set_stream(k as u64);
            let sample: Vec<usize> = if params.bootstrap {
                (0..train.len())
                    .map(|_| train[rng.gen_range(0..train.len())])
                    .collect()
            } else {
                train.clone()
            };
            grower.grow(sample, &mut rng)
        })
        .collect();

    let mut resolved = params.clone();
    resolved.features_per_split = Some(features_per_split);
    Forest::new(
        dataset.feature_names().to_vec(),
        dataset.class_names().to_vec(),
        trees,
        Some(resolved),
    )
}

struct Grower<'a> {
    x: &'a [Vec<f64>],
    y: &'a [usize],
    n_classes: usize,
    n_features: usize,
    features_per_split: usize,
    max_depth: Option<usize>,
}

struct Split {
    feature: usize,
    threshold: f64,
    /// Sample-weighted Gini of the two children, `n_l*g_l + n_r*g_r`.
    weighted_child_gini: f64,
}

impl Grower<'_> {
    fn grow(&self, sample: Vec<usize>, rng: &mut ChaCha8Rng) -> DecisionTree {
        let mut nodes = Vec::new();
        let mut stats = Vec::new();
        self.build(sample, 0, rng, &mut nodes, &mut stats);
        let ids = (0..nodes.len()).collect();
        DecisionTree::new(nodes, ids, 0)
            .expect("grown trees are well formed")
            .with_stats(stats)
    }

    /// Appends the subtree for `sample` in preorder and returns its position.
    fn build(
        &self,
        sample: Vec<usize>,
        depth: usize,
        rng: &mut ChaCha8Rng,
        nodes: &mut Vec<Node>,
        stats: &mut Vec<NodeStats>,
    ) -> usize {
        let counts = self.class_counts(&sample);
        let impurity = gini(&counts, sample.len() as u64);
        let pos = nodes.len();
        stats.push(NodeStats {
            samples: sample.len() as u64,
            impurity,
        });
        nodes.push(Node::Leaf {
            counts: counts.clone(),
        });

        let depth_reached = self.max_depth.is_some_and(|d| depth >= d);
        if impurity == 0.0 || depth_reached || sample.len() < 2 {
            return pos;
        }
        let Some(split) = self.best_split(&sample, rng) else {
            return pos;
        };
        let (left, right): (Vec<usize>, Vec<usize>) = sample
            .into_iter()
            .partition(|&n| self.x[n][split.feature] <= split.threshold);
        debug_assert!(!left.is_empty() && !right.is_empty());
        let l = self.build(left, depth + 1, rng, nodes, stats);
        let r = self.build(right, depth + 1, rng, nodes, stats);
        nodes[pos] = Node::Internal {
            feature: split.feature,
            threshold: split.threshold,
            left: l,
            right: r,
        };
        pos
    }

    fn class_counts(&self, sample: &[usize]) -> Vec<u64> {
        let mut counts = vec![0u64; self.n_classes];
        for &n in sample {
            counts[self.y[n]] += 1;
        }
        counts
    }

    /// Searches a random feature subset first; if every sampled feature is
    /// constant on `sample`, the remaining features are tried in random order.
    fn best_split(&self, sample: &[usize], rng: &mut ChaCha8Rng) -> Option<Split> {
        let order = index::sample(rng, self.n_features, self.n_features).into_vec();
        let mut best: Option<Split> = None;
        for (i, &feature) in order.iter().enumerate() {
            if i >= self.features_per_split && best.is_some() {
                break;
            }
            if let Some(s) = self.best_split_on(sample, feature) {
                if best
                    .as_ref()
                    .is_none_or(|b| s.weighted_child_gini < b.weighted_child_gini)
                {
                    best = Some(s);
                }
            }
        }
        best
    }

    fn best_split_on(&self, sample: &[usize], feature: usize) -> Option<Split> {
        let mut sorted: Vec<(f64, usize)> = sample
            .iter()
            .map(|&n| (self.x[n][feature], self.y[n]))
            .collect();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));

        let total = self.class_counts(sample);
        let n = sorted.len() as u64;
        let mut left = vec![0u64; self.n_classes];
        let mut best: Option<Split> = None;
        for i in 0..sorted.len() - 1 {
            left[sorted[i].1] += 1;
            let (lo, hi) = (sorted[i].0, sorted[i + 1].0);
            if lo == hi {
                continue;
            }
            let n_left = i as u64 + 1;
            let right: Vec<u64> = total.iter().zip(&left).map(|(t, l)| t - l).collect();
            let score = n_left as f64 * gini(&left, n_left)
                + (n - n_left) as f64 * gini(&right, n - n_left);
            if best.as_ref().is_none_or(|b| score < b.weighted_child_gini) {
                best = Some(Split {
                    feature,
                    threshold: midpoint(lo, hi),
                    weighted_child_gini: score,
                });
            }
        }
        best
    }
}

/// Midpoint of two distinct sorted values, never equal to `hi`.
fn midpoint(lo: f64, hi: f64) -> f64 {
    let mid = lo + (hi - lo) / 2.0;
    if mid >= hi {
        lo
    } else {
        mid
    }
}

pub(crate) fn gini(counts: &[u64], total: u64) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let t = total as f64;
    1.0 - counts
        .iter()
        .map(|&c| {
            let p = c as f64 / t;
            p * p
        })
        .sum::<f64>()
}
