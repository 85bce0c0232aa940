//! Mean Decrease Impurity feature importance.

use super::train::gini;
use super::{DecisionTree, Forest, Node, NodeStats};
use crate::dataset::Dataset;
use crate::error::{Error, Result};

/// MDI importances for `forest`.
///
/// Uses the node statistics recorded at training time; trees without them
/// (imported models) are re-measured by pushing the dataset's train split
/// through them.
pub fn mdi_importance(forest: &Forest, dataset: &Dataset) -> Result<Vec<f64>> {
    forest.check_compatible(dataset)?;
    if forest.has_node_stats() {
        return Ok(mdi_from_stats(forest.trees(), forest.n_features()));
    }
    if dataset.n_train() == 0 {
        return Err(Error::Input(
            "cannot recompute node statistics from an empty train split".into(),
        ));
    }
    let trees: Vec<DecisionTree> = forest
        .trees()
        .iter()
        .map(|t| match t.stats() {
            Some(_) => t.clone(),
            None => t.clone().with_stats(node_stats_from_dataset(t, dataset)),
        })
        .collect();
    Ok(mdi_from_stats(&trees, forest.n_features()))
}

/// Per tree, sums `(n_t*g_t - n_l*g_l - n_r*g_r) / n_root` over the internal
/// nodes splitting on each feature; averages over trees and normalises to 1.
/// All zeros when no split decreases impurity.
///
/// Panics if a tree lacks node statistics.
pub fn mdi_from_stats(trees: &[DecisionTree], n_features: usize) -> Vec<f64> {
    let mut acc = vec![0.0; n_features];
    for tree in trees {
        let stats = tree.stats().expect("node statistics required");
        let root_samples = stats[tree.root()].samples;
        if root_samples == 0 {
            continue;
        }
        let mut per_tree = vec![0.0; n_features];
        for (pos, node) in tree.nodes().iter().enumerate() {
            if let Node::Internal {
                feature, left, right, ..
            } = *node
            {
                let weighted = |s: NodeStats| s.samples as f64 * s.impurity;
                let decrease =
                    weighted(stats[pos]) - weighted(stats[left]) - weighted(stats[right]);
                per_tree[feature] += decrease.max(0.0) / root_samples as f64;
            }
        }
        for (a, v) in acc.iter_mut().zip(per_tree) {
            *a += v;
        }
    }
    let k = trees.len() as f64;
    for a in &mut acc {
        *a /= k;
    }
    let total: f64 = acc.iter().sum();
    if total > 0.0 {
        for a in &mut acc {
            *a /= total;
        }
    }
    acc
}

/// Sample counts and Gini impurity per node from the train split.
pub fn node_stats_from_dataset(tree: &DecisionTree, dataset: &Dataset) -> Vec<NodeStats> {
    let n_classes = dataset.n_classes();
    let mut counts = vec![vec![0u64; n_classes]; tree.nodes().len()];
    for n in dataset.train_indices() {
        let x = &dataset.instances()[n];
        let y = dataset.labels()[n];
        let mut pos = tree.root();
        loop {
            counts[pos][y] += 1;
            match tree.nodes()[pos] {
                Node::Internal {
                    feature,
                    threshold,
                    left,
                    right,
                } => pos = if x[feature] <= threshold { left } else { right },
                Node::Leaf { .. } => break,
            }
        }
    }
    counts
        .iter()
        .map(|c| {
            let samples = c.iter().sum();
            NodeStats {
                samples,
                impurity: gini(c, samples),
            }
        })
        .collect()
}
