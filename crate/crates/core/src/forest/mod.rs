//! Random-forest models: binary threshold trees with class-count leaves.
//!
//! A tree routes an instance left when `x[feature] <= threshold` and right
//! otherwise. Leaves hold raw class counts; a forest classifies by averaging
//! the normalised leaf distributions of its trees (soft voting).

mod importance;
mod json;
mod train;

use serde::{Deserialize, Serialize};

pub use importance::{mdi_from_stats, mdi_importance, node_stats_from_dataset};
pub use json::{export_forest, import_forest, FOREST_FORMAT_VERSION};
pub use train::train_forest;

use crate::dataset::{CsvSchema, Dataset};
use crate::error::{Error, Result};
use crate::vote;

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    /// `left` and `right` are positions in the owning tree's node list.
    Internal {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf { counts: Vec<u64> },
}

/// Training-sample bookkeeping for one node, used by MDI.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeStats {
    pub samples: u64,
    /// Gini impurity of the samples reaching the node.
    pub impurity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree {
    nodes: Vec<Node>,
    ids: Vec<usize>,
    root: usize,
    stats: Option<Vec<NodeStats>>,
}

impl DecisionTree {
    /// Builds a tree from nodes addressed by position. `ids` are the external
    /// node ids (unique); `root` is a position.
    pub fn new(nodes: Vec<Node>, ids: Vec<usize>, root: usize) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::validation("nodes", "tree has no nodes"));
        }
        if ids.len() != nodes.len() {
            return Err(Error::validation("nodes", "one id per node required"));
        }
        let mut seen = std::collections::HashSet::new();
        for (pos, id) in ids.iter().enumerate() {
            if !seen.insert(id) {
                return Err(Error::validation(format!("nodes[{pos}].id"), format!("duplicate id {id}")));
            }
        }
        if root >= nodes.len() {
            return Err(Error::validation("root", "root is not a node"));
        }
        let mut parents = vec![0usize; nodes.len()];
        for (pos, node) in nodes.iter().enumerate() {
            match node {
                Node::Internal { left, right, threshold, .. } => {
                    if !threshold.is_finite() {
                        return Err(Error::validation(
                            format!("nodes[{pos}].threshold"),
                            "threshold must be finite",
                        ));
                    }
                    for (side, &child) in [("left", left), ("right", right)] {
                        if child >= nodes.len() {
                            return Err(Error::validation(
                                format!("nodes[{pos}].{side}"),
                                "dangling child reference",
                            ));
                        }
                        parents[child] += 1;
                    }
                }
                Node::Leaf { counts } => {
                    if !counts.iter().any(|&c| c > 0) {
                        return Err(Error::validation(
                            format!("nodes[{pos}].counts"),
                            "leaf needs at least one positive count",
                        ));
                    }
                }
            }
        }
        if parents[root] != 0 {
            return Err(Error::validation("root", "root has a parent"));
        }
        if let Some(pos) = (0..nodes.len()).find(|&p| p != root && parents[p] != 1) {
            return Err(Error::validation(
                format!("nodes[{pos}]"),
                format!("node has {} parents, expected 1", parents[pos]),
            ));
        }
        let tree = Self {
            nodes,
            ids,
            root,
            stats: None,
        };
        // One parent per non-root node; a cycle would leave nodes unreachable.
        if tree.preorder().len() != tree.nodes.len() {
            return Err(Error::validation("nodes", "nodes unreachable from root"));
        }
        Ok(tree)
    }

    pub(crate) fn with_stats(mut self, stats: Vec<NodeStats>) -> Self {
        debug_assert_eq!(stats.len(), self.nodes.len());
        self.stats = Some(stats);
        self
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node_id(&self, pos: usize) -> usize {
        self.ids[pos]
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn stats(&self) -> Option<&[NodeStats]> {
        self.stats.as_deref()
    }

    /// Node positions in depth-first, left-first order.
    pub fn preorder(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut stack = vec![self.root];
        while let Some(pos) = stack.pop() {
            out.push(pos);
            if let Node::Internal { left, right, .. } = self.nodes[pos] {
                stack.push(right);
                stack.push(left);
            }
        }
        out
    }

    /// Leaf positions in extraction (depth-first, left-first) order.
    pub fn leaves(&self) -> Vec<usize> {
        self.preorder()
            .into_iter()
            .filter(|&p| matches!(self.nodes[p], Node::Leaf { .. }))
            .collect()
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    /// Length of the longest root-to-leaf path, in edges.
    pub fn depth(&self) -> usize {
        let mut best = 0;
        let mut stack = vec![(self.root, 0usize)];
        while let Some((pos, d)) = stack.pop() {
            best = best.max(d);
            if let Node::Internal { left, right, .. } = self.nodes[pos] {
                stack.push((left, d + 1));
                stack.push((right, d + 1));
            }
        }
        best
    }

    /// Position of the leaf reached by `instance`.
    pub fn leaf_for(&self, instance: &[f64]) -> usize {
        let mut pos = self.root;
        loop {
            match &self.nodes[pos] {
                Node::Internal {
                    feature,
                    threshold,
                    left,
                    right,
                } => pos = if instance[*feature] <= *threshold { *left } else { *right },
                Node::Leaf { .. } => return pos,
            }
        }
    }

    /// Normalised class distribution of a leaf. Panics on internal nodes.
    pub fn leaf_distribution(&self, pos: usize) -> Vec<f64> {
        match &self.nodes[pos] {
            Node::Leaf { counts } => vote::normalize_counts(counts),
            Node::Internal { .. } => panic!("node {pos} is not a leaf"),
        }
    }

    fn max_feature(&self) -> Option<usize> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Internal { feature, .. } => Some(*feature),
                Node::Leaf { .. } => None,
            })
            .max()
    }
}

fn default_bootstrap() -> bool {
    true
}

fn default_trees() -> usize {
    100
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainParams {
    #[serde(default = "default_trees")]
    pub trees: usize,
    /// `None` grows until leaves are pure.
    #[serde(default)]
    pub max_depth: Option<usize>,
    /// `None` means `ceil(sqrt(M))`; trained forests record the resolved value.
    #[serde(default)]
    pub features_per_split: Option<usize>,
    #[serde(default = "default_bootstrap")]
    pub bootstrap: bool,
    #[serde(default)]
    pub seed: u64,
    /// How the training CSV was read and split.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<CsvSchema>,
}

impl Default for TrainParams {
    fn default() -> Self {
        Self {
            trees: default_trees(),
            max_depth: None,
            features_per_split: None,
            bootstrap: true,
            seed: 0,
            split: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub probabilities: Vec<f64>,
    pub class: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Forest {
    feature_names: Vec<String>,
    class_names: Vec<String>,
    trees: Vec<DecisionTree>,
    importances: Vec<f64>,
    train_params: Option<TrainParams>,
}

impl Forest {
    /// Assembles a forest, computing MDI importances when every tree carries
    /// node statistics.
    pub fn new(
        feature_names: Vec<String>,
        class_names: Vec<String>,
        trees: Vec<DecisionTree>,
        train_params: Option<TrainParams>,
    ) -> Result<Self> {
        if trees.is_empty() {
            return Err(Error::validation("trees", "forest needs at least one tree"));
        }
        if feature_names.is_empty() {
            return Err(Error::validation("feature_names", "no features"));
        }
        if class_names.len() < 2 {
            return Err(Error::validation("class_names", "need at least 2 classes"));
        }
        for (k, tree) in trees.iter().enumerate() {
            if let Some(f) = tree.max_feature().filter(|&f| f >= feature_names.len()) {
                return Err(Error::validation(
                    format!("trees[{k}]"),
                    format!("split on feature {f}, only {} features", feature_names.len()),
                ));
            }
            for (pos, node) in tree.nodes.iter().enumerate() {
                if let Node::Leaf { counts } = node {
                    if counts.len() != class_names.len() {
                        return Err(Error::validation(
                            format!("trees[{k}].nodes[{pos}].counts"),
                            format!("{} counts for {} classes", counts.len(), class_names.len()),
                        ));
                    }
                }
            }
        }
        let mut forest = Self {
            feature_names,
            class_names,
            trees,
            importances: Vec::new(),
            train_params,
        };
        if forest.trees.iter().all(|t| t.stats.is_some()) {
            forest.importances = mdi_from_stats(&forest.trees, forest.n_features());
        }
        Ok(forest)
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn trees(&self) -> &[DecisionTree] {
        &self.trees
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn n_leaves(&self) -> usize {
        self.trees.iter().map(DecisionTree::n_leaves).sum()
    }

    pub fn train_params(&self) -> Option<&TrainParams> {
        self.train_params.as_ref()
    }

    /// MDI importances, empty until node statistics are known
    /// (see [`Forest::ensure_importances`]).
    pub fn importances(&self) -> &[f64] {
        &self.importances
    }

    pub fn has_node_stats(&self) -> bool {
        self.trees.iter().all(|t| t.stats.is_some())
    }

    /// Fills missing node statistics by pushing the train split through every
    /// tree, then computes MDI importances.
    pub fn ensure_importances(&mut self, dataset: &Dataset) -> Result<()> {
        self.check_compatible(dataset)?;
        if !self.has_node_stats() {
            if dataset.n_train() == 0 {
                return Err(Error::Input(
                    "cannot recompute node statistics from an empty train split".into(),
                ));
            }
            for tree in &mut self.trees {
                if tree.stats.is_none() {
                    let stats = node_stats_from_dataset(tree, dataset);
                    tree.stats = Some(stats);
                }
            }
        }
        self.importances = mdi_from_stats(&self.trees, self.n_features());
        Ok(())
    }

    /// Fails unless the dataset has the forest's feature and class counts.
    pub fn check_compatible(&self, dataset: &Dataset) -> Result<()> {
        if dataset.n_features() != self.n_features() || dataset.n_classes() != self.n_classes() {
            return Err(Error::Mismatch(format!(
                "forest has {} features / {} classes, dataset has {} / {}",
                self.n_features(),
                self.n_classes(),
                dataset.n_features(),
                dataset.n_classes()
            )));
        }
        Ok(())
    }

    fn check_instance(&self, instance: &[f64]) -> Result<()> {
        if instance.len() != self.n_features() {
            return Err(Error::Input(format!(
                "instance has {} values, expected {}",
                instance.len(),
                self.n_features()
            )));
        }
        if let Some((m, v)) = instance.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::Input(format!("feature {m} is not finite ({v})")));
        }
        Ok(())
    }

    /// Soft vote: mean of the leaf distributions reached in every tree.
    pub fn predict(&self, instance: &[f64]) -> Result<Prediction> {
        self.check_instance(instance)?;
        let dists: Vec<Vec<f64>> = self
            .trees
            .iter()
            .map(|t| t.leaf_distribution(t.leaf_for(instance)))
            .collect();
        let probabilities = vote::mean(dists.iter().map(Vec::as_slice), self.n_classes());
        let class = vote::argmax(&probabilities);
        Ok(Prediction {
            probabilities,
            class,
        })
    }

    /// Fraction of the dataset's test split classified correctly; `None` when
    /// there is no test split.
    pub fn test_accuracy(&self, dataset: &Dataset) -> Result<Option<f64>> {
        self.check_compatible(dataset)?;
        let mut total = 0usize;
        let mut correct = 0usize;
        for n in dataset.test_indices() {
            total += 1;
            let x = &dataset.instances()[n];
            if self.predict(x)?.class == dataset.labels()[n] {
                correct += 1;
            }
        }
        Ok((total > 0).then(|| correct as f64 / total as f64))
    }
}

/// Free-function form of [`Forest::predict`].
pub fn predict(forest: &Forest, instance: &[f64]) -> Result<Prediction> {
    forest.predict(instance)
}
