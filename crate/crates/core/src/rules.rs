//! Decision paths as vector rules.
//!
//! Every root-to-leaf path becomes one rule: per feature an interval
//! `(alpha, beta]` built from the path's tests, or no predicate when the
//! feature is never tested. `alpha` is the largest threshold of a `>` test on
//! the feature, `beta` the smallest threshold of a `<=` test; a side with no
//! test falls back to the dataset-wide minimum or maximum and does not
//! constrain membership. With these semantics a rule matches exactly the
//! instances its path routes to its leaf, so the rules of one tree are
//! disjoint and cover every finite input.

use std::ops::Range;

use serde::Serialize;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::forest::{Forest, Node};
use crate::vote;

/// A feature predicate. Only `alpha`/`beta` are serialised.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub alpha: f64,
    pub beta: f64,
    /// `alpha` comes from a `> threshold` test on the path.
    #[serde(skip)]
    pub lower_bounded: bool,
    /// `beta` comes from a `<= threshold` test on the path.
    #[serde(skip)]
    pub upper_bounded: bool,
}

impl Interval {
    pub fn contains(&self, x: f64) -> bool {
        (!self.lower_bounded || x > self.alpha) && (!self.upper_bounded || x <= self.beta)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VectorRule {
    /// Global 1-based index in extraction order.
    pub rule_id: usize,
    pub tree_id: usize,
    /// External id of the leaf node the path ends in.
    pub leaf_id: usize,
    pub predicates: Vec<Option<Interval>>,
    pub certainty: Vec<f64>,
    pub class_index: usize,
    /// Fraction of train instances of `class_index` that satisfy the rule.
    pub coverage: f64,
}

impl VectorRule {
    pub fn matches(&self, instance: &[f64]) -> bool {
        self.predicates
            .iter()
            .zip(instance)
            .all(|(p, &x)| p.is_none_or(|iv| iv.contains(x)))
    }

    /// Certainty of the rule's own class.
    pub fn max_certainty(&self) -> f64 {
        self.certainty[self.class_index]
    }

    /// Features carrying a predicate.
    pub fn used_features(&self) -> impl Iterator<Item = usize> + '_ {
        self.predicates
            .iter()
            .enumerate()
            .filter(|(_, p)| p.is_some())
            .map(|(m, _)| m)
    }
}

/// Free-function form of [`VectorRule::matches`].
pub fn rule_matches(rule: &VectorRule, instance: &[f64]) -> bool {
    rule.matches(instance)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RuleSet {
    rules: Vec<VectorRule>,
    /// Positions in `rules` belonging to each tree.
    tree_ranges: Vec<Range<usize>>,
    n_features: usize,
    n_classes: usize,
}

impl RuleSet {
    pub fn rules(&self) -> &[VectorRule] {
        &self.rules
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn n_trees(&self) -> usize {
        self.tree_ranges.len()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    /// Rule by its 1-based id.
    pub fn rule(&self, rule_id: usize) -> Option<&VectorRule> {
        rule_id.checked_sub(1).and_then(|i| self.rules.get(i))
    }

    pub fn tree_rules(&self, tree_id: usize) -> &[VectorRule] {
        self.tree_ranges
            .get(tree_id)
            .map_or(&[], |r| &self.rules[r.clone()])
    }

    /// The unique rule of `tree_id` matching `instance`.
    pub fn used_rule(&self, tree_id: usize, instance: &[f64]) -> Result<&VectorRule> {
        if instance.len() != self.n_features {
            return Err(Error::Input(format!(
                "instance has {} values, expected {}",
                instance.len(),
                self.n_features
            )));
        }
        if let Some((m, v)) = instance.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::Input(format!("feature {m} is not finite ({v})")));
        }
        if tree_id >= self.n_trees() {
            return Err(Error::Input(format!(
                "tree {tree_id} out of range, forest has {}",
                self.n_trees()
            )));
        }
        let mut hits = self.tree_rules(tree_id).iter().filter(|r| r.matches(instance));
        match (hits.next(), hits.next()) {
            (Some(rule), None) => Ok(rule),
            (None, _) => Err(Error::Defect(format!(
                "no rule of tree {tree_id} matches the instance"
            ))),
            (Some(a), Some(b)) => Err(Error::Defect(format!(
                "rules {} and {} of tree {tree_id} both match the instance",
                a.rule_id, b.rule_id
            ))),
        }
    }

    /// The used rule of every tree, in tree order.
    pub fn used_rules(&self, instance: &[f64]) -> Result<Vec<&VectorRule>> {
        (0..self.n_trees())
            .map(|k| self.used_rule(k, instance))
            .collect()
    }

    /// One JSON object per line.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for rule in &self.rules {
            out.push_str(&serde_json::to_string(rule).expect("rules always serialise"));
            out.push('\n');
        }
        out
    }
}

/// Free-function form of [`RuleSet::used_rule`].
pub fn used_rule<'a>(ruleset: &'a RuleSet, tree_id: usize, instance: &[f64]) -> Result<&'a VectorRule> {
    ruleset.used_rule(tree_id, instance)
}

pub fn extract_rules(forest: &Forest, dataset: &Dataset) -> Result<RuleSet> {
    forest.check_compatible(dataset)?;
    let m = forest.n_features();
    let mut rules = Vec::with_capacity(forest.n_leaves());
    let mut tree_ranges = Vec::with_capacity(forest.n_trees());

    for (k, tree) in forest.trees().iter().enumerate() {
        let start = rules.len();
        // Depth-first, left child first; each frame carries the interval
        // bounds accumulated along the path so far.
        let mut stack = vec![(tree.root(), vec![Bounds::default(); m])];
        while let Some((pos, bounds)) = stack.pop() {
            match &tree.nodes()[pos] {
                Node::Internal {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    let mut lb = bounds.clone();
                    lb[*feature].upper = Some(lb[*feature].upper.map_or(*threshold, |u| u.min(*threshold)));
                    let mut rb = bounds;
                    rb[*feature].lower = Some(rb[*feature].lower.map_or(*threshold, |l| l.max(*threshold)));
                    stack.push((*right, rb));
                    stack.push((*left, lb));
                }
                Node::Leaf { .. } => {
                    let predicates = bounds
                        .iter()
                        .enumerate()
                        .map(|(f, b)| b.to_interval(dataset.feature_min()[f], dataset.feature_max()[f]))
                        .collect();
                    let certainty = tree.leaf_distribution(pos);
                    let class_index = vote::argmax(&certainty);
                    rules.push(VectorRule {
                        rule_id: rules.len() + 1,
                        tree_id: k,
                        leaf_id: tree.node_id(pos),
                        predicates,
                        certainty,
                        class_index,
                        coverage: 0.0,
                    });
                }
            }
        }
        tree_ranges.push(start..rules.len());
    }

    let mut class_totals = vec![0usize; forest.n_classes()];
    for n in dataset.train_indices() {
        class_totals[dataset.labels()[n]] += 1;
    }
    let train: Vec<usize> = dataset.train_indices().collect();
    for rule in &mut rules {
        let total = class_totals[rule.class_index];
        if total == 0 {
            continue;
        }
        let hits = train
            .iter()
            .filter(|&&n| dataset.labels()[n] == rule.class_index)
            .filter(|&&n| rule.matches(&dataset.instances()[n]))
            .count();
        rule.coverage = hits as f64 / total as f64;
    }

    Ok(RuleSet {
        rules,
        tree_ranges,
        n_features: m,
        n_classes: forest.n_classes(),
    })
}

#[derive(Debug, Clone, Copy, Default)]
struct Bounds {
    lower: Option<f64>,
    upper: Option<f64>,
}

impl Bounds {
    fn to_interval(self, min: f64, max: f64) -> Option<Interval> {
        if self.lower.is_none() && self.upper.is_none() {
            return None;
        }
        Some(Interval {
            alpha: self.lower.unwrap_or(min),
            beta: self.upper.unwrap_or(max),
            lower_bounded: self.lower.is_some(),
            upper_bounded: self.upper.is_some(),
        })
    }
}
