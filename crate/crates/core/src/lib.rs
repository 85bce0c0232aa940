//! Random-forest explanations built from disjoint interval rules.
//!
//! A trained (or imported) [`Forest`] is flattened into a [`RuleSet`]: one
//! [`VectorRule`] per leaf, holding an `(alpha, beta]` interval per feature.
//! Because the leaves of one tree partition the input space, every instance
//! is matched by exactly one rule per tree. On top of the rules sit three
//! views ([`global_view`], [`local_used_rules`], [`local_smallest_changes`]),
//! orderings ([`order_rows`], [`order_columns`]) and an SVG [`render`]er.
//!
//! ```no_run
//! use pathmatrix::*;
//! let data = load_dataset("iris.csv", &CsvSchema::new("species")).unwrap();
//! let forest = train_forest(&data, &TrainParams { trees: 10, ..Default::default() }).unwrap();
//! let rules = extract_rules(&forest, &data).unwrap();
//! let view = local_used_rules(&rules, &forest, data.instance(0).unwrap()).unwrap();
//! let svg = render(&view, &rules, &data, &RenderStyle::default()).unwrap();
//! # let _ = svg;
//! ```

mod dataset;
mod error;
mod explain;
mod forest;
mod layout;
mod model;
mod render;
mod rules;
pub mod synthetic;
mod vote;

pub use dataset::{load_dataset, split_mask, CsvSchema, Dataset};
pub use error::{Error, Result};
pub use explain::{
    apply_changes, apply_edits, feature_delta, global_view, local_smallest_changes, local_used_rules,
    smallest_changes, ChangeVector, ExplanationView, FeatureEdit, RowExtras, RuleFilter, TreeChange, ViewKind,
    WhatIf, CROSSING_EPSILON,
};
pub use forest::{
    export_forest, import_forest, mdi_from_stats, mdi_importance, node_stats_from_dataset, predict, train_forest,
    DecisionTree, Forest, Node, NodeStats, Prediction, TrainParams, FOREST_FORMAT_VERSION,
};
pub use layout::{order_columns, order_rows, reorder_rows, Direction, OrderCriterion, OrderKey, OrderTarget};
pub use model::{parse_ids, parse_instance, ChangesResult, Model, ModelSummary, ViewQuery, ViewRequest};
pub use render::{fmt6, render, render_with_hits, HitRegion, RenderStyle, Rendered, CATEGORY10, OKABE_ITO};
pub use rules::{extract_rules, rule_matches, used_rule, Interval, RuleSet, VectorRule};
pub use vote::argmax;
