//! Canonical forest JSON document.
//!
//! ```json
//! {"version": 1, "feature_names": [..], "class_names": [..],
//!  "trees": [{"nodes": [{"id": 0, "kind": "internal", "feature": 3,
//!                        "threshold": 0.75, "left": 1, "right": 2}, ..,
//!                       {"id": 1, "kind": "leaf", "counts": [35, 0, 0]}],
//!             "root": 0}],
//!  "train_params": {..}}
//! ```
//!
//! Nodes may also carry `samples` and `impurity`; they are written for
//! trained forests so MDI survives a round trip, and are optional on input.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{DecisionTree, Forest, Node, NodeStats, TrainParams};
use crate::error::{Error, Result};

pub const FOREST_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ForestDoc {
    version: u32,
    feature_names: Vec<String>,
    class_names: Vec<String>,
    trees: Vec<TreeDoc>,
    #[serde(default)]
    train_params: Option<TrainParams>,
}

#[derive(Serialize, Deserialize)]
struct TreeDoc {
    nodes: Vec<NodeDoc>,
    root: usize,
}

#[derive(Serialize, Deserialize)]
struct NodeDoc {
    id: usize,
    #[serde(flatten)]
    kind: NodeKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    samples: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    impurity: Option<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum NodeKind {
    Internal {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        counts: Vec<u64>,
    },
}

/// Serialises a forest to its canonical document. Floats use the shortest
/// representation that round-trips.
pub fn export_forest(forest: &Forest) -> String {
    let trees = forest
        .trees()
        .iter()
        .map(|tree| {
            let stats = tree.stats();
            let nodes = tree
                .nodes()
                .iter()
                .enumerate()
                .map(|(pos, node)| NodeDoc {
                    id: tree.node_id(pos),
                    kind: match node {
                        Node::Internal {
                            feature,
                            threshold,
                            left,
                            right,
                        } => NodeKind::Internal {
                            feature: *feature,
                            threshold: *threshold,
                            left: tree.node_id(*left),
                            right: tree.node_id(*right),
                        },
                        Node::Leaf { counts } => NodeKind::Leaf {
                            counts: counts.clone(),
                        },
                    },
                    samples: stats.map(|s| s[pos].samples),
                    impurity: stats.map(|s| s[pos].impurity),
                })
                .collect();
            TreeDoc {
                nodes,
                root: tree.node_id(tree.root()),
            }
        })
        .collect();
    let doc = ForestDoc {
        version: FOREST_FORMAT_VERSION,
        feature_names: forest.feature_names().to_vec(),
        class_names: forest.class_names().to_vec(),
        trees,
        train_params: forest.train_params().cloned(),
    };
    serde_json::to_string_pretty(&doc).expect("forest documents always serialise")
}

/// Parses and validates a canonical forest document. Errors name the JSON
/// path of the offending value.
pub fn import_forest(json: &str) -> Result<Forest> {
    let de = &mut serde_json::Deserializer::from_str(json);
    let doc: ForestDoc = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::validation(path, e.into_inner().to_string())
    })?;
    if doc.version != FOREST_FORMAT_VERSION {
        return Err(Error::validation(
            "version",
            format!("unsupported version {}", doc.version),
        ));
    }
    let trees = doc
        .trees
        .into_iter()
        .enumerate()
        .map(|(k, t)| tree_from_doc(t).map_err(|e| prefix_path(e, &format!("trees[{k}]"))))
        .collect::<Result<Vec<_>>>()?;
    Forest::new(doc.feature_names, doc.class_names, trees, doc.train_params)
}

fn tree_from_doc(doc: TreeDoc) -> Result<DecisionTree> {
    let mut index = HashMap::with_capacity(doc.nodes.len());
    for (pos, n) in doc.nodes.iter().enumerate() {
        if index.insert(n.id, pos).is_some() {
            return Err(Error::validation(
                format!("nodes[{pos}].id"),
                format!("duplicate id {}", n.id),
            ));
        }
    }
    let resolve = |pos: usize, side: &str, id: usize| {
        index.get(&id).copied().ok_or_else(|| {
            Error::validation(
                format!("nodes[{pos}].{side}"),
                format!("references missing node id {id}"),
            )
        })
    };
    let root = *index
        .get(&doc.root)
        .ok_or_else(|| Error::validation("root", format!("missing node id {}", doc.root)))?;

    let mut nodes = Vec::with_capacity(doc.nodes.len());
    let mut ids = Vec::with_capacity(doc.nodes.len());
    let mut stats = Vec::with_capacity(doc.nodes.len());
    for (pos, n) in doc.nodes.iter().enumerate() {
        ids.push(n.id);
        nodes.push(match &n.kind {
            NodeKind::Internal {
                feature,
                threshold,
                left,
                right,
            } => Node::Internal {
                feature: *feature,
                threshold: *threshold,
                left: resolve(pos, "left", *left)?,
                right: resolve(pos, "right", *right)?,
            },
            NodeKind::Leaf { counts } => Node::Leaf {
                counts: counts.clone(),
            },
        });
        if let (Some(samples), Some(impurity)) = (n.samples, n.impurity) {
            stats.push(NodeStats { samples, impurity });
        }
    }
    let tree = DecisionTree::new(nodes, ids, root)?;
    Ok(if stats.len() == tree.nodes().len() {
        tree.with_stats(stats)
    } else {
        tree
    })
}

fn prefix_path(err: Error, prefix: &str) -> Error {
    match err {
        Error::Validation { path, message } => Error::Validation {
            path: format!("{prefix}.{path}"),
            message,
        },
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const STUMP: &str = r#"{
      "version": 1,
      "feature_names": ["a"],
      "class_names": ["x", "y"],
      "trees": [{"root": 10, "nodes": [
        {"id": 10, "kind": "internal", "feature": 0, "threshold": 0.1, "left": 11, "right": 12},
        {"id": 11, "kind": "leaf", "counts": [3, 0]},
        {"id": 12, "kind": "leaf", "counts": [1, 2]}
      ]}]
    }"#;

    #[test]
    fn imports_non_contiguous_ids() {
        let f = import_forest(STUMP).unwrap();
        let t = &f.trees()[0];
        assert_eq!(t.node_id(t.root()), 10);
        assert_eq!(t.leaf_for(&[0.1]), 1);
        assert!(f.train_params().is_none());
        assert!(f.importances().is_empty());
    }

    #[test]
    fn round_trip_is_identical() {
        let f = import_forest(STUMP).unwrap();
        let again = import_forest(&export_forest(&f)).unwrap();
        assert_eq!(f, again);
        assert_eq!(export_forest(&f), export_forest(&again));
    }

    #[test]
    fn missing_child_names_path() {
        let bad = STUMP.replace("\"right\": 12", "\"right\": 99");
        match import_forest(&bad) {
            Err(Error::Validation { path, .. }) => assert_eq!(path, "trees[0].nodes[0].right"),
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn type_error_names_path() {
        let bad = STUMP.replace("\"threshold\": 0.1", "\"threshold\": \"high\"");
        match import_forest(&bad) {
            Err(Error::Validation { path, .. }) => assert!(path.starts_with("trees[0].nodes[0]"), "{path}"),
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn missing_root_and_bad_version() {
        let bad = STUMP.replace("\"root\": 10", "\"root\": 5");
        assert!(matches!(import_forest(&bad), Err(Error::Validation { path, .. }) if path == "trees[0].root"));
        let bad = STUMP.replace("\"version\": 1", "\"version\": 2");
        assert!(matches!(import_forest(&bad), Err(Error::Validation { path, .. }) if path == "version"));
    }

    #[test]
    fn thresholds_keep_full_precision() {
        let x = 0.1f64 + 0.2f64;
        let doc = STUMP.replace("\"threshold\": 0.1", &format!("\"threshold\": {x:?}"));
        let f = import_forest(&doc).unwrap();
        let back = import_forest(&export_forest(&f)).unwrap();
        match back.trees()[0].nodes()[0] {
            Node::Internal { threshold, .. } => assert_eq!(threshold.to_bits(), x.to_bits()),
            _ => unreachable!(),
        }
    }
}
