//! A forest bundled with its dataset and rule set, plus the view queries
//! shared by the command line and the HTTP service.

use serde::{Deserialize, Serialize};

use crate::dataset::{CsvSchema, Dataset};
use crate::error::{Error, Result};
use crate::explain::{self, ExplanationView, FeatureEdit, RuleFilter, TreeChange, WhatIf};
use crate::forest::{train_forest, Forest, TrainParams};
use crate::layout::{order_columns, order_rows, OrderCriterion};
use crate::render::{render_with_hits, RenderStyle, Rendered};
use crate::rules::{extract_rules, RuleSet};

#[derive(Debug, Clone)]
pub struct Model {
    forest: Forest,
    dataset: Dataset,
    rules: RuleSet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    /// Number of trees.
    pub trees: usize,
    /// Number of rules (leaves over all trees).
    pub rules: usize,
    pub accuracy_on_test: Option<f64>,
    pub importances: Vec<f64>,
    pub feature_names: Vec<String>,
    pub class_names: Vec<String>,
    pub n_train: usize,
    pub n_test: usize,
}

/// Row filter and orderings for a view. Filters apply to the global view
/// only; local views always show one row per tree.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ViewQuery {
    #[serde(default)]
    pub filter: RuleFilter,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order_rows: Option<OrderCriterion>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order_cols: Option<OrderCriterion>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChangesResult {
    pub view: ExplanationView,
    pub changes: Vec<TreeChange>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViewRequest {
    Global,
    Local,
    Changes,
}

impl Model {
    /// Bundles a forest with the dataset it explains. Feature and class
    /// names must agree; importances are recomputed from the train split
    /// when the forest carries no node statistics.
    pub fn new(mut forest: Forest, dataset: Dataset) -> Result<Self> {
        forest.check_compatible(&dataset)?;
        if forest.class_names() != dataset.class_names() {
            return Err(Error::Mismatch(format!(
                "forest classes {:?} differ from dataset classes {:?}",
                forest.class_names(),
                dataset.class_names()
            )));
        }
        if forest.feature_names() != dataset.feature_names() {
            return Err(Error::Mismatch("forest and dataset feature names differ".into()));
        }
        forest.ensure_importances(&dataset)?;
        let rules = extract_rules(&forest, &dataset)?;
        Ok(Self {
            forest,
            dataset,
            rules,
        })
    }

    /// Reads `csv` with the forest's class order so labels line up.
    pub fn import(forest: Forest, csv: &str, schema: &CsvSchema) -> Result<Self> {
        let schema = schema.clone().with_class_names(forest.class_names().to_vec());
        let dataset = Dataset::from_csv_reader(csv.as_bytes(), &schema)?;
        Self::new(forest, dataset)
    }

    pub fn train(csv: &str, schema: &CsvSchema, params: &TrainParams) -> Result<Self> {
        let dataset = Dataset::from_csv_reader(csv.as_bytes(), schema)?;
        let params = TrainParams {
            split: Some(schema.clone()),
            ..params.clone()
        };
        let forest = train_forest(&dataset, &params)?;
        Self::new(forest, dataset)
    }

    pub fn forest(&self) -> &Forest {
        &self.forest
    }

    pub fn dataset(&self) -> &Dataset {
        &self.dataset
    }

    pub fn rules(&self) -> &RuleSet {
        &self.rules
    }

    pub fn summary(&self) -> Result<ModelSummary> {
        Ok(ModelSummary {
            trees: self.forest.n_trees(),
            rules: self.rules.len(),
            accuracy_on_test: self.forest.test_accuracy(&self.dataset)?,
            importances: self.forest.importances().to_vec(),
            feature_names: self.forest.feature_names().to_vec(),
            class_names: self.forest.class_names().to_vec(),
            n_train: self.dataset.n_train(),
            n_test: self.dataset.n_instances() - self.dataset.n_train(),
        })
    }

    /// Dataset row `n` as an instance.
    pub fn row(&self, n: usize) -> Result<Vec<f64>> {
        self.dataset
            .instance(n)
            .map(<[f64]>::to_vec)
            .ok_or_else(|| Error::Input(format!("row {n} out of range (dataset has {})", self.dataset.n_instances())))
    }

    fn ordered(&self, mut view: ExplanationView, q: &ViewQuery) -> Result<ExplanationView> {
        if let Some(c) = &q.order_rows {
            view = order_rows(view, c, &self.rules)?;
        }
        if let Some(c) = &q.order_cols {
            view = order_columns(view, c)?;
        }
        Ok(view)
    }

    pub fn global(&self, q: &ViewQuery) -> Result<ExplanationView> {
        let view = explain::global_view(&self.rules, &self.forest, &q.filter)?;
        self.ordered(view, q)
    }

    pub fn used_rules(&self, instance: &[f64], q: &ViewQuery) -> Result<ExplanationView> {
        let view = explain::local_used_rules(&self.rules, &self.forest, instance)?;
        self.ordered(view, q)
    }

    pub fn changes(&self, instance: &[f64], q: &ViewQuery) -> Result<ChangesResult> {
        let (view, changes) = explain::local_smallest_changes(&self.rules, &self.forest, &self.dataset, instance)?;
        Ok(ChangesResult {
            view: self.ordered(view, q)?,
            changes,
        })
    }

    pub fn view(&self, kind: ViewRequest, instance: Option<&[f64]>, q: &ViewQuery) -> Result<ExplanationView> {
        let need = || instance.ok_or_else(|| Error::Input("local views need an instance".into()));
        match kind {
            ViewRequest::Global => self.global(q),
            ViewRequest::Local => self.used_rules(need()?, q),
            ViewRequest::Changes => Ok(self.changes(need()?, q)?.view),
        }
    }

    /// Applies tree `tree_id`'s smallest change to `instance`.
    pub fn whatif_tree(&self, instance: &[f64], tree_id: usize) -> Result<WhatIf> {
        if tree_id >= self.forest.n_trees() {
            return Err(Error::Input(format!(
                "tree {tree_id} out of range (forest has {})",
                self.forest.n_trees()
            )));
        }
        let changes = explain::smallest_changes(&self.rules, &self.dataset, instance)?;
        let change = changes[tree_id]
            .change
            .as_ref()
            .ok_or_else(|| Error::Input(format!("tree {tree_id} has no rule of another class")))?;
        explain::apply_changes(instance, change, &self.rules, &self.forest, &self.dataset)
    }

    pub fn whatif_edits(&self, instance: &[f64], edits: &[FeatureEdit]) -> Result<WhatIf> {
        explain::apply_edits(instance, edits, &self.forest)
    }

    pub fn render(&self, view: &ExplanationView, style: &RenderStyle) -> Result<Rendered> {
        render_with_hits(view, &self.rules, &self.dataset, style)
    }
}

/// Parses a comma-separated feature vector such as `"6.9,3.1,4.9,1.5"`.
pub fn parse_instance(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .enumerate()
        .map(|(m, v)| {
            let v = v.trim();
            match v.parse::<f64>() {
                Ok(x) if x.is_finite() => Ok(x),
                _ => Err(Error::Input(format!("instance value {m} ({v:?}) is not a finite number"))),
            }
        })
        .collect()
}

/// Parses a comma-separated list of rule ids.
pub fn parse_ids(text: &str) -> Result<Vec<usize>> {
    text.split(',')
        .map(|v| {
            let v = v.trim();
            v.parse().map_err(|_| Error::Input(format!("{v:?} is not a rule id")))
        })
        .collect()
}

impl Model {
    /// Resolves a comma-separated list of class names or indices.
    pub fn class_indices(&self, text: &str) -> Result<Vec<usize>> {
        let names = self.forest.class_names();
        text.split(',')
            .map(|c| {
                let c = c.trim();
                names
                    .iter()
                    .position(|n| n == c)
                    .or_else(|| c.parse::<usize>().ok().filter(|&i| i < names.len()))
                    .ok_or_else(|| Error::Input(format!("unknown class {c:?}")))
            })
            .collect()
    }
}
