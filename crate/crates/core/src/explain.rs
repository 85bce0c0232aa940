//! The three explanation views and the smallest-change counterfactual search.
//!
//! * Global (`GE`): a filtered selection of the whole rule set.
//! * Used rules (`LE_UR`): the rule each tree used for one instance, with the
//!   committee's cumulative vote down the rows.
//! * Smallest changes (`LE_SC`): per tree, the rule of another class that the
//!   instance can reach with the least normalised feature change.

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::forest::{Forest, Prediction};
use crate::layout::{self, OrderCriterion, OrderKey};
use crate::rules::{Interval, RuleSet, VectorRule};
use crate::vote;

/// Relative step past a strict lower bound when materialising a change,
/// in units of the feature's train range.
pub const CROSSING_EPSILON: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ViewKind {
    #[serde(rename = "GE")]
    Global,
    #[serde(rename = "LE_UR")]
    UsedRules,
    #[serde(rename = "LE_SC")]
    SmallestChanges,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowExtras {
    pub coverage: f64,
    pub certainty: Vec<f64>,
    /// Mean certainty of rows `1..=i` (used-rules view only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cumulative_vote: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub change_sum: Option<f64>,
    /// Class of the rule the tree used before the change.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub original_class: Option<usize>,
    /// Signed normalised change per feature (all features, not just columns).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deltas: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationView {
    pub kind: ViewKind,
    /// Rule ids, one per row, top to bottom.
    pub rule_rows: Vec<usize>,
    /// Feature indices, one per column, left to right.
    pub feature_cols: Vec<usize>,
    pub row_extras: Vec<RowExtras>,
    /// Feature importances, indexed by feature.
    pub header: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instance: Option<Vec<f64>>,
    /// 1-based row after which the committee's decision no longer changes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decision_fixed_row: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChangeVector {
    pub tree_id: usize,
    /// Rule the tree currently uses for the instance.
    pub source_rule_id: usize,
    pub target_rule_id: usize,
    pub deltas: Vec<f64>,
    pub change_sum: f64,
    pub from_class: usize,
    pub to_class: usize,
}

/// Outcome of the search for one tree. `change` is `None` when every rule of
/// the tree has the used rule's class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeChange {
    pub tree_id: usize,
    pub used_rule_id: usize,
    pub change: Option<ChangeVector>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RuleFilter {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_coverage: Option<f64>,
    /// Compared against the certainty of the rule's own class.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_certainty: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classes: Option<Vec<usize>>,
    /// When set, selects exactly these rules and ignores the other filters.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rule_ids: Option<Vec<usize>>,
}

impl RuleFilter {
    pub fn accepts(&self, rule: &VectorRule) -> bool {
        if let Some(ids) = &self.rule_ids {
            return ids.contains(&rule.rule_id);
        }
        self.min_coverage.is_none_or(|c| rule.coverage >= c)
            && self.min_certainty.is_none_or(|c| rule.max_certainty() >= c)
            && self
                .classes
                .as_ref()
                .is_none_or(|cs| cs.contains(&rule.class_index))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WhatIf {
    pub new_instance: Vec<f64>,
    pub old_prediction: Prediction,
    pub new_prediction: Prediction,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureEdit {
    pub feature: usize,
    pub value: f64,
}

fn base_extras(rule: &VectorRule) -> RowExtras {
    RowExtras {
        coverage: rule.coverage,
        certainty: rule.certainty.clone(),
        cumulative_vote: None,
        change_sum: None,
        original_class: None,
        deltas: None,
    }
}

fn used_feature_cols<'a>(rules: impl Iterator<Item = &'a VectorRule>, n_features: usize) -> Vec<usize> {
    let mut used = vec![false; n_features];
    for r in rules {
        for m in r.used_features() {
            used[m] = true;
        }
    }
    (0..n_features).filter(|&m| used[m]).collect()
}

fn lookup(ruleset: &RuleSet, rule_id: usize) -> Result<&VectorRule> {
    ruleset
        .rule(rule_id)
        .ok_or_else(|| Error::Input(format!("unknown rule id {rule_id}")))
}

/// Global view: rules passing `filter` in extraction order, columns by
/// importance.
pub fn global_view(ruleset: &RuleSet, forest: &Forest, filter: &RuleFilter) -> Result<ExplanationView> {
    if let Some(ids) = &filter.rule_ids {
        for &id in ids {
            lookup(ruleset, id)?;
        }
    }
    let rows: Vec<&VectorRule> = ruleset.rules().iter().filter(|r| filter.accepts(r)).collect();
    if rows.is_empty() {
        return Err(Error::EmptyView);
    }
    let view = ExplanationView {
        kind: ViewKind::Global,
        rule_rows: rows.iter().map(|r| r.rule_id).collect(),
        feature_cols: used_feature_cols(rows.iter().copied(), ruleset.n_features()),
        row_extras: rows.iter().map(|r| base_extras(r)).collect(),
        header: header(forest),
        instance: None,
        decision_fixed_row: None,
    };
    layout::order_columns(view, &OrderCriterion::columns(OrderKey::Importance))
}

fn header(forest: &Forest) -> Vec<f64> {
    if forest.importances().is_empty() {
        vec![0.0; forest.n_features()]
    } else {
        forest.importances().to_vec()
    }
}

/// Used-rules view for `instance`: one row per tree, rows by coverage,
/// columns by importance.
pub fn local_used_rules(ruleset: &RuleSet, forest: &Forest, instance: &[f64]) -> Result<ExplanationView> {
    let used = ruleset.used_rules(instance)?;
    let view = ExplanationView {
        kind: ViewKind::UsedRules,
        rule_rows: used.iter().map(|r| r.rule_id).collect(),
        feature_cols: used_feature_cols(used.iter().copied(), ruleset.n_features()),
        row_extras: used.iter().map(|r| base_extras(r)).collect(),
        header: header(forest),
        instance: Some(instance.to_vec()),
        decision_fixed_row: None,
    };
    let view = layout::order_rows(view, &OrderCriterion::rows(OrderKey::Coverage), ruleset)?;
    layout::order_columns(view, &OrderCriterion::columns(OrderKey::Importance))
}

/// Recomputes the cumulative vote column and the decision-fixed row for the
/// current row order.
///
/// Each prefix is averaged in tree order, so the last row is bit-identical to
/// the forest's soft vote whatever the row order.
pub(crate) fn refresh_cumulative(view: &mut ExplanationView, ruleset: &RuleSet) -> Result<()> {
    let rules: Vec<&VectorRule> = view
        .rule_rows
        .iter()
        .map(|&id| lookup(ruleset, id))
        .collect::<Result<_>>()?;
    let mut prefix: Vec<&VectorRule> = Vec::with_capacity(rules.len());
    let mut argmaxes = Vec::with_capacity(rules.len());
    for (i, rule) in rules.iter().enumerate() {
        let at = prefix.partition_point(|r| (r.tree_id, r.rule_id) < (rule.tree_id, rule.rule_id));
        prefix.insert(at, rule);
        let cum = vote::mean(prefix.iter().map(|r| r.certainty.as_slice()), ruleset.n_classes());
        argmaxes.push(vote::argmax(&cum));
        view.row_extras[i].cumulative_vote = Some(cum);
    }
    view.decision_fixed_row = argmaxes.last().map(|&fin| {
        let unstable = argmaxes.iter().rposition(|&a| a != fin);
        unstable.map_or(1, |j| j + 2)
    });
    Ok(())
}

/// Signed normalised change needed on one feature to satisfy `predicate`.
///
/// Magnitude is `min(|alpha - x|, |beta - x|) / train_range` when `x`
/// violates the predicate and 0 otherwise; positive when `x` must grow.
/// A zero train range leaves the distance unnormalised.
pub fn feature_delta(predicate: Option<&Interval>, x: f64, train_range: f64) -> f64 {
    let Some(iv) = predicate else {
        return 0.0;
    };
    if iv.contains(x) {
        return 0.0;
    }
    let scale = if train_range > 0.0 { train_range } else { 1.0 };
    let magnitude = (iv.alpha - x).abs().min((iv.beta - x).abs()) / scale;
    if iv.lower_bounded && x <= iv.alpha {
        magnitude
    } else {
        -magnitude
    }
}

fn change_to(rule: &VectorRule, dataset: &Dataset, instance: &[f64]) -> (Vec<f64>, f64) {
    let deltas: Vec<f64> = rule
        .predicates
        .iter()
        .zip(instance)
        .enumerate()
        .map(|(m, (p, &x))| feature_delta(p.as_ref(), x, dataset.train_range(m)))
        .collect();
    let sum = deltas.iter().map(|d| d.abs()).sum();
    (deltas, sum)
}

/// Per tree, the rule of a different class reachable with the smallest
/// summed change. Ties go to the higher own-class certainty, then the lower
/// rule id.
pub fn smallest_changes(ruleset: &RuleSet, dataset: &Dataset, instance: &[f64]) -> Result<Vec<TreeChange>> {
    dataset.check_instance(instance)?;
    if dataset.n_features() != ruleset.n_features() {
        return Err(Error::Mismatch("rule set and dataset feature counts differ".into()));
    }
    (0..ruleset.n_trees())
        .map(|k| {
            let used = ruleset.used_rule(k, instance)?;
            let mut best: Option<(&VectorRule, Vec<f64>, f64)> = None;
            for cand in ruleset.tree_rules(k) {
                if cand.class_index == used.class_index {
                    continue;
                }
                let (deltas, sum) = change_to(cand, dataset, instance);
                let better = match &best {
                    None => true,
                    Some((b, _, bsum)) => {
                        sum < *bsum
                            || (sum == *bsum
                                && (cand.max_certainty() > b.max_certainty()
                                    || (cand.max_certainty() == b.max_certainty()
                                        && cand.rule_id < b.rule_id)))
                    }
                };
                if better {
                    best = Some((cand, deltas, sum));
                }
            }
            Ok(TreeChange {
                tree_id: k,
                used_rule_id: used.rule_id,
                change: best.map(|(target, deltas, change_sum)| ChangeVector {
                    tree_id: k,
                    source_rule_id: used.rule_id,
                    target_rule_id: target.rule_id,
                    deltas,
                    change_sum,
                    from_class: used.class_index,
                    to_class: target.class_index,
                }),
            })
        })
        .collect()
}

/// Smallest-changes view: one row per tree that has a candidate, rows by
/// ascending change sum, columns by importance.
pub fn local_smallest_changes(
    ruleset: &RuleSet,
    forest: &Forest,
    dataset: &Dataset,
    instance: &[f64],
) -> Result<(ExplanationView, Vec<TreeChange>)> {
    let changes = smallest_changes(ruleset, dataset, instance)?;
    let present: Vec<&ChangeVector> = changes.iter().filter_map(|c| c.change.as_ref()).collect();
    let targets: Vec<&VectorRule> = present
        .iter()
        .map(|c| lookup(ruleset, c.target_rule_id))
        .collect::<Result<_>>()?;
    let view = ExplanationView {
        kind: ViewKind::SmallestChanges,
        rule_rows: targets.iter().map(|r| r.rule_id).collect(),
        feature_cols: used_feature_cols(targets.iter().copied(), ruleset.n_features()),
        row_extras: targets
            .iter()
            .zip(&present)
            .map(|(r, c)| RowExtras {
                change_sum: Some(c.change_sum),
                original_class: Some(c.from_class),
                deltas: Some(c.deltas.clone()),
                ..base_extras(r)
            })
            .collect(),
        header: header(forest),
        instance: Some(instance.to_vec()),
        decision_fixed_row: None,
    };
    let view = layout::order_rows(view, &OrderCriterion::rows(OrderKey::ChangeSum), ruleset)?;
    let view = layout::order_columns(view, &OrderCriterion::columns(OrderKey::Importance))?;
    Ok((view, changes))
}

/// Moves `instance` into the change's target rule and re-predicts.
///
/// Features below a lower bound move to just above it (`alpha` plus
/// [`CROSSING_EPSILON`] train ranges); features above an upper bound move
/// onto it, since intervals are closed on the right.
pub fn apply_changes(
    instance: &[f64],
    change: &ChangeVector,
    ruleset: &RuleSet,
    forest: &Forest,
    dataset: &Dataset,
) -> Result<WhatIf> {
    dataset.check_instance(instance)?;
    let used = ruleset.used_rule(change.tree_id, instance).map_err(|e| match e {
        Error::Input(msg) => Error::StaleChange(msg),
        other => other,
    })?;
    if used.rule_id != change.source_rule_id {
        return Err(Error::StaleChange(format!(
            "tree {} uses rule {} for this instance, change was computed from rule {}",
            change.tree_id, used.rule_id, change.source_rule_id
        )));
    }
    let target = ruleset
        .rule(change.target_rule_id)
        .filter(|r| r.tree_id == change.tree_id)
        .ok_or_else(|| {
            Error::StaleChange(format!(
                "rule {} is not a rule of tree {}",
                change.target_rule_id, change.tree_id
            ))
        })?;
    let (deltas, _) = change_to(target, dataset, instance);
    if deltas != change.deltas {
        return Err(Error::StaleChange("deltas do not match this instance".into()));
    }

    let mut new_instance = instance.to_vec();
    for (m, p) in target.predicates.iter().enumerate() {
        let Some(iv) = p else { continue };
        let x = instance[m];
        if iv.contains(x) {
            continue;
        }
        new_instance[m] = if iv.lower_bounded && x <= iv.alpha {
            let mut v = iv.alpha + CROSSING_EPSILON * dataset.train_range(m);
            if v <= iv.alpha {
                v = iv.alpha.next_up();
            }
            if iv.upper_bounded && v > iv.beta {
                v = iv.alpha + (iv.beta - iv.alpha) / 2.0;
            }
            v
        } else {
            iv.beta
        };
    }
    let reached = ruleset.used_rule(change.tree_id, &new_instance)?;
    if reached.rule_id != target.rule_id {
        return Err(Error::Defect(format!(
            "materialised change landed in rule {} instead of {}",
            reached.rule_id, target.rule_id
        )));
    }
    Ok(WhatIf {
        old_prediction: forest.predict(instance)?,
        new_prediction: forest.predict(&new_instance)?,
        new_instance,
    })
}

/// Applies explicit feature edits and re-predicts.
pub fn apply_edits(instance: &[f64], edits: &[FeatureEdit], forest: &Forest) -> Result<WhatIf> {
    let old_prediction = forest.predict(instance)?;
    let mut new_instance = instance.to_vec();
    for e in edits {
        if e.feature >= new_instance.len() {
            return Err(Error::Input(format!("edit targets unknown feature {}", e.feature)));
        }
        new_instance[e.feature] = e.value;
    }
    let new_prediction = forest.predict(&new_instance)?;
    Ok(WhatIf {
        new_instance,
        old_prediction,
        new_prediction,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iv(alpha: f64, beta: f64, lower: bool, upper: bool) -> Interval {
        Interval {
            alpha,
            beta,
            lower_bounded: lower,
            upper_bounded: upper,
        }
    }

    #[test]
    fn delta_signs_and_zeros() {
        let p = iv(1.0, 2.0, true, true);
        assert_eq!(feature_delta(Some(&p), 1.5, 10.0), 0.0);
        assert_eq!(feature_delta(Some(&p), 2.0, 10.0), 0.0);
        assert!((feature_delta(Some(&p), 0.5, 10.0) - 0.05).abs() < 1e-15);
        assert!((feature_delta(Some(&p), 3.0, 10.0) + 0.1).abs() < 1e-15);
        assert_eq!(feature_delta(None, 100.0, 10.0), 0.0);
    }

    #[test]
    fn delta_at_open_lower_bound_is_zero_but_violated() {
        let p = iv(1.0, 2.0, true, true);
        assert!(!p.contains(1.0));
        assert_eq!(feature_delta(Some(&p), 1.0, 10.0), 0.0);
    }

    #[test]
    fn delta_rescales_with_units() {
        let p = iv(1.0, 2.0, true, true);
        let q = iv(100.0, 200.0, true, true);
        let a = feature_delta(Some(&p), 0.25, 4.0);
        let b = feature_delta(Some(&q), 25.0, 400.0);
        assert!((a - b).abs() < 1e-15);
    }

    #[test]
    fn unbounded_side_never_violated() {
        let p = iv(0.0, 2.0, false, true);
        assert_eq!(feature_delta(Some(&p), -50.0, 1.0), 0.0);
    }

    #[test]
    fn filter_precedence() {
        let rule = VectorRule {
            rule_id: 4,
            tree_id: 0,
            leaf_id: 3,
            predicates: vec![None],
            certainty: vec![0.2, 0.8],
            class_index: 1,
            coverage: 0.3,
        };
        let f = RuleFilter {
            min_coverage: Some(0.5),
            ..RuleFilter::default()
        };
        assert!(!f.accepts(&rule));
        let f = RuleFilter {
            min_coverage: Some(0.5),
            rule_ids: Some(vec![4]),
            ..RuleFilter::default()
        };
        assert!(f.accepts(&rule));
        let f = RuleFilter {
            min_certainty: Some(0.8),
            classes: Some(vec![1]),
            ..RuleFilter::default()
        };
        assert!(f.accepts(&rule));
    }
}
