//! Row and column orderings for explanation views.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::explain::{self, ExplanationView, ViewKind};
use crate::rules::RuleSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OrderTarget {
    Rules,
    Features,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OrderKey {
    ExtractionOrder,
    Coverage,
    /// Certainty of the rule's own class.
    Certainty,
    ClassAndCoverage,
    ClassAndCertainty,
    ChangeSum,
    Importance,
    DatasetOrder,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    Ascending,
    Descending,
}

impl OrderKey {
    pub const ALL: [OrderKey; 8] = [
        OrderKey::ExtractionOrder,
        OrderKey::Coverage,
        OrderKey::Certainty,
        OrderKey::ClassAndCoverage,
        OrderKey::ClassAndCertainty,
        OrderKey::ChangeSum,
        OrderKey::Importance,
        OrderKey::DatasetOrder,
    ];

    pub fn name(self) -> &'static str {
        match self {
            OrderKey::ExtractionOrder => "extraction-order",
            OrderKey::Coverage => "coverage",
            OrderKey::Certainty => "certainty",
            OrderKey::ClassAndCoverage => "class-and-coverage",
            OrderKey::ClassAndCertainty => "class-and-certainty",
            OrderKey::ChangeSum => "change-sum",
            OrderKey::Importance => "importance",
            OrderKey::DatasetOrder => "dataset-order",
        }
    }

    /// Coverage, certainty and importance read best-first; everything else
    /// ascends. For the class-and-X keys the direction applies to the class.
    pub fn default_direction(self) -> Direction {
        match self {
            OrderKey::Coverage | OrderKey::Certainty | OrderKey::Importance => Direction::Descending,
            _ => Direction::Ascending,
        }
    }

    pub fn target(self) -> OrderTarget {
        match self {
            OrderKey::Importance | OrderKey::DatasetOrder => OrderTarget::Features,
            _ => OrderTarget::Rules,
        }
    }
}

impl fmt::Display for OrderKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OrderKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        OrderKey::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Ordering(format!("unknown ordering {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrderCriterion {
    pub target: OrderTarget,
    pub key: OrderKey,
    pub direction: Direction,
}

impl OrderCriterion {
    pub fn rows(key: OrderKey) -> Self {
        Self {
            target: OrderTarget::Rules,
            key,
            direction: key.default_direction(),
        }
    }

    pub fn columns(key: OrderKey) -> Self {
        Self {
            target: OrderTarget::Features,
            key,
            direction: key.default_direction(),
        }
    }

    pub fn with_direction(mut self, direction: Direction) -> Self {
        self.direction = direction;
        self
    }

    /// Parses `key` or `key:asc` / `key:desc`, e.g. `class-and-coverage:desc`.
    pub fn parse(target: OrderTarget, text: &str) -> Result<Self> {
        let (key, dir) = match text.split_once(':') {
            Some((k, d)) => (k, Some(d)),
            None => (text, None),
        };
        let key: OrderKey = key.parse()?;
        let mut c = match target {
            OrderTarget::Rules => Self::rows(key),
            OrderTarget::Features => Self::columns(key),
        };
        if let Some(d) = dir {
            c.direction = match d {
                "asc" | "ascending" => Direction::Ascending,
                "desc" | "descending" => Direction::Descending,
                other => return Err(Error::Ordering(format!("unknown direction {other:?}"))),
            };
        }
        Ok(c)
    }

    fn check(&self, kind: ViewKind) -> Result<()> {
        if self.key.target() != self.target {
            return Err(Error::Ordering(format!(
                "{} cannot order {:?}",
                self.key, self.target
            )));
        }
        if self.key == OrderKey::ChangeSum && kind != ViewKind::SmallestChanges {
            return Err(Error::Ordering(
                "change-sum ordering needs a smallest-changes view".into(),
            ));
        }
        Ok(())
    }
}

fn directed(o: Ordering, d: Direction) -> Ordering {
    match d {
        Direction::Ascending => o,
        Direction::Descending => o.reverse(),
    }
}

/// Reorders rows by `criterion`; ties fall back to ascending rule id. The
/// used-rules view's cumulative votes are recomputed for the new order.
pub fn order_rows(mut view: ExplanationView, criterion: &OrderCriterion, ruleset: &RuleSet) -> Result<ExplanationView> {
    criterion.check(view.kind)?;
    let class_of = |id: usize| -> Result<usize> {
        ruleset
            .rule(id)
            .map(|r| r.class_index)
            .ok_or_else(|| Error::Input(format!("unknown rule id {id}")))
    };
    let classes: Vec<usize> = view.rule_rows.iter().map(|&id| class_of(id)).collect::<Result<_>>()?;
    let ex = &view.row_extras;
    let own_certainty = |i: usize| ex[i].certainty[classes[i]];
    let d = criterion.direction;

    let mut perm: Vec<usize> = (0..view.rule_rows.len()).collect();
    perm.sort_by(|&a, &b| {
        let primary = match criterion.key {
            OrderKey::ExtractionOrder => Ordering::Equal,
            OrderKey::Coverage => directed(ex[a].coverage.total_cmp(&ex[b].coverage), d),
            OrderKey::Certainty => directed(own_certainty(a).total_cmp(&own_certainty(b)), d),
            OrderKey::ClassAndCoverage => directed(classes[a].cmp(&classes[b]), d)
                .then(ex[b].coverage.total_cmp(&ex[a].coverage)),
            OrderKey::ClassAndCertainty => directed(classes[a].cmp(&classes[b]), d)
                .then(own_certainty(b).total_cmp(&own_certainty(a))),
            OrderKey::ChangeSum => {
                let s = |i: usize| ex[i].change_sum.unwrap_or(f64::INFINITY);
                directed(s(a).total_cmp(&s(b)), d)
            }
            OrderKey::Importance | OrderKey::DatasetOrder => Ordering::Equal,
        };
        let tiebreak = view.rule_rows[a].cmp(&view.rule_rows[b]);
        match criterion.key {
            OrderKey::ExtractionOrder => directed(tiebreak, d),
            _ => primary.then(tiebreak),
        }
    });

    view.rule_rows = perm.iter().map(|&i| view.rule_rows[i]).collect();
    view.row_extras = perm.iter().map(|&i| view.row_extras[i].clone()).collect();
    if view.kind == ViewKind::UsedRules {
        explain::refresh_cumulative(&mut view, ruleset)?;
    }
    Ok(view)
}

/// Puts rows in an explicit order given as a permutation of the view's rule
/// ids, recomputing the cumulative votes of a used-rules view.
pub fn reorder_rows(mut view: ExplanationView, rule_ids: &[usize], ruleset: &RuleSet) -> Result<ExplanationView> {
    let mut sorted_new = rule_ids.to_vec();
    let mut sorted_old = view.rule_rows.clone();
    sorted_new.sort_unstable();
    sorted_old.sort_unstable();
    if sorted_new != sorted_old {
        return Err(Error::Ordering("row order is not a permutation of the view's rules".into()));
    }
    let extras: Vec<_> = rule_ids
        .iter()
        .map(|id| {
            let i = view.rule_rows.iter().position(|r| r == id).expect("checked permutation");
            view.row_extras[i].clone()
        })
        .collect();
    view.rule_rows = rule_ids.to_vec();
    view.row_extras = extras;
    if view.kind == ViewKind::UsedRules {
        explain::refresh_cumulative(&mut view, ruleset)?;
    }
    Ok(view)
}

/// Reorders columns by importance (taken from the view header) or dataset
/// order; ties fall back to ascending feature index.
pub fn order_columns(mut view: ExplanationView, criterion: &OrderCriterion) -> Result<ExplanationView> {
    criterion.check(view.kind)?;
    let imp = |m: usize| view.header.get(m).copied().unwrap_or(0.0);
    let d = criterion.direction;
    let mut cols = view.feature_cols.clone();
    cols.sort_by(|&a, &b| match criterion.key {
        OrderKey::Importance => directed(imp(a).total_cmp(&imp(b)), d).then(a.cmp(&b)),
        _ => directed(a.cmp(&b), d),
    });
    view.feature_cols = cols;
    Ok(view)
}
