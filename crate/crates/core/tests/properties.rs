//! Property tests for orderings, deltas and serialisation.

mod common;

use std::sync::OnceLock;

use pathmatrix::synthetic::blobs;
use pathmatrix::*;
use proptest::prelude::*;

struct Model {
    forest: Forest,
    data: Dataset,
    rules: RuleSet,
}

fn model() -> &'static Model {
    static M: OnceLock<Model> = OnceLock::new();
    M.get_or_init(|| {
        let data = blobs(240, 5, 3, 21);
        let forest = train_forest(&data, &TrainParams { trees: 6, max_depth: Some(5), seed: 4, ..Default::default() }).unwrap();
        let rules = extract_rules(&forest, &data).unwrap();
        Model { forest, data, rules }
    })
}

fn row_key() -> impl Strategy<Value = OrderKey> {
    prop::sample::select(vec![
        OrderKey::ExtractionOrder,
        OrderKey::Coverage,
        OrderKey::Certainty,
        OrderKey::ClassAndCoverage,
        OrderKey::ClassAndCertainty,
    ])
}

fn direction() -> impl Strategy<Value = Direction> {
    prop_oneof![Just(Direction::Ascending), Just(Direction::Descending)]
}

/// Reference comparator-based sort over rule records.
fn reference_rows(rules: &RuleSet, ids: &[usize], key: OrderKey, dir: Direction) -> Vec<usize> {
    let mut v: Vec<&VectorRule> = ids.iter().map(|&id| rules.rule(id).unwrap()).collect();
    let flip = |o: std::cmp::Ordering| if dir == Direction::Descending { o.reverse() } else { o };
    v.sort_by(|a, b| {
        let cert = |r: &VectorRule| r.certainty.iter().cloned().fold(f64::MIN, f64::max);
        let o = match key {
            OrderKey::ExtractionOrder => return flip(a.rule_id.cmp(&b.rule_id)),
            OrderKey::Coverage => flip(a.coverage.partial_cmp(&b.coverage).unwrap()),
            OrderKey::Certainty => flip(cert(a).partial_cmp(&cert(b)).unwrap()),
            OrderKey::ClassAndCoverage => {
                flip(a.class_index.cmp(&b.class_index)).then(b.coverage.partial_cmp(&a.coverage).unwrap())
            }
            OrderKey::ClassAndCertainty => {
                flip(a.class_index.cmp(&b.class_index)).then(cert(b).partial_cmp(&cert(a)).unwrap())
            }
            _ => unreachable!(),
        };
        o.then(a.rule_id.cmp(&b.rule_id))
    });
    v.iter().map(|r| r.rule_id).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn row_orderings_match_reference(key in row_key(), dir in direction(), min_cov in 0.0..0.5f64) {
        let m = model();
        let filter = RuleFilter { min_coverage: Some(min_cov), ..Default::default() };
        let Ok(view) = global_view(&m.rules, &m.forest, &filter) else { return Ok(()) };
        let crit = OrderCriterion::rows(key).with_direction(dir);
        let ordered = order_rows(view.clone(), &crit, &m.rules).unwrap();
        prop_assert_eq!(&ordered.rule_rows, &reference_rows(&m.rules, &view.rule_rows, key, dir));
        // Cells travel with their rows.
        for (id, ex) in ordered.rule_rows.iter().zip(&ordered.row_extras) {
            let i = view.rule_rows.iter().position(|r| r == id).unwrap();
            prop_assert_eq!(ex, &view.row_extras[i]);
        }
        prop_assert_eq!(order_rows(view, &crit, &m.rules).unwrap(), ordered);
    }

    #[test]
    fn column_order_is_argsort(imps in prop::collection::vec(0.0..1.0f64, 5), dir in direction()) {
        let m = model();
        let mut view = global_view(&m.rules, &m.forest, &RuleFilter::default()).unwrap();
        view.feature_cols = (0..5).collect();
        view.header = imps.clone();
        let v = order_columns(view, &OrderCriterion::columns(OrderKey::Importance).with_direction(dir)).unwrap();
        let mut oracle: Vec<usize> = (0..5).collect();
        oracle.sort_by(|&a, &b| {
            let o = imps[a].partial_cmp(&imps[b]).unwrap();
            let o = if dir == Direction::Descending { o.reverse() } else { o };
            o.then(a.cmp(&b))
        });
        prop_assert_eq!(v.feature_cols, oracle);
    }

    #[test]
    fn used_rules_vote_invariant_under_any_order(
        x in prop::collection::vec(-8.0..8.0f64, 5),
        key in row_key(),
        dir in direction(),
    ) {
        let m = model();
        let view = local_used_rules(&m.rules, &m.forest, &x).unwrap();
        let v = order_rows(view, &OrderCriterion::rows(key).with_direction(dir), &m.rules).unwrap();
        let last = v.row_extras.last().unwrap().cumulative_vote.clone().unwrap();
        prop_assert_eq!(last, m.forest.predict(&x).unwrap().probabilities);
        let fixed = v.decision_fixed_row.unwrap();
        let final_class = argmax(v.row_extras.last().unwrap().cumulative_vote.as_ref().unwrap());
        for ex in &v.row_extras[fixed - 1..] {
            prop_assert_eq!(argmax(ex.cumulative_vote.as_ref().unwrap()), final_class);
        }
    }

    #[test]
    fn change_rows_sorted_and_apply(x in prop::collection::vec(-8.0..8.0f64, 5)) {
        let m = model();
        let (view, changes) = local_smallest_changes(&m.rules, &m.forest, &m.data, &x).unwrap();
        let sums: Vec<f64> = view.row_extras.iter().map(|e| e.change_sum.unwrap()).collect();
        prop_assert!(sums.windows(2).all(|w| w[0] <= w[1]));
        for c in changes.iter().filter_map(|c| c.change.as_ref()) {
            let w = apply_changes(&x, c, &m.rules, &m.forest, &m.data).unwrap();
            prop_assert_eq!(m.rules.used_rule(c.tree_id, &w.new_instance).unwrap().rule_id, c.target_rule_id);
        }
    }

    #[test]
    fn delta_zero_iff_satisfied(alpha in -5.0..5.0f64, width in 0.01..5.0f64, x in -10.0..10.0f64) {
        let iv = Interval { alpha, beta: alpha + width, lower_bounded: true, upper_bounded: true };
        let d = feature_delta(Some(&iv), x, 2.0);
        prop_assert_eq!(d == 0.0, x > alpha && x <= alpha + width);
        if x <= alpha {
            prop_assert!((d - (alpha - x) / 2.0).abs() < 1e-12);
        } else if x > alpha + width {
            prop_assert!((d + (x - alpha - width) / 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn forest_json_round_trip(seed in 0u64..1000) {
        let d = blobs(60, 3, 2, seed);
        let f = train_forest(&d, &TrainParams { trees: 3, seed, ..Default::default() }).unwrap();
        let text = export_forest(&f);
        let back = import_forest(&text).unwrap();
        prop_assert_eq!(&back, &f);
        prop_assert_eq!(export_forest(&back), text);
    }
}

#[test]
fn change_sum_ordering_needs_changes_view() {
    let m = model();
    let view = global_view(&m.rules, &m.forest, &RuleFilter::default()).unwrap();
    assert!(matches!(
        order_rows(view, &OrderCriterion::rows(OrderKey::ChangeSum), &m.rules),
        Err(Error::Ordering(_))
    ));
}

#[test]
fn filters_and_empty_view() {
    let m = model();
    let f = RuleFilter { min_coverage: Some(2.0), ..Default::default() };
    assert!(matches!(global_view(&m.rules, &m.forest, &f), Err(Error::EmptyView)));
    let f = RuleFilter { classes: Some(vec![1]), min_certainty: Some(0.9), ..Default::default() };
    let v = global_view(&m.rules, &m.forest, &f).unwrap();
    for id in v.rule_rows {
        let r = m.rules.rule(id).unwrap();
        assert_eq!(r.class_index, 1);
        assert!(r.certainty[1] >= 0.9);
    }
}
