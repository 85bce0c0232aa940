//! Deterministic SVG rendering of explanation views.
//!
//! Layout, left to right: rule labels, coverage column, one column per
//! feature, certainty column, then the cumulative-vote column (used-rules
//! view) or the class-change column (smallest-changes view). An importance
//! row sits on top and `name (importance)` labels below.
//!
//! Predicate and stacked-bar cells are drawn inside a group scaled to the
//! unit square, so their `x`/`width` attributes are cell fractions. All
//! numbers are written with six significant digits.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::explain::{ExplanationView, ViewKind};
use crate::rules::{RuleSet, VectorRule};

pub const CATEGORY10: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22",
    "#17becf",
];

/// Okabe-Ito colours, distinguishable under common colour-vision deficiencies.
pub const OKABE_ITO: [&str; 8] = [
    "#0072b2", "#e69f00", "#009e73", "#d55e00", "#cc79a7", "#56b4e9", "#f0e442", "#000000",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderStyle {
    pub cell_width: f64,
    pub cell_height: f64,
    pub gap: f64,
    pub class_palette: Vec<String>,
    pub desaturated_background: bool,
    pub show_instance_lines: bool,
    pub positive_change_color: String,
    pub negative_change_color: String,
    pub font_size: f64,
    pub font_family: String,
}

impl Default for RenderStyle {
    fn default() -> Self {
        Self {
            cell_width: 40.0,
            cell_height: 14.0,
            gap: 2.0,
            class_palette: CATEGORY10.iter().map(|c| c.to_string()).collect(),
            desaturated_background: true,
            show_instance_lines: true,
            positive_change_color: "#2ca02c".into(),
            negative_change_color: "#9467bd".into(),
            font_size: 10.0,
            font_family: "sans-serif".into(),
        }
    }
}

impl RenderStyle {
    pub fn color_blind_safe() -> Self {
        Self {
            class_palette: OKABE_ITO.iter().map(|c| c.to_string()).collect(),
            positive_change_color: "#009e73".into(),
            negative_change_color: "#cc79a7".into(),
            ..Self::default()
        }
    }

    fn validate(&self, n_classes: usize) -> Result<()> {
        let dims = [self.cell_width, self.cell_height, self.font_size];
        if dims.iter().any(|d| !(d.is_finite() && *d > 0.0)) || !(self.gap.is_finite() && self.gap >= 0.0) {
            return Err(Error::Input("style dimensions must be positive".into()));
        }
        if n_classes > self.class_palette.len() {
            return Err(Error::Input(format!(
                "{n_classes} classes but only {} palette colours",
                self.class_palette.len()
            )));
        }
        let colors = self
            .class_palette
            .iter()
            .chain([&self.positive_change_color, &self.negative_change_color]);
        for c in colors {
            parse_hex(c).ok_or_else(|| Error::Input(format!("bad colour {c:?}")))?;
        }
        Ok(())
    }
}

/// Screen rectangle tied to a rule and/or feature, for UI tooltips.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HitRegion {
    pub role: String,
    pub x: f64,
    pub y: f64,
    pub width: f64,
    pub height: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rule_id: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rendered {
    pub svg: String,
    pub hits: Vec<HitRegion>,
}

pub fn render(view: &ExplanationView, ruleset: &RuleSet, dataset: &Dataset, style: &RenderStyle) -> Result<String> {
    render_with_hits(view, ruleset, dataset, style).map(|r| r.svg)
}

/// Six significant digits, trailing zeros trimmed, never exponent notation.
pub fn fmt6(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return "0".into();
    }
    let exp = v.abs().log10().floor() as i32;
    let decimals = (5 - exp).max(0) as usize;
    let mut s = format!("{v:.decimals$}");
    if s.contains('.') {
        while s.ends_with('0') {
            s.pop();
        }
        if s.ends_with('.') {
            s.pop();
        }
    }
    if s == "-0" {
        s = "0".into();
    }
    s
}

fn parse_hex(c: &str) -> Option<[u8; 3]> {
    let h = c.strip_prefix('#')?;
    if h.len() != 6 {
        return None;
    }
    let byte = |i: usize| u8::from_str_radix(&h[i..i + 2], 16).ok();
    Some([byte(0)?, byte(2)?, byte(4)?])
}

/// Mixes a colour 75% towards white.
fn desaturate(c: &str) -> String {
    let [r, g, b] = parse_hex(c).unwrap_or([128, 128, 128]);
    let lift = |v: u8| (v as f64 + (255.0 - v as f64) * 0.75).round() as u8;
    format!("#{:02x}{:02x}{:02x}", lift(r), lift(g), lift(b))
}

/// Gray whose darkness grows with `t` in [0, 1].
fn gray(t: f64) -> String {
    let v = (255.0 - 200.0 * t.clamp(0.0, 1.0)).round() as u8;
    format!("#{v:02x}{v:02x}{v:02x}")
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

/// Fraction of the cell for value `v` on a feature spanning `[lo, hi]`.
fn fraction(v: f64, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        ((v - lo) / (hi - lo)).clamp(0.0, 1.0)
    } else {
        0.0
    }
}

#[derive(Clone, Copy)]
enum Extra {
    Certainty,
    CumulativeVote,
    ClassChange,
}

impl Extra {
    fn label(self) -> &'static str {
        match self {
            Extra::Certainty => "certainty",
            Extra::CumulativeVote => "cumulative vote",
            Extra::ClassChange => "class change",
        }
    }
}

struct Grid<'a> {
    style: &'a RenderStyle,
    label_width: f64,
    top: f64,
}

impl Grid<'_> {
    fn col_x(&self, col: usize) -> f64 {
        self.label_width + col as f64 * (self.style.cell_width + self.style.gap)
    }

    /// Row 0 is the importance header; matrix rows start at 1.
    fn row_y(&self, row: usize) -> f64 {
        let sep = if row > 0 { 2.0 * self.style.gap } else { 0.0 };
        self.top + row as f64 * (self.style.cell_height + self.style.gap) + sep
    }
}

struct Svg {
    out: String,
}

impl Svg {
    fn rect(&mut self, x: f64, y: f64, w: f64, h: f64, attrs: &str) {
        let _ = writeln!(
            self.out,
            r#"<rect x="{}" y="{}" width="{}" height="{}" {attrs}/>"#,
            fmt6(x),
            fmt6(y),
            fmt6(w),
            fmt6(h)
        );
    }

    /// Opens a group mapping the unit square onto a cell.
    fn unit_group(&mut self, x: f64, y: f64, w: f64, h: f64, attrs: &str) {
        let _ = writeln!(
            self.out,
            r#"<g transform="translate({},{}) scale({},{})" {attrs}>"#,
            fmt6(x),
            fmt6(y),
            fmt6(w),
            fmt6(h)
        );
    }

    /// Unit-space bar from `start` to `end`; the width is taken between the
    /// two rounded endpoints so both edges keep full precision.
    fn unit_bar(&mut self, start: f64, end: f64, fill: &str) {
        let s = fmt6(start);
        let e = fmt6(end);
        let w = e.parse::<f64>().unwrap_or(end) - s.parse::<f64>().unwrap_or(start);
        let _ = writeln!(
            self.out,
            r#"<rect x="{s}" y="0" width="{}" height="1" fill="{fill}"/>"#,
            fmt6(w.max(0.0))
        );
    }

    fn stacked(&mut self, probs: &[f64], palette: &[String]) {
        let mut acc = 0.0;
        for (c, &p) in probs.iter().enumerate() {
            let end = if c + 1 == probs.len() { 1.0 } else { acc + p };
            if p > 0.0 {
                self.unit_bar(acc, end, &palette[c]);
            }
            acc += p;
        }
    }

    fn text(&mut self, x: f64, y: f64, anchor: &str, body: &str) {
        let _ = writeln!(
            self.out,
            r#"<text x="{}" y="{}" text-anchor="{anchor}">{}</text>"#,
            fmt6(x),
            fmt6(y),
            escape(body)
        );
    }
}

pub fn render_with_hits(
    view: &ExplanationView,
    ruleset: &RuleSet,
    dataset: &Dataset,
    style: &RenderStyle,
) -> Result<Rendered> {
    style.validate(dataset.n_classes())?;
    check_view(view, ruleset, dataset)?;
    let rules: Vec<&VectorRule> = view
        .rule_rows
        .iter()
        .map(|&id| ruleset.rule(id).expect("checked above"))
        .collect();

    let extras: Vec<Extra> = match view.kind {
        ViewKind::Global => vec![Extra::Certainty],
        ViewKind::UsedRules => vec![Extra::Certainty, Extra::CumulativeVote],
        ViewKind::SmallestChanges => vec![Extra::Certainty, Extra::ClassChange],
    };
    let n_cols = 1 + view.feature_cols.len() + extras.len();
    let font = style.font_size;
    let max_rule_label = view.rule_rows.iter().map(|id| format!("r{id}").len()).max().unwrap_or(2);
    let grid = Grid {
        style,
        label_width: 8.0 + max_rule_label as f64 * font * 0.62,
        top: 8.0,
    };
    let n_rows = view.rule_rows.len();
    let matrix_bottom = grid.row_y(n_rows) + style.cell_height;
    let names: Vec<String> = column_labels(view, dataset, &extras);
    let longest = names.iter().map(|s| s.chars().count()).max().unwrap_or(0);
    let labels_bottom = matrix_bottom + 6.0 + longest as f64 * font * 0.55;
    let legend_y = labels_bottom + 8.0;
    let width = grid.col_x(n_cols) + 8.0;
    let legend_width: f64 = dataset
        .class_names()
        .iter()
        .map(|n| 14.0 + n.chars().count() as f64 * font * 0.62 + 12.0)
        .sum();
    let width = width.max(grid.label_width + legend_width + 8.0);
    let height = legend_y + font + 8.0;

    let mut svg = Svg { out: String::new() };
    let mut hits = Vec::new();
    let _ = writeln!(
        svg.out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="{}" font-size="{}">"#,
        escape(&style.font_family),
        fmt6(font),
        w = fmt6(width),
        h = fmt6(height),
    );
    svg.rect(0.0, 0.0, width, height, r##"fill="#ffffff""##);

    let (cw, ch) = (style.cell_width, style.cell_height);
    let palette = &style.class_palette;

    // Importance header.
    let max_imp = view.header.iter().cloned().fold(0.0, f64::max);
    svg.out.push_str("<g class=\"importance\">\n");
    for (j, &m) in view.feature_cols.iter().enumerate() {
        let (x, y) = (grid.col_x(1 + j), grid.row_y(0));
        let t = if max_imp > 0.0 { view.header[m] / max_imp } else { 0.0 };
        svg.rect(x, y, cw, ch, r##"fill="#ffffff" stroke="#dddddd" stroke-width="0.5""##);
        if t > 0.0 {
            svg.rect(x, y, cw * t, ch, &format!(r#"fill="{}""#, gray(t)));
        }
        hits.push(HitRegion {
            role: "importance".into(),
            x,
            y,
            width: cw,
            height: ch,
            rule_id: None,
            feature: Some(m),
        });
    }
    svg.out.push_str("</g>\n");

    svg.out.push_str("<g class=\"rows\">\n");
    for (i, (rule, ex)) in rules.iter().zip(&view.row_extras).enumerate() {
        let y = grid.row_y(i + 1);
        let class_color = &palette[rule.class_index];
        svg.text(grid.label_width - 4.0, y + ch * 0.8, "end", &format!("r{}", rule.rule_id));

        // Coverage.
        let x = grid.col_x(0);
        svg.rect(x, y, cw, ch, r##"fill="#ffffff" stroke="#dddddd" stroke-width="0.5""##);
        if ex.coverage > 0.0 {
            svg.rect(
                x,
                y,
                cw * ex.coverage.clamp(0.0, 1.0),
                ch,
                &format!(r#"class="coverage" fill="{}""#, gray(ex.coverage)),
            );
        }
        hits.push(HitRegion {
            role: "coverage".into(),
            x,
            y,
            width: cw,
            height: ch,
            rule_id: Some(rule.rule_id),
            feature: None,
        });

        // Feature cells.
        for (j, &m) in view.feature_cols.iter().enumerate() {
            let x = grid.col_x(1 + j);
            let (lo, hi) = (dataset.feature_min()[m], dataset.feature_max()[m]);
            svg.rect(x, y, cw, ch, r##"fill="#ffffff" stroke="#dddddd" stroke-width="0.5""##);
            hits.push(HitRegion {
                role: "predicate".into(),
                x,
                y,
                width: cw,
                height: ch,
                rule_id: Some(rule.rule_id),
                feature: Some(m),
            });
            match view.kind {
                ViewKind::Global | ViewKind::UsedRules => {
                    let Some(iv) = rule.predicates[m] else { continue };
                    if style.desaturated_background {
                        svg.rect(x, y, cw, ch, &format!(r#"fill="{}""#, desaturate(class_color)));
                    }
                    let a = fraction(iv.alpha, lo, hi);
                    let b = fraction(iv.beta, lo, hi);
                    svg.unit_group(
                        x,
                        y,
                        cw,
                        ch,
                        &format!(r#"class="pred" data-rule="{}" data-feature="{m}""#, rule.rule_id),
                    );
                    svg.unit_bar(a, b.max(a), class_color);
                    svg.out.push_str("</g>\n");
                }
                ViewKind::SmallestChanges => {
                    let delta = ex.deltas.as_ref().map_or(0.0, |d| d[m]);
                    if delta == 0.0 {
                        continue;
                    }
                    let color = if delta > 0.0 {
                        &style.positive_change_color
                    } else {
                        &style.negative_change_color
                    };
                    svg.rect(x, y, cw, ch, &format!(r#"fill="{}""#, desaturate(color)));
                    let anchor = view.instance.as_ref().map_or(0.0, |inst| fraction(inst[m], lo, hi));
                    let span = if hi > lo { dataset.train_range(m) / (hi - lo) } else { 1.0 };
                    let w = delta.abs() * span;
                    let (a, b) = if delta > 0.0 {
                        (anchor, (anchor + w).min(1.0))
                    } else {
                        ((anchor - w).max(0.0), anchor)
                    };
                    svg.unit_group(
                        x,
                        y,
                        cw,
                        ch,
                        &format!(r#"class="delta" data-rule="{}" data-feature="{m}""#, rule.rule_id),
                    );
                    svg.unit_bar(a, b, color);
                    svg.out.push_str("</g>\n");
                }
            }
        }

        // Extra columns.
        for (e, extra) in extras.iter().enumerate() {
            let x = grid.col_x(1 + view.feature_cols.len() + e);
            svg.rect(x, y, cw, ch, r##"fill="#ffffff" stroke="#dddddd" stroke-width="0.5""##);
            let (class, probs): (&str, Vec<f64>) = match extra {
                Extra::Certainty => ("certainty", ex.certainty.clone()),
                Extra::CumulativeVote => ("cumulative", ex.cumulative_vote.clone().unwrap_or_default()),
                Extra::ClassChange => {
                    let from = ex.original_class.unwrap_or(rule.class_index);
                    svg.unit_group(x, y, cw, ch, r#"class="class-change""#);
                    svg.unit_bar(0.0, 0.5, &palette[from]);
                    svg.unit_bar(0.5, 1.0, class_color);
                    svg.out.push_str("</g>\n");
                    hits.push(HitRegion {
                        role: "class-change".into(),
                        x,
                        y,
                        width: cw,
                        height: ch,
                        rule_id: Some(rule.rule_id),
                        feature: None,
                    });
                    continue;
                }
            };
            if !probs.is_empty() {
                svg.unit_group(x, y, cw, ch, &format!(r#"class="{class}" data-rule="{}""#, rule.rule_id));
                svg.stacked(&probs, palette);
                svg.out.push_str("</g>\n");
            }
            hits.push(HitRegion {
                role: class.into(),
                x,
                y,
                width: cw,
                height: ch,
                rule_id: Some(rule.rule_id),
                feature: None,
            });
        }
    }
    svg.out.push_str("</g>\n");

    let matrix_top = grid.row_y(1);
    if let (Some(inst), true) = (&view.instance, style.show_instance_lines) {
        svg.out.push_str("<g class=\"instance\" stroke=\"#000000\" stroke-width=\"1\" stroke-dasharray=\"2,2\">\n");
        for (j, &m) in view.feature_cols.iter().enumerate() {
            let f = fraction(inst[m], dataset.feature_min()[m], dataset.feature_max()[m]);
            let x = grid.col_x(1 + j) + cw * f;
            let _ = writeln!(
                svg.out,
                r#"<line x1="{x}" y1="{}" x2="{x}" y2="{}"/>"#,
                fmt6(matrix_top),
                fmt6(matrix_bottom),
                x = fmt6(x)
            );
        }
        svg.out.push_str("</g>\n");
    }

    if let (ViewKind::UsedRules, Some(row)) = (view.kind, view.decision_fixed_row) {
        let y = grid.row_y(row) + ch + style.gap / 2.0;
        let _ = writeln!(
            svg.out,
            r##"<line class="decision" x1="{}" y1="{y}" x2="{}" y2="{y}" stroke="#000000" stroke-width="2"/>"##,
            fmt6(grid.col_x(0)),
            fmt6(grid.col_x(n_cols) - style.gap),
            y = fmt6(y)
        );
    }

    // Column labels, rotated to read downwards.
    svg.out.push_str("<g class=\"labels\">\n");
    for (c, name) in names.iter().enumerate() {
        let x = grid.col_x(c) + cw / 2.0 + font * 0.35;
        let y = matrix_bottom + 6.0;
        let _ = writeln!(
            svg.out,
            r#"<text transform="translate({},{}) rotate(90)">{}</text>"#,
            fmt6(x),
            fmt6(y),
            escape(name)
        );
    }
    svg.out.push_str("</g>\n");

    svg.out.push_str("<g class=\"legend\">\n");
    let mut lx = grid.label_width;
    for (c, name) in dataset.class_names().iter().enumerate() {
        svg.rect(lx, legend_y, 10.0, 10.0, &format!(r#"fill="{}""#, palette[c]));
        svg.text(lx + 14.0, legend_y + 9.0, "start", name);
        lx += 14.0 + name.chars().count() as f64 * font * 0.62 + 12.0;
    }
    svg.out.push_str("</g>\n</svg>\n");

    Ok(Rendered { svg: svg.out, hits })
}

fn column_labels(view: &ExplanationView, dataset: &Dataset, extras: &[Extra]) -> Vec<String> {
    let mut names = vec!["coverage".to_string()];
    for &m in &view.feature_cols {
        names.push(format!("{} ({:.3})", dataset.feature_names()[m], view.header.get(m).copied().unwrap_or(0.0)));
    }
    names.extend(extras.iter().map(|e| e.label().to_string()));
    names
}

fn check_view(view: &ExplanationView, ruleset: &RuleSet, dataset: &Dataset) -> Result<()> {
    let m = dataset.n_features();
    if ruleset.n_features() != m || ruleset.n_classes() != dataset.n_classes() {
        return Err(Error::Mismatch("rule set and dataset disagree on shape".into()));
    }
    if view.row_extras.len() != view.rule_rows.len() {
        return Err(Error::Mismatch("row extras do not match rows".into()));
    }
    if let Some(&id) = view.rule_rows.iter().find(|&&id| ruleset.rule(id).is_none()) {
        return Err(Error::Mismatch(format!("view references unknown rule {id}")));
    }
    if let Some(&f) = view.feature_cols.iter().find(|&&f| f >= m) {
        return Err(Error::Mismatch(format!("view references unknown feature {f}")));
    }
    if view.header.len() != m {
        return Err(Error::Mismatch("importance header length differs from feature count".into()));
    }
    if view.instance.as_ref().is_some_and(|i| i.len() != m) {
        return Err(Error::Mismatch("instance arity differs from feature count".into()));
    }
    if view.kind == ViewKind::SmallestChanges
        && view.row_extras.iter().any(|e| e.deltas.as_ref().is_none_or(|d| d.len() != m))
    {
        return Err(Error::Mismatch("smallest-changes rows need per-feature deltas".into()));
    }
    Ok(())
}
