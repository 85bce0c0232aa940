//! `pathmatrix` command line. Every subcommand is a thin wrapper over
//! [`pathmatrix::Model`]; JSON outputs are the pretty-printed serialisation
//! of the corresponding library call.
//!
//! Exit codes: 0 success, 1 usage error, 2 file, data or model error.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use pathmatrix::{
    export_forest, import_forest, parse_ids, parse_instance, CsvSchema, Error, FeatureEdit, Forest,
    Model, OrderCriterion, OrderTarget, RenderStyle, RuleFilter, TrainParams, ViewQuery, ViewRequest,
};
use pathmatrix_server::ServerConfig;
use serde::Serialize;

#[derive(Parser)]
#[command(name = "pathmatrix", version, about = "Explain random forests through their decision paths")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a forest on a CSV file and write its JSON document.
    Train(TrainArgs),
    /// Validate a forest document against a dataset and print its summary.
    Import(ImportArgs),
    /// Write the extracted rules as JSON lines.
    Rules(RulesArgs),
    /// Global view: all rules, filtered and ordered.
    ExplainGlobal(GlobalArgs),
    /// Used-rules view for one instance.
    ExplainLocal(LocalArgs),
    /// Smallest-changes view for one instance.
    ExplainChanges(LocalArgs),
    /// Apply a tree's smallest change, or explicit edits, and re-predict.
    Whatif(WhatIfArgs),
    /// Render any view as SVG.
    Render(RenderArgs),
    /// Run the HTTP service.
    Serve(ServeArgs),
}

#[derive(Args)]
struct DataArgs {
    /// Dataset CSV.
    #[arg(long)]
    data: PathBuf,
    /// Label column; defaults to the one recorded in a trained model.
    #[arg(long)]
    label: Option<String>,
    #[arg(long)]
    train_fraction: Option<f64>,
    #[arg(long)]
    split_seed: Option<u64>,
}

#[derive(Args)]
struct ModelArgs {
    /// Forest JSON document.
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    data: DataArgs,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value_t = 100)]
    trees: usize,
    #[arg(long)]
    max_depth: Option<usize>,
    #[arg(long)]
    features_per_split: Option<usize>,
    #[arg(long)]
    no_bootstrap: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "model.json")]
    out: PathBuf,
}

#[derive(Args)]
struct ImportArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Also write the canonical form of the document here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RulesArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Defaults to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OrderArgs {
    /// Row ordering, e.g. `coverage`, `class-and-certainty:asc`.
    #[arg(long)]
    order_rows: Option<String>,
    /// Column ordering: `importance` or `dataset-order`.
    #[arg(long)]
    order_cols: Option<String>,
}

#[derive(Args)]
struct FilterArgs {
    #[arg(long)]
    min_coverage: Option<f64>,
    #[arg(long)]
    min_certainty: Option<f64>,
    /// Comma-separated class names or indices.
    #[arg(long)]
    classes: Option<String>,
    /// Comma-separated rule ids; overrides the other filters.
    #[arg(long)]
    rules: Option<String>,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct InstanceArgs {
    /// Comma-separated feature values.
    #[arg(long, allow_hyphen_values = true)]
    instance: Option<String>,
    /// Dataset row (0-based).
    #[arg(long)]
    row: Option<usize>,
}

#[derive(Args)]
struct OutputArgs {
    /// Write the view JSON here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also render the view to this SVG file.
    #[arg(long)]
    svg: Option<PathBuf>,
    #[command(flatten)]
    style: StyleArgs,
}

#[derive(Args)]
struct StyleArgs {
    #[arg(long, value_enum, default_value_t = Palette::Category10)]
    palette: Palette,
    #[arg(long)]
    no_instance_lines: bool,
    #[arg(long)]
    white_background: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Palette {
    Category10,
    ColorBlind,
}

#[derive(Args)]
struct GlobalArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    filter: FilterArgs,
    #[command(flatten)]
    order: OrderArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct LocalArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    instance: InstanceArgs,
    #[command(flatten)]
    order: OrderArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct WhatIfArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    instance: InstanceArgs,
    /// Apply this tree's smallest change.
    #[arg(long, conflicts_with = "set", required_unless_present = "set")]
    tree: Option<usize>,
    /// Explicit edit `feature=value` (feature index or name); repeatable.
    #[arg(long)]
    set: Vec<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ViewKindArg {
    Global,
    Local,
    Changes,
}

#[derive(Args)]
struct RenderArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, value_enum, default_value_t = ViewKindArg::Global)]
    view: ViewKindArg,
    #[arg(long, allow_hyphen_values = true, conflicts_with = "row")]
    instance: Option<String>,
    #[arg(long)]
    row: Option<usize>,
    #[command(flatten)]
    filter: FilterArgs,
    #[command(flatten)]
    order: OrderArgs,
    #[command(flatten)]
    style: StyleArgs,
    /// SVG output; defaults to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write hit regions as JSON.
    #[arg(long)]
    hits: Option<PathBuf>,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: IpAddr,
    #[arg(long)]
    data_dir: Option<PathBuf>,
    #[arg(long)]
    cors: bool,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // --help and --version also arrive here, on stdout with code 0.
            if e.use_stderr() {
                let _ = write!(stderr, "{}", e.render());
                return 1;
            }
            let _ = write!(stdout, "{}", e.render());
            return 0;
        }
    };
    match dispatch(cli.command, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            2
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn read(path: &Path) -> pathmatrix::Result<String> {
    fs::read_to_string(path).map_err(io_err(path))
}

fn write_file(path: &Path, body: &str) -> pathmatrix::Result<()> {
    fs::write(path, body).map_err(io_err(path))
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("outputs serialise");
    s.push('\n');
    s
}

fn emit(out: Option<&Path>, body: &str, stdout: &mut dyn Write) -> pathmatrix::Result<()> {
    match out {
        Some(p) => write_file(p, body),
        None => stdout.write_all(body.as_bytes()).map_err(io_err(Path::new("<stdout>"))),
    }
}

fn schema(args: &DataArgs, recorded: Option<&CsvSchema>) -> pathmatrix::Result<CsvSchema> {
    let mut s = match (&args.label, recorded) {
        (Some(label), Some(r)) => CsvSchema {
            label_column: label.clone(),
            ..r.clone()
        },
        (Some(label), None) => CsvSchema::new(label.clone()),
        (None, Some(r)) => r.clone(),
        (None, None) => return Err(Error::Input("--label is required for models without a recorded split".into())),
    };
    if let Some(f) = args.train_fraction {
        s.train_fraction = f;
    }
    if let Some(seed) = args.split_seed {
        s.split_seed = seed;
    }
    Ok(s)
}

fn load_forest(path: &Path) -> pathmatrix::Result<Forest> {
    import_forest(&read(path)?).map_err(|e| match e {
        Error::Validation { path: p, message } => Error::Validation {
            path: format!("{}: {p}", path.display()),
            message,
        },
        other => other,
    })
}

fn load_model(args: &ModelArgs) -> pathmatrix::Result<Model> {
    let forest = load_forest(&args.model)?;
    let recorded = forest.train_params().and_then(|p| p.split.as_ref());
    let schema = schema(&args.data, recorded)?;
    Model::import(forest, &read(&args.data.data)?, &schema)
}

fn order_query(o: &OrderArgs) -> pathmatrix::Result<ViewQuery> {
    Ok(ViewQuery {
        filter: RuleFilter::default(),
        order_rows: o.order_rows.as_deref().map(|t| OrderCriterion::parse(OrderTarget::Rules, t)).transpose()?,
        order_cols: o.order_cols.as_deref().map(|t| OrderCriterion::parse(OrderTarget::Features, t)).transpose()?,
    })
}

fn filter(model: &Model, f: &FilterArgs) -> pathmatrix::Result<RuleFilter> {
    Ok(RuleFilter {
        min_coverage: f.min_coverage,
        min_certainty: f.min_certainty,
        classes: f.classes.as_deref().map(|c| model.class_indices(c)).transpose()?,
        rule_ids: f.rules.as_deref().map(parse_ids).transpose()?,
    })
}

fn instance(model: &Model, text: Option<&str>, row: Option<usize>) -> pathmatrix::Result<Option<Vec<f64>>> {
    match (text, row) {
        (Some(t), _) => parse_instance(t).map(Some),
        (None, Some(n)) => model.row(n).map(Some),
        (None, None) => Ok(None),
    }
}

fn style(s: &StyleArgs) -> RenderStyle {
    let mut style = match s.palette {
        Palette::Category10 => RenderStyle::default(),
        Palette::ColorBlind => RenderStyle::color_blind_safe(),
    };
    style.show_instance_lines = !s.no_instance_lines;
    style.desaturated_background = !s.white_background;
    style
}

fn write_view(
    model: &Model,
    view: &pathmatrix::ExplanationView,
    json: &str,
    out: &OutputArgs,
    stdout: &mut dyn Write,
) -> pathmatrix::Result<()> {
    if let Some(svg) = &out.svg {
        write_file(svg, &model.render(view, &style(&out.style))?.svg)?;
    }
    emit(out.out.as_deref(), json, stdout)
}

fn parse_edit(model: &Model, text: &str) -> pathmatrix::Result<FeatureEdit> {
    let (f, v) = text
        .split_once('=')
        .ok_or_else(|| Error::Input(format!("edit {text:?} is not feature=value")))?;
    let names = model.forest().feature_names();
    let feature = names
        .iter()
        .position(|n| n == f)
        .or_else(|| f.parse().ok().filter(|&i: &usize| i < names.len()))
        .ok_or_else(|| Error::Input(format!("unknown feature {f:?}")))?;
    let value: f64 = v
        .parse()
        .ok()
        .filter(|x: &f64| x.is_finite())
        .ok_or_else(|| Error::Input(format!("edit value {v:?} is not a finite number")))?;
    Ok(FeatureEdit { feature, value })
}

fn dispatch(command: Command, stdout: &mut dyn Write) -> pathmatrix::Result<()> {
    match command {
        Command::Train(a) => {
            let schema = schema(&a.data, None)?;
            let params = TrainParams {
                trees: a.trees,
                max_depth: a.max_depth,
                features_per_split: a.features_per_split,
                bootstrap: !a.no_bootstrap,
                seed: a.seed,
                split: None,
            };
            let model = Model::train(&read(&a.data.data)?, &schema, &params)?;
            write_file(&a.out, &export_forest(model.forest()))?;
            emit(None, &to_json(&model.summary()?), stdout)
        }
        Command::Import(a) => {
            let model = load_model(&a.model)?;
            if let Some(out) = &a.out {
                write_file(out, &export_forest(model.forest()))?;
            }
            emit(None, &to_json(&model.summary()?), stdout)
        }
        Command::Rules(a) => {
            let model = load_model(&a.model)?;
            emit(a.out.as_deref(), &model.rules().to_jsonl(), stdout)
        }
        Command::ExplainGlobal(a) => {
            let model = load_model(&a.model)?;
            let q = ViewQuery {
                filter: filter(&model, &a.filter)?,
                ..order_query(&a.order)?
            };
            let view = model.global(&q)?;
            write_view(&model, &view, &to_json(&view), &a.output, stdout)
        }
        Command::ExplainLocal(a) => {
            let model = load_model(&a.model)?;
            let x = instance(&model, a.instance.instance.as_deref(), a.instance.row)?.expect("clap requires one");
            let view = model.used_rules(&x, &order_query(&a.order)?)?;
            write_view(&model, &view, &to_json(&view), &a.output, stdout)
        }
        Command::ExplainChanges(a) => {
            let model = load_model(&a.model)?;
            let x = instance(&model, a.instance.instance.as_deref(), a.instance.row)?.expect("clap requires one");
            let result = model.changes(&x, &order_query(&a.order)?)?;
            write_view(&model, &result.view, &to_json(&result), &a.output, stdout)
        }
        Command::Whatif(a) => {
            let model = load_model(&a.model)?;
            let x = instance(&model, a.instance.instance.as_deref(), a.instance.row)?.expect("clap requires one");
            let result = match a.tree {
                Some(k) => model.whatif_tree(&x, k)?,
                None => {
                    let edits = a.set.iter().map(|s| parse_edit(&model, s)).collect::<pathmatrix::Result<Vec<_>>>()?;
                    model.whatif_edits(&x, &edits)?
                }
            };
            emit(None, &to_json(&result), stdout)
        }
        Command::Render(a) => {
            let model = load_model(&a.model)?;
            let x = instance(&model, a.instance.as_deref(), a.row)?;
            let kind = match a.view {
                ViewKindArg::Global => ViewRequest::Global,
                ViewKindArg::Local => ViewRequest::Local,
                ViewKindArg::Changes => ViewRequest::Changes,
            };
            let q = ViewQuery {
                filter: filter(&model, &a.filter)?,
                ..order_query(&a.order)?
            };
            let view = model.view(kind, x.as_deref(), &q)?;
            let rendered = model.render(&view, &style(&a.style))?;
            if let Some(h) = &a.hits {
                write_file(h, &to_json(&rendered.hits))?;
            }
            emit(a.out.as_deref(), &rendered.svg, stdout)
        }
        Command::Serve(a) => {
            let config = ServerConfig {
                addr: SocketAddr::new(a.host, a.port),
                data_dir: a.data_dir,
                cors: a.cors,
            };
            let rt = tokio::runtime::Runtime::new().map_err(io_err(Path::new("<runtime>")))?;
            rt.block_on(pathmatrix_server::serve(config))
                .map_err(|source| Error::Io {
                    path: PathBuf::from(format!("{}:{}", a.host, a.port)),
                    source,
                })
        }
    }
}
