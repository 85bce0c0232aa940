//! HTTP front end over [`pathmatrix::Model`].
//!
//! | route | body / query | response |
//! |---|---|---|
//! | `POST /models` | [`CreateModel`] | 201 [`ModelCreated`] |
//! | `GET /models` | | ids and creation times |
//! | `GET /models/{id}` | | [`ModelCreated`] |
//! | `DELETE /models/{id}` | | 204 |
//! | `GET /models/{id}/forest` | | canonical forest JSON |
//! | `GET /models/{id}/rules` | [`ViewParams`] | global view |
//! | `POST /models/{id}/explain/local` | [`LocalBody`] | used-rules view |
//! | `POST /models/{id}/explain/changes` | [`LocalBody`] | smallest-changes view and change vectors |
//! | `POST /models/{id}/whatif` | [`WhatIfBody`] | old/new prediction |
//! | `GET /models/{id}/render` | [`ViewParams`] | `image/svg+xml` |
//! | `GET /models/{id}/hits` | [`ViewParams`] | hit regions of the same SVG |
//!
//! Errors are JSON `{error, message, path?}`: 404 for unknown ids, 400 for
//! malformed bodies or queries (with the offending field path), 422 when a
//! well-formed request cannot be served (for example wrong instance arity).

mod error;
mod store;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path, RawQuery, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use pathmatrix::{
    export_forest, import_forest, parse_ids, parse_instance, CsvSchema, FeatureEdit, Model, ModelSummary,
    OrderCriterion, OrderTarget, RenderStyle, RuleFilter, TrainParams, ViewQuery, ViewRequest,
};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use tower_http::cors::CorsLayer;

pub use error::{ApiError, ErrorBody};
pub use store::{Session, Store};

type ApiResult<T> = Result<T, ApiError>;
type AppState = Arc<Store>;

/// `POST /models`: a dataset plus either a forest document or training
/// parameters.
#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct CreateModel {
    pub dataset_csv: String,
    pub schema: CsvSchema,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub forest: Option<serde_json::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train: Option<TrainParams>,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct ModelCreated {
    pub model_id: String,
    pub summary: ModelSummary,
}

/// Query string of the view routes.
#[derive(Debug, Default, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct ViewParams {
    /// `global` (default), `local` or `changes`; render and hits only.
    pub view: Option<ViewRequest>,
    /// Comma-separated feature values.
    pub instance: Option<String>,
    /// Dataset row used as the instance.
    pub row: Option<usize>,
    pub min_coverage: Option<f64>,
    pub min_certainty: Option<f64>,
    /// Comma-separated class names or indices.
    pub classes: Option<String>,
    /// Comma-separated rule ids.
    pub rules: Option<String>,
    pub order_rows: Option<String>,
    pub order_cols: Option<String>,
    /// `category10` (default) or `color-blind`.
    pub palette: Option<Palette>,
    pub instance_lines: Option<bool>,
    pub desaturated_background: Option<bool>,
}

#[derive(Debug, Clone, Copy, Deserialize, Serialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum Palette {
    Category10,
    ColorBlind,
}

#[derive(Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct LocalBody {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instance: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub row: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order_rows: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order_cols: Option<String>,
}

#[derive(Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct WhatIfBody {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instance: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub row: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tree_id: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edits: Option<Vec<FeatureEdit>>,
}

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub addr: SocketAddr,
    pub data_dir: Option<PathBuf>,
    pub cors: bool,
}

pub fn router(store: Arc<Store>, cors: bool) -> Router {
    let app = Router::new()
        .route("/models", post(create_model).get(list_models))
        .route("/models/{id}", get(get_model).delete(delete_model))
        .route("/models/{id}/forest", get(get_forest))
        .route("/models/{id}/rules", get(get_rules))
        .route("/models/{id}/explain/local", post(explain_local))
        .route("/models/{id}/explain/changes", post(explain_changes))
        .route("/models/{id}/whatif", post(whatif))
        .route("/models/{id}/render", get(render))
        .route("/models/{id}/hits", get(hits))
        .layer(DefaultBodyLimit::max(256 * 1024 * 1024))
        .with_state(store);
    if cors {
        app.layer(CorsLayer::permissive())
    } else {
        app
    }
}

/// Binds and serves until Ctrl-C.
pub async fn serve(config: ServerConfig) -> std::io::Result<()> {
    let store = match &config.data_dir {
        Some(dir) => Store::open(dir).map_err(std::io::Error::other)?,
        None => Store::in_memory(),
    };
    let listener = tokio::net::TcpListener::bind(config.addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(Arc::new(store), config.cors))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

fn json<T: Serialize>(status: StatusCode, value: &T) -> Response {
    let body = serde_json::to_vec(value).expect("responses serialise");
    (status, [(header::CONTENT_TYPE, "application/json")], body).into_response()
}

fn parse_body<T: DeserializeOwned>(bytes: &[u8]) -> ApiResult<T> {
    let de = &mut serde_json::Deserializer::from_slice(bytes);
    let value = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        ApiError::bad_request(path, e.into_inner().to_string())
    })?;
    Ok(value)
}

fn parse_query<T: DeserializeOwned + Default>(raw: Option<String>) -> ApiResult<T> {
    let Some(raw) = raw else { return Ok(T::default()) };
    let de = serde_urlencoded::Deserializer::new(form_urlencoded::parse(raw.as_bytes()));
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        ApiError::bad_request(path, e.into_inner().to_string())
    })
}

fn session(store: &Store, id: &str) -> ApiResult<Arc<Session>> {
    store.get(id).ok_or_else(|| ApiError::not_found(id))
}

fn criterion(target: OrderTarget, field: &str, text: Option<&String>) -> ApiResult<Option<OrderCriterion>> {
    text.map(|t| OrderCriterion::parse(target, t).map_err(|e| ApiError::bad_request(field, e.to_string())))
        .transpose()
}

/// Translates query parameters into the model-level query.
pub fn view_query(model: &Model, p: &ViewParams) -> ApiResult<ViewQuery> {
    let classes = p
        .classes
        .as_deref()
        .map(|c| model.class_indices(c))
        .transpose()
        .map_err(|e| ApiError::bad_request("classes", e.to_string()))?;
    let rule_ids = p
        .rules
        .as_deref()
        .map(parse_ids)
        .transpose()
        .map_err(|e| ApiError::bad_request("rules", e.to_string()))?;
    Ok(ViewQuery {
        filter: RuleFilter {
            min_coverage: p.min_coverage,
            min_certainty: p.min_certainty,
            classes,
            rule_ids,
        },
        order_rows: criterion(OrderTarget::Rules, "order-rows", p.order_rows.as_ref())?,
        order_cols: criterion(OrderTarget::Features, "order-cols", p.order_cols.as_ref())?,
    })
}

fn local_query(b: &LocalBody) -> ApiResult<ViewQuery> {
    Ok(ViewQuery {
        filter: RuleFilter::default(),
        order_rows: criterion(OrderTarget::Rules, "order_rows", b.order_rows.as_ref())?,
        order_cols: criterion(OrderTarget::Features, "order_cols", b.order_cols.as_ref())?,
    })
}

fn pick_instance(model: &Model, instance: Option<Vec<f64>>, row: Option<usize>, field: &str) -> ApiResult<Vec<f64>> {
    match (instance, row) {
        (Some(x), None) => Ok(x),
        (None, Some(n)) => Ok(model.row(n)?),
        _ => Err(ApiError::bad_request(field, "give exactly one of instance or row")),
    }
}

async fn create_model(State(store): State<AppState>, body: Bytes) -> ApiResult<Response> {
    let req: CreateModel = parse_body(&body)?;
    let (id, session) = tokio::task::spawn_blocking(move || -> ApiResult<_> {
        let model = match (req.forest, &req.train) {
            (Some(doc), None) => {
                let forest = import_forest(&doc.to_string())?;
                Model::import(forest, &req.dataset_csv, &req.schema)?
            }
            (None, Some(params)) => Model::train(&req.dataset_csv, &req.schema, params)?,
            _ => return Err(ApiError::bad_request("", "give exactly one of forest or train")),
        };
        Ok(store.insert(model, req.schema)?)
    })
    .await
    .map_err(|e| ApiError::internal(e.to_string()))??;
    Ok(json(
        StatusCode::CREATED,
        &ModelCreated {
            model_id: id,
            summary: session.summary.clone(),
        },
    ))
}

#[derive(Serialize)]
struct ModelEntry {
    model_id: String,
    created_at: u64,
}

async fn list_models(State(store): State<AppState>) -> Response {
    let list: Vec<ModelEntry> = store
        .ids()
        .into_iter()
        .map(|(model_id, created_at)| ModelEntry { model_id, created_at })
        .collect();
    json(StatusCode::OK, &list)
}

async fn get_model(State(store): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let s = session(&store, &id)?;
    Ok(json(
        StatusCode::OK,
        &ModelCreated {
            model_id: id,
            summary: s.summary.clone(),
        },
    ))
}

async fn delete_model(State(store): State<AppState>, Path(id): Path<String>) -> ApiResult<StatusCode> {
    if store.remove(&id)? {
        Ok(StatusCode::NO_CONTENT)
    } else {
        Err(ApiError::not_found(&id))
    }
}

async fn get_forest(State(store): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let s = session(&store, &id)?;
    Ok(([(header::CONTENT_TYPE, "application/json")], export_forest(s.model.forest())).into_response())
}

async fn get_rules(State(store): State<AppState>, Path(id): Path<String>, RawQuery(q): RawQuery) -> ApiResult<Response> {
    let s = session(&store, &id)?;
    let p: ViewParams = parse_query(q)?;
    if p.view.is_some_and(|v| v != ViewRequest::Global) {
        return Err(ApiError::bad_request("view", "the rules route serves the global view only"));
    }
    let view = s.model.global(&view_query(&s.model, &p)?)?;
    Ok(json(StatusCode::OK, &view))
}

async fn explain_local(State(store): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult<Response> {
    let s = session(&store, &id)?;
    let b: LocalBody = parse_body(&body)?;
    let q = local_query(&b)?;
    let x = pick_instance(&s.model, b.instance, b.row, "instance")?;
    Ok(json(StatusCode::OK, &s.model.used_rules(&x, &q)?))
}

async fn explain_changes(State(store): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult<Response> {
    let s = session(&store, &id)?;
    let b: LocalBody = parse_body(&body)?;
    let q = local_query(&b)?;
    let x = pick_instance(&s.model, b.instance, b.row, "instance")?;
    Ok(json(StatusCode::OK, &s.model.changes(&x, &q)?))
}

async fn whatif(State(store): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult<Response> {
    let s = session(&store, &id)?;
    let b: WhatIfBody = parse_body(&body)?;
    let x = pick_instance(&s.model, b.instance, b.row, "instance")?;
    let result = match (b.tree_id, b.edits) {
        (Some(k), None) => s.model.whatif_tree(&x, k)?,
        (None, Some(edits)) => s.model.whatif_edits(&x, &edits)?,
        _ => return Err(ApiError::bad_request("tree_id", "give exactly one of tree_id or edits")),
    };
    Ok(json(StatusCode::OK, &result))
}

/// Style selected by the query's palette and toggles.
pub fn style_for(p: &ViewParams) -> RenderStyle {
    let mut style = match p.palette {
        Some(Palette::ColorBlind) => RenderStyle::color_blind_safe(),
        _ => RenderStyle::default(),
    };
    if let Some(v) = p.instance_lines {
        style.show_instance_lines = v;
    }
    if let Some(v) = p.desaturated_background {
        style.desaturated_background = v;
    }
    style
}

fn rendered(store: &Store, id: &str, q: Option<String>) -> ApiResult<pathmatrix::Rendered> {
    let s = session(store, id)?;
    let p: ViewParams = parse_query(q)?;
    let kind = p.view.unwrap_or(ViewRequest::Global);
    let instance = match (&p.instance, p.row) {
        (Some(t), None) => Some(parse_instance(t).map_err(|e| ApiError::bad_request("instance", e.to_string()))?),
        (None, Some(n)) => Some(s.model.row(n)?),
        (None, None) => None,
        _ => return Err(ApiError::bad_request("instance", "give at most one of instance or row")),
    };
    let view = s.model.view(kind, instance.as_deref(), &view_query(&s.model, &p)?)?;
    Ok(s.model.render(&view, &style_for(&p))?)
}

async fn render(State(store): State<AppState>, Path(id): Path<String>, RawQuery(q): RawQuery) -> ApiResult<Response> {
    let out = rendered(&store, &id, q)?;
    Ok(([(header::CONTENT_TYPE, "image/svg+xml")], out.svg).into_response())
}

async fn hits(State(store): State<AppState>, Path(id): Path<String>, RawQuery(q): RawQuery) -> ApiResult<Response> {
    let out = rendered(&store, &id, q)?;
    Ok(json(StatusCode::OK, &out.hits))
}
