//! Read-only JSON API over an immutable dataset snapshot and a registry of
//! trained models loaded at startup.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;
use std::sync::Arc;

use axum::extract::{Query, State};
use axum::http::{header, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use rentyield::evaluation::rank_with_model;
use rentyield::finance::{compute_yield_index, export_geojson};
use rentyield::ingest::{dataset_stats, load_dataset, StatsOptions};
use rentyield::model::TrainedModel;
use rentyield::text::normalize_name;
use rentyield::{FinancingTerms, Listing, Operation, SizeBucket};
use serde::Serialize;
use serde_json::{json, Map, Value};
use tower_http::cors::{Any, CorsLayer};

pub const DEFAULT_PAGE_SIZE: usize = 50;
pub const MAX_PAGE_SIZE: usize = 500;

#[derive(Debug)]
pub struct ServiceState {
    pub listings: Vec<Listing>,
    pub boundaries: Option<Value>,
    pub models: BTreeMap<String, TrainedModel>,
    pub defaults: FinancingTerms,
}

impl ServiceState {
    pub fn new(listings: Vec<Listing>, boundaries: Option<Value>, models: BTreeMap<String, TrainedModel>) -> Self {
        ServiceState {
            listings,
            boundaries,
            models,
            defaults: FinancingTerms::default(),
        }
    }

    /// Loads the dataset, optional boundaries, and every `*.json` artifact in
    /// `models_dir` keyed by file stem.
    pub fn load(dataset: &Path, boundaries: Option<&Path>, models_dir: Option<&Path>) -> Result<Self, String> {
        let listings = load_dataset(dataset).map_err(|e| format!("{}: {e}", dataset.display()))?;
        let boundaries = match boundaries {
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?;
                Some(serde_json::from_str(&text).map_err(|e| format!("{}: {e}", p.display()))?)
            }
            None => None,
        };
        let mut models = BTreeMap::new();
        if let Some(dir) = models_dir {
            let entries = fs::read_dir(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
            for entry in entries {
                let path = entry.map_err(|e| e.to_string())?.path();
                if path.extension().and_then(|e| e.to_str()) != Some("json") {
                    continue;
                }
                let id = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
                let model = TrainedModel::load(&path).map_err(|e| format!("{}: {e}", path.display()))?;
                models.insert(id, model);
            }
        }
        Ok(ServiceState::new(listings, boundaries, models))
    }
}

pub fn router(state: ServiceState) -> Router {
    let cors = CorsLayer::new()
        .allow_origin(Any)
        .allow_methods([Method::GET, Method::POST])
        .allow_headers([header::CONTENT_TYPE]);
    Router::new()
        .route("/api/health", get(health))
        .route("/api/stats", get(stats))
        .route("/api/index", get(index))
        .route("/api/index.geojson", get(index_geojson))
        .route("/api/listings", get(listings))
        .route("/api/models", get(models))
        .route("/api/predict", post(predict))
        .route("/api/yield/ranking", get(ranking))
        .fallback(not_found)
        .layer(cors)
        .with_state(Arc::new(state))
}

type AppState = State<Arc<ServiceState>>;
type Params = Query<HashMap<String, String>>;

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
        }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, "invalid_parameter", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "code": self.code, "message": self.message }))).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

async fn not_found() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such route")
}

fn param<T: std::str::FromStr>(q: &HashMap<String, String>, key: &str) -> Result<Option<T>, ApiError> {
    match q.get(key) {
        None => Ok(None),
        Some(raw) => raw
            .trim()
            .parse::<T>()
            .map(Some)
            .map_err(|_| ApiError::bad_request(format!("`{key}` has invalid value `{raw}`"))),
    }
}

/// Mortgage parameters from `rate`, `term`, `tcost` and `down`, each
/// defaulting to the service's defaults.
fn financing(q: &HashMap<String, String>, d: &FinancingTerms) -> Result<FinancingTerms, ApiError> {
    FinancingTerms::new(
        param(q, "tcost")?.unwrap_or(d.transaction_cost_rate),
        param(q, "down")?.unwrap_or(d.down_payment_fraction),
        param(q, "rate")?.unwrap_or(d.monthly_rate),
        param(q, "term")?.unwrap_or(d.months),
    )
    .map_err(|e| ApiError::bad_request(e.to_string()))
}

async fn health(State(s): AppState) -> Json<Value> {
    Json(json!({
        "status": "ok",
        "listings": s.listings.len(),
        "models": s.models.keys().collect::<Vec<_>>(),
        "boundaries": s.boundaries.is_some(),
    }))
}

async fn stats(State(s): AppState, Query(q): Params) -> ApiResult<Value> {
    let d = StatsOptions::default();
    let opts = StatsOptions {
        rent_price_bin: param(&q, "rent_bin")?.unwrap_or(d.rent_price_bin),
        sale_price_bin: param(&q, "sale_bin")?.unwrap_or(d.sale_price_bin),
        size_bin: param(&q, "size_bin")?.unwrap_or(d.size_bin),
    };
    let stats = dataset_stats(&s.listings, &opts)
        .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "empty_dataset", e.to_string()))?;
    Ok(Json(serde_json::to_value(stats).expect("stats serialize")))
}

async fn index(State(s): AppState, Query(q): Params) -> ApiResult<Value> {
    let fin = financing(&q, &s.defaults)?;
    Ok(Json(json!(compute_yield_index(&s.listings, &fin))))
}

async fn index_geojson(State(s): AppState, Query(q): Params) -> ApiResult<Value> {
    let fin = financing(&q, &s.defaults)?;
    let boundaries = s
        .boundaries
        .as_ref()
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "no_boundaries", "no boundary GeoJSON loaded"))?;
    let cells = compute_yield_index(&s.listings, &fin);
    export_geojson(&cells, boundaries)
        .map(Json)
        .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "unknown_neighborhood", e.to_string()))
}

#[derive(Serialize)]
struct Page<'a> {
    total: usize,
    page: usize,
    page_size: usize,
    items: Vec<&'a Listing>,
}

async fn listings(State(s): AppState, Query(q): Params) -> Result<Response, ApiError> {
    let operation: Option<Operation> = param(&q, "operation")?;
    let bucket: Option<SizeBucket> = param(&q, "bucket")?;
    let hood = q.get("neighborhood").map(|n| normalize_name(n));
    let page: usize = param(&q, "page")?.unwrap_or(1);
    let page_size: usize = param(&q, "page_size")?.unwrap_or(DEFAULT_PAGE_SIZE);
    if page == 0 || page_size == 0 || page_size > MAX_PAGE_SIZE {
        return Err(ApiError::bad_request(format!(
            "page must be >= 1 and page_size in 1..={MAX_PAGE_SIZE}"
        )));
    }
    let matching: Vec<&Listing> = s
        .listings
        .iter()
        .filter(|l| operation.is_none_or(|op| l.operation == op))
        .filter(|l| bucket.is_none_or(|b| SizeBucket::of(l.size) == Some(b)))
        .filter(|l| hood.as_ref().is_none_or(|h| normalize_name(&l.neighborhood) == *h))
        .collect();
    let items = matching.iter().skip((page - 1) * page_size).take(page_size).copied().collect();
    Ok(Json(Page {
        total: matching.len(),
        page,
        page_size,
        items,
    })
    .into_response())
}

async fn models(State(s): AppState) -> Json<Value> {
    let list: Vec<Value> = s
        .models
        .iter()
        .map(|(id, m)| {
            json!({
                "id": id,
                "kind": m.kind(),
                "spec": m.spec,
                "features": m.feature_names,
                "seed": m.provenance.seed,
            })
        })
        .collect();
    Json(json!(list))
}

fn model<'a>(s: &'a ServiceState, id: Option<&str>) -> Result<(&'a str, &'a TrainedModel), ApiError> {
    let id = id.ok_or_else(|| ApiError::bad_request("`model` is required"))?;
    s.models
        .get_key_value(id)
        .map(|(k, m)| (k.as_str(), m))
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "unknown_model", format!("no model `{id}`")))
}

/// Fields a prediction request may omit; they do not enter any model spec.
fn listing_defaults() -> Map<String, Value> {
    let v = json!({
        "id": "request",
        "operation": "sale",
        "price": 1.0,
        "photos": 0,
        "propertyType": "other",
        "status": "unknown",
        "bathrooms": 0,
        "rooms": 0,
        "latitude": 40.4167,
        "longitude": -3.70325,
        "neighborhood": "",
    });
    match v {
        Value::Object(m) => m,
        _ => unreachable!(),
    }
}

async fn predict(State(s): AppState, body: Result<Json<Value>, axum::extract::rejection::JsonRejection>) -> ApiResult<Value> {
    let Json(body) = body.map_err(|e| ApiError::bad_request(e.body_text()))?;
    let (id, m) = model(&s, body.get("model").and_then(Value::as_str))?;
    let given = body
        .get("listing")
        .and_then(Value::as_object)
        .ok_or_else(|| ApiError::bad_request("`listing` must be an object"))?;
    let mut merged = listing_defaults();
    merged.extend(given.iter().map(|(k, v)| (k.clone(), v.clone())));
    let listing: Listing = serde_json::from_value(Value::Object(merged))
        .map_err(|e| ApiError::bad_request(format!("invalid listing: {e}")))?;
    let listing = listing.validate().map_err(|e| ApiError::bad_request(e.to_string()))?;
    let rent = m.predict_listing(&listing).map_err(|e| {
        let field = match &e {
            rentyield::features::EncodeError::MissingFeature(f) => *f,
            _ => "",
        };
        ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            "missing_feature",
            format!("listing lacks `{field}` required by model `{id}` ({})", m.spec),
        )
    })?;
    Ok(Json(json!({
        "model": id,
        "spec": m.spec,
        "predicted_rent": rent,
    })))
}

async fn ranking(State(s): AppState, Query(q): Params) -> ApiResult<Value> {
    let (id, m) = model(&s, q.get("model").map(String::as_str))?;
    let fin = financing(&q, &s.defaults)?;
    let limit: Option<usize> = param(&q, "limit")?;
    let mut r = rank_with_model(&s.listings, m, &fin)
        .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "no_scorable_listings", e.to_string()))?;
    let total = r.ranked.len();
    if let Some(limit) = limit {
        r.ranked.truncate(limit);
    }
    Ok(Json(json!({
        "model": id,
        "total": total,
        "ranked": r.ranked,
        "skipped": r.skipped,
    })))
}
