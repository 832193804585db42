use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{Html, IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use tower_http::services::ServeDir;

use axmc_core::data::SplitSpec;
use axmc_core::measures::validate_specs;
use axmc_core::mobo::ForestParams;
use axmc_core::{
    DataSource, MeasureId, MeasureSpec, PathPoint, ReportSplit, RunBudget, Schema, Session,
    SessionConfig, WeightBox,
};

use crate::error::{ApiError, ApiResult};
use crate::state::{AppState, SessionInfo};

fn parse<T: DeserializeOwned>(body: &[u8]) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| ApiError::from_json(&e))
}

/// A measure given by name (`"mmce"`) or as a full spec object.
#[derive(Deserialize)]
#[serde(untagged)]
enum MeasureArg {
    Name(String),
    Spec(MeasureSpec),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateRequest {
    data: DataSource,
    schema: Schema,
    measures: Vec<MeasureArg>,
    #[serde(default)]
    seed: u64,
    /// Initial design size.
    #[serde(default)]
    m: Option<usize>,
    #[serde(default)]
    weight_box: Option<WeightBox>,
    #[serde(default)]
    split: Option<SplitSpec>,
    #[serde(default)]
    rho: Option<f64>,
    #[serde(default)]
    n_candidates: Option<usize>,
    #[serde(default)]
    forest: Option<ForestParams>,
}

impl CreateRequest {
    /// Check everything that does not need the data, with field-level errors.
    fn into_config(self) -> ApiResult<(DataSource, Schema, SessionConfig)> {
        self.schema
            .validate()
            .map_err(|e| ApiError::invalid("invalid_schema", e.to_string()).field("schema"))?;
        let measures = self
            .measures
            .into_iter()
            .map(|m| match m {
                MeasureArg::Name(n) => n.parse().map(MeasureSpec::new),
                MeasureArg::Spec(s) => Ok(s),
            })
            .collect::<axmc_core::Result<Vec<_>>>()
            .map_err(|e| ApiError::invalid("invalid_measures", e.to_string()).field("measures"))?;
        validate_specs(&measures, self.schema.protected.is_some())
            .map_err(|e| ApiError::invalid("invalid_measures", e.to_string()).field("measures"))?;
        let mut cfg = SessionConfig::new(measures, self.seed);
        if let Some(m) = self.m {
            if m < 4 {
                return Err(ApiError::invalid("invalid_config", "m must be at least 4").field("m"));
            }
            cfg.initial_design = Some(m);
        }
        if let Some(b) = self.weight_box {
            if b.k() != cfg.k() {
                return Err(ApiError::invalid(
                    "infeasible_box",
                    format!(
                        "weight box has {} objectives, session has {}",
                        b.k(),
                        cfg.k()
                    ),
                )
                .field("weight_box"));
            }
            cfg.weight_box = Some(b);
        }
        if let Some(s) = self.split {
            s.validate()
                .map_err(|e| ApiError::invalid("invalid_config", e.to_string()).field("split"))?;
            cfg.split = s;
        }
        if let Some(r) = self.rho {
            cfg.rho = r;
        }
        if let Some(n) = self.n_candidates {
            cfg.n_candidates = n;
        }
        if let Some(f) = self.forest {
            cfg.forest = f;
        }
        Ok((self.data, self.schema, cfg))
    }
}

async fn create(
    State(state): State<AppState>,
    body: Bytes,
) -> ApiResult<(StatusCode, Json<serde_json::Value>)> {
    let req: CreateRequest = parse(&body)?;
    let (source, schema, config) = req.into_config()?;
    let session = tokio::task::spawn_blocking(move || Session::create(source, schema, config))
        .await
        .map_err(|e| ApiError::internal(e.to_string()))??;
    let info = state.insert(session)?;
    Ok((
        StatusCode::CREATED,
        Json(serde_json::json!({ "id": info.summary.id, "status": info.summary.status })),
    ))
}

async fn list(State(state): State<AppState>) -> Json<Vec<SessionInfo>> {
    Json(state.list())
}

async fn status(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> ApiResult<Json<SessionInfo>> {
    Ok(Json(state.info(&id)?))
}

async fn run(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<(StatusCode, Json<SessionInfo>)> {
    let budget: RunBudget = if body.is_empty() {
        RunBudget::Iterations(0)
    } else {
        parse(&body)?
    };
    let mut info = state.start(&id, budget)?;
    info.summary.status = axmc_core::Status::Running;
    Ok((StatusCode::ACCEPTED, Json(info)))
}

async fn pause(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> ApiResult<(StatusCode, Json<SessionInfo>)> {
    Ok((StatusCode::ACCEPTED, Json(state.pause(&id)?)))
}

/// Accepted bodies: `[[l, u], ...]`, `{"bounds": [[l, u], ...]}`, or
/// per-objective keys `{"w1": [l, u], "w3": [l, u]}` with the rest `[0, 1]`.
fn parse_box(v: serde_json::Value, k: usize) -> ApiResult<WeightBox> {
    let invalid = |msg: String| ApiError::invalid("infeasible_box", msg);
    let pairs: Vec<[f64; 2]> = match v {
        serde_json::Value::Array(_) => {
            serde_json::from_value(v).map_err(|e| invalid(e.to_string()))?
        }
        serde_json::Value::Object(mut map) => {
            if let Some(b) = map.remove("bounds") {
                if let Some(extra) = map.keys().next() {
                    return Err(invalid(format!("unexpected key `{extra}` next to bounds"))
                        .field(extra.clone()));
                }
                serde_json::from_value(b).map_err(|e| invalid(e.to_string()).field("bounds"))?
            } else {
                let mut pairs = vec![[0.0, 1.0]; k];
                for (key, val) in map {
                    let i = key
                        .strip_prefix('w')
                        .and_then(|n| n.parse::<usize>().ok())
                        .filter(|&i| (1..=k).contains(&i))
                        .ok_or_else(|| {
                            invalid(format!("unknown weight `{key}` (expected w1..w{k})"))
                                .field(key.clone())
                        })?;
                    pairs[i - 1] = serde_json::from_value(val)
                        .map_err(|e| invalid(e.to_string()).field(key.clone()))?;
                }
                pairs
            }
        }
        _ => return Err(invalid("expected an array of bounds or an object".into())),
    };
    if pairs.len() != k {
        return Err(invalid(format!(
            "weight box has {} objectives, session has {k}",
            pairs.len()
        )));
    }
    WeightBox::new(pairs.into_iter().map(|[l, u]| (l, u)).collect())
        .map_err(|e| invalid(e.to_string()))
}

async fn set_weights(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Json<SessionInfo>> {
    let value: serde_json::Value = parse(&body)?;
    Ok(Json(state.update(&id, |s| {
        let bx = parse_box(value, s.config().k())?;
        Ok(s.set_weight_box(bx)?)
    })?))
}

#[derive(Deserialize)]
struct FrontQuery {
    #[serde(default)]
    split: Option<String>,
    #[serde(default)]
    format: Option<String>,
}

async fn front(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<FrontQuery>,
) -> ApiResult<Response> {
    let split: ReportSplit =
        q.split
            .as_deref()
            .unwrap_or("valid")
            .parse()
            .map_err(|e: axmc_core::Error| {
                ApiError::invalid("invalid_query", e.to_string()).field("split")
            })?;
    let csv = match q.format.as_deref().unwrap_or("json") {
        "json" => false,
        "csv" => true,
        other => {
            return Err(ApiError::invalid(
                "invalid_query",
                format!("unknown format `{other}` (expected json or csv)"),
            )
            .field("format"))
        }
    };
    let session = state.session(&id)?;
    let table = tokio::task::spawn_blocking(move || session.report(split))
        .await
        .map_err(|e| ApiError::internal(e.to_string()))??;
    Ok(if csv {
        ([(header::CONTENT_TYPE, "text/csv")], table.to_csv()?).into_response()
    } else {
        Json(table).into_response()
    })
}

#[derive(Serialize)]
struct PathResponse {
    measures: Vec<MeasureId>,
    points: Vec<PathPoint>,
}

async fn path(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> ApiResult<Json<PathResponse>> {
    let s = state.session(&id)?;
    Ok(Json(PathResponse {
        measures: s.measure_ids(),
        points: s.path(),
    }))
}

const PLACEHOLDER: &str = "<!doctype html><title>axmc</title>\
<p>The steering UI bundle is not installed. Start the server with <code>--ui DIR</code> \
or use the JSON API under <code>/sessions</code>.</p>";

async fn placeholder() -> Html<&'static str> {
    Html(PLACEHOLDER)
}

pub fn router(state: AppState) -> Router {
    let api = Router::new()
        .route("/sessions", post(create).get(list))
        .route("/sessions/{id}", get(status))
        .route("/sessions/{id}/run", post(run))
        .route("/sessions/{id}/pause", post(pause))
        .route("/sessions/{id}/front", get(front))
        .route("/sessions/{id}/path", get(path))
        .route("/sessions/{id}/weights", axum::routing::patch(set_weights));
    let app = match state.ui_dir() {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.route("/", get(placeholder)),
    };
    app.with_state(state)
}
