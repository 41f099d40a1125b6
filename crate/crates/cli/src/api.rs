//! HTTP/JSON API over a [`Workbench`].

use std::sync::Arc;
use std::time::Duration;

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{FromRequest, FromRequestParts, Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use serde::{Deserialize, Serialize};

use glassbox::charts::{accuracy_chart, heatmap_chart, importance_chart, ranking_chart};
use glassbox::evaluation::Normalize;
use glassbox::explanation::global_rf_importance;
use glassbox::schemas;
use glassbox::service::{parse_hypothesis, ExplainRequest, GridRequest, HypothesisRequest, IngestRequest, ViewKind, ViewRequest};
use glassbox::{Error, PipelineConfig, PipelineStatus, Provenance, Workbench};

use crate::errors::{http_status, ErrorBody};

/// Longest a `?wait=true` request blocks on its job.
const WAIT_LIMIT: Duration = Duration::from_secs(600);

pub struct ApiError {
    status: StatusCode,
    body: ErrorBody,
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        Self {
            status: StatusCode::from_u16(http_status(&e)).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR),
            body: ErrorBody::from(&e),
        }
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        let status = r.status();
        let kind = if status == StatusCode::UNPROCESSABLE_ENTITY { "validation" } else { "bad_request" };
        Self {
            status,
            body: ErrorBody::new(kind, r.body_text()),
        }
    }
}

impl From<QueryRejection> for ApiError {
    fn from(r: QueryRejection) -> Self {
        Self {
            status: StatusCode::UNPROCESSABLE_ENTITY,
            body: ErrorBody::new("validation", r.body_text()),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, axum::Json(self.body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

#[derive(FromRequest)]
#[from_request(via(axum::Json), rejection(ApiError))]
struct Json<T>(T);

impl<T: Serialize> IntoResponse for Json<T> {
    fn into_response(self) -> Response {
        axum::Json(self.0).into_response()
    }
}

#[derive(FromRequestParts)]
#[from_request(via(axum::extract::Query), rejection(ApiError))]
struct Query<T>(T);

/// Runs engine work off the async executor.
async fn blocking<T, F>(f: F) -> ApiResult<T>
where
    T: Send + 'static,
    F: FnOnce() -> glassbox::Result<T> + Send + 'static,
{
    match tokio::task::spawn_blocking(f).await {
        Ok(r) => r.map_err(ApiError::from),
        Err(_) => Err(ApiError {
            status: StatusCode::INTERNAL_SERVER_ERROR,
            body: ErrorBody::new("panic", "request handler panicked"),
        }),
    }
}

fn split_list(s: &str) -> Vec<String> {
    s.split(',').map(str::trim).filter(|x| !x.is_empty()).map(String::from).collect()
}

type Shared = Arc<Workbench>;

pub fn router(workbench: Shared) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/schemas/{name}", get(schema))
        .route("/datasets", get(list_datasets).post(create_dataset))
        .route("/datasets/{name}", get(get_dataset))
        .route("/pipelines", get(list_pipelines).post(create_pipeline))
        .route("/pipelines/{id}", get(get_pipeline))
        .route("/pipelines/{id}/train", post(train_pipeline))
        .route("/pipelines/{id}/report", get(get_report))
        .route("/pipelines/{id}/heatmap", get(get_heatmap))
        .route("/pipelines/{id}/ranking", get(get_ranking))
        .route("/pipelines/{id}/importance", get(get_importance))
        .route("/charts/accuracy", get(get_accuracy))
        .route("/gridsearch", post(create_gridsearch))
        .route("/gridsearch/{id}", get(get_gridsearch))
        .route("/views/{kind}", get(get_view))
        .route("/explanations/local", post(create_explanation))
        .route("/explanations/{id}", get(get_explanation))
        .route("/hypothesis", get(get_hypothesis))
        .route("/jobs/{id}", get(get_job))
        .with_state(workbench)
}

async fn health() -> impl IntoResponse {
    axum::Json(serde_json::json!({ "status": "ok" }))
}

async fn schema(Path(name): Path<String>) -> ApiResult<Response> {
    let name = name.strip_suffix(".schema.json").or(name.strip_suffix(".json")).unwrap_or(&name);
    let text = schemas::schema(name).ok_or_else(|| Error::NotFound(format!("schema `{name}`")))?;
    Ok(([(header::CONTENT_TYPE, "application/schema+json")], text).into_response())
}

async fn list_datasets(State(wb): State<Shared>) -> ApiResult<impl IntoResponse> {
    Ok(Json(blocking(move || wb.datasets()).await?))
}

async fn create_dataset(State(wb): State<Shared>, Json(req): Json<IngestRequest>) -> ApiResult<impl IntoResponse> {
    let rec = blocking(move || wb.ingest(&req)).await?;
    Ok((StatusCode::CREATED, Json(rec)))
}

async fn get_dataset(State(wb): State<Shared>, Path(name): Path<String>) -> ApiResult<impl IntoResponse> {
    Ok(Json(blocking(move || wb.store().dataset_record(&name)).await?))
}

async fn list_pipelines(State(wb): State<Shared>) -> ApiResult<impl IntoResponse> {
    Ok(Json(blocking(move || wb.pipelines()).await?))
}

async fn create_pipeline(State(wb): State<Shared>, Json(config): Json<PipelineConfig>) -> ApiResult<impl IntoResponse> {
    let rec = blocking(move || wb.create_pipeline(&config)).await?;
    let location = format!("/pipelines/{}", rec.id);
    Ok((StatusCode::CREATED, [(header::LOCATION, location)], Json(rec)))
}

async fn get_pipeline(State(wb): State<Shared>, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    Ok(Json(blocking(move || wb.pipeline_record(&id)).await?))
}

#[derive(Deserialize)]
struct WaitQuery {
    #[serde(default)]
    wait: bool,
}

async fn train_pipeline(
    State(wb): State<Shared>,
    Path(id): Path<String>,
    Query(q): Query<WaitQuery>,
) -> ApiResult<impl IntoResponse> {
    let job = blocking(move || {
        let job = wb.submit_train(&id)?;
        Ok(if q.wait { wb.jobs().wait(&job.id, WAIT_LIMIT).unwrap_or(job) } else { job })
    })
    .await?;
    let status = if job.state.is_terminal() { StatusCode::OK } else { StatusCode::ACCEPTED };
    Ok((status, Json(job)))
}

async fn get_report(State(wb): State<Shared>, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    Ok(Json(blocking(move || wb.report(&id)).await?))
}

#[derive(Deserialize)]
struct HeatmapQuery {
    #[serde(default = "cv")]
    source: Provenance,
    #[serde(default)]
    normalize: Normalize,
}

fn cv() -> Provenance {
    Provenance::Cv
}

async fn get_heatmap(
    State(wb): State<Shared>,
    Path(id): Path<String>,
    Query(q): Query<HeatmapQuery>,
) -> ApiResult<impl IntoResponse> {
    let report = blocking(move || wb.report(&id)).await?;
    Ok(Json(heatmap_chart(&report, q.source, q.normalize)))
}

#[derive(Deserialize)]
struct RankingQuery {
    class_a: String,
    class_b: String,
    #[serde(default)]
    k: Option<usize>,
}

async fn get_ranking(
    State(wb): State<Shared>,
    Path(id): Path<String>,
    Query(q): Query<RankingQuery>,
) -> ApiResult<impl IntoResponse> {
    let ranking = blocking(move || wb.global_ranking(&id, &q.class_a, &q.class_b, q.k)).await?;
    Ok(Json(ranking_chart(&ranking)))
}

#[derive(Deserialize)]
struct TopQuery {
    #[serde(default)]
    k: Option<usize>,
}

async fn get_importance(
    State(wb): State<Shared>,
    Path(id): Path<String>,
    Query(q): Query<TopQuery>,
) -> ApiResult<impl IntoResponse> {
    let chart = blocking(move || {
        let p = wb.pipeline(&id)?;
        let imp = global_rf_importance(&p)?;
        Ok(importance_chart(&p.id, &p.name, &imp, q.k.unwrap_or(wb.config().top_k)))
    })
    .await?;
    Ok(Json(chart))
}

#[derive(Deserialize)]
struct PipelinesQuery {
    #[serde(default)]
    pipelines: Option<String>,
}

async fn get_accuracy(State(wb): State<Shared>, Query(q): Query<PipelinesQuery>) -> ApiResult<impl IntoResponse> {
    let chart = blocking(move || {
        let ids = match q.pipelines.as_deref() {
            Some(list) => split_list(list),
            None => wb
                .pipelines()?
                .into_iter()
                .filter(|r| r.status == PipelineStatus::Ready)
                .map(|r| r.id)
                .collect(),
        };
        let reports = ids.iter().map(|id| wb.report(id)).collect::<glassbox::Result<Vec<_>>>()?;
        Ok(accuracy_chart(&reports.iter().collect::<Vec<_>>()))
    })
    .await?;
    Ok(Json(chart))
}

async fn create_gridsearch(
    State(wb): State<Shared>,
    Query(q): Query<WaitQuery>,
    Json(req): Json<GridRequest>,
) -> ApiResult<impl IntoResponse> {
    let job = blocking(move || {
        wb.store().dataset_record(&req.dataset)?;
        let job = wb.submit_gridsearch(req);
        Ok(if q.wait { wb.jobs().wait(&job.id, WAIT_LIMIT).unwrap_or(job) } else { job })
    })
    .await?;
    let status = if job.state.is_terminal() { StatusCode::OK } else { StatusCode::ACCEPTED };
    Ok((status, Json(job)))
}

async fn get_gridsearch(State(wb): State<Shared>, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    Ok(Json(blocking(move || wb.grid(&id)).await?))
}

#[derive(Deserialize)]
struct ViewQuery {
    pipelines: String,
    #[serde(default)]
    dataset: Option<String>,
}

async fn get_view(
    State(wb): State<Shared>,
    Path(kind): Path<String>,
    Query(q): Query<ViewQuery>,
) -> ApiResult<impl IntoResponse> {
    let view: ViewKind = kind.parse()?;
    let req = ViewRequest {
        view,
        pipelines: split_list(&q.pipelines),
        dataset: q.dataset,
    };
    Ok(Json(blocking(move || wb.view(&req)).await?))
}

async fn create_explanation(State(wb): State<Shared>, Json(req): Json<ExplainRequest>) -> ApiResult<impl IntoResponse> {
    Ok(Json(blocking(move || wb.explain(&req)).await?))
}

async fn get_explanation(State(wb): State<Shared>, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    Ok(Json(blocking(move || wb.stored_explanation(&id)).await?))
}

#[derive(Deserialize)]
struct HypothesisQuery {
    #[serde(default)]
    pipeline: Option<String>,
    #[serde(default)]
    dataset: Option<String>,
    /// Comma-separated `LABEL:increase|decrease:BASELINE:COMPARISON` items.
    #[serde(default)]
    spec: Option<String>,
    #[serde(default)]
    source: Option<Provenance>,
}

async fn get_hypothesis(State(wb): State<Shared>, Query(q): Query<HypothesisQuery>) -> ApiResult<impl IntoResponse> {
    let specs = q
        .spec
        .as_deref()
        .map(split_list)
        .unwrap_or_default()
        .iter()
        .map(|s| parse_hypothesis(s))
        .collect::<glassbox::Result<Vec<_>>>()?;
    let value = blocking(move || match (q.pipeline, q.dataset) {
        (Some(pipeline), dataset) => to_value(wb.hypothesis(&HypothesisRequest {
            pipeline,
            dataset,
            specs,
            source: q.source.unwrap_or(Provenance::Heldout),
        })?),
        (None, Some(dataset)) => to_value(wb.gold_hypothesis(&dataset, &specs)?),
        (None, None) => Err(Error::Validation(vec![glassbox::FieldError::new(
            "pipeline",
            "give a pipeline, or a labeled dataset for a gold-label verdict",
        )])),
    })
    .await?;
    Ok(Json(value))
}

fn to_value<T: Serialize>(v: T) -> glassbox::Result<serde_json::Value> {
    Ok(serde_json::to_value(v)?)
}

async fn get_job(State(wb): State<Shared>, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    Ok(Json(wb.job(&id)?))
}

/// Binds and serves until ctrl-c.
pub async fn serve(workbench: Shared, host: &str, port: u16) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind((host, port)).await?;
    log::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(workbench))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

