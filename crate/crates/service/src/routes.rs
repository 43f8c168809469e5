//! ```text
//! POST   /sessions                 create a screening session from a sheet
//! GET    /sessions/{id}            current session view
//! POST   /sessions/{id}/revise     apply reviewer edits
//! POST   /sessions/{id}/retain     store as a verified case, close session
//! GET    /cases?offset=&limit=     page through the case base
//! GET    /cases/{id}               one case record
//! DELETE /cases/{id}               purge a case
//! GET    /scale                    active scale definition
//! GET    /health                   liveness and build info
//! ```

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::routing::{get, post};
use axum::{Json, Router};
use devscreen_core::casebase::{CaseRecord, RetainOutcome, SCHEMA_VERSION};
use devscreen_core::engine::{Revision, ScreeningSession};
use devscreen_core::scale::{DelayStatus, ResponseSheet, ScaleDefinition};
use serde::{Deserialize, Serialize};

use crate::error::Failure;
use crate::state::AppState;

pub const DEFAULT_PAGE_LIMIT: usize = 50;
pub const MAX_PAGE_LIMIT: usize = 500;

type ApiResult<T> = Result<T, Failure>;

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/revise", post(revise_session))
        .route("/sessions/{id}/retain", post(retain_session))
        .route("/cases", get(list_cases))
        .route("/cases/{id}", get(get_case).delete(delete_case))
        .route("/scale", get(get_scale))
        .route("/health", get(health))
        .fallback(|| async {
            Failure::new(StatusCode::NOT_FOUND, "NotFound", "no such route")
        })
        .method_not_allowed_fallback(|| async {
            Failure::new(
                StatusCode::METHOD_NOT_ALLOWED,
                "MethodNotAllowed",
                "method not allowed on this route",
            )
        })
        .with_state(state)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SessionView {
    #[serde(flatten)]
    pub session: ScreeningSession,
    pub diagnostic_assessment_required: bool,
}

impl From<ScreeningSession> for SessionView {
    fn from(session: ScreeningSession) -> Self {
        SessionView {
            diagnostic_assessment_required: session.needs_diagnostic_assessment(),
            session,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateParams {
    pub k: Option<usize>,
    /// Looked up in the bone-age table when the sheet carries no bone age.
    pub case_ref: Option<String>,
}

async fn create_session(
    State(AppState(state)): State<AppState>,
    params: Result<Query<CreateParams>, QueryRejection>,
    body: Result<Json<ResponseSheet>, JsonRejection>,
) -> ApiResult<(StatusCode, Json<SessionView>)> {
    let Query(params) = params?;
    let Json(mut sheet) = body?;
    if sheet.bone_age_months.is_none() {
        if let (Some(provider), Some(case_ref)) = (&state.bone_age, &params.case_ref) {
            sheet.bone_age_months = provider.lookup(case_ref).months();
        }
    }
    let k = params.k.unwrap_or(state.screener.k);
    let session = {
        let base = state.base.read().await;
        state
            .screener
            .process_with_k(state.next_session_id(), sheet, &base, k)?
    };
    let hits = session.match_ids();
    if !hits.is_empty() {
        state
            .mutate_base(|base| {
                base.record_hits(&hits);
                Ok(())
            })
            .await?;
    }
    state.insert_session(session.clone());
    Ok((StatusCode::CREATED, Json(session.into())))
}

async fn get_session(
    State(AppState(state)): State<AppState>,
    Path(id): Path<String>,
) -> ApiResult<Json<SessionView>> {
    Ok(Json(state.session(&id)?.into()))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReviseBody {
    pub reviser: String,
    #[serde(default)]
    pub solution: Option<String>,
    #[serde(default)]
    pub status_override: Option<DelayStatus>,
}

async fn revise_session(
    State(AppState(state)): State<AppState>,
    Path(id): Path<String>,
    body: Result<Json<ReviseBody>, JsonRejection>,
) -> ApiResult<Json<SessionView>> {
    let Json(body) = body?;
    // existence is checked before body content so unknown ids are always 404
    state.session(&id)?;
    if body.reviser.trim().is_empty() {
        return Err(Failure::new(
            StatusCode::BAD_REQUEST,
            "MissingReviser",
            "reviser must be non-empty",
        ));
    }
    let edits = Revision {
        solution: body.solution,
        status_override: body.status_override,
    };
    let session = state.revise(&id, edits, body.reviser.trim()).await?;
    Ok(Json(session.into()))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RetainResponse {
    pub case_id: String,
    pub outcome: String,
    pub record: CaseRecord,
}

async fn retain_session(
    State(AppState(state)): State<AppState>,
    Path(id): Path<String>,
) -> ApiResult<Json<RetainResponse>> {
    let (outcome, record) = state.retain(&id).await?;
    let outcome = match outcome {
        RetainOutcome::Added => "added",
        RetainOutcome::Merged(_) => "merged",
    };
    Ok(Json(RetainResponse {
        case_id: record.id.clone(),
        outcome: outcome.to_string(),
        record,
    }))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Page {
    #[serde(default)]
    pub offset: usize,
    pub limit: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CaseList {
    pub total: usize,
    pub offset: usize,
    pub limit: usize,
    pub items: Vec<CaseRecord>,
}

async fn list_cases(
    State(AppState(state)): State<AppState>,
    page: Result<Query<Page>, QueryRejection>,
) -> ApiResult<Json<CaseList>> {
    let Query(page) = page?;
    let limit = page.limit.unwrap_or(DEFAULT_PAGE_LIMIT).min(MAX_PAGE_LIMIT);
    let base = state.base.read().await;
    Ok(Json(CaseList {
        total: base.len(),
        offset: page.offset,
        limit,
        items: base.records().skip(page.offset).take(limit).cloned().collect(),
    }))
}

async fn get_case(
    State(AppState(state)): State<AppState>,
    Path(id): Path<String>,
) -> ApiResult<Json<CaseRecord>> {
    let base = state.base.read().await;
    base.get(&id)
        .cloned()
        .map(Json)
        .ok_or_else(|| Failure::case_not_found(&id))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct DeleteResponse {
    pub removed: String,
    pub total: usize,
}

async fn delete_case(
    State(AppState(state)): State<AppState>,
    Path(id): Path<String>,
) -> ApiResult<Json<DeleteResponse>> {
    let total = state
        .mutate_base(|base| {
            let summary = base.purge(&[id.as_str()]);
            if summary.removed.is_empty() {
                return Err(Failure::case_not_found(&id));
            }
            Ok(base.len())
        })
        .await?;
    Ok(Json(DeleteResponse { removed: id, total }))
}

async fn get_scale(State(AppState(state)): State<AppState>) -> Json<ScaleDefinition> {
    Json(state.screener.scale.clone())
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub name: String,
    pub version: String,
    pub schema_version: String,
    pub scale_version: String,
    pub cases: usize,
    pub default_k: usize,
}

async fn health(State(AppState(state)): State<AppState>) -> Json<Health> {
    let cases = state.base.read().await.len();
    Json(Health {
        status: "ok".into(),
        name: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        schema_version: SCHEMA_VERSION.into(),
        scale_version: state.screener.scale.version.clone(),
        cases,
        default_k: state.screener.k,
    })
}
