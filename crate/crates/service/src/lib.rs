//! HTTP API over a directory of annotation files.
//!
//! Each `*.json` file in the dataset root holds one sequence. Reads are
//! served from immutable snapshots; a mutation takes the sequence's write
//! lock, applies one annotator operation, persists the file atomically and
//! only then swaps in the new snapshot with a bumped revision.
//!
//! Mutating requests may carry the `revision` the client last saw. A
//! mismatch is rejected with 409 so that two annotators on the same video
//! never overwrite each other blindly.

use std::collections::BTreeMap;
use std::future::Future;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use axum::extract::rejection::{JsonRejection, PathRejection};
use axum::extract::{Path as UrlPath, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{delete, get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::net::TcpListener;
use tokio::sync::Mutex;

use rmot::annotator::{create_expression, propagate, retract, ClickPair};
use rmot::data_model::{annotation_files, load_annotation, save_annotation, SequenceAnnotation};
use rmot::{AnnotateError, BBox, DataError};

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("sequence {id} appears in both {first} and {second}")]
    DuplicateSequence { id: String, first: PathBuf, second: PathBuf },
    #[error("cannot bind {addr}: {source}")]
    Bind {
        addr: String,
        #[source]
        source: std::io::Error,
    },
    #[error("server failed: {0}")]
    Serve(#[source] std::io::Error),
}

/// An annotation together with the number of mutations applied since load.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub annotation: SequenceAnnotation,
    pub revision: u64,
}

struct Entry {
    path: PathBuf,
    write: Mutex<()>,
    current: RwLock<Arc<Snapshot>>,
}

impl Entry {
    fn snapshot(&self) -> Arc<Snapshot> {
        self.current.read().unwrap_or_else(|e| e.into_inner()).clone()
    }
}

/// Loaded sequences keyed by id.
pub struct Dataset {
    root: PathBuf,
    entries: BTreeMap<String, Entry>,
}

impl Dataset {
    /// Load every annotation file directly inside `root`.
    pub fn load(root: impl AsRef<Path>) -> Result<Self, ServiceError> {
        let root = root.as_ref().to_path_buf();
        let mut entries: BTreeMap<String, Entry> = BTreeMap::new();
        for path in annotation_files(&root)? {
            let annotation = load_annotation(&path)?;
            let id = annotation.sequence_id.clone();
            if let Some(prev) = entries.get(&id) {
                return Err(ServiceError::DuplicateSequence { id, first: prev.path.clone(), second: path });
            }
            let snap = Arc::new(Snapshot { annotation, revision: 0 });
            entries.insert(id, Entry { path, write: Mutex::new(()), current: RwLock::new(snap) });
        }
        Ok(Dataset { root, entries })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Current snapshot of one sequence.
    pub fn snapshot(&self, sequence_id: &str) -> Option<Arc<Snapshot>> {
        self.entries.get(sequence_id).map(Entry::snapshot)
    }

    /// File backing one sequence.
    pub fn path_of(&self, sequence_id: &str) -> Option<&Path> {
        self.entries.get(sequence_id).map(|e| e.path.as_path())
    }

    /// Run one mutation under the sequence's write lock. The new annotation
    /// is written to disk before it becomes visible to readers.
    async fn mutate<T>(
        &self,
        sequence_id: &str,
        expected: Option<u64>,
        op: impl FnOnce(&SequenceAnnotation) -> Result<(SequenceAnnotation, T), ApiError>,
    ) -> Result<(T, u64), ApiError> {
        let entry = self.entries.get(sequence_id).ok_or_else(|| ApiError::unknown_sequence(sequence_id))?;
        let _guard = entry.write.lock().await;
        let base = entry.snapshot();
        if let Some(rev) = expected {
            if rev != base.revision {
                return Err(ApiError::new(
                    StatusCode::CONFLICT,
                    "stale_revision",
                    format!("revision {rev} is stale, current is {}", base.revision),
                )
                .field("revision"));
            }
        }
        let (next, out) = op(&base.annotation)?;
        let path = entry.path.clone();
        let to_save = next.clone();
        tokio::task::spawn_blocking(move || save_annotation(&to_save, &path))
            .await
            .map_err(|e| ApiError::persist(e.to_string()))?
            .map_err(|e| ApiError::persist(e.to_string()))?;
        let revision = base.revision + 1;
        *entry.current.write().unwrap_or_else(|e| e.into_inner()) =
            Arc::new(Snapshot { annotation: next, revision });
        Ok((out, revision))
    }
}

/// JSON error body `{code, message, field?}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub field: Option<String>,
}

#[derive(Debug, Clone)]
pub struct ApiError {
    pub status: StatusCode,
    pub body: ErrorBody,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        ApiError { status, body: ErrorBody { code: code.into(), message: message.into(), field: None } }
    }

    fn field(mut self, field: &str) -> Self {
        self.body.field = Some(field.into());
        self
    }

    fn unknown_sequence(id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "unknown_sequence", format!("no sequence {id}"))
    }

    fn persist(message: String) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "persist_failed", message)
    }
}

impl From<AnnotateError> for ApiError {
    fn from(e: AnnotateError) -> Self {
        let (status, field) = match &e {
            AnnotateError::EmptyText => (StatusCode::BAD_REQUEST, Some("text")),
            AnnotateError::UnknownExpression(_) => (StatusCode::UNPROCESSABLE_ENTITY, Some("expression_id")),
            AnnotateError::UnknownObject(_) => (StatusCode::UNPROCESSABLE_ENTITY, Some("object_id")),
            AnnotateError::InvalidRange { .. } => (StatusCode::UNPROCESSABLE_ENTITY, Some("end")),
            // the handler knows which of the two clicks missed
            AnnotateError::ClickRejected { .. } => (StatusCode::UNPROCESSABLE_ENTITY, None),
            AnnotateError::NoInterval { .. } => (StatusCode::UNPROCESSABLE_ENTITY, Some("frame")),
        };
        let mut out = ApiError::new(status, e.code(), e.to_string());
        out.body.field = field.map(String::from);
        out
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, "invalid_body", e.body_text())
    }
}

impl From<PathRejection> for ApiError {
    fn from(e: PathRejection) -> Self {
        ApiError::new(StatusCode::NOT_FOUND, "invalid_path", e.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpressionSummary {
    pub expression_id: u32,
    pub text: String,
    pub referent_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceSummary {
    pub sequence_id: String,
    pub frame_count: u32,
    pub frame_w: u32,
    pub frame_h: u32,
    pub revision: u64,
    pub expressions: Vec<ExpressionSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameBox {
    pub object_id: u32,
    #[serde(rename = "box")]
    pub bbox: BBox,
    pub categories: Vec<String>,
    /// Expressions for which this object is a referent at this frame.
    pub referent_of: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameView {
    pub sequence_id: String,
    pub frame: u32,
    pub revision: u64,
    pub boxes: Vec<FrameBox>,
    /// Referent object ids per expression id, including empty lists.
    pub referents: BTreeMap<u32, Vec<u32>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewExpression {
    pub text: String,
    #[serde(default)]
    pub revision: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreatedExpression {
    pub expression_id: u32,
    pub revision: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClickRequest {
    pub expression_id: u32,
    pub object_id: u32,
    pub start: u32,
    pub end: u32,
    #[serde(default)]
    pub revision: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetractRequest {
    pub object_id: u32,
    pub frame: u32,
    #[serde(default)]
    pub revision: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interval {
    pub object_id: u32,
    pub start: u32,
    pub end: u32,
}

/// Intervals of one expression after a mutation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalsView {
    pub expression_id: u32,
    pub intervals: Vec<Interval>,
    pub revision: u64,
}

/// Routes over a shared dataset.
pub fn router(dataset: Arc<Dataset>) -> Router {
    Router::new()
        .route("/sequences", get(list_sequences))
        .route("/sequences/{id}/frames/{frame}", get(get_frame))
        .route("/sequences/{id}/expressions", post(post_expression))
        .route("/sequences/{id}/clicks", post(post_click))
        .route("/sequences/{id}/expressions/{eid}/referents", delete(delete_referent))
        .with_state(dataset)
}

async fn list_sequences(State(ds): State<Arc<Dataset>>) -> Json<Vec<SequenceSummary>> {
    let out = ds
        .entries
        .values()
        .map(|entry| {
            let snap = entry.snapshot();
            let a = &snap.annotation;
            SequenceSummary {
                sequence_id: a.sequence_id.clone(),
                frame_count: a.frame_count,
                frame_w: a.frame_w,
                frame_h: a.frame_h,
                revision: snap.revision,
                expressions: a
                    .expressions
                    .iter()
                    .map(|e| ExpressionSummary {
                        expression_id: e.id,
                        text: e.text.clone(),
                        referent_count: e.referent_objects().len(),
                    })
                    .collect(),
            }
        })
        .collect();
    Json(out)
}

async fn get_frame(
    State(ds): State<Arc<Dataset>>,
    path: Result<UrlPath<(String, u32)>, PathRejection>,
) -> Result<Json<FrameView>, ApiError> {
    let UrlPath((id, frame)) = path?;
    let snap = ds.snapshot(&id).ok_or_else(|| ApiError::unknown_sequence(&id))?;
    let a = &snap.annotation;
    if frame >= a.frame_count {
        return Err(ApiError::new(
            StatusCode::NOT_FOUND,
            "unknown_frame",
            format!("frame {frame} outside 0..{}", a.frame_count),
        ));
    }
    let mut referents: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
    for e in &a.expressions {
        let mut ids: Vec<u32> = e
            .referents
            .iter()
            .filter(|r| r.contains(frame) && a.object(r.object_id).is_some_and(|o| o.visible_at(frame)))
            .map(|r| r.object_id)
            .collect();
        ids.sort_unstable();
        ids.dedup();
        referents.insert(e.id, ids);
    }
    let boxes = a
        .visible_at(frame)
        .map(|(obj, b)| FrameBox {
            object_id: obj.id,
            bbox: *b,
            categories: vec![obj.category.clone()],
            referent_of: referents
                .iter()
                .filter(|(_, ids)| ids.binary_search(&obj.id).is_ok())
                .map(|(eid, _)| *eid)
                .collect(),
        })
        .collect();
    Ok(Json(FrameView { sequence_id: id, frame, revision: snap.revision, boxes, referents }))
}

async fn post_expression(
    State(ds): State<Arc<Dataset>>,
    UrlPath(id): UrlPath<String>,
    body: Result<Json<NewExpression>, JsonRejection>,
) -> Result<(StatusCode, Json<CreatedExpression>), ApiError> {
    let Json(req) = body?;
    let (expression_id, revision) =
        ds.mutate(&id, req.revision, |a| create_expression(a, &req.text).map_err(ApiError::from)).await?;
    Ok((StatusCode::CREATED, Json(CreatedExpression { expression_id, revision })))
}

async fn post_click(
    State(ds): State<Arc<Dataset>>,
    UrlPath(id): UrlPath<String>,
    body: Result<Json<ClickRequest>, JsonRejection>,
) -> Result<Json<IntervalsView>, ApiError> {
    let Json(req) = body?;
    let click = ClickPair {
        expression_id: req.expression_id,
        object_id: req.object_id,
        start_frame: req.start,
        end_frame: req.end,
    };
    let (intervals, revision) = ds
        .mutate(&id, req.revision, |a| {
            let next = propagate(a, &click).map_err(|e| match e {
                AnnotateError::ClickRejected { frame, .. } => {
                    ApiError::from(e).field(if frame == click.start_frame { "start" } else { "end" })
                }
                other => other.into(),
            })?;
            let iv = intervals_of(&next, click.expression_id);
            Ok((next, iv))
        })
        .await?;
    Ok(Json(IntervalsView { expression_id: req.expression_id, intervals, revision }))
}

async fn delete_referent(
    State(ds): State<Arc<Dataset>>,
    path: Result<UrlPath<(String, u32)>, PathRejection>,
    body: Result<Json<RetractRequest>, JsonRejection>,
) -> Result<Json<IntervalsView>, ApiError> {
    let UrlPath((id, eid)) = path?;
    let Json(req) = body?;
    let (intervals, revision) = ds
        .mutate(&id, req.revision, |a| {
            if a.expression(eid).is_none() {
                return Err(ApiError::new(
                    StatusCode::NOT_FOUND,
                    "unknown_expression",
                    format!("no expression {eid}"),
                ));
            }
            let next = retract(a, eid, req.object_id, req.frame)?;
            let iv = intervals_of(&next, eid);
            Ok((next, iv))
        })
        .await?;
    Ok(Json(IntervalsView { expression_id: eid, intervals, revision }))
}

fn intervals_of(a: &SequenceAnnotation, eid: u32) -> Vec<Interval> {
    a.expression(eid)
        .map(|e| {
            e.referents.iter().map(|r| Interval { object_id: r.object_id, start: r.start, end: r.end }).collect()
        })
        .unwrap_or_default()
}

/// Serve on an already bound listener until `shutdown` resolves.
pub async fn serve_on(
    dataset: Arc<Dataset>,
    listener: TcpListener,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> Result<(), ServiceError> {
    axum::serve(listener, router(dataset))
        .with_graceful_shutdown(shutdown)
        .await
        .map_err(ServiceError::Serve)
}

/// Bind `bind:port`, report the bound address through `on_bound`, and serve
/// until interrupted.
pub async fn serve(
    root: impl AsRef<Path>,
    bind: &str,
    port: u16,
    on_bound: impl FnOnce(SocketAddr),
) -> Result<(), ServiceError> {
    let dataset = Arc::new(Dataset::load(root)?);
    let addr = format!("{bind}:{port}");
    let listener = TcpListener::bind(&addr).await.map_err(|source| ServiceError::Bind { addr: addr.clone(), source })?;
    let local = listener.local_addr().map_err(|source| ServiceError::Bind { addr, source })?;
    on_bound(local);
    serve_on(dataset, listener, async {
        let _ = tokio::signal::ctrl_c().await;
    })
    .await
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn annotate_errors_map_to_status_and_field() {
        let e = ApiError::from(AnnotateError::EmptyText);
        assert_eq!((e.status, e.body.field.as_deref()), (StatusCode::BAD_REQUEST, Some("text")));
        let e = ApiError::from(AnnotateError::NoInterval { object_id: 1, frame: 2 });
        assert_eq!((e.status, e.body.code.as_str()), (StatusCode::UNPROCESSABLE_ENTITY, "no_interval"));
        let e = ApiError::from(AnnotateError::ClickRejected { object_id: 1, frame: 2 });
        assert!(e.body.field.is_none());
    }

    #[test]
    fn error_body_omits_missing_field() {
        let e = ApiError::persist("disk full".into());
        assert_eq!(
            serde_json::to_value(&e.body).unwrap(),
            serde_json::json!({"code": "persist_failed", "message": "disk full"})
        );
    }
}
