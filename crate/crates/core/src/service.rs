//! HTTP API over in-memory editing sessions.
//!
//! Each session holds a history of validated diagram snapshots and a cursor
//! into it. Edits and transforms append a snapshot (dropping any redo
//! history); undo and redo move the cursor. Requests to one session are
//! serialized by a per-session lock.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, PoisonError, RwLock};

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tower_http::cors::CorsLayer;
use uuid::Uuid;

use crate::io::{self, DiagramDocument, LoadError, LoadOptions, NodeRecord};
use crate::lottery::{statistics, value_lottery};
use crate::model::{validate, Diagram, NodeId, NodeKind, Position, ValidationReport};
use crate::report::Report;
use crate::solve::{solve, value_of_information, Policy, SolveError};
use crate::transforms::{self, Transform, TransformError};

/// Error body: `{"code": ..., "message": ..., "violations": [...]}`.
#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: String,
    message: String,
    violations: Option<ValidationReport>,
}

impl ApiError {
    fn new(status: StatusCode, code: impl Into<String>, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code: code.into(),
            message: message.into(),
            violations: None,
        }
    }

    fn unprocessable(code: &str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, code, message)
    }

    fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "INTERNAL", message)
    }

    fn invalid(report: ValidationReport) -> Self {
        let code = report
            .iter()
            .next()
            .map_or("VALIDATION_FAILED", |v| v.code());
        ApiError {
            message: report.to_string(),
            violations: Some(report),
            ..Self::unprocessable(code, "")
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({ "code": self.code, "message": self.message });
        if let Some(v) = self.violations {
            body["violations"] = json!(v);
        }
        (self.status, Json(body)).into_response()
    }
}

impl From<LoadError> for ApiError {
    fn from(e: LoadError) -> Self {
        match e {
            LoadError::Invalid(report) => ApiError::invalid(report),
            LoadError::Parse { .. } => {
                ApiError::new(StatusCode::BAD_REQUEST, e.code(), e.to_string())
            }
            other => ApiError::unprocessable(other.code(), other.to_string()),
        }
    }
}

impl From<TransformError> for ApiError {
    fn from(e: TransformError) -> Self {
        ApiError::unprocessable(e.code(), e.to_string())
    }
}

impl From<SolveError> for ApiError {
    fn from(e: SolveError) -> Self {
        match e {
            SolveError::Invalid(report) => ApiError::invalid(report),
            SolveError::Precondition(t) => t.into(),
            e if e.is_internal() => ApiError::internal(e.to_string()),
            e => ApiError::unprocessable(e.code(), e.to_string()),
        }
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn parse<T: DeserializeOwned>(body: &[u8]) -> ApiResult<T> {
    serde_json::from_slice(body)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "BAD_REQUEST", e.to_string()))
}

/// A snapshot together with the step that produced it.
#[derive(Clone, Debug)]
struct Entry {
    diagram: Arc<Diagram>,
    step: Option<StepSummary>,
}

#[derive(Clone, Debug, Serialize)]
pub struct StepSummary {
    /// `edit` or `transform`.
    pub origin: &'static str,
    pub description: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub transform: Option<Transform>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub policy: Option<Policy>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub patched_rows: Vec<usize>,
}

#[derive(Debug)]
struct Session {
    history: Vec<Entry>,
    cursor: usize,
}

impl Session {
    fn current(&self) -> &Arc<Diagram> {
        &self.history[self.cursor].diagram
    }

    fn push(&mut self, diagram: Diagram, step: StepSummary) -> ApiResult<()> {
        let report = validate(&diagram);
        if !report.is_valid() {
            return Err(ApiError::internal(format!(
                "snapshot failed validation:\n{report}"
            )));
        }
        self.history.truncate(self.cursor + 1);
        self.history.push(Entry {
            diagram: Arc::new(diagram),
            step: Some(step),
        });
        self.cursor += 1;
        Ok(())
    }
}

/// Full view of the snapshot at the cursor.
#[derive(Debug, Serialize)]
pub struct SnapshotView {
    pub session: Uuid,
    pub cursor: usize,
    pub history_len: usize,
    pub can_undo: bool,
    pub can_redo: bool,
    pub arcs: Vec<(NodeId, NodeId)>,
    pub decision_order: Vec<NodeId>,
    pub document: DiagramDocument,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub last_step: Option<StepSummary>,
}

fn view(id: Uuid, s: &Session) -> SnapshotView {
    let d = s.current();
    SnapshotView {
        session: id,
        cursor: s.cursor,
        history_len: s.history.len(),
        can_undo: s.cursor > 0,
        can_redo: s.cursor + 1 < s.history.len(),
        arcs: d.arcs(),
        decision_order: d.decision_order().unwrap_or_default(),
        document: DiagramDocument::from_diagram(d),
        last_step: s.history[s.cursor].step.clone(),
    }
}

type SessionRef = Arc<Mutex<Session>>;

#[derive(Clone, Default)]
pub struct AppState {
    sessions: Arc<RwLock<HashMap<Uuid, SessionRef>>>,
}

impl AppState {
    fn session(&self, id: &str) -> ApiResult<(Uuid, SessionRef)> {
        let not_found = || {
            ApiError::new(
                StatusCode::NOT_FOUND,
                "UNKNOWN_SESSION",
                format!("no session `{id}`"),
            )
        };
        let uuid = Uuid::parse_str(id).map_err(|_| not_found())?;
        let map = self.sessions.read().unwrap_or_else(PoisonError::into_inner);
        map.get(&uuid)
            .cloned()
            .map(|s| (uuid, s))
            .ok_or_else(not_found)
    }

    /// Run `f` with the session locked.
    fn with<T>(
        &self,
        id: &str,
        f: impl FnOnce(Uuid, &mut Session) -> ApiResult<T>,
    ) -> ApiResult<T> {
        let (uuid, session) = self.session(id)?;
        let mut guard = session.lock().unwrap_or_else(PoisonError::into_inner);
        f(uuid, &mut guard)
    }
}

const EDIT_OPTIONS: LoadOptions = LoadOptions {
    renormalize: false,
    complete_no_forgetting: true,
    validate: true,
};

/// Structural edits. Every edit is applied to the document form, completed
/// with no-forgetting arcs and validated; a rejected edit changes nothing.
#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
pub enum Edit {
    AddNode {
        node: NodeRecord,
        #[serde(default)]
        position: Option<Position>,
    },
    ReplaceNode {
        node: NodeRecord,
    },
    RemoveNode {
        id: String,
    },
    MoveNode {
        id: String,
        x: f64,
        y: f64,
    },
    RenameNode {
        id: String,
        name: String,
    },
    SetTable {
        id: String,
        table: Vec<Vec<f64>>,
    },
    SetPayoffs {
        id: String,
        payoffs: Vec<f64>,
    },
    SetRiskAversion {
        risk_aversion: f64,
    },
    /// New parent goes last; existing rows or payoffs are repeated for each
    /// of its outcomes.
    AddArc {
        from: String,
        to: String,
    },
    /// Rows or payoffs are averaged over the dropped parent's outcomes.
    RemoveArc {
        from: String,
        to: String,
    },
}

fn record_mut<'a>(doc: &'a mut DiagramDocument, id: &str) -> ApiResult<&'a mut NodeRecord> {
    doc.nodes
        .iter_mut()
        .find(|n| n.id == id)
        .ok_or_else(|| ApiError::unprocessable("UNKNOWN_NODE", format!("unknown node `{id}`")))
}

fn cardinality(doc: &DiagramDocument, id: &str) -> ApiResult<usize> {
    let n =
        doc.nodes.iter().find(|n| n.id == id).ok_or_else(|| {
            ApiError::unprocessable("UNKNOWN_NODE", format!("unknown node `{id}`"))
        })?;
    Ok(match n.kind {
        NodeKind::Value => 1,
        _ => n.outcomes.len(),
    })
}

fn flat_len(doc: &DiagramDocument, parents: &[String]) -> ApiResult<usize> {
    parents
        .iter()
        .try_fold(1usize, |acc, p| Ok(acc * cardinality(doc, p)?))
}

/// Repeat each entry `k` times.
fn repeat_each<T: Clone>(items: Vec<T>, k: usize) -> Vec<T> {
    items
        .into_iter()
        .flat_map(|x| std::iter::repeat_n(x, k))
        .collect()
}

/// Average blocks of vectors over the digit with `stride` and `radix`.
fn marginalize(entries: &[Vec<f64>], radix: usize, stride: usize) -> Vec<Vec<f64>> {
    let total = entries.len();
    (0..total)
        .filter(|i| (i / stride).is_multiple_of(radix))
        .map(|i| {
            let width = entries[i].len();
            (0..width)
                .map(|c| (0..radix).map(|k| entries[i + k * stride][c]).sum::<f64>() / radix as f64)
                .collect()
        })
        .collect()
}

fn apply_edit(d: &Diagram, edit: Edit) -> ApiResult<(Diagram, String)> {
    let mut doc = DiagramDocument::from_diagram(d);
    let description = match edit {
        Edit::AddNode { node, position } => {
            if doc.nodes.iter().any(|n| n.id == node.id) {
                return Err(ApiError::unprocessable(
                    "DUPLICATE_NODE",
                    format!("node `{}` already exists", node.id),
                ));
            }
            if let Some(p) = position {
                doc.layout.insert(node.id.clone(), p);
            }
            let s = format!("add node {}", node.id);
            doc.nodes.push(node);
            s
        }
        Edit::ReplaceNode { node } => {
            let s = format!("replace node {}", node.id);
            let id = node.id.clone();
            *record_mut(&mut doc, &id)? = node;
            s
        }
        Edit::RemoveNode { id } => {
            let children: Vec<String> = doc
                .nodes
                .iter()
                .filter(|n| n.parents.contains(&id))
                .map(|n| n.id.clone())
                .collect();
            record_mut(&mut doc, &id)?;
            if !children.is_empty() {
                return Err(ApiError::unprocessable(
                    "NODE_HAS_CHILDREN",
                    format!(
                        "`{id}` still has children: {}; remove those arcs first",
                        children.join(", ")
                    ),
                ));
            }
            doc.nodes.retain(|n| n.id != id);
            doc.layout.remove(&id);
            format!("remove node {id}")
        }
        Edit::MoveNode { id, x, y } => {
            record_mut(&mut doc, &id)?;
            doc.layout.insert(id.clone(), Position { x, y });
            format!("move node {id}")
        }
        Edit::RenameNode { id, name } => {
            record_mut(&mut doc, &id)?.name = Some(name);
            format!("rename node {id}")
        }
        Edit::SetTable { id, table } => {
            record_mut(&mut doc, &id)?.table = Some(table);
            format!("set table of {id}")
        }
        Edit::SetPayoffs { id, payoffs } => {
            record_mut(&mut doc, &id)?.payoffs = Some(payoffs);
            format!("set payoffs of {id}")
        }
        Edit::SetRiskAversion { risk_aversion } => {
            let value = doc
                .nodes
                .iter_mut()
                .find(|n| n.kind == NodeKind::Value)
                .ok_or_else(|| {
                    ApiError::unprocessable("NO_VALUE_NODE", "diagram has no value node")
                })?;
            value.risk_aversion = Some(risk_aversion);
            format!("set risk aversion to {risk_aversion}")
        }
        Edit::AddArc { from, to } => {
            let k = cardinality(&doc, &from)?;
            let target = record_mut(&mut doc, &to)?;
            if target.parents.contains(&from) {
                return Err(ApiError::unprocessable(
                    "ARC_ALREADY_PRESENT",
                    format!("arc `{from}` -> `{to}` already exists"),
                ));
            }
            target.parents.push(from.clone());
            if let Some(table) = target.table.take() {
                target.table = Some(repeat_each(table, k));
            }
            if let Some(payoffs) = target.payoffs.take() {
                target.payoffs = Some(repeat_each(payoffs, k));
            }
            format!("add arc {from} -> {to}")
        }
        Edit::RemoveArc { from, to } => {
            let parents = record_mut(&mut doc, &to)?.parents.clone();
            let slot = parents.iter().position(|p| *p == from).ok_or_else(|| {
                ApiError::unprocessable("ARC_ABSENT", format!("no arc `{from}` -> `{to}`"))
            })?;
            let radix = cardinality(&doc, &from)?;
            let stride = flat_len(&doc, &parents[slot + 1..])?;
            let target = record_mut(&mut doc, &to)?;
            target.parents.remove(slot);
            if let Some(table) = target.table.take() {
                target.table = Some(marginalize(&table, radix, stride));
            }
            if let Some(payoffs) = target.payoffs.take() {
                let wrapped: Vec<Vec<f64>> = payoffs.into_iter().map(|p| vec![p]).collect();
                target.payoffs = Some(
                    marginalize(&wrapped, radix, stride)
                        .into_iter()
                        .map(|v| v[0])
                        .collect(),
                );
            }
            format!("remove arc {from} -> {to}")
        }
    };
    Ok((doc.to_diagram(EDIT_OPTIONS)?, description))
}

async fn create_session(
    State(state): State<AppState>,
    body: Bytes,
) -> ApiResult<(StatusCode, Json<SnapshotView>)> {
    let diagram = io::load_with(&body, EDIT_OPTIONS)?;
    let id = Uuid::new_v4();
    let session = Session {
        history: vec![Entry {
            diagram: Arc::new(diagram),
            step: None,
        }],
        cursor: 0,
    };
    let snapshot = view(id, &session);
    state
        .sessions
        .write()
        .unwrap_or_else(PoisonError::into_inner)
        .insert(id, Arc::new(Mutex::new(session)));
    Ok((StatusCode::CREATED, Json(snapshot)))
}

async fn get_session(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> ApiResult<Json<SnapshotView>> {
    state.with(&id, |uuid, s| Ok(Json(view(uuid, s))))
}

async fn delete_session(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> ApiResult<StatusCode> {
    let (uuid, _) = state.session(&id)?;
    state
        .sessions
        .write()
        .unwrap_or_else(PoisonError::into_inner)
        .remove(&uuid);
    Ok(StatusCode::NO_CONTENT)
}

async fn edit(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Json<SnapshotView>> {
    let edit: Edit = parse(&body)?;
    state.with(&id, |uuid, s| {
        let (next, description) = apply_edit(s.current(), edit)?;
        s.push(
            next,
            StepSummary {
                origin: "edit",
                description,
                transform: None,
                policy: None,
                patched_rows: Vec::new(),
            },
        )?;
        Ok(Json(view(uuid, s)))
    })
}

async fn transform(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Json<SnapshotView>> {
    let t: Transform = parse(&body)?;
    state.with(&id, |uuid, s| {
        let record = transforms::apply(s.current(), &t)?;
        let step = StepSummary {
            origin: "transform",
            description: t.to_string(),
            transform: Some(t),
            policy: record.policy,
            patched_rows: record.patched_rows,
        };
        s.push(Arc::unwrap_or_clone(record.after), step)?;
        Ok(Json(view(uuid, s)))
    })
}

async fn solve_session(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> ApiResult<Json<Report>> {
    let d = state.with(&id, |_, s| Ok(Arc::clone(s.current())))?;
    let solution = solve(&d)?;
    Ok(Json(Report::from_solution(&solution)?))
}

async fn lottery(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let d = state.with(&id, |_, s| Ok(Arc::clone(s.current())))?;
    let solution = solve(&d)?;
    let lottery = value_lottery(&solution.diagram, &solution.policies).map_err(SolveError::from)?;
    let stats = statistics(&lottery, solution.risk);
    Ok(Json(
        json!({ "atoms": lottery.atoms(), "statistics": stats }),
    ))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct VoiRequest {
    from: NodeId,
    to: NodeId,
}

async fn voi(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Json<Value>> {
    let req: VoiRequest = parse(&body)?;
    let d = state.with(&id, |_, s| Ok(Arc::clone(s.current())))?;
    let value = value_of_information(&d, &req.from, &req.to)?;
    Ok(Json(
        json!({ "from": req.from, "to": req.to, "value_of_information": value }),
    ))
}

async fn undo(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> ApiResult<Json<SnapshotView>> {
    state.with(&id, |uuid, s| {
        if s.cursor == 0 {
            return Err(ApiError::new(
                StatusCode::CONFLICT,
                "NOTHING_TO_UNDO",
                "already at the first snapshot",
            ));
        }
        s.cursor -= 1;
        Ok(Json(view(uuid, s)))
    })
}

async fn redo(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> ApiResult<Json<SnapshotView>> {
    state.with(&id, |uuid, s| {
        if s.cursor + 1 >= s.history.len() {
            return Err(ApiError::new(
                StatusCode::CONFLICT,
                "NOTHING_TO_REDO",
                "already at the latest snapshot",
            ));
        }
        s.cursor += 1;
        Ok(Json(view(uuid, s)))
    })
}

async fn document(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let d = state.with(&id, |_, s| Ok(Arc::clone(s.current())))?;
    Ok(([(header::CONTENT_TYPE, "application/json")], io::save(&d)).into_response())
}

async fn openapi() -> Json<Value> {
    Json(openapi_document())
}

/// Description of the API, served at `/openapi.json`.
pub fn openapi_document() -> Value {
    let session =
        json!([{ "name": "id", "in": "path", "required": true, "schema": { "type": "string" } }]);
    let op = |summary: &str, body: Option<&str>| {
        let mut o = json!({
            "summary": summary,
            "parameters": session,
            "responses": {
                "200": { "description": "success" },
                "404": { "description": "unknown session" },
                "422": { "description": "validation or precondition failure with a machine-readable code" }
            }
        });
        if let Some(b) = body {
            o["requestBody"] =
                json!({ "content": { "application/json": { "schema": { "description": b } } } });
        }
        o
    };
    json!({
        "openapi": "3.0.3",
        "info": { "title": "idg influence diagram service", "version": env!("CARGO_PKG_VERSION") },
        "paths": {
            "/sessions": { "post": {
                "summary": "Create a session from an .idg.json document",
                "requestBody": { "content": { "application/json": { "schema": { "description": "diagram document" } } } },
                "responses": { "201": { "description": "snapshot" }, "400": { "description": "parse error" }, "422": { "description": "invalid diagram" } }
            } },
            "/sessions/{id}": {
                "get": op("Current snapshot", None),
                "delete": op("Drop the session", None)
            },
            "/sessions/{id}/edit": { "post": op("Apply an edit", Some("{op: add_node|replace_node|remove_node|move_node|rename_node|set_table|set_payoffs|set_risk_aversion|add_arc|remove_arc, ...}")) },
            "/sessions/{id}/transform": { "post": op("Apply a reduction step", Some("{kind: remove_barren|reverse_arc|remove_chance|remove_decision|add_informational_arc, node | from,to}")) },
            "/sessions/{id}/solve": { "post": op("Solve the current snapshot", None) },
            "/sessions/{id}/lottery": { "post": op("Value lottery under the optimal policy", None) },
            "/sessions/{id}/voi": { "post": op("Value of information for an arc", Some("{from, to}")) },
            "/sessions/{id}/undo": { "post": op("Move the cursor back", None) },
            "/sessions/{id}/redo": { "post": op("Move the cursor forward", None) },
            "/sessions/{id}/document": { "get": op("Current snapshot as an .idg.json document", None) }
        }
    })
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/openapi.json", get(openapi))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session).delete(delete_session))
        .route("/sessions/{id}/edit", post(edit))
        .route("/sessions/{id}/transform", post(transform))
        .route("/sessions/{id}/solve", post(solve_session))
        .route("/sessions/{id}/lottery", post(lottery))
        .route("/sessions/{id}/voi", post(voi))
        .route("/sessions/{id}/undo", post(undo))
        .route("/sessions/{id}/redo", post(redo))
        .route("/sessions/{id}/document", get(document))
        .layer(CorsLayer::permissive())
        .with_state(state)
}

/// Serve on `0.0.0.0:port` until interrupted.
pub async fn serve(port: u16) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(("0.0.0.0", port)).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(AppState::default()))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
