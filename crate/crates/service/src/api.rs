//! HTTP surface. All payloads are JSON; every response carries the API
//! version header. Writes for one student are serialized through that
//! student's slot, and the committed events reach disk before the
//! in-memory journey changes.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex, RwLock};
use std::time::Instant;

use arc_swap::ArcSwap;

use axum::body::Bytes;
use axum::extract::rejection::JsonRejection;
use axum::extract::{FromRequest, Path, Request, State};
use axum::http::{HeaderMap, HeaderValue, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::{Duration, Utc};
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use tutorloop_core::gateway::{ChatGateway, ChatRole, GatewayError};
use tutorloop_core::item_bank::{Choice, Concept, ItemBank, TestForm};
use tutorloop_core::orchestrator::{
    progress_report, replay, strip_sentinel, EventKind, FinishReason, Journey, JourneyContext, JourneyError,
    Orchestrator, Phase, SessionEvent,
};
use tutorloop_core::student_model::OnboardingSurvey;

use crate::store::{valid_student_id, ApiSession, JourneyStore, StoredResponse};

pub const VERSION_HEADER: &str = "x-tutorloop-api-version";
pub const API_VERSION: &str = "1";
pub const IDEMPOTENCY_HEADER: &str = "idempotency-key";

#[derive(Debug, Clone, Serialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: StatusCode,
    pub code: String,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phase: Option<Phase>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expected_phase: Option<Phase>,
    pub retryable: bool,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        Self {
            status,
            code: code.into(),
            message: message.into(),
            phase: None,
            expected_phase: None,
            retryable: false,
        }
    }

    fn internal(e: impl std::fmt::Display) -> Self {
        tracing::error!(error = %e, "internal error");
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string())
    }
}

impl From<JourneyError> for ApiError {
    fn from(e: JourneyError) -> Self {
        let code = e.code();
        let message = e.to_string();
        match e {
            JourneyError::OutOfPhase { phase, expected, .. } => Self {
                phase: Some(phase),
                expected_phase: Some(expected),
                ..Self::new(StatusCode::CONFLICT, code, message)
            },
            JourneyError::Conflict { .. } => Self::new(StatusCode::CONFLICT, code, message),
            JourneyError::Validation { .. } => Self::new(StatusCode::UNPROCESSABLE_ENTITY, code, message),
            JourneyError::Gateway(g) if g.is_retryable() => Self {
                retryable: true,
                ..Self::new(StatusCode::SERVICE_UNAVAILABLE, code, message)
            },
            JourneyError::Gateway(GatewayError::InvalidRequest(_)) | JourneyError::Internal(_) => {
                Self::internal(message)
            }
            JourneyError::Gateway(_) => Self::new(StatusCode::BAD_GATEWAY, code, message),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self }))).into_response()
    }
}

/// `Json` whose rejections use the API error shape.
pub struct Body<T>(pub T);

impl<S, T> FromRequest<S> for Body<T>
where
    Json<T>: FromRequest<S, Rejection = JsonRejection>,
    S: Send + Sync,
{
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, Self::Rejection> {
        match Json::<T>::from_request(req, state).await {
            Ok(Json(v)) => Ok(Body(v)),
            Err(e) => Err(ApiError::new(StatusCode::BAD_REQUEST, "bad_request", e.body_text())),
        }
    }
}

struct SlotInner {
    journey: Journey,
    next_seq: u64,
    idempotency: HashMap<String, StoredResponse>,
}

/// One student's state. Writers hold `inner`; readers load the published
/// journey without taking any lock.
pub struct StudentSlot {
    session: ApiSession,
    inner: Mutex<SlotInner>,
    published: ArcSwap<Journey>,
}

impl StudentSlot {
    fn new(session: ApiSession, journey: Journey, next_seq: u64, idem: Vec<StoredResponse>) -> Self {
        Self {
            session,
            published: ArcSwap::from_pointee(journey.clone()),
            inner: Mutex::new(SlotInner {
                journey,
                next_seq,
                idempotency: idem.into_iter().map(|r| (r.key.clone(), r)).collect(),
            }),
        }
    }

    pub fn journey(&self) -> Arc<Journey> {
        self.published.load_full()
    }
}

pub struct AppState {
    pub orchestrator: Orchestrator,
    store: Arc<dyn JourneyStore>,
    students: RwLock<HashMap<String, Arc<StudentSlot>>>,
    token_ttl: Duration,
}

/// What startup recovery found.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RecoveryReport {
    pub students: usize,
    pub events: usize,
    /// Students whose snapshot disagreed with their replayed log.
    pub snapshot_mismatches: Vec<String>,
}

impl AppState {
    /// Rebuilds every student's journey by replaying its event log. The log
    /// is authoritative; snapshots are only cross-checked.
    pub fn recover(
        ctx: Arc<JourneyContext>,
        gateway: Arc<dyn ChatGateway>,
        store: Arc<dyn JourneyStore>,
        token_ttl: Duration,
    ) -> anyhow::Result<(Arc<Self>, RecoveryReport)> {
        let mut report = RecoveryReport::default();
        let mut students = HashMap::new();
        for stored in store.load_all()? {
            let id = stored.session.student_id.clone();
            let journey = replay(&id, stored.events.iter().map(|e| &e.event), &ctx)
                .map_err(|e| anyhow::anyhow!("replaying {id}: {e}"))?;
            if stored.snapshot.as_ref().is_some_and(|s| *s != journey) {
                tracing::warn!(student = %id, "snapshot differs from replayed log; using the log");
                report.snapshot_mismatches.push(id.clone());
            }
            report.students += 1;
            report.events += stored.events.len();
            let next_seq = stored.events.last().map_or(0, |e| e.seq + 1);
            let slot = StudentSlot::new(stored.session, journey, next_seq, stored.idempotency);
            students.insert(id, Arc::new(slot));
        }
        let state = Self {
            orchestrator: Orchestrator::new(ctx, gateway),
            store,
            students: RwLock::new(students),
            token_ttl,
        };
        Ok((Arc::new(state), report))
    }

    fn bank(&self) -> &ItemBank {
        &self.orchestrator.ctx.bank
    }

    pub fn slot(&self, student_id: &str) -> Option<Arc<StudentSlot>> {
        self.students
            .read()
            .unwrap_or_else(|p| p.into_inner())
            .get(student_id)
            .cloned()
    }

    fn authorize(&self, student_id: &str, headers: &HeaderMap) -> Result<Arc<StudentSlot>, ApiError> {
        let slot = self.slot(student_id).ok_or_else(|| {
            ApiError::new(
                StatusCode::NOT_FOUND,
                "unknown_student",
                format!("no student {student_id}"),
            )
        })?;
        let token = headers
            .get("authorization")
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "))
            .ok_or_else(|| ApiError::new(StatusCode::UNAUTHORIZED, "unauthorized", "missing bearer token"))?;
        if token != slot.session.token {
            return Err(ApiError::new(
                StatusCode::UNAUTHORIZED,
                "unauthorized",
                "token does not belong to this student",
            ));
        }
        if slot.session.expires_at < Utc::now() {
            return Err(ApiError::new(
                StatusCode::UNAUTHORIZED,
                "token_expired",
                "session token has expired",
            ));
        }
        Ok(slot)
    }
}

type Shared = Arc<AppState>;
type Render = fn(&AppState, &Journey, &[SessionEvent]) -> Result<Value, ApiError>;

fn request_hash(event: &EventKind) -> String {
    hex::encode(Sha256::digest(serde_json::to_vec(event).unwrap_or_default()))
}

/// Applies one client event under the student's write lock, persists the
/// committed events, publishes the new journey and renders the response.
async fn submit(
    state: Shared,
    slot: Arc<StudentSlot>,
    idempotency_key: Option<String>,
    event: EventKind,
    render: Render,
) -> Result<Json<Value>, ApiError> {
    tokio::task::spawn_blocking(move || {
        let mut inner = slot.inner.lock().unwrap_or_else(|p| p.into_inner());
        let hash = request_hash(&event);
        if let Some(key) = &idempotency_key {
            if let Some(stored) = inner.idempotency.get(key) {
                if stored.request_hash != hash {
                    return Err(ApiError::new(
                        StatusCode::UNPROCESSABLE_ENTITY,
                        "idempotency_mismatch",
                        "idempotency key was already used with a different request",
                    ));
                }
                return Ok(Json(stored.body.clone()));
            }
        }
        let mut journey = inner.journey.clone();
        let (events, _) = state
            .orchestrator
            .handle(&mut journey, event, inner.next_seq, Utc::now)?;
        state
            .store
            .append_events(&journey.student_id, &events)
            .map_err(ApiError::internal)?;
        inner.next_seq += events.len() as u64;
        inner.journey = journey.clone();
        if let Err(e) = state.store.write_snapshot(&journey) {
            tracing::warn!(error = %e, "snapshot write failed; the event log remains authoritative");
        }
        let body = render(&state, &journey, &events)?;
        slot.published.store(Arc::new(journey.clone()));
        if let Some(key) = idempotency_key {
            let stored = StoredResponse {
                key: key.clone(),
                request_hash: hash,
                status: 200,
                body: body.clone(),
            };
            state
                .store
                .record_response(&journey.student_id, &stored)
                .map_err(ApiError::internal)?;
            inner.idempotency.insert(key, stored);
        }
        Ok(Json(body))
    })
    .await
    .map_err(ApiError::internal)?
}

fn idempotency_key(headers: &HeaderMap) -> Option<String> {
    headers
        .get(IDEMPOTENCY_HEADER)
        .and_then(|v| v.to_str().ok())
        .map(str::to_string)
}

// ---- views ----------------------------------------------------------------

#[derive(Serialize)]
struct ItemView<'a> {
    item_id: &'a str,
    concept: Concept,
    stem: &'a str,
    choices: &'a [Choice],
}

fn form_view(bank: &ItemBank, form: &TestForm) -> Value {
    let items: Vec<ItemView> = form
        .item_ids
        .iter()
        .filter_map(|id| bank.get(id))
        .map(|e| ItemView {
            item_id: &e.item_id,
            concept: e.concept,
            stem: &e.stem,
            choices: &e.choices,
        })
        .collect();
    json!({ "kind": form.kind, "concepts": form.concepts, "items": items })
}

fn message_view(role: ChatRole, content: &str) -> Value {
    let shown = if role == ChatRole::Tutor {
        strip_sentinel(content)
    } else {
        content.to_string()
    };
    json!({ "role": role, "content": shown })
}

fn transcript_view(messages: &[tutorloop_core::gateway::ChatMessage]) -> Vec<Value> {
    messages
        .iter()
        .filter(|m| m.role != ChatRole::System)
        .map(|m| message_view(m.role, &m.content))
        .collect()
}

fn state_view(j: &Journey) -> Value {
    json!({
        "student_id": j.student_id,
        "phase": j.state.phase,
        "current_concept": j.state.current_concept,
        "completed_concepts": j.state.completed_concepts,
        "session_index": j.state.session_index,
        "profile": j.profile,
    })
}

fn session_view(state: &AppState, j: &Journey) -> Value {
    let bank = state.bank();
    let exercises: Vec<ItemView> = j
        .state
        .exercises_in_play
        .iter()
        .filter_map(|id| bank.get(id))
        .map(|e| ItemView {
            item_id: &e.item_id,
            concept: e.concept,
            stem: &e.stem,
            choices: &e.choices,
        })
        .collect();
    let opening = j
        .state
        .session_transcript
        .iter()
        .find(|m| m.role == ChatRole::Tutor)
        .map(|m| strip_sentinel(&m.content));
    json!({
        "concept": j.state.current_concept,
        "session_index": j.state.session_index,
        "exercises": exercises,
        "current_exercise": j.state.current_exercise,
        "opening_message": opening,
        "transcript": transcript_view(&j.state.session_transcript),
    })
}

fn render_after_survey(state: &AppState, j: &Journey, _: &[SessionEvent]) -> Result<Value, ApiError> {
    let form = j
        .state
        .pretest_form
        .as_ref()
        .ok_or_else(|| ApiError::internal("no pre-test form"))?;
    Ok(json!({ "state": state_view(j), "pretest": form_view(state.bank(), form) }))
}

fn render_session(state: &AppState, j: &Journey, _: &[SessionEvent]) -> Result<Value, ApiError> {
    let measured: BTreeMap<Concept, Value> = j
        .profile
        .iter()
        .flat_map(|p| p.concept_states.values())
        .map(|s| {
            (
                s.concept,
                json!({ "theta_pre": s.theta_pre, "measured": s.measured, "discrepancy": s.discrepancy }),
            )
        })
        .collect();
    Ok(json!({ "state": state_view(j), "measured": measured, "session": session_view(state, j) }))
}

fn render_reply(state: &AppState, j: &Journey, events: &[SessionEvent]) -> Result<Value, ApiError> {
    let reply = events.iter().find_map(|e| match &e.event {
        EventKind::TutorMessage { content } => Some(content.clone()),
        _ => None,
    });
    let finished = j.state.phase != Phase::TutoringSession;
    let mut body = json!({
        "reply": reply.as_deref().map(strip_sentinel),
        "finished": finished,
        "phase": j.state.phase,
        "current_exercise": j.state.current_exercise,
    });
    if finished {
        let last = j.state.sessions.last();
        body["first_response_ratio"] = json!(last.and_then(|s| s.first_response_ratio));
        body["summary_error"] = json!(j.state.last_summary_error);
        if let Some(form) = &j.state.posttest_form {
            body["posttest"] = form_view(state.bank(), form);
        }
    }
    Ok(body)
}

fn render_after_posttest(state: &AppState, j: &Journey, _: &[SessionEvent]) -> Result<Value, ApiError> {
    let concept = j
        .state
        .current_concept
        .ok_or_else(|| ApiError::internal("no concept"))?;
    let profile = j.profile.as_ref().ok_or_else(|| ApiError::internal("no profile"))?;
    let report = progress_report(profile, concept, state.bank())?;
    Ok(json!({ "state": state_view(j), "report": report }))
}

// ---- handlers -------------------------------------------------------------

#[derive(Deserialize, Default)]
struct CreateStudent {
    #[serde(default)]
    student_id: Option<String>,
}

async fn create_student(State(state): State<Shared>, body: Bytes) -> Result<(StatusCode, Json<Value>), ApiError> {
    // An empty body asks for a generated id.
    let req: CreateStudent = if body.iter().all(u8::is_ascii_whitespace) {
        CreateStudent::default()
    } else {
        serde_json::from_slice(&body)
            .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "bad_request", e.to_string()))?
    };
    let mut rng = rand::rng();
    let student_id = req
        .student_id
        .unwrap_or_else(|| format!("stu-{}", hex::encode(rng.random::<[u8; 6]>())));
    if !valid_student_id(&student_id) {
        return Err(ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            "invalid_student_id",
            "student_id must be 1-64 characters of letters, digits, '-' or '_'",
        ));
    }
    let session = ApiSession {
        token: hex::encode(rng.random::<[u8; 32]>()),
        student_id: student_id.clone(),
        expires_at: Utc::now() + state.token_ttl,
    };
    {
        let mut students = state.students.write().unwrap_or_else(|p| p.into_inner());
        if students.contains_key(&student_id) {
            return Err(ApiError::new(
                StatusCode::CONFLICT,
                "student_exists",
                format!("{student_id} already exists"),
            ));
        }
        state.store.create_student(&session).map_err(ApiError::internal)?;
        let slot = StudentSlot::new(session.clone(), Journey::new(&student_id), 0, Vec::new());
        students.insert(student_id.clone(), Arc::new(slot));
    }
    Ok((
        StatusCode::CREATED,
        Json(json!({
            "student_id": student_id,
            "token": session.token,
            "expires_at": session.expires_at,
            "phase": Phase::Onboarding,
        })),
    ))
}

async fn get_state(
    State(state): State<Shared>,
    Path(id): Path<String>,
    headers: HeaderMap,
) -> Result<Json<Value>, ApiError> {
    let slot = state.authorize(&id, &headers)?;
    Ok(Json(state_view(&slot.journey())))
}

async fn submit_survey(
    State(state): State<Shared>,
    Path(id): Path<String>,
    headers: HeaderMap,
    Body(survey): Body<OnboardingSurvey>,
) -> Result<Json<Value>, ApiError> {
    let slot = state.authorize(&id, &headers)?;
    submit(
        state,
        slot,
        idempotency_key(&headers),
        EventKind::SurveySubmitted(survey),
        render_after_survey,
    )
    .await
}

fn require_phase(j: &Journey, phase: Phase) -> Result<(), ApiError> {
    if j.phase() == phase {
        Ok(())
    } else {
        Err(ApiError {
            phase: Some(j.phase()),
            expected_phase: Some(phase),
            ..ApiError::new(
                StatusCode::CONFLICT,
                "out_of_phase",
                format!("student is in phase {} (expected {phase})", j.phase()),
            )
        })
    }
}

async fn get_pretest(
    State(state): State<Shared>,
    Path(id): Path<String>,
    headers: HeaderMap,
) -> Result<Json<Value>, ApiError> {
    let slot = state.authorize(&id, &headers)?;
    let j = slot.journey();
    require_phase(&j, Phase::PreTest)?;
    let form = j
        .state
        .pretest_form
        .as_ref()
        .ok_or_else(|| ApiError::internal("no form"))?;
    Ok(Json(form_view(state.bank(), form)))
}

#[derive(Deserialize)]
struct Answers {
    answers: BTreeMap<String, String>,
    #[serde(default)]
    concept: Option<Concept>,
}

async fn submit_pretest(
    State(state): State<Shared>,
    Path(id): Path<String>,
    headers: HeaderMap,
    Body(req): Body<Answers>,
) -> Result<Json<Value>, ApiError> {
    let slot = state.authorize(&id, &headers)?;
    let event = EventKind::PretestSubmitted {
        answers: req.answers,
        concept: req.concept,
    };
    submit(state, slot, idempotency_key(&headers), event, render_session).await
}

async fn get_session(
    State(state): State<Shared>,
    Path(id): Path<String>,
    headers: HeaderMap,
) -> Result<Json<Value>, ApiError> {
    let slot = state.authorize(&id, &headers)?;
    let j = slot.journey();
    require_phase(&j, Phase::TutoringSession)?;
    Ok(Json(session_view(&state, &j)))
}

/// Sessions open when the pre-test is scored or a concept is chosen, so
/// starting one returns the open session with its opening tutor message.
async fn start_session(
    State(state): State<Shared>,
    Path(id): Path<String>,
    headers: HeaderMap,
) -> Result<Json<Value>, ApiError> {
    let slot = state.authorize(&id, &headers)?;
    let j = slot.journey();
    require_phase(&j, Phase::TutoringSession)?;
    Ok(Json(session_view(&state, &j)))
}

#[derive(Deserialize)]
struct ChatRequest {
    content: String,
    #[serde(default)]
    exercise: Option<String>,
}

async fn post_message(
    State(state): State<Shared>,
    Path(id): Path<String>,
    headers: HeaderMap,
    Body(req): Body<ChatRequest>,
) -> Result<Json<Value>, ApiError> {
    let slot = state.authorize(&id, &headers)?;
    let event = EventKind::StudentMessage {
        content: req.content,
        exercise: req.exercise,
    };
    submit(state, slot, idempotency_key(&headers), event, render_reply).await
}

async fn abort_session(
    State(state): State<Shared>,
    Path(id): Path<String>,
    headers: HeaderMap,
) -> Result<Json<Value>, ApiError> {
    let slot = state.authorize(&id, &headers)?;
    let event = EventKind::SessionFinished {
        reason: FinishReason::Abort,
    };
    submit(state, slot, idempotency_key(&headers), event, render_reply).await
}

async fn get_posttest(
    State(state): State<Shared>,
    Path(id): Path<String>,
    headers: HeaderMap,
) -> Result<Json<Value>, ApiError> {
    let slot = state.authorize(&id, &headers)?;
    let j = slot.journey();
    require_phase(&j, Phase::PostTest)?;
    let form = j
        .state
        .posttest_form
        .as_ref()
        .ok_or_else(|| ApiError::internal("no form"))?;
    Ok(Json(form_view(state.bank(), form)))
}

async fn submit_posttest(
    State(state): State<Shared>,
    Path(id): Path<String>,
    headers: HeaderMap,
    Body(req): Body<Answers>,
) -> Result<Json<Value>, ApiError> {
    let slot = state.authorize(&id, &headers)?;
    let event = EventKind::PosttestSubmitted { answers: req.answers };
    submit(state, slot, idempotency_key(&headers), event, render_after_posttest).await
}

async fn get_progress(
    State(state): State<Shared>,
    Path((id, concept)): Path<(String, String)>,
    headers: HeaderMap,
) -> Result<Json<Value>, ApiError> {
    let slot = state.authorize(&id, &headers)?;
    let concept: Concept = concept.parse().map_err(|e: tutorloop_core::item_bank::BankError| {
        ApiError::new(StatusCode::NOT_FOUND, "unknown_concept", e.to_string())
    })?;
    let j = slot.journey();
    let profile = j
        .profile
        .as_ref()
        .ok_or_else(|| ApiError::new(StatusCode::CONFLICT, "posttest_missing", "onboarding not completed"))?;
    Ok(Json(
        serde_json::to_value(progress_report(profile, concept, state.bank())?).map_err(ApiError::internal)?,
    ))
}

#[derive(Deserialize)]
struct ChooseConcept {
    concept: Concept,
}

async fn choose_concept(
    State(state): State<Shared>,
    Path(id): Path<String>,
    headers: HeaderMap,
    Body(req): Body<ChooseConcept>,
) -> Result<Json<Value>, ApiError> {
    let slot = state.authorize(&id, &headers)?;
    let event = EventKind::ConceptChosen { concept: req.concept };
    submit(state, slot, idempotency_key(&headers), event, render_session).await
}

async fn get_transcript(
    State(state): State<Shared>,
    Path(id): Path<String>,
    headers: HeaderMap,
) -> Result<Json<Value>, ApiError> {
    let slot = state.authorize(&id, &headers)?;
    let j = slot.journey();
    let sessions: Vec<Value> = j
        .state
        .sessions
        .iter()
        .map(|s| {
            json!({
                "session_index": s.session_index,
                "concept": s.concept,
                "exercises": s.exercises,
                "first_responses": s.first_responses,
                "first_response_ratio": s.first_response_ratio,
                "reason": s.reason,
                "messages": transcript_view(&s.transcript),
            })
        })
        .collect();
    let current = (j.phase() == Phase::TutoringSession).then(|| transcript_view(&j.state.session_transcript));
    Ok(Json(json!({ "sessions": sessions, "current": current })))
}

async fn health() -> Json<Value> {
    Json(json!({ "status": "ok" }))
}

async fn ready(State(state): State<Shared>) -> Json<Value> {
    Json(json!({
        "status": "ready",
        "students": state.students.read().unwrap_or_else(|p| p.into_inner()).len(),
        "bank_items": state.bank().len(),
    }))
}

async fn not_found() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such endpoint")
}

async fn version_and_log(req: Request, next: Next) -> Response {
    let method = req.method().clone();
    let path = req.uri().path().to_string();
    let start = Instant::now();
    let mut resp = next.run(req).await;
    resp.headers_mut()
        .insert(VERSION_HEADER, HeaderValue::from_static(API_VERSION));
    tracing::info!(
        %method,
        path,
        status = resp.status().as_u16(),
        latency_ms = start.elapsed().as_secs_f64() * 1e3,
        "request"
    );
    resp
}

pub fn router(state: Shared) -> Router {
    Router::new()
        .route("/healthz", get(health))
        .route("/readyz", get(ready))
        .route("/v1/students", post(create_student))
        .route("/v1/students/{id}", get(get_state))
        .route("/v1/students/{id}/survey", post(submit_survey))
        .route("/v1/students/{id}/pretest", get(get_pretest).post(submit_pretest))
        .route("/v1/students/{id}/session", get(get_session))
        .route("/v1/students/{id}/session/start", post(start_session))
        .route("/v1/students/{id}/session/messages", post(post_message))
        .route("/v1/students/{id}/session/abort", post(abort_session))
        .route("/v1/students/{id}/posttest", get(get_posttest).post(submit_posttest))
        .route("/v1/students/{id}/progress/{concept}", get(get_progress))
        .route("/v1/students/{id}/concept", post(choose_concept))
        .route("/v1/students/{id}/transcript", get(get_transcript))
        .fallback(not_found)
        .layer(middleware::from_fn(version_and_log))
        .with_state(state)
}

/// Journey replay for callers that hold a raw event list.
pub fn replay_events(ctx: &JourneyContext, student_id: &str, events: &[SessionEvent]) -> Result<Journey, JourneyError> {
    replay(student_id, events.iter().map(|e| &e.event), ctx)
}
