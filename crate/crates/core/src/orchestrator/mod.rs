//! The student journey as an event-sourced state machine.
//!
//! [`advance`] is pure: it maps a journey and one event to the successor
//! journey plus declarative [`Effect`]s. [`Orchestrator`] is the thin
//! imperative shell that performs the gateway calls those effects ask for
//! and turns the replies into further events. Every nondeterministic input
//! (tutor replies, summary replies) is itself an event, so [`replay`] over
//! the log rebuilds the exact same journey.

mod machine;
mod report;
mod shell;

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use machine::{advance, extract_answer, replay, sentinel_terminated, strip_sentinel};
pub use report::{progress_report, ProgressReport};
pub use shell::Orchestrator;

use crate::gateway::{ChatMessage, GatewayError};
use crate::irt::Ability;
use crate::item_bank::{Concept, ItemBank, TestForm};
use crate::prompt::PromptEngine;
use crate::student_model::{OnboardingSurvey, ProficiencyThresholds, StudentProfile};

pub const SENTINEL: &str = "FINISHED.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Phase {
    Onboarding,
    PreTest,
    TutoringSession,
    PostTest,
    ConceptSelect,
    Completed,
}

impl Phase {
    /// Phases that may directly follow this one.
    pub fn successors(self) -> &'static [Phase] {
        use Phase::*;
        match self {
            Onboarding => &[PreTest],
            PreTest => &[TutoringSession],
            TutoringSession => &[PostTest],
            PostTest => &[ConceptSelect, Completed],
            ConceptSelect => &[TutoringSession],
            Completed => &[],
        }
    }
}

impl std::fmt::Display for Phase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinishReason {
    Sentinel,
    TurnCap,
    Abort,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum EventKind {
    SurveySubmitted(OnboardingSurvey),
    /// `answers` maps item_id to the chosen label. `concept` picks the first
    /// concept to study; the default order applies when absent.
    PretestSubmitted {
        answers: BTreeMap<String, String>,
        #[serde(default)]
        concept: Option<Concept>,
    },
    TutorMessage {
        content: String,
    },
    StudentMessage {
        content: String,
        /// Exercise the student is answering, when the client knows it.
        #[serde(default)]
        exercise: Option<String>,
    },
    /// Operator-initiated end of a session. Only `abort` is accepted from
    /// outside; the other reasons are derived from tutor messages.
    SessionFinished {
        reason: FinishReason,
    },
    /// Raw summary reply, or the gateway error that prevented one.
    SummaryRecorded {
        #[serde(default)]
        reply: Option<String>,
        #[serde(default)]
        error: Option<String>,
    },
    PosttestSubmitted {
        answers: BTreeMap<String, String>,
    },
    ConceptChosen {
        concept: Concept,
    },
}

impl EventKind {
    pub fn name(&self) -> &'static str {
        match self {
            EventKind::SurveySubmitted(_) => "survey_submitted",
            EventKind::PretestSubmitted { .. } => "pretest_submitted",
            EventKind::TutorMessage { .. } => "tutor_message",
            EventKind::StudentMessage { .. } => "student_message",
            EventKind::SessionFinished { .. } => "session_finished",
            EventKind::SummaryRecorded { .. } => "summary_recorded",
            EventKind::PosttestSubmitted { .. } => "posttest_submitted",
            EventKind::ConceptChosen { .. } => "concept_chosen",
        }
    }

    /// Phase in which this event kind is accepted.
    pub fn expected_phase(&self) -> Phase {
        match self {
            EventKind::SurveySubmitted(_) => Phase::Onboarding,
            EventKind::PretestSubmitted { .. } => Phase::PreTest,
            EventKind::TutorMessage { .. } | EventKind::StudentMessage { .. } | EventKind::SessionFinished { .. } => {
                Phase::TutoringSession
            }
            EventKind::SummaryRecorded { .. } | EventKind::PosttestSubmitted { .. } => Phase::PostTest,
            EventKind::ConceptChosen { .. } => Phase::ConceptSelect,
        }
    }
}

/// One line of a student's append-only event log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionEvent {
    pub seq: u64,
    pub student_id: String,
    pub timestamp: DateTime<Utc>,
    #[serde(flatten)]
    pub event: EventKind,
}

/// A closed tutoring session kept for transcripts and audit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub session_index: usize,
    pub concept: Concept,
    pub exercises: Vec<String>,
    pub transcript: Vec<ChatMessage>,
    pub first_responses: BTreeMap<String, bool>,
    pub first_response_ratio: Option<f64>,
    pub reason: FinishReason,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JourneyState {
    pub phase: Phase,
    pub current_concept: Option<Concept>,
    pub completed_concepts: BTreeSet<Concept>,
    /// 1-based index of the current or most recent tutoring session.
    pub session_index: usize,
    pub session_transcript: Vec<ChatMessage>,
    pub exercises_in_play: Vec<String>,
    pub current_exercise: Option<String>,
    pub first_response_outcomes: BTreeMap<String, bool>,
    pub awaiting_tutor: bool,
    pub student_turns: usize,
    pub pretest_form: Option<TestForm>,
    pub posttest_form: Option<TestForm>,
    pub summary_pending: bool,
    pub last_summary_error: Option<String>,
    pub sessions: Vec<SessionRecord>,
}

impl Default for JourneyState {
    fn default() -> Self {
        Self {
            phase: Phase::Onboarding,
            current_concept: None,
            completed_concepts: BTreeSet::new(),
            session_index: 0,
            session_transcript: Vec::new(),
            exercises_in_play: Vec::new(),
            current_exercise: None,
            first_response_outcomes: BTreeMap::new(),
            awaiting_tutor: false,
            student_turns: 0,
            pretest_form: None,
            posttest_form: None,
            summary_pending: false,
            last_summary_error: None,
            sessions: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Journey {
    pub student_id: String,
    pub state: JourneyState,
    pub profile: Option<StudentProfile>,
}

impl Journey {
    pub fn new(student_id: impl Into<String>) -> Self {
        Self {
            student_id: student_id.into(),
            state: JourneyState::default(),
            profile: None,
        }
    }

    pub fn phase(&self) -> Phase {
        self.state.phase
    }

    /// Key that scopes gateway state to one tutoring session.
    pub fn session_key(&self) -> String {
        format!("{}#{}", self.student_id, self.state.session_index)
    }
}

/// Declarative side effects requested by [`advance`].
#[derive(Debug, Clone, PartialEq)]
pub enum Effect {
    EstimatedTheta {
        concept: Concept,
        ability: Ability,
    },
    SelectedExercises {
        concept: Concept,
        item_ids: Vec<String>,
    },
    BuiltPrompt {
        session_index: usize,
    },
    RequestTutorReply {
        session_key: String,
        history: Vec<ChatMessage>,
    },
    RequestSummary {
        session_key: String,
        history: Vec<ChatMessage>,
    },
    RecordedFirstResponse {
        item_id: String,
        correct: bool,
    },
    SessionClosed {
        concept: Concept,
        reason: FinishReason,
        ratio: Option<f64>,
    },
    SummaryApplied {
        parse_error: Option<String>,
    },
    Persist,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OrchestratorConfig {
    pub exercises_per_session: usize,
    /// Student messages per session before the session is closed.
    pub turn_cap: usize,
    pub summarize_on_abort: bool,
    pub thresholds: ProficiencyThresholds,
}

impl Default for OrchestratorConfig {
    fn default() -> Self {
        Self {
            exercises_per_session: crate::item_bank::DEFAULT_SELECTION_SIZE,
            turn_cap: 60,
            summarize_on_abort: true,
            thresholds: ProficiencyThresholds::default(),
        }
    }
}

/// Everything [`advance`] reads besides the journey itself.
#[derive(Debug, Clone)]
pub struct JourneyContext {
    pub bank: ItemBank,
    pub engine: PromptEngine,
    pub config: OrchestratorConfig,
}

impl JourneyContext {
    pub fn new(bank: ItemBank) -> Self {
        Self {
            bank,
            engine: PromptEngine::default(),
            config: OrchestratorConfig::default(),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum JourneyError {
    #[error("{event} is not accepted in phase {phase} (expected {expected})")]
    OutOfPhase {
        event: &'static str,
        phase: Phase,
        expected: Phase,
    },
    #[error("{message}")]
    Conflict { code: &'static str, message: String },
    #[error("{message}")]
    Validation { code: &'static str, message: String },
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("internal: {0}")]
    Internal(String),
}

impl JourneyError {
    pub fn code(&self) -> &'static str {
        match self {
            JourneyError::OutOfPhase { .. } => "out_of_phase",
            JourneyError::Conflict { code, .. } | JourneyError::Validation { code, .. } => code,
            JourneyError::Gateway(e) if e.is_retryable() => "gateway_unavailable",
            JourneyError::Gateway(_) => "gateway_error",
            JourneyError::Internal(_) => "internal",
        }
    }
}
