use std::collections::{BTreeMap, BTreeSet};
use std::sync::LazyLock;

use regex::Regex;

use super::{Effect, EventKind, FinishReason, Journey, JourneyContext, JourneyError, Phase, SessionRecord, SENTINEL};
use crate::gateway::ChatMessage;
use crate::irt::ItemParams;
use crate::item_bank::{assemble_posttest, assemble_pretest, select_exercises, Concept, Exercise, TestForm};
use crate::student_model::{init_profile, ParsedSummary, StudentProfile};

static ANSWER_LABEL: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)\b[a-e]\b").unwrap());
static QUESTION_REF: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)\bquestion\s+(\d+)\b").unwrap());

/// The single standalone choice label in a student message, upper-cased.
/// Messages with zero or several labels are conversation, not answers.
pub fn extract_answer(text: &str) -> Option<String> {
    let mut found = ANSWER_LABEL.find_iter(text);
    let first = found.next()?;
    if found.next().is_some() {
        return None;
    }
    Some(first.as_str().to_ascii_uppercase())
}

/// True when the reply's last non-whitespace content is the sentinel as a
/// word of its own.
pub fn sentinel_terminated(reply: &str) -> bool {
    let trimmed = reply.trim_end();
    match trimmed.strip_suffix(SENTINEL) {
        Some(rest) => !rest.chars().next_back().is_some_and(char::is_alphanumeric),
        None => false,
    }
}

/// Reply text as shown to the student.
pub fn strip_sentinel(reply: &str) -> String {
    if sentinel_terminated(reply) {
        let trimmed = reply.trim_end();
        trimmed[..trimmed.len() - SENTINEL.len()].trim_end().to_string()
    } else {
        reply.to_string()
    }
}

fn out_of_phase(journey: &Journey, event: &EventKind) -> JourneyError {
    JourneyError::OutOfPhase {
        event: event.name(),
        phase: journey.state.phase,
        expected: event.expected_phase(),
    }
}

fn conflict(code: &'static str, message: impl Into<String>) -> JourneyError {
    JourneyError::Conflict {
        code,
        message: message.into(),
    }
}

fn invalid(code: &'static str, message: impl Into<String>) -> JourneyError {
    JourneyError::Validation {
        code,
        message: message.into(),
    }
}

fn internal(e: impl std::fmt::Display) -> JourneyError {
    JourneyError::Internal(e.to_string())
}

fn profile_mut(journey: &mut Journey) -> Result<&mut StudentProfile, JourneyError> {
    journey
        .profile
        .as_mut()
        .ok_or_else(|| JourneyError::Internal("profile missing after onboarding".into()))
}

/// Checks that `answers` covers exactly the form and scores each item.
fn score_form(
    form: &TestForm,
    answers: &BTreeMap<String, String>,
    ctx: &JourneyContext,
) -> Result<BTreeMap<String, bool>, JourneyError> {
    let missing: Vec<&str> = form
        .item_ids
        .iter()
        .filter(|id| !answers.contains_key(*id))
        .map(String::as_str)
        .collect();
    if !missing.is_empty() {
        return Err(invalid(
            "missing_answers",
            format!("missing answers for {}", missing.join(", ")),
        ));
    }
    let extra: Vec<&str> = answers
        .keys()
        .filter(|id| !form.item_ids.contains(id))
        .map(String::as_str)
        .collect();
    if !extra.is_empty() {
        return Err(invalid(
            "unknown_items",
            format!("items not on this form: {}", extra.join(", ")),
        ));
    }
    let mut scored = BTreeMap::new();
    for id in &form.item_ids {
        let exercise = ctx.bank.get(id).ok_or_else(|| internal(format!("{id} not in bank")))?;
        scored.insert(id.clone(), exercise.is_correct(&answers[id]));
    }
    Ok(scored)
}

fn default_next_concept(journey: &Journey, ctx: &JourneyContext) -> Option<Concept> {
    let taught = ctx.bank.concepts();
    Concept::ALL
        .into_iter()
        .find(|c| taught.contains(c) && !journey.state.completed_concepts.contains(c))
}

/// Selects exercises, builds the system prompt and asks for the opening.
fn start_session(
    journey: &mut Journey,
    concept: Concept,
    ctx: &JourneyContext,
    effects: &mut Vec<Effect>,
) -> Result<(), JourneyError> {
    let profile = journey.profile.as_ref().ok_or_else(|| internal("profile missing"))?;
    let ability = profile
        .concept(concept)
        .and_then(|s| s.theta_pre)
        .ok_or_else(|| internal(format!("no pre-test ability for {concept}")))?;
    let seen: BTreeSet<String> = journey
        .state
        .sessions
        .iter()
        .flat_map(|s| s.exercises.iter().cloned())
        .collect();
    let exercises: Vec<Exercise> =
        select_exercises(&ability, concept, &ctx.bank, ctx.config.exercises_per_session, &seen)
            .map_err(internal)?
            .into_iter()
            .cloned()
            .collect();
    let session_index = journey.state.session_index + 1;
    let prev_summary = if session_index > 1 {
        profile.last_summary()
    } else {
        None
    };
    let prompt = ctx
        .engine
        .build_system_prompt(profile, concept, &exercises, session_index, prev_summary)
        .map_err(internal)?;

    let st = &mut journey.state;
    st.phase = Phase::TutoringSession;
    st.current_concept = Some(concept);
    st.session_index = session_index;
    st.exercises_in_play = exercises.iter().map(|e| e.item_id.clone()).collect();
    st.current_exercise = st.exercises_in_play.first().cloned();
    st.first_response_outcomes.clear();
    st.session_transcript = vec![ChatMessage::system(prompt)];
    st.awaiting_tutor = true;
    st.student_turns = 0;
    st.posttest_form = None;

    effects.push(Effect::SelectedExercises {
        concept,
        item_ids: st.exercises_in_play.clone(),
    });
    effects.push(Effect::BuiltPrompt { session_index });
    effects.push(Effect::RequestTutorReply {
        session_key: journey.session_key(),
        history: journey.state.session_transcript.clone(),
    });
    Ok(())
}

/// Closes the running session: archives it, stores the first-response
/// ratio and assembles the post-test.
fn finish_session(
    journey: &mut Journey,
    reason: FinishReason,
    ctx: &JourneyContext,
    effects: &mut Vec<Effect>,
) -> Result<(), JourneyError> {
    let concept = journey
        .state
        .current_concept
        .ok_or_else(|| internal("no concept in play"))?;
    let outcomes = &journey.state.first_response_outcomes;
    let ratio =
        (!outcomes.is_empty()).then(|| outcomes.values().filter(|c| **c).count() as f64 / outcomes.len() as f64);
    let theta = {
        let profile = profile_mut(journey)?;
        profile.set_first_response_ratio(concept, ratio).map_err(internal)?;
        profile
            .concept(concept)
            .and_then(|s| s.theta_pre)
            .ok_or_else(|| internal("no pre-test ability"))?
    };
    let form = assemble_posttest(&ctx.bank, concept, &theta, &BTreeSet::new()).map_err(internal)?;

    let st = &mut journey.state;
    st.sessions.push(SessionRecord {
        session_index: st.session_index,
        concept,
        exercises: st.exercises_in_play.clone(),
        transcript: st.session_transcript.clone(),
        first_responses: st.first_response_outcomes.clone(),
        first_response_ratio: ratio,
        reason,
    });
    st.phase = Phase::PostTest;
    st.awaiting_tutor = false;
    st.posttest_form = Some(form);
    effects.push(Effect::SessionClosed { concept, reason, ratio });

    let summarize = reason != FinishReason::Abort || ctx.config.summarize_on_abort;
    if summarize {
        st.summary_pending = true;
        let mut history = st.session_transcript.clone();
        history.push(ChatMessage::system(ctx.engine.build_summary_prompt()));
        effects.push(Effect::RequestSummary {
            session_key: journey.session_key(),
            history,
        });
    } else {
        st.summary_pending = false;
        profile_mut(journey)?.apply_summary(ParsedSummary::placeholder(concept));
        effects.push(Effect::SummaryApplied {
            parse_error: Some("summary skipped".into()),
        });
    }
    Ok(())
}

/// Pure transition: the successor journey and the effects it requests.
/// Illegal events leave the input untouched and return an error.
pub fn advance(
    journey: &Journey,
    event: &EventKind,
    ctx: &JourneyContext,
) -> Result<(Journey, Vec<Effect>), JourneyError> {
    if journey.state.phase != event.expected_phase() {
        return Err(out_of_phase(journey, event));
    }
    let mut next = journey.clone();
    let mut effects = Vec::new();

    match event {
        EventKind::SurveySubmitted(survey) => {
            let concepts: Vec<Concept> = ctx.bank.concepts().into_iter().collect();
            let profile = init_profile(&journey.student_id, survey, &concepts)
                .map_err(|e| invalid("invalid_survey", e.to_string()))?;
            next.profile = Some(profile);
            next.state.pretest_form = Some(assemble_pretest(&ctx.bank).map_err(internal)?);
            next.state.phase = Phase::PreTest;
        }

        EventKind::PretestSubmitted { answers, concept } => {
            let form = next
                .state
                .pretest_form
                .clone()
                .ok_or_else(|| internal("no pre-test form"))?;
            let scored = score_form(&form, answers, ctx)?;
            let concept = match concept {
                Some(c) if !ctx.bank.concepts().contains(c) => {
                    return Err(invalid("unknown_concept", format!("{c} is not taught by this bank")))
                }
                Some(c) => *c,
                None => default_next_concept(&next, ctx).ok_or_else(|| internal("bank has no concepts"))?,
            };
            let profile = profile_mut(&mut next)?;
            profile
                .record_pretest(&form, &ctx.bank, &scored, &ctx.config.thresholds)
                .map_err(internal)?;
            for c in &form.concepts {
                if let Some(ability) = profile.concept(*c).and_then(|s| s.theta_pre) {
                    effects.push(Effect::EstimatedTheta { concept: *c, ability });
                }
            }
            start_session(&mut next, concept, ctx, &mut effects)?;
        }

        EventKind::StudentMessage { content, exercise } => {
            if next.state.awaiting_tutor {
                return Err(conflict(
                    "reply_in_flight",
                    "the tutor has not replied to the previous message yet",
                ));
            }
            if content.trim().is_empty() {
                return Err(invalid("empty_message", "message is empty"));
            }
            if let Some(id) = exercise {
                if !next.state.exercises_in_play.contains(id) {
                    return Err(invalid("unknown_exercise", format!("{id} is not in play")));
                }
                next.state.current_exercise = Some(id.clone());
            }
            let target = next.state.current_exercise.clone();
            if let (Some(label), Some(item_id)) = (extract_answer(content), target) {
                if !next.state.first_response_outcomes.contains_key(&item_id) {
                    let correct = ctx
                        .bank
                        .get(&item_id)
                        .ok_or_else(|| internal(format!("{item_id} not in bank")))?
                        .is_correct(&label);
                    next.state.first_response_outcomes.insert(item_id.clone(), correct);
                    effects.push(Effect::RecordedFirstResponse { item_id, correct });
                }
            }
            next.state
                .session_transcript
                .push(ChatMessage::student(content.clone()));
            next.state.student_turns += 1;
            next.state.awaiting_tutor = true;
            effects.push(Effect::RequestTutorReply {
                session_key: next.session_key(),
                history: next.state.session_transcript.clone(),
            });
        }

        EventKind::TutorMessage { content } => {
            if !next.state.awaiting_tutor {
                return Err(conflict(
                    "unexpected_tutor_message",
                    "no student message is awaiting a reply",
                ));
            }
            next.state.awaiting_tutor = false;
            next.state.session_transcript.push(ChatMessage::tutor(content.clone()));
            if let Some(n) = QUESTION_REF
                .captures_iter(content)
                .last()
                .and_then(|c| c[1].parse::<usize>().ok())
            {
                if let Some(id) = n.checked_sub(1).and_then(|k| next.state.exercises_in_play.get(k)) {
                    next.state.current_exercise = Some(id.clone());
                }
            }
            if sentinel_terminated(content) {
                finish_session(&mut next, FinishReason::Sentinel, ctx, &mut effects)?;
            } else if next.state.student_turns >= ctx.config.turn_cap {
                finish_session(&mut next, FinishReason::TurnCap, ctx, &mut effects)?;
            }
        }

        EventKind::SessionFinished { reason } => {
            if *reason != FinishReason::Abort {
                return Err(invalid("invalid_reason", "only an abort can be requested"));
            }
            next.state.awaiting_tutor = false;
            finish_session(&mut next, FinishReason::Abort, ctx, &mut effects)?;
        }

        EventKind::SummaryRecorded { reply, error } => {
            if !next.state.summary_pending {
                return Err(conflict("no_summary_pending", "no session summary is pending"));
            }
            let concept = next.state.current_concept.ok_or_else(|| internal("no concept"))?;
            let (summary, parse_error) = match (reply, error) {
                (Some(text), _) => match ctx.engine.parse_summary(text, concept) {
                    Ok(s) => (s, None),
                    Err(e) => (ParsedSummary::placeholder(concept), Some(e.to_string())),
                },
                (None, err) => (
                    ParsedSummary::placeholder(concept),
                    Some(err.clone().unwrap_or_else(|| "no summary reply".into())),
                ),
            };
            profile_mut(&mut next)?.apply_summary(summary);
            next.state.summary_pending = false;
            next.state.last_summary_error = parse_error.clone();
            effects.push(Effect::SummaryApplied { parse_error });
        }

        EventKind::PosttestSubmitted { answers } => {
            if next.state.summary_pending {
                return Err(conflict(
                    "summary_pending",
                    "the session summary has not been recorded yet",
                ));
            }
            let form = next
                .state
                .posttest_form
                .clone()
                .ok_or_else(|| internal("no post-test form"))?;
            let scored = score_form(&form, answers, ctx)?;
            let concept = next.state.current_concept.ok_or_else(|| internal("no concept"))?;
            let responses: Vec<(ItemParams, bool)> = form
                .item_ids
                .iter()
                .map(|id| {
                    let params = ctx.bank.get(id).and_then(|e| e.params.clone());
                    params
                        .map(|p| (p, scored[id]))
                        .ok_or_else(|| internal(format!("{id} uncalibrated")))
                })
                .collect::<Result<_, _>>()?;
            let items = ctx.bank.concept_params(concept);
            profile_mut(&mut next)?
                .record_posttest(concept, &responses, &items)
                .map_err(internal)?;
            next.state.completed_concepts.insert(concept);
            next.state.phase = if default_next_concept(&next, ctx).is_some() {
                Phase::ConceptSelect
            } else {
                Phase::Completed
            };
        }

        EventKind::ConceptChosen { concept } => {
            if !ctx.bank.concepts().contains(concept) {
                return Err(invalid(
                    "unknown_concept",
                    format!("{concept} is not taught by this bank"),
                ));
            }
            if next.state.completed_concepts.contains(concept) {
                return Err(invalid("concept_done", format!("{concept} has already been studied")));
            }
            start_session(&mut next, *concept, ctx, &mut effects)?;
        }
    }

    effects.push(Effect::Persist);
    Ok((next, effects))
}

/// Rebuilds a journey from its event log.
pub fn replay<'a>(
    student_id: &str,
    events: impl IntoIterator<Item = &'a EventKind>,
    ctx: &JourneyContext,
) -> Result<Journey, JourneyError> {
    let mut journey = Journey::new(student_id);
    for event in events {
        journey = advance(&journey, event, ctx)?.0;
    }
    Ok(journey)
}
