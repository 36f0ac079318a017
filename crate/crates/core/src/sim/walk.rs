use std::collections::BTreeMap;

use rand::seq::IndexedRandom;
use rand::Rng;

use super::rng_for;
use crate::item_bank::{Concept, TestForm};
use crate::orchestrator::{advance, EventKind, FinishReason, Journey, JourneyContext, JourneyError, Phase};
use crate::student_model::{OnboardingSurvey, Perception, Processing, ProficiencyLabel, Understanding};

/// Outcome of one random event sequence.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WalkReport {
    pub steps: usize,
    pub accepted: usize,
    pub rejected: usize,
    pub phases: Vec<Phase>,
    pub violations: Vec<String>,
}

const STUDENT_LINES: &[&str] = &[
    "A",
    "b",
    "I think it's C.",
    "D",
    "A or B?",
    "hello",
    "why is that?",
    "E",
    "ok, next",
];
const TUTOR_LINES: &[&str] = &[
    "Let's start with Question 1.",
    "Now try Question 2.",
    "Look at Question 3 again.",
    "Good thinking. Any more questions?",
    "We are FINISHED. with Question 1, onwards.",
    "Great work today! FINISHED.",
];
const SUMMARY_REPLIES: &[&str] = &[
    "*Specific topics: commas\n*Action items regarding the student's response level: more\n*Action items regarding the student's learning style: diagrams",
    "I could not summarize this session.",
];

fn survey(rng: &mut impl Rng) -> OnboardingSurvey {
    let label = |rng: &mut dyn rand::RngCore| {
        *[
            ProficiencyLabel::Weak,
            ProficiencyLabel::Moderate,
            ProficiencyLabel::Strong,
        ]
        .choose(rng)
        .unwrap()
    };
    OnboardingSurvey {
        perception: rng.random_bool(0.95).then_some(Perception::Sensory),
        processing: Some(if rng.random() {
            Processing::Active
        } else {
            Processing::Reflective
        }),
        understanding: Some(Understanding::Sequential),
        self_reported: Concept::ALL.iter().map(|c| (*c, label(rng))).collect(),
        demographics: BTreeMap::new(),
    }
}

fn answers(form: Option<&TestForm>, rng: &mut impl Rng) -> BTreeMap<String, String> {
    let mut out: BTreeMap<String, String> = form
        .map(|f| {
            f.item_ids
                .iter()
                .map(|id| (id.clone(), ["A", "B", "C", "D"].choose(rng).unwrap().to_string()))
                .collect()
        })
        .unwrap_or_default();
    if rng.random_bool(0.05) {
        let drop = out.keys().next().cloned();
        if let Some(k) = drop {
            out.remove(&k);
        }
    }
    out
}

/// An event for the current phase most of the time, otherwise any kind.
fn random_event(j: &Journey, rng: &mut impl Rng) -> EventKind {
    let phase = if rng.random_bool(0.85) {
        j.phase()
    } else {
        *[
            Phase::Onboarding,
            Phase::PreTest,
            Phase::TutoringSession,
            Phase::PostTest,
            Phase::ConceptSelect,
        ]
        .choose(rng)
        .unwrap()
    };
    let s = &j.state;
    match phase {
        Phase::Onboarding => EventKind::SurveySubmitted(survey(rng)),
        Phase::PreTest => EventKind::PretestSubmitted {
            answers: answers(s.pretest_form.as_ref(), rng),
            concept: rng.random_bool(0.3).then(|| *Concept::ALL.choose(rng).unwrap()),
        },
        Phase::TutoringSession => {
            let roll = rng.random::<f64>();
            if roll < 0.02 {
                EventKind::SessionFinished {
                    reason: FinishReason::Abort,
                }
            } else if s.awaiting_tutor == (roll < 0.9) {
                let weights = if rng.random_bool(0.15) {
                    TUTOR_LINES
                } else {
                    &TUTOR_LINES[..4]
                };
                EventKind::TutorMessage {
                    content: weights.choose(rng).unwrap().to_string(),
                }
            } else {
                let exercise = if rng.random_bool(0.2) {
                    s.exercises_in_play.choose(rng).cloned()
                } else {
                    None
                };
                EventKind::StudentMessage {
                    content: STUDENT_LINES.choose(rng).unwrap().to_string(),
                    exercise,
                }
            }
        }
        Phase::PostTest => {
            if s.summary_pending || rng.random_bool(0.1) {
                let reply = rng
                    .random_bool(0.9)
                    .then(|| SUMMARY_REPLIES.choose(rng).unwrap().to_string());
                EventKind::SummaryRecorded {
                    error: reply.is_none().then(|| "down".into()),
                    reply,
                }
            } else {
                EventKind::PosttestSubmitted {
                    answers: answers(s.posttest_form.as_ref(), rng),
                }
            }
        }
        Phase::ConceptSelect | Phase::Completed => EventKind::ConceptChosen {
            concept: *Concept::ALL.choose(rng).unwrap(),
        },
    }
}

/// Checks one accepted transition against the journey invariants.
fn check(before: &Journey, after: &Journey, ctx: &JourneyContext, out: &mut Vec<String>) {
    let (b, a) = (&before.state, &after.state);
    if a.phase != b.phase && !b.phase.successors().contains(&a.phase) {
        out.push(format!("illegal transition {} -> {}", b.phase, a.phase));
    }
    if a.phase == Phase::TutoringSession && (a.current_concept.is_none() || a.exercises_in_play.is_empty()) {
        out.push("tutoring without concept or exercises".into());
    }
    if a.phase == Phase::Completed && a.completed_concepts != ctx.bank.concepts() {
        out.push("completed with concepts left".into());
    }
    let new_session = a.session_index != b.session_index;
    if b.phase == Phase::TutoringSession {
        // Outcomes recorded so far must survive, either live or archived.
        let kept = if a.sessions.len() > b.sessions.len() {
            &a.sessions.last().unwrap().first_responses
        } else {
            &a.first_response_outcomes
        };
        for (id, v) in &b.first_response_outcomes {
            if kept.get(id) != Some(v) {
                out.push(format!("first response for {id} lost or rewritten"));
            }
        }
    } else if !new_session && a.first_response_outcomes != b.first_response_outcomes {
        out.push("first responses changed outside a session".into());
    }
    if a.sessions.len() > b.sessions.len() {
        let s = a.sessions.last().unwrap();
        let n = s.first_responses.len();
        let expected = (n > 0).then(|| s.first_responses.values().filter(|c| **c).count() as f64 / n as f64);
        let stored = after
            .profile
            .as_ref()
            .and_then(|p| p.concept(s.concept))
            .and_then(|c| c.first_response_ratio);
        if s.first_response_ratio != expected || stored != expected {
            out.push(format!("ratio mismatch for session {}", s.session_index));
        }
    }
}

/// Feeds up to `max_steps` random events through [`advance`], checking
/// phase order, first-response integrity and the rejection contract.
pub fn random_walk(seed: u64, max_steps: usize, ctx: &JourneyContext) -> WalkReport {
    let mut rng = rng_for(seed, u64::MAX);
    let mut journey = Journey::new(format!("walk-{seed}"));
    let mut report = WalkReport {
        phases: vec![journey.phase()],
        ..Default::default()
    };
    while report.steps < max_steps && journey.phase() != Phase::Completed {
        report.steps += 1;
        let event = random_event(&journey, &mut rng);
        match advance(&journey, &event, ctx) {
            Ok((next, _)) => {
                report.accepted += 1;
                check(&journey, &next, ctx, &mut report.violations);
                if next.phase() != journey.phase() {
                    report.phases.push(next.phase());
                }
                journey = next;
            }
            Err(e) => {
                report.rejected += 1;
                let phase_mismatch = event.expected_phase() != journey.phase();
                if phase_mismatch != matches!(e, JourneyError::OutOfPhase { .. }) {
                    report
                        .violations
                        .push(format!("wrong rejection for {}: {e}", event.name()));
                }
                if matches!(e, JourneyError::Internal(_)) {
                    report.violations.push(format!("internal error: {e}"));
                }
            }
        }
    }
    report
}
