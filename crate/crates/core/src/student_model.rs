//! Three-axis student model: cognitive state (IRT ability and gain),
//! affective state (self-report vs measured discrepancy) and learning style.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::irt::{estimate_theta, learning_gain, Ability, IrtError, ItemParams};
use crate::item_bank::{Concept, ItemBank, TestForm};

pub const PROFILE_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error, PartialEq)]
pub enum ProfileError {
    #[error("{field}: {message}")]
    Validation { field: String, message: String },
    #[error("{0}")]
    State(String),
    #[error(transparent)]
    Irt(#[from] IrtError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Perception {
    Sensory,
    Intuitive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Processing {
    Active,
    Reflective,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Understanding {
    Sequential,
    Global,
}

/// Felder–Silverman style restricted to the three dimensions a chat
/// interface can adapt to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LearningStyle {
    pub perception: Perception,
    pub processing: Processing,
    pub understanding: Understanding,
}

impl LearningStyle {
    /// e.g. `Active/Intuitive/Global` (processing, perception, understanding).
    pub fn label(&self) -> String {
        let processing = match self.processing {
            Processing::Active => "Active",
            Processing::Reflective => "Reflective",
        };
        let perception = match self.perception {
            Perception::Sensory => "Sensory",
            Perception::Intuitive => "Intuitive",
        };
        let understanding = match self.understanding {
            Understanding::Sequential => "Sequential",
            Understanding::Global => "Global",
        };
        format!("{processing}/{perception}/{understanding}")
    }

    pub fn all() -> impl Iterator<Item = LearningStyle> {
        [Perception::Sensory, Perception::Intuitive]
            .into_iter()
            .flat_map(|perception| {
                [Processing::Active, Processing::Reflective]
                    .into_iter()
                    .flat_map(move |processing| {
                        [Understanding::Sequential, Understanding::Global]
                            .into_iter()
                            .map(move |understanding| LearningStyle {
                                perception,
                                processing,
                                understanding,
                            })
                    })
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ProficiencyLabel {
    Weak,
    Moderate,
    Strong,
}

impl ProficiencyLabel {
    pub fn rank(self) -> u8 {
        self as u8
    }
}

impl fmt::Display for ProficiencyLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProficiencyLabel::Weak => "Weak",
            ProficiencyLabel::Moderate => "Moderate",
            ProficiencyLabel::Strong => "Strong",
        })
    }
}

/// theta < weak_below is Weak, theta > strong_above is Strong, otherwise
/// Moderate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProficiencyThresholds {
    pub weak_below: f64,
    pub strong_above: f64,
}

impl Default for ProficiencyThresholds {
    fn default() -> Self {
        Self {
            weak_below: -0.5,
            strong_above: 0.5,
        }
    }
}

impl ProficiencyThresholds {
    pub fn label(&self, theta: f64) -> ProficiencyLabel {
        if theta < self.weak_below {
            ProficiencyLabel::Weak
        } else if theta > self.strong_above {
            ProficiencyLabel::Strong
        } else {
            ProficiencyLabel::Moderate
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Discrepancy {
    Underconfident,
    Aligned,
    Overconfident,
}

pub fn discrepancy(self_report: ProficiencyLabel, measured: ProficiencyLabel) -> Discrepancy {
    use std::cmp::Ordering::*;
    match measured.rank().cmp(&self_report.rank()) {
        Greater => Discrepancy::Underconfident,
        Less => Discrepancy::Overconfident,
        Equal => Discrepancy::Aligned,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptState {
    pub concept: Concept,
    pub theta_pre: Option<Ability>,
    pub theta_post: Option<Ability>,
    pub self_reported: ProficiencyLabel,
    pub measured: Option<ProficiencyLabel>,
    pub discrepancy: Option<Discrepancy>,
    pub gain: Option<f64>,
    /// Share of first answer attempts that were correct in the tutoring
    /// session on this concept; absent until a session closes with at least
    /// one scored attempt.
    pub first_response_ratio: Option<f64>,
}

impl ConceptState {
    fn new(concept: Concept, self_reported: ProficiencyLabel) -> Self {
        Self {
            concept,
            theta_pre: None,
            theta_post: None,
            self_reported,
            measured: None,
            discrepancy: None,
            gain: None,
            first_response_ratio: None,
        }
    }
}

/// The three fields of a session-end summary reply. "Unknown" is a legal
/// value for any of them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedSummary {
    pub specific_topics: String,
    pub response_level_actions: String,
    pub learning_style_actions: String,
    pub session_concept: Concept,
}

impl ParsedSummary {
    pub const UNKNOWN: &'static str = "Unknown";

    pub fn placeholder(session_concept: Concept) -> Self {
        Self {
            specific_topics: Self::UNKNOWN.into(),
            response_level_actions: Self::UNKNOWN.into(),
            learning_style_actions: Self::UNKNOWN.into(),
            session_concept,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct OnboardingSurvey {
    #[serde(default)]
    pub perception: Option<Perception>,
    #[serde(default)]
    pub processing: Option<Processing>,
    #[serde(default)]
    pub understanding: Option<Understanding>,
    #[serde(default)]
    pub self_reported: BTreeMap<Concept, ProficiencyLabel>,
    #[serde(default)]
    pub demographics: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudentProfile {
    pub schema_version: u32,
    pub student_id: String,
    pub demographics: BTreeMap<String, String>,
    pub style: LearningStyle,
    pub concept_states: BTreeMap<Concept, ConceptState>,
    pub summaries: Vec<ParsedSummary>,
    pub sessions_completed: usize,
}

fn missing(field: &str) -> ProfileError {
    ProfileError::Validation {
        field: field.to_string(),
        message: "missing from onboarding survey".into(),
    }
}

/// Builds the initial profile from onboarding answers; `concepts` are the
/// concepts the bank teaches.
pub fn init_profile(
    student_id: &str,
    survey: &OnboardingSurvey,
    concepts: &[Concept],
) -> Result<StudentProfile, ProfileError> {
    let style = LearningStyle {
        perception: survey.perception.ok_or_else(|| missing("perception"))?,
        processing: survey.processing.ok_or_else(|| missing("processing"))?,
        understanding: survey.understanding.ok_or_else(|| missing("understanding"))?,
    };
    let mut concept_states = BTreeMap::new();
    for &concept in concepts {
        let label = survey
            .self_reported
            .get(&concept)
            .ok_or_else(|| missing(&format!("self_reported.{concept}")))?;
        concept_states.insert(concept, ConceptState::new(concept, *label));
    }
    Ok(StudentProfile {
        schema_version: PROFILE_SCHEMA_VERSION,
        student_id: student_id.to_string(),
        demographics: survey.demographics.clone(),
        style,
        concept_states,
        summaries: Vec::new(),
        sessions_completed: 0,
    })
}

impl StudentProfile {
    pub fn concept(&self, concept: Concept) -> Option<&ConceptState> {
        self.concept_states.get(&concept)
    }

    fn concept_mut(&mut self, concept: Concept) -> Result<&mut ConceptState, ProfileError> {
        self.concept_states
            .get_mut(&concept)
            .ok_or_else(|| ProfileError::State(format!("profile has no state for {concept}")))
    }

    /// Scores the diagnostic form: per concept, MAP theta, measured label
    /// and discrepancy. `responses` maps item_id to correctness and must
    /// cover every item of the form.
    pub fn record_pretest(
        &mut self,
        form: &TestForm,
        bank: &ItemBank,
        responses: &BTreeMap<String, bool>,
        thresholds: &ProficiencyThresholds,
    ) -> Result<(), ProfileError> {
        let missing: Vec<&str> = form
            .item_ids
            .iter()
            .filter(|id| !responses.contains_key(*id))
            .map(String::as_str)
            .collect();
        if !missing.is_empty() {
            return Err(ProfileError::Validation {
                field: "responses".into(),
                message: format!("missing answers for {}", missing.join(", ")),
            });
        }

        let mut by_concept: BTreeMap<Concept, Vec<(ItemParams, bool)>> = BTreeMap::new();
        for id in &form.item_ids {
            let exercise = bank.get(id).ok_or_else(|| ProfileError::Validation {
                field: "form".into(),
                message: format!("item {id} is not in the bank"),
            })?;
            let params = exercise.params.clone().ok_or_else(|| ProfileError::Validation {
                field: "form".into(),
                message: format!("item {id} has no calibrated parameters"),
            })?;
            by_concept
                .entry(exercise.concept)
                .or_default()
                .push((params, responses[id]));
        }

        let mut updates = Vec::new();
        for (concept, scored) in &by_concept {
            if !self.concept_states.contains_key(concept) {
                return Err(ProfileError::State(format!("profile has no state for {concept}")));
            }
            updates.push((*concept, estimate_theta(scored)?.ability));
        }
        for (concept, ability) in updates {
            let state = self.concept_mut(concept)?;
            let measured = thresholds.label(ability.theta);
            state.theta_pre = Some(ability);
            state.measured = Some(measured);
            state.discrepancy = Some(discrepancy(state.self_reported, measured));
        }
        Ok(())
    }

    /// Appends a session summary. History is never rewritten.
    pub fn apply_summary(&mut self, summary: ParsedSummary) {
        self.summaries.push(summary);
        self.sessions_completed += 1;
    }

    pub fn last_summary(&self) -> Option<&ParsedSummary> {
        self.summaries.last()
    }

    pub fn set_first_response_ratio(&mut self, concept: Concept, ratio: Option<f64>) -> Result<(), ProfileError> {
        self.concept_mut(concept)?.first_response_ratio = ratio;
        Ok(())
    }

    /// Post-test theta and learning gain over the concept's calibrated items.
    pub fn record_posttest(
        &mut self,
        concept: Concept,
        responses: &[(ItemParams, bool)],
        concept_items: &[ItemParams],
    ) -> Result<f64, ProfileError> {
        let pre = self
            .concept(concept)
            .and_then(|s| s.theta_pre)
            .ok_or_else(|| ProfileError::State(format!("no pre-test recorded for {concept}")))?;
        let post = estimate_theta(responses)?.ability;
        let gain = learning_gain(&pre, &post, concept_items)?;
        let state = self.concept_mut(concept)?;
        state.theta_post = Some(post);
        state.gain = Some(gain);
        Ok(gain)
    }

    pub fn concepts_with_posttest(&self) -> BTreeSet<Concept> {
        self.concept_states
            .values()
            .filter(|s| s.theta_post.is_some())
            .map(|s| s.concept)
            .collect()
    }
}
