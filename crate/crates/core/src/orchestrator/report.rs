use serde::{Deserialize, Serialize};

use super::JourneyError;
use crate::irt::{mean_prob_correct, Ability};
use crate::item_bank::{Concept, ItemBank};
use crate::student_model::StudentProfile;

/// Pre/post comparison for one concept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProgressReport {
    pub concept: Concept,
    pub theta_pre: f64,
    pub theta_post: f64,
    pub p_pre: f64,
    pub p_post: f64,
    pub gain: f64,
}

/// Mean predicted success over the concept's calibrated items before and
/// after tutoring.
pub fn progress_report(
    profile: &StudentProfile,
    concept: Concept,
    bank: &ItemBank,
) -> Result<ProgressReport, JourneyError> {
    let state = profile.concept(concept).ok_or_else(|| JourneyError::Validation {
        code: "unknown_concept",
        message: format!("no state for {concept}"),
    })?;
    let (Some(pre), Some(post)) = (state.theta_pre, state.theta_post) else {
        return Err(JourneyError::Conflict {
            code: "posttest_missing",
            message: format!("no post-test recorded for {concept}"),
        });
    };
    report_for(concept, pre, post, &bank.concept_params(concept))
}

pub(crate) fn report_for(
    concept: Concept,
    pre: Ability,
    post: Ability,
    items: &[crate::irt::ItemParams],
) -> Result<ProgressReport, JourneyError> {
    let p = |a: &Ability| mean_prob_correct(a, items).map_err(|e| JourneyError::Internal(e.to_string()));
    let (p_pre, p_post) = (p(&pre)?, p(&post)?);
    Ok(ProgressReport {
        concept,
        theta_pre: pre.theta,
        theta_post: post.theta,
        p_pre,
        p_post,
        gain: p_post - p_pre,
    })
}
