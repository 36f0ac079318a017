//! Rendered prompts compared against hand-transcribed reference text.

use std::collections::BTreeSet;

use tutorloop_core::item_bank::{Choice, Concept, Exercise, ItemRole};
use tutorloop_core::prompt::{render_materials, PromptEngine};
use tutorloop_core::student_model::{
    discrepancy, init_profile, LearningStyle, OnboardingSurvey, ParsedSummary, Perception, Processing,
    ProficiencyLabel, StudentProfile, Understanding,
};

const SESSION1: &str = include_str!("fixtures/session1_prompt.golden.txt");
const SESSION2: &str = include_str!("fixtures/session2_prompt.golden.txt");
const SUMMARY_REPLY: &str = include_str!("fixtures/session1_summary_reply.txt");
const MATERIALS: &str = include_str!("fixtures/materials_two_items.golden.txt");

const UNDERCONFIDENT_LINE: &str = "- The student has self-reported his/her proficiency about this concept as “Weak”, but the measured proficiency is “Strong”. Encourage the student by telling that he/she is better than he/she thinks according to the pre-test result.\n";

fn exercise(id: &str, stem: &str, choices: &[&str], answer: &str, explanation: &str) -> Exercise {
    Exercise {
        item_id: id.into(),
        concept: Concept::Pronouns,
        stem: stem.into(),
        choices: choices
            .iter()
            .zip(["A", "B", "C", "D", "E"])
            .map(|(t, l)| Choice {
                label: l.into(),
                text: (*t).into(),
            })
            .collect(),
        answer: answer.into(),
        explanation: explanation.into(),
        params: None,
        role_tags: BTreeSet::from([ItemRole::Tutoring]),
    }
}

fn materials() -> Vec<Exercise> {
    vec![
        exercise("x1", "Stem one?", &["alpha", "beta"], "B", "Because beta."),
        exercise(
            "x2",
            "Stem two?",
            &["gamma", "delta", "epsilon"],
            "C",
            "Because epsilon.",
        ),
    ]
}

fn participant(self_reported: ProficiencyLabel, measured: ProficiencyLabel) -> StudentProfile {
    let survey = OnboardingSurvey {
        perception: Some(Perception::Intuitive),
        processing: Some(Processing::Active),
        understanding: Some(Understanding::Global),
        self_reported: Concept::ALL.iter().map(|c| (*c, self_reported)).collect(),
        demographics: Default::default(),
    };
    let mut profile = init_profile("p-07", &survey, &Concept::ALL).unwrap();
    for state in profile.concept_states.values_mut() {
        state.measured = Some(measured);
        state.discrepancy = Some(discrepancy(self_reported, measured));
    }
    profile
}

fn reference_summary() -> ParsedSummary {
    PromptEngine::default()
        .parse_summary(SUMMARY_REPLY, Concept::Pronouns)
        .unwrap()
}

fn session2(profile: &StudentProfile) -> String {
    PromptEngine::default()
        .build_system_prompt(
            profile,
            Concept::Punctuation,
            &materials(),
            2,
            Some(&reference_summary()),
        )
        .unwrap()
}

fn struggling(mut profile: StudentProfile) -> StudentProfile {
    profile.set_first_response_ratio(Concept::Pronouns, Some(0.25)).unwrap();
    profile
}

#[test]
fn materials_block() {
    assert_eq!(render_materials(&materials()), MATERIALS);
}

#[test]
fn first_session_matches_reference() {
    let profile = participant(ProficiencyLabel::Weak, ProficiencyLabel::Strong);
    assert_eq!(profile.style.label(), "Active/Intuitive/Global");
    let text = PromptEngine::default()
        .build_system_prompt(&profile, Concept::Pronouns, &materials(), 1, None)
        .unwrap();
    assert_eq!(text, format!("{SESSION1}{MATERIALS}"));
}

#[test]
fn reference_summary_parses() {
    let s = reference_summary();
    assert!(s.specific_topics.starts_with("The session focused on enhancing"));
    assert!(s.specific_topics.ends_with("as the session progressed."));
    assert!(s
        .response_level_actions
        .starts_with("The student exhibited a good engagement"));
    assert!(s
        .learning_style_actions
        .starts_with("Given the student's Active/Intuitive/Global"));
    assert!(s.learning_style_actions.ends_with("whenever teaching new topics."));
    assert_eq!(s.session_concept, Concept::Pronouns);
}

#[test]
fn second_session_matches_reference() {
    let profile = struggling(participant(ProficiencyLabel::Weak, ProficiencyLabel::Strong));
    assert_eq!(session2(&profile), format!("{SESSION2}{MATERIALS}"));
}

#[test]
fn second_session_without_struggle_drops_the_block() {
    let profile = participant(ProficiencyLabel::Weak, ProficiencyLabel::Strong);
    let start = SESSION2.find("- The student had difficulty").unwrap();
    let end = SESSION2.find("- If the student gives the correct answer").unwrap();
    let expected = format!("{}{}{MATERIALS}", &SESSION2[..start], &SESSION2[end..]);
    assert_eq!(session2(&profile), expected);
}

#[test]
fn aligned_student_gets_no_discrepancy_line() {
    let profile = participant(ProficiencyLabel::Strong, ProficiencyLabel::Strong);
    let text = PromptEngine::default()
        .build_system_prompt(&profile, Concept::Pronouns, &materials(), 1, None)
        .unwrap();
    assert_eq!(
        text,
        format!("{}{MATERIALS}", SESSION1.replace(UNDERCONFIDENT_LINE, ""))
    );

    let text = session2(&struggling(profile));
    assert_eq!(
        text,
        format!("{}{MATERIALS}", SESSION2.replace(UNDERCONFIDENT_LINE, ""))
    );
}

#[test]
fn overconfident_student_gets_neutral_note() {
    let profile = participant(ProficiencyLabel::Strong, ProficiencyLabel::Weak);
    let text = PromptEngine::default()
        .build_system_prompt(&profile, Concept::Pronouns, &materials(), 1, None)
        .unwrap();
    let note = "- The student has self-reported his/her proficiency about this concept as “Strong”, but the measured proficiency is “Weak”. The pre-test suggests room to grow, so check the student's understanding at each step without discouraging him/her.\n";
    assert_eq!(
        text,
        format!("{}{MATERIALS}", SESSION1.replace(UNDERCONFIDENT_LINE, note))
    );
}

#[test]
fn third_session_uses_ordinal_and_previous_concept() {
    let profile = struggling(participant(ProficiencyLabel::Weak, ProficiencyLabel::Strong));
    let text = PromptEngine::default()
        .build_system_prompt(
            &profile,
            Concept::Transitions,
            &materials(),
            3,
            Some(&reference_summary()),
        )
        .unwrap();
    let expected = SESSION2
        .replace("second class", "third class")
        .replace("teaching about Punctuation", "teaching about Transitions");
    assert_eq!(text, format!("{expected}{MATERIALS}"));
}

#[test]
fn each_style_swaps_only_its_block() {
    let engine = PromptEngine::default();
    let reference = engine.strategies_for(LearningStyle {
        perception: Perception::Intuitive,
        processing: Processing::Active,
        understanding: Understanding::Global,
    });
    for style in LearningStyle::all() {
        let mut profile = participant(ProficiencyLabel::Weak, ProficiencyLabel::Strong);
        profile.style = style;
        let text = engine
            .build_system_prompt(&profile, Concept::Pronouns, &materials(), 1, None)
            .unwrap();
        let mut expected = SESSION1.replace("\"Active/Intuitive/Global\"", &format!("\"{}\"", style.label()));
        for (old, new) in reference
            .strategy_lines
            .iter()
            .zip(engine.strategies_for(style).strategy_lines.iter())
        {
            expected = expected.replace(old.as_str(), new);
        }
        assert_eq!(text, format!("{expected}{MATERIALS}"), "{}", style.label());
    }
}
