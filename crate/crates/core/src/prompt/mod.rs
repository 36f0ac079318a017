//! System-prompt assembly (fixed base rules plus a personalized part built
//! from the student model), the summary request, and summary-reply parsing.

mod strategy;
mod summary;
mod template;

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use strategy::{StrategySet, StrategyTable};
pub use summary::{
    parse_summary_reply, render_summary_reply, SummaryParseError, LEARNING_STYLE_HEADER, RESPONSE_LEVEL_HEADER,
    TOPICS_HEADER,
};
pub use template::SectionedTemplate;

use crate::item_bank::{Concept, Exercise};
use crate::student_model::{Discrepancy, ParsedSummary, StudentProfile};

pub const SYSTEM_TEMPLATE_FILE: &str = "system_prompt.v1.txt";
pub const SUMMARY_TEMPLATE_FILE: &str = "summary_prompt.v1.txt";
pub const STRATEGY_TABLE_FILE: &str = "strategies.v1.tsv";

const BUNDLED_SYSTEM: &str = include_str!("../../templates/system_prompt.v1.txt");
const BUNDLED_SUMMARY: &str = include_str!("../../templates/summary_prompt.v1.txt");
const BUNDLED_STRATEGIES: &str = include_str!("../../templates/strategies.v1.tsv");

#[derive(Debug, Error, PartialEq)]
pub enum PromptError {
    #[error("template error: {0}")]
    Template(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error(transparent)]
    SummaryParse(#[from] SummaryParseError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PromptOptions {
    /// Emit the neutral note for students who rate themselves above their
    /// measured level.
    pub overconfident_note: bool,
    /// The struggle block is added when the previous session's
    /// first-response correctness is below this.
    pub struggle_threshold: f64,
    /// Require exact `*Header:` lines when parsing summary replies.
    pub strict_summary_headers: bool,
}

impl Default for PromptOptions {
    fn default() -> Self {
        Self {
            overconfident_note: true,
            struggle_threshold: 0.5,
            strict_summary_headers: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub system_prompt: String,
    pub summary_prompt: String,
    pub session_index: usize,
    pub concept: Concept,
    pub materials: Vec<Exercise>,
}

const SYSTEM_SECTIONS: &[(&str, &[&str])] = &[
    ("role", &[]),
    ("welcome", &["ordinal", "previous_concept"]),
    ("opening.first", &[]),
    ("opening.later", &[]),
    ("concept", &["concept"]),
    ("underconfident", &["self_reported", "measured"]),
    ("overconfident", &["self_reported", "measured"]),
    ("style", &["style"]),
    ("review", &[]),
    ("topics", &["specific_topics"]),
    ("action_items", &["response_level_actions", "learning_style_actions"]),
    ("struggle", &[]),
    ("struggle.steps", &[]),
    ("rules", &[]),
    ("materials", &[]),
];

#[derive(Debug, Clone)]
pub struct PromptEngine {
    system: SectionedTemplate,
    summary_prompt: String,
    strategies: StrategyTable,
    pub options: PromptOptions,
}

impl Default for PromptEngine {
    fn default() -> Self {
        Self::from_sources(
            BUNDLED_SYSTEM,
            BUNDLED_SUMMARY,
            BUNDLED_STRATEGIES,
            PromptOptions::default(),
        )
        .expect("bundled templates are valid")
    }
}

fn ordinal(n: usize) -> String {
    const WORDS: [&str; 10] = [
        "first", "second", "third", "fourth", "fifth", "sixth", "seventh", "eighth", "ninth", "tenth",
    ];
    if (1..=10).contains(&n) {
        return WORDS[n - 1].to_string();
    }
    let suffix = match (n % 10, n % 100) {
        (_, 11..=13) => "th",
        (1, _) => "st",
        (2, _) => "nd",
        (3, _) => "rd",
        _ => "th",
    };
    format!("{n}{suffix}")
}

fn bullet(text: &str) -> String {
    format!("- {text}")
}

fn numbered(lines: &str) -> String {
    lines
        .lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(k, l)| format!("  {}. {l}", k + 1))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Renders exercises as numbered questions with their answer key.
pub fn render_materials(exercises: &[Exercise]) -> String {
    let mut out = String::new();
    for (k, e) in exercises.iter().enumerate() {
        out.push_str(&format!("\nQuestion {}.\n{}\n", k + 1, e.stem));
        for c in &e.choices {
            out.push_str(&format!("{}. {}\n", c.label, c.text));
        }
        out.push_str(&format!("Answer: {}\nExplanation: {}\n", e.answer, e.explanation));
    }
    out
}

impl PromptEngine {
    pub fn from_sources(
        system: &str,
        summary: &str,
        strategies: &str,
        options: PromptOptions,
    ) -> Result<Self, PromptError> {
        let system = SectionedTemplate::parse(system)?;
        for (name, allowed) in SYSTEM_SECTIONS {
            system.require(name, allowed)?;
        }
        let summary_prompt = summary.trim_end().to_string() + "\n";
        for header in [TOPICS_HEADER, RESPONSE_LEVEL_HEADER, LEARNING_STYLE_HEADER] {
            if !summary_prompt.contains(&format!("*{header}:")) {
                return Err(PromptError::Template(format!(
                    "summary prompt lacks the reply line *{header}:"
                )));
            }
        }
        Ok(Self {
            system,
            summary_prompt,
            strategies: StrategyTable::parse(strategies)?,
            options,
        })
    }

    /// Loads the three template files from a directory so educators can
    /// edit them without rebuilding.
    pub fn from_dir(dir: &Path, options: PromptOptions) -> Result<Self, PromptError> {
        let read = |name: &str| {
            std::fs::read_to_string(dir.join(name))
                .map_err(|e| PromptError::Template(format!("{}: {e}", dir.join(name).display())))
        };
        Self::from_sources(
            &read(SYSTEM_TEMPLATE_FILE)?,
            &read(SUMMARY_TEMPLATE_FILE)?,
            &read(STRATEGY_TABLE_FILE)?,
            options,
        )
    }

    fn section(&self, name: &str, vars: &[(&str, &str)]) -> String {
        let body = self.system.section(name).expect("sections checked at load");
        template::fill(body, vars).expect("placeholders checked at load")
    }

    pub fn strategies_for(&self, style: crate::student_model::LearningStyle) -> StrategySet {
        self.strategies.strategies_for(style)
    }

    pub fn build_summary_prompt(&self) -> String {
        self.summary_prompt.clone()
    }

    pub fn parse_summary(&self, reply: &str, session_concept: Concept) -> Result<ParsedSummary, SummaryParseError> {
        parse_summary_reply(reply, session_concept, self.options.strict_summary_headers)
    }

    /// Assembles the tutoring system prompt for one session.
    ///
    /// `prev_summary` must be given exactly when `session_index >= 2`. The
    /// struggle block is driven by the first-response ratio stored on the
    /// profile for the previous session's concept.
    pub fn build_system_prompt(
        &self,
        profile: &StudentProfile,
        concept: Concept,
        exercises: &[Exercise],
        session_index: usize,
        prev_summary: Option<&ParsedSummary>,
    ) -> Result<String, PromptError> {
        if exercises.is_empty() {
            return Err(PromptError::Contract("no exercises to teach".into()));
        }
        if session_index == 0 {
            return Err(PromptError::Contract("session_index is 1-based".into()));
        }
        let prev = match (session_index, prev_summary) {
            (1, None) => None,
            (1, Some(_)) => {
                return Err(PromptError::Contract(
                    "first session cannot carry a previous summary".into(),
                ))
            }
            (_, Some(s)) => Some(s),
            (n, None) => {
                return Err(PromptError::Contract(format!(
                    "session {n} needs the previous session's summary"
                )))
            }
        };

        let mut parts = vec![bullet(&self.section("role", &[]))];
        if let Some(prev) = prev {
            let ord = ordinal(session_index);
            parts.push(bullet(&self.section(
                "welcome",
                &[("ordinal", &ord), ("previous_concept", prev.session_concept.as_str())],
            )));
            parts.push(bullet(&self.section("opening.later", &[])));
        } else {
            parts.push(bullet(&self.section("opening.first", &[])));
        }
        parts.push(bullet(&self.section("concept", &[("concept", concept.as_str())])));

        if let Some(state) = profile.concept(concept) {
            if let (Some(d), Some(measured)) = (state.discrepancy, state.measured) {
                let self_reported = state.self_reported.to_string();
                let measured = measured.to_string();
                let vars = [
                    ("self_reported", self_reported.as_str()),
                    ("measured", measured.as_str()),
                ];
                match d {
                    Discrepancy::Underconfident => parts.push(bullet(&self.section("underconfident", &vars))),
                    Discrepancy::Overconfident if self.options.overconfident_note => {
                        parts.push(bullet(&self.section("overconfident", &vars)))
                    }
                    _ => {}
                }
            }
        }

        match prev {
            None => {
                let style = profile.style.label();
                let set = self.strategies.strategies_for(profile.style);
                parts.push(bullet(&self.section("style", &[("style", &style)])));
                parts.push(numbered(&set.strategy_lines.join("\n")));
            }
            Some(prev) => {
                parts.push(bullet(&self.section("review", &[])));
                parts.push(bullet(
                    &self.section("topics", &[("specific_topics", &prev.specific_topics)]),
                ));
                parts.push(bullet(&self.section(
                    "action_items",
                    &[
                        ("response_level_actions", &prev.response_level_actions),
                        ("learning_style_actions", &prev.learning_style_actions),
                    ],
                )));
                let struggled = profile
                    .concept(prev.session_concept)
                    .and_then(|s| s.first_response_ratio)
                    .is_some_and(|r| r < self.options.struggle_threshold);
                if struggled {
                    parts.push(bullet(&self.section("struggle", &[])));
                    parts.push(numbered(&self.section("struggle.steps", &[])));
                }
            }
        }

        for rule in self.section("rules", &[]).lines().filter(|l| !l.trim().is_empty()) {
            parts.push(bullet(rule));
        }
        parts.push(bullet(&self.section("materials", &[])));
        let mut prompt = parts.join("\n");
        prompt.push('\n');
        prompt.push_str(&render_materials(exercises));
        Ok(prompt)
    }

    pub fn build_bundle(
        &self,
        profile: &StudentProfile,
        concept: Concept,
        exercises: &[Exercise],
        session_index: usize,
        prev_summary: Option<&ParsedSummary>,
    ) -> Result<PromptBundle, PromptError> {
        Ok(PromptBundle {
            system_prompt: self.build_system_prompt(profile, concept, exercises, session_index, prev_summary)?,
            summary_prompt: self.build_summary_prompt(),
            session_index,
            concept,
            materials: exercises.to_vec(),
        })
    }
}
