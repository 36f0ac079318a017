use serde::{Deserialize, Serialize};

use super::PromptError;
use crate::student_model::{LearningStyle, Perception, Processing, Understanding};

/// One strategy line per learning-style dimension, in the order the style
/// label lists them: processing, perception, understanding.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StrategySet {
    pub style: LearningStyle,
    pub strategy_lines: [String; 3],
}

/// Six-row table: two poles for each of three dimensions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StrategyTable {
    active: String,
    reflective: String,
    sensory: String,
    intuitive: String,
    sequential: String,
    global: String,
}

impl StrategyTable {
    /// Parses `dimension<TAB>pole<TAB>line` rows; `#` lines are comments.
    pub fn parse(text: &str) -> Result<Self, PromptError> {
        let mut slots: [Option<String>; 6] = Default::default();
        for (n, line) in text.lines().enumerate() {
            if line.starts_with('#') || line.trim().is_empty() {
                continue;
            }
            let mut parts = line.splitn(3, '\t');
            let (Some(dim), Some(pole), Some(body)) = (parts.next(), parts.next(), parts.next()) else {
                return Err(PromptError::Template(format!(
                    "strategy table line {}: expected three tab-separated fields",
                    n + 1
                )));
            };
            let slot = match (dim.trim(), pole.trim()) {
                ("processing", "active") => 0,
                ("processing", "reflective") => 1,
                ("perception", "sensory") => 2,
                ("perception", "intuitive") => 3,
                ("understanding", "sequential") => 4,
                ("understanding", "global") => 5,
                (d, p) => {
                    return Err(PromptError::Template(format!(
                        "strategy table line {}: unknown pole {d}/{p}",
                        n + 1
                    )))
                }
            };
            if slots[slot].replace(body.trim().to_string()).is_some() {
                return Err(PromptError::Template(format!(
                    "strategy table line {}: {dim}/{pole} listed twice",
                    n + 1
                )));
            }
        }
        let [Some(active), Some(reflective), Some(sensory), Some(intuitive), Some(sequential), Some(global)] = slots
        else {
            return Err(PromptError::Template("strategy table must cover all six poles".into()));
        };
        Ok(Self {
            active,
            reflective,
            sensory,
            intuitive,
            sequential,
            global,
        })
    }

    pub fn strategies_for(&self, style: LearningStyle) -> StrategySet {
        let processing = match style.processing {
            Processing::Active => &self.active,
            Processing::Reflective => &self.reflective,
        };
        let perception = match style.perception {
            Perception::Sensory => &self.sensory,
            Perception::Intuitive => &self.intuitive,
        };
        let understanding = match style.understanding {
            Understanding::Sequential => &self.sequential,
            Understanding::Global => &self.global,
        };
        StrategySet {
            style,
            strategy_lines: [processing.clone(), perception.clone(), understanding.clone()],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bundled() -> StrategyTable {
        StrategyTable::parse(include_str!("../../templates/strategies.v1.tsv")).unwrap()
    }

    #[test]
    fn active_intuitive_global_lines() {
        let set = bundled().strategies_for(LearningStyle {
            perception: Perception::Intuitive,
            processing: Processing::Active,
            understanding: Understanding::Global,
        });
        assert_eq!(
            set.strategy_lines,
            [
                "Provide opportunities for students to do something active besides transcribing notes. Brief brainstorming activities might be effective.".to_string(),
                "Provide abstract concepts(principles, theories, mathematical models).".to_string(),
                "Provide the big picture or goal of a lesson before presenting the steps, doing as much as possible to establish the context and relevance of the subject matter and to relate it to the students’ experience.".to_string(),
            ]
        );
    }

    #[test]
    fn reflective_sensory_sequential_lines() {
        let set = bundled().strategies_for(LearningStyle {
            perception: Perception::Sensory,
            processing: Processing::Reflective,
            understanding: Understanding::Sequential,
        });
        assert_eq!(
            set.strategy_lines,
            [
                "Provide opportunities for students to think about what they have learned before answering. Pause for brief reflection and ask the student to restate the idea in his/her own words.".to_string(),
                "Provide concrete information (facts, rules, observed patterns) and tie every principle to a specific sentence in the provided materials.".to_string(),
                "Present the material in a logically ordered progression, moving step by step and confirming each step before going on to the next.".to_string(),
            ]
        );
    }

    #[test]
    fn every_style_gets_three_distinct_lines() {
        let table = bundled();
        for style in LearningStyle::all() {
            let set = table.strategies_for(style);
            assert_eq!(set.strategy_lines.len(), 3);
            assert!(set.strategy_lines.iter().all(|l| !l.is_empty()));
            assert_ne!(set.strategy_lines[0], set.strategy_lines[1]);
        }
        assert_eq!(LearningStyle::all().count(), 8);
    }

    #[test]
    fn incomplete_table_is_rejected() {
        assert!(StrategyTable::parse("processing\tactive\tx\n").is_err());
        assert!(StrategyTable::parse("processing\tcalm\tx\n").is_err());
        assert!(StrategyTable::parse("processing active x\n").is_err());
    }
}
