use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::orchestrator::{EventKind, SessionEvent};

#[derive(Debug, Error)]
pub enum TranscriptError {
    #[error("{file}:{line}: {message}")]
    Parse { file: String, line: usize, message: String },
    #[error("{file}: {source}")]
    Io {
        file: String,
        #[source]
        source: std::io::Error,
    },
}

/// Dataset summary in the shape of a dialogue-corpus statistics table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptStats {
    pub empty: bool,
    pub dialogues: usize,
    pub total_turns: usize,
    pub avg_turns_per_dialogue: f64,
    pub tutor_utterances: usize,
    pub student_utterances: usize,
    pub tutor_words: usize,
    pub student_words: usize,
    pub avg_words_per_tutor_utterance: f64,
    pub avg_words_per_student_utterance: f64,
}

/// Whitespace tokens, ignoring tokens made only of punctuation.
pub fn count_words(text: &str) -> usize {
    text.split_whitespace()
        .filter(|t| t.chars().any(char::is_alphanumeric))
        .count()
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

#[derive(Default)]
struct Dialogue {
    tutor: Vec<usize>,
    student: Vec<usize>,
}

/// Statistics over event logs given as `(name, contents)`. A dialogue is
/// one tutoring session: a new one starts at every session-opening event,
/// and dialogues without messages are not counted. Every tutor or student
/// message is one turn.
pub fn transcript_stats(files: &[(String, String)]) -> Result<TranscriptStats, TranscriptError> {
    let mut dialogues: Vec<Dialogue> = Vec::new();
    for (name, contents) in files {
        let mut current = Dialogue::default();
        for (idx, line) in contents.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let event: SessionEvent = serde_json::from_str(line).map_err(|e| TranscriptError::Parse {
                file: name.clone(),
                line: idx + 1,
                message: e.to_string(),
            })?;
            match event.event {
                EventKind::PretestSubmitted { .. } | EventKind::ConceptChosen { .. } => {
                    dialogues.push(std::mem::take(&mut current));
                }
                EventKind::TutorMessage { content } => current.tutor.push(count_words(&content)),
                EventKind::StudentMessage { content, .. } => current.student.push(count_words(&content)),
                _ => {}
            }
        }
        dialogues.push(current);
    }
    dialogues.retain(|d| !d.tutor.is_empty() || !d.student.is_empty());

    let tutor_utterances: usize = dialogues.iter().map(|d| d.tutor.len()).sum();
    let student_utterances: usize = dialogues.iter().map(|d| d.student.len()).sum();
    let tutor_words: usize = dialogues.iter().flat_map(|d| &d.tutor).sum();
    let student_words: usize = dialogues.iter().flat_map(|d| &d.student).sum();
    let total_turns = tutor_utterances + student_utterances;
    Ok(TranscriptStats {
        empty: dialogues.is_empty(),
        dialogues: dialogues.len(),
        total_turns,
        avg_turns_per_dialogue: ratio(total_turns, dialogues.len()),
        tutor_utterances,
        student_utterances,
        tutor_words,
        student_words,
        avg_words_per_tutor_utterance: ratio(tutor_words, tutor_utterances),
        avg_words_per_student_utterance: ratio(student_words, student_utterances),
    })
}

pub fn transcript_stats_from_paths<P: AsRef<Path>>(paths: &[P]) -> Result<TranscriptStats, TranscriptError> {
    let mut files = Vec::with_capacity(paths.len());
    for p in paths {
        let p = p.as_ref();
        let contents = std::fs::read_to_string(p).map_err(|source| TranscriptError::Io {
            file: p.display().to_string(),
            source,
        })?;
        files.push((p.display().to_string(), contents));
    }
    transcript_stats(&files)
}

impl fmt::Display for TranscriptStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<34}{:>10}", "# Dialogues", self.dialogues)?;
        writeln!(f, "{:<34}{:>10}", "Total Turns", self.total_turns)?;
        writeln!(
            f,
            "{:<34}{:>10.2}",
            "Avg. Turns per dialogue", self.avg_turns_per_dialogue
        )?;
        writeln!(
            f,
            "{:<34}{:>10.2}",
            "Avg. words per tutor utterance", self.avg_words_per_tutor_utterance
        )?;
        write!(
            f,
            "{:<34}{:>10.2}",
            "Avg. words per student utterance", self.avg_words_per_student_utterance
        )
    }
}
