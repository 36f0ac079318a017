//! Session-end summary reply: rendering and tolerant parsing.

use std::sync::LazyLock;

use regex::Regex;
use thiserror::Error;

use crate::item_bank::Concept;
use crate::student_model::ParsedSummary;

pub const TOPICS_HEADER: &str = "Specific topics";
pub const RESPONSE_LEVEL_HEADER: &str = "Action items regarding the student's response level";
pub const LEARNING_STYLE_HEADER: &str = "Action items regarding the student's learning style";

const HEADERS: [&str; 3] = [TOPICS_HEADER, RESPONSE_LEVEL_HEADER, LEARNING_STYLE_HEADER];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("summary reply is malformed (missing: {missing:?}, empty: {empty:?})")]
pub struct SummaryParseError {
    pub missing: Vec<String>,
    pub empty: Vec<String>,
    /// The reply exactly as received, kept for operator inspection.
    pub raw: String,
}

fn header_pattern(header: &str, strict: bool) -> Regex {
    let mut name = String::new();
    for (i, word) in header.split(' ').enumerate() {
        if i > 0 {
            name.push_str(if strict { " " } else { r"\s+" });
        }
        let escaped = regex::escape(word);
        if strict {
            name.push_str(&escaped);
        } else {
            name.push_str(&escaped.replace('\'', "['’]"));
        }
    }
    let pattern = if strict {
        format!(r"(?m)^\*{name}:[ \t]*")
    } else {
        // leading bullets/bold/quote markers, then optional bold around the colon
        format!(r"(?im)^[ \t>#*_-]*{name}[ \t*_]*:[ \t*_]*")
    };
    Regex::new(&pattern).expect("header pattern compiles")
}

static TOLERANT: LazyLock<[Regex; 3]> = LazyLock::new(|| HEADERS.map(|h| header_pattern(h, false)));
static STRICT: LazyLock<[Regex; 3]> = LazyLock::new(|| HEADERS.map(|h| header_pattern(h, true)));

/// Splits a reply on the three starred headers. Each field runs from its
/// header to the next header (or the end). When a header occurs more than
/// once, the last occurrence wins, so a reply that echoes the request before
/// answering still parses.
pub fn parse_summary_reply(
    reply: &str,
    session_concept: Concept,
    strict: bool,
) -> Result<ParsedSummary, SummaryParseError> {
    let patterns = if strict { &*STRICT } else { &*TOLERANT };
    let mut all_starts: Vec<usize> = Vec::new();
    let mut last: [Option<(usize, usize)>; 3] = [None; 3];
    for (k, re) in patterns.iter().enumerate() {
        for m in re.find_iter(reply) {
            all_starts.push(m.start());
            last[k] = Some((m.start(), m.end()));
        }
    }
    all_starts.sort_unstable();

    let mut fields: [String; 3] = Default::default();
    let mut missing = Vec::new();
    let mut empty = Vec::new();
    for k in 0..3 {
        let Some((start, body_start)) = last[k] else {
            missing.push(HEADERS[k].to_string());
            continue;
        };
        let body_end = all_starts.iter().copied().find(|&s| s > start).unwrap_or(reply.len());
        let body = reply[body_start..body_end.max(body_start)].trim();
        if body.is_empty() {
            empty.push(HEADERS[k].to_string());
        }
        fields[k] = body.to_string();
    }
    if !missing.is_empty() || !empty.is_empty() {
        return Err(SummaryParseError {
            missing,
            empty,
            raw: reply.to_string(),
        });
    }
    let [specific_topics, response_level_actions, learning_style_actions] = fields;
    Ok(ParsedSummary {
        specific_topics,
        response_level_actions,
        learning_style_actions,
        session_concept,
    })
}

/// Renders a summary in the reply skeleton requested by the summary prompt.
pub fn render_summary_reply(summary: &ParsedSummary) -> String {
    format!(
        "*{TOPICS_HEADER}: {}\n*{RESPONSE_LEVEL_HEADER}: {}\n*{LEARNING_STYLE_HEADER}: {}\n",
        summary.specific_topics, summary.response_level_actions, summary.learning_style_actions
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const WELL_FORMED: &str = "*Specific topics: commas in lists\n\
        *Action items regarding the student's response level: keep asking short questions\n\
        *Action items regarding the student's learning style: add one brainstorming step\n";

    #[test]
    fn well_formed_reply() {
        let s = parse_summary_reply(WELL_FORMED, Concept::Punctuation, false).unwrap();
        assert_eq!(s.specific_topics, "commas in lists");
        assert_eq!(s.response_level_actions, "keep asking short questions");
        assert_eq!(s.learning_style_actions, "add one brainstorming step");
        assert_eq!(s.session_concept, Concept::Punctuation);
        assert_eq!(parse_summary_reply(WELL_FORMED, Concept::Punctuation, true).unwrap(), s);
    }

    #[test]
    fn missing_header_keeps_raw_reply() {
        let reply = "*Specific topics: a\n*Action items regarding the student's response level: b\n";
        let err = parse_summary_reply(reply, Concept::Pronouns, false).unwrap_err();
        assert_eq!(err.missing, vec![LEARNING_STYLE_HEADER.to_string()]);
        assert_eq!(err.raw, reply);
    }

    #[test]
    fn empty_field_is_an_error() {
        let reply = "*Specific topics:\n*Action items regarding the student's response level: b\n*Action items regarding the student's learning style: c";
        let err = parse_summary_reply(reply, Concept::Pronouns, false).unwrap_err();
        assert_eq!(err.empty, vec![TOPICS_HEADER.to_string()]);
    }

    #[test]
    fn markdown_decoration_and_case_are_tolerated() {
        let reply = "Here is the summary.\n\n**Specific Topics:** pronoun case\n\n\
            * **Action items regarding the student’s response level**: praise quick answers\n\
            - __action items regarding the student's learning style:__ more diagrams\n  and steps\n";
        let s = parse_summary_reply(reply, Concept::Pronouns, false).unwrap();
        assert_eq!(s.specific_topics, "pronoun case");
        assert_eq!(s.response_level_actions, "praise quick answers");
        assert_eq!(s.learning_style_actions, "more diagrams\n  and steps");
        assert!(parse_summary_reply(reply, Concept::Pronouns, true).is_err());
    }

    #[test]
    fn unknown_is_a_legal_value() {
        let reply = "*Specific topics: Unknown\n*Action items regarding the student's response level: Unknown\n*Action items regarding the student's learning style: Unknown";
        let s = parse_summary_reply(reply, Concept::Transitions, false).unwrap();
        assert_eq!(s, ParsedSummary::placeholder(Concept::Transitions));
    }

    fn field() -> impl Strategy<Value = String> {
        let word = prop::sample::select(vec![
            "student",
            "pronoun",
            "comma",
            "engaged",
            "brainstorm",
            "Unknown",
            "review",
            "quickly",
            "the",
            "of",
            "semicolon",
            "(example)",
            "3.5",
            "it's",
            "“quoted”",
            "—",
            "é",
        ]);
        let sep = prop::sample::select(vec![" ", " ", " ", "\n", ", ", "\n\n", ". "]);
        prop::collection::vec((word, sep), 1..30).prop_map(|parts| {
            let mut s = String::new();
            for (w, sep) in parts {
                s.push_str(w);
                s.push_str(sep);
            }
            s.trim().to_string()
        })
    }

    proptest! {
        #[test]
        fn render_then_parse_is_identity(a in field(), b in field(), c in field(), k in 0usize..3) {
            let s = ParsedSummary {
                specific_topics: a,
                response_level_actions: b,
                learning_style_actions: c,
                session_concept: Concept::ALL[k],
            };
            let reply = render_summary_reply(&s);
            prop_assert_eq!(parse_summary_reply(&reply, s.session_concept, false).unwrap(), s.clone());
            prop_assert_eq!(parse_summary_reply(&reply, s.session_concept, true).unwrap(), s);
        }
    }
}
