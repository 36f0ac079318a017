//! Sectioned text templates with `{name}` placeholders.

use std::collections::BTreeMap;

use super::PromptError;

/// A template file split into named sections. `#` lines are comments; a line
/// of the form `[lower.case_name]` opens a section.
#[derive(Debug, Clone, PartialEq)]
pub struct SectionedTemplate {
    sections: BTreeMap<String, String>,
}

fn section_name(line: &str) -> Option<&str> {
    let inner = line.strip_prefix('[')?.strip_suffix(']')?;
    let valid = !inner.is_empty() && inner.chars().all(|c| c.is_ascii_lowercase() || c == '.' || c == '_');
    valid.then_some(inner)
}

impl SectionedTemplate {
    pub fn parse(text: &str) -> Result<Self, PromptError> {
        let mut sections = BTreeMap::new();
        let mut current: Option<(String, Vec<&str>)> = None;
        for line in text.lines() {
            if line.starts_with('#') {
                continue;
            }
            if let Some(name) = section_name(line.trim_end()) {
                if let Some((name, body)) = current.take() {
                    sections.insert(name, join_body(&body));
                }
                if sections.contains_key(name) {
                    return Err(PromptError::Template(format!("section [{name}] defined twice")));
                }
                current = Some((name.to_string(), Vec::new()));
                continue;
            }
            match current.as_mut() {
                Some((_, body)) => body.push(line),
                None if line.trim().is_empty() => {}
                None => return Err(PromptError::Template(format!("text outside any section: {line:?}"))),
            }
        }
        if let Some((name, body)) = current {
            sections.insert(name, join_body(&body));
        }
        Ok(Self { sections })
    }

    pub fn section(&self, name: &str) -> Result<&str, PromptError> {
        self.sections
            .get(name)
            .map(String::as_str)
            .ok_or_else(|| PromptError::Template(format!("missing section [{name}]")))
    }

    /// Checks that `name` exists and uses no placeholder outside `allowed`.
    pub fn require(&self, name: &str, allowed: &[&str]) -> Result<(), PromptError> {
        let body = self.section(name)?;
        let vars: Vec<(&str, &str)> = allowed.iter().map(|k| (*k, "")).collect();
        fill(body, &vars).map(|_| ()).map_err(|e| match e {
            PromptError::Template(msg) => PromptError::Template(format!("[{name}]: {msg}")),
            other => other,
        })
    }
}

fn join_body(lines: &[&str]) -> String {
    let end = lines.iter().rposition(|l| !l.trim().is_empty()).map_or(0, |i| i + 1);
    lines[..end].join("\n")
}

/// Single-pass substitution: inserted values are never re-scanned.
pub fn fill(template: &str, vars: &[(&str, &str)]) -> Result<String, PromptError> {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let close = after
            .find('}')
            .ok_or_else(|| PromptError::Template("unclosed placeholder".into()))?;
        let name = &after[..close];
        let value = vars
            .iter()
            .find(|(k, _)| *k == name)
            .map(|(_, v)| *v)
            .ok_or_else(|| PromptError::Template(format!("unknown placeholder {{{name}}}")))?;
        out.push_str(value);
        rest = &after[close + 1..];
    }
    out.push_str(rest);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sections_and_comments() {
        let t = SectionedTemplate::parse("# head\n[a]\nline one\n\n[b.c]\n[Not A Header]\n\n").unwrap();
        assert_eq!(t.section("a").unwrap(), "line one");
        assert_eq!(t.section("b.c").unwrap(), "[Not A Header]");
        assert!(t.section("zzz").is_err());
    }

    #[test]
    fn fill_is_single_pass() {
        let out = fill("Hi {name}, {name}!", &[("name", "{name}")]).unwrap();
        assert_eq!(out, "Hi {name}, {name}!");
        assert!(fill("{missing}", &[]).is_err());
        assert!(fill("{open", &[("open", "x")]).is_err());
    }

    #[test]
    fn duplicate_section_is_rejected() {
        assert!(SectionedTemplate::parse("[a]\nx\n[a]\ny").is_err());
        assert!(SectionedTemplate::parse("stray\n[a]\nx").is_err());
    }
}
