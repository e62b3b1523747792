//! Parsing model output back into platform actions.

use crate::scheduler::Action;

const HEADER: &str = "TITLE:";
const FALLBACK_TITLE_CHARS: usize = 80;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratedPost {
    pub title: String,
    pub body: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("generator returned empty text")]
    Empty,
}

/// Splits `TITLE: x` off the first line. Without the header, the first 80
/// characters become the title and the rest the body.
pub fn parse_post_output(text: &str) -> Result<GeneratedPost, ParseError> {
    let text = text.trim();
    if text.is_empty() {
        return Err(ParseError::Empty);
    }
    let (first, rest) = text.split_once('\n').unwrap_or((text, ""));
    let first = first.trim();
    if first.len() >= HEADER.len() && first[..HEADER.len()].eq_ignore_ascii_case(HEADER) {
        let title = first[HEADER.len()..].trim();
        let body = rest.trim();
        if !title.is_empty() {
            return Ok(GeneratedPost { title: title.to_string(), body: body.to_string() });
        }
        if body.is_empty() {
            return Err(ParseError::Empty);
        }
        return Ok(fallback_split(body));
    }
    Ok(fallback_split(text))
}

fn fallback_split(text: &str) -> GeneratedPost {
    let cut = text
        .char_indices()
        .nth(FALLBACK_TITLE_CHARS)
        .map_or(text.len(), |(i, _)| i);
    GeneratedPost {
        title: text[..cut].trim().to_string(),
        body: text[cut..].trim().to_string(),
    }
}

/// First menu option named in the reply; `NONE` when nothing matches.
pub fn parse_action_choice(text: &str, menu: &[Action]) -> Action {
    let upper = text.to_ascii_uppercase();
    menu.iter()
        .filter(|a| **a != Action::None)
        .filter_map(|a| upper.find(a.menu_label()).map(|pos| (pos, *a)))
        .min_by_key(|(pos, _)| *pos)
        .map_or(Action::None, |(_, a)| a)
}

pub fn parse_yes_no(text: &str) -> bool {
    text.trim_start()
        .get(..3)
        .is_some_and(|s| s.eq_ignore_ascii_case("yes"))
}

/// Names written as `@Name` (ASCII letters, digits, underscore).
pub fn extract_mentions(text: &str) -> Vec<String> {
    let mut names = Vec::new();
    let mut rest = text;
    while let Some(at) = rest.find('@') {
        rest = &rest[at + 1..];
        let end = rest
            .find(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
            .unwrap_or(rest.len());
        if end > 0 {
            let name = rest[..end].to_string();
            if !names.contains(&name) {
                names.push(name);
            }
        }
        rest = &rest[end..];
    }
    names
}
