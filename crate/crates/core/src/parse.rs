//! Parsing model replies into decisions.
//!
//! Models rarely answer with a bare number even when told to, so the choice
//! parser scans for the first integer anywhere in the reply and the edit
//! parser peels decoration (labels, quotes) until the text is stable.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// What the model decided, extracted from its reply.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum Decision {
    /// Chose the action with this prompt id.
    Choice(usize),
    /// Declared the task finished (replied `-1`).
    TaskComplete,
    /// Supplied text for a pending edit action.
    EditText(String),
}

/// Failure to extract an action choice from a reply.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ChoiceParseError {
    #[error("reply contains no integer")]
    NoInteger,
    #[error("reply chose action {found} but only {num_actions} actions exist")]
    OutOfRange { found: i64, num_actions: usize },
}

/// Failure to extract edit text from a reply.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EditParseError {
    #[error("reply is empty after stripping decoration")]
    Empty,
}

/// Extracts the first integer in `reply` and interprets it as an action
/// choice against `num_actions` available ids.
///
/// `-1` means the task is complete. A leading `-` only binds to a digit run
/// at the start of the reply or after whitespace, so hyphenated prose like
/// `well-known 3` still yields `3`. Negative numbers other than `-1` are
/// skipped. The first in-range or `-1` integer wins; a first integer that is
/// out of range is an error rather than a reason to keep scanning.
pub fn parse_choice(reply: &str, num_actions: usize) -> Result<Decision, ChoiceParseError> {
    let bytes = reply.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        if !bytes[i].is_ascii_digit() {
            i += 1;
            continue;
        }
        let mut start = i;
        let negative = start > 0
            && bytes[start - 1] == b'-'
            && (start == 1 || bytes[start - 2].is_ascii_whitespace());
        if negative {
            start -= 1;
        }
        let mut end = i;
        while end < bytes.len() && bytes[end].is_ascii_digit() {
            end += 1;
        }
        let value: i64 = reply[start..end].parse().unwrap_or(i64::MAX);
        i = end;

        if value == -1 {
            return Ok(Decision::TaskComplete);
        }
        if value < 0 {
            continue;
        }
        if (value as u64) < num_actions as u64 {
            return Ok(Decision::Choice(value as usize));
        }
        return Err(ChoiceParseError::OutOfRange { found: value, num_actions });
    }
    Err(ChoiceParseError::NoInteger)
}

/// Extracts the text payload of an edit reply.
///
/// Repeatedly trims whitespace, strips a case-insensitive `text:` label, and
/// removes one matching layer of ASCII quotes until the reply stops
/// changing; parsing its own output is therefore a no-op.
pub fn parse_edit_text(reply: &str) -> Result<Decision, EditParseError> {
    let mut text = reply.to_string();
    loop {
        let before = text.clone();
        text = text.trim().to_string();
        if text.get(..5).is_some_and(|head| head.eq_ignore_ascii_case("text:")) {
            text = text[5..].to_string();
        }
        let stripped = text
            .strip_prefix('"')
            .and_then(|t| t.strip_suffix('"'))
            .or_else(|| text.strip_prefix('\'').and_then(|t| t.strip_suffix('\'')));
        if let Some(inner) = stripped {
            text = inner.to_string();
        }
        if text == before {
            break;
        }
    }
    if text.is_empty() {
        return Err(EditParseError::Empty);
    }
    Ok(Decision::EditText(text))
}
