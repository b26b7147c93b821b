//! Scripted oracle backend: canned replies selected by prompt matchers.
//!
//! Rules let tests and demos script a model's behaviour exactly. Matching is
//! deterministic: the highest-priority matching rule wins, and ties go to
//! the rule defined first.

use std::fs;
use std::path::Path;

use serde::Deserialize;

use crate::digest::sha256_hex;
use crate::llm::{CompletionRequest, LlmBackend, LlmError};

/// How one rule decides whether it applies to a prompt.
#[derive(Debug, Clone)]
pub enum RuleMatcher {
    /// Applies when the prompt contains this substring.
    Substring(String),
    /// Applies when this regex matches anywhere in the prompt.
    Regex(regex::Regex),
    /// Applies to every prompt.
    Default,
}

impl RuleMatcher {
    fn matches(&self, prompt: &str) -> bool {
        match self {
            RuleMatcher::Substring(s) => prompt.contains(s),
            RuleMatcher::Regex(re) => re.is_match(prompt),
            RuleMatcher::Default => true,
        }
    }
}

/// One scripted reply.
#[derive(Debug, Clone)]
pub struct OracleRule {
    pub matcher: RuleMatcher,
    pub reply: String,
    pub priority: i64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RuleDoc {
    substring: Option<String>,
    regex: Option<String>,
    default: Option<bool>,
    reply: String,
    #[serde(default)]
    priority: i64,
}

/// [`LlmBackend`] answering from a fixed rule list.
#[derive(Debug, Clone, Default)]
pub struct ScriptedBackend {
    rules: Vec<OracleRule>,
}

impl ScriptedBackend {
    pub fn new(rules: Vec<OracleRule>) -> ScriptedBackend {
        ScriptedBackend { rules }
    }

    /// Parses a JSON rule array. Each rule has exactly one of `substring`,
    /// `regex`, or `default: true`, plus `reply` and an optional integer
    /// `priority` (default 0).
    pub fn from_json(json: &str) -> Result<ScriptedBackend, LlmError> {
        let docs: Vec<RuleDoc> =
            serde_json::from_str(json).map_err(|e| LlmError::BadRules(e.to_string()))?;
        let mut rules = Vec::new();
        for (i, doc) in docs.into_iter().enumerate() {
            let matcher = match (doc.substring, doc.regex, doc.default) {
                (Some(s), None, None) => RuleMatcher::Substring(s),
                (None, Some(pattern), None) => {
                    let re = regex::Regex::new(&pattern).map_err(|e| {
                        LlmError::BadRules(format!("rules[{i}]: bad regex: {e}"))
                    })?;
                    RuleMatcher::Regex(re)
                }
                (None, None, Some(true)) => RuleMatcher::Default,
                _ => {
                    return Err(LlmError::BadRules(format!(
                        "rules[{i}]: need exactly one of 'substring', 'regex', or 'default: true'"
                    )));
                }
            };
            rules.push(OracleRule { matcher, reply: doc.reply, priority: doc.priority });
        }
        Ok(ScriptedBackend::new(rules))
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<ScriptedBackend, LlmError> {
        ScriptedBackend::from_json(&fs::read_to_string(path)?)
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }
}

impl LlmBackend for ScriptedBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<String, LlmError> {
        let best = self
            .rules
            .iter()
            .filter(|r| r.matcher.matches(&request.prompt))
            // max_by_key keeps the LAST maximum; compare on (priority, -index)
            // via enumerate to keep the first-defined rule on ties
            .enumerate()
            .max_by(|(i, a), (j, b)| a.priority.cmp(&b.priority).then(j.cmp(i)));
        match best {
            Some((_, rule)) => Ok(rule.reply.clone()),
            None => Err(LlmError::NoMatchingRule {
                digest: sha256_hex(request.prompt.as_bytes()),
            }),
        }
    }
}
