//! Feedback scripts: rule identifiers mapped to the texts shown to students.
//!
//! ```text
//! # comments start with a hash
//! @locale en
//! eval.foldl.rule = Apply the fold left rule to process a list
//! ```
//!
//! Later lines override earlier ones for the same identifier.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::rules::{Rule, RuleId};

#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct FeedbackScript {
    entries: BTreeMap<String, String>,
    locale: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("feedback script line {line}: {message}")]
pub struct ScriptError {
    pub line: usize,
    pub message: String,
}

impl FeedbackScript {
    pub fn parse(source: &str) -> Result<FeedbackScript, ScriptError> {
        let mut script = FeedbackScript::default();
        for (idx, raw) in source.lines().enumerate() {
            let line = idx + 1;
            let text = raw.trim();
            if text.is_empty() || text.starts_with('#') {
                continue;
            }
            if let Some(rest) = text.strip_prefix('@') {
                let mut words = rest.split_whitespace();
                match (words.next(), words.next(), words.next()) {
                    (Some("locale"), Some(tag), None) => script.locale = Some(tag.to_string()),
                    _ => {
                        return Err(ScriptError { line, message: format!("unknown directive `{text}`") });
                    }
                }
                continue;
            }
            let Some((id, message)) = text.split_once('=') else {
                return Err(ScriptError { line, message: "expected `rule.id = text`".to_string() });
            };
            let (id, message) = (id.trim(), message.trim());
            if id.is_empty() || id.contains(char::is_whitespace) {
                return Err(ScriptError { line, message: format!("invalid rule identifier `{id}`") });
            }
            if message.is_empty() {
                return Err(ScriptError { line, message: format!("no text given for `{id}`") });
            }
            script.entries.insert(id.to_string(), message.to_string());
        }
        Ok(script)
    }

    pub fn locale(&self) -> Option<&str> {
        self.locale.as_deref()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entry(&self, id: &str) -> Option<&str> {
        self.entries.get(id).map(String::as_str)
    }

    /// Script text, else the rule's description, else the identifier.
    pub fn message_for(&self, id: &RuleId, rules: &[Arc<Rule>]) -> String {
        if let Some(text) = self.entry(id.as_str()) {
            return text.to_string();
        }
        rules
            .iter()
            .find(|r| &r.id == id)
            .and_then(|r| r.description.clone())
            .unwrap_or_else(|| id.to_string())
    }

    pub fn message_for_rule(&self, rule: &Rule) -> String {
        self.entry(rule.id.as_str())
            .map(str::to_string)
            .or_else(|| rule.description.clone())
            .unwrap_or_else(|| rule.id.to_string())
    }
}
