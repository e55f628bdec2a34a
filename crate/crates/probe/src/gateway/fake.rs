//! Scripted offline backend. Replies come from TOML rules of the form
//!
//! ```toml
//! [[rule]]
//! kind = "decision-system"        # optional prompt kind
//! model = "m"                     # optional model id
//! contains = ["deadline"]         # substrings the rendered prompt must hold
//! responses = ["Decision: Option A", { error = "transient" }]
//! ```
//!
//! The first matching rule answers. Each rule walks its responses in order
//! and repeats the last one once exhausted. Embeddings use the hash
//! embedding.

use std::path::Path;
use std::sync::Mutex;

use probe_core::PromptKind;
use serde::Deserialize;

use super::{hash_embedding, Backend, BackendError, ChatReply, ChatRequest, Usage};

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(untagged)]
pub enum ScriptResponse {
    Text(String),
    Error {
        error: ScriptedError,
        #[serde(default)]
        status: Option<u16>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScriptedError {
    Transient,
    Rejected,
    Empty,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptRule {
    #[serde(default)]
    pub kind: Option<String>,
    #[serde(default)]
    pub model: Option<String>,
    #[serde(default)]
    pub contains: Vec<String>,
    pub responses: Vec<ScriptResponse>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FakeScript {
    #[serde(default, rename = "rule")]
    pub rules: Vec<ScriptRule>,
}

#[derive(Debug, thiserror::Error)]
pub enum ScriptError {
    #[error("cannot read script {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("bad script: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("bad script: rule {index} has no responses")]
    NoResponses { index: usize },
    #[error("bad script: rule {index} names unknown prompt kind `{kind}`")]
    UnknownKind { index: usize, kind: String },
}

impl FakeScript {
    pub fn parse(text: &str) -> Result<Self, ScriptError> {
        let script: FakeScript = toml::from_str(text)?;
        for (index, rule) in script.rules.iter().enumerate() {
            if rule.responses.is_empty() {
                return Err(ScriptError::NoResponses { index });
            }
            if let Some(kind) = &rule.kind {
                if kind.parse::<PromptKind>().is_err() {
                    return Err(ScriptError::UnknownKind {
                        index,
                        kind: kind.clone(),
                    });
                }
            }
        }
        Ok(script)
    }

    pub fn load(path: &Path) -> Result<Self, ScriptError> {
        let text = std::fs::read_to_string(path).map_err(|source| ScriptError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }
}

impl ScriptRule {
    fn matches(&self, request: &ChatRequest, text: &str) -> bool {
        self.kind
            .as_deref()
            .is_none_or(|k| k.parse::<PromptKind>() == Ok(request.kind))
            && self.model.as_deref().is_none_or(|m| m == request.model)
            && self.contains.iter().all(|c| text.contains(c.as_str()))
    }
}

#[derive(Debug)]
pub struct FakeBackend {
    script: FakeScript,
    cursors: Mutex<Vec<usize>>,
}

impl FakeBackend {
    pub fn new(script: FakeScript) -> Self {
        let cursors = Mutex::new(vec![0; script.rules.len()]);
        Self { script, cursors }
    }
}

fn word_count(s: &str) -> u64 {
    s.split_whitespace().count() as u64
}

impl Backend for FakeBackend {
    fn chat(&self, request: &ChatRequest) -> Result<ChatReply, BackendError> {
        let text = request.full_text();
        let Some(index) = self
            .script
            .rules
            .iter()
            .position(|r| r.matches(request, &text))
        else {
            let head: String = request.messages.user.chars().take(80).collect();
            return Err(BackendError::Rejected {
                status: None,
                message: format!(
                    "no scripted rule for {} prompt starting `{head}`",
                    request.kind
                ),
            });
        };
        let responses = &self.script.rules[index].responses;
        let response = {
            let mut cursors = self.cursors.lock().expect("cursor lock");
            let i = cursors[index].min(responses.len() - 1);
            cursors[index] += 1;
            responses[i].clone()
        };
        match response {
            ScriptResponse::Text(reply) => Ok(ChatReply {
                usage: Usage {
                    prompt_tokens: word_count(&text),
                    completion_tokens: word_count(&reply),
                },
                text: reply,
            }),
            ScriptResponse::Error { error, status } => Err(match error {
                ScriptedError::Transient => BackendError::Transient("scripted".into()),
                ScriptedError::Empty => BackendError::Empty,
                ScriptedError::Rejected => BackendError::Rejected {
                    status,
                    message: "scripted".into(),
                },
            }),
        }
    }

    fn embed(&self, _model: &str, texts: &[String]) -> Result<Vec<Vec<f64>>, BackendError> {
        Ok(texts.iter().map(|t| hash_embedding(t)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use probe_core::prompt::PromptMessages;
    use probe_core::SamplingProfile;

    fn request(kind: PromptKind, user: &str) -> ChatRequest {
        ChatRequest {
            model: "m".into(),
            kind,
            messages: PromptMessages {
                system: None,
                user: user.into(),
            },
            profile: SamplingProfile::DETERMINISTIC,
        }
    }

    const SCRIPT: &str = r#"
[[rule]]
kind = "decision-system"
contains = ["deadline"]
responses = ["first", { error = "transient" }, "last"]

[[rule]]
responses = [{ error = "rejected", status = 429 }]
"#;

    #[test]
    fn cursor_advances_then_repeats() {
        let b = FakeBackend::new(FakeScript::parse(SCRIPT).unwrap());
        let r = request(PromptKind::DecisionSystem, "a deadline looms");
        assert_eq!(b.chat(&r).unwrap().text, "first");
        assert!(matches!(b.chat(&r), Err(BackendError::Transient(_))));
        assert_eq!(b.chat(&r).unwrap().text, "last");
        assert_eq!(b.chat(&r).unwrap().text, "last");
        let other = request(PromptKind::Expansion, "a deadline looms");
        assert_eq!(
            b.chat(&other),
            Err(BackendError::Rejected {
                status: Some(429),
                message: "scripted".into()
            })
        );
    }

    #[test]
    fn unmatched_prompt_is_rejected() {
        let b = FakeBackend::new(FakeScript::default());
        assert!(matches!(
            b.chat(&request(PromptKind::Expansion, "x")),
            Err(BackendError::Rejected { status: None, .. })
        ));
    }

    #[test]
    fn script_validation() {
        assert!(matches!(
            FakeScript::parse("[[rule]]\nresponses = []\n"),
            Err(ScriptError::NoResponses { index: 0 })
        ));
        assert!(matches!(
            FakeScript::parse("[[rule]]\nkind = \"nope\"\nresponses = [\"x\"]\n"),
            Err(ScriptError::UnknownKind { .. })
        ));
        assert!(FakeScript::parse("[[rule]]\nbogus = 1\nresponses = [\"x\"]\n").is_err());
    }
}
