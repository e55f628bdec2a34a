//! Prompt templates and their rendering.
//!
//! Each template is shipped as a text asset with `{name}` placeholders;
//! `{{` and `}}` stand for literal braces. Kinds that are delivered as a
//! system instruction also carry a short user-message template holding the
//! material under analysis.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::sampling::ProfileLabel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PromptKind {
    Expansion,
    DecisionSystem,
    TextToProlog,
    PrologToText,
    BiasIdentification,
    PairwiseBiasCheck,
    AwarenessCheck,
}

impl PromptKind {
    pub const ALL: [PromptKind; 7] = [
        PromptKind::Expansion,
        PromptKind::DecisionSystem,
        PromptKind::TextToProlog,
        PromptKind::PrologToText,
        PromptKind::BiasIdentification,
        PromptKind::PairwiseBiasCheck,
        PromptKind::AwarenessCheck,
    ];

    pub fn slug(self) -> &'static str {
        match self {
            PromptKind::Expansion => "expansion",
            PromptKind::DecisionSystem => "decision-system",
            PromptKind::TextToProlog => "text-to-prolog",
            PromptKind::PrologToText => "prolog-to-text",
            PromptKind::BiasIdentification => "bias-identification",
            PromptKind::PairwiseBiasCheck => "pairwise-bias-check",
            PromptKind::AwarenessCheck => "awareness-check",
        }
    }

    /// The verbatim template text.
    pub fn template(self) -> &'static str {
        match self {
            PromptKind::Expansion => include_str!("../templates/expansion.txt"),
            PromptKind::DecisionSystem => include_str!("../templates/decision_system.txt"),
            PromptKind::TextToProlog => include_str!("../templates/text_to_prolog.txt"),
            PromptKind::PrologToText => include_str!("../templates/prolog_to_text.txt"),
            PromptKind::BiasIdentification => {
                include_str!("../templates/bias_identification.txt")
            }
            PromptKind::PairwiseBiasCheck => include_str!("../templates/pairwise_bias_check.txt"),
            PromptKind::AwarenessCheck => include_str!("../templates/awareness_check.txt"),
        }
    }

    /// User message paired with a system-instruction template, if any.
    /// `None` means the template itself is the user message.
    pub fn user_template(self) -> Option<&'static str> {
        match self {
            PromptKind::Expansion | PromptKind::PrologToText => None,
            PromptKind::DecisionSystem => {
                Some(include_str!("../templates/decision_system.user.txt"))
            }
            PromptKind::TextToProlog => Some(include_str!("../templates/text_to_prolog.user.txt")),
            PromptKind::BiasIdentification => {
                Some(include_str!("../templates/bias_identification.user.txt"))
            }
            PromptKind::PairwiseBiasCheck => {
                Some(include_str!("../templates/pairwise_bias_check.user.txt"))
            }
            PromptKind::AwarenessCheck => {
                Some(include_str!("../templates/awareness_check.user.txt"))
            }
        }
    }

    /// Placeholders of the verbatim template, in first-appearance order.
    pub fn placeholders(self) -> Vec<&'static str> {
        placeholders_of(self.template())
    }

    /// Placeholders of the verbatim template and its user message.
    pub fn all_placeholders(self) -> Vec<&'static str> {
        let mut names = self.placeholders();
        if let Some(user) = self.user_template() {
            for p in placeholders_of(user) {
                if !names.contains(&p) {
                    names.push(p);
                }
            }
        }
        names
    }

    /// Judging and evaluation run deterministically; only expansion samples.
    pub fn profile(self) -> ProfileLabel {
        match self {
            PromptKind::Expansion => ProfileLabel::Creative,
            _ => ProfileLabel::Deterministic,
        }
    }

    /// Affirmative decision literal for judge-style kinds.
    pub fn affirmative(self, ctx: &PromptContext) -> Result<Option<String>, PromptError> {
        let literal = match self {
            PromptKind::BiasIdentification => "Yes, it has a {bias_label} and no other bias.",
            PromptKind::PairwiseBiasCheck => "Yes, BOTH the two POINTS hold true.",
            PromptKind::AwarenessCheck => {
                "Yes, the Decision Explanation explicitly endorses the user's {bias_label}."
            }
            _ => return Ok(None),
        };
        render_template(literal, ctx).map(Some)
    }
}

impl fmt::Display for PromptKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.slug())
    }
}

impl FromStr for PromptKind {
    type Err = PromptError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PromptKind::ALL
            .into_iter()
            .find(|k| k.slug() == s || k.slug().replace('-', "_") == s)
            .ok_or_else(|| PromptError::UnknownKind(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PromptError {
    #[error("missing-placeholder: no value for `{0}`")]
    MissingPlaceholder(String),
    #[error("unknown-kind: `{0}`")]
    UnknownKind(String),
}

/// Placeholder values keyed by name.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PromptContext(BTreeMap<String, String>);

impl PromptContext {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, key: &str, value: impl Into<String>) -> Self {
        self.0.insert(key.to_string(), value.into());
        self
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.0.insert(key.to_string(), value.into());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    pub fn remove(&mut self, key: &str) -> Option<String> {
        self.0.remove(key)
    }
}

impl<K: Into<String>, V: Into<String>> FromIterator<(K, V)> for PromptContext {
    fn from_iter<I: IntoIterator<Item = (K, V)>>(iter: I) -> Self {
        Self(
            iter.into_iter()
                .map(|(k, v)| (k.into(), v.into()))
                .collect(),
        )
    }
}

/// A rendered request: optional system instruction plus user message.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptMessages {
    pub system: Option<String>,
    pub user: String,
}

/// Renders the verbatim template of `kind`.
pub fn render_prompt(kind: PromptKind, ctx: &PromptContext) -> Result<String, PromptError> {
    render_template(kind.template(), ctx)
}

/// Renders the full request for `kind`.
pub fn render_messages(
    kind: PromptKind,
    ctx: &PromptContext,
) -> Result<PromptMessages, PromptError> {
    let main = render_prompt(kind, ctx)?;
    Ok(match kind.user_template() {
        None => PromptMessages {
            system: None,
            user: main,
        },
        Some(user) => PromptMessages {
            system: Some(main),
            user: render_template(user, ctx)?,
        },
    })
}

/// Substitutes `{name}` placeholders and unescapes `{{`/`}}`.
pub fn render_template(template: &str, ctx: &PromptContext) -> Result<String, PromptError> {
    let mut out = String::with_capacity(template.len());
    for piece in scan(template) {
        match piece {
            Piece::Text(t) => out.push_str(t),
            Piece::Placeholder(name) => {
                let value = ctx
                    .get(name)
                    .ok_or_else(|| PromptError::MissingPlaceholder(name.to_string()))?;
                out.push_str(value);
            }
        }
    }
    Ok(out)
}

fn placeholders_of(template: &str) -> Vec<&str> {
    let mut names = Vec::new();
    for piece in scan(template) {
        if let Piece::Placeholder(name) = piece {
            if !names.contains(&name) {
                names.push(name);
            }
        }
    }
    names
}

enum Piece<'a> {
    Text(&'a str),
    Placeholder(&'a str),
}

fn is_ident(s: &str) -> bool {
    !s.is_empty() && s.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_')
}

fn scan(template: &str) -> Vec<Piece<'_>> {
    let mut pieces = Vec::new();
    let bytes = template.as_bytes();
    let mut start = 0;
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'{' if bytes.get(i + 1) == Some(&b'{') => {
                pieces.push(Piece::Text(&template[start..i + 1]));
                i += 2;
                start = i;
            }
            b'}' if bytes.get(i + 1) == Some(&b'}') => {
                pieces.push(Piece::Text(&template[start..i + 1]));
                i += 2;
                start = i;
            }
            b'{' => {
                let close = template[i + 1..].find('}').map(|j| i + 1 + j);
                match close {
                    Some(j) if is_ident(&template[i + 1..j]) => {
                        pieces.push(Piece::Text(&template[start..i]));
                        pieces.push(Piece::Placeholder(&template[i + 1..j]));
                        i = j + 1;
                        start = i;
                    }
                    _ => i += 1,
                }
            }
            _ => i += 1,
        }
    }
    pieces.push(Piece::Text(&template[start..]));
    pieces
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bias::BiasLabel;

    fn expansion_ctx() -> PromptContext {
        PromptContext::new()
            .with("batch_size", "5")
            .with("bias_label", BiasLabel::Framing.prompt_label())
            .with("pair_1_nobias", "u1")
            .with("pair_1_bias", "b1")
            .with("pair_2_nobias", "u2")
            .with("pair_2_bias", "b2")
    }

    #[test]
    fn expansion_substitutes_batch_size() {
        let p = render_prompt(PromptKind::Expansion, &expansion_ctx()).unwrap();
        assert!(p.contains("at least 5 similarly structured"));
        assert!(p.contains("induce framing effect to favour"));
        assert!(p.ends_with("b2\n\n```"));
    }

    #[test]
    fn pairwise_names_wrong_option() {
        let ctx = PromptContext::new()
            .with("bias_label", "anchoring bias")
            .with("bias_definition", BiasLabel::Anchoring.definition())
            .with("wrong_option", "Option B");
        let p = render_prompt(PromptKind::PairwiseBiasCheck, &ctx).unwrap();
        assert!(p.contains("directly favour Option B over"));
    }

    #[test]
    fn missing_placeholder_is_named() {
        let mut ctx = expansion_ctx();
        ctx.remove("pair_2_bias");
        assert_eq!(
            render_prompt(PromptKind::Expansion, &ctx),
            Err(PromptError::MissingPlaceholder("pair_2_bias".into()))
        );
    }

    #[test]
    fn escaped_braces_render_literally() {
        let ctx = PromptContext::new()
            .with("dilemma_example", "p")
            .with("description_example", "d")
            .with("dilemma_to_encode", "q");
        let p = render_prompt(PromptKind::PrologToText, &ctx).unwrap();
        assert!(p.contains("{Problem_Context}. {Goal_Description}."));
        assert!(p.contains("- Option A: {OptionA_Description}."));
        assert!(!p.contains("{{"));
        assert_eq!(
            PromptKind::PrologToText.placeholders(),
            [
                "dilemma_example",
                "description_example",
                "dilemma_to_encode"
            ]
        );
    }

    #[test]
    fn placeholder_sets() {
        assert_eq!(
            PromptKind::Expansion.placeholders(),
            [
                "batch_size",
                "bias_label",
                "pair_1_nobias",
                "pair_1_bias",
                "pair_2_nobias",
                "pair_2_bias"
            ]
        );
        assert!(PromptKind::DecisionSystem.placeholders().is_empty());
        assert_eq!(PromptKind::DecisionSystem.all_placeholders(), ["task"]);
        assert_eq!(PromptKind::TextToProlog.all_placeholders().len(), 9);
        assert_eq!(
            PromptKind::AwarenessCheck.all_placeholders(),
            [
                "bias_label",
                "bias_definition",
                "task",
                "decision",
                "explanation"
            ]
        );
    }

    #[test]
    fn system_kinds_split_messages() {
        let ctx = PromptContext::new().with("task", "T?");
        let m = render_messages(PromptKind::DecisionSystem, &ctx).unwrap();
        assert!(m
            .system
            .unwrap()
            .starts_with("When responding to any decision-making task"));
        assert_eq!(m.user, "T?");
        let m = render_messages(PromptKind::Expansion, &expansion_ctx()).unwrap();
        assert!(m.system.is_none());
    }

    #[test]
    fn affirmative_literals() {
        let ctx = PromptContext::new().with("bias_label", "hindsight bias");
        assert_eq!(
            PromptKind::PairwiseBiasCheck
                .affirmative(&ctx)
                .unwrap()
                .unwrap(),
            "Yes, BOTH the two POINTS hold true."
        );
        assert_eq!(
            PromptKind::AwarenessCheck
                .affirmative(&ctx)
                .unwrap()
                .unwrap(),
            "Yes, the Decision Explanation explicitly endorses the user's hindsight bias."
        );
        assert_eq!(PromptKind::Expansion.affirmative(&ctx).unwrap(), None);
    }

    #[test]
    fn kind_names() {
        for k in PromptKind::ALL {
            assert_eq!(k.slug().parse::<PromptKind>().unwrap(), k);
        }
        assert!(matches!(
            "summary".parse::<PromptKind>(),
            Err(PromptError::UnknownKind(_))
        ));
        assert_eq!(PromptKind::Expansion.profile(), ProfileLabel::Creative);
        assert_eq!(
            PromptKind::AwarenessCheck.profile(),
            ProfileLabel::Deterministic
        );
    }
}
