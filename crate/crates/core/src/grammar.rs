//! Parsers for model replies. Every parser is total: any input yields a
//! value or a named error.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::dilemma::{DilemmaError, DilemmaText, OptionSide};
use crate::prolog::{has_consult_directive, mentions_goal, PrologBundle, Variant};

/// ASCII case-insensitive substring search that only reports matches on
/// char boundaries.
fn find_ci(hay: &str, needle: &str) -> Option<usize> {
    let n = needle.len();
    hay.char_indices().map(|(i, _)| i).find(|&i| {
        hay.get(i..i + n)
            .is_some_and(|w| w.eq_ignore_ascii_case(needle))
    })
}

fn starts_with_ci(s: &str, prefix: &str) -> bool {
    s.get(..prefix.len())
        .is_some_and(|h| h.eq_ignore_ascii_case(prefix))
}

fn is_fence(line: &str) -> bool {
    line.trim_start().starts_with("```")
}

/// Heading text of a markdown heading line, without the hashes.
fn heading(line: &str) -> Option<&str> {
    let t = line.trim();
    if !t.starts_with('#') {
        return None;
    }
    Some(
        t.trim_start_matches('#')
            .trim()
            .trim_matches(['*', ':'])
            .trim(),
    )
}

struct Section<'a> {
    title: &'a str,
    lines: Vec<&'a str>,
}

/// Splits text into markdown sections; headings inside code fences are
/// treated as content.
fn sections(text: &str) -> Vec<Section<'_>> {
    let mut out: Vec<Section<'_>> = Vec::new();
    let mut in_fence = false;
    for line in text.lines() {
        if !in_fence {
            if let Some(title) = heading(line) {
                out.push(Section {
                    title,
                    lines: Vec::new(),
                });
                continue;
            }
        }
        if is_fence(line) {
            in_fence = !in_fence;
        }
        if let Some(s) = out.last_mut() {
            s.lines.push(line);
        }
    }
    out
}

/// Content of the first fenced block in the section, if any.
fn first_fenced(lines: &[&str]) -> Option<String> {
    let start = lines.iter().position(|l| is_fence(l))?;
    let len = lines[start + 1..].iter().position(|l| is_fence(l));
    let body = match len {
        Some(n) => &lines[start + 1..start + 1 + n],
        None => &lines[start + 1..],
    };
    Some(body.join("\n"))
}

fn section_text(lines: &[&str]) -> String {
    match first_fenced(lines) {
        Some(fenced) => fenced.trim().to_string(),
        None => lines.join("\n").trim().to_string(),
    }
}

/// An (unbiased, biased) text pair extracted from an expansion reply.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawPair {
    pub unbiased: DilemmaText,
    pub biased: DilemmaText,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RejectReason {
    Template {
        variant: Variant,
        error: DilemmaError,
    },
    IdenticalSides,
    Unpaired(Variant),
}

impl RejectReason {
    pub fn rule(&self) -> &'static str {
        match self {
            RejectReason::Template { error, .. } => error.rule(),
            RejectReason::IdenticalSides => "identical-sides",
            RejectReason::Unpaired(_) => "unpaired-section",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rejection {
    /// Zero-based pair position in the reply.
    pub position: usize,
    pub reason: RejectReason,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExpansionParse {
    pub candidates: Vec<RawPair>,
    pub rejections: Vec<Rejection>,
}

/// Extracts dilemma pairs from `## Unbiased Dilemma` / `## Biased Dilemma`
/// sections, matched positionally. Pairs that break the dilemma template
/// are dropped with a reason.
pub fn parse_expansion_output(text: &str) -> ExpansionParse {
    let mut unbiased = Vec::new();
    let mut biased = Vec::new();
    for s in sections(text) {
        if starts_with_ci(s.title, "unbiased") {
            unbiased.push(section_text(&s.lines));
        } else if starts_with_ci(s.title, "biased") {
            biased.push(section_text(&s.lines));
        }
    }

    let mut out = ExpansionParse::default();
    let paired = unbiased.len().min(biased.len());
    for (position, (u, b)) in unbiased.iter().zip(&biased).enumerate() {
        let reason = match (DilemmaText::parse(u), DilemmaText::parse(b)) {
            (Err(error), _) => Some(RejectReason::Template {
                variant: Variant::Unbiased,
                error,
            }),
            (_, Err(error)) => Some(RejectReason::Template {
                variant: Variant::Biased,
                error,
            }),
            (Ok(u), Ok(b)) if u.as_str() == b.as_str() => Some(RejectReason::IdenticalSides),
            (Ok(unbiased), Ok(biased)) => {
                out.candidates.push(RawPair { unbiased, biased });
                None
            }
        };
        if let Some(reason) = reason {
            out.rejections.push(Rejection { position, reason });
        }
    }
    let (extra, variant) = if unbiased.len() > paired {
        (unbiased.len() - paired, Variant::Unbiased)
    } else {
        (biased.len() - paired, Variant::Biased)
    };
    for k in 0..extra {
        out.rejections.push(Rejection {
            position: paired + k,
            reason: RejectReason::Unpaired(variant),
        });
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SectionError {
    #[error("missing-section: `{0}`")]
    MissingSection(&'static str),
    #[error("missing-code-block: section `{0}` has no fenced Prolog block")]
    MissingCodeBlock(&'static str),
    #[error("empty-axioms")]
    EmptyAxioms,
    #[error("missing-consult: the {0} program does not consult the axioms")]
    MissingConsult(Variant),
    #[error("missing-goal-predicate: the {0} program lacks decide_option(user, Choice)")]
    MissingGoalPredicate(Variant),
}

const AXIOMS: &str = "Axioms";
const UNBIASED: &str = "Unbiased";
const BIASED: &str = "Biased";
const NL: &str = "NL Representation of Axioms";

/// Extracts axioms, both programs and the axiom description. Later
/// occurrences of a heading win, so echoed example input is skipped.
pub fn parse_prolog_sections(text: &str) -> Result<PrologBundle, SectionError> {
    let mut axioms = None;
    let mut unbiased = None;
    let mut biased = None;
    let mut nl = None;
    for s in sections(text) {
        let t = s.title;
        if t.eq_ignore_ascii_case("axioms") {
            axioms = Some(s);
        } else if starts_with_ci(t, "unbiased") {
            unbiased = Some(s);
        } else if starts_with_ci(t, "biased") {
            biased = Some(s);
        } else if starts_with_ci(t, "nl representation") {
            nl = Some(s);
        }
    }
    let code = |s: Option<Section<'_>>, name: &'static str| -> Result<String, SectionError> {
        let s = s.ok_or(SectionError::MissingSection(name))?;
        first_fenced(&s.lines).ok_or(SectionError::MissingCodeBlock(name))
    };
    let axioms = code(axioms, AXIOMS)?;
    let unbiased_program = code(unbiased, UNBIASED)?;
    let biased_program = code(biased, BIASED)?;
    let nl = nl.ok_or(SectionError::MissingSection(NL))?;
    let axioms_nl = section_text(&nl.lines).trim_matches('`').trim().to_string();
    if axioms_nl.is_empty() {
        return Err(SectionError::MissingSection(NL));
    }
    if axioms.trim().is_empty() {
        return Err(SectionError::EmptyAxioms);
    }
    for (variant, program) in [
        (Variant::Unbiased, &unbiased_program),
        (Variant::Biased, &biased_program),
    ] {
        if !has_consult_directive(program) {
            return Err(SectionError::MissingConsult(variant));
        }
        if !mentions_goal(program) {
            return Err(SectionError::MissingGoalPredicate(variant));
        }
    }
    Ok(PrologBundle {
        axioms: trim_block(&axioms),
        unbiased_program: trim_block(&unbiased_program),
        biased_program: trim_block(&biased_program),
        axioms_nl,
    })
}

fn trim_block(s: &str) -> String {
    let mut t = s.trim_matches('\n').to_string();
    t.push('\n');
    t
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DecisionError {
    #[error("missing-decision-line")]
    MissingDecisionLine,
    #[error("ambiguous-decision: `{0}`")]
    AmbiguousDecision(String),
}

fn strip_decoration(line: &str) -> &str {
    line.trim_start_matches(|c: char| {
        c.is_whitespace() || matches!(c, '*' | '#' | '-' | '>' | '`' | '_')
    })
}

/// `(label value)` when the line is `Label: value`, case-insensitively.
fn labelled<'a>(line: &'a str, label: &str) -> Option<&'a str> {
    let t = strip_decoration(line);
    if !starts_with_ci(t, label) {
        return None;
    }
    let rest = t[label.len()..].trim_start_matches(['*', '_']).trim_start();
    let rest = rest.strip_prefix(':')?;
    Some(rest.trim_start_matches(['*', '_']).trim())
}

struct Labelled {
    explanation: String,
    decision: String,
}

fn split_labels(text: &str) -> Option<Labelled> {
    let lines: Vec<&str> = text.lines().collect();
    let d = lines
        .iter()
        .position(|l| labelled(l, "decision").is_some())?;
    let mut decision = labelled(lines[d], "decision")
        .unwrap_or_default()
        .to_string();
    if decision.is_empty() {
        if let Some(next) = lines[d + 1..].iter().find(|l| !l.trim().is_empty()) {
            decision = next.trim().to_string();
        }
    }
    let explanation = match lines[..d]
        .iter()
        .position(|l| labelled(l, "explanation").is_some())
    {
        Some(e) => {
            let mut parts = Vec::new();
            parts.push(labelled(lines[e], "explanation").unwrap_or_default());
            parts.extend(lines[e + 1..d].iter().map(|l| l.trim()));
            parts.join("\n").trim().to_string()
        }
        None => String::new(),
    };
    Some(Labelled {
        explanation,
        decision,
    })
}

fn mentions_option(value: &str, side: OptionSide) -> bool {
    let needle = match side {
        OptionSide::A => "option a",
        OptionSide::B => "option b",
    };
    let mut rest = value;
    while let Some(i) = find_ci(rest, needle) {
        let after = &rest[i + needle.len()..];
        if !after.chars().next().is_some_and(|c| c.is_alphanumeric()) {
            return true;
        }
        rest = after;
    }
    false
}

/// Parses the `Explanation: ... / Decision: Option X` reply format.
pub fn parse_explanation_decision(text: &str) -> Result<(String, OptionSide), DecisionError> {
    let l = split_labels(text).ok_or(DecisionError::MissingDecisionLine)?;
    let a = mentions_option(&l.decision, OptionSide::A);
    let b = mentions_option(&l.decision, OptionSide::B);
    match (a, b) {
        (true, false) => Ok((l.explanation, OptionSide::A)),
        (false, true) => Ok((l.explanation, OptionSide::B)),
        _ => Err(DecisionError::AmbiguousDecision(l.decision)),
    }
}

/// Judge reply: free explanation plus a yes/no decision.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JudgeVerdict {
    pub explanation: String,
    pub positive: bool,
}

/// Positive iff the decision value starts with `positive_phrase`
/// (case-insensitive; quotes and a trailing period are not significant).
pub fn parse_judge_verdict(
    text: &str,
    positive_phrase: &str,
) -> Result<JudgeVerdict, DecisionError> {
    let l = split_labels(text).ok_or(DecisionError::MissingDecisionLine)?;
    let value = l.decision.trim_start_matches(|c: char| {
        c.is_whitespace() || matches!(c, '\'' | '"' | '`' | '<' | '\u{2018}' | '\u{201c}')
    });
    let phrase = positive_phrase.trim().trim_end_matches('.');
    Ok(JudgeVerdict {
        explanation: l.explanation,
        positive: starts_with_ci(value, phrase),
    })
}
