//! Dilemma texts and biased/unbiased pairs.

use alloc::string::{String, ToString};
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bias::BiasLabel;

/// Which of the two answer options. Spelled `option_A` / `option_B`
/// everywhere outside of prose, matching the Prolog ground terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum OptionSide {
    #[serde(rename = "option_A")]
    A,
    #[serde(rename = "option_B")]
    B,
}

impl OptionSide {
    pub fn opposite(self) -> Self {
        match self {
            OptionSide::A => OptionSide::B,
            OptionSide::B => OptionSide::A,
        }
    }

    /// Prolog ground term.
    pub fn ground_term(self) -> &'static str {
        match self {
            OptionSide::A => "option_A",
            OptionSide::B => "option_B",
        }
    }

    /// Surface label used in prose and prompts.
    pub fn label(self) -> &'static str {
        match self {
            OptionSide::A => "Option A",
            OptionSide::B => "Option B",
        }
    }

    pub fn letter(self) -> char {
        match self {
            OptionSide::A => 'A',
            OptionSide::B => 'B',
        }
    }
}

impl fmt::Display for OptionSide {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.ground_term())
    }
}

impl FromStr for OptionSide {
    type Err = DilemmaError;

    /// Accepts `option_A`, `Option A`, `A` and case variants.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim().trim_matches(|c| c == '\'' || c == '"');
        let lower = t.to_ascii_lowercase();
        let tail = lower
            .strip_prefix("option")
            .map(|r| r.trim_start_matches(['_', ' ']))
            .unwrap_or(&lower);
        match tail {
            "a" => Ok(OptionSide::A),
            "b" => Ok(OptionSide::B),
            _ => Err(DilemmaError::UnknownOption(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DilemmaError {
    #[error("missing-question-mark: the dilemma does not end with a question")]
    MissingQuestionMark,
    #[error("missing-option: {0} is absent")]
    MissingOption(OptionSide),
    #[error("empty-body: no task description before the options")]
    EmptyBody,
    #[error("identical-options: both options carry the same text")]
    IdenticalOptions,
    #[error("unknown option label `{0}`")]
    UnknownOption(String),
}

impl DilemmaError {
    /// Short rule name, used as the rejection reason in ledgers.
    pub fn rule(&self) -> &'static str {
        match self {
            DilemmaError::MissingQuestionMark => "missing-question-mark",
            DilemmaError::MissingOption(_) => "missing-option",
            DilemmaError::EmptyBody => "empty-body",
            DilemmaError::IdenticalOptions => "identical-options",
            DilemmaError::UnknownOption(_) => "unknown-option",
        }
    }
}

/// A validated dilemma: free prose, two options and a closing question.
///
/// The original text is kept byte-for-byte; the parsed parts are views
/// of it with surrounding whitespace removed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct DilemmaText {
    text: String,
    body: String,
    option_a: String,
    option_b: String,
    question: String,
}

impl DilemmaText {
    /// Parses and validates raw dilemma text.
    pub fn parse(raw: &str) -> Result<Self, DilemmaError> {
        validate_dilemma_text(raw)
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }

    pub fn body(&self) -> &str {
        &self.body
    }

    pub fn option(&self, side: OptionSide) -> &str {
        match side {
            OptionSide::A => &self.option_a,
            OptionSide::B => &self.option_b,
        }
    }

    pub fn question(&self) -> &str {
        &self.question
    }
}

impl TryFrom<String> for DilemmaText {
    type Error = DilemmaError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        validate_dilemma_text(&value)
    }
}

impl From<DilemmaText> for String {
    fn from(value: DilemmaText) -> Self {
        value.text
    }
}

impl fmt::Display for DilemmaText {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

/// Checks the dilemma template: prose body, `Option A` and `Option B`
/// lines, and a final line ending in `?`.
pub fn validate_dilemma_text(raw: &str) -> Result<DilemmaText, DilemmaError> {
    let lines: alloc::vec::Vec<&str> = raw.lines().collect();
    let last = lines
        .iter()
        .rposition(|l| !l.trim().is_empty())
        .ok_or(DilemmaError::MissingQuestionMark)?;
    let question = lines[last].trim();
    if !question.ends_with('?') || option_line(question).is_some() {
        return Err(DilemmaError::MissingQuestionMark);
    }

    let mut first_option_line = None;
    let mut option_a = None;
    let mut option_b = None;
    for (i, line) in lines[..last].iter().enumerate() {
        if let Some((side, rest)) = option_line(line) {
            first_option_line.get_or_insert(i);
            let slot = match side {
                OptionSide::A => &mut option_a,
                OptionSide::B => &mut option_b,
            };
            slot.get_or_insert(rest);
        }
    }
    let option_a = option_a.ok_or(DilemmaError::MissingOption(OptionSide::A))?;
    let option_b = option_b.ok_or(DilemmaError::MissingOption(OptionSide::B))?;

    let body_end = first_option_line.unwrap_or(last);
    let body = lines[..body_end].join("\n");
    let body = body.trim();
    if body.is_empty() {
        return Err(DilemmaError::EmptyBody);
    }
    if option_a.eq_ignore_ascii_case(option_b) {
        return Err(DilemmaError::IdenticalOptions);
    }

    Ok(DilemmaText {
        text: raw.to_string(),
        body: body.to_string(),
        option_a: option_a.to_string(),
        option_b: option_b.to_string(),
        question: question.to_string(),
    })
}

/// Recognizes `- Option A: ...` style lines; returns the side and the
/// option text.
fn option_line(line: &str) -> Option<(OptionSide, &str)> {
    let t = line
        .trim_start()
        .trim_start_matches(['-', '*', '+', '\u{2022}'])
        .trim_start();
    let head = t.get(..8)?;
    if !head[..7].eq_ignore_ascii_case("option ") {
        return None;
    }
    let side = match head.as_bytes()[7] {
        b'A' | b'a' => OptionSide::A,
        b'B' | b'b' => OptionSide::B,
        _ => return None,
    };
    let rest = &t[8..];
    if rest.chars().next().is_some_and(|c| c.is_alphanumeric()) {
        return None;
    }
    let rest = rest
        .trim_start_matches(|c: char| {
            c.is_whitespace() || matches!(c, ':' | ')' | '.' | '-' | '\u{2013}' | '\u{2014}')
        })
        .trim();
    Some((side, rest))
}

/// An unbiased dilemma and its minimally edited biased counterpart.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DilemmaPair {
    pub id: String,
    pub bias: BiasLabel,
    pub unbiased: DilemmaText,
    pub biased: DilemmaText,
    pub generator_model: String,
    /// UTC, ISO-8601.
    pub created_at: String,
}

impl DilemmaPair {
    pub fn text(&self, variant: crate::prolog::Variant) -> &DilemmaText {
        match variant {
            crate::prolog::Variant::Unbiased => &self.unbiased,
            crate::prolog::Variant::Biased => &self.biased,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOOD: &str = "I maintain a billing service and must pick a caching approach.\n\
- Option A: cache invoices for five minutes.\n\
- Option B: skip caching entirely.\n\
Which option should I choose?";

    #[test]
    fn parses_well_formed_text() {
        let d = DilemmaText::parse(GOOD).unwrap();
        assert_eq!(
            d.body(),
            "I maintain a billing service and must pick a caching approach."
        );
        assert_eq!(d.option(OptionSide::A), "cache invoices for five minutes.");
        assert_eq!(d.option(OptionSide::B), "skip caching entirely.");
        assert_eq!(d.question(), "Which option should I choose?");
        assert_eq!(d.as_str(), GOOD);
    }

    #[test]
    fn missing_question_mark() {
        let t = GOOD.trim_end_matches('?');
        assert_eq!(
            DilemmaText::parse(t),
            Err(DilemmaError::MissingQuestionMark)
        );
        assert_eq!(
            DilemmaText::parse(""),
            Err(DilemmaError::MissingQuestionMark)
        );
    }

    #[test]
    fn missing_option_b() {
        let t = "I must decide.\n- Option A: do it.\nWhich option should I choose?";
        assert_eq!(
            DilemmaText::parse(t),
            Err(DilemmaError::MissingOption(OptionSide::B))
        );
    }

    #[test]
    fn empty_body() {
        let t = "- Option A: x.\n- Option B: y.\nWhich option should I choose?";
        assert_eq!(DilemmaText::parse(t), Err(DilemmaError::EmptyBody));
    }

    #[test]
    fn identical_options() {
        let t = "Body.\n- Option A: same.\n- Option B: same.\nWhich?";
        assert_eq!(DilemmaText::parse(t), Err(DilemmaError::IdenticalOptions));
    }

    #[test]
    fn option_labels_are_case_insensitive() {
        let t = "Body text.\n* option a) first\n* OPTION B - second\nA or B?";
        let d = DilemmaText::parse(t).unwrap();
        assert_eq!(d.option(OptionSide::A), "first");
        assert_eq!(d.option(OptionSide::B), "second");
    }

    #[test]
    fn option_word_prefix_is_not_an_option_line() {
        assert!(option_line("Option Alpha is nice").is_none());
        assert!(option_line("Optional: B").is_none());
    }

    #[test]
    fn option_side_spellings() {
        assert_eq!("option_A".parse::<OptionSide>().unwrap(), OptionSide::A);
        assert_eq!("Option B".parse::<OptionSide>().unwrap(), OptionSide::B);
        assert_eq!("b".parse::<OptionSide>().unwrap(), OptionSide::B);
        assert!("option_C".parse::<OptionSide>().is_err());
    }
}
