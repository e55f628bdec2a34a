//! Prolog program bundles, execution traces and the pair-equivalence check.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::time::Duration;

use serde::{Deserialize, Serialize};

use crate::dilemma::OptionSide;

/// The goal every program must answer.
pub const GOAL: &str = "decide_option(user, Choice)";

/// Directive that imports the shared axioms.
pub const CONSULT_DIRECTIVE: &str = ":- consult('axioms').";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Unbiased,
    Biased,
}

impl Variant {
    pub const BOTH: [Variant; 2] = [Variant::Unbiased, Variant::Biased];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Unbiased => "unbiased",
            Variant::Biased => "biased",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Shared axioms plus the two variant programs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrologBundle {
    pub axioms: String,
    pub unbiased_program: String,
    pub biased_program: String,
    /// One-sentence natural-language reading of the axioms.
    pub axioms_nl: String,
}

impl PrologBundle {
    pub fn program(&self, variant: Variant) -> &str {
        match variant {
            Variant::Unbiased => &self.unbiased_program,
            Variant::Biased => &self.biased_program,
        }
    }
}

/// Outcome of running `decide_option(user, Choice)` on one program.
/// Equality ignores `wall_time`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExecutionTrace {
    pub decision: OptionSide,
    pub inference_steps: u64,
    pub choice_steps: u64,
    /// Diagnostic only; never persisted and ignored by equality of counts.
    #[serde(skip)]
    pub wall_time: Duration,
}

impl ExecutionTrace {
    pub fn new(decision: OptionSide, inference_steps: u64, choice_steps: u64) -> Self {
        Self {
            decision,
            inference_steps,
            choice_steps,
            wall_time: Duration::ZERO,
        }
    }

    /// Equality of the deterministic part (decision and counts).
    pub fn same_counts(&self, other: &Self) -> bool {
        self.decision == other.decision
            && self.inference_steps == other.inference_steps
            && self.choice_steps == other.choice_steps
    }
}

impl PartialEq for ExecutionTrace {
    fn eq(&self, other: &Self) -> bool {
        self.same_counts(other)
    }
}

impl Eq for ExecutionTrace {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepCounter {
    Inference,
    Choice,
}

impl fmt::Display for StepCounter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StepCounter::Inference => "inference",
            StepCounter::Choice => "choice",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EquivalenceFailure {
    #[error("decision-mismatch: unbiased program chose {unbiased}, biased program chose {biased}")]
    DecisionMismatch {
        unbiased: OptionSide,
        biased: OptionSide,
    },
    #[error("step-mismatch: {counter} steps differ ({unbiased} vs {biased})")]
    StepMismatch {
        counter: StepCounter,
        unbiased: u64,
        biased: u64,
    },
}

impl EquivalenceFailure {
    pub fn reason(&self) -> &'static str {
        match self {
            EquivalenceFailure::DecisionMismatch { .. } => "decision-mismatch",
            EquivalenceFailure::StepMismatch { .. } => "step-mismatch",
        }
    }
}

/// Both variants must reach the same ground decision with identical
/// inference and choice step counts. Reports the first violated condition.
pub fn verify_pair_equivalence(
    unbiased: &ExecutionTrace,
    biased: &ExecutionTrace,
) -> Result<(), EquivalenceFailure> {
    if unbiased.decision != biased.decision {
        return Err(EquivalenceFailure::DecisionMismatch {
            unbiased: unbiased.decision,
            biased: biased.decision,
        });
    }
    if unbiased.inference_steps != biased.inference_steps {
        return Err(EquivalenceFailure::StepMismatch {
            counter: StepCounter::Inference,
            unbiased: unbiased.inference_steps,
            biased: biased.inference_steps,
        });
    }
    if unbiased.choice_steps != biased.choice_steps {
        return Err(EquivalenceFailure::StepMismatch {
            counter: StepCounter::Choice,
            unbiased: unbiased.choice_steps,
            biased: biased.choice_steps,
        });
    }
    Ok(())
}

fn squeeze(s: &str) -> String {
    s.chars().filter(|c| !c.is_whitespace()).collect()
}

/// True when the source mentions the `decide_option(user, ...)` goal.
pub fn mentions_goal(source: &str) -> bool {
    squeeze(source).contains("decide_option(user,")
}

/// True when the source consults the shared axioms file.
pub fn has_consult_directive(source: &str) -> bool {
    let s = squeeze(source);
    s.contains(":-consult('axioms')")
        || s.contains(":-consult(axioms)")
        || s.contains(":-consult('axioms.pl')")
        || s.contains(":-consult(\"axioms\")")
        || s.contains(":-ensure_loaded('axioms')")
        || s.contains(":-ensure_loaded(axioms)")
}

/// Removes the trailing goal instruction (`decide_option(user, Choice).`,
/// optionally as a `:-`/`?-` directive) that generated programs end with.
/// Loaded as a clause it would shadow the axioms' definition, so the goal
/// is issued by the harness instead.
pub fn executable_source(program: &str) -> String {
    let mut out: Vec<&str> = Vec::new();
    for line in program.lines() {
        if !is_goal_instruction(line) {
            out.push(line);
        }
    }
    let mut s = out.join("\n");
    s.push('\n');
    s
}

fn is_goal_instruction(line: &str) -> bool {
    let s = squeeze(line);
    let s = s
        .strip_prefix(":-")
        .or_else(|| s.strip_prefix("?-"))
        .unwrap_or(&s);
    let Some(rest) = s.strip_prefix("decide_option(user,") else {
        return false;
    };
    let Some(var) = rest.strip_suffix(").") else {
        return false;
    };
    let mut chars = var.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_uppercase() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}
