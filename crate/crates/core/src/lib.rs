//! Allocation-only core of the bias probe: dilemma and oracle types, prompt
//! rendering, reply grammars, cascade bookkeeping, similarity metrics,
//! evaluation arithmetic and statistics. No IO lives here.

#![no_std]
extern crate alloc;

pub mod bias;
pub mod cascade;
pub mod dilemma;
pub mod evaluation;
pub mod grammar;
pub mod prolog;
pub mod prompt;
pub mod record;
pub mod sampling;
pub mod similarity;
pub mod stats;
pub mod trail;

pub use bias::BiasLabel;
pub use cascade::{CascadeConfig, DiscardLedger};
pub use dilemma::{validate_dilemma_text, DilemmaPair, DilemmaText, OptionSide};
pub use prolog::{verify_pair_equivalence, ExecutionTrace, PrologBundle, Variant};
pub use prompt::{render_prompt, PromptContext, PromptKind};
pub use record::BenchmarkRecord;
pub use sampling::{ProfileLabel, SamplingProfile};
pub use trail::{FilterId, FilterOutcome, ValidationTrail};
