//! Benchmark generation: expansion, the six-filter validation cascade, the
//! divergence guard and discard accounting.

use std::sync::Arc;

use probe_core::cascade::{vote, AuditTally, ConfigError, Vote};
use probe_core::grammar::{
    parse_expansion_output, parse_explanation_decision, parse_judge_verdict, parse_prolog_sections,
    SectionError,
};
use probe_core::prompt::PromptError;
use probe_core::record::AUDIT_AGREEMENT;
use probe_core::similarity::{
    check_collision, check_intra_band, check_round_trip, cosine_similarity, normalized_levenshtein,
    Collision, SimilarityError,
};
use probe_core::{
    verify_pair_equivalence, BenchmarkRecord, BiasLabel, CascadeConfig, DilemmaPair, DilemmaText,
    DiscardLedger, ExecutionTrace, FilterId, FilterOutcome, OptionSide, PrologBundle,
    PromptContext, PromptKind, ValidationTrail, Variant,
};

use crate::dataset::{SeedCorpus, SeedPair};
use crate::gateway::{GatewayError, ModelHandle};
use crate::prolog::{PrologEngine, PrologError};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("prolog engine unavailable: {0}")]
    Engine(PrologError),
    #[error(transparent)]
    Similarity(#[from] SimilarityError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error("{bias}: need at least 2 seed pairs, found {found}")]
    InsufficientSeeds { bias: BiasLabel, found: usize },
    #[error("seed corpus has no pair with a Prolog bundle to use as a conversion example")]
    MissingBundleExample,
    #[error("divergence: {bias} accepted {accepted} dilemma(s) after {batches} batches")]
    Divergence {
        bias: BiasLabel,
        batches: u32,
        accepted: usize,
    },
    #[error("batch cap: {bias} accepted {accepted} of {target} after {batches} batches")]
    BatchCap {
        bias: BiasLabel,
        batches: u32,
        accepted: usize,
        target: u32,
    },
}

/// Unbiased-text embeddings of every dilemma accepted so far in a run.
#[derive(Debug, Clone, Default)]
pub struct Registry {
    ids: Vec<String>,
    vectors: Vec<Arc<[f64]>>,
}

impl Registry {
    pub fn push(&mut self, id: String, vector: Arc<[f64]>) {
        self.ids.push(id);
        self.vectors.push(vector);
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CascadeOutcome {
    Accepted(Box<BenchmarkRecord>),
    Discarded {
        filter: FilterId,
        reason: String,
        trail: ValidationTrail,
    },
}

/// One line of the per-candidate generation log.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateLog {
    pub id: String,
    pub bias: BiasLabel,
    pub batch: u32,
    /// `None` when accepted.
    pub failed: Option<FilterId>,
    pub reason: String,
}

/// Candidates parsed from one expansion reply.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub candidates: Vec<DilemmaPair>,
    pub template_rejections: usize,
}

pub struct Pipeline<'a> {
    pub generator: ModelHandle,
    pub judge: ModelHandle,
    pub embedder: ModelHandle,
    pub engine: &'a dyn PrologEngine,
    pub seeds: &'a SeedCorpus,
    pub cfg: CascadeConfig,
    /// UTC ISO-8601 stamp written to every generated pair.
    pub created_at: String,
}

fn candidate_id(bias: BiasLabel, batch: u32, index: usize) -> String {
    format!("{}-b{batch:03}-c{index:02}", bias.slug())
}

/// Adds bias name and definition to a context.
fn bias_context(bias: BiasLabel) -> PromptContext {
    PromptContext::new()
        .with("bias_label", bias.prompt_label())
        .with("bias_definition", bias.definition())
}

enum Step<T> {
    Pass(T),
    Fail(String),
}

impl Pipeline<'_> {
    pub fn expand_batch(
        &self,
        bias: BiasLabel,
        seeds: [&SeedPair; 2],
        batch: u32,
    ) -> Result<Batch, PipelineError> {
        let ctx = bias_context(bias)
            .with("batch_size", self.cfg.batch_size.to_string())
            .with("pair_1_nobias", seeds[0].unbiased.as_str())
            .with("pair_1_bias", seeds[0].biased.as_str())
            .with("pair_2_nobias", seeds[1].unbiased.as_str())
            .with("pair_2_bias", seeds[1].biased.as_str());
        let reply = self.generator.complete(PromptKind::Expansion, &ctx)?;
        let parsed = parse_expansion_output(&reply);
        let candidates = parsed
            .candidates
            .into_iter()
            .enumerate()
            .map(|(i, raw)| DilemmaPair {
                id: candidate_id(bias, batch, i),
                bias,
                unbiased: raw.unbiased,
                biased: raw.biased,
                generator_model: self.generator.model().to_string(),
                created_at: self.created_at.clone(),
            })
            .collect();
        Ok(Batch {
            candidates,
            template_rejections: parsed.rejections.len(),
        })
    }

    /// Asks for a Prolog bundle, re-asking up to `retries` times when the
    /// reply does not parse. The inner error is the last parse failure.
    pub fn convert_to_prolog(
        &self,
        pair: &DilemmaPair,
        retries: u32,
    ) -> Result<Result<(PrologBundle, u32), SectionError>, PipelineError> {
        let (example, bundle) = self
            .seeds
            .bundle_example(pair.bias)
            .ok_or(PipelineError::MissingBundleExample)?;
        let ctx = PromptContext::new()
            .with("bias_label", pair.bias.prompt_label())
            .with("unbiased_description_example_1", example.unbiased.as_str())
            .with("biased_description_example_1", example.biased.as_str())
            .with("prolog_axioms_example_1", bundle.axioms.trim_end())
            .with(
                "unbiased_prolog_example_1",
                bundle.unbiased_program.trim_end(),
            )
            .with("biased_prolog_example_1", bundle.biased_program.trim_end())
            .with("axioms_description_example_1", bundle.axioms_nl.as_str())
            .with("unbiased_description", pair.unbiased.as_str())
            .with("biased_description", pair.biased.as_str());
        let mut last = None;
        for attempt in 1..=retries + 1 {
            let reply = self.generator.complete(PromptKind::TextToProlog, &ctx)?;
            match parse_prolog_sections(&reply) {
                Ok(bundle) => return Ok(Ok((bundle, attempt))),
                Err(e) => last = Some(e),
            }
        }
        Ok(Err(last.expect("at least one attempt")))
    }

    /// Runs the deterministic decision prompt `runs` times on `task` and
    /// judges the tally against the oracle.
    pub fn audit_decisions(
        &self,
        task: &DilemmaText,
        oracle: OptionSide,
        runs: u32,
    ) -> Result<probe_core::cascade::AuditOutcome, PipelineError> {
        let ctx = PromptContext::new().with("task", task.as_str());
        let mut decisions = Vec::with_capacity(runs as usize);
        for _ in 0..runs {
            let reply = self.generator.complete(PromptKind::DecisionSystem, &ctx)?;
            decisions.push(parse_explanation_decision(&reply).ok().map(|(_, d)| d));
        }
        Ok(AuditTally::from_decisions(&decisions).judge(oracle, self.cfg.vote_threshold))
    }

    fn judge_votes(
        &self,
        kind: PromptKind,
        ctx: &PromptContext,
    ) -> Result<Vec<bool>, PipelineError> {
        let phrase = kind
            .affirmative(ctx)?
            .expect("judge kind has an affirmative literal");
        (0..self.cfg.judge_runs)
            .map(|_| {
                let reply = self.judge.complete(kind, ctx)?;
                Ok(parse_judge_verdict(&reply, &phrase).is_ok_and(|v| v.positive))
            })
            .collect()
    }

    fn execute(
        &self,
        bundle: &PrologBundle,
        variant: Variant,
    ) -> Result<Step<ExecutionTrace>, PipelineError> {
        match self.engine.execute(&bundle.axioms, bundle.program(variant)) {
            Ok(t) => Ok(Step::Pass(t)),
            Err(e) if e.is_infrastructure() => Err(PipelineError::Engine(e)),
            Err(e) => Ok(Step::Fail(format!("{variant}-{}", e.kind()))),
        }
    }

    /// Applies the filters in order; the first failure discards the
    /// candidate. Acceptance adds it to `registry`. Both outcomes are
    /// counted in `ledger`.
    pub fn run_cascade(
        &self,
        candidate: &DilemmaPair,
        registry: &mut Registry,
        ledger: &mut DiscardLedger,
    ) -> Result<CascadeOutcome, PipelineError> {
        let outcome = self.cascade(candidate, registry)?;
        match &outcome {
            CascadeOutcome::Accepted(_) => ledger.record_accept(candidate.bias),
            CascadeOutcome::Discarded { filter, .. } => {
                ledger.record_discard(candidate.bias, *filter)
            }
        }
        Ok(outcome)
    }

    fn cascade(
        &self,
        pair: &DilemmaPair,
        registry: &mut Registry,
    ) -> Result<CascadeOutcome, PipelineError> {
        let cfg = &self.cfg;
        let mut trail = ValidationTrail::new();
        macro_rules! fail {
            ($filter:expr, $outcome:expr, $reason:expr) => {{
                trail
                    .push($outcome)
                    .expect("cascade pushes in protocol order");
                return Ok(CascadeOutcome::Discarded {
                    filter: $filter,
                    reason: $reason,
                    trail,
                });
            }};
        }
        macro_rules! pass {
            ($outcome:expr) => {
                trail
                    .push($outcome)
                    .expect("cascade pushes in protocol order")
            };
        }

        let f = FilterId::IntraDilemmaSimilarity;
        let e_unbiased = self.embedder.embed(pair.unbiased.as_str())?;
        let e_biased = self.embedder.embed(pair.biased.as_str())?;
        let intra = cosine_similarity(&e_unbiased, &e_biased)?;
        let lev = normalized_levenshtein(pair.unbiased.as_str(), pair.biased.as_str());
        let o = FilterOutcome::new(f, true)
            .metric("cosine", intra)
            .metric("levenshtein", lev);
        if !check_intra_band(intra, pair.bias) {
            fail!(
                f,
                FilterOutcome { passed: false, ..o },
                "outside-band".into()
            );
        }
        pass!(o);

        let f = FilterId::LogicCorrectness;
        let (bundle, attempts) = match self.convert_to_prolog(pair, cfg.conversion_retries)? {
            Ok(b) => b,
            Err(e) => fail!(
                f,
                FilterOutcome::new(f, false)
                    .metric("attempts", f64::from(cfg.conversion_retries + 1)),
                format!("conversion-exhausted: {e}")
            ),
        };
        let o = FilterOutcome::new(f, true).metric("attempts", f64::from(attempts));
        let unbiased_trace = match self.execute(&bundle, Variant::Unbiased)? {
            Step::Pass(t) => t,
            Step::Fail(reason) => fail!(f, FilterOutcome { passed: false, ..o }, reason),
        };
        let biased_trace = match self.execute(&bundle, Variant::Biased)? {
            Step::Pass(t) => t,
            Step::Fail(reason) => fail!(f, FilterOutcome { passed: false, ..o }, reason),
        };
        let o = o
            .metric("inference_steps", unbiased_trace.inference_steps as f64)
            .metric("choice_steps", unbiased_trace.choice_steps as f64);
        if let Err(e) = verify_pair_equivalence(&unbiased_trace, &biased_trace) {
            fail!(f, FilterOutcome { passed: false, ..o }, e.to_string());
        }
        pass!(o);
        let oracle = unbiased_trace.decision;

        let f = FilterId::BiasPresence;
        let mut o = FilterOutcome::new(f, true);
        if cfg.single_text_check {
            let ctx = bias_context(pair.bias).with("task", pair.biased.as_str());
            let votes = self.judge_votes(PromptKind::BiasIdentification, &ctx)?;
            o = o.metric("single_votes", share(&votes));
            if vote(&votes, cfg.vote_threshold) == Vote::Reject {
                fail!(
                    f,
                    FilterOutcome { passed: false, ..o },
                    "single-text-vote".into()
                );
            }
        }
        let ctx = bias_context(pair.bias)
            .with("wrong_option", oracle.opposite().label())
            .with("unbiased_task", pair.unbiased.as_str())
            .with("biased_task", pair.biased.as_str());
        let votes = self.judge_votes(PromptKind::PairwiseBiasCheck, &ctx)?;
        let o = o.metric("votes", share(&votes));
        if vote(&votes, cfg.vote_threshold) == Vote::Reject {
            fail!(
                f,
                FilterOutcome { passed: false, ..o },
                "pairwise-vote".into()
            );
        }
        pass!(o);

        let f = FilterId::PrologTextAlignment;
        let (example, example_bundle) = self
            .seeds
            .bundle_example(pair.bias)
            .ok_or(PipelineError::MissingBundleExample)?;
        let ctx = PromptContext::new()
            .with(
                "dilemma_example",
                example_bundle.unbiased_program.trim_end(),
            )
            .with("description_example", example.unbiased.as_str())
            .with("dilemma_to_encode", bundle.unbiased_program.trim_end());
        let rebuilt = self.generator.complete(PromptKind::PrologToText, &ctx)?;
        let e_rebuilt = self.embedder.embed(rebuilt.trim())?;
        let round_trip = cosine_similarity(&e_unbiased, &e_rebuilt)?;
        let o = FilterOutcome::new(f, true).metric("cosine", round_trip);
        if !check_round_trip(round_trip, cfg.round_trip_tau) {
            fail!(f, FilterOutcome { passed: false, ..o }, "below-tau".into());
        }
        pass!(o);

        let f = FilterId::OutputMatching;
        let audit = self.audit_decisions(&pair.unbiased, oracle, cfg.audit_runs)?;
        let o = FilterOutcome::new(f, true).metric(AUDIT_AGREEMENT, audit.agreement);
        if let Some(failure) = audit.failure {
            fail!(
                f,
                FilterOutcome { passed: false, ..o },
                failure.reason().into()
            );
        }
        pass!(o);

        let f = FilterId::InterDilemmaSimilarity;
        match check_collision(&e_unbiased, &registry.vectors, cfg.collision_tau)? {
            Collision::Hit { index, similarity } => fail!(
                f,
                FilterOutcome::new(f, false).metric("max_cosine", similarity),
                format!("collides-with {}", registry.ids[index])
            ),
            Collision::Clear { max_similarity } => {
                let mut o = FilterOutcome::new(f, true);
                if let Some(m) = max_similarity {
                    o = o.metric("max_cosine", m);
                }
                pass!(o);
            }
        }

        registry.push(pair.id.clone(), e_unbiased);
        Ok(CascadeOutcome::Accepted(Box::new(BenchmarkRecord {
            pair: pair.clone(),
            bundle,
            unbiased_trace,
            biased_trace,
            intra_cosine: intra,
            intra_levenshtein: lev,
            round_trip_cosine: round_trip,
            trail,
        })))
    }

    /// Expands and cascades batches for `bias` until `target_count` records
    /// are accepted. The ledger and log are updated even when this fails.
    pub fn generate_benchmark(
        &self,
        bias: BiasLabel,
        registry: &mut Registry,
        ledger: &mut DiscardLedger,
        log: &mut Vec<CandidateLog>,
    ) -> Result<Vec<BenchmarkRecord>, PipelineError> {
        self.cfg.validate()?;
        let seeds = self.seeds.for_bias(bias);
        if seeds.len() < 2 {
            return Err(PipelineError::InsufficientSeeds {
                bias,
                found: seeds.len(),
            });
        }
        let target = self.cfg.target_count as usize;
        let mut accepted = Vec::new();
        let mut batch = 0u32;
        loop {
            if batch >= self.cfg.max_batches {
                return Err(PipelineError::BatchCap {
                    bias,
                    batches: batch,
                    accepted: accepted.len(),
                    target: self.cfg.target_count,
                });
            }
            let n = seeds.len();
            let pick = [
                seeds[(2 * batch as usize) % n],
                seeds[(2 * batch as usize + 1) % n],
            ];
            let expanded = self.expand_batch(bias, pick, batch)?;
            ledger.record_batch(bias, expanded.template_rejections as u64);
            for candidate in &expanded.candidates {
                let outcome = self.run_cascade(candidate, registry, ledger)?;
                let entry = |failed, reason| CandidateLog {
                    id: candidate.id.clone(),
                    bias,
                    batch,
                    failed,
                    reason,
                };
                match outcome {
                    CascadeOutcome::Accepted(record) => {
                        log.push(entry(None, String::new()));
                        accepted.push(*record);
                        if accepted.len() >= target {
                            return Ok(accepted);
                        }
                    }
                    CascadeOutcome::Discarded { filter, reason, .. } => {
                        log.push(entry(Some(filter), reason));
                    }
                }
            }
            batch += 1;
            if batch == self.cfg.divergence_attempts && accepted.len() <= 1 {
                return Err(PipelineError::Divergence {
                    bias,
                    batches: batch,
                    accepted: accepted.len(),
                });
            }
        }
    }
}

fn share(votes: &[bool]) -> f64 {
    if votes.is_empty() {
        return 0.0;
    }
    votes.iter().filter(|v| **v).count() as f64 / votes.len() as f64
}
