mod common;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use common::{dilemma, repo_root};
use probe::core::{BiasLabel, CascadeConfig, DiscardLedger, ExecutionTrace, FilterId, OptionSide};
use probe::dataset::SeedCorpus;
use probe::gateway::{FakeBackend, FakeScript, Gateway, ModelHandle, RetryPolicy};
use probe::pipeline::{CascadeOutcome, Pipeline, PipelineError, Registry};
use probe::prolog::{PrologEngine, PrologError};

/// Decides from markers in the program text and counts calls.
#[derive(Default)]
struct MarkerEngine {
    calls: AtomicUsize,
}

impl PrologEngine for MarkerEngine {
    fn execute(&self, _axioms: &str, program: &str) -> Result<ExecutionTrace, PrologError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        if program.contains("engine_down") {
            return Err(PrologError::EngineMissing {
                binary: "swipl".into(),
                reason: "not found".into(),
            });
        }
        if program.contains("broken(") {
            return Err(PrologError::Syntax("operator expected".into()));
        }
        let decision = if program.contains("prefers_b") {
            OptionSide::B
        } else {
            OptionSide::A
        };
        let extra = program.matches("extra_step").count() as u64;
        Ok(ExecutionTrace::new(decision, 4 + extra, 0))
    }
}

fn unbiased() -> String {
    dilemma(
        "I must choose a backup tool for the team wiki. The current tool is maintained and tested.",
    )
}

fn biased() -> String {
    dilemma("I must choose a backup tool for the team wiki. The current tool is maintained and tested, but every other team switched away.")
}

fn expansion(pairs: usize) -> String {
    (1..=pairs)
        .map(|i| {
            format!(
                "# Pair {i}\n## Unbiased Dilemma\n```\n{}\n```\n## Biased Dilemma\n```\n{}\n```\n",
                unbiased(),
                biased()
            )
        })
        .collect()
}

fn bundle(biased_extra: &str) -> String {
    format!(
        "## Axioms\n```prolog\ndecide_option(U, option_A) :- maintained(U).\ndecide_option(_, option_B).\n```\n\
## Unbiased\n```prolog\n:- consult('axioms').\nmaintained(user).\ndecide_option(user, Choice).\n```\n\
## Biased\n```prolog\n:- consult('axioms').\nmaintained(user).\n{biased_extra}\ndecide_option(user, Choice).\n```\n\
## NL Representation of Axioms\nKeep maintained tools. The best practice is: prefer maintained tools.\n"
    )
}

fn rule(kind: &str, contains: &[&str], responses: &[&str]) -> String {
    let contains: Vec<String> = contains.iter().map(|c| format!("'''{c}'''")).collect();
    let responses: Vec<String> = responses.iter().map(|r| format!("'''{r}'''")).collect();
    format!(
        "[[rule]]\nkind = \"{kind}\"\ncontains = [{}]\nresponses = [{}]\n\n",
        contains.join(", "),
        responses.join(", ")
    )
}

/// Rules under which every expanded candidate is accepted.
fn accepting_rules(conversion: &[&str]) -> String {
    let expansion = expansion(2);
    let unbiased = unbiased();
    [
        rule("expansion", &[], &[&expansion]),
        rule("text-to-prolog", &[], conversion),
        rule(
            "pairwise-bias-check",
            &[],
            &["Explanation: cue added.\nDecision: Yes, BOTH the two POINTS hold true."],
        ),
        rule("prolog-to-text", &[], &[&unbiased]),
        rule(
            "decision-system",
            &[],
            &["Explanation: maintained.\nDecision: Option A"],
        ),
    ]
    .concat()
}

fn handle(script: &str) -> (Arc<Gateway>, ModelHandle) {
    let gw = Arc::new(Gateway::new(
        Box::new(FakeBackend::new(FakeScript::parse(script).unwrap())),
        RetryPolicy::immediate(3),
        2,
    ));
    let m = ModelHandle::new(gw.clone(), "g");
    (gw, m)
}

fn seeds() -> SeedCorpus {
    SeedCorpus::load(&repo_root().join("data/seeds.v1")).unwrap()
}

fn pipeline<'a>(
    m: &ModelHandle,
    engine: &'a dyn PrologEngine,
    seeds: &'a SeedCorpus,
    cfg: CascadeConfig,
) -> Pipeline<'a> {
    Pipeline {
        generator: m.clone(),
        judge: m.clone(),
        embedder: m.clone(),
        engine,
        seeds,
        cfg,
        created_at: "2026-01-15T09:00:00Z".into(),
    }
}

fn small(target: u32) -> CascadeConfig {
    CascadeConfig {
        target_count: target,
        audit_runs: 2,
        judge_runs: 1,
        ..CascadeConfig::default()
    }
}

#[test]
fn conversion_is_retried_until_it_parses() {
    let good = bundle("extra_fact(x).");
    let (_, m) = handle(&accepting_rules(&[
        "not prolog",
        "## Axioms\n```\nx.\n```\n",
        &good,
    ]));
    let engine = MarkerEngine::default();
    let seeds = seeds();
    let p = pipeline(&m, &engine, &seeds, small(1));
    let (mut reg, mut ledger, mut log) =
        (Registry::default(), DiscardLedger::default(), Vec::new());
    let records = p
        .generate_benchmark(BiasLabel::Bandwagon, &mut reg, &mut ledger, &mut log)
        .unwrap();
    assert_eq!(records.len(), 1);
    let logic = records[0].trail.get(FilterId::LogicCorrectness).unwrap();
    assert_eq!(logic.metrics["attempts"], 3.0);
    assert_eq!(engine.calls.load(Ordering::SeqCst), 2);
    assert_eq!(reg.len(), 1);
    assert_eq!(ledger.get(BiasLabel::Bandwagon).unwrap().accepted, 1);
}

#[test]
fn exhausted_conversion_discards_at_logic_correctness() {
    let (_, m) = handle(&accepting_rules(&["still not prolog"]));
    let engine = MarkerEngine::default();
    let seeds = seeds();
    let p = pipeline(&m, &engine, &seeds, small(1));
    let batch = p
        .expand_batch(BiasLabel::Bandwagon, [&seeds.pairs[2], &seeds.pairs[3]], 0)
        .unwrap();
    let mut ledger = DiscardLedger::default();
    match p
        .run_cascade(&batch.candidates[0], &mut Registry::default(), &mut ledger)
        .unwrap()
    {
        CascadeOutcome::Discarded {
            filter,
            reason,
            trail,
        } => {
            assert_eq!(filter, FilterId::LogicCorrectness);
            assert!(reason.starts_with("conversion-exhausted"), "{reason}");
            assert_eq!(trail.first_failure(), Some(FilterId::LogicCorrectness));
        }
        other => panic!("expected a discard, got {other:?}"),
    }
    assert_eq!(engine.calls.load(Ordering::SeqCst), 0);
    assert!(ledger.is_conserved());
}

#[test]
fn program_errors_discard_and_engine_failures_abort() {
    let seeds = seeds();
    let engine = MarkerEngine::default();

    let broken = bundle("broken(.");
    let (_, m) = handle(&accepting_rules(&[&broken]));
    let p = pipeline(&m, &engine, &seeds, small(1));
    let batch = p
        .expand_batch(BiasLabel::Bandwagon, [&seeds.pairs[2], &seeds.pairs[3]], 0)
        .unwrap();
    match p
        .run_cascade(
            &batch.candidates[0],
            &mut Registry::default(),
            &mut DiscardLedger::default(),
        )
        .unwrap()
    {
        CascadeOutcome::Discarded { filter, reason, .. } => {
            assert_eq!(filter, FilterId::LogicCorrectness);
            assert_eq!(reason, "biased-syntax-error");
        }
        other => panic!("expected a discard, got {other:?}"),
    }

    let down = bundle("engine_down.");
    let (_, m) = handle(&accepting_rules(&[&down]));
    let p = pipeline(&m, &engine, &seeds, small(1));
    let err = p
        .generate_benchmark(
            BiasLabel::Bandwagon,
            &mut Registry::default(),
            &mut DiscardLedger::default(),
            &mut Vec::new(),
        )
        .unwrap_err();
    assert!(
        matches!(
            err,
            PipelineError::Engine(PrologError::EngineMissing { .. })
        ),
        "{err}"
    );
}

#[test]
fn step_mismatch_is_a_logic_discard() {
    let seeds = seeds();
    let engine = MarkerEngine::default();
    let (_, m) = handle(&accepting_rules(&[&bundle("extra_step.")]));
    let p = pipeline(&m, &engine, &seeds, small(1));
    let batch = p
        .expand_batch(BiasLabel::Bandwagon, [&seeds.pairs[2], &seeds.pairs[3]], 0)
        .unwrap();
    match p
        .run_cascade(
            &batch.candidates[0],
            &mut Registry::default(),
            &mut DiscardLedger::default(),
        )
        .unwrap()
    {
        CascadeOutcome::Discarded { filter, reason, .. } => {
            assert_eq!(filter, FilterId::LogicCorrectness);
            assert!(reason.starts_with("step-mismatch"), "{reason}");
        }
        other => panic!("expected a discard, got {other:?}"),
    }
}

#[test]
fn accepted_duplicates_collide_with_the_first() {
    let seeds = seeds();
    let engine = MarkerEngine::default();
    let (_, m) = handle(&accepting_rules(&[&bundle("x(1).")]));
    let p = pipeline(&m, &engine, &seeds, small(2));
    let mut ledger = DiscardLedger::default();
    let mut log = Vec::new();
    let err = p
        .generate_benchmark(
            BiasLabel::Bandwagon,
            &mut Registry::default(),
            &mut ledger,
            &mut log,
        )
        .unwrap_err();
    // every later copy collides, so the run stalls at one record
    assert!(
        matches!(
            err,
            PipelineError::Divergence {
                batches: 10,
                accepted: 1,
                ..
            }
        ),
        "{err}"
    );
    let l = ledger.get(BiasLabel::Bandwagon).unwrap();
    assert_eq!(l.candidates, 20);
    assert_eq!(l.accepted, 1);
    assert_eq!(l.discards_for(FilterId::InterDilemmaSimilarity), 19);
    assert!(ledger.is_conserved());
    assert_eq!(log[1].reason, "collides-with bandwagon-b000-c00");
}

#[test]
fn batch_cap_stops_generation() {
    let seeds = seeds();
    let engine = MarkerEngine::default();
    let (_, m) = handle(&accepting_rules(&[&bundle("x(1).")]));
    let cfg = CascadeConfig {
        max_batches: 2,
        ..small(3)
    };
    let p = pipeline(&m, &engine, &seeds, cfg);
    let err = p
        .generate_benchmark(
            BiasLabel::Bandwagon,
            &mut Registry::default(),
            &mut DiscardLedger::default(),
            &mut Vec::new(),
        )
        .unwrap_err();
    assert!(
        matches!(
            err,
            PipelineError::BatchCap {
                batches: 2,
                accepted: 1,
                target: 3,
                ..
            }
        ),
        "{err}"
    );
}

#[test]
fn template_rejections_are_counted_apart_from_candidates() {
    let seeds = seeds();
    let engine = MarkerEngine::default();
    let bad = format!(
        "{}## Unbiased Dilemma\n```\nno question here\n```\n## Biased Dilemma\n```\n{}\n```\n",
        expansion(1),
        biased()
    );
    let script = [
        rule("expansion", &[], &[&bad]),
        rule("text-to-prolog", &[], &[&bundle("x(1).")]),
        rule(
            "pairwise-bias-check",
            &[],
            &["Decision: Yes, BOTH the two POINTS hold true."],
        ),
        rule("prolog-to-text", &[], &[&unbiased()]),
        rule("decision-system", &[], &["Decision: Option A"]),
    ]
    .concat();
    let (_, m) = handle(&script);
    let p = pipeline(&m, &engine, &seeds, small(1));
    let mut ledger = DiscardLedger::default();
    p.generate_benchmark(
        BiasLabel::Bandwagon,
        &mut Registry::default(),
        &mut ledger,
        &mut Vec::new(),
    )
    .unwrap();
    let l = ledger.get(BiasLabel::Bandwagon).unwrap();
    assert_eq!((l.candidates, l.template_rejections, l.batches), (1, 1, 1));
}

#[test]
fn seeds_are_required() {
    let engine = MarkerEngine::default();
    let (_, m) = handle(&accepting_rules(&[&bundle("x(1).")]));
    let empty = SeedCorpus::default();
    let p = pipeline(&m, &engine, &empty, small(1));
    let err = p
        .generate_benchmark(
            BiasLabel::Bandwagon,
            &mut Registry::default(),
            &mut DiscardLedger::default(),
            &mut Vec::new(),
        )
        .unwrap_err();
    assert!(matches!(
        err,
        PipelineError::InsufficientSeeds { found: 0, .. }
    ));
}

#[test]
fn provider_failures_propagate_after_retries() {
    let seeds = seeds();
    let engine = MarkerEngine::default();
    let script =
        "[[rule]]\nkind = \"expansion\"\nresponses = [{ error = \"transient\", status = 503 }]\n";
    let (gw, m) = handle(script);
    let p = pipeline(&m, &engine, &seeds, small(1));
    let err = p
        .generate_benchmark(
            BiasLabel::Bandwagon,
            &mut Registry::default(),
            &mut DiscardLedger::default(),
            &mut Vec::new(),
        )
        .unwrap_err();
    assert!(matches!(err, PipelineError::Gateway(_)), "{err}");
    let calls = gw.calls();
    assert_eq!(calls.len(), 1);
    assert_eq!(calls[0].attempts, 3);
    assert!(!calls[0].ok);
}
