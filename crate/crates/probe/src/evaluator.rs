//! Decision collection and awareness judging over a benchmark dataset.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;

use probe_core::evaluation::{Answer, AwarenessEntry, DecisionEntry, DecisionLog};
use probe_core::grammar::{parse_explanation_decision, parse_judge_verdict};
use probe_core::{BenchmarkRecord, DilemmaText, ProfileLabel, PromptContext, PromptKind};

use crate::gateway::{GatewayError, ModelHandle};

#[derive(Debug, thiserror::Error)]
pub enum EvaluationError {
    #[error("empty dataset")]
    EmptyDataset,
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Prompt(#[from] probe_core::prompt::PromptError),
}

/// Applies `f` to every item on up to `workers` threads, keeping input
/// order. Stops handing out work after the first error.
fn par_map<T: Sync, R: Send>(
    items: &[T],
    workers: usize,
    f: impl Fn(&T) -> Result<R, EvaluationError> + Sync,
) -> Result<Vec<R>, EvaluationError> {
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<R>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    let failure: Mutex<Option<EvaluationError>> = Mutex::new(None);
    thread::scope(|s| {
        for _ in 0..workers.clamp(1, items.len().max(1)) {
            s.spawn(|| loop {
                if failure.lock().expect("failure lock").is_some() {
                    break;
                }
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(item) = items.get(i) else { break };
                match f(item) {
                    Ok(r) => slots.lock().expect("slot lock")[i] = Some(r),
                    Err(e) => {
                        failure.lock().expect("failure lock").get_or_insert(e);
                        break;
                    }
                }
            });
        }
    });
    if let Some(e) = failure.into_inner().expect("failure lock") {
        return Err(e);
    }
    Ok(slots
        .into_inner()
        .expect("slot lock")
        .into_iter()
        .map(|r| r.expect("every slot filled"))
        .collect())
}

fn decide(model: &ModelHandle, task: &DilemmaText) -> Result<Option<Answer>, EvaluationError> {
    let ctx = PromptContext::new().with("task", task.as_str());
    let reply = model.complete(PromptKind::DecisionSystem, &ctx)?;
    Ok(parse_explanation_decision(&reply)
        .ok()
        .map(|(explanation, decision)| Answer {
            decision,
            explanation,
        }))
}

/// One deterministic query per variant per record. Unparseable replies
/// become abstentions.
pub fn evaluate_model(
    model: &ModelHandle,
    dataset: &[BenchmarkRecord],
    workers: usize,
) -> Result<DecisionLog, EvaluationError> {
    if dataset.is_empty() {
        return Err(EvaluationError::EmptyDataset);
    }
    let entries = par_map(dataset, workers, |r| {
        Ok(DecisionEntry {
            record_id: r.pair.id.clone(),
            bias: r.pair.bias,
            unbiased: decide(model, &r.pair.unbiased)?,
            biased: decide(model, &r.pair.biased)?,
        })
    })?;
    Ok(DecisionLog {
        model: model.model().to_string(),
        profile: ProfileLabel::Deterministic,
        entries,
    })
}

/// Judges each answered biased variant `runs` times for an explicit
/// endorsement of the injected bias. Records are matched to the dataset by
/// id; entries without a biased answer are skipped.
pub fn assess_awareness(
    judge: &ModelHandle,
    log: &DecisionLog,
    dataset: &[BenchmarkRecord],
    runs: u32,
    workers: usize,
) -> Result<Vec<AwarenessEntry>, EvaluationError> {
    let jobs: Vec<(&DecisionEntry, &Answer, &BenchmarkRecord)> = log
        .entries
        .iter()
        .filter_map(|e| {
            let answer = e.biased.as_ref()?;
            let record = dataset.iter().find(|r| r.pair.id == e.record_id)?;
            Some((e, answer, record))
        })
        .collect();
    par_map(&jobs, workers, |(entry, answer, record)| {
        let ctx = PromptContext::new()
            .with("bias_label", entry.bias.prompt_label())
            .with("bias_definition", entry.bias.definition())
            .with("task", record.pair.biased.as_str())
            .with("decision", answer.decision.label())
            .with("explanation", answer.explanation.as_str());
        let phrase = PromptKind::AwarenessCheck
            .affirmative(&ctx)?
            .expect("awareness has an affirmative literal");
        let verdicts = (0..runs)
            .map(|_| {
                let reply = judge.complete(PromptKind::AwarenessCheck, &ctx)?;
                Ok(parse_judge_verdict(&reply, &phrase)
                    .ok()
                    .map(|v| v.positive))
            })
            .collect::<Result<Vec<_>, EvaluationError>>()?;
        Ok(AwarenessEntry {
            record_id: entry.record_id.clone(),
            bias: entry.bias,
            verdicts,
        })
    })
}
