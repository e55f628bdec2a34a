//! Line-delimited dataset and seed files. Every dataset line is a flat JSON
//! object tagged `"schema": "v1"`.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Mutex;

use probe_core::record::RecordError;
use probe_core::{
    BenchmarkRecord, BiasLabel, DilemmaPair, DilemmaText, ExecutionTrace, FilterOutcome,
    OptionSide, PrologBundle, ValidationTrail,
};
use serde::{Deserialize, Serialize};

pub const SCHEMA: &str = "v1";
pub const SEED_SCHEMA: &str = "seed.v1";

static WRITE_LOCK: Mutex<()> = Mutex::new(());

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("unwritable-path {path}: {source}")]
    Unwritable {
        path: String,
        source: std::io::Error,
    },
    #[error("cannot read {path}: {source}")]
    Unreadable {
        path: String,
        source: std::io::Error,
    },
    #[error("serialization-failure for record `{id}`: {reason}")]
    Serialization { id: String, reason: String },
    #[error("malformed-line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error("duplicate-id `{id}` on line {line}")]
    DuplicateId { id: String, line: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RecordLine {
    schema: String,
    id: String,
    bias: BiasLabel,
    generator_model: String,
    created_at: String,
    unbiased_text: DilemmaText,
    biased_text: DilemmaText,
    axioms: String,
    unbiased_program: String,
    biased_program: String,
    axioms_nl: String,
    unbiased_decision: OptionSide,
    unbiased_inference_steps: u64,
    unbiased_choice_steps: u64,
    biased_decision: OptionSide,
    biased_inference_steps: u64,
    biased_choice_steps: u64,
    intra_cosine: f64,
    intra_levenshtein: f64,
    round_trip_cosine: f64,
    trail: Vec<FilterOutcome>,
}

impl From<&BenchmarkRecord> for RecordLine {
    fn from(r: &BenchmarkRecord) -> Self {
        Self {
            schema: SCHEMA.into(),
            id: r.pair.id.clone(),
            bias: r.pair.bias,
            generator_model: r.pair.generator_model.clone(),
            created_at: r.pair.created_at.clone(),
            unbiased_text: r.pair.unbiased.clone(),
            biased_text: r.pair.biased.clone(),
            axioms: r.bundle.axioms.clone(),
            unbiased_program: r.bundle.unbiased_program.clone(),
            biased_program: r.bundle.biased_program.clone(),
            axioms_nl: r.bundle.axioms_nl.clone(),
            unbiased_decision: r.unbiased_trace.decision,
            unbiased_inference_steps: r.unbiased_trace.inference_steps,
            unbiased_choice_steps: r.unbiased_trace.choice_steps,
            biased_decision: r.biased_trace.decision,
            biased_inference_steps: r.biased_trace.inference_steps,
            biased_choice_steps: r.biased_trace.choice_steps,
            intra_cosine: r.intra_cosine,
            intra_levenshtein: r.intra_levenshtein,
            round_trip_cosine: r.round_trip_cosine,
            trail: r.trail.outcomes().to_vec(),
        }
    }
}

impl RecordLine {
    fn into_record(self) -> Result<BenchmarkRecord, String> {
        if self.schema != SCHEMA {
            return Err(format!("unsupported schema `{}`", self.schema));
        }
        let trail = ValidationTrail::try_from(self.trail).map_err(|e| e.to_string())?;
        let record = BenchmarkRecord {
            pair: DilemmaPair {
                id: self.id,
                bias: self.bias,
                unbiased: self.unbiased_text,
                biased: self.biased_text,
                generator_model: self.generator_model,
                created_at: self.created_at,
            },
            bundle: PrologBundle {
                axioms: self.axioms,
                unbiased_program: self.unbiased_program,
                biased_program: self.biased_program,
                axioms_nl: self.axioms_nl,
            },
            unbiased_trace: ExecutionTrace::new(
                self.unbiased_decision,
                self.unbiased_inference_steps,
                self.unbiased_choice_steps,
            ),
            biased_trace: ExecutionTrace::new(
                self.biased_decision,
                self.biased_inference_steps,
                self.biased_choice_steps,
            ),
            intra_cosine: self.intra_cosine,
            intra_levenshtein: self.intra_levenshtein,
            round_trip_cosine: self.round_trip_cosine,
            trail,
        };
        record
            .check_invariants()
            .map_err(|e: RecordError| e.to_string())?;
        Ok(record)
    }
}

/// Serializes one record as a dataset line, without the newline.
pub fn record_line(record: &BenchmarkRecord) -> Result<String, DatasetError> {
    let fail = |reason: String| DatasetError::Serialization {
        id: record.pair.id.clone(),
        reason,
    };
    record.check_invariants().map_err(|e| fail(e.to_string()))?;
    serde_json::to_string(&RecordLine::from(record)).map_err(|e| fail(e.to_string()))
}

/// Writes one record per line. Identical input yields identical bytes.
pub fn persist_dataset(records: &[BenchmarkRecord], path: &Path) -> Result<(), DatasetError> {
    let mut lines = Vec::with_capacity(records.len());
    let mut seen = HashSet::new();
    for (i, r) in records.iter().enumerate() {
        if !seen.insert(r.pair.id.as_str()) {
            return Err(DatasetError::DuplicateId {
                id: r.pair.id.clone(),
                line: i + 1,
            });
        }
        lines.push(record_line(r)?);
    }
    let unwritable = |source| DatasetError::Unwritable {
        path: path.display().to_string(),
        source,
    };
    let _guard = WRITE_LOCK.lock().unwrap_or_else(|p| p.into_inner());
    let mut out = BufWriter::new(File::create(path).map_err(unwritable)?);
    for line in &lines {
        writeln!(out, "{line}").map_err(unwritable)?;
    }
    out.flush().map_err(unwritable)
}

pub fn load_dataset(path: &Path) -> Result<Vec<BenchmarkRecord>, DatasetError> {
    let file = File::open(path).map_err(|source| DatasetError::Unreadable {
        path: path.display().to_string(),
        source,
    })?;
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let n = i + 1;
        let line = line.map_err(|e| DatasetError::MalformedLine {
            line: n,
            reason: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str::<RecordLine>(&line)
            .map_err(|e| e.to_string())
            .and_then(RecordLine::into_record)
            .map_err(|reason| DatasetError::MalformedLine { line: n, reason })?;
        if !seen.insert(record.pair.id.clone()) {
            return Err(DatasetError::DuplicateId {
                id: record.pair.id,
                line: n,
            });
        }
        records.push(record);
    }
    Ok(records)
}

/// A hand-written example pair used to prime expansion and conversion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedPair {
    pub schema: String,
    pub id: String,
    pub bias: BiasLabel,
    pub unbiased: DilemmaText,
    pub biased: DilemmaText,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bundle: Option<PrologBundle>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SeedCorpus {
    pub pairs: Vec<SeedPair>,
}

impl SeedCorpus {
    pub fn load(path: &Path) -> Result<Self, DatasetError> {
        let text = std::fs::read_to_string(path).map_err(|source| DatasetError::Unreadable {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, DatasetError> {
        let mut pairs = Vec::new();
        let mut seen = HashSet::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let malformed = |reason: String| DatasetError::MalformedLine {
                line: i + 1,
                reason,
            };
            let seed: SeedPair =
                serde_json::from_str(line).map_err(|e| malformed(e.to_string()))?;
            if seed.schema != SEED_SCHEMA {
                return Err(malformed(format!("unsupported schema `{}`", seed.schema)));
            }
            if !seen.insert(seed.id.clone()) {
                return Err(DatasetError::DuplicateId {
                    id: seed.id,
                    line: i + 1,
                });
            }
            pairs.push(seed);
        }
        Ok(Self { pairs })
    }

    pub fn for_bias(&self, bias: BiasLabel) -> Vec<&SeedPair> {
        self.pairs.iter().filter(|p| p.bias == bias).collect()
    }

    /// A seed carrying a Prolog bundle, preferring one of `bias`.
    pub fn bundle_example(&self, bias: BiasLabel) -> Option<(&SeedPair, &PrologBundle)> {
        let with_bundle = |p: &&SeedPair| p.bundle.is_some();
        self.pairs
            .iter()
            .filter(|p| p.bias == bias)
            .find(with_bundle)
            .or_else(|| self.pairs.iter().find(with_bundle))
            .map(|p| (p, p.bundle.as_ref().expect("filtered on bundle")))
    }
}
