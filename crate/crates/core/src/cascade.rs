//! Cascade parameters, voting, audit tallies and the discard ledger.

use alloc::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::bias::BiasLabel;
use crate::dilemma::OptionSide;
use crate::similarity::{COLLISION_TAU, ROUND_TRIP_TAU};
use crate::trail::FilterId;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CascadeConfig {
    /// Pairs requested per expansion call (k).
    pub batch_size: u32,
    /// Pairwise bias-check judge runs (m).
    pub judge_runs: u32,
    /// Deterministic audit runs (I).
    pub audit_runs: u32,
    pub vote_threshold: f64,
    pub round_trip_tau: f64,
    pub collision_tau: f64,
    /// Extra conversion attempts after a parse failure.
    pub conversion_retries: u32,
    /// Batches after which a bias with at most one acceptance is abandoned.
    pub divergence_attempts: u32,
    /// Accepted records wanted per bias (N).
    pub target_count: u32,
    /// Hard cap on expansion batches per bias.
    pub max_batches: u32,
    /// Also run the single-text bias identification check before the
    /// pairwise one.
    pub single_text_check: bool,
}

impl Default for CascadeConfig {
    fn default() -> Self {
        Self {
            batch_size: 5,
            judge_runs: 3,
            audit_runs: 5,
            vote_threshold: 0.8,
            round_trip_tau: ROUND_TRIP_TAU,
            collision_tau: COLLISION_TAU,
            conversion_retries: 2,
            divergence_attempts: 10,
            target_count: 5,
            max_batches: 200,
            single_text_check: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("bad-config: `{0}` must be at least 1")]
    ZeroCount(&'static str),
    #[error("bad-config: `{field}` = {value} is outside (0, 1]")]
    ThresholdOutOfRange { field: &'static str, value: f64 },
}

impl CascadeConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let counts = [
            ("batch_size", self.batch_size),
            ("judge_runs", self.judge_runs),
            ("audit_runs", self.audit_runs),
            ("divergence_attempts", self.divergence_attempts),
            ("target_count", self.target_count),
            ("max_batches", self.max_batches),
        ];
        if let Some((field, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(ConfigError::ZeroCount(field));
        }
        let thresholds = [
            ("vote_threshold", self.vote_threshold),
            ("round_trip_tau", self.round_trip_tau),
            ("collision_tau", self.collision_tau),
        ];
        for (field, value) in thresholds {
            if !(value > 0.0 && value <= 1.0) {
                return Err(ConfigError::ThresholdOutOfRange { field, value });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Vote {
    Accept,
    Reject,
}

/// Accept iff the share of positive verdicts reaches `threshold`. An empty
/// list rejects.
pub fn vote(verdicts: &[bool], threshold: f64) -> Vote {
    if verdicts.is_empty() {
        return Vote::Reject;
    }
    let yes = verdicts.iter().filter(|v| **v).count();
    if yes as f64 / verdicts.len() as f64 >= threshold {
        Vote::Accept
    } else {
        Vote::Reject
    }
}

/// Decisions collected over the audit runs; `None` is an unparseable reply.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct AuditTally {
    pub option_a: u32,
    pub option_b: u32,
    pub unparsed: u32,
}

impl AuditTally {
    pub fn from_decisions(decisions: &[Option<OptionSide>]) -> Self {
        let mut t = Self::default();
        for d in decisions {
            match d {
                Some(OptionSide::A) => t.option_a += 1,
                Some(OptionSide::B) => t.option_b += 1,
                None => t.unparsed += 1,
            }
        }
        t
    }

    pub fn runs(&self) -> u32 {
        self.option_a + self.option_b + self.unparsed
    }

    /// The strictly most frequent decision.
    pub fn mode(&self) -> Option<OptionSide> {
        match self.option_a.cmp(&self.option_b) {
            core::cmp::Ordering::Greater => Some(OptionSide::A),
            core::cmp::Ordering::Less => Some(OptionSide::B),
            core::cmp::Ordering::Equal => None,
        }
    }

    /// Share of runs that agree with the mode; unparseable runs count
    /// against it.
    pub fn agreement(&self) -> f64 {
        let runs = self.runs();
        if runs == 0 {
            return 0.0;
        }
        self.option_a.max(self.option_b) as f64 / runs as f64
    }

    pub fn judge(&self, oracle: OptionSide, threshold: f64) -> AuditOutcome {
        let agreement = self.agreement();
        let failure = match self.mode() {
            _ if agreement < threshold => Some(AuditFailure::LowAgreement),
            None => Some(AuditFailure::LowAgreement),
            Some(mode) if mode != oracle => Some(AuditFailure::OracleMismatch(mode)),
            Some(_) => None,
        };
        AuditOutcome { agreement, failure }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AuditFailure {
    LowAgreement,
    /// The model agreed with itself on the wrong option.
    OracleMismatch(OptionSide),
}

impl AuditFailure {
    pub fn reason(&self) -> &'static str {
        match self {
            AuditFailure::LowAgreement => "low-agreement",
            AuditFailure::OracleMismatch(_) => "oracle-mismatch",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuditOutcome {
    pub agreement: f64,
    pub failure: Option<AuditFailure>,
}

impl AuditOutcome {
    pub fn passed(&self) -> bool {
        self.failure.is_none()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BiasLedger {
    /// Candidates that entered the cascade.
    pub candidates: u64,
    pub accepted: u64,
    pub discards: BTreeMap<FilterId, u64>,
    /// Pairs dropped at parse time for breaking the dilemma template.
    pub template_rejections: u64,
    pub batches: u64,
}

impl BiasLedger {
    pub fn discarded(&self) -> u64 {
        self.discards.values().sum()
    }

    pub fn discards_for(&self, filter: FilterId) -> u64 {
        self.discards.get(&filter).copied().unwrap_or(0)
    }

    pub fn is_conserved(&self) -> bool {
        self.accepted + self.discarded() == self.candidates
    }
}

/// Per-bias, per-filter discard counts.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiscardLedger {
    pub biases: BTreeMap<BiasLabel, BiasLedger>,
}

impl DiscardLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn entry(&mut self, bias: BiasLabel) -> &mut BiasLedger {
        self.biases.entry(bias).or_default()
    }

    pub fn get(&self, bias: BiasLabel) -> Option<&BiasLedger> {
        self.biases.get(&bias)
    }

    pub fn record_batch(&mut self, bias: BiasLabel, template_rejections: u64) {
        let e = self.entry(bias);
        e.batches += 1;
        e.template_rejections += template_rejections;
    }

    pub fn record_accept(&mut self, bias: BiasLabel) {
        let e = self.entry(bias);
        e.candidates += 1;
        e.accepted += 1;
    }

    pub fn record_discard(&mut self, bias: BiasLabel, filter: FilterId) {
        let e = self.entry(bias);
        e.candidates += 1;
        *e.discards.entry(filter).or_default() += 1;
    }

    pub fn merge(&mut self, other: &DiscardLedger) {
        for (bias, l) in &other.biases {
            let e = self.entry(*bias);
            e.candidates += l.candidates;
            e.accepted += l.accepted;
            e.template_rejections += l.template_rejections;
            e.batches += l.batches;
            for (f, n) in &l.discards {
                *e.discards.entry(*f).or_default() += n;
            }
        }
    }

    pub fn total_discards(&self, filter: FilterId) -> u64 {
        self.biases.values().map(|l| l.discards_for(filter)).sum()
    }

    pub fn is_conserved(&self) -> bool {
        self.biases.values().all(BiasLedger::is_conserved)
    }
}
