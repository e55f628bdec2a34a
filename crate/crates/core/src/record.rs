use serde::{Deserialize, Serialize};

use crate::dilemma::DilemmaPair;
use crate::prolog::{verify_pair_equivalence, EquivalenceFailure, ExecutionTrace, PrologBundle};
use crate::similarity::SimilarityBand;
use crate::trail::{FilterId, ValidationTrail};

/// Trail metric key holding the audit agreement rate.
pub const AUDIT_AGREEMENT: &str = "agreement";

/// An accepted dilemma pair with its oracle and the evidence that admitted it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRecord {
    pub pair: DilemmaPair,
    pub bundle: PrologBundle,
    pub unbiased_trace: ExecutionTrace,
    pub biased_trace: ExecutionTrace,
    pub intra_cosine: f64,
    pub intra_levenshtein: f64,
    pub round_trip_cosine: f64,
    pub trail: ValidationTrail,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RecordError {
    #[error(transparent)]
    Equivalence(#[from] EquivalenceFailure),
    #[error("intra cosine {0} is outside the acceptance band")]
    IntraOutOfBand(f64),
    #[error("intra levenshtein {0} is outside [0, 1]")]
    LevenshteinOutOfRange(f64),
    #[error("round-trip cosine {value} does not exceed {tau}")]
    RoundTripBelowTau { value: f64, tau: f64 },
    #[error("trail is not fully accepted (first failure: {0:?})")]
    IncompleteTrail(Option<FilterId>),
}

impl BenchmarkRecord {
    pub fn id(&self) -> &str {
        &self.pair.id
    }

    /// The decision certified by the Prolog oracle.
    pub fn oracle(&self) -> crate::dilemma::OptionSide {
        self.unbiased_trace.decision
    }

    /// Oracle equivalence, band membership, metric ranges and a fully
    /// passed trail.
    pub fn check_invariants(&self) -> Result<(), RecordError> {
        verify_pair_equivalence(&self.unbiased_trace, &self.biased_trace)?;
        if !SimilarityBand::intra(self.pair.bias).contains(self.intra_cosine) {
            return Err(RecordError::IntraOutOfBand(self.intra_cosine));
        }
        if !(0.0..=1.0).contains(&self.intra_levenshtein) {
            return Err(RecordError::LevenshteinOutOfRange(self.intra_levenshtein));
        }
        if !self.trail.is_accepted() {
            return Err(RecordError::IncompleteTrail(self.trail.first_failure()));
        }
        Ok(())
    }

    /// The invariants plus round-trip similarity above `round_trip_tau`.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn check(&self, round_trip_tau: f64) -> Result<(), RecordError> {
        self.check_invariants()?;
        if !(self.round_trip_cosine > round_trip_tau) {
            return Err(RecordError::RoundTripBelowTau {
                value: self.round_trip_cosine,
                tau: round_trip_tau,
            });
        }
        Ok(())
    }

    pub fn audit_agreement(&self) -> Option<f64> {
        self.trail
            .get(FilterId::OutputMatching)
            .and_then(|o| o.metrics.get(AUDIT_AGREEMENT).copied())
    }
}
