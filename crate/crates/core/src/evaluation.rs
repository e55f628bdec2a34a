//! Sensitivity, complexity tiers, awareness aggregation and proxy
//! correlation over decision logs.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::bias::BiasLabel;
use crate::dilemma::OptionSide;
use crate::record::BenchmarkRecord;
use crate::sampling::ProfileLabel;
use crate::stats::{pearson_r, Correlation};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("empty-denominator: no answered records for {0}")]
    EmptyDenominator(BiasLabel),
    #[error("too-few-values: quartiles need at least 4 values, got {0}")]
    TooFewValues(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Answer {
    pub decision: OptionSide,
    pub explanation: String,
}

/// Both variants' answers for one record. `None` marks an unparseable reply.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionEntry {
    pub record_id: String,
    pub bias: BiasLabel,
    pub unbiased: Option<Answer>,
    pub biased: Option<Answer>,
}

impl DecisionEntry {
    pub fn abstained(&self) -> bool {
        self.unbiased.is_none() || self.biased.is_none()
    }

    /// Whether the two variants got different decisions; `None` on abstention.
    pub fn flipped(&self) -> Option<bool> {
        match (&self.unbiased, &self.biased) {
            (Some(u), Some(b)) => Some(u.decision != b.decision),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionLog {
    pub model: String,
    pub profile: ProfileLabel,
    pub entries: Vec<DecisionEntry>,
}

impl DecisionLog {
    pub fn biases(&self) -> Vec<BiasLabel> {
        let mut v: Vec<_> = self.entries.iter().map(|e| e.bias).collect();
        v.sort();
        v.dedup();
        v
    }
}

/// Flip count over answered records, plus the abstentions left out.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sensitivity {
    pub flips: u64,
    pub answered: u64,
    pub abstentions: u64,
}

impl Sensitivity {
    fn add(&mut self, e: &DecisionEntry) {
        match e.flipped() {
            Some(f) => {
                self.answered += 1;
                self.flips += u64::from(f);
            }
            None => self.abstentions += 1,
        }
    }

    pub fn rate(&self) -> Option<f64> {
        (self.answered > 0).then(|| self.flips as f64 / self.answered as f64)
    }
}

/// Counts for one bias; the error reports a bias with no answered record.
pub fn bias_counts(log: &DecisionLog, bias: BiasLabel) -> Result<Sensitivity, EvalError> {
    let mut s = Sensitivity::default();
    for e in log.entries.iter().filter(|e| e.bias == bias) {
        s.add(e);
    }
    if s.answered == 0 {
        return Err(EvalError::EmptyDenominator(bias));
    }
    Ok(s)
}

/// Share of answered records of `bias` whose decision flips.
pub fn bias_sensitivity(log: &DecisionLog, bias: BiasLabel) -> Result<f64, EvalError> {
    let s = bias_counts(log, bias)?;
    Ok(s.flips as f64 / s.answered as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TierBoundaries {
    pub q1: u64,
    pub q2: u64,
    pub q3: u64,
}

/// Nearest-rank quartiles: the value at 1-based rank `ceil(k * n / 4)`.
pub fn complexity_quartiles(steps: &[u64]) -> Result<TierBoundaries, EvalError> {
    let n = steps.len();
    if n < 4 {
        return Err(EvalError::TooFewValues(n));
    }
    let mut sorted = steps.to_vec();
    sorted.sort_unstable();
    let at = |k: usize| sorted[(k * n).div_ceil(4) - 1];
    Ok(TierBoundaries {
        q1: at(1),
        q2: at(2),
        q3: at(3),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Tier {
    Low,
    MidLow,
    MidHigh,
    High,
}

impl Tier {
    pub const ALL: [Tier; 4] = [Tier::Low, Tier::MidLow, Tier::MidHigh, Tier::High];

    pub fn slug(self) -> &'static str {
        match self {
            Tier::Low => "low",
            Tier::MidLow => "mid-low",
            Tier::MidHigh => "mid-high",
            Tier::High => "high",
        }
    }
}

impl fmt::Display for Tier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.slug())
    }
}

/// Upper bounds are inclusive.
pub fn assign_tier(s: u64, b: &TierBoundaries) -> Tier {
    if s <= b.q1 {
        Tier::Low
    } else if s <= b.q2 {
        Tier::MidLow
    } else if s <= b.q3 {
        Tier::MidHigh
    } else {
        Tier::High
    }
}

/// Sensitivity per (bias, tier); cells without any entry are absent.
/// Entries whose record is not in the dataset are skipped.
pub fn tiered_sensitivity(
    log: &DecisionLog,
    dataset: &[BenchmarkRecord],
    b: &TierBoundaries,
) -> BTreeMap<(BiasLabel, Tier), Sensitivity> {
    let steps: BTreeMap<&str, u64> = dataset
        .iter()
        .map(|r| (r.id(), r.unbiased_trace.inference_steps))
        .collect();
    let mut out: BTreeMap<(BiasLabel, Tier), Sensitivity> = BTreeMap::new();
    for e in &log.entries {
        if let Some(&s) = steps.get(e.record_id.as_str()) {
            out.entry((e.bias, assign_tier(s, b))).or_default().add(e);
        }
    }
    out
}

/// Strict majority of the parsed verdicts; `None` when nothing parsed.
pub fn majority_aware(verdicts: &[Option<bool>]) -> Option<bool> {
    let parsed: Vec<bool> = verdicts.iter().flatten().copied().collect();
    if parsed.is_empty() {
        return None;
    }
    let yes = parsed.iter().filter(|v| **v).count();
    Some(2 * yes > parsed.len())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AwarenessEntry {
    pub record_id: String,
    pub bias: BiasLabel,
    pub verdicts: Vec<Option<bool>>,
}

impl AwarenessEntry {
    pub fn aware(&self) -> Option<bool> {
        majority_aware(&self.verdicts)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AwarenessSummary {
    pub aware: u64,
    pub assessed: u64,
    /// Records whose judge replies were all unparseable.
    pub excluded: u64,
}

impl AwarenessSummary {
    pub fn rate(&self) -> Option<f64> {
        (self.assessed > 0).then(|| self.aware as f64 / self.assessed as f64)
    }
}

pub fn awareness_by_bias(entries: &[AwarenessEntry]) -> BTreeMap<BiasLabel, AwarenessSummary> {
    let mut out: BTreeMap<BiasLabel, AwarenessSummary> = BTreeMap::new();
    for e in entries {
        let s = out.entry(e.bias).or_default();
        match e.aware() {
            Some(a) => {
                s.assessed += 1;
                s.aware += u64::from(a);
            }
            None => s.excluded += 1,
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Proxy {
    IntraCosine,
    IntraLevenshtein,
    AuditAgreement,
    RoundTripCosine,
}

impl Proxy {
    pub const ALL: [Proxy; 4] = [
        Proxy::IntraCosine,
        Proxy::IntraLevenshtein,
        Proxy::AuditAgreement,
        Proxy::RoundTripCosine,
    ];

    pub fn slug(self) -> &'static str {
        match self {
            Proxy::IntraCosine => "intra-cosine",
            Proxy::IntraLevenshtein => "intra-levenshtein",
            Proxy::AuditAgreement => "audit-agreement",
            Proxy::RoundTripCosine => "round-trip-cosine",
        }
    }

    pub fn value(self, r: &BenchmarkRecord) -> Option<f64> {
        match self {
            Proxy::IntraCosine => Some(r.intra_cosine),
            Proxy::IntraLevenshtein => Some(r.intra_levenshtein),
            Proxy::AuditAgreement => r.audit_agreement(),
            Proxy::RoundTripCosine => Some(r.round_trip_cosine),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProxyCorrelation {
    pub proxy: Proxy,
    pub n: usize,
    /// Absent when either series is constant or too short.
    pub correlation: Option<Correlation>,
}

/// Pearson correlation of each proxy with the per-record flip indicator,
/// pooled over every answered (log, record) pair.
pub fn correlate_proxies(
    logs: &[DecisionLog],
    dataset: &[BenchmarkRecord],
) -> Vec<ProxyCorrelation> {
    let by_id: BTreeMap<&str, &BenchmarkRecord> = dataset.iter().map(|r| (r.id(), r)).collect();
    Proxy::ALL
        .iter()
        .map(|&proxy| {
            let mut xs = Vec::new();
            let mut flips = Vec::new();
            for e in logs.iter().flat_map(|l| &l.entries) {
                let (Some(f), Some(r)) = (e.flipped(), by_id.get(e.record_id.as_str())) else {
                    continue;
                };
                if let Some(x) = proxy.value(r) {
                    xs.push(x);
                    flips.push(if f { 1.0 } else { 0.0 });
                }
            }
            ProxyCorrelation {
                proxy,
                n: xs.len(),
                correlation: pearson_r(&xs, &flips).ok(),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::{format, vec};

    fn entry(
        i: usize,
        bias: BiasLabel,
        u: Option<OptionSide>,
        b: Option<OptionSide>,
    ) -> DecisionEntry {
        let answer = |d: Option<OptionSide>| {
            d.map(|decision| Answer {
                decision,
                explanation: String::new(),
            })
        };
        DecisionEntry {
            record_id: format!("r{i}"),
            bias,
            unbiased: answer(u),
            biased: answer(b),
        }
    }

    fn log(entries: Vec<DecisionEntry>) -> DecisionLog {
        DecisionLog {
            model: "m".into(),
            profile: ProfileLabel::Deterministic,
            entries,
        }
    }

    use OptionSide::{A, B};

    #[test]
    fn sensitivity_examples() {
        let l = log((0..300)
            .map(|i| entry(i, BiasLabel::Anchoring, Some(A), Some(A)))
            .collect());
        assert_eq!(bias_sensitivity(&l, BiasLabel::Anchoring), Ok(0.0));
        assert_eq!(
            bias_sensitivity(&l, BiasLabel::Framing),
            Err(EvalError::EmptyDenominator(BiasLabel::Framing))
        );
        let l = log((0..10)
            .map(|i| entry(i, BiasLabel::Framing, Some(A), Some(B)))
            .collect());
        assert_eq!(bias_sensitivity(&l, BiasLabel::Framing), Ok(1.0));
        let l = log(vec![
            entry(0, BiasLabel::Framing, Some(A), Some(B)),
            entry(1, BiasLabel::Framing, None, Some(B)),
            entry(2, BiasLabel::Framing, Some(A), Some(A)),
        ]);
        let s = bias_counts(&l, BiasLabel::Framing).unwrap();
        assert_eq!((s.flips, s.answered, s.abstentions), (1, 2, 1));
    }

    #[test]
    fn quartile_examples() {
        let q = complexity_quartiles(&[7; 4]).unwrap();
        assert_eq!((q.q1, q.q2, q.q3), (7, 7, 7));
        let q = complexity_quartiles(&[15, 2, 4, 11, 4, 5, 9, 7]).unwrap();
        assert_eq!((q.q1, q.q2, q.q3), (4, 5, 9));
        assert_eq!(
            complexity_quartiles(&[1, 2, 3]),
            Err(EvalError::TooFewValues(3))
        );
    }

    #[test]
    fn tier_examples() {
        let b = TierBoundaries {
            q1: 4,
            q2: 7,
            q3: 11,
        };
        assert_eq!(assign_tier(0, &b), Tier::Low);
        assert_eq!(assign_tier(4, &b), Tier::Low);
        assert_eq!(assign_tier(5, &b), Tier::MidLow);
        assert_eq!(assign_tier(7, &b), Tier::MidLow);
        assert_eq!(assign_tier(11, &b), Tier::MidHigh);
        assert_eq!(assign_tier(12, &b), Tier::High);
    }

    #[test]
    fn awareness_majority() {
        assert_eq!(majority_aware(&[Some(true); 5]), Some(true));
        assert_eq!(majority_aware(&[Some(false); 5]), Some(false));
        let three = [Some(true), Some(true), Some(true), Some(false), Some(false)];
        assert_eq!(majority_aware(&three), Some(true));
        let two = [
            Some(true),
            Some(true),
            Some(false),
            Some(false),
            Some(false),
        ];
        assert_eq!(majority_aware(&two), Some(false));
        assert_eq!(
            majority_aware(&[Some(true), Some(false), None, None, None]),
            Some(false)
        );
        assert_eq!(majority_aware(&[None; 5]), None);
    }
}
