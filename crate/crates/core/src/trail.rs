//! Cascade filter taxonomy and per-candidate validation trails.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

/// The six cascade filters, declared in the order the cascade applies them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FilterId {
    IntraDilemmaSimilarity,
    LogicCorrectness,
    BiasPresence,
    PrologTextAlignment,
    OutputMatching,
    InterDilemmaSimilarity,
}

impl FilterId {
    /// Cascade order.
    pub const PROTOCOL_ORDER: [FilterId; 6] = [
        FilterId::IntraDilemmaSimilarity,
        FilterId::LogicCorrectness,
        FilterId::BiasPresence,
        FilterId::PrologTextAlignment,
        FilterId::OutputMatching,
        FilterId::InterDilemmaSimilarity,
    ];

    /// Row order of the filter-level discard table.
    pub const TABLE_ORDER: [FilterId; 6] = [
        FilterId::LogicCorrectness,
        FilterId::IntraDilemmaSimilarity,
        FilterId::PrologTextAlignment,
        FilterId::OutputMatching,
        FilterId::BiasPresence,
        FilterId::InterDilemmaSimilarity,
    ];

    pub fn slug(self) -> &'static str {
        match self {
            FilterId::IntraDilemmaSimilarity => "intra-dilemma-similarity",
            FilterId::LogicCorrectness => "logic-correctness",
            FilterId::BiasPresence => "bias-presence",
            FilterId::PrologTextAlignment => "prolog-text-alignment",
            FilterId::OutputMatching => "output-matching",
            FilterId::InterDilemmaSimilarity => "inter-dilemma-similarity",
        }
    }

    /// Display name used in discard tables.
    pub fn display_name(self) -> &'static str {
        match self {
            FilterId::IntraDilemmaSimilarity => "Intra-dilemma similarity",
            FilterId::LogicCorrectness => "Logic correctness",
            FilterId::BiasPresence => "Bias presence",
            FilterId::PrologTextAlignment => "Prolog-text alignment",
            FilterId::OutputMatching => "Output matching",
            FilterId::InterDilemmaSimilarity => "Inter-dilemma similarity",
        }
    }

    pub fn position(self) -> usize {
        FilterId::PROTOCOL_ORDER
            .iter()
            .position(|f| *f == self)
            .expect("every filter is in the protocol order")
    }
}

impl fmt::Display for FilterId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.slug())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown filter `{0}`")]
pub struct UnknownFilter(pub String);

impl FromStr for FilterId {
    type Err = UnknownFilter;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FilterId::PROTOCOL_ORDER
            .into_iter()
            .find(|f| f.slug() == s || f.display_name().eq_ignore_ascii_case(s))
            .ok_or_else(|| UnknownFilter(s.into()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterOutcome {
    pub filter: FilterId,
    pub passed: bool,
    #[serde(default)]
    pub metrics: BTreeMap<String, f64>,
}

impl FilterOutcome {
    pub fn new(filter: FilterId, passed: bool) -> Self {
        Self {
            filter,
            passed,
            metrics: BTreeMap::new(),
        }
    }

    pub fn metric(mut self, key: &str, value: f64) -> Self {
        self.metrics.insert(key.into(), value);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TrailError {
    #[error("filter {next} cannot follow {previous}")]
    OutOfOrder { previous: FilterId, next: FilterId },
    #[error("trail already ended at failed filter {0}")]
    AfterFailure(FilterId),
}

/// Ordered filter outcomes: a prefix of the protocol order that stops at
/// the first failure.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<FilterOutcome>", into = "Vec<FilterOutcome>")]
pub struct ValidationTrail {
    outcomes: Vec<FilterOutcome>,
}

impl ValidationTrail {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, outcome: FilterOutcome) -> Result<(), TrailError> {
        if let Some(last) = self.outcomes.last() {
            if !last.passed {
                return Err(TrailError::AfterFailure(last.filter));
            }
            if outcome.filter.position() <= last.filter.position() {
                return Err(TrailError::OutOfOrder {
                    previous: last.filter,
                    next: outcome.filter,
                });
            }
        }
        self.outcomes.push(outcome);
        Ok(())
    }

    pub fn outcomes(&self) -> &[FilterOutcome] {
        &self.outcomes
    }

    pub fn get(&self, filter: FilterId) -> Option<&FilterOutcome> {
        self.outcomes.iter().find(|o| o.filter == filter)
    }

    pub fn first_failure(&self) -> Option<FilterId> {
        self.outcomes.iter().find(|o| !o.passed).map(|o| o.filter)
    }

    /// Every filter present, in order, and passed.
    pub fn is_accepted(&self) -> bool {
        self.outcomes.len() == FilterId::PROTOCOL_ORDER.len()
            && self
                .outcomes
                .iter()
                .zip(FilterId::PROTOCOL_ORDER)
                .all(|(o, f)| o.filter == f && o.passed)
    }
}

impl TryFrom<Vec<FilterOutcome>> for ValidationTrail {
    type Error = TrailError;

    fn try_from(outcomes: Vec<FilterOutcome>) -> Result<Self, Self::Error> {
        let mut trail = ValidationTrail::new();
        for o in outcomes {
            trail.push(o)?;
        }
        Ok(trail)
    }
}

impl From<ValidationTrail> for Vec<FilterOutcome> {
    fn from(t: ValidationTrail) -> Self {
        t.outcomes
    }
}
