//! The eight cognitive-bias families probed by the benchmark.

use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

/// One of the eight bias labels. Serialized by its kebab-case slug.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BiasLabel {
    Anchoring,
    Bandwagon,
    Framing,
    Availability,
    Hindsight,
    Confirmation,
    HyperbolicDiscounting,
    Overconfidence,
}

impl BiasLabel {
    pub const ALL: [BiasLabel; 8] = [
        BiasLabel::Anchoring,
        BiasLabel::Bandwagon,
        BiasLabel::Framing,
        BiasLabel::Availability,
        BiasLabel::Hindsight,
        BiasLabel::Confirmation,
        BiasLabel::HyperbolicDiscounting,
        BiasLabel::Overconfidence,
    ];

    /// Stable identifier used in files and on the command line.
    pub fn slug(self) -> &'static str {
        match self {
            BiasLabel::Anchoring => "anchoring",
            BiasLabel::Bandwagon => "bandwagon",
            BiasLabel::Framing => "framing",
            BiasLabel::Availability => "availability",
            BiasLabel::Hindsight => "hindsight",
            BiasLabel::Confirmation => "confirmation",
            BiasLabel::HyperbolicDiscounting => "hyperbolic-discounting",
            BiasLabel::Overconfidence => "overconfidence",
        }
    }

    /// Human-readable name, as in the definitions table.
    pub fn name(self) -> &'static str {
        match self {
            BiasLabel::Anchoring => "Anchoring bias",
            BiasLabel::Bandwagon => "Bandwagon effect",
            BiasLabel::Framing => "Framing effect",
            BiasLabel::Availability => "Availability bias",
            BiasLabel::Hindsight => "Hindsight bias",
            BiasLabel::Confirmation => "Confirmation bias",
            BiasLabel::HyperbolicDiscounting => "Hyperbolic discounting",
            BiasLabel::Overconfidence => "Overconfidence bias",
        }
    }

    /// Label substituted for `{bias_label}` in prompts ("framing effect").
    pub fn prompt_label(self) -> &'static str {
        match self {
            BiasLabel::Anchoring => "anchoring bias",
            BiasLabel::Bandwagon => "bandwagon effect",
            BiasLabel::Framing => "framing effect",
            BiasLabel::Availability => "availability bias",
            BiasLabel::Hindsight => "hindsight bias",
            BiasLabel::Confirmation => "confirmation bias",
            BiasLabel::HyperbolicDiscounting => "hyperbolic discounting",
            BiasLabel::Overconfidence => "overconfidence bias",
        }
    }

    /// Definition substituted for `{bias_definition}`.
    pub fn definition(self) -> &'static str {
        match self {
            BiasLabel::Anchoring => "Relying too heavily on the first piece of information encountered (the \u{201c}anchor\u{201d}) when making decisions or estimates.",
            BiasLabel::Bandwagon => "Adopting behaviors, styles, or attitudes simply because others are doing so, often to conform or belong.",
            BiasLabel::Framing => "Having decisions influenced by how information is presented (e.g., in terms of gains or losses) rather than the content itself.",
            BiasLabel::Availability => "Overestimating the likelihood of events that come easily to mind, often because they are recent, vivid, or emotionally charged.",
            BiasLabel::Hindsight => "After an event, believing the outcome was predictable or inevitable, even if it wasn\u{2019}t.",
            BiasLabel::Confirmation => "Seeking, interpreting, and remembering information in ways that confirm preexisting beliefs, while giving less weight to alternatives.",
            BiasLabel::HyperbolicDiscounting => "Preferring immediate, short-term benefits over larger, long-term advantages.",
            BiasLabel::Overconfidence => "Having subjective confidence in judgments or abilities that exceeds actual accuracy or performance.",
        }
    }
}

impl fmt::Display for BiasLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.slug())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown bias label `{0}`")]
pub struct UnknownBias(pub alloc::string::String);

impl FromStr for BiasLabel {
    type Err = UnknownBias;

    /// Accepts the slug, the table name, or the prompt label, ignoring case
    /// and treating `_`, `-` and spaces alike.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let wanted = normalize(s);
        BiasLabel::ALL
            .into_iter()
            .find(|b| {
                normalize(b.slug()) == wanted
                    || normalize(b.name()) == wanted
                    || normalize(b.prompt_label()) == wanted
            })
            .ok_or_else(|| UnknownBias(s.into()))
    }
}

fn normalize(s: &str) -> alloc::string::String {
    s.trim()
        .chars()
        .map(|c| match c {
            '_' | ' ' => '-',
            c => c.to_ascii_lowercase(),
        })
        .collect()
}
