use core::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProfileLabel {
    Deterministic,
    Creative,
}

impl fmt::Display for ProfileLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProfileLabel::Deterministic => "deterministic",
            ProfileLabel::Creative => "creative",
        })
    }
}

/// Sampling parameters sent with a chat request.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingProfile {
    pub label: ProfileLabel,
    pub temperature: f64,
    pub top_p: f64,
}

impl SamplingProfile {
    /// Temperature and top-p at 0, for judging and decision collection.
    pub const DETERMINISTIC: SamplingProfile = SamplingProfile {
        label: ProfileLabel::Deterministic,
        temperature: 0.0,
        top_p: 0.0,
    };

    /// Temperature and top-p at 1, for expansion.
    pub const CREATIVE: SamplingProfile = SamplingProfile {
        label: ProfileLabel::Creative,
        temperature: 1.0,
        top_p: 1.0,
    };

    pub fn for_label(label: ProfileLabel) -> Self {
        match label {
            ProfileLabel::Deterministic => Self::DETERMINISTIC,
            ProfileLabel::Creative => Self::CREATIVE,
        }
    }
}
