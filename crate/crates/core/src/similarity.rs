//! Embedding and edit-distance metrics, and the threshold predicates the
//! cascade applies to them.

use alloc::vec;
use alloc::vec::Vec;

use crate::bias::BiasLabel;

/// Upper bound (exclusive) of the intra-pair cosine band.
pub const INTRA_UPPER: f64 = 0.99;
/// Lower bound (inclusive) of the intra-pair band for most biases.
pub const INTRA_LOWER: f64 = 0.90;
/// Framing edits are larger, so its band starts lower.
pub const INTRA_LOWER_FRAMING: f64 = 0.85;
/// Round-trip reconstruction must score strictly above this.
pub const ROUND_TRIP_TAU: f64 = 0.65;
/// Candidates scoring strictly above this against an accepted dilemma collide.
pub const COLLISION_TAU: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum SimilarityError {
    #[error("dimension-mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("zero-vector: cosine is undefined for an all-zero vector")]
    ZeroVector,
    #[error("invalid band [{lower}, {upper})")]
    InvalidBand { lower: f64, upper: f64 },
}

/// `dot(u, v) / (|u| |v|)`, clamped to [-1, 1].
pub fn cosine_similarity(u: &[f64], v: &[f64]) -> Result<f64, SimilarityError> {
    if u.len() != v.len() {
        return Err(SimilarityError::DimensionMismatch {
            left: u.len(),
            right: v.len(),
        });
    }
    let (mut dot, mut nu, mut nv) = (0.0, 0.0, 0.0);
    for (a, b) in u.iter().zip(v) {
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    if nu == 0.0 || nv == 0.0 {
        return Err(SimilarityError::ZeroVector);
    }
    Ok((dot / (libm::sqrt(nu) * libm::sqrt(nv))).clamp(-1.0, 1.0))
}

/// Character-level edit distance with unit insert/delete/substitute costs.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        core::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Edit distance divided by the longer length in characters; 0 for two
/// empty strings.
pub fn normalized_levenshtein(a: &str, b: &str) -> f64 {
    let longest = a.chars().count().max(b.chars().count());
    if longest == 0 {
        return 0.0;
    }
    levenshtein(a, b) as f64 / longest as f64
}

/// Half-open interval `[lower, upper)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimilarityBand {
    lower: f64,
    upper: f64,
}

impl SimilarityBand {
    pub fn new(lower: f64, upper: f64) -> Result<Self, SimilarityError> {
        if !(0.0..upper).contains(&lower) || upper > 1.0 {
            return Err(SimilarityError::InvalidBand { lower, upper });
        }
        Ok(Self { lower, upper })
    }

    /// The intra-pair band for a bias.
    pub fn intra(bias: BiasLabel) -> Self {
        let lower = match bias {
            BiasLabel::Framing => INTRA_LOWER_FRAMING,
            _ => INTRA_LOWER,
        };
        Self {
            lower,
            upper: INTRA_UPPER,
        }
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn contains(&self, sim: f64) -> bool {
        self.lower <= sim && sim < self.upper
    }
}

/// Biased text must stay close to, but not identical with, the unbiased one.
pub fn check_intra_band(sim: f64, bias: BiasLabel) -> bool {
    SimilarityBand::intra(bias).contains(sim)
}

/// Reconstruction from the program must exceed `tau`.
pub fn check_round_trip(sim: f64, tau: f64) -> bool {
    sim > tau
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Collision {
    Clear {
        /// Highest similarity seen, if the registry was non-empty.
        max_similarity: Option<f64>,
    },
    Hit {
        index: usize,
        similarity: f64,
    },
}

impl Collision {
    pub fn is_clear(&self) -> bool {
        matches!(self, Collision::Clear { .. })
    }
}

/// Reports the first registry entry whose cosine with the candidate is
/// strictly above `tau_inter`.
pub fn check_collision<V: AsRef<[f64]>>(
    candidate: &[f64],
    registry: &[V],
    tau_inter: f64,
) -> Result<Collision, SimilarityError> {
    let mut max: Option<f64> = None;
    for (index, entry) in registry.iter().enumerate() {
        let sim = cosine_similarity(candidate, entry.as_ref())?;
        if sim > tau_inter {
            return Ok(Collision::Hit {
                index,
                similarity: sim,
            });
        }
        max = Some(max.map_or(sim, |m: f64| m.max(sim)));
    }
    Ok(Collision::Clear {
        max_similarity: max,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cosine_examples() {
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[1.0, 0.0]).unwrap(), 1.0);
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        // 32 / (sqrt(14) * sqrt(77))
        let c = cosine_similarity(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap();
        assert!((c - 0.974_631_846_197_076_2).abs() < 1e-12);
    }

    #[test]
    fn cosine_errors() {
        assert_eq!(
            cosine_similarity(&[1.0], &[1.0, 2.0]),
            Err(SimilarityError::DimensionMismatch { left: 1, right: 2 })
        );
        assert_eq!(
            cosine_similarity(&[0.0, 0.0], &[1.0, 2.0]),
            Err(SimilarityError::ZeroVector)
        );
    }

    #[test]
    fn levenshtein_examples() {
        assert_eq!(normalized_levenshtein("abc", "abc"), 0.0);
        assert_eq!(normalized_levenshtein("", "abc"), 1.0);
        assert_eq!(normalized_levenshtein("", ""), 0.0);
        assert_eq!(levenshtein("kitten", "sitting"), 3);
        assert!((normalized_levenshtein("kitten", "sitting") - 3.0 / 7.0).abs() < 1e-15);
        // characters, not bytes
        assert_eq!(levenshtein("caf\u{e9}", "cafe"), 1);
    }

    #[test]
    fn intra_band_examples() {
        assert!(check_intra_band(0.95, BiasLabel::Anchoring));
        assert!(!check_intra_band(0.99, BiasLabel::Anchoring));
        assert!(check_intra_band(0.87, BiasLabel::Framing));
        assert!(!check_intra_band(0.87, BiasLabel::Anchoring));
        assert!(check_intra_band(0.90, BiasLabel::Hindsight));
        assert!(check_intra_band(0.85, BiasLabel::Framing));
    }

    #[test]
    fn round_trip_examples() {
        assert!(check_round_trip(0.70, ROUND_TRIP_TAU));
        assert!(!check_round_trip(0.64, ROUND_TRIP_TAU));
        assert!(!check_round_trip(0.65, ROUND_TRIP_TAU));
        assert!(check_round_trip(1.0, ROUND_TRIP_TAU));
    }

    #[test]
    fn collision_examples() {
        let empty: [Vec<f64>; 0] = [];
        assert_eq!(
            check_collision(&[1.0, 0.0], &empty, COLLISION_TAU).unwrap(),
            Collision::Clear {
                max_similarity: None
            }
        );
        // cos = 0.95 against the second entry
        let near = [0.95, libm::sqrt(1.0 - 0.95 * 0.95)];
        let reg = [vec![0.0, 1.0], near.to_vec()];
        match check_collision(&[1.0, 0.0], &reg, COLLISION_TAU).unwrap() {
            Collision::Hit { index, similarity } => {
                assert_eq!(index, 1);
                assert!((similarity - 0.95).abs() < 1e-12);
            }
            other => panic!("expected a hit, got {other:?}"),
        }
        let far = [0.89, libm::sqrt(1.0 - 0.89 * 0.89)];
        assert!(check_collision(&[1.0, 0.0], &[far.to_vec()], COLLISION_TAU)
            .unwrap()
            .is_clear());
        assert!(check_collision(&[1.0, 0.0], &[vec![1.0]], COLLISION_TAU).is_err());
    }

    #[test]
    fn band_validation() {
        assert!(SimilarityBand::new(0.5, 0.4).is_err());
        assert!(SimilarityBand::new(-0.1, 0.4).is_err());
        assert!(SimilarityBand::new(0.1, 1.1).is_err());
        assert!(SimilarityBand::new(0.0, 1.0).is_ok());
    }
}
