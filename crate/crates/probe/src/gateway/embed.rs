/// Width of the offline bag-of-words embedding.
pub const HASH_DIMENSION: usize = 256;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, b| {
        (h ^ u64::from(*b)).wrapping_mul(FNV_PRIME)
    })
}

/// Signed feature hashing of lowercase alphanumeric word tokens. The top
/// bit of each token hash picks the sign, the remainder the bucket.
pub fn hash_embedding(text: &str) -> Vec<f64> {
    let mut v = vec![0.0; HASH_DIMENSION];
    for token in text
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
    {
        let h = fnv1a(token.to_lowercase().as_bytes());
        let sign = if h >> 63 == 1 { -1.0 } else { 1.0 };
        v[(h % HASH_DIMENSION as u64) as usize] += sign;
    }
    v
}
