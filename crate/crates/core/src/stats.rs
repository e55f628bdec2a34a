//! Significance tests, confidence intervals, agreement coefficients and
//! correlation.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::f64::consts::{PI, SQRT_2};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StatsError {
    #[error("invalid sample: {successes} successes out of {trials} trials")]
    InvalidSample { successes: u64, trials: u64 },
    #[error("confidence level {0} is outside (0, 1)")]
    InvalidLevel(f64),
    #[error("at least two raters are required")]
    TooFewRaters,
    #[error("no items to rate")]
    NoItems,
    #[error("item {item} has {found} ratings, expected {expected}")]
    RaggedRow {
        item: usize,
        expected: usize,
        found: usize,
    },
    #[error("missing-cell: item {item}, rater {rater}")]
    MissingCell { item: usize, rater: usize },
    #[error("series lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("at least {needed} points are required, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("constant-input: correlation is undefined")]
    ConstantInput,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProportionSample {
    successes: u64,
    trials: u64,
}

impl ProportionSample {
    pub fn new(successes: u64, trials: u64) -> Result<Self, StatsError> {
        if trials == 0 || successes > trials {
            return Err(StatsError::InvalidSample { successes, trials });
        }
        Ok(Self { successes, trials })
    }

    pub fn successes(&self) -> u64 {
        self.successes
    }

    pub fn trials(&self) -> u64 {
        self.trials
    }

    pub fn proportion(&self) -> f64 {
        self.successes as f64 / self.trials as f64
    }
}

/// Standard normal upper tail, `P(Z > z)`.
pub fn normal_sf(z: f64) -> f64 {
    0.5 * libm::erfc(z / SQRT_2)
}

pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / SQRT_2)
}

/// Standard normal quantile: Acklam's rational approximation polished by
/// one Halley step. Returns infinities at 0 and 1 and NaN outside [0, 1].
pub fn inverse_normal(p: f64) -> f64 {
    if !(0.0..=1.0).contains(&p) {
        return f64::NAN;
    }
    if p == 0.0 {
        return f64::NEG_INFINITY;
    }
    if p == 1.0 {
        return f64::INFINITY;
    }
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    const P_LOW: f64 = 0.02425;
    let x = if p < P_LOW {
        let q = libm::sqrt(-2.0 * libm::log(p));
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = libm::sqrt(-2.0 * libm::log1p(-p));
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    let e = normal_cdf(x) - p;
    let u = e * libm::sqrt(2.0 * PI) * libm::exp(x * x / 2.0);
    x - u / (1.0 + x * u / 2.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZTest {
    pub z: f64,
    /// One-sided p-value for `p_high > p_low`.
    pub p: f64,
}

/// Pooled two-proportion z-test without continuity correction. `None` when
/// the pooled proportion is 0 or 1.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn two_proportion_z_one_sided(high: ProportionSample, low: ProportionSample) -> Option<ZTest> {
    let (n1, n2) = (high.trials as f64, low.trials as f64);
    let pooled = (high.successes + low.successes) as f64 / (n1 + n2);
    let var = pooled * (1.0 - pooled) * (1.0 / n1 + 1.0 / n2);
    if !(var > 0.0) {
        return None;
    }
    let z = (high.proportion() - low.proportion()) / libm::sqrt(var);
    Some(ZTest { z, p: normal_sf(z) })
}

fn check_level(level: f64) -> Result<f64, StatsError> {
    if !(level > 0.0 && level < 1.0) {
        return Err(StatsError::InvalidLevel(level));
    }
    Ok(inverse_normal(1.0 - (1.0 - level) / 2.0))
}

fn wilson_z(s: ProportionSample, z: f64) -> (f64, f64) {
    let n = s.trials as f64;
    let p = s.proportion();
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * libm::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n));
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Wilson score interval for one proportion.
pub fn wilson_interval(sample: ProportionSample, level: f64) -> Result<(f64, f64), StatsError> {
    Ok(wilson_z(sample, check_level(level)?))
}

/// Newcombe hybrid score interval for `p_high - p_low`.
pub fn newcombe_interval(
    high: ProportionSample,
    low: ProportionSample,
    level: f64,
) -> Result<(f64, f64), StatsError> {
    let z = check_level(level)?;
    let (p1, p2) = (high.proportion(), low.proportion());
    let (l1, u1) = wilson_z(high, z);
    let (l2, u2) = wilson_z(low, z);
    let d = p1 - p2;
    let lo = d - libm::sqrt((p1 - l1) * (p1 - l1) + (u2 - p2) * (u2 - p2));
    let hi = d + libm::sqrt((u1 - p1) * (u1 - p1) + (p2 - l2) * (p2 - l2));
    Ok((lo.max(-1.0), hi.min(1.0)))
}

type ItemCounts<'a, L> = BTreeMap<&'a L, u64>;

/// Per-item category counts plus the common rater count.
fn tabulate<L: Ord, R: AsRef<[Option<L>]>>(
    ratings: &[R],
) -> Result<(Vec<ItemCounts<'_, L>>, usize), StatsError> {
    let first = ratings.first().ok_or(StatsError::NoItems)?;
    let raters = first.as_ref().len();
    if raters < 2 {
        return Err(StatsError::TooFewRaters);
    }
    let mut rows = Vec::with_capacity(ratings.len());
    for (item, row) in ratings.iter().enumerate() {
        let row = row.as_ref();
        if row.len() != raters {
            return Err(StatsError::RaggedRow {
                item,
                expected: raters,
                found: row.len(),
            });
        }
        let mut counts = BTreeMap::new();
        for (rater, cell) in row.iter().enumerate() {
            let label = cell
                .as_ref()
                .ok_or(StatsError::MissingCell { item, rater })?;
            *counts.entry(label).or_insert(0u64) += 1;
        }
        rows.push(counts);
    }
    Ok((rows, raters))
}

fn observed_agreement<L>(rows: &[BTreeMap<&L, u64>], raters: usize) -> f64 {
    let n = raters as f64;
    let pairs = n * (n - 1.0);
    let sum: f64 = rows
        .iter()
        .map(|counts| {
            counts
                .values()
                .map(|&c| (c * c.saturating_sub(1)) as f64)
                .sum::<f64>()
                / pairs
        })
        .sum();
    sum / rows.len() as f64
}

/// Mean over items of the share of agreeing rater pairs.
pub fn percent_agreement<L: Ord, R: AsRef<[Option<L>]>>(ratings: &[R]) -> Result<f64, StatsError> {
    let (rows, raters) = tabulate(ratings)?;
    Ok(observed_agreement(&rows, raters))
}

/// Fleiss' kappa. `Ok(None)` when every rating falls in one category.
pub fn fleiss_kappa<L: Ord, R: AsRef<[Option<L>]>>(
    ratings: &[R],
) -> Result<Option<f64>, StatsError> {
    let (rows, raters) = tabulate(ratings)?;
    let po = observed_agreement(&rows, raters);
    let mut totals: BTreeMap<&L, u64> = BTreeMap::new();
    for counts in &rows {
        for (label, c) in counts {
            *totals.entry(*label).or_insert(0) += c;
        }
    }
    let all = (rows.len() * raters) as f64;
    let pe: f64 = totals
        .values()
        .map(|&c| {
            let p = c as f64 / all;
            p * p
        })
        .sum();
    if totals.len() < 2 {
        return Ok(None);
    }
    Ok(Some((po - pe) / (1.0 - pe)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correlation {
    pub r: f64,
    /// Two-sided p-value from the t distribution with n - 2 degrees of freedom.
    pub p: f64,
}

/// Pearson product-moment correlation.
pub fn pearson_r(x: &[f64], y: &[f64]) -> Result<Correlation, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    let n = x.len();
    if n < 3 {
        return Err(StatsError::TooFewPoints { needed: 3, got: n });
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(StatsError::ConstantInput);
    }
    let r = (sxy / libm::sqrt(sxx * syy)).clamp(-1.0, 1.0);
    let df = nf - 2.0;
    let p = if r.abs() == 1.0 {
        0.0
    } else {
        let t2 = r * r * df / (1.0 - r * r);
        regularized_incomplete_beta(df / 2.0, 0.5, df / (df + t2))
    };
    Ok(Correlation { r, p })
}

/// Regularized incomplete beta `I_x(a, b)` by Lentz's continued fraction.
pub fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = libm::lgamma(a + b) - libm::lgamma(a) - libm::lgamma(b)
        + a * libm::log(x)
        + b * libm::log1p(-x);
    let front = libm::exp(ln_front);
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_fraction(a, b, x) / a
    } else {
        1.0 - front * beta_fraction(b, a, 1.0 - x) / b
    }
}

fn beta_fraction(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    let guard = |v: f64| if v.abs() < TINY { TINY } else { v };
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 / guard(1.0 - qab * x / qap);
    let mut h = d;
    for m in 1..=10_000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 / guard(1.0 + aa * d);
        c = guard(1.0 + aa / c);
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 / guard(1.0 + aa * d);
        c = guard(1.0 + aa / c);
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}
