//! Tab-separated report tables. Absent values are written as `NA`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use probe_core::evaluation::{
    assign_tier, AwarenessSummary, DecisionLog, Proxy, ProxyCorrelation, Sensitivity, Tier,
    TierBoundaries,
};
use probe_core::stats::{
    newcombe_interval, pearson_r, two_proportion_z_one_sided, ProportionSample,
};
use probe_core::{BenchmarkRecord, BiasLabel, DiscardLedger, FilterId};

use crate::gateway::CallRecord;
use crate::pipeline::CandidateLog;

pub const ABSENT: &str = "NA";

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("cannot write {path}: {source}")]
    Unwritable {
        path: String,
        source: std::io::Error,
    },
    #[error("cannot read {path}: {source}")]
    Unreadable {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {reason}")]
    Malformed { path: String, reason: String },
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push<S: Into<String>>(&mut self, row: impl IntoIterator<Item = S>) {
        let row: Vec<String> = row.into_iter().map(Into::into).collect();
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for line in std::iter::once(&self.header).chain(&self.rows) {
            let _ = writeln!(out, "{}", line.join("\t"));
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<(), ReportError> {
        std::fs::write(path, self.render()).map_err(|source| ReportError::Unwritable {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn read(path: &Path) -> Result<Self, ReportError> {
        let text = std::fs::read_to_string(path).map_err(|source| ReportError::Unreadable {
            path: path.display().to_string(),
            source,
        })?;
        let mut lines = text.lines().filter(|l| !l.is_empty());
        let header: Vec<String> = lines
            .next()
            .ok_or_else(|| ReportError::Malformed {
                path: path.display().to_string(),
                reason: "missing header".into(),
            })?
            .split('\t')
            .map(str::to_string)
            .collect();
        let mut table = Table {
            header,
            rows: Vec::new(),
        };
        for (i, line) in lines.enumerate() {
            let row: Vec<String> = line.split('\t').map(str::to_string).collect();
            if row.len() != table.header.len() {
                return Err(ReportError::Malformed {
                    path: path.display().to_string(),
                    reason: format!(
                        "row {} has {} cells, expected {}",
                        i + 2,
                        row.len(),
                        table.header.len()
                    ),
                });
            }
            table.rows.push(row);
        }
        Ok(table)
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }
}

pub fn num(v: Option<f64>) -> String {
    match v {
        Some(x) if x.is_finite() => format!("{x:.6}"),
        _ => ABSENT.to_string(),
    }
}

/// Discards per filter (rows, table order) and bias (columns).
pub fn ledger_table(ledger: &DiscardLedger) -> Table {
    let biases: Vec<BiasLabel> = ledger.biases.keys().copied().collect();
    let mut t = Table::new(
        std::iter::once("filter".to_string())
            .chain(biases.iter().map(|b| b.slug().to_string()))
            .chain(std::iter::once("total".to_string())),
    );
    let row = |label: &str, f: &dyn Fn(BiasLabel) -> u64| {
        let cells: Vec<u64> = biases.iter().map(|b| f(*b)).collect();
        let total: u64 = cells.iter().sum();
        std::iter::once(label.to_string())
            .chain(cells.iter().map(u64::to_string))
            .chain(std::iter::once(total.to_string()))
            .collect::<Vec<_>>()
    };
    let get = |b: BiasLabel| ledger.get(b).cloned().unwrap_or_default();
    for filter in FilterId::TABLE_ORDER {
        t.push(row(filter.display_name(), &|b| get(b).discards_for(filter)));
    }
    t.push(row("Total discarded", &|b| get(b).discarded()));
    t.push(row("Accepted", &|b| get(b).accepted));
    t.push(row("Candidates", &|b| get(b).candidates));
    t.push(row("Template rejections", &|b| get(b).template_rejections));
    t.push(row("Batches", &|b| get(b).batches));
    t
}

pub fn candidates_table(log: &[CandidateLog]) -> Table {
    let mut t = Table::new(["id", "bias", "batch", "outcome", "reason"]);
    for c in log {
        t.push([
            c.id.clone(),
            c.bias.slug().to_string(),
            c.batch.to_string(),
            c.failed.map_or("accepted", |f| f.slug()).to_string(),
            c.reason.replace(['\t', '\n'], " "),
        ]);
    }
    t
}

pub fn usage_table(calls: &[CallRecord]) -> Table {
    #[derive(Default)]
    struct Agg {
        calls: u64,
        attempts: u64,
        failed: u64,
        prompt: u64,
        completion: u64,
    }
    let mut agg: BTreeMap<(String, String, String), Agg> = BTreeMap::new();
    for c in calls {
        let a = agg
            .entry((c.kind.clone(), c.model.clone(), c.profile.to_string()))
            .or_default();
        a.calls += 1;
        a.attempts += u64::from(c.attempts);
        a.failed += u64::from(!c.ok);
        a.prompt += c.prompt_tokens;
        a.completion += c.completion_tokens;
    }
    let mut t = Table::new([
        "kind",
        "model",
        "profile",
        "calls",
        "attempts",
        "failed",
        "prompt_tokens",
        "completion_tokens",
    ]);
    for ((kind, model, profile), a) in agg {
        t.push([
            kind,
            model,
            profile,
            a.calls.to_string(),
            a.attempts.to_string(),
            a.failed.to_string(),
            a.prompt.to_string(),
            a.completion.to_string(),
        ]);
    }
    t
}

pub fn sensitivity_table(rows: &[(String, BiasLabel, Sensitivity)]) -> Table {
    let mut t = Table::new([
        "model",
        "bias",
        "flips",
        "answered",
        "abstentions",
        "sensitivity",
    ]);
    for (model, bias, s) in rows {
        t.push([
            model.clone(),
            bias.slug().to_string(),
            s.flips.to_string(),
            s.answered.to_string(),
            s.abstentions.to_string(),
            num(s.rate()),
        ]);
    }
    t
}

pub fn quartiles_table(b: &TierBoundaries, n: usize) -> Table {
    let mut t = Table::new(["n", "q1", "q2", "q3"]);
    t.push([
        n.to_string(),
        b.q1.to_string(),
        b.q2.to_string(),
        b.q3.to_string(),
    ]);
    t
}

pub type TierCells = BTreeMap<(BiasLabel, Tier), Sensitivity>;

/// Bias by tier sensitivity per model; empty cells are `NA`.
pub fn tier_table(rows: &[(String, TierCells)]) -> Table {
    let mut t = Table::new(
        ["model", "bias"]
            .into_iter()
            .map(str::to_string)
            .chain(Tier::ALL.iter().map(|t| t.slug().to_string())),
    );
    for (model, cells) in rows {
        let mut biases: Vec<BiasLabel> = cells.keys().map(|(b, _)| *b).collect();
        biases.dedup();
        for bias in biases {
            let mut row = vec![model.clone(), bias.slug().to_string()];
            row.extend(
                Tier::ALL
                    .iter()
                    .map(|tier| num(cells.get(&(bias, *tier)).and_then(Sensitivity::rate))),
            );
            t.push(row);
        }
    }
    t
}

pub fn awareness_table(rows: &[(String, BiasLabel, AwarenessSummary)]) -> Table {
    let mut t = Table::new([
        "model",
        "bias",
        "aware",
        "assessed",
        "excluded",
        "awareness",
    ]);
    for (model, bias, s) in rows {
        t.push([
            model.clone(),
            bias.slug().to_string(),
            s.aware.to_string(),
            s.assessed.to_string(),
            s.excluded.to_string(),
            num(s.rate()),
        ]);
    }
    t
}

pub const DECISION_COLUMNS: [&str; 12] = [
    "model",
    "record_id",
    "bias",
    "inference_steps",
    "tier",
    "unbiased",
    "biased",
    "flipped",
    "intra_cosine",
    "intra_levenshtein",
    "audit_agreement",
    "round_trip_cosine",
];

/// One row per (model, record) with everything `stats` needs.
/// The tier column is `NA` when no boundaries are available.
pub fn decisions_table(
    logs: &[DecisionLog],
    dataset: &[BenchmarkRecord],
    b: Option<&TierBoundaries>,
) -> Table {
    let by_id: BTreeMap<&str, &BenchmarkRecord> = dataset.iter().map(|r| (r.id(), r)).collect();
    let mut t = Table::new(DECISION_COLUMNS);
    for log in logs {
        for e in &log.entries {
            let Some(r) = by_id.get(e.record_id.as_str()) else {
                continue;
            };
            let steps = r.unbiased_trace.inference_steps;
            let side = |a: &Option<probe_core::evaluation::Answer>| {
                a.as_ref()
                    .map_or(ABSENT.to_string(), |a| a.decision.ground_term().to_string())
            };
            t.push([
                log.model.clone(),
                e.record_id.clone(),
                e.bias.slug().to_string(),
                steps.to_string(),
                b.map_or(ABSENT, |b| assign_tier(steps, b).slug())
                    .to_string(),
                side(&e.unbiased),
                side(&e.biased),
                e.flipped()
                    .map_or(ABSENT.to_string(), |f| u8::from(f).to_string()),
                num(Some(r.intra_cosine)),
                num(Some(r.intra_levenshtein)),
                num(r.audit_agreement()),
                num(Some(r.round_trip_cosine)),
            ]);
        }
    }
    t
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignificanceRow {
    pub bias: String,
    pub high_flips: u64,
    pub high_n: u64,
    pub low_flips: u64,
    pub low_n: u64,
    pub delta_pp: Option<f64>,
    pub ci: Option<(f64, f64)>,
    pub z: Option<f64>,
    pub p: Option<f64>,
}

pub fn significance_table(rows: &[SignificanceRow]) -> Table {
    let mut t = Table::new([
        "bias",
        "high_flips",
        "high_n",
        "low_flips",
        "low_n",
        "delta_pp",
        "ci_lo_pp",
        "ci_hi_pp",
        "z",
        "p",
    ]);
    for r in rows {
        t.push([
            r.bias.clone(),
            r.high_flips.to_string(),
            r.high_n.to_string(),
            r.low_flips.to_string(),
            r.low_n.to_string(),
            num(r.delta_pp),
            num(r.ci.map(|c| c.0)),
            num(r.ci.map(|c| c.1)),
            num(r.z),
            num(r.p),
        ]);
    }
    t
}

fn required_column(t: &Table, name: &str) -> Result<usize, ReportError> {
    t.column(name).ok_or_else(|| ReportError::Malformed {
        path: "decisions table".into(),
        reason: format!("missing column `{name}`"),
    })
}

fn cell_flip(cell: &str) -> Result<Option<bool>, ReportError> {
    match cell {
        "0" => Ok(Some(false)),
        "1" => Ok(Some(true)),
        ABSENT => Ok(None),
        other => Err(ReportError::Malformed {
            path: "decisions table".into(),
            reason: format!("bad flipped cell `{other}`"),
        }),
    }
}

/// High versus low tier flip rates per bias plus a pooled `all` row, read
/// from a decisions table. Rows without a flip verdict are skipped.
pub fn significance_rows(
    decisions: &Table,
    level: f64,
) -> Result<Vec<SignificanceRow>, ReportError> {
    let bias_col = required_column(decisions, "bias")?;
    let tier_col = required_column(decisions, "tier")?;
    let flip_col = required_column(decisions, "flipped")?;
    let high = Tier::High.slug();
    let low = Tier::Low.slug();
    let mut counts: BTreeMap<String, [u64; 4]> = BTreeMap::new();
    for row in &decisions.rows {
        let Some(flip) = cell_flip(&row[flip_col])? else {
            continue;
        };
        let offset = match row[tier_col].as_str() {
            t if t == high => 0,
            t if t == low => 2,
            _ => continue,
        };
        for key in [row[bias_col].clone(), "all".to_string()] {
            let c = counts.entry(key).or_default();
            c[offset] += u64::from(flip);
            c[offset + 1] += 1;
        }
    }
    let mut rows: Vec<SignificanceRow> = counts
        .into_iter()
        .map(|(bias, [hf, hn, lf, ln])| {
            let mut row = SignificanceRow {
                bias,
                high_flips: hf,
                high_n: hn,
                low_flips: lf,
                low_n: ln,
                delta_pp: None,
                ci: None,
                z: None,
                p: None,
            };
            if let (Ok(h), Ok(l)) = (ProportionSample::new(hf, hn), ProportionSample::new(lf, ln)) {
                row.delta_pp = Some((h.proportion() - l.proportion()) * 100.0);
                row.ci = newcombe_interval(h, l, level)
                    .ok()
                    .map(|(a, b)| (a * 100.0, b * 100.0));
                if let Some(t) = two_proportion_z_one_sided(h, l) {
                    row.z = Some(t.z);
                    row.p = Some(t.p);
                }
            }
            row
        })
        .collect();
    if let Some(i) = rows.iter().position(|r| r.bias == "all") {
        let all = rows.remove(i);
        rows.push(all);
    }
    Ok(rows)
}

/// Pearson correlation of each proxy column with the flip indicator.
pub fn proxy_correlations(decisions: &Table) -> Result<Vec<ProxyCorrelation>, ReportError> {
    let flip_col = required_column(decisions, "flipped")?;
    Proxy::ALL
        .iter()
        .map(|&proxy| {
            let col = required_column(decisions, &proxy.slug().replace('-', "_"))?;
            let mut xs = Vec::new();
            let mut flips = Vec::new();
            for row in &decisions.rows {
                let Some(flip) = cell_flip(&row[flip_col])? else {
                    continue;
                };
                if row[col] == ABSENT {
                    continue;
                }
                let x: f64 = row[col].parse().map_err(|_| ReportError::Malformed {
                    path: "decisions table".into(),
                    reason: format!("bad number `{}` in `{}`", row[col], decisions.header[col]),
                })?;
                xs.push(x);
                flips.push(if flip { 1.0 } else { 0.0 });
            }
            Ok(ProxyCorrelation {
                proxy,
                n: xs.len(),
                correlation: pearson_r(&xs, &flips).ok(),
            })
        })
        .collect()
}

pub fn correlation_table(rows: &[ProxyCorrelation]) -> Table {
    let mut t = Table::new(["proxy", "n", "r", "p"]);
    for c in rows {
        t.push([
            c.proxy.slug().to_string(),
            c.n.to_string(),
            num(c.correlation.map(|c| c.r)),
            num(c.correlation.map(|c| c.p)),
        ]);
    }
    t
}
