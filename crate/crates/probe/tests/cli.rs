mod common;

use std::fs;
use std::path::Path;

use common::{dilemma, fixture, probe, probe_with, repo_root, stderr, stdout, RecordFixture};
use probe::core::stats::{newcombe_interval, two_proportion_z_one_sided, ProportionSample};
use probe::core::BiasLabel;
use probe::dataset::{load_dataset, persist_dataset};
use probe::report::Table;

fn write_config(dir: &Path, body: &str) -> String {
    let seeds = repo_root().join("data/seeds.v1");
    let text = format!("seeds = \"{}\"\n{body}", seeds.display());
    fs::write(dir.join("probe.toml"), text).unwrap();
    "probe.toml".into()
}

#[test]
fn unknown_command_fails() {
    let dir = tempfile::tempdir().unwrap();
    let o = probe(&["summon"], dir.path());
    assert!(!o.status.success());
    assert!(stderr(&o).contains("summon"), "{}", stderr(&o));
}

#[test]
fn bad_config_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), "generator_model = \"g\"\nbatch_size = 3\n");
    let o = probe(&["generate"], dir.path());
    assert!(!o.status.success());
    assert!(stderr(&o).contains("batch_size"), "{}", stderr(&o));

    write_config(dir.path(), "generator_model = \"g\"\nbiases = []\n");
    let o = probe(&["generate"], dir.path());
    assert!(!o.status.success());
    assert!(stderr(&o).contains("`biases`"), "{}", stderr(&o));

    write_config(
        dir.path(),
        "generator_model = \"g\"\n[cascade]\nvote_threshold = 1.5\n",
    );
    let o = probe(&["generate"], dir.path());
    assert!(!o.status.success());
    assert!(stderr(&o).contains("vote_threshold"), "{}", stderr(&o));
}

#[test]
fn missing_api_key_is_reported_before_any_call() {
    let dir = tempfile::tempdir().unwrap();
    write_config(
        dir.path(),
        "generator_model = \"g\"\nevaluated_models = [\"m\"]\n[backend]\nkind = \"http\"\nbase_url = \"http://127.0.0.1:9\"\n",
    );
    let o = probe(&["generate", "--bias", "framing"], dir.path());
    assert!(!o.status.success());
    assert!(stderr(&o).contains("missing API key"), "{}", stderr(&o));
    assert!(!dir.path().join("out").exists());

    let dataset = dir.path().join("d.v1");
    persist_dataset(
        &[RecordFixture::new("framing-b000-c00", BiasLabel::Framing).build()],
        &dataset,
    )
    .unwrap();
    let o = probe(&["evaluate", "--dataset", "d.v1"], dir.path());
    assert!(stderr(&o).contains("missing API key"), "{}", stderr(&o));
}

#[test]
fn missing_engine_is_reported_before_any_call() {
    let dir = tempfile::tempdir().unwrap();
    let script = fixture("golden.toml");
    write_config(
        dir.path(),
        &format!(
            "generator_model = \"g\"\n[backend]\nkind = \"fake\"\nscript = \"{}\"\n",
            script.display()
        ),
    );
    let o = probe_with(
        &["generate"],
        dir.path(),
        &[("PROBE_SWIPL", "/nonexistent/swipl")],
    );
    assert!(!o.status.success());
    assert!(
        stderr(&o).contains("missing Prolog engine"),
        "{}",
        stderr(&o)
    );
    assert!(!dir.path().join("out").exists());
}

#[test]
fn generate_with_the_fake_gateway() {
    let dir = tempfile::tempdir().unwrap();
    let config = fixture("golden-config.toml");
    let out = dir.path().join("run");
    let o = probe(
        &[
            "generate",
            "--config",
            config.to_str().unwrap(),
            "--bias",
            "framing",
            "--count",
            "3",
            "--out",
            out.to_str().unwrap(),
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let records = load_dataset(&out.join("dataset.v1")).unwrap();
    assert_eq!(records.len(), 3);
    assert!(records.iter().all(|r| r.pair.bias == BiasLabel::Framing));
    let ledger = Table::read(&out.join("ledger.tsv")).unwrap();
    assert_eq!(ledger.header, ["filter", "framing", "total"]);
    let row = |name: &str| ledger.rows.iter().find(|r| r[0] == name).unwrap()[1].clone();
    assert_eq!(row("Accepted"), "3");
    assert_eq!(row("Candidates"), "9");
    assert!(out.join("manifest.v1").is_file());
    assert!(out.join("reports/candidates.tsv").is_file());

    let o = probe(
        &[
            "validate",
            "--dataset",
            out.join("dataset.v1").to_str().unwrap(),
            "--config",
            config.to_str().unwrap(),
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}{}", stdout(&o), stderr(&o));
    assert_eq!(stdout(&o).matches("PASS ").count(), 3);
}

#[test]
fn evaluate_reports_one_row_per_bias_present() {
    let dir = tempfile::tempdir().unwrap();
    let mut records = Vec::new();
    for (i, bias) in [
        BiasLabel::Anchoring,
        BiasLabel::Anchoring,
        BiasLabel::Hindsight,
        BiasLabel::Hindsight,
        BiasLabel::Hindsight,
    ]
    .into_iter()
    .enumerate()
    {
        let mut s = RecordFixture::new(&format!("{}-b000-c{i:02}", bias.slug()), bias);
        s.unbiased = dilemma(&format!("Task q{i} about a rollout plan."));
        s.biased = dilemma(&format!("Task q{i} about a rollout plan, now famous."));
        s.steps = 3 + i as u64;
        records.push(s.build());
    }
    persist_dataset(&records, &dir.path().join("d.v1")).unwrap();
    fs::write(
        dir.path().join("script.toml"),
        "[[rule]]\nkind = \"decision-system\"\ncontains = [\"q1 about a rollout plan, now famous\"]\nresponses = [\"Decision: Option B\"]\n\n\
[[rule]]\nkind = \"decision-system\"\nresponses = [\"Explanation: careful.\\nDecision: Option A\"]\n\n\
[[rule]]\nkind = \"awareness-check\"\nresponses = [\"Decision: No.\"]\n",
    )
    .unwrap();
    write_config(
        dir.path(),
        "generator_model = \"g\"\n[backend]\nkind = \"fake\"\nscript = \"script.toml\"\nbase_delay_ms = 0\n",
    );
    let o = probe(
        &[
            "evaluate",
            "--dataset",
            "d.v1",
            "--model",
            "m",
            "--out",
            "ev",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let t = Table::read(&dir.path().join("ev/reports/sensitivity.tsv")).unwrap();
    assert_eq!(t.rows.len(), 2);
    assert_eq!(t.rows[0], ["m", "anchoring", "1", "2", "0", "0.500000"]);
    assert_eq!(t.rows[1], ["m", "hindsight", "0", "3", "0", "0.000000"]);
    for name in ["tiers", "quartiles", "awareness", "decisions"] {
        assert!(
            dir.path().join(format!("ev/reports/{name}.tsv")).is_file(),
            "{name}"
        );
    }
    let tiers = Table::read(&dir.path().join("ev/reports/tiers.tsv")).unwrap();
    assert!(tiers.rows.iter().flatten().any(|c| c == "NA"));
}

#[test]
fn stats_rows_carry_delta_interval_and_p() {
    let dir = tempfile::tempdir().unwrap();
    let mut t = Table::new(probe::report::DECISION_COLUMNS);
    let mut push = |bias: &str, tier: &str, flips: usize, n: usize| {
        for i in 0..n {
            let flipped = if i < flips { "1" } else { "0" };
            t.push([
                "m",
                &format!("{bias}-{tier}-{i}"),
                bias,
                "4",
                tier,
                "option_A",
                "option_A",
                flipped,
                "0.95",
                "0.1",
                "1.000000",
                "0.8",
            ]);
        }
    };
    push("anchoring", "high", 12, 40);
    push("anchoring", "low", 4, 40);
    push("anchoring", "mid-low", 9, 10);
    t.write(&dir.path().join("decisions.tsv")).unwrap();

    let o = probe(&["stats", "--report", "decisions.tsv"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let s = Table::read(&dir.path().join("significance.tsv")).unwrap();
    assert_eq!(
        s.header,
        [
            "bias",
            "high_flips",
            "high_n",
            "low_flips",
            "low_n",
            "delta_pp",
            "ci_lo_pp",
            "ci_hi_pp",
            "z",
            "p"
        ]
    );
    let row = &s.rows[0];
    assert_eq!(&row[..5], ["anchoring", "12", "40", "4", "40"]);
    let h = ProportionSample::new(12, 40).unwrap();
    let l = ProportionSample::new(4, 40).unwrap();
    let (lo, hi) = newcombe_interval(h, l, 0.95).unwrap();
    let z = two_proportion_z_one_sided(h, l).unwrap();
    assert_eq!(row[5], "20.000000");
    assert_eq!(row[6], format!("{:.6}", lo * 100.0));
    assert_eq!(row[7], format!("{:.6}", hi * 100.0));
    assert_eq!(row[8], format!("{:.6}", z.z));
    assert_eq!(row[9], format!("{:.6}", z.p));
    assert_eq!(s.rows.last().unwrap()[0], "all");
    assert!(dir.path().join("correlations.tsv").is_file());
}

#[test]
fn validate_flags_a_tampered_trace() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = RecordFixture::new("overconfidence-b000-c00", BiasLabel::Overconfidence);
    s.steps = 9999;
    persist_dataset(&[s.build()], &dir.path().join("d.v1")).unwrap();
    let o = probe(&["validate", "--dataset", "d.v1"], dir.path());
    assert!(!o.status.success());
    assert!(
        stdout(&o).contains("FAIL overconfidence-b000-c00"),
        "{}",
        stdout(&o)
    );
    assert!(stdout(&o).contains("trace changed"), "{}", stdout(&o));
}
