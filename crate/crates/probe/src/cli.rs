//! Subcommands: `generate`, `evaluate`, `stats` and `validate`.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use probe::config::{BackendKind, RunConfig};
use probe::core::evaluation::{
    awareness_by_bias, bias_counts, complexity_quartiles, tiered_sensitivity, Sensitivity,
};
use probe::core::similarity::{
    check_collision, check_intra_band, cosine_similarity, normalized_levenshtein, Collision,
};
use probe::core::{BenchmarkRecord, BiasLabel, CascadeConfig, DiscardLedger, Variant};
use probe::dataset::{load_dataset, persist_dataset, SeedCorpus};
use probe::evaluator::{assess_awareness, evaluate_model};
use probe::gateway::{Backend, FakeBackend, FakeScript, Gateway, HttpBackend, ModelHandle};
use probe::manifest::Manifest;
use probe::pipeline::{Pipeline, Registry};
use probe::prolog::{PrologEngine, SwiProlog};
use probe::report::{
    awareness_table, candidates_table, correlation_table, decisions_table, ledger_table,
    proxy_correlations, quartiles_table, sensitivity_table, significance_rows, significance_table,
    tier_table, usage_table, Table,
};

pub const API_KEY_VAR: &str = "PROBE_API_KEY";

#[derive(Debug, Parser)]
#[command(
    name = "probe",
    version,
    about = "Generate and run cognitive-bias dilemma benchmarks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate validated dilemma pairs for each selected bias.
    Generate(GenerateArgs),
    /// Query models on a dataset and write sensitivity, tier and awareness reports.
    Evaluate(EvaluateArgs),
    /// High versus low complexity significance tests and proxy correlations.
    Stats(StatsArgs),
    /// Re-check an existing dataset offline.
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, default_value = "probe.toml")]
    pub config: PathBuf,
    /// Restrict to these biases (repeatable).
    #[arg(long = "bias")]
    pub biases: Vec<BiasLabel>,
    /// Accepted pairs wanted per bias.
    #[arg(long)]
    pub count: Option<u32>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long, default_value = "probe.toml")]
    pub config: PathBuf,
    /// Dataset to evaluate; `<output>/dataset.v1` by default.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Models to evaluate (repeatable).
    #[arg(long = "model")]
    pub models: Vec<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// A decisions.tsv file or an output directory holding one.
    #[arg(long)]
    pub report: PathBuf,
    /// Where to write the tables; next to the decisions file by default.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Confidence level of the difference interval.
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// Enables embedding checks and supplies thresholds and engine settings.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

pub fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate(a) => generate(&a),
        Command::Evaluate(a) => evaluate(&a),
        Command::Stats(a) => stats(&a),
        Command::Validate(a) => validate(&a),
    }
}

fn load_config(path: &Path) -> Result<RunConfig> {
    Ok(RunConfig::load(path)?)
}

fn output_dir(cfg: &RunConfig, flag: Option<&Path>) -> PathBuf {
    flag.map_or_else(|| cfg.resolve(&cfg.output), Path::to_path_buf)
}

fn api_key(cfg: &RunConfig) -> Result<Option<String>> {
    if cfg.backend.kind == BackendKind::Fake {
        return Ok(None);
    }
    match std::env::var(API_KEY_VAR) {
        Ok(k) if !k.trim().is_empty() => Ok(Some(k)),
        _ => bail!("missing API key: set {API_KEY_VAR} for the http backend"),
    }
}

/// Starts the engine once so a missing binary is reported up front.
fn engine(cfg: Option<&RunConfig>) -> Result<(SwiProlog, String)> {
    let timeout = cfg.map_or(probe::prolog::DEFAULT_TIMEOUT, RunConfig::prolog_timeout);
    let engine = match cfg.and_then(|c| c.prolog.binary.as_ref().map(|b| c.resolve(b))) {
        Some(binary) => SwiProlog::new(binary, timeout),
        None => SwiProlog::from_env(timeout),
    };
    let version = engine.version().context("missing Prolog engine")?;
    Ok((engine, version))
}

fn gateway(cfg: &RunConfig, key: Option<String>) -> Result<Arc<Gateway>> {
    let backend: Box<dyn Backend> = match cfg.backend.kind {
        BackendKind::Fake => {
            let script = cfg
                .backend
                .script
                .as_ref()
                .context("backend.script is not set")?;
            Box::new(FakeBackend::new(FakeScript::load(&cfg.resolve(script))?))
        }
        BackendKind::Http => Box::new(HttpBackend::new(
            &cfg.backend.base_url,
            key.context("missing API key")?,
            Duration::from_secs(cfg.backend.timeout_secs),
        )?),
    };
    Ok(Arc::new(Gateway::new(
        backend,
        cfg.backend.retry_policy(),
        cfg.parallelism.in_flight,
    )))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn add_script_input(manifest: &mut Manifest, cfg: &RunConfig) -> Result<()> {
    if cfg.backend.kind == BackendKind::Fake {
        if let Some(script) = &cfg.backend.script {
            manifest.add_input("script", script, &cfg.resolve(script))?;
        }
    }
    Ok(())
}

fn generate(args: &GenerateArgs) -> Result<()> {
    let mut cfg = load_config(&args.config)?;
    if !args.biases.is_empty() {
        cfg.biases = args.biases.clone();
    }
    if let Some(n) = args.count {
        cfg.cascade.target_count = n;
    }
    cfg.validate_generate()?;
    let key = api_key(&cfg)?;
    let (engine, version) = engine(Some(&cfg))?;
    let seeds = SeedCorpus::load(&cfg.resolve(&cfg.seeds))?;
    let created_at = cfg
        .created_at
        .clone()
        .unwrap_or_else(|| chrono::Utc::now().format("%Y-%m-%dT%H:%M:%SZ").to_string());
    cfg.created_at = Some(created_at.clone());

    let out = output_dir(&cfg, args.out.as_deref());
    let reports = out.join("reports");
    create_dir(&reports)?;

    let gw = gateway(&cfg, key)?;
    let pipeline = Pipeline {
        generator: ModelHandle::new(gw.clone(), cfg.generator_model.as_str()),
        judge: ModelHandle::new(gw.clone(), cfg.judge()),
        embedder: ModelHandle::new(gw.clone(), cfg.embedding_model.as_str()),
        engine: &engine,
        seeds: &seeds,
        cfg: cfg.cascade.clone(),
        created_at,
    };
    let mut registry = Registry::default();
    let mut ledger = DiscardLedger::default();
    let mut log = Vec::new();
    let mut records = Vec::new();
    let mut failure = None;
    for &bias in &cfg.biases {
        match pipeline.generate_benchmark(bias, &mut registry, &mut ledger, &mut log) {
            Ok(batch) => records.extend(batch),
            Err(e) => {
                failure = Some(e);
                break;
            }
        }
    }

    ledger_table(&ledger).write(&out.join("ledger.tsv"))?;
    candidates_table(&log).write(&reports.join("candidates.tsv"))?;
    usage_table(&gw.calls()).write(&reports.join("generation-usage.tsv"))?;
    if let Some(e) = failure {
        return Err(e).context("generation stopped; ledger.tsv holds the counts so far");
    }
    persist_dataset(&records, &out.join("dataset.v1"))?;

    let mut manifest = Manifest::new("generate", &cfg, Some(version));
    manifest.add_input("config", &args.config, &args.config)?;
    manifest.add_input("seeds", &cfg.seeds, &cfg.resolve(&cfg.seeds))?;
    add_script_input(&mut manifest, &cfg)?;
    write_text(&out.join("manifest.v1"), &manifest.to_json())?;

    for &bias in &cfg.biases {
        let l = ledger.get(bias).cloned().unwrap_or_default();
        println!(
            "{}: accepted {} of {} candidates in {} batch(es)",
            bias.slug(),
            l.accepted,
            l.candidates,
            l.batches
        );
    }
    println!(
        "wrote {} records to {}",
        records.len(),
        out.join("dataset.v1").display()
    );
    Ok(())
}

fn sensitivity_row(log: &probe::core::evaluation::DecisionLog, bias: BiasLabel) -> Sensitivity {
    bias_counts(log, bias).unwrap_or_else(|_| Sensitivity {
        flips: 0,
        answered: 0,
        abstentions: log.entries.iter().filter(|e| e.bias == bias).count() as u64,
    })
}

fn evaluate(args: &EvaluateArgs) -> Result<()> {
    let mut cfg = load_config(&args.config)?;
    if !args.models.is_empty() {
        cfg.evaluated_models = args.models.clone();
    }
    cfg.validate_evaluate()?;
    let key = api_key(&cfg)?;
    let out = output_dir(&cfg, args.out.as_deref());
    let dataset_path = args
        .dataset
        .clone()
        .unwrap_or_else(|| cfg.resolve(&cfg.output).join("dataset.v1"));
    let dataset = load_dataset(&dataset_path)?;
    if dataset.is_empty() {
        bail!("{} holds no records", dataset_path.display());
    }
    let reports = out.join("reports");
    create_dir(&reports)?;

    let gw = gateway(&cfg, key)?;
    let judge = ModelHandle::new(gw.clone(), cfg.judge());
    let workers = cfg.parallelism.workers;
    let steps: Vec<u64> = dataset
        .iter()
        .map(|r| r.unbiased_trace.inference_steps)
        .collect();
    let bounds = match complexity_quartiles(&steps) {
        Ok(b) => Some(b),
        Err(e) => {
            eprintln!("note: complexity tiers skipped: {e}");
            None
        }
    };
    let biases: BTreeSet<BiasLabel> = dataset.iter().map(|r| r.pair.bias).collect();

    let mut logs = Vec::new();
    let mut sensitivity = Vec::new();
    let mut tiers = Vec::new();
    let mut awareness = Vec::new();
    for model in &cfg.evaluated_models {
        let handle = ModelHandle::new(gw.clone(), model.as_str());
        let log = evaluate_model(&handle, &dataset, workers)
            .with_context(|| format!("evaluating {model}"))?;
        for &bias in &biases {
            sensitivity.push((model.clone(), bias, sensitivity_row(&log, bias)));
        }
        if let Some(b) = &bounds {
            tiers.push((model.clone(), tiered_sensitivity(&log, &dataset, b)));
        }
        let entries = assess_awareness(&judge, &log, &dataset, cfg.awareness_runs, workers)
            .with_context(|| format!("awareness judging for {model}"))?;
        for (bias, summary) in awareness_by_bias(&entries) {
            awareness.push((model.clone(), bias, summary));
        }
        logs.push(log);
    }

    sensitivity_table(&sensitivity).write(&reports.join("sensitivity.tsv"))?;
    awareness_table(&awareness).write(&reports.join("awareness.tsv"))?;
    decisions_table(&logs, &dataset, bounds.as_ref()).write(&reports.join("decisions.tsv"))?;
    if let Some(b) = &bounds {
        quartiles_table(b, steps.len()).write(&reports.join("quartiles.tsv"))?;
        tier_table(&tiers).write(&reports.join("tiers.tsv"))?;
    }
    usage_table(&gw.calls()).write(&reports.join("evaluation-usage.tsv"))?;

    let mut manifest = Manifest::new("evaluate", &cfg, None);
    manifest.add_input("config", &args.config, &args.config)?;
    manifest.add_input("dataset", &dataset_path, &dataset_path)?;
    add_script_input(&mut manifest, &cfg)?;
    write_text(&reports.join("manifest.v1"), &manifest.to_json())?;

    print!("{}", sensitivity_table(&sensitivity).render());
    Ok(())
}

fn decisions_path(report: &Path) -> Result<PathBuf> {
    if report.is_file() {
        return Ok(report.to_path_buf());
    }
    for candidate in [
        report.join("reports").join("decisions.tsv"),
        report.join("decisions.tsv"),
    ] {
        if candidate.is_file() {
            return Ok(candidate);
        }
    }
    bail!("no decisions.tsv found at {}", report.display())
}

fn stats(args: &StatsArgs) -> Result<()> {
    if !(args.level > 0.0 && args.level < 1.0) {
        bail!(
            "--level must lie strictly between 0 and 1, got {}",
            args.level
        );
    }
    let path = decisions_path(&args.report)?;
    let table = Table::read(&path)?;
    let rows = significance_rows(&table, args.level)?;
    let correlations = proxy_correlations(&table)?;
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| path.parent().unwrap_or(Path::new(".")).to_path_buf());
    create_dir(&out)?;
    let significance = significance_table(&rows);
    significance.write(&out.join("significance.tsv"))?;
    correlation_table(&correlations).write(&out.join("correlations.tsv"))?;
    print!("{}", significance.render());
    Ok(())
}

/// Problems found in one record; empty when it passes.
fn check_record(
    r: &BenchmarkRecord,
    cascade: &CascadeConfig,
    engine: &dyn PrologEngine,
    embedder: Option<&ModelHandle>,
) -> Result<Vec<String>> {
    let mut problems = Vec::new();
    if let Err(e) = r.check(cascade.round_trip_tau) {
        problems.push(e.to_string());
    }
    for (variant, stored) in [
        (Variant::Unbiased, &r.unbiased_trace),
        (Variant::Biased, &r.biased_trace),
    ] {
        match engine.execute(&r.bundle.axioms, r.bundle.program(variant)) {
            Ok(t) if &t == stored => {}
            Ok(t) => problems.push(format!(
                "{variant} trace changed: stored {} {} {}, now {} {} {}",
                stored.decision,
                stored.inference_steps,
                stored.choice_steps,
                t.decision,
                t.inference_steps,
                t.choice_steps
            )),
            Err(e) if e.is_infrastructure() => return Err(e).context("missing Prolog engine"),
            Err(e) => problems.push(format!("{variant} program: {e}")),
        }
    }
    let lev = normalized_levenshtein(r.pair.unbiased.as_str(), r.pair.biased.as_str());
    if (lev - r.intra_levenshtein).abs() > 1e-12 {
        problems.push(format!(
            "levenshtein changed: stored {}, now {lev}",
            r.intra_levenshtein
        ));
    }
    if let Some(m) = embedder {
        let cos = cosine_similarity(
            &m.embed(r.pair.unbiased.as_str())?,
            &m.embed(r.pair.biased.as_str())?,
        )?;
        if (cos - r.intra_cosine).abs() > 1e-9 {
            problems.push(format!(
                "intra cosine changed: stored {}, now {cos}",
                r.intra_cosine
            ));
        }
        if !check_intra_band(cos, r.pair.bias) {
            problems.push(format!("intra cosine {cos} outside band"));
        }
    }
    Ok(problems)
}

fn validate(args: &ValidateArgs) -> Result<()> {
    let cfg = args.config.as_deref().map(load_config).transpose()?;
    let cascade = cfg
        .as_ref()
        .map_or_else(CascadeConfig::default, |c| c.cascade.clone());
    cascade.validate()?;
    let key = match &cfg {
        Some(c) => api_key(c)?,
        None => None,
    };
    let (engine, _) = engine(cfg.as_ref())?;
    let records = load_dataset(&args.dataset)?;
    let embedder = match &cfg {
        Some(c) => Some(ModelHandle::new(
            gateway(c, key)?,
            c.embedding_model.as_str(),
        )),
        None => None,
    };

    let mut failed = 0;
    let mut accepted = Vec::new();
    for r in &records {
        let mut problems = check_record(r, &cascade, &engine, embedder.as_ref())?;
        if let Some(m) = &embedder {
            let v = m.embed(r.pair.unbiased.as_str())?;
            if let Collision::Hit { index, similarity } =
                check_collision(&v, &accepted, cascade.collision_tau)?
            {
                problems.push(format!(
                    "collides with {} (cosine {similarity})",
                    records[index].id()
                ));
            }
            accepted.push(v);
        }
        if problems.is_empty() {
            println!("PASS {}", r.id());
        } else {
            failed += 1;
            println!("FAIL {}: {}", r.id(), problems.join("; "));
        }
    }
    if failed > 0 {
        bail!("{failed} of {} records failed validation", records.len());
    }
    println!("{} records valid", records.len());
    Ok(())
}
