#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use probe::core::{
    validate_dilemma_text, BenchmarkRecord, BiasLabel, DilemmaPair, ExecutionTrace, FilterId,
    FilterOutcome, OptionSide, PrologBundle, ValidationTrail,
};

pub fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../..")
        .canonicalize()
        .unwrap()
}

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn on_path(name: &str) -> Option<PathBuf> {
    std::env::split_paths(&std::env::var_os("PATH")?)
        .map(|d| d.join(name))
        .find(|p| p.is_file())
}

/// `PROBE_SWIPL`, then `swipl` on `PATH`, then the bundled wasm shim once
/// its node modules are installed.
pub fn engine_binary() -> PathBuf {
    if let Some(p) = std::env::var_os("PROBE_SWIPL") {
        let p = PathBuf::from(p);
        return if p.is_relative() {
            std::env::current_dir().unwrap().join(p)
        } else {
            p
        };
    }
    if let Some(p) = on_path("swipl") {
        return p;
    }
    let shim = repo_root().join("tools/swipl-wasm");
    if shim.join("node_modules").is_dir() {
        return shim.join("swipl");
    }
    panic!(
        "no SWI-Prolog engine: set PROBE_SWIPL, put swipl on PATH, or run `npm ci` in {}",
        shim.display()
    );
}

/// Runs the binary without an API key and with the test engine.
pub fn probe(args: &[&str], cwd: &Path) -> Output {
    probe_with(
        args,
        cwd,
        &[("PROBE_SWIPL", engine_binary().to_str().unwrap())],
    )
}

pub fn probe_with(args: &[&str], cwd: &Path, env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_probe"));
    cmd.args(args)
        .current_dir(cwd)
        .env_remove("PROBE_API_KEY")
        .env_remove("PROBE_SWIPL");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("probe binary runs")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

pub fn dilemma(body: &str) -> String {
    format!("{body}\n- Option A: Take the careful route.\n- Option B: Take the quick route.\nWhich option should I choose?")
}

pub fn accepted_trail(agreement: f64) -> ValidationTrail {
    let mut trail = ValidationTrail::new();
    for f in FilterId::PROTOCOL_ORDER {
        let mut o = FilterOutcome::new(f, true);
        if f == FilterId::OutputMatching {
            o = o.metric("agreement", agreement);
        }
        trail.push(o).unwrap();
    }
    trail
}

pub struct RecordFixture {
    pub id: String,
    pub bias: BiasLabel,
    pub unbiased: String,
    pub biased: String,
    pub decision: OptionSide,
    pub steps: u64,
    pub choices: u64,
    pub intra_cosine: f64,
    pub round_trip_cosine: f64,
    pub agreement: f64,
}

impl RecordFixture {
    pub fn new(id: &str, bias: BiasLabel) -> Self {
        Self {
            id: id.into(),
            bias,
            unbiased: dilemma("I must pick a rollout plan for a small service."),
            biased: dilemma("I must pick a rollout plan for a small service everyone praises."),
            decision: OptionSide::A,
            steps: 4,
            choices: 0,
            intra_cosine: 0.95,
            round_trip_cosine: 0.8,
            agreement: 1.0,
        }
    }

    pub fn build(self) -> BenchmarkRecord {
        let unbiased = validate_dilemma_text(&self.unbiased).unwrap();
        let biased = validate_dilemma_text(&self.biased).unwrap();
        let lev =
            probe::core::similarity::normalized_levenshtein(unbiased.as_str(), biased.as_str());
        let term = self.decision.ground_term();
        BenchmarkRecord {
            pair: DilemmaPair {
                id: self.id,
                bias: self.bias,
                unbiased,
                biased,
                generator_model: "g".into(),
                created_at: "2026-01-15T09:00:00Z".into(),
            },
            bundle: PrologBundle {
                axioms: format!("decide_option(U, {term}) :- careful(U).\n"),
                unbiased_program: ":- consult('axioms').\ncareful(user).\ndecide_option(user, Choice).\n".into(),
                biased_program: ":- consult('axioms').\ncareful(user).\npraised(service).\ndecide_option(user, Choice).\n".into(),
                axioms_nl: "Be careful. The best practice is: be careful.".into(),
            },
            unbiased_trace: ExecutionTrace::new(self.decision, self.steps, self.choices),
            biased_trace: ExecutionTrace::new(self.decision, self.steps, self.choices),
            intra_cosine: self.intra_cosine,
            intra_levenshtein: lev,
            round_trip_cosine: self.round_trip_cosine,
            trail: accepted_trail(self.agreement),
        }
    }
}
