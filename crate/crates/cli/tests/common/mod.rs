//! Runs the built binary against the checked-in replay corpora.
#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use reliefplan_core::{FinalPlanRecord, fixtures};

pub const EPOCH: &str = "1700000000";

pub fn scenario_file() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures/earthquake_scenario.json")
}

pub fn golden_transcript() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/earthquake_transcript.txt")
}

pub fn blessing() -> bool {
    std::env::var_os("RELIEFPLAN_BLESS").is_some_and(|v| v == "1")
}

/// Runs `reliefplan` with the replay backend over `corpus` and a store in `store`.
pub fn reliefplan(store: &Path, corpus: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_reliefplan"))
        .arg("--store-dir")
        .arg(store)
        .arg("--replay")
        .arg("replay")
        .arg("--replay-dir")
        .arg(corpus)
        .args(args)
        .env("SOURCE_DATE_EPOCH", EPOCH)
        .env_remove("OPENAI_API_KEY")
        .output()
        .expect("binary runs")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

pub struct ScriptedRun {
    /// (command, exit code) per step.
    pub exits: Vec<(String, i32)>,
    pub record: Option<FinalPlanRecord>,
    pub transcript: String,
    pub elapsed: Duration,
}

/// new → scenario → generate → select 1 → one refinement → finalize → export.
pub fn scripted_replay_run(store: &Path) -> ScriptedRun {
    let corpus = fixtures::replay_corpus_dir();
    let scenario = scenario_file();
    let steps: Vec<Vec<&str>> = vec![
        vec!["new"],
        vec!["scenario", scenario.to_str().unwrap()],
        vec!["generate"],
        vec!["select", "1"],
        vec!["refine", fixtures::REFINEMENT_FEEDBACK],
        vec!["--structured", "finalize"],
        vec!["export"],
    ];
    let start = Instant::now();
    let mut exits = Vec::new();
    let mut record = None;
    let mut transcript = String::new();
    for step in &steps {
        let out = reliefplan(store, &corpus, step);
        exits.push((step.join(" "), out.status.code().unwrap_or(-1)));
        match step.last().copied() {
            Some("finalize") => record = serde_json::from_slice(&out.stdout).ok(),
            Some("export") => transcript = stdout(&out),
            _ => {}
        }
    }
    ScriptedRun {
        exits,
        record,
        transcript,
        elapsed: start.elapsed(),
    }
}

/// Compares against the golden transcript, rewriting it when blessing.
pub fn check_golden(transcript: &str) -> Result<(), String> {
    let path = golden_transcript();
    if blessing() {
        fs::write(&path, transcript).unwrap();
    }
    let golden = fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    if golden == transcript {
        return Ok(());
    }
    let line = golden
        .lines()
        .zip(transcript.lines())
        .position(|(a, b)| a != b)
        .map_or_else(|| "length".to_owned(), |n| format!("line {}", n + 1));
    Err(format!(
        "transcript differs from {} at {line}; rerun with RELIEFPLAN_BLESS=1 if the change is intended",
        path.display()
    ))
}
