//! Acceptance suite: one PASS/FAIL line per criterion, each within its time limit.

#[path = "../../core/tests/support/mod.rs"]
mod support;

mod common;

use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};

use reliefplan_core::binding::bind_assets;
use reliefplan_core::fixtures::{self, ReferencePlan};
use reliefplan_core::validator::{Subject, validate};
use reliefplan_core::{
    AssetId, PlanOfAction, Rule, SessionId, ValidationPolicy, build_board, diff_boards, parse_plan, serialize_plan,
};

type Outcome = Result<(), String>;
type Criterion = (&'static str, Duration, fn() -> Outcome);

fn ensure(condition: bool, message: impl FnOnce() -> String) -> Outcome {
    if condition { Ok(()) } else { Err(message()) }
}

fn cases(n: u32) -> Config {
    Config {
        failure_persistence: None,
        ..Config::with_cases(n)
    }
}

fn golden_parsing() -> Outcome {
    for column in ReferencePlan::ALL {
        support::reference_plans::check_column(column)?;
    }
    let counts: Vec<(usize, usize)> = ReferencePlan::ALL
        .iter()
        .map(|&c| {
            let (p, _) = parse_plan(c.text());
            (p.main_ops.len(), p.aux_ops.len())
        })
        .collect();
    ensure(counts == [(1, 3), (2, 1), (2, 2), (3, 2)], || format!("task counts {counts:?}"))
}

fn round_trip_one(plan: &PlanOfAction) -> Outcome {
    let (again, diagnostics) = parse_plan(&serialize_plan(plan));
    if let Some(d) = diagnostics.iter().find(|d| d.is_error()) {
        return Err(format!("reparse error: {d}"));
    }
    ensure(again.without_provenance() == plan.without_provenance(), || {
        format!("round trip changed plan {}", serialize_plan(plan))
    })
}

fn round_trip() -> Outcome {
    for column in ReferencePlan::ALL {
        round_trip_one(&fixtures::reference_plan(column)).map_err(|e| format!("{column:?}: {e}"))?;
    }
    TestRunner::new(cases(200))
        .run(&support::plan(), |plan| round_trip_one(&plan).map_err(TestCaseError::fail))
        .map_err(|e| e.to_string())
}

fn reuse_tasks(column: ReferencePlan, asset: &str) -> (Option<String>, usize) {
    let scenario = fixtures::earthquake_scenario();
    let (plan, _) = bind_assets(&fixtures::reference_plan(column), &scenario);
    let id = AssetId::new(asset);
    let bound = plan.tasks().filter(|(_, t)| t.asset_refs.contains(&id)).count();
    let issue = validate(&plan, &scenario, &ValidationPolicy::default())
        .into_iter()
        .find(|i| i.rule == Rule::AssetReuseAcrossTasks && i.subject == Subject::Asset { id: id.clone() })
        .map(|i| i.message);
    (issue, bound)
}

fn validator_findings() -> Outcome {
    for (column, asset, tasks) in [
        (ReferencePlan::Bard, "geotechnical-team", "tasks 1, 3"),
        (ReferencePlan::Gpt35, "excavation-team", "tasks 1, 2"),
    ] {
        let (issue, _) = reuse_tasks(column, asset);
        let message = issue.ok_or_else(|| format!("no reuse finding for {asset} in {column:?}"))?;
        ensure(message.contains(tasks), || format!("{column:?}: {message}"))?;
    }
    for column in [ReferencePlan::Human, ReferencePlan::Gpt4] {
        let (issue, bound) = reuse_tasks(column, "excavation-team");
        ensure(issue.is_some() == (bound > 1), || {
            format!("{column:?}: excavation team bound to {bound} task(s), finding {issue:?}")
        })?;
    }
    let (human, _) = reuse_tasks(ReferencePlan::Human, "excavation-team");
    ensure(human.is_none(), || "Human excavation team flagged".into())?;
    let scenario = fixtures::earthquake_scenario();
    let (plan, _) = bind_assets(&fixtures::reference_plan(ReferencePlan::Human), &scenario);
    let unassigned: Vec<_> = validate(&plan, &scenario, &ValidationPolicy::default())
        .into_iter()
        .filter(|i| i.rule == Rule::UnassignedAsset)
        .collect();
    ensure(unassigned.is_empty(), || format!("Human UnassignedAsset: {unassigned:?}"))
}

fn fsm_safety() -> Outcome {
    let engine = support::fixture_engine();
    TestRunner::new(cases(10_000))
        .run(&prop::collection::vec(support::op(), 1..16), |ops| {
            let mut s = engine.new_session(SessionId::new("acceptance"));
            for op in &ops {
                s = support::step(&engine, &s, op).map_err(TestCaseError::fail)?;
            }
            Ok(())
        })
        .map_err(|e| e.to_string())
}

fn budget_property() -> Outcome {
    TestRunner::new(cases(1000))
        .run(&(support::history(), support::budget()), |(history, budget)| {
            support::check_budget(&history, &budget).map_err(TestCaseError::fail)
        })
        .map_err(|e| e.to_string())
}

fn end_to_end_replay() -> Outcome {
    let store = tempfile::tempdir().map_err(|e| e.to_string())?;
    let run = common::scripted_replay_run(store.path());
    for (step, code) in &run.exits {
        ensure(*code == 0, || format!("`{step}` exited {code}"))?;
    }
    let record = run.record.ok_or("finalize printed no record")?;
    ensure(record.final_plan.without_provenance() == fixtures::refined_plan(), || {
        "final plan differs from the fixture".into()
    })?;
    common::check_golden(&run.transcript)?;
    ensure(run.elapsed < Duration::from_secs(2), || format!("scripted run took {:?}", run.elapsed))
}

fn corrective_retry() -> Outcome {
    let store = tempfile::tempdir().map_err(|e| e.to_string())?;
    let script = store.path().join("script.json");
    std::fs::write(&script, r#"{"select": 1}"#).map_err(|e| e.to_string())?;
    let scenario = common::scenario_file();
    let corpus = fixtures::retry_corpus_dir();
    let out = common::reliefplan(
        store.path(),
        &corpus,
        &["run", scenario.to_str().unwrap(), "--script", script.to_str().unwrap()],
    );
    ensure(out.status.success(), || String::from_utf8_lossy(&out.stderr).into_owned())?;
    let transcript = common::stdout(&common::reliefplan(store.path(), &corpus, &["export"]));
    ensure(transcript.contains(fixtures::TWO_PLAN_REPLY), || "first reply missing".into())?;
    ensure(
        transcript.contains("USER:\nYour previous reply could not be used"),
        || "corrective turn missing from transcript".into(),
    )?;
    ensure(transcript.contains("expected 3 plans, found 2"), || "diagnostic missing".into())?;
    ensure(
        transcript.contains("Generated three candidate plans (round 1, attempt 2)."),
        || "generation did not succeed on attempt 2".into(),
    )
}

fn board_counts() -> Outcome {
    let scenario = fixtures::earthquake_scenario();
    let (plan, _) = bind_assets(&fixtures::reference_plan(ReferencePlan::Human), &scenario);
    let board = build_board(&plan, &scenario).map_err(|e| e.to_string())?;
    let assets = board.rows.iter().filter(|r| !r.cells.is_empty()).count();
    ensure(
        board.mark_count() == 5 && assets == 4 && board.tasks.len() == 4,
        || format!("{} marks, {assets} assets, {} tasks", board.mark_count(), board.tasks.len()),
    )?;
    let diff = diff_boards(&board, &board).map_err(|e| e.to_string())?;
    ensure(diff.is_empty(), || format!("self diff {diff:?}"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("golden-fixture parsing", Duration::from_secs(1), golden_parsing),
        ("parse/serialize round trip", Duration::from_secs(5), round_trip),
        ("validator findings on reference plans", Duration::from_secs(1), validator_findings),
        ("session state machine safety (10000 sequences)", Duration::from_secs(30), fsm_safety),
        ("token budget property (1000 cases)", Duration::from_secs(10), budget_property),
        ("end-to-end CLI replay", Duration::from_secs(2), end_to_end_replay),
        ("corrective retry", Duration::from_secs(10), corrective_retry),
        ("allocation board counts", Duration::from_secs(1), board_counts),
    ];
    panic::set_hook(Box::new(|_| {}));
    let total = criteria.len();
    let mut failed = 0;
    for (name, limit, check) in criteria {
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|p| Err(p.downcast_ref::<String>().cloned().unwrap_or_else(|| "panicked".into())));
        let elapsed = start.elapsed();
        let outcome = outcome.and_then(|()| {
            ensure(elapsed <= limit, || format!("took {elapsed:?}, limit {limit:?}"))
        });
        match outcome {
            Ok(()) => println!("PASS  {name}  ({} ms, limit {} ms)", elapsed.as_millis(), limit.as_millis()),
            Err(reason) => {
                failed += 1;
                println!("FAIL  {name}  ({} ms, limit {} ms): {reason}", elapsed.as_millis(), limit.as_millis());
            }
        }
    }
    println!("\nacceptance: {} passed, {failed} failed", total - failed);
    if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE }
}
