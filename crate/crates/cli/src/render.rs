//! Plain-text rendering of command results.

use std::fmt::Write;

use reliefplan_core::{
    AssetDiff, BoardView, ExportFormat, IssueRecord, PlanSet, Session, export_board, serialize_plan,
    serialize_plan_set,
};

pub fn issues(records: &[IssueRecord]) -> String {
    let mut out = String::new();
    let total: usize = records.iter().map(|r| r.issues.len()).sum();
    if total == 0 {
        out.push_str("Validation issues: none\n");
        return out;
    }
    out.push_str("Validation issues:\n");
    for record in records {
        for issue in &record.issues {
            let _ = writeln!(out, "  Plan {}: {issue}", record.ordinal);
        }
    }
    out
}

pub fn plan_set(set: &PlanSet, records: &[IssueRecord]) -> String {
    format!("{}\n{}", serialize_plan_set(&set.plans), issues(records))
}

pub fn diff(entries: &[AssetDiff], from: usize) -> String {
    let mut out = format!("Board changes from version {from}:\n");
    if entries.is_empty() {
        out.push_str("  (none)\n");
    }
    for d in entries {
        let marks = |cells: &[reliefplan_core::board::BoardCell], sign: char| {
            cells.iter().map(|c| format!("{sign}T{}", c.task_index)).collect::<Vec<_>>()
        };
        let mut changes = marks(&d.added, '+');
        changes.extend(marks(&d.removed, '-'));
        let _ = writeln!(out, "  {}: {}", d.asset_id, changes.join(" "));
    }
    out
}

pub fn board(view: &BoardView) -> String {
    let mut out = match view.version {
        Some(v) => format!("Board for Plan of Action {} (version {v})\n", view.plan_ordinal),
        None => format!("Board for Plan of Action {}\n", view.plan_ordinal),
    };
    out.push_str(&export_board(&view.board, ExportFormat::GridText));
    if let (Some(entries), Some(v)) = (&view.diff, view.version) {
        out.push_str(&diff(entries, v - 1));
    }
    out
}

pub fn session(s: &Session) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "Session: {}", s.id);
    let _ = writeln!(out, "Phase: {}", s.phase);
    let _ = writeln!(out, "Backend: {} (context limit {})", s.backend.name, s.backend.context_limit);
    if let Some(scenario) = &s.scenario {
        let _ = writeln!(out, "Objective: {}", scenario.objective);
    }
    let _ = writeln!(out, "Round: {}", s.round);
    if let Some(n) = s.selected {
        let _ = writeln!(out, "Selected: Plan of Action {n}");
        let _ = writeln!(out, "Revisions: {}", s.revisions.len().saturating_sub(1));
    }
    if let Some(plan) = s.current_plan() {
        out.push('\n');
        out.push_str(&serialize_plan(plan));
    } else if let Some(set) = &s.candidates {
        out.push('\n');
        out.push_str(&serialize_plan_set(&set.plans));
    }
    out
}
