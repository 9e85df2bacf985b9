//! Asset × task allocation board and diffs between plan versions.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::binding::match_assets;
use crate::model::{AssetId, LocationId, OpsSection, PlanOfAction, Scenario};

const EXCERPT_CHARS: usize = 60;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BoardError {
    #[error("plan is not bound to the scenario (task {task})")]
    UnboundPlan { task: u32 },
    #[error("boards were built from different asset inventories")]
    InventoryMismatch,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BoardCell {
    pub task_index: u32,
    pub section: OpsSection,
    pub excerpt: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub location: Option<LocationId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BoardRow {
    pub asset_id: AssetId,
    pub label: String,
    pub cells: Vec<BoardCell>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BoardTask {
    pub index: u32,
    pub section: OpsSection,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AllocationBoard {
    /// One row per inventory asset, in scenario order.
    pub rows: Vec<BoardRow>,
    /// Task columns in plan order.
    pub tasks: Vec<BoardTask>,
    pub untasked_assets: Vec<AssetId>,
}

impl AllocationBoard {
    /// Number of (asset, task) assignments.
    pub fn mark_count(&self) -> usize {
        self.rows.iter().map(|r| r.cells.len()).sum()
    }
}

fn excerpt(text: &str) -> String {
    match text.char_indices().nth(EXCERPT_CHARS) {
        Some((cut, _)) => format!("{}…", text[..cut].trim_end()),
        None => text.to_owned(),
    }
}

pub fn build_board(plan: &PlanOfAction, scenario: &Scenario) -> Result<AllocationBoard, BoardError> {
    for (_, task) in plan.tasks() {
        let dangling = task.asset_refs.iter().any(|id| scenario.asset(id).is_none());
        let never_bound =
            task.asset_refs.is_empty() && !match_assets(&task.raw_asset_text, &scenario.assets).is_empty();
        if dangling || never_bound {
            return Err(BoardError::UnboundPlan { task: task.index });
        }
    }
    let rows: Vec<BoardRow> = scenario
        .assets
        .iter()
        .map(|asset| BoardRow {
            asset_id: asset.id.clone(),
            label: asset.label.clone(),
            cells: plan
                .tasks()
                .filter(|(_, t)| t.asset_refs.contains(&asset.id))
                .map(|(section, t)| BoardCell {
                    task_index: t.index,
                    section,
                    excerpt: excerpt(&t.description),
                    location: t.location.clone(),
                })
                .collect(),
        })
        .collect();
    let untasked_assets = rows
        .iter()
        .filter(|r| r.cells.is_empty())
        .map(|r| r.asset_id.clone())
        .collect();
    Ok(AllocationBoard {
        rows,
        tasks: plan
            .tasks()
            .map(|(section, t)| BoardTask {
                index: t.index,
                section,
            })
            .collect(),
        untasked_assets,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AssetDiff {
    pub asset_id: AssetId,
    pub added: Vec<BoardCell>,
    pub removed: Vec<BoardCell>,
}

/// Per-asset symmetric difference of cells going from `a` to `b`; assets
/// with no change are omitted.
pub fn diff_boards(a: &AllocationBoard, b: &AllocationBoard) -> Result<Vec<AssetDiff>, BoardError> {
    let ids = |board: &AllocationBoard| {
        board
            .rows
            .iter()
            .map(|r| r.asset_id.clone())
            .collect::<BTreeSet<_>>()
    };
    if ids(a) != ids(b) || a.rows.len() != b.rows.len() {
        return Err(BoardError::InventoryMismatch);
    }
    let mut out = Vec::new();
    for row_a in &a.rows {
        let row_b = b
            .rows
            .iter()
            .find(|r| r.asset_id == row_a.asset_id)
            .ok_or(BoardError::InventoryMismatch)?;
        let before: BTreeSet<&BoardCell> = row_a.cells.iter().collect();
        let after: BTreeSet<&BoardCell> = row_b.cells.iter().collect();
        let added: Vec<BoardCell> = after.difference(&before).map(|c| (*c).clone()).collect();
        let removed: Vec<BoardCell> = before.difference(&after).map(|c| (*c).clone()).collect();
        if !added.is_empty() || !removed.is_empty() {
            out.push(AssetDiff {
                asset_id: row_a.asset_id.clone(),
                added,
                removed,
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExportFormat {
    GridText,
    Structured,
}

/// Renders the board. `GridText` is a fixed-width table with one row per
/// asset and one `T<k>` column per task, `X` marking an assignment; rows of
/// untasked assets end with `(untasked)`. `Structured` is canonical JSON.
pub fn export_board(board: &AllocationBoard, format: ExportFormat) -> String {
    match format {
        ExportFormat::Structured => {
            let mut text = serde_json::to_string_pretty(board).expect("board serializes");
            text.push('\n');
            text
        }
        ExportFormat::GridText => grid_text(board),
    }
}

pub fn parse_structured(text: &str) -> Result<AllocationBoard, serde_json::Error> {
    serde_json::from_str(text)
}

fn grid_text(board: &AllocationBoard) -> String {
    let width = board
        .rows
        .iter()
        .map(|r| r.asset_id.as_str().chars().count())
        .chain(std::iter::once("ASSET".len()))
        .max()
        .unwrap_or(5);
    let headers: Vec<String> = board
        .tasks
        .iter()
        .map(|t| {
            let mark = match t.section {
                OpsSection::Main => "",
                OpsSection::Aux => "*",
            };
            format!("T{}{mark}", t.index)
        })
        .collect();
    let mut out = String::new();
    let mut line = format!("{:<width$}", "ASSET");
    for h in &headers {
        write!(line, " | {h}").unwrap();
    }
    out.push_str(line.trim_end());
    out.push('\n');
    for row in &board.rows {
        let mut line = format!("{:<width$}", row.asset_id.as_str());
        for (task, h) in board.tasks.iter().zip(&headers) {
            let mark = if row.cells.iter().any(|c| c.task_index == task.index) {
                "X"
            } else {
                ""
            };
            write!(line, " | {mark:<w$}", w = h.len()).unwrap();
        }
        if row.cells.is_empty() {
            line.push_str("  (untasked)");
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out
}
