//! Domain types shared by every stage of the pipeline.
//!
//! Everything here is a plain value: no I/O, no interior mutability. The
//! serde representation (camelCase JSON) is the canonical persistence format
//! used by the store, the CLI's `--structured` mode and the HTTP API.

use std::collections::HashSet;
use std::fmt;
use std::ops::Range;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

macro_rules! id_newtype {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl $name {
            pub fn new(id: impl Into<String>) -> Self {
                Self(id.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_owned())
            }
        }
    };
}

id_newtype!(
    /// Identifier of an inventory asset, unique within a scenario.
    AssetId
);
id_newtype!(
    /// Identifier of a named area in the scenario.
    LocationId
);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AssetCategory {
    Engineering,
    SearchRescue,
    Medical,
    Geotechnical,
    Other,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Asset {
    pub id: AssetId,
    pub label: String,
    pub category: AssetCategory,
    pub quantity: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notes: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Location {
    pub id: LocationId,
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notes: Option<String>,
}

/// The operator-supplied description of a disaster response situation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Scenario {
    pub narrative: String,
    pub objective: String,
    pub assets: Vec<Asset>,
    pub problems: Vec<String>,
    #[serde(default)]
    pub locations: Vec<Location>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("scenario narrative is empty")]
    EmptyNarrative,
    #[error("scenario objective is empty")]
    EmptyObjective,
    #[error("scenario lists no assets")]
    NoAssets,
    #[error("scenario lists no problems")]
    NoProblems,
    #[error("problem {0} is blank")]
    BlankProblem(usize),
    #[error("duplicate asset id `{0}`")]
    DuplicateAsset(AssetId),
    #[error("asset `{0}` has an empty label")]
    EmptyAssetLabel(AssetId),
    #[error("asset `{0}` has quantity 0")]
    ZeroQuantity(AssetId),
    #[error("duplicate location id `{0}`")]
    DuplicateLocation(LocationId),
    #[error("location `{0}` has an empty label")]
    EmptyLocationLabel(LocationId),
    #[error("plan set must hold exactly 3 plans, got {0}")]
    PlanSetSize(usize),
}

impl Scenario {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.narrative.trim().is_empty() {
            return Err(ModelError::EmptyNarrative);
        }
        if self.objective.trim().is_empty() {
            return Err(ModelError::EmptyObjective);
        }
        if self.assets.is_empty() {
            return Err(ModelError::NoAssets);
        }
        if self.problems.is_empty() {
            return Err(ModelError::NoProblems);
        }
        if let Some(i) = self.problems.iter().position(|p| p.trim().is_empty()) {
            return Err(ModelError::BlankProblem(i));
        }
        let mut seen = HashSet::new();
        for asset in &self.assets {
            if !seen.insert(&asset.id) {
                return Err(ModelError::DuplicateAsset(asset.id.clone()));
            }
            if asset.label.trim().is_empty() {
                return Err(ModelError::EmptyAssetLabel(asset.id.clone()));
            }
            if asset.quantity == 0 {
                return Err(ModelError::ZeroQuantity(asset.id.clone()));
            }
        }
        let mut seen = HashSet::new();
        for loc in &self.locations {
            if !seen.insert(&loc.id) {
                return Err(ModelError::DuplicateLocation(loc.id.clone()));
            }
            if loc.label.trim().is_empty() {
                return Err(ModelError::EmptyLocationLabel(loc.id.clone()));
            }
        }
        Ok(())
    }

    pub fn asset(&self, id: &AssetId) -> Option<&Asset> {
        self.assets.iter().find(|a| &a.id == id)
    }

    pub fn asset_ids(&self) -> Vec<AssetId> {
        self.assets.iter().map(|a| a.id.clone()).collect()
    }
}

/// One "Task k / Purpose k / Assets performing task" triple.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TaskAssignment {
    pub index: u32,
    pub description: String,
    pub purpose: String,
    #[serde(default)]
    pub asset_refs: Vec<AssetId>,
    #[serde(default)]
    pub raw_asset_text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub location: Option<LocationId>,
}

impl TaskAssignment {
    pub fn new(
        index: u32,
        description: impl Into<String>,
        purpose: impl Into<String>,
        raw_asset_text: impl Into<String>,
    ) -> Self {
        Self {
            index,
            description: description.into(),
            purpose: purpose.into(),
            asset_refs: Vec::new(),
            raw_asset_text: raw_asset_text.into(),
            location: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EndStates {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub assets: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub victims: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub civilians: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub terrain: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub other: Option<String>,
}

impl EndStates {
    pub fn is_empty(&self) -> bool {
        [
            &self.assets,
            &self.victims,
            &self.civilians,
            &self.terrain,
            &self.other,
        ]
        .iter()
        .all(|f| f.as_deref().is_none_or(|s| s.trim().is_empty()))
    }
}

/// Feasible / acceptable / suitable justification of a plan.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FasJustification {
    pub feasible: String,
    pub acceptable: String,
    pub suitable: String,
}

impl FasJustification {
    pub fn is_complete(&self) -> bool {
        !self.feasible.trim().is_empty()
            && !self.acceptable.trim().is_empty()
            && !self.suitable.trim().is_empty()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Provenance {
    pub backend: String,
    pub round: u32,
    pub source: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OpsSection {
    Main,
    Aux,
}

impl fmt::Display for OpsSection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OpsSection::Main => "main",
            OpsSection::Aux => "aux",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PlanOfAction {
    pub ordinal: u8,
    pub objective: String,
    pub critical: String,
    pub main_ops: Vec<TaskAssignment>,
    #[serde(default)]
    pub aux_ops: Vec<TaskAssignment>,
    pub end_states: EndStates,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fas: Option<FasJustification>,
    #[serde(default)]
    pub provenance: Provenance,
}

impl PlanOfAction {
    /// Main operations followed by auxiliary ones, tagged with their section.
    pub fn tasks(&self) -> impl Iterator<Item = (OpsSection, &TaskAssignment)> {
        self.main_ops
            .iter()
            .map(|t| (OpsSection::Main, t))
            .chain(self.aux_ops.iter().map(|t| (OpsSection::Aux, t)))
    }

    pub fn tasks_mut(&mut self) -> impl Iterator<Item = &mut TaskAssignment> {
        self.main_ops.iter_mut().chain(self.aux_ops.iter_mut())
    }

    pub fn task(&self, index: u32) -> Option<(OpsSection, &TaskAssignment)> {
        self.tasks().find(|(_, t)| t.index == index)
    }

    /// Type-level invariant breaches, empty when the plan is well formed.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(1..=3).contains(&self.ordinal) {
            out.push(format!("ordinal {} outside 1..=3", self.ordinal));
        }
        if self.objective.trim().is_empty() {
            out.push("objective is empty".into());
        }
        if self.critical.trim().is_empty() {
            out.push("critical factors are empty".into());
        }
        if self.main_ops.is_empty() {
            out.push("no main operations".into());
        }
        if self.end_states.is_empty() {
            out.push("end states are empty".into());
        }
        if let Some(fas) = &self.fas
            && !fas.is_complete()
        {
            out.push("FAS justification is incomplete".into());
        }
        let mut last = 0;
        for (_, task) in self.tasks() {
            if task.index == 0 {
                out.push("task index 0".into());
            } else if task.index <= last {
                out.push(format!("task index {} not increasing", task.index));
            }
            last = task.index;
            if task.description.trim().is_empty() {
                out.push(format!("task {} has no description", task.index));
            }
            if task.purpose.trim().is_empty() {
                out.push(format!("task {} has no purpose", task.index));
            }
        }
        out
    }

    /// A copy with provenance cleared, for comparisons that ignore origin.
    pub fn without_provenance(&self) -> Self {
        Self {
            provenance: Provenance::default(),
            ..self.clone()
        }
    }
}

/// Exactly three candidate plans from one generation round.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PlanSet {
    pub plans: Vec<PlanOfAction>,
    pub generated_at: DateTime<Utc>,
    #[serde(default)]
    pub diagnostics: Vec<ParseDiagnostic>,
}

impl PlanSet {
    pub const SIZE: usize = 3;

    pub fn new(
        plans: Vec<PlanOfAction>,
        generated_at: DateTime<Utc>,
        diagnostics: Vec<ParseDiagnostic>,
    ) -> Result<Self, ModelError> {
        if plans.len() != Self::SIZE {
            return Err(ModelError::PlanSetSize(plans.len()));
        }
        Ok(Self {
            plans,
            generated_at,
            diagnostics,
        })
    }

    pub fn get(&self, ordinal: u8) -> Option<&PlanOfAction> {
        (ordinal as usize)
            .checked_sub(1)
            .and_then(|i| self.plans.get(i))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Info,
    Warning,
    Error,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Info => "info",
            Severity::Warning => "warning",
            Severity::Error => "error",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DiagnosticCode {
    MissingObjective,
    MissingCritical,
    MissingMainOps,
    MissingEndStates,
    TaskWithoutPurpose,
    PurposeWithoutTask,
    UnresolvedAsset,
    PlanCountMismatch,
    UnrecognizedSection,
    TaskResequenced,
}

/// Byte range into the text a diagnostic refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Self { start, end }
    }

    pub fn range(&self) -> Range<usize> {
        self.start..self.end
    }
}

impl From<Range<usize>> for Span {
    fn from(r: Range<usize>) -> Self {
        Self::new(r.start, r.end)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ParseDiagnostic {
    pub severity: Severity,
    pub code: DiagnosticCode,
    pub span: Span,
    pub message: String,
}

impl ParseDiagnostic {
    pub fn error(code: DiagnosticCode, span: impl Into<Span>, message: impl Into<String>) -> Self {
        Self {
            severity: Severity::Error,
            code,
            span: span.into(),
            message: message.into(),
        }
    }

    pub fn warning(
        code: DiagnosticCode,
        span: impl Into<Span>,
        message: impl Into<String>,
    ) -> Self {
        Self {
            severity: Severity::Warning,
            code,
            span: span.into(),
            message: message.into(),
        }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

impl fmt::Display for ParseDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {:?} [{}..{}]: {}",
            self.severity, self.code, self.span.start, self.span.end, self.message
        )
    }
}
