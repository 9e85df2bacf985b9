//! Structural and scenario-consistency checks over parsed plans.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::binding::requested_quantity;
use crate::model::{AssetId, PlanOfAction, Scenario, Severity};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Rule {
    IncompletePlan,
    #[serde(rename = "MissingFAS")]
    MissingFas,
    UnknownAsset,
    AssetOverQuantity,
    AssetReuseAcrossTasks,
    UnassignedAsset,
    EmptyPurpose,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum Subject {
    Plan {
        ordinal: u8,
    },
    Task {
        ordinal: u8,
        index: u32,
    },
    Asset {
        id: AssetId,
    },
    #[serde(rename_all = "camelCase")]
    TaskAsset {
        ordinal: u8,
        index: u32,
        asset_id: AssetId,
    },
}

impl Subject {
    fn sort_key(&self) -> (u32, Option<&AssetId>) {
        match self {
            Subject::Plan { .. } => (0, None),
            Subject::Task { index, .. } => (*index, None),
            Subject::Asset { id } => (0, Some(id)),
            Subject::TaskAsset {
                index, asset_id, ..
            } => (*index, Some(asset_id)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationIssue {
    pub severity: Severity,
    pub rule: Rule,
    pub subject: Subject,
    pub message: String,
}

impl fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {:?}: {}", self.severity, self.rule, self.message)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ValidationPolicy {
    pub require_fas: bool,
    /// Highest severity a plan may carry and still be accepted.
    pub max_severity_allowed: Severity,
}

impl Default for ValidationPolicy {
    fn default() -> Self {
        Self {
            require_fas: true,
            max_severity_allowed: Severity::Warning,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "decision", content = "reasons", rename_all = "lowercase")]
pub enum GateDecision {
    Accept,
    Reject(Vec<ValidationIssue>),
}

impl GateDecision {
    pub fn is_accept(&self) -> bool {
        matches!(self, GateDecision::Accept)
    }
}

fn sort_issues(issues: &mut [ValidationIssue]) {
    issues.sort_by(|a, b| {
        (a.rule, a.subject.sort_key()).cmp(&(b.rule, b.subject.sort_key()))
    });
}

pub fn validate_structure(plan: &PlanOfAction, require_fas: bool) -> Vec<ValidationIssue> {
    let ordinal = plan.ordinal;
    let mut issues = Vec::new();
    let mut incomplete = |item: &str| {
        issues.push(ValidationIssue {
            severity: Severity::Error,
            rule: Rule::IncompletePlan,
            subject: Subject::Plan { ordinal },
            message: format!("plan {ordinal} is missing {item}"),
        })
    };
    if plan.objective.trim().is_empty() {
        incomplete("its objective");
    }
    if plan.critical.trim().is_empty() {
        incomplete("what is critical to the objective");
    }
    if plan.main_ops.is_empty() {
        incomplete("main operations");
    }
    if plan.end_states.is_empty() {
        incomplete("end states");
    }
    let fas_ok = plan.fas.as_ref().is_some_and(|f| f.is_complete());
    if !fas_ok {
        issues.push(ValidationIssue {
            severity: if require_fas {
                Severity::Error
            } else {
                Severity::Warning
            },
            rule: Rule::MissingFas,
            subject: Subject::Plan { ordinal },
            message: match &plan.fas {
                None => format!("plan {ordinal} has no feasibility/acceptability/suitability justification"),
                Some(_) => format!("plan {ordinal} has an incomplete feasibility/acceptability/suitability justification"),
            },
        });
    }
    for (_, task) in plan.tasks() {
        if task.description.trim().is_empty() {
            issues.push(ValidationIssue {
                severity: Severity::Error,
                rule: Rule::IncompletePlan,
                subject: Subject::Task {
                    ordinal,
                    index: task.index,
                },
                message: format!("task {} has no description", task.index),
            });
        }
        if task.purpose.trim().is_empty() {
            issues.push(ValidationIssue {
                severity: Severity::Error,
                rule: Rule::EmptyPurpose,
                subject: Subject::Task {
                    ordinal,
                    index: task.index,
                },
                message: format!("task {} has no purpose", task.index),
            });
        }
    }
    sort_issues(&mut issues);
    issues
}

/// Checks a bound plan against the scenario inventory.
pub fn validate_assets(plan: &PlanOfAction, scenario: &Scenario) -> Vec<ValidationIssue> {
    let ordinal = plan.ordinal;
    let mut issues = Vec::new();
    let mut tasks_per_asset: BTreeMap<&AssetId, Vec<u32>> = BTreeMap::new();

    for (_, task) in plan.tasks() {
        if task.asset_refs.is_empty() {
            issues.push(ValidationIssue {
                severity: Severity::Error,
                rule: Rule::UnknownAsset,
                subject: Subject::Task {
                    ordinal,
                    index: task.index,
                },
                message: format!(
                    "task {}: {:?} does not name an inventory asset",
                    task.index, task.raw_asset_text
                ),
            });
        }
        for id in &task.asset_refs {
            let Some(asset) = scenario.asset(id) else {
                issues.push(ValidationIssue {
                    severity: Severity::Error,
                    rule: Rule::UnknownAsset,
                    subject: Subject::TaskAsset {
                        ordinal,
                        index: task.index,
                        asset_id: id.clone(),
                    },
                    message: format!("task {} references unknown asset `{id}`", task.index),
                });
                continue;
            };
            let entry = tasks_per_asset.entry(id).or_default();
            if !entry.contains(&task.index) {
                entry.push(task.index);
            }
            if let Some(wanted) = requested_quantity(&task.raw_asset_text, asset)
                && wanted > asset.quantity
            {
                issues.push(ValidationIssue {
                    severity: Severity::Warning,
                    rule: Rule::AssetOverQuantity,
                    subject: Subject::TaskAsset {
                        ordinal,
                        index: task.index,
                        asset_id: id.clone(),
                    },
                    message: format!(
                        "task {} asks for {wanted} x {} but the inventory holds {}",
                        task.index, asset.label, asset.quantity
                    ),
                });
            }
        }
    }

    for (id, tasks) in &tasks_per_asset {
        if tasks.len() >= 2 {
            let list = tasks
                .iter()
                .map(|t| t.to_string())
                .collect::<Vec<_>>()
                .join(", ");
            issues.push(ValidationIssue {
                severity: Severity::Warning,
                rule: Rule::AssetReuseAcrossTasks,
                subject: Subject::Asset { id: (*id).clone() },
                message: format!(
                    "`{id}` is assigned to tasks {list}; the tasks are implied to run sequentially"
                ),
            });
        }
    }
    for asset in &scenario.assets {
        if !tasks_per_asset.contains_key(&asset.id) {
            issues.push(ValidationIssue {
                severity: Severity::Info,
                rule: Rule::UnassignedAsset,
                subject: Subject::Asset {
                    id: asset.id.clone(),
                },
                message: format!("`{}` is not assigned to any task", asset.id),
            });
        }
    }
    sort_issues(&mut issues);
    issues
}

/// Both rule sets for one plan, in stable order.
pub fn validate(
    plan: &PlanOfAction,
    scenario: &Scenario,
    policy: &ValidationPolicy,
) -> Vec<ValidationIssue> {
    let mut issues = validate_structure(plan, policy.require_fas);
    issues.extend(validate_assets(plan, scenario));
    sort_issues(&mut issues);
    issues
}

/// Rejects when any issue is more severe than `max_severity_allowed`.
pub fn gate(issues: &[ValidationIssue], max_severity_allowed: Severity) -> GateDecision {
    let violating: Vec<ValidationIssue> = issues
        .iter()
        .filter(|i| i.severity > max_severity_allowed)
        .cloned()
        .collect();
    if violating.is_empty() {
        GateDecision::Accept
    } else {
        GateDecision::Reject(violating)
    }
}
