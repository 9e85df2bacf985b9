//! Shipped example data: the landslide-earthquake scenario and four reference
//! plans (one human-authored, three model-generated) for the same scenario.

use crate::model::{PlanOfAction, Scenario};
use crate::parser;

pub const EARTHQUAKE_SCENARIO_JSON: &str = include_str!("../fixtures/earthquake_scenario.json");

pub fn earthquake_scenario() -> Scenario {
    serde_json::from_str(EARTHQUAKE_SCENARIO_JSON).expect("bundled scenario is well formed")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ReferencePlan {
    Human,
    Gpt4,
    Gpt35,
    Bard,
}

impl ReferencePlan {
    pub const ALL: [ReferencePlan; 4] = [
        ReferencePlan::Human,
        ReferencePlan::Gpt4,
        ReferencePlan::Gpt35,
        ReferencePlan::Bard,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ReferencePlan::Human => "human",
            ReferencePlan::Gpt4 => "gpt-4",
            ReferencePlan::Gpt35 => "gpt-3.5-turbo",
            ReferencePlan::Bard => "bard",
        }
    }

    pub fn text(self) -> &'static str {
        match self {
            ReferencePlan::Human => include_str!("../fixtures/reference_plans/human.txt"),
            ReferencePlan::Gpt4 => include_str!("../fixtures/reference_plans/gpt4.txt"),
            ReferencePlan::Gpt35 => include_str!("../fixtures/reference_plans/gpt35.txt"),
            ReferencePlan::Bard => include_str!("../fixtures/reference_plans/bard.txt"),
        }
    }
}

/// Parsed reference plan, with provenance naming the column.
pub fn reference_plan(column: ReferencePlan) -> PlanOfAction {
    let (mut plan, diagnostics) = parser::parse_plan(column.text());
    assert!(
        diagnostics.iter().all(|d| !d.is_error()),
        "{column:?} fixture has parse errors: {diagnostics:?}"
    );
    plan.provenance.backend = column.name().to_owned();
    plan
}

/// Three-plan reply to the earthquake scenario: the GPT-4, GPT-3.5 and
/// human plans in the canonical layout, each with FAS statements.
pub const GENERATION_REPLY: &str = include_str!("../fixtures/replies/generation.txt");
/// The first two plans of [`GENERATION_REPLY`] only.
pub const TWO_PLAN_REPLY: &str = include_str!("../fixtures/replies/two_plans.txt");
/// Revision of plan 1 answering [`REFINEMENT_FEEDBACK`].
pub const REFINEMENT_REPLY: &str = include_str!("../fixtures/replies/refinement.txt");
pub const REFINEMENT_FEEDBACK: &str = "also search houses beyond the blockage";

/// Recorded exchanges for scenario → generate → select 1 → refine.
pub fn replay_corpus_dir() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/replay/earthquake")
}

/// Recorded exchanges for a generation that needs one corrective retry.
pub fn retry_corpus_dir() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/replay/retry")
}

/// [`REFINEMENT_REPLY`] parsed and bound to the earthquake scenario, with
/// provenance cleared.
pub fn refined_plan() -> PlanOfAction {
    let (plan, _) = parser::parse_revision(REFINEMENT_REPLY, 1);
    let plan = plan.expect("bundled revision parses");
    crate::binding::bind_assets(&plan, &earthquake_scenario()).0.without_provenance()
}
