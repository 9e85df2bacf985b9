//! System prompt assembly, user-turn rendering and context budgeting.

mod budget;
mod kb;

pub use budget::{TokenBudget, TokenCounter, enforce_budget, enforce_budget_with};
pub use kb::{FORMAT_FILE, GuidelineDoc, KnowledgeBase, MANIFEST_FILE};

use std::fmt::Write as _;

use thiserror::Error;

use crate::gateway::ChatMessage;
use crate::model::{ParseDiagnostic, Scenario};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PromptError {
    #[error("knowledge base has neither guideline documents nor a format specification")]
    EmptyKnowledgeBase,
    #[error("knowledge base: {0}")]
    KnowledgeBase(String),
    #[error("refinement feedback is empty")]
    EmptyFeedback,
    #[error("prompt needs {required} tokens but only {available} are available")]
    PromptTooLarge { required: usize, available: usize },
    #[error("history must start with exactly one system message")]
    MissingSystemMessage,
    #[error("invalid budget: reserve {reserved_for_reply} of a {context_limit}-token context")]
    InvalidBudget {
        context_limit: u32,
        reserved_for_reply: u32,
    },
}

const ROLE_PREAMBLE: &str = "\
You are a disaster response planning assistant. You help emergency managers \
turn a scenario description into plans of action they can brief and execute.

When the user gives you a scenario you reply with exactly three distinct plans \
of action. Each plan states its objective, what is critical to it, its main and \
auxiliary operations (every task with its purpose and the assets performing it), \
the end states for assets, victims, civilians and terrain, and why the plan is \
feasible, acceptable and suitable. The user will then pick one plan and ask you \
to refine it; each time you reply with the complete revised plan.

Base your plans on the planning guidance below.";

/// The system message: role preamble, guideline docs by ascending priority,
/// then the output format.
pub fn assemble_system_prompt(kb: &KnowledgeBase) -> Result<ChatMessage, PromptError> {
    if kb.docs.is_empty() && kb.format_spec.trim().is_empty() {
        return Err(PromptError::EmptyKnowledgeBase);
    }
    let mut docs: Vec<_> = kb.docs.iter().collect();
    docs.sort_by_key(|d| d.priority);

    let mut out = String::from(ROLE_PREAMBLE);
    for doc in docs {
        write!(out, "\n\n## {}\n{}", doc.title, doc.body.trim()).expect("write to string");
    }
    if !kb.format_spec.trim().is_empty() {
        write!(out, "\n\n## Output format\n{}", kb.format_spec.trim()).expect("write to string");
    }
    Ok(ChatMessage::system(out))
}

/// The user turn that hands the scenario over and asks for three plans.
pub fn render_generation_request(scenario: &Scenario) -> ChatMessage {
    let mut out = String::new();
    writeln!(out, "Scenario description:\n{}\n", scenario.narrative.trim()).unwrap();
    writeln!(out, "Main objective:\n{}\n", scenario.objective.trim()).unwrap();
    writeln!(out, "Available assets:").unwrap();
    for asset in &scenario.assets {
        writeln!(out, "- {} x {}", asset.quantity, asset.label.trim()).unwrap();
    }
    writeln!(out, "\nMain problems to be addressed:").unwrap();
    for problem in &scenario.problems {
        writeln!(out, "- {}", problem.trim()).unwrap();
    }
    if !scenario.locations.is_empty() {
        writeln!(out, "\nAffected locations:").unwrap();
        for loc in &scenario.locations {
            writeln!(out, "- {}", loc.label.trim()).unwrap();
        }
    }
    write!(
        out,
        "\nDevelop exactly three plans of action for this scenario. Head them \
         \"Plan of Action 1\", \"Plan of Action 2\" and \"Plan of Action 3\" and follow \
         the output format exactly, including feasibility, acceptability and \
         suitability for each plan."
    )
    .unwrap();
    ChatMessage::user(out)
}

/// The user turn asking for a revision of the selected plan.
pub fn render_refinement_request(
    feedback: &str,
    selected_ordinal: u8,
) -> Result<ChatMessage, PromptError> {
    if feedback.trim().is_empty() {
        return Err(PromptError::EmptyFeedback);
    }
    Ok(ChatMessage::user(format!(
        "Refine Plan of Action {selected_ordinal} according to this feedback:\n\
         \"\"\"\n{feedback}\n\"\"\"\n\
         Reply with the complete revised plan, headed \"Plan of Action {selected_ordinal}\", \
         in the output format."
    )))
}

/// Follow-up sent when a reply could not be used, quoting what was wrong.
pub fn render_corrective_request(
    diagnostics: &[String],
    expectation: &str,
) -> ChatMessage {
    let mut out = String::from("Your previous reply could not be used:\n");
    for d in diagnostics {
        writeln!(out, "- {d}").unwrap();
    }
    write!(
        out,
        "Reply again with {expectation}, using the labels of the output format verbatim."
    )
    .unwrap();
    ChatMessage::user(out)
}

/// Diagnostic lines suitable for [`render_corrective_request`].
pub fn describe_diagnostics(diagnostics: &[ParseDiagnostic]) -> Vec<String> {
    diagnostics
        .iter()
        .filter(|d| d.is_error())
        .map(|d| format!("{:?}: {}", d.code, d.message))
        .collect()
}
