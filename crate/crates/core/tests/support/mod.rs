//! Generators and reference models shared by property tests.
#![allow(dead_code)]

pub mod reference_plans;

use std::sync::Arc;

use proptest::prelude::*;
use proptest::sample::select;

use reliefplan_core::gateway::scripted::ScriptedBackend;
use reliefplan_core::gateway::{BackendDescriptor, BackendKind, ChatMessage, Role};
use reliefplan_core::model::{EndStates, FasJustification, PlanOfAction, Provenance, TaskAssignment};
use reliefplan_core::prompt::{KnowledgeBase, TokenBudget, TokenCounter};
use reliefplan_core::session::{EngineConfig, EngineError, Session, SessionEngine, SessionPhase};
use reliefplan_core::{Scenario, fixtures};

const WORDS: &[&str] = &[
    "clear", "secure", "the", "road", "debris", "near", "hill", "and", "rescue", "units", "medical",
    "staff", "treat", "survivors", "in", "zones", "with", "heavy", "equipment", "before", "nightfall",
    "after", "assessment", "of", "slope", "risk", "houses", "water", "supplies", "shelter", "route",
    "bridge", "convoy", "dogs", "team", "crews", "to", "from", "north", "south", "quickly", "safely",
    "restore", "access", "city", "residents", "evacuate", "stabilize", "inspect", "repair", "map",
];

fn sentence(max_words: usize) -> impl Strategy<Value = String> {
    prop::collection::vec(select(WORDS), 1..=max_words).prop_map(|words| {
        let mut s = words.join(" ");
        s[..1].make_ascii_uppercase();
        s.push('.');
        s
    })
}

fn task_body() -> impl Strategy<Value = (String, String, String)> {
    (sentence(12), sentence(8), sentence(6))
}

fn end_states() -> impl Strategy<Value = EndStates> {
    (
        prop::option::of(sentence(10)),
        prop::option::of(sentence(10)),
        prop::option::of(sentence(10)),
        prop::option::of(sentence(10)),
        prop::option::of(sentence(10)),
    )
        .prop_filter_map("at least one end state", |(a, v, c, t, o)| {
            let e = EndStates {
                assets: a,
                victims: v,
                civilians: c,
                terrain: t,
                other: o,
            };
            (!e.is_empty()).then_some(e)
        })
}

fn fas() -> impl Strategy<Value = Option<FasJustification>> {
    prop::option::of((sentence(10), sentence(10), sentence(10)).prop_map(|(f, a, s)| {
        FasJustification {
            feasible: f,
            acceptable: a,
            suitable: s,
        }
    }))
}

/// Well-formed plans with consecutive task numbering and no bindings.
pub fn plan() -> impl Strategy<Value = PlanOfAction> {
    (
        1u8..=3,
        sentence(12),
        sentence(12),
        prop::collection::vec(task_body(), 1..5),
        prop::collection::vec(task_body(), 0..4),
        end_states(),
        fas(),
    )
        .prop_map(|(ordinal, objective, critical, main, aux, end_states, fas)| {
            let mut index = 0;
            let mut to_tasks = |bodies: Vec<(String, String, String)>| {
                bodies
                    .into_iter()
                    .map(|(d, p, a)| {
                        index += 1;
                        TaskAssignment::new(index, d, p, a)
                    })
                    .collect::<Vec<_>>()
            };
            let main_ops = to_tasks(main);
            let aux_ops = to_tasks(aux);
            PlanOfAction {
                ordinal,
                objective,
                critical,
                main_ops,
                aux_ops,
                end_states,
                fas,
                provenance: Provenance::default(),
            }
        })
}

/// Histories: one system message followed by user/assistant turns.
pub fn history() -> impl Strategy<Value = Vec<ChatMessage>> {
    (
        0usize..6000,
        prop::collection::vec((any::<bool>(), 0usize..5000), 0..24),
    )
        .prop_map(|(system, turns)| {
            let mut h = vec![ChatMessage::system("s".repeat(system))];
            for (i, (assistant, len)) in turns.into_iter().enumerate() {
                // Mostly alternating, with occasional breaks in the pattern.
                let role = if assistant ^ (i % 2 == 1) { Role::User } else { Role::Assistant };
                h.push(ChatMessage {
                    role,
                    content: format!("{i}:{}", "m".repeat(len)),
                });
            }
            h
        })
}

pub fn budget() -> impl Strategy<Value = TokenBudget> {
    (select(&[4096u32, 8192][..]), select(&[256u32, 1024, 2048][..]))
        .prop_map(|(limit, reserved)| TokenBudget::new(limit, reserved).unwrap())
}

/// Checks the truncation contract for one input; returns a failure message.
pub fn check_budget(history: &[ChatMessage], budget: &TokenBudget) -> Result<(), String> {
    let counter = TokenCounter::default();
    let available = budget.available();
    let last = |role| history.iter().rposition(|m: &ChatMessage| m.role == role);
    let mut pinned = vec![0];
    pinned.extend(last(Role::Assistant));
    pinned.extend(last(Role::User));
    pinned.sort();
    pinned.dedup();
    let mandatory: usize = pinned.iter().map(|&i| counter.count(&history[i].content)).sum();

    match reliefplan_core::prompt::enforce_budget(history, budget) {
        Ok(out) => {
            if counter.count_messages(&out) > available {
                return Err("output over budget".into());
            }
            if out.first() != history.first() {
                return Err("system message dropped".into());
            }
            // Retained messages must be a subsequence containing every pinned one.
            let mut cursor = 0;
            let mut kept = Vec::new();
            for m in &out {
                let pos = history[cursor..]
                    .iter()
                    .position(|h| h == m)
                    .ok_or("output reorders or invents messages")?;
                kept.push(cursor + pos);
                cursor += pos + 1;
            }
            if pinned.iter().any(|p| !kept.contains(p)) {
                return Err("pinned message dropped".into());
            }
            if counter.count_messages(history) <= available && out.len() != history.len() {
                return Err("history under budget was truncated".into());
            }
            Ok(())
        }
        Err(reliefplan_core::PromptError::PromptTooLarge { .. }) if mandatory > available => Ok(()),
        Err(e) => Err(format!("unexpected error {e:?} (mandatory {mandatory}, available {available})")),
    }
}

pub const GARBAGE: &str = "garbage";

fn latest_request(messages: &[ChatMessage]) -> &str {
    messages
        .iter()
        .rev()
        .find(|m| {
            m.role == Role::User
                && (m.content.starts_with("Scenario description") || m.content.starts_with("Refine"))
        })
        .map(|m| m.content.as_str())
        .unwrap_or("")
}

/// Backend answering generation requests with the fixture plan set and
/// refinement requests with a revision of the named plan. Requests that
/// mention [`GARBAGE`] get an unusable reply.
pub fn fixture_backend() -> Arc<ScriptedBackend> {
    Arc::new(ScriptedBackend::with_responder(
        BackendDescriptor::new("fixture", 8192, BackendKind::Replay),
        |messages, _| {
            let request = latest_request(messages);
            if request.contains(GARBAGE) {
                return Ok("I cannot help with that.".into());
            }
            if let Some(rest) = request.strip_prefix("Refine Plan of Action ") {
                let ordinal = &rest[..1];
                return Ok(fixtures::REFINEMENT_REPLY.replacen(
                    "Plan of Action 1",
                    &format!("Plan of Action {ordinal}"),
                    1,
                ));
            }
            Ok(fixtures::GENERATION_REPLY.to_owned())
        },
    ))
}

pub fn fixture_engine() -> SessionEngine {
    SessionEngine::new(fixture_backend(), &KnowledgeBase::builtin(), EngineConfig::default()).unwrap()
}

#[derive(Debug, Clone)]
pub enum Op {
    Submit { valid: bool, garbage: bool },
    Generate,
    Select(u8),
    Refine(&'static str),
    Finalize,
}

pub fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        2 => (any::<bool>(), prop::bool::weighted(0.15))
            .prop_map(|(valid, garbage)| Op::Submit { valid: valid || garbage, garbage }),
        3 => Just(Op::Generate),
        3 => (0u8..=4).prop_map(Op::Select),
        3 => select(&["add a staging area", "", "garbage please"][..]).prop_map(Op::Refine),
        2 => Just(Op::Finalize),
    ]
}

pub fn scenario_for(valid: bool, garbage: bool) -> Scenario {
    let mut s = fixtures::earthquake_scenario();
    if !valid {
        s.problems.clear();
    }
    if garbage {
        s.narrative.push_str(" garbage");
    }
    s
}

/// Reference outcome of `op` in `phase`: `Ok(next phase)` or the error name.
pub fn expected(op: &Op, session: &Session) -> Result<SessionPhase, &'static str> {
    use SessionPhase::*;
    let phase = session.phase;
    let garbage_scenario = session
        .scenario
        .as_ref()
        .is_some_and(|s| s.narrative.contains(GARBAGE));
    match op {
        Op::Submit { .. } if phase == Finalized => Err("SessionFinalized"),
        Op::Submit { valid: false, .. } => Err("InvalidScenario"),
        Op::Submit { .. } => Ok(ScenarioCaptured),
        Op::Generate if !matches!(phase, ScenarioCaptured | PlansGenerated) => Err("WrongPhase"),
        Op::Generate if garbage_scenario => Err("GenerationFailed"),
        Op::Generate => Ok(PlansGenerated),
        Op::Select(_) if phase != PlansGenerated => Err("WrongPhase"),
        Op::Select(n) if !(1..=3).contains(n) => Err("OutOfRange"),
        Op::Select(_) => Ok(PlanSelected),
        Op::Refine(_) if !matches!(phase, PlanSelected | Refining) => Err("WrongPhase"),
        Op::Refine("") => Err("EmptyFeedback"),
        Op::Refine(f) if f.contains(GARBAGE) => Err("RefinementFailed"),
        Op::Refine(_) => Ok(Refining),
        Op::Finalize if !matches!(phase, PlanSelected | Refining) => Err("WrongPhase"),
        Op::Finalize => Ok(Finalized),
    }
}

pub fn error_name(e: &EngineError) -> &'static str {
    match e {
        EngineError::WrongPhase { .. } => "WrongPhase",
        EngineError::SessionFinalized => "SessionFinalized",
        EngineError::InvalidScenario(_) => "InvalidScenario",
        EngineError::OutOfRange(_) => "OutOfRange",
        EngineError::Prompt(reliefplan_core::PromptError::EmptyFeedback) => "EmptyFeedback",
        EngineError::Prompt(_) => "Prompt",
        EngineError::Gateway(_) => "Gateway",
        EngineError::GenerationFailed { .. } => "GenerationFailed",
        EngineError::RefinementFailed { .. } => "RefinementFailed",
    }
}

/// Applies `op` through the engine and checks it against the reference
/// model. Returns the session to continue with.
pub fn step(engine: &SessionEngine, session: &Session, op: &Op) -> Result<Session, String> {
    let before = session.clone();
    let mut log = Vec::new();
    let result = match op {
        Op::Submit { valid, garbage } => {
            engine.submit_scenario(session, scenario_for(*valid, *garbage), &mut log)
        }
        Op::Generate => engine.generate_plans(session, &mut log),
        Op::Select(n) => engine.select_plan(session, *n, &mut log),
        Op::Refine(f) => engine.refine(session, f, &mut log),
        Op::Finalize => engine.finalize(session, &mut log).map(|(s, _)| s),
    };
    if *session != before {
        return Err("input session mutated".into());
    }
    let want = expected(op, session);
    match (result, want) {
        (Ok(next), Ok(phase)) => {
            if next.phase != phase {
                return Err(format!("{op:?}: phase {} but expected {phase}", next.phase));
            }
            let broken = next.check_invariants();
            if !broken.is_empty() {
                return Err(format!("{op:?}: invariants broken: {broken:?}"));
            }
            if session.phase >= SessionPhase::ScenarioCaptured
                && next.phase != SessionPhase::ScenarioCaptured
                && next.history[0] != session.history[0]
            {
                return Err("system message changed".into());
            }
            if next.phase == SessionPhase::Refining
                && !next.revisions.starts_with(&session.revisions)
            {
                return Err("revisions not append-only".into());
            }
            Ok(next)
        }
        (Err(e), Err(name)) if error_name(&e) == name => Ok(before),
        (got, want) => Err(format!(
            "{op:?} in {}: got {:?}, expected {want:?}",
            session.phase,
            got.map(|s| s.phase).map_err(|e| error_name(&e))
        )),
    }
}
