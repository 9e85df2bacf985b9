//! The planning session state machine.
//!
//! Engine operations never mutate their input: each takes a session snapshot
//! and returns the successor, so a failed operation leaves the caller's copy
//! untouched. Transcript entries are pushed to a caller-supplied log whether
//! or not the operation succeeds.

use std::fmt;
use std::sync::Arc;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::binding::bind_assets;
use crate::gateway::{self, BackendDescriptor, ChatBackend, ChatMessage, GatewayError, GenerationParams, Role};
use crate::model::{
    DiagnosticCode, ModelError, ParseDiagnostic, PlanOfAction, PlanSet, Scenario, Span,
};
use crate::parser::{parse_plan_set, parse_revision};
use crate::prompt::{
    self, KnowledgeBase, PromptError, TokenBudget, describe_diagnostics, render_corrective_request,
    render_generation_request, render_refinement_request,
};
use crate::store::{Actor, TranscriptEntry};
use crate::validator::{GateDecision, ValidationIssue, ValidationPolicy, gate, validate};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SessionId(pub String);

impl SessionId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for SessionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SessionPhase {
    Created,
    ScenarioCaptured,
    PlansGenerated,
    PlanSelected,
    Refining,
    Finalized,
}

impl fmt::Display for SessionPhase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Validation outcome for one plan version.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct IssueRecord {
    /// Generation round the plan belongs to.
    pub round: u32,
    pub ordinal: u8,
    /// `None` for a generated candidate, `Some(k)` for the k-th refinement.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub revision: Option<u32>,
    pub issues: Vec<ValidationIssue>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Session {
    pub id: SessionId,
    pub phase: SessionPhase,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<Scenario>,
    pub history: Vec<ChatMessage>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidates: Option<PlanSet>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selected: Option<u8>,
    pub revisions: Vec<PlanOfAction>,
    pub backend: BackendDescriptor,
    pub budget: TokenBudget,
    pub issues_log: Vec<IssueRecord>,
    /// Number of successful generation rounds.
    pub round: u32,
    pub created_at: DateTime<Utc>,
}

impl Session {
    pub fn is_finalized(&self) -> bool {
        self.phase == SessionPhase::Finalized
    }

    /// The plan refinement works on: the last revision.
    pub fn current_plan(&self) -> Option<&PlanOfAction> {
        self.revisions.last()
    }

    /// Breaches of the phase-dependent structure, empty when consistent.
    pub fn check_invariants(&self) -> Vec<String> {
        use SessionPhase::*;
        let mut out = Vec::new();
        let at_least = |p: SessionPhase| self.phase >= p;
        if self.candidates.is_some() != at_least(PlansGenerated) {
            out.push(format!("candidates presence wrong in {}", self.phase));
        }
        if let Some(set) = &self.candidates
            && set.plans.len() != PlanSet::SIZE
        {
            out.push(format!("{} candidates", set.plans.len()));
        }
        if self.selected.is_some() != at_least(PlanSelected) {
            out.push(format!("selection presence wrong in {}", self.phase));
        }
        if self.selected.is_some_and(|s| !(1..=3).contains(&s)) {
            out.push("selected ordinal out of range".into());
        }
        if self.revisions.is_empty() == at_least(PlanSelected) {
            out.push(format!("revisions presence wrong in {}", self.phase));
        }
        if at_least(ScenarioCaptured) {
            if self.scenario.is_none() {
                out.push("scenario missing".into());
            }
            if self.history.first().map(|m| m.role) != Some(Role::System) {
                out.push("history does not start with the system message".into());
            }
            if self.history.iter().skip(1).any(|m| m.role == Role::System) {
                out.push("more than one system message".into());
            }
        } else if !self.history.is_empty() || self.scenario.is_some() {
            out.push("state present before scenario capture".into());
        }
        out
    }
}

/// What a finished session hands back.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FinalPlanRecord {
    pub session_id: SessionId,
    pub scenario: Scenario,
    pub final_plan: PlanOfAction,
    pub issues_log: Vec<IssueRecord>,
    pub transcript_ref: String,
    pub finalized_at: DateTime<Utc>,
}

/// Diagnostics from the last failed attempt of a generation or refinement.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FailureReport {
    pub diagnostics: Vec<ParseDiagnostic>,
    pub issues: Vec<ValidationIssue>,
}

impl FailureReport {
    fn lines(&self) -> Vec<String> {
        let mut out = describe_diagnostics(&self.diagnostics);
        out.extend(self.issues.iter().map(|i| format!("{}: {}", subject_label(i), i)));
        out
    }
}

impl fmt::Display for FailureReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.lines().join("; "))
    }
}

fn subject_label(issue: &ValidationIssue) -> String {
    use crate::validator::Subject;
    match &issue.subject {
        Subject::Plan { ordinal } => format!("plan {ordinal}"),
        Subject::Task { ordinal, index } => format!("plan {ordinal} task {index}"),
        Subject::Asset { id } => format!("asset {id}"),
        Subject::TaskAsset {
            ordinal,
            index,
            asset_id,
        } => format!("plan {ordinal} task {index} asset {asset_id}"),
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("{op} is not allowed in phase {phase}")]
    WrongPhase { op: &'static str, phase: SessionPhase },
    #[error("session is finalized")]
    SessionFinalized,
    #[error("invalid scenario: {0}")]
    InvalidScenario(#[from] ModelError),
    #[error("plan ordinal {0} is outside 1..=3")]
    OutOfRange(u8),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("generation failed after {attempts} attempt(s): {report}")]
    GenerationFailed { attempts: u32, report: FailureReport },
    #[error("refinement failed after {attempts} attempt(s): {report}")]
    RefinementFailed { attempts: u32, report: FailureReport },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EngineConfig {
    pub model_id: String,
    pub reserved_for_reply: u32,
    pub policy: ValidationPolicy,
    /// Corrective follow-ups allowed per user action.
    pub corrective_retries: u32,
    pub seed: Option<i64>,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            model_id: "gpt-4".into(),
            reserved_for_reply: TokenBudget::DEFAULT_RESERVED,
            policy: ValidationPolicy::default(),
            corrective_retries: 2,
            seed: None,
        }
    }
}

pub type Clock = Arc<dyn Fn() -> DateTime<Utc> + Send + Sync>;

pub struct SessionEngine {
    backend: Arc<dyn ChatBackend>,
    system_prompt: ChatMessage,
    config: EngineConfig,
    clock: Clock,
}

/// Accepted outcome of one backend exchange.
struct Accepted<T> {
    value: T,
    attempts: u32,
}

impl SessionEngine {
    pub fn new(
        backend: Arc<dyn ChatBackend>,
        kb: &KnowledgeBase,
        config: EngineConfig,
    ) -> Result<Self, EngineError> {
        let system_prompt = prompt::assemble_system_prompt(kb)?;
        TokenBudget::new(backend.descriptor().context_limit, config.reserved_for_reply)?;
        Ok(Self {
            backend,
            system_prompt,
            config,
            clock: Arc::new(Utc::now),
        })
    }

    pub fn with_clock(mut self, clock: Clock) -> Self {
        self.clock = clock;
        self
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn backend(&self) -> &dyn ChatBackend {
        self.backend.as_ref()
    }

    pub fn system_prompt(&self) -> &ChatMessage {
        &self.system_prompt
    }

    fn now(&self) -> DateTime<Utc> {
        (self.clock)()
    }

    fn entry(&self, phase: SessionPhase, actor: Actor, content: impl Into<String>) -> TranscriptEntry {
        TranscriptEntry {
            at: self.now(),
            actor,
            phase,
            content: content.into(),
        }
    }

    pub fn new_session(&self, id: SessionId) -> Session {
        let descriptor = self.backend.descriptor().clone();
        let budget = TokenBudget::new(descriptor.context_limit, self.config.reserved_for_reply)
            .expect("budget checked at construction");
        Session {
            id,
            phase: SessionPhase::Created,
            scenario: None,
            history: Vec::new(),
            candidates: None,
            selected: None,
            revisions: Vec::new(),
            backend: descriptor,
            budget,
            issues_log: Vec::new(),
            round: 0,
            created_at: self.now(),
        }
    }

    pub fn submit_scenario(
        &self,
        session: &Session,
        scenario: Scenario,
        log: &mut Vec<TranscriptEntry>,
    ) -> Result<Session, EngineError> {
        if session.is_finalized() {
            return Err(EngineError::SessionFinalized);
        }
        scenario.validate()?;
        let phase = SessionPhase::ScenarioCaptured;
        log.push(self.entry(phase, Actor::System, self.system_prompt.content.clone()));
        log.push(self.entry(
            phase,
            Actor::Engine,
            format!(
                "Scenario captured: {} asset(s), {} problem(s). Objective: {}",
                scenario.assets.len(),
                scenario.problems.len(),
                scenario.objective
            ),
        ));
        Ok(Session {
            phase,
            scenario: Some(scenario),
            history: vec![self.system_prompt.clone()],
            candidates: None,
            selected: None,
            revisions: Vec::new(),
            ..session.clone()
        })
    }

    pub fn generate_plans(
        &self,
        session: &Session,
        log: &mut Vec<TranscriptEntry>,
    ) -> Result<Session, EngineError> {
        if !matches!(
            session.phase,
            SessionPhase::ScenarioCaptured | SessionPhase::PlansGenerated
        ) {
            return Err(EngineError::WrongPhase {
                op: "generate",
                phase: session.phase,
            });
        }
        let scenario = session.scenario.as_ref().expect("scenario present once captured");
        let round = session.round + 1;
        let request = render_generation_request(scenario);
        let params = self.params(GenerationParams::GENERATION_TEMPERATURE, &session.budget);
        let mut pending = Vec::new();
        let outcome = self.exchange(
            session,
            request,
            &params,
            "exactly three plans of action headed \"Plan of Action 1\" to \"Plan of Action 3\"",
            &mut pending,
            log,
            &mut |_| {},
            |reply| self.accept_plan_set(reply, scenario, &session.backend.name, round),
        );
        let accepted = match outcome {
            Ok(a) => a,
            Err(Failure::Engine(e)) => return Err(self.fail(session.phase, e, log)),
            Err(Failure::Exhausted(attempts, report)) => {
                return Err(self.fail(
                    session.phase,
                    EngineError::GenerationFailed { attempts, report },
                    log,
                ));
            }
        };
        let (plans, diagnostics, issues) = accepted.value;
        let set = PlanSet::new(plans, self.now(), diagnostics).expect("three plans accepted");
        let mut next = session.clone();
        next.history.extend(pending);
        next.phase = SessionPhase::PlansGenerated;
        next.round = round;
        next.candidates = Some(set);
        next.issues_log
            .extend(issues.into_iter().enumerate().map(|(i, issues)| IssueRecord {
                round,
                ordinal: i as u8 + 1,
                revision: None,
                issues,
            }));
        log.push(self.entry(
            next.phase,
            Actor::Engine,
            format!(
                "Generated three candidate plans (round {round}, attempt {}).",
                accepted.attempts
            ),
        ));
        Ok(next)
    }

    pub fn select_plan(
        &self,
        session: &Session,
        ordinal: u8,
        log: &mut Vec<TranscriptEntry>,
    ) -> Result<Session, EngineError> {
        if session.phase != SessionPhase::PlansGenerated {
            return Err(EngineError::WrongPhase {
                op: "select",
                phase: session.phase,
            });
        }
        let candidates = session.candidates.as_ref().expect("candidates present");
        let plan = candidates.get(ordinal).ok_or(EngineError::OutOfRange(ordinal))?;
        let mut next = session.clone();
        next.selected = Some(ordinal);
        next.revisions = vec![plan.clone()];
        next.phase = SessionPhase::PlanSelected;
        log.push(self.entry(
            next.phase,
            Actor::Engine,
            format!("Plan of Action {ordinal} selected."),
        ));
        Ok(next)
    }

    pub fn refine(
        &self,
        session: &Session,
        feedback: &str,
        log: &mut Vec<TranscriptEntry>,
    ) -> Result<Session, EngineError> {
        self.refine_streaming(session, feedback, log, &mut |_| {})
    }

    /// [`refine`](Self::refine), forwarding reply text of every attempt to
    /// `on_chunk` as the backend delivers it.
    pub fn refine_streaming(
        &self,
        session: &Session,
        feedback: &str,
        log: &mut Vec<TranscriptEntry>,
        on_chunk: &mut dyn FnMut(&str),
    ) -> Result<Session, EngineError> {
        if !matches!(session.phase, SessionPhase::PlanSelected | SessionPhase::Refining) {
            return Err(EngineError::WrongPhase {
                op: "refine",
                phase: session.phase,
            });
        }
        let ordinal = session.selected.expect("selection present");
        let scenario = session.scenario.as_ref().expect("scenario present");
        let request = render_refinement_request(feedback, ordinal)?;
        let params = self.params(GenerationParams::REFINEMENT_TEMPERATURE, &session.budget);
        let mut pending = Vec::new();
        let outcome = self.exchange(
            session,
            request,
            &params,
            &format!("the complete revised plan headed \"Plan of Action {ordinal}\""),
            &mut pending,
            log,
            on_chunk,
            |reply| self.accept_revision(reply, ordinal, scenario, &session.backend.name, session.round),
        );
        let accepted = match outcome {
            Ok(a) => a,
            Err(Failure::Engine(e)) => return Err(self.fail(session.phase, e, log)),
            Err(Failure::Exhausted(attempts, report)) => {
                return Err(self.fail(
                    session.phase,
                    EngineError::RefinementFailed { attempts, report },
                    log,
                ));
            }
        };
        let (plan, issues) = accepted.value;
        let mut next = session.clone();
        next.history.extend(pending);
        next.revisions.push(plan);
        next.phase = SessionPhase::Refining;
        let revision = (next.revisions.len() - 1) as u32;
        next.issues_log.push(IssueRecord {
            round: session.round,
            ordinal,
            revision: Some(revision),
            issues,
        });
        log.push(self.entry(
            next.phase,
            Actor::Engine,
            format!("Revision {revision} of Plan of Action {ordinal} accepted (attempt {}).", accepted.attempts),
        ));
        Ok(next)
    }

    pub fn finalize(
        &self,
        session: &Session,
        log: &mut Vec<TranscriptEntry>,
    ) -> Result<(Session, FinalPlanRecord), EngineError> {
        if !matches!(session.phase, SessionPhase::PlanSelected | SessionPhase::Refining) {
            return Err(EngineError::WrongPhase {
                op: "finalize",
                phase: session.phase,
            });
        }
        let mut next = session.clone();
        next.phase = SessionPhase::Finalized;
        let record = FinalPlanRecord {
            session_id: session.id.clone(),
            scenario: session.scenario.clone().expect("scenario present"),
            final_plan: session.current_plan().expect("revision present").clone(),
            issues_log: session.issues_log.clone(),
            transcript_ref: session.id.to_string(),
            finalized_at: self.now(),
        };
        log.push(self.entry(
            next.phase,
            Actor::Engine,
            format!(
                "Session finalized with Plan of Action {} after {} revision(s).",
                record.final_plan.ordinal,
                session.revisions.len() - 1
            ),
        ));
        Ok((next, record))
    }

    fn params(&self, temperature: f64, budget: &TokenBudget) -> GenerationParams {
        GenerationParams {
            seed: self.config.seed,
            ..GenerationParams::new(self.config.model_id.clone(), temperature, budget.reserved_for_reply)
        }
    }

    fn fail(&self, phase: SessionPhase, error: EngineError, log: &mut Vec<TranscriptEntry>) -> EngineError {
        log.push(self.entry(phase, Actor::Engine, format!("Operation failed: {error}")));
        error
    }

    /// Sends `request` (plus corrective follow-ups) until `accept` takes a
    /// reply or the retry budget runs out. Every message exchanged is pushed
    /// to `pending` and logged.
    #[allow(clippy::too_many_arguments)]
    fn exchange<T>(
        &self,
        session: &Session,
        request: ChatMessage,
        params: &GenerationParams,
        expectation: &str,
        pending: &mut Vec<ChatMessage>,
        log: &mut Vec<TranscriptEntry>,
        on_chunk: &mut dyn FnMut(&str),
        mut accept: impl FnMut(&str) -> Result<T, FailureReport>,
    ) -> Result<Accepted<T>, Failure> {
        let attempts = self.config.corrective_retries + 1;
        let counter = session.backend.token_counter;
        let mut next_request = request;
        let mut report = FailureReport::default();
        for attempt in 1..=attempts {
            log.push(self.entry(session.phase, Actor::User, next_request.content.clone()));
            pending.push(next_request);
            let mut context = session.history.clone();
            context.extend(pending.iter().cloned());
            let context = prompt::enforce_budget_with(&context, &session.budget, counter)
                .map_err(|e| Failure::Engine(e.into()))?;
            let reply = gateway::complete_streaming(&context, params, self.backend.as_ref(), on_chunk)
                .map_err(|e| Failure::Engine(e.into()))?;
            log.push(self.entry(session.phase, Actor::Assistant, reply.content.clone()));
            let text = reply.content.clone();
            pending.push(reply);
            match accept(&text) {
                Ok(value) => return Ok(Accepted { value, attempts: attempt }),
                Err(r) => report = r,
            }
            next_request = render_corrective_request(&report.lines(), expectation);
        }
        Err(Failure::Exhausted(attempts, report))
    }

    #[allow(clippy::type_complexity)]
    fn accept_plan_set(
        &self,
        reply: &str,
        scenario: &Scenario,
        backend: &str,
        round: u32,
    ) -> Result<(Vec<PlanOfAction>, Vec<ParseDiagnostic>, Vec<Vec<ValidationIssue>>), FailureReport> {
        let parsed = parse_plan_set(reply, PlanSet::SIZE).map_err(|e| FailureReport {
            diagnostics: vec![ParseDiagnostic::error(
                DiagnosticCode::PlanCountMismatch,
                Span::new(0, reply.len()),
                e.to_string(),
            )],
            issues: Vec::new(),
        })?;
        if parsed.has_errors() || parsed.plans.len() != PlanSet::SIZE {
            return Err(FailureReport {
                diagnostics: parsed.diagnostics,
                issues: Vec::new(),
            });
        }
        let mut diagnostics = parsed.diagnostics;
        let mut plans = Vec::with_capacity(PlanSet::SIZE);
        let mut all_issues = Vec::with_capacity(PlanSet::SIZE);
        let mut rejected = Vec::new();
        for plan in parsed.plans {
            let (mut plan, diags) = bind_assets(&plan, scenario);
            diagnostics.extend(diags);
            plan.provenance.backend = backend.to_owned();
            plan.provenance.round = round;
            let issues = validate(&plan, scenario, &self.config.policy);
            if let GateDecision::Reject(reasons) = gate(&issues, self.config.policy.max_severity_allowed) {
                rejected.extend(reasons);
            }
            plans.push(plan);
            all_issues.push(issues);
        }
        if !rejected.is_empty() {
            return Err(FailureReport {
                diagnostics: Vec::new(),
                issues: rejected,
            });
        }
        Ok((plans, diagnostics, all_issues))
    }

    fn accept_revision(
        &self,
        reply: &str,
        ordinal: u8,
        scenario: &Scenario,
        backend: &str,
        round: u32,
    ) -> Result<(PlanOfAction, Vec<ValidationIssue>), FailureReport> {
        let (plan, diagnostics) = parse_revision(reply, ordinal);
        let Some(plan) = plan else {
            return Err(FailureReport {
                diagnostics,
                issues: Vec::new(),
            });
        };
        let (mut plan, _) = bind_assets(&plan, scenario);
        plan.provenance.backend = backend.to_owned();
        plan.provenance.round = round;
        let issues = validate(&plan, scenario, &self.config.policy);
        match gate(&issues, self.config.policy.max_severity_allowed) {
            GateDecision::Accept => Ok((plan, issues)),
            GateDecision::Reject(reasons) => Err(FailureReport {
                diagnostics: Vec::new(),
                issues: reasons,
            }),
        }
    }
}

enum Failure {
    Engine(EngineError),
    Exhausted(u32, FailureReport),
}
