//! Engine plus store: loads a session, runs one operation, persists the
//! result and its transcript entries. Operations on one session are
//! serialized; distinct sessions proceed in parallel.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::board::{AllocationBoard, AssetDiff, BoardError, build_board, diff_boards};
use crate::gateway::GatewayError;
use crate::model::{PlanOfAction, PlanSet, Scenario};
use crate::prompt::PromptError;
use crate::session::{EngineError, FinalPlanRecord, IssueRecord, Session, SessionEngine, SessionId};
use crate::store::{SessionStore, StoreError, TranscriptEntry};

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Board(#[from] BoardError),
    #[error("{0}")]
    NoSuchPlan(String),
}

/// Coarse error classes shared by the CLI exit codes and HTTP statuses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    InvalidInput,
    NotFound,
    Conflict,
    Unprocessable,
    Backend,
    Storage,
    Internal,
}

impl ServiceError {
    /// Stable machine-readable error code.
    pub fn code(&self) -> &'static str {
        match self {
            ServiceError::Engine(e) => match e {
                EngineError::WrongPhase { .. } => "WrongPhase",
                EngineError::SessionFinalized => "SessionFinalized",
                EngineError::InvalidScenario(_) => "InvalidScenario",
                EngineError::OutOfRange(_) => "OutOfRange",
                EngineError::Prompt(p) => match p {
                    PromptError::EmptyFeedback => "EmptyFeedback",
                    PromptError::PromptTooLarge { .. } => "PromptTooLarge",
                    PromptError::MissingSystemMessage => "MissingSystemMessage",
                    PromptError::EmptyKnowledgeBase | PromptError::KnowledgeBase(_) => "KnowledgeBase",
                    PromptError::InvalidBudget { .. } => "InvalidBudget",
                },
                EngineError::Gateway(g) => match g {
                    GatewayError::Transport { .. } => "Transport",
                    GatewayError::BackendRefusal { .. } => "BackendRefusal",
                    GatewayError::ReplayMiss { .. } => "ReplayMiss",
                    GatewayError::BudgetViolation { .. } => "BudgetViolation",
                    GatewayError::InvalidParams(_) => "InvalidParams",
                    GatewayError::Storage(_) => "ReplayStorage",
                    GatewayError::MalformedReply(_) => "MalformedReply",
                },
                EngineError::GenerationFailed { .. } => "GenerationFailed",
                EngineError::RefinementFailed { .. } => "RefinementFailed",
            },
            ServiceError::Store(s) => match s {
                StoreError::UnknownSession(_) => "UnknownSession",
                StoreError::StorageError(_) => "StorageError",
                StoreError::CorruptRecord { .. } => "CorruptRecord",
            },
            ServiceError::Board(b) => match b {
                BoardError::UnboundPlan { .. } => "UnboundPlan",
                BoardError::InventoryMismatch => "InventoryMismatch",
            },
            ServiceError::NoSuchPlan(_) => "NoSuchPlan",
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self.code() {
            "InvalidScenario" | "OutOfRange" | "EmptyFeedback" | "PromptTooLarge" => ErrorClass::InvalidInput,
            "UnknownSession" | "NoSuchPlan" => ErrorClass::NotFound,
            "WrongPhase" | "SessionFinalized" => ErrorClass::Conflict,
            "GenerationFailed" | "RefinementFailed" => ErrorClass::Unprocessable,
            "Transport" | "BackendRefusal" | "ReplayMiss" | "MalformedReply" | "ReplayStorage" => {
                ErrorClass::Backend
            }
            "StorageError" | "CorruptRecord" => ErrorClass::Storage,
            _ => ErrorClass::Internal,
        }
    }

    /// Structured detail for API clients, when there is any.
    pub fn details(&self) -> Option<serde_json::Value> {
        match self {
            ServiceError::Engine(
                EngineError::GenerationFailed { attempts, report }
                | EngineError::RefinementFailed { attempts, report },
            ) => Some(serde_json::json!({ "attempts": attempts, "report": report })),
            ServiceError::Engine(EngineError::InvalidScenario(e)) => {
                Some(serde_json::json!({ "reason": e.to_string() }))
            }
            _ => None,
        }
    }
}

/// Which plan a board is built from.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum BoardTarget {
    /// The latest revision, or candidate 1 before selection.
    #[default]
    Latest,
    Candidate(u8),
    /// Index into the revision list; 0 is the selected candidate.
    Version(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BoardView {
    pub plan_ordinal: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub version: Option<usize>,
    pub board: AllocationBoard,
    /// Changes relative to the previous version, for refined plans.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diff: Option<Vec<AssetDiff>>,
}

/// The current candidate set with the issues found in it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GenerationView {
    pub plan_set: PlanSet,
    pub issues: Vec<IssueRecord>,
}

impl GenerationView {
    pub fn of(session: &Session) -> Option<Self> {
        let plan_set = session.candidates.clone()?;
        let issues = session
            .issues_log
            .iter()
            .filter(|r| r.round == session.round && r.revision.is_none())
            .cloned()
            .collect();
        Some(Self { plan_set, issues })
    }
}

/// The latest accepted revision with its issues.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RevisionView {
    pub revision: u32,
    pub plan: PlanOfAction,
    pub issues: Vec<IssueRecord>,
}

impl RevisionView {
    pub fn of(session: &Session) -> Option<Self> {
        let plan = session.revisions.last()?.clone();
        let revision = (session.revisions.len() - 1) as u32;
        let issues = session
            .issues_log
            .iter()
            .filter(|r| r.round == session.round && r.revision == Some(revision))
            .cloned()
            .collect();
        Some(Self { revision, plan, issues })
    }
}

pub struct SessionService {
    engine: SessionEngine,
    store: SessionStore,
    replay_ref: Option<String>,
    locks: Mutex<HashMap<SessionId, Arc<Mutex<()>>>>,
}

impl SessionService {
    pub fn new(engine: SessionEngine, store: SessionStore) -> Self {
        Self {
            engine,
            store,
            replay_ref: None,
            locks: Mutex::new(HashMap::new()),
        }
    }

    /// Records the replay corpus location in each new session's directory.
    pub fn with_replay_ref(mut self, reference: impl Into<String>) -> Self {
        self.replay_ref = Some(reference.into());
        self
    }

    pub fn engine(&self) -> &SessionEngine {
        &self.engine
    }

    pub fn store(&self) -> &SessionStore {
        &self.store
    }

    fn lock(&self, id: &SessionId) -> Arc<Mutex<()>> {
        self.locks
            .lock()
            .expect("lock table")
            .entry(id.clone())
            .or_default()
            .clone()
    }

    pub fn create(&self) -> Result<Session, ServiceError> {
        let id = self.store.allocate_id()?;
        let session = self.engine.new_session(id);
        self.store.save_session(&session)?;
        if let Some(reference) = &self.replay_ref {
            self.store.set_replay_ref(&session.id, reference)?;
        }
        self.store.set_current(&session.id)?;
        Ok(session)
    }

    pub fn get(&self, id: &SessionId) -> Result<Session, ServiceError> {
        Ok(self.store.load_session(id)?)
    }

    /// Runs `op` on the stored session under its lock. Transcript entries are
    /// kept even when the operation fails; the session is saved only on success.
    fn apply<T>(
        &self,
        id: &SessionId,
        op: impl FnOnce(&Session, &mut Vec<TranscriptEntry>) -> Result<(Session, T), EngineError>,
    ) -> Result<(Session, T), ServiceError> {
        let lock = self.lock(id);
        let _guard = lock.lock().unwrap_or_else(|p| p.into_inner());
        let current = self.store.load_session(id)?;
        let mut log = Vec::new();
        let result = op(&current, &mut log);
        self.store.append(id, &log)?;
        let (next, value) = result?;
        self.store.save_session(&next)?;
        self.store.set_current(id)?;
        Ok((next, value))
    }

    pub fn submit_scenario(&self, id: &SessionId, scenario: Scenario) -> Result<Session, ServiceError> {
        self.apply(id, |s, log| Ok((self.engine.submit_scenario(s, scenario, log)?, ())))
            .map(|r| r.0)
    }

    pub fn generate(&self, id: &SessionId) -> Result<Session, ServiceError> {
        self.apply(id, |s, log| Ok((self.engine.generate_plans(s, log)?, ())))
            .map(|r| r.0)
    }

    pub fn select(&self, id: &SessionId, ordinal: u8) -> Result<Session, ServiceError> {
        self.apply(id, |s, log| Ok((self.engine.select_plan(s, ordinal, log)?, ())))
            .map(|r| r.0)
    }

    pub fn refine(&self, id: &SessionId, feedback: &str) -> Result<Session, ServiceError> {
        self.refine_streaming(id, feedback, &mut |_| {})
    }

    pub fn refine_streaming(
        &self,
        id: &SessionId,
        feedback: &str,
        on_chunk: &mut dyn FnMut(&str),
    ) -> Result<Session, ServiceError> {
        self.apply(id, |s, log| {
            Ok((self.engine.refine_streaming(s, feedback, log, on_chunk)?, ()))
        })
        .map(|r| r.0)
    }

    pub fn finalize(&self, id: &SessionId) -> Result<FinalPlanRecord, ServiceError> {
        let (_, mut record) = self.apply(id, |s, log| self.engine.finalize(s, log))?;
        record.transcript_ref = self.store.transcript_path(id).display().to_string();
        Ok(record)
    }

    pub fn transcript(&self, id: &SessionId) -> Result<String, ServiceError> {
        Ok(self.store.export_transcript(id)?)
    }

    pub fn board(&self, id: &SessionId, target: BoardTarget) -> Result<BoardView, ServiceError> {
        let session = self.store.load_session(id)?;
        board_view(&session, target)
    }
}

pub fn board_view(session: &Session, target: BoardTarget) -> Result<BoardView, ServiceError> {
    let scenario = session
        .scenario
        .as_ref()
        .ok_or_else(|| ServiceError::NoSuchPlan("session has no scenario".into()))?;
    let candidate = |n: u8| -> Result<&PlanOfAction, ServiceError> {
        session
            .candidates
            .as_ref()
            .and_then(|c| c.get(n))
            .ok_or_else(|| ServiceError::NoSuchPlan(format!("no candidate plan {n}")))
    };
    let (plan, version) = match target {
        BoardTarget::Candidate(n) => (candidate(n)?, None),
        BoardTarget::Version(v) => (
            session
                .revisions
                .get(v)
                .ok_or_else(|| ServiceError::NoSuchPlan(format!("no plan version {v}")))?,
            Some(v),
        ),
        BoardTarget::Latest => match session.revisions.len() {
            0 => (candidate(1)?, None),
            n => (&session.revisions[n - 1], Some(n - 1)),
        },
    };
    let board = build_board(plan, scenario)?;
    let diff = match version {
        Some(v) if v > 0 => {
            let previous = build_board(&session.revisions[v - 1], scenario)?;
            Some(diff_boards(&previous, &board)?)
        }
        _ => None,
    };
    Ok(BoardView {
        plan_ordinal: plan.ordinal,
        version,
        board,
        diff,
    })
}
