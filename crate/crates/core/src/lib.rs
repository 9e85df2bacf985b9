//! Planning core: scenario model, plan parsing and validation, prompt
//! assembly, the chat gateway, and the session state machine.

pub mod binding;
pub mod board;
pub mod fixtures;
pub mod gateway;
pub mod model;
pub mod parser;
pub mod prompt;
pub mod validator;
pub mod service;
pub mod session;
pub mod store;

pub use board::{AllocationBoard, AssetDiff, BoardError, ExportFormat, build_board, diff_boards, export_board};
pub use gateway::{BackendDescriptor, BackendKind, ChatBackend, ChatMessage, GatewayError, GenerationParams, Role};
pub use model::{
    Asset, AssetCategory, AssetId, DiagnosticCode, EndStates, FasJustification, Location, LocationId,
    ModelError, OpsSection, ParseDiagnostic, PlanOfAction, PlanSet, Provenance, Scenario, Severity, Span,
    TaskAssignment,
};
pub use parser::{ParseError, parse_plan, parse_plan_set, parse_revision, serialize_plan, serialize_plan_set};
pub use prompt::{KnowledgeBase, PromptError, TokenBudget, TokenCounter};
pub use service::{
    BoardTarget, BoardView, ErrorClass, GenerationView, RevisionView, ServiceError, SessionService, board_view,
};
pub use session::{
    EngineConfig, EngineError, FailureReport, FinalPlanRecord, IssueRecord, Session, SessionEngine, SessionId,
    SessionPhase,
};
pub use store::{Actor, SessionStore, StoreError, TranscriptEntry};
pub use validator::{GateDecision, Rule, ValidationIssue, ValidationPolicy};
