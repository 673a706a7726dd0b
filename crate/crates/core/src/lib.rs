//! Multi-disciplinary team (MDT) consultation engine for rare-disease
//! decision support: an attending agent assembles a team of specialist
//! agents from a fixed department roster, the team deliberates over bounded
//! consensus rounds, and the attending folds the discussion report, each
//! agent's long-term memory, and medical tool feedback into a final
//! diagnosis ranking or medication set.
//!
//! The crate ships deterministic building blocks around the orchestrator:
//! scripted replay backends so whole consultations are reproducible offline,
//! a hashed-bag embedding memory with top-k retrieval, fixture-driven
//! diagnostic tools plus a drug-interaction graph, the evaluation metric
//! suite (Hit@k, median rank, Jaccard, F1, DDI rate, #MED), and the
//! EHR-to-cohort extraction pipeline.

pub mod backend;
pub mod batch;
pub mod datasets;
pub mod domain;
pub mod engine;
pub mod memory;
pub mod metrics;
pub mod parsing;
pub mod roster;
pub mod toolkit;

pub use backend::{BackendConfig, BackendError, BackendKind, ChatBackend, ChatMessage, ReplayBackend, ReplayScript};
pub use domain::{
    normalize_label, render_profile, Decision, DecisionDiagnosis, DecisionTreatment,
    DiagnosisCase, DrugCatalog, PatientCase, SymptomCode, TaskKind, VisitRecord,
};
pub use engine::{consult, ConsultConfig, ConsultOutcome, EngineError, Transcript};
pub use memory::{EmbeddingVector, MemoryRecord, MemoryStore};
pub use metrics::{CaseResult, MetricsReport};
pub use roster::{RoleStrategy, SpecialistPool, SpecialistRole};
pub use toolkit::{DdiGraph, ToolRegistry};
