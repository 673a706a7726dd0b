//! Batch evaluation: run many consultations over a dataset, score each case,
//! and aggregate the metrics report. Cases are independent, so the batch maps
//! over them in parallel when the `parallel` feature is on and more than one
//! worker is requested; results are collected in input order either way, so
//! reports do not depend on scheduling.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use crate::backend::{ChatBackend, ReplayBackend};
use crate::domain::{Decision, DrugCatalog, PatientCase, TaskKind};
use crate::engine::{consult, ConsultConfig, EngineError, Transcript};
use crate::memory::MemoryStore;
use crate::metrics::{CaseResult, MetricsError, MetricsReport};
use crate::parsing::{rank_exact, rank_judge};
use crate::roster::SpecialistPool;
use crate::toolkit::ToolRegistry;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum BatchError {
    #[error("batch contains no cases")]
    EmptyBatch,
    #[error("batch mixes diagnosis and treatment cases")]
    MixedTasks,
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

/// Where each case's chat backend comes from. Replay evaluation uses one
/// script file per case (`<case key>.jsonl`, `#` replaced by `_`) so
/// parallel workers never share a cursor.
pub enum BackendProvider<'a> {
    Shared(&'a dyn ChatBackend),
    PerCaseReplayDir(PathBuf),
}

impl BackendProvider<'_> {
    pub fn script_file_name(case_key: &str) -> String {
        format!("{}.jsonl", case_key.replace(['#', '/'], "_"))
    }
}

/// How diagnosis ranks are scored: the deterministic exact matcher, or one
/// judge call per case through the case's own backend (scripted under
/// replay) or a dedicated judge backend.
pub enum JudgeMode<'a> {
    Exact,
    CaseBackend,
    Shared(&'a dyn ChatBackend),
}

pub struct EvalContext<'a> {
    pub config: ConsultConfig,
    pub pool: &'a SpecialistPool,
    pub store: &'a MemoryStore,
    pub registry: &'a ToolRegistry,
    pub catalog: Option<&'a DrugCatalog>,
    pub backend: BackendProvider<'a>,
    pub judge: JudgeMode<'a>,
}

#[derive(Debug)]
pub struct EvalOutcome {
    pub case_results: Vec<CaseResult>,
    pub transcripts: Vec<Transcript>,
    pub report: MetricsReport,
}

fn run_one(case: &PatientCase, ctx: &EvalContext<'_>) -> (CaseResult, Option<Transcript>) {
    let case_key = case.case_key();
    let team_placeholder = Vec::new();

    let backend_holder: Box<dyn ChatBackend>;
    let backend: &dyn ChatBackend = match &ctx.backend {
        BackendProvider::Shared(b) => *b,
        BackendProvider::PerCaseReplayDir(dir) => {
            let path = dir.join(BackendProvider::script_file_name(&case_key));
            match ReplayBackend::from_file(&path) {
                Ok(b) => {
                    backend_holder = Box::new(b);
                    &*backend_holder
                }
                Err(e) => {
                    return (
                        failed_result(case, &case_key, team_placeholder, &e.to_string()),
                        None,
                    )
                }
            }
        }
    };

    let outcome = match consult(
        case,
        &ctx.config,
        ctx.pool,
        ctx.store,
        ctx.registry,
        backend,
        ctx.catalog,
    ) {
        Ok(outcome) => outcome,
        Err(e @ EngineError::Backend(_))
        | Err(e @ EngineError::Roster(_))
        | Err(e @ EngineError::Memory(_))
        | Err(e @ EngineError::Tool(_))
        | Err(e @ EngineError::MissingCatalog) => {
            return (
                failed_result(case, &case_key, team_placeholder, &e.to_string()),
                None,
            )
        }
    };

    let team = outcome.transcript.team.clone();
    let result = match case {
        PatientCase::Diagnosis(diag) => {
            let rank = match &outcome.decision {
                Some(Decision::Diagnosis(prediction)) => match &ctx.judge {
                    JudgeMode::Exact => rank_exact(prediction, &diag.gold_diagnoses),
                    JudgeMode::CaseBackend => {
                        rank_judge(prediction, &diag.gold_diagnoses, backend)
                            .map(|v| v.rank)
                            .unwrap_or(None)
                    }
                    JudgeMode::Shared(judge) => {
                        rank_judge(prediction, &diag.gold_diagnoses, *judge)
                            .map(|v| v.rank)
                            .unwrap_or(None)
                    }
                },
                _ => None,
            };
            let mut r = CaseResult::diagnosis(case_key, rank, team);
            if outcome.decision.is_none() {
                r.error = Some("unparseable decision".to_string());
            }
            r
        }
        PatientCase::Visit(visit) => {
            let predicted: BTreeSet<String> = match &outcome.decision {
                Some(Decision::Treatment(t)) => t.medications.clone(),
                _ => BTreeSet::new(),
            };
            CaseResult::treatment(case_key, predicted, visit.gold_medications.clone(), team)
        }
    };
    (result, Some(outcome.transcript))
}

fn failed_result(
    case: &PatientCase,
    case_key: &str,
    team: Vec<String>,
    error: &str,
) -> CaseResult {
    let mut result = match case {
        PatientCase::Diagnosis(_) => CaseResult::diagnosis(case_key, None, team),
        PatientCase::Visit(v) => {
            CaseResult::treatment(case_key, BTreeSet::new(), v.gold_medications.clone(), team)
        }
    };
    result.error = Some(error.to_string());
    result
}

/// Run the whole batch with `workers` parallel consultations (1 = strictly
/// sequential; also the only mode without the `parallel` feature).
pub fn run_eval(
    cases: &[PatientCase],
    ctx: &EvalContext<'_>,
    workers: usize,
) -> Result<EvalOutcome, BatchError> {
    if cases.is_empty() {
        return Err(BatchError::EmptyBatch);
    }
    let task = cases[0].task();
    if cases.iter().any(|c| c.task() != task) {
        return Err(BatchError::MixedTasks);
    }

    let outcomes = map_cases(cases, ctx, workers);

    let mut case_results = Vec::with_capacity(cases.len());
    let mut transcripts = Vec::new();
    for (result, transcript) in outcomes {
        case_results.push(result);
        if let Some(t) = transcript {
            transcripts.push(t);
        }
    }
    let graph = match task {
        TaskKind::Treatment => ctx.registry.ddi_graph(),
        TaskKind::Diagnosis => None,
    };
    let report = MetricsReport::aggregate(&case_results, task, graph)?;
    Ok(EvalOutcome {
        case_results,
        transcripts,
        report,
    })
}

#[cfg(feature = "parallel")]
fn map_cases(
    cases: &[PatientCase],
    ctx: &EvalContext<'_>,
    workers: usize,
) -> Vec<(CaseResult, Option<Transcript>)> {
    if workers <= 1 {
        return cases.iter().map(|c| run_one(c, ctx)).collect();
    }
    use rayon::prelude::*;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .expect("thread pool");
    pool.install(|| cases.par_iter().map(|c| run_one(c, ctx)).collect())
}

#[cfg(not(feature = "parallel"))]
fn map_cases(
    cases: &[PatientCase],
    ctx: &EvalContext<'_>,
    _workers: usize,
) -> Vec<(CaseResult, Option<Transcript>)> {
    cases.iter().map(|c| run_one(c, ctx)).collect()
}

/// Write one replay script per case into `dir` from a shared list of
/// entries; test and fixture tooling.
pub fn write_case_script(
    dir: &Path,
    case_key: &str,
    script: &crate::backend::ReplayScript,
) -> Result<(), crate::backend::BackendError> {
    script.save(&dir.join(BackendProvider::script_file_name(case_key)))
}
