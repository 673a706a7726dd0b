//! `mdt` — run multi-disciplinary team consultations, batch evaluations, and
//! EHR cohort extraction from the command line.

mod manifest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use mdt_core::backend::{
    BackendConfig, BackendKind, ChatBackend, HttpBackend, RecordBackend, ReplayBackend,
};
use mdt_core::batch::{run_eval, BackendProvider, EvalContext, JudgeMode};
use mdt_core::datasets::{
    cohort_stats, extract_rare_cohort, load_diagnosis_cases, load_visit_records,
    save_visit_records, IcdMapping, RawAdmissionTables,
};
use mdt_core::domain::{Decision, DrugCatalog, PatientCase, TaskKind};
use mdt_core::engine::{consult, Ablations, ConsultConfig};
use mdt_core::memory::{HashedBagEmbedder, MemoryStore};
use mdt_core::metrics::{ddi_rate, participation_csv, participation_rates};
use mdt_core::roster::{RoleStrategy, RoleStrategyKind, SpecialistPool};
use mdt_core::toolkit::{
    load_diagnostic_fixtures, DdiGraph, DiagnosticTool, MonographDb, ToolRegistry,
};

use manifest::RunManifest;

#[derive(Parser)]
#[command(name = "mdt", version, about = "Multi-disciplinary team consultation engine")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single consultation for one case.
    Consult(ConsultArgs),
    /// Run a batch evaluation over a dataset and emit the metrics report.
    Eval(EvalArgs),
    /// Extract the rare-disease cohort from raw admission tables.
    ExtractCohort(ExtractCohortArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum TaskArg {
    Diagnosis,
    Treatment,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Replay,
    Http,
    Record,
}

#[derive(Clone, Copy, ValueEnum)]
enum RolesArg {
    Llm,
    Random,
    Relevance,
}

#[derive(Args)]
struct CommonArgs {
    /// Specialist pool JSON; defaults to the embedded 41-department roster.
    #[arg(long)]
    pool: Option<PathBuf>,
    /// Maximum consensus rounds R.
    #[arg(long, default_value_t = 3)]
    max_rounds: u32,
    /// Top-k similar cases retrieved from memory.
    #[arg(long, default_value_t = 5)]
    k: usize,
    /// Team formation strategy.
    #[arg(long, value_enum, default_value_t = RolesArg::Llm)]
    roles: RolesArg,
    /// Fixed team size (required for random/relevance).
    #[arg(long)]
    team_size: Option<usize>,
    /// Seed for all randomness; recorded in the manifest.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Skip MDT formation; the attending acts alone.
    #[arg(long)]
    no_mdt: bool,
    /// Skip memory retrieval.
    #[arg(long)]
    no_memory: bool,
    /// Skip tool feedback.
    #[arg(long)]
    no_tools: bool,
    /// Re-run tools each round instead of once per consultation.
    #[arg(long)]
    tools_per_round: bool,
    /// Memory seed corpus (JSON Lines with a dimension stamp).
    #[arg(long)]
    memory: Option<PathBuf>,
    /// Sidecar vector file; defaults to `<memory stem>.vectors.jsonl`.
    #[arg(long)]
    vectors: Option<PathBuf>,
    /// Embedding dimension of the default provider.
    #[arg(long, default_value_t = 256)]
    embedding_dim: usize,
    /// Medication catalog, one drug name per line (treatment task).
    #[arg(long)]
    catalog: Option<PathBuf>,
    /// Diagnostic tool fixtures (JSON Lines of {tool, input_key, output}).
    #[arg(long)]
    fixtures: Option<PathBuf>,
    /// Drug-drug interaction graph CSV (drug_a,drug_b,annotation).
    #[arg(long)]
    ddi: Option<PathBuf>,
    /// Drug monographs (JSON Lines of {name, description}).
    #[arg(long)]
    monographs: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct BackendArgs {
    /// Chat backend kind.
    #[arg(long, value_enum, default_value_t = BackendArg::Replay)]
    backend: BackendArg,
    /// Base URL for http/record backends (API key from MDT_API_KEY).
    #[arg(long)]
    endpoint: Option<String>,
    /// Model name sent on the wire.
    #[arg(long, default_value = "default")]
    model: String,
    #[arg(long, default_value_t = 0.0)]
    temperature: f64,
    /// Per-call timeout in seconds.
    #[arg(long, default_value_t = 120)]
    timeout_secs: u64,
    /// Retry a failed call once.
    #[arg(long)]
    retry: bool,
}

#[derive(Args)]
struct ConsultArgs {
    /// Case file: one DiagnosisCase or VisitRecord as JSON.
    #[arg(long)]
    case: PathBuf,
    #[arg(long, value_enum)]
    task: TaskArg,
    /// Replay script to read (replay) or record into (record).
    #[arg(long)]
    script: Option<PathBuf>,
    /// Persist the updated memory store here after write-back.
    #[arg(long)]
    memory_out: Option<PathBuf>,
    /// Disable post-consultation memory write-back.
    #[arg(long)]
    no_write_back: bool,
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    backend: BackendArgs,
}

#[derive(Args)]
struct EvalArgs {
    /// Dataset JSONL: one case/visit per line.
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, value_enum)]
    task: TaskArg,
    /// Directory of per-case replay scripts (`<case key>.jsonl`).
    #[arg(long)]
    scripts: Option<PathBuf>,
    /// Score diagnosis ranks with a judge model instead of exact matching.
    #[arg(long)]
    judge: bool,
    /// Dedicated judge endpoint; defaults to the case backend.
    #[arg(long)]
    judge_endpoint: Option<String>,
    #[arg(long, default_value = "default")]
    judge_model: String,
    /// Concurrent consultations.
    #[arg(long, default_value_t = 1)]
    parallel: usize,
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    backend: BackendArgs,
}

#[derive(Args)]
struct ExtractCohortArgs {
    /// Directory with diagnoses.csv, procedures.csv, prescriptions.csv.
    #[arg(long)]
    tables: PathBuf,
    /// ICD-to-rare-id mapping CSV.
    #[arg(long)]
    mapping: PathBuf,
    /// Output visit-record JSONL.
    #[arg(long)]
    out: PathBuf,
    /// Optional interaction graph for the prior DDI readout over gold
    /// prescriptions.
    #[arg(long)]
    ddi: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Consult(args) => cmd_consult(args),
        Command::Eval(args) => cmd_eval(args),
        Command::ExtractCohort(args) => cmd_extract_cohort(args),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn load_pool(path: &Option<PathBuf>) -> Result<SpecialistPool> {
    match path {
        Some(p) => SpecialistPool::load(p).with_context(|| format!("loading pool {}", p.display())),
        None => Ok(SpecialistPool::default_pool()),
    }
}

fn load_catalog(path: &Path) -> Result<DrugCatalog> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("loading catalog {}", path.display()))?;
    let names: Vec<String> = text
        .lines()
        .map(|l| l.trim())
        .filter(|l| !l.is_empty())
        .map(|l| l.to_string())
        .collect();
    Ok(DrugCatalog::new(names)?)
}

fn load_store(common: &CommonArgs) -> Result<MemoryStore> {
    let embedder = Arc::new(HashedBagEmbedder::new(common.embedding_dim));
    match &common.memory {
        Some(records) => {
            let default_vectors = records.with_extension("vectors.jsonl");
            let vectors = common.vectors.clone().or_else(|| {
                default_vectors.exists().then_some(default_vectors)
            });
            Ok(MemoryStore::load(records, vectors.as_deref(), embedder)
                .with_context(|| format!("loading memory store {}", records.display()))?)
        }
        None => Ok(MemoryStore::new(embedder)),
    }
}

fn build_registry(common: &CommonArgs, catalog: Option<&DrugCatalog>) -> Result<ToolRegistry> {
    let mut registry = ToolRegistry::new();
    if let Some(fixtures) = &common.fixtures {
        for (tool, entries) in load_diagnostic_fixtures(fixtures)? {
            registry.register_diagnostic(DiagnosticTool::fixture(tool, "", entries))?;
        }
    }
    if let Some(ddi) = &common.ddi {
        let catalog = catalog
            .cloned()
            .context("--ddi requires --catalog for the drug space")?;
        registry.set_ddi_graph(DdiGraph::load_csv(ddi, catalog)?);
    }
    if let Some(monographs) = &common.monographs {
        registry.set_monographs(MonographDb::load_jsonl(monographs)?);
    }
    Ok(registry)
}

fn consult_config(common: &CommonArgs, write_back: bool) -> ConsultConfig {
    ConsultConfig {
        max_rounds: common.max_rounds,
        ablations: Ablations {
            no_mdt: common.no_mdt,
            no_memory: common.no_memory,
            no_tools: common.no_tools,
        },
        role_strategy: RoleStrategy {
            kind: match common.roles {
                RolesArg::Llm => RoleStrategyKind::Llm,
                RolesArg::Random => RoleStrategyKind::Random,
                RolesArg::Relevance => RoleStrategyKind::Relevance,
            },
            team_size_override: common.team_size,
            rng_seed: common.seed,
        },
        memory_k: common.k,
        tools_per_round: common.tools_per_round,
        write_back,
    }
}

fn backend_config(args: &BackendArgs) -> BackendConfig {
    BackendConfig {
        kind: match args.backend {
            BackendArg::Replay => BackendKind::Replay,
            BackendArg::Http => BackendKind::Http,
            BackendArg::Record => BackendKind::Record,
        },
        endpoint_url: args.endpoint.clone(),
        model_name: args.model.clone(),
        temperature: args.temperature,
        seed: 42,
        timeout_secs: args.timeout_secs,
        retry_once: args.retry,
    }
}

fn build_consult_backend(
    args: &BackendArgs,
    script: &Option<PathBuf>,
) -> Result<Box<dyn ChatBackend>> {
    let config = backend_config(args);
    match args.backend {
        BackendArg::Replay => {
            let script = script
                .as_ref()
                .context("--backend replay requires --script")?;
            Ok(Box::new(ReplayBackend::from_file(script)?))
        }
        BackendArg::Http => Ok(Box::new(HttpBackend::new(&config)?)),
        BackendArg::Record => {
            let script = script
                .as_ref()
                .context("--backend record requires --script (the sink file)")?;
            let http_config = BackendConfig {
                kind: BackendKind::Http,
                ..config
            };
            let inner = HttpBackend::new(&http_config)?;
            Ok(Box::new(RecordBackend::new(Box::new(inner), script)?))
        }
    }
}

fn cmd_consult(args: ConsultArgs) -> Result<ExitCode> {
    let case_text = std::fs::read_to_string(&args.case)
        .with_context(|| format!("loading case {}", args.case.display()))?;
    let case: PatientCase = match args.task {
        TaskArg::Diagnosis => PatientCase::Diagnosis(serde_json::from_str(&case_text)?),
        TaskArg::Treatment => PatientCase::Visit(serde_json::from_str(&case_text)?),
    };
    case.validate()?;

    let pool = load_pool(&args.common.pool)?;
    let store = load_store(&args.common)?;
    let catalog = match &args.common.catalog {
        Some(p) => Some(load_catalog(p)?),
        None => None,
    };
    if case.task() == TaskKind::Treatment && catalog.is_none() {
        bail!("--task treatment requires --catalog");
    }
    let registry = build_registry(&args.common, catalog.as_ref())?;
    let backend = build_consult_backend(&args.backend, &args.script)?;
    let config = consult_config(&args.common, !args.no_write_back);

    let outcome = consult(
        &case,
        &config,
        &pool,
        &store,
        &registry,
        backend.as_ref(),
        catalog.as_ref(),
    )?;

    std::fs::create_dir_all(&args.common.out)?;
    let decision_doc = serde_json::json!({
        "case_id": case.case_key(),
        "task": case.task(),
        "decision": outcome.decision,
    });
    std::fs::write(
        args.common.out.join("decision.json"),
        serde_json::to_string_pretty(&decision_doc)?,
    )?;
    std::fs::write(
        args.common.out.join("transcript.json"),
        serde_json::to_string_pretty(&outcome.transcript)?,
    )?;

    if config.write_back {
        if let Some(memory_out) = &args.memory_out {
            store.save(memory_out, &memory_out.with_extension("vectors.jsonl"))?;
        }
    }

    let mut manifest = RunManifest::new(
        args.common.seed,
        serde_json::json!({
            "consult": config,
            "backend": backend_config(&args.backend),
        }),
    );
    manifest.hash_inputs([
        Some(&args.case),
        args.common.pool.as_ref(),
        args.common.memory.as_ref(),
        args.common.catalog.as_ref(),
        args.common.fixtures.as_ref(),
        args.common.ddi.as_ref(),
        args.common.monographs.as_ref(),
        args.script.as_ref(),
    ]);
    manifest.write(&args.common.out)?;

    match &outcome.decision {
        Some(Decision::Diagnosis(d)) => {
            println!("diagnosis ({} entries):", d.ranked.len());
            for (i, name) in d.ranked.iter().enumerate() {
                println!("  {}. {}", i + 1, name);
            }
        }
        Some(Decision::Treatment(t)) => {
            println!("medications ({}):", t.medications.len());
            for name in &t.medications {
                println!("  - {name}");
            }
        }
        None => {
            eprintln!("decision unparseable; raw reply kept in transcript.json");
            return Ok(ExitCode::from(2));
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_eval(args: EvalArgs) -> Result<ExitCode> {
    let cases: Vec<PatientCase> = match args.task {
        TaskArg::Diagnosis => load_diagnosis_cases(&args.dataset)?
            .into_iter()
            .map(PatientCase::Diagnosis)
            .collect(),
        TaskArg::Treatment => load_visit_records(&args.dataset)?
            .into_iter()
            .map(PatientCase::Visit)
            .collect(),
    };

    let pool = load_pool(&args.common.pool)?;
    let store = load_store(&args.common)?;
    let catalog = match &args.common.catalog {
        Some(p) => Some(load_catalog(p)?),
        None => None,
    };
    if matches!(args.task, TaskArg::Treatment) && catalog.is_none() {
        bail!("--task treatment requires --catalog");
    }
    let registry = build_registry(&args.common, catalog.as_ref())?;

    let shared_backend: Option<Box<dyn ChatBackend>> = match args.backend.backend {
        BackendArg::Http => Some(Box::new(HttpBackend::new(&backend_config(&args.backend))?)),
        BackendArg::Replay => None,
        BackendArg::Record => bail!(
            "record mode applies to single consultations; use `mdt consult --backend record`"
        ),
    };
    let provider = match &shared_backend {
        Some(backend) => BackendProvider::Shared(backend.as_ref()),
        None => {
            let dir = args
                .scripts
                .clone()
                .context("--backend replay requires --scripts DIR for eval")?;
            BackendProvider::PerCaseReplayDir(dir)
        }
    };

    let judge_backend: Option<Box<dyn ChatBackend>> = match (&args.judge, &args.judge_endpoint) {
        (true, Some(endpoint)) => {
            let config = BackendConfig {
                kind: BackendKind::Http,
                endpoint_url: Some(endpoint.clone()),
                model_name: args.judge_model.clone(),
                ..BackendConfig::default()
            };
            Some(Box::new(HttpBackend::new(&config)?))
        }
        _ => None,
    };
    let judge = if args.judge {
        match &judge_backend {
            Some(b) => JudgeMode::Shared(b.as_ref()),
            None => JudgeMode::CaseBackend,
        }
    } else {
        JudgeMode::Exact
    };

    // memory write-back stays off during evaluation so cases cannot
    // contaminate each other
    let config = consult_config(&args.common, false);
    let ctx = EvalContext {
        config: config.clone(),
        pool: &pool,
        store: &store,
        registry: &registry,
        catalog: catalog.as_ref(),
        backend: provider,
        judge,
    };
    let outcome = run_eval(&cases, &ctx, args.parallel.max(1))?;

    std::fs::create_dir_all(&args.common.out)?;
    std::fs::write(
        args.common.out.join("report.json"),
        serde_json::to_string_pretty(&outcome.report)?,
    )?;
    std::fs::write(
        args.common.out.join("report.txt"),
        format!("{}\n", outcome.report.to_table()),
    )?;
    let mut cases_jsonl = String::new();
    for result in &outcome.case_results {
        cases_jsonl.push_str(&serde_json::to_string(result)?);
        cases_jsonl.push('\n');
    }
    std::fs::write(args.common.out.join("cases.jsonl"), cases_jsonl)?;
    let mut transcripts_jsonl = String::new();
    for transcript in &outcome.transcripts {
        transcripts_jsonl.push_str(&serde_json::to_string(transcript)?);
        transcripts_jsonl.push('\n');
    }
    std::fs::write(args.common.out.join("transcripts.jsonl"), transcripts_jsonl)?;
    let rates = participation_rates(&outcome.case_results, &pool.departments());
    std::fs::write(
        args.common.out.join("participation.csv"),
        participation_csv(&rates),
    )?;

    let mut manifest = RunManifest::new(
        args.common.seed,
        serde_json::json!({
            "eval": config,
            "backend": backend_config(&args.backend),
            "parallel": args.parallel,
            "judge": args.judge,
        }),
    );
    manifest.hash_inputs([
        Some(&args.dataset),
        args.common.pool.as_ref(),
        args.common.memory.as_ref(),
        args.common.catalog.as_ref(),
        args.common.fixtures.as_ref(),
        args.common.ddi.as_ref(),
        args.common.monographs.as_ref(),
    ]);
    manifest.write(&args.common.out)?;

    println!("{}", outcome.report.to_table());
    let failures = outcome
        .case_results
        .iter()
        .filter(|r| r.error.is_some())
        .count();
    if failures > 0 {
        eprintln!("{failures} case(s) recorded errors; see cases.jsonl");
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_extract_cohort(args: ExtractCohortArgs) -> Result<ExitCode> {
    let tables = RawAdmissionTables::load_dir(&args.tables)?;
    let mapping = IcdMapping::load_csv(&args.mapping)?;
    if mapping.is_empty() {
        eprintln!("warning: mapping is empty; cohort will be empty");
    }
    let records = extract_rare_cohort(&tables, &mapping);
    save_visit_records(&records, &args.out)?;
    println!("wrote {} visit record(s) to {}", records.len(), args.out.display());

    if records.is_empty() {
        return Ok(ExitCode::SUCCESS);
    }
    let stats = cohort_stats(&records)?;
    println!("{stats}");

    // dataset-level prior readout over gold prescriptions
    if let Some(ddi_path) = &args.ddi {
        let space: Vec<String> = {
            let mut names: Vec<String> = records
                .iter()
                .flat_map(|r| r.gold_medications.iter().cloned())
                .collect();
            names.sort();
            names.dedup();
            names
        };
        let catalog = DrugCatalog::new(space)?;
        let graph = load_ddi_within_catalog(ddi_path, catalog)?;
        let mut total = 0.0;
        for record in &records {
            total += ddi_rate(&record.gold_medications, &graph)?;
        }
        println!(
            "prior DDI rate (gold prescriptions) {:.4}",
            total / records.len() as f64
        );
    }
    Ok(ExitCode::SUCCESS)
}

/// Load a DDI CSV keeping only edges whose endpoints are inside `catalog`;
/// interaction files often cover a larger drug universe than one cohort.
fn load_ddi_within_catalog(path: &Path, catalog: DrugCatalog) -> Result<DdiGraph> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)
        .with_context(|| format!("loading ddi graph {}", path.display()))?;
    let mut edges = Vec::new();
    for row in reader.records() {
        let row = row?;
        let a = row.get(0).unwrap_or("").to_string();
        let b = row.get(1).unwrap_or("").to_string();
        if catalog.contains(&a) && catalog.contains(&b) {
            edges.push((a, b, row.get(2).unwrap_or("").to_string()));
        }
    }
    Ok(DdiGraph::new(catalog, edges)?)
}
