//! The consultation orchestrator: MDT formation, bounded consensus rounds
//! with meetings, report summarization, the final decision call, and memory
//! write-back. One consultation is strictly sequential so replayed
//! transcripts are byte-identical.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{BackendError, ChatBackend, ChatMessage};
use crate::domain::{render_profile, Decision, DrugCatalog, PatientCase, TaskKind};
use crate::memory::{
    render_similar_cases, render_visit_history, MemoryError, MemoryRecord, MemoryStore,
    RecordKind, RecordSource,
};
use crate::parsing::{extract_diagnoses, extract_medications};
use crate::roster::{form_mdt, RoleStrategy, RosterError, SpecialistPool, SpecialistRole};
use crate::toolkit::{ToolCache, ToolError, ToolRegistry};

/// Attending-agent system prompt.
pub const ATTENDING_SYSTEM_PROMPT: &str = "You are a highly experienced physician. You will be provided with a complex clinical case that may involve atypical presentations or rare conditions. Carefully review the patient's symptoms, history, and any other relevant information.";

/// Final-answer format instruction for the diagnosis task.
pub const DIAGNOSIS_TASK_PROMPT: &str = "Based on the symptoms of the patient, list the diagnosis separately at the end in the following format:\nDIAGNOSIS:\n1. <Diagnosis 1>\n2. <Diagnosis 2>\n3. <Diagnosis 3>\n...\n10. <Diagnosis 10>";

/// Final-answer format instruction for the treatment task.
pub const TREATMENT_TASK_PROMPT: &str = "Based on the diagnosis and procedures provided, please give the most appropriate combination of medications. Select medications only from the given list. List each medication on a separate line using the following format:\nTREATMENT:\n1. <Medication 1>\n2. <Medication 2>\n3. <Medication 3>\n...\nOnly include medications from the provided list.";

/// Agent id of the attending physician in scripts and transcripts.
pub const ATTENDING_AGENT_ID: &str = "attending";

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Roster(#[from] RosterError),
    #[error(transparent)]
    Memory(#[from] MemoryError),
    #[error(transparent)]
    Tool(#[from] ToolError),
    #[error("treatment consultation requires a drug catalog")]
    MissingCatalog,
}

/// One specialist statement in one round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Opinion {
    pub specialist: String,
    pub round: u32,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackItem {
    pub from: String,
    pub text: String,
}

/// Meeting outcome for one specialist's opinion; an empty feedback list
/// marks the specialist as converged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeetingDelta {
    pub target: String,
    pub round: u32,
    pub feedback_items: Vec<FeedbackItem>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub opinions: Vec<Opinion>,
    pub deltas: Vec<MeetingDelta>,
}

/// The full consultation record: enough to audit every prompt input and to
/// reproduce the run against its replay script.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub case_id: String,
    pub team: Vec<String>,
    pub rounds: Vec<RoundRecord>,
    pub report: String,
    pub memory_text: String,
    pub tool_text: String,
    pub decision_raw: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ablations {
    pub no_mdt: bool,
    pub no_memory: bool,
    pub no_tools: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConsultConfig {
    /// Maximum consensus rounds R.
    pub max_rounds: u32,
    pub ablations: Ablations,
    pub role_strategy: RoleStrategy,
    /// Top-k for similar-case memory retrieval.
    pub memory_k: usize,
    /// Re-run tools each round instead of once per consultation.
    pub tools_per_round: bool,
    /// Insert a self-generated memory record after the decision. Off for
    /// evaluation batches so test cases cannot contaminate each other.
    pub write_back: bool,
}

impl Default for ConsultConfig {
    fn default() -> Self {
        Self {
            max_rounds: 3,
            ablations: Ablations::default(),
            role_strategy: RoleStrategy::llm(),
            memory_k: 5,
            tools_per_round: false,
            write_back: false,
        }
    }
}

/// Consultation result. `decision` is None when the final reply could not be
/// parsed; the raw reply stays in the transcript either way.
#[derive(Debug, Clone)]
pub struct ConsultOutcome {
    pub decision: Option<Decision>,
    pub transcript: Transcript,
}

struct ConsultContext<'a> {
    case: &'a PatientCase,
    config: &'a ConsultConfig,
    store: &'a MemoryStore,
    registry: &'a ToolRegistry,
    catalog: Option<&'a DrugCatalog>,
    profile: String,
    memory_text: Option<String>,
    tool_cache: ToolCache,
}

impl<'a> ConsultContext<'a> {
    /// Memory text per the task: similar cases for diagnosis, prior visits
    /// for treatment. Retrieved once and reused; never touches the store
    /// under the memory ablation.
    fn memory_text(&mut self) -> Result<String, EngineError> {
        if self.config.ablations.no_memory {
            return Ok(String::new());
        }
        if let Some(text) = &self.memory_text {
            return Ok(text.clone());
        }
        let text = match self.case {
            PatientCase::Diagnosis(case) => {
                if self.config.memory_k == 0 {
                    String::new()
                } else {
                    let records = self.store.retrieve_similar(case, self.config.memory_k)?;
                    render_similar_cases(&records)
                }
            }
            PatientCase::Visit(visit) => {
                let records = self
                    .store
                    .retrieve_history(&visit.patient_id, visit.visit_index);
                render_visit_history(&records)
            }
        };
        self.memory_text = Some(text.clone());
        Ok(text)
    }

    /// Tool feedback per the task; memoized per input key so each tool runs
    /// at most once per consultation (or once per round with
    /// `tools_per_round`). Never touches the registry under the tool
    /// ablation.
    fn tool_text(&mut self, round: u32) -> Result<String, EngineError> {
        if self.config.ablations.no_tools {
            return Ok(String::new());
        }
        let epoch = if self.config.tools_per_round { u64::from(round) } else { 0 };
        let text = match self.case {
            PatientCase::Diagnosis(case) => {
                self.registry
                    .diagnosis_feedback(&case.symptoms, &mut self.tool_cache, epoch)?
            }
            PatientCase::Visit(_) => self
                .registry
                .treatment_feedback(&mut self.tool_cache, epoch)?,
        };
        Ok(text)
    }

    /// Patient information section: the rendered profile, plus the
    /// medication candidate list for treatment cases.
    fn patient_section(&self) -> String {
        match (self.case, self.catalog) {
            (PatientCase::Visit(_), Some(catalog)) => format!(
                "{}\n\nThe available medication candidates are: {}.",
                self.profile,
                catalog.names().join("; ")
            ),
            _ => self.profile.clone(),
        }
    }

    fn task_prompt(&self) -> &'static str {
        match self.case.task() {
            TaskKind::Diagnosis => DIAGNOSIS_TASK_PROMPT,
            TaskKind::Treatment => TREATMENT_TASK_PROMPT,
        }
    }
}

/// Run one consultation end to end. Replay scripts must follow the engine's
/// call order: MDT formation, then per round each unconverged specialist's
/// opinion followed by one reply per other active team member, then the
/// summary, then the final decision — attending calls under the `attending`
/// agent id, specialist calls under their department name.
pub fn consult(
    case: &PatientCase,
    config: &ConsultConfig,
    pool: &SpecialistPool,
    store: &MemoryStore,
    registry: &ToolRegistry,
    backend: &dyn ChatBackend,
    catalog: Option<&DrugCatalog>,
) -> Result<ConsultOutcome, EngineError> {
    if case.task() == TaskKind::Treatment && catalog.is_none() {
        return Err(EngineError::MissingCatalog);
    }
    let profile = render_profile(case, &[]);
    let mut ctx = ConsultContext {
        case,
        config,
        store,
        registry,
        catalog,
        profile,
        memory_text: None,
        tool_cache: ToolCache::new(),
    };

    let team: Vec<SpecialistRole> = if config.ablations.no_mdt {
        Vec::new()
    } else {
        form_mdt(
            &ctx.profile,
            pool,
            &config.role_strategy,
            backend,
            ATTENDING_SYSTEM_PROMPT,
        )?
    };

    let mut rounds: Vec<RoundRecord> = Vec::new();
    let mut all_opinions: Vec<Opinion> = Vec::new();
    let mut converged = vec![false; team.len()];
    // ΔO feedback; None until a meeting produces revision requests
    let mut feedback: Vec<Option<String>> = vec![None; team.len()];

    let mut round = 0u32;
    while !team.is_empty() && round < config.max_rounds && converged.iter().any(|c| !c) {
        let mut record = RoundRecord::default();
        for i in 0..team.len() {
            if converged[i] {
                continue;
            }
            let memory = ctx.memory_text()?;
            let tools = ctx.tool_text(round)?;
            let opinion_text = backend.complete(
                &team[i].department,
                &opinion_messages(&ctx, &team[i], feedback[i].as_deref(), &memory, &tools),
            )?;
            let opinion = Opinion {
                specialist: team[i].department.clone(),
                round,
                text: opinion_text,
            };
            all_opinions.push(opinion.clone());

            let active: Vec<&SpecialistRole> = team
                .iter()
                .enumerate()
                .filter(|(j, _)| !converged[*j])
                .map(|(_, role)| role)
                .collect();
            let delta = meeting_with_profile(&opinion, &active, backend, &ctx.profile)?;
            if delta.feedback_items.is_empty() {
                converged[i] = true;
            } else {
                feedback[i] = Some(render_feedback(&delta));
            }
            record.opinions.push(opinion);
            record.deltas.push(delta);
        }
        rounds.push(record);
        round += 1;
    }

    let report = summarize(&all_opinions, backend)?;
    let memory_text = ctx.memory_text()?;
    let tool_text = ctx.tool_text(round)?;

    // final decision: profile R, report DR, memory MR, tool feedback TR
    let mut final_user = ctx.patient_section();
    if !report.is_empty() {
        final_user.push_str("\n\nDiscussion report:\n");
        final_user.push_str(&report);
    }
    if !memory_text.is_empty() {
        final_user.push_str("\n\n");
        final_user.push_str(&memory_text);
    }
    if !tool_text.is_empty() {
        final_user.push_str("\n\nTool feedback:\n");
        final_user.push_str(&tool_text);
    }
    final_user.push_str("\n\n");
    final_user.push_str(ctx.task_prompt());

    let decision_raw = backend.complete(
        ATTENDING_AGENT_ID,
        &[
            ChatMessage::system(ATTENDING_SYSTEM_PROMPT),
            ChatMessage::user(final_user),
        ],
    )?;

    let decision = match case.task() {
        TaskKind::Diagnosis => extract_diagnoses(&decision_raw)
            .ok()
            .map(Decision::Diagnosis),
        TaskKind::Treatment => {
            let catalog = catalog.expect("checked above");
            Some(Decision::Treatment(extract_medications(
                &decision_raw,
                catalog,
            )))
        }
    };

    if config.write_back {
        if let Some(decision) = &decision {
            write_back(store, case, decision);
        }
    }

    let transcript = Transcript {
        case_id: case.case_key(),
        team: team.iter().map(|r| r.department.clone()).collect(),
        rounds,
        report,
        memory_text,
        tool_text,
        decision_raw,
    };
    Ok(ConsultOutcome {
        decision,
        transcript,
    })
}

fn opinion_messages(
    ctx: &ConsultContext<'_>,
    role: &SpecialistRole,
    feedback: Option<&str>,
    memory: &str,
    tools: &str,
) -> Vec<ChatMessage> {
    let mut user = ctx.patient_section();
    if let Some(feedback) = feedback {
        user.push_str("\n\nFeedback from the team on your previous opinion:\n");
        user.push_str(feedback);
    }
    if !memory.is_empty() {
        user.push_str("\n\n");
        user.push_str(memory);
    }
    if !tools.is_empty() {
        user.push_str("\n\nTool feedback:\n");
        user.push_str(tools);
    }
    user.push_str(&format!(
        "\n\nAs the {} specialist, state your assessment of this case and your recommendation.",
        role.department
    ));
    vec![
        ChatMessage::system(role.system_message.clone()),
        ChatMessage::user(user),
    ]
}

fn render_feedback(delta: &MeetingDelta) -> String {
    delta
        .feedback_items
        .iter()
        .map(|item| format!("- {}: {}", item.from, item.text))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Broadcast an opinion to every other active team member. Replies whose
/// first line starts with `AGREE` contribute nothing; `REVISE:` payloads are
/// collected in team order; anything else is kept whole as conservative
/// revision feedback.
pub fn meeting(
    opinion: &Opinion,
    active_team: &[&SpecialistRole],
    backend: &dyn ChatBackend,
) -> Result<MeetingDelta, EngineError> {
    meeting_with_profile(opinion, active_team, backend, "")
}

fn meeting_with_profile(
    opinion: &Opinion,
    active_team: &[&SpecialistRole],
    backend: &dyn ChatBackend,
    profile: &str,
) -> Result<MeetingDelta, EngineError> {
    let mut feedback_items = Vec::new();
    for role in active_team {
        if role.department == opinion.specialist {
            continue;
        }
        let mut user = String::new();
        if !profile.is_empty() {
            user.push_str("Patient case:\n");
            user.push_str(profile);
            user.push_str("\n\n");
        }
        user.push_str(&format!(
            "Your colleague from {} stated:\n{}\n\nIf you fully agree with this opinion, reply with a single line starting with AGREE. Otherwise reply with a line starting with REVISE: followed by your requested changes.",
            opinion.specialist, opinion.text
        ));
        let reply = backend.complete(
            &role.department,
            &[
                ChatMessage::system(role.system_message.clone()),
                ChatMessage::user(user),
            ],
        )?;
        match classify_reply(&reply) {
            MeetingReply::Agree => {}
            MeetingReply::Revise(text) => feedback_items.push(FeedbackItem {
                from: role.department.clone(),
                text,
            }),
        }
    }
    Ok(MeetingDelta {
        target: opinion.specialist.clone(),
        round: opinion.round,
        feedback_items,
    })
}

enum MeetingReply {
    Agree,
    Revise(String),
}

fn classify_reply(reply: &str) -> MeetingReply {
    let first_line = reply.lines().next().unwrap_or("").trim_start();
    if first_line.starts_with("AGREE") {
        MeetingReply::Agree
    } else if let Some(pos) = reply.find("REVISE:") {
        if reply[..pos].trim().is_empty() {
            MeetingReply::Revise(reply[pos + "REVISE:".len()..].trim().to_string())
        } else {
            MeetingReply::Revise(reply.trim().to_string())
        }
    } else {
        MeetingReply::Revise(reply.trim().to_string())
    }
}

/// One attending call over the round-ordered opinions; empty input (the MDT
/// ablation) yields an empty report without any backend call.
pub fn summarize(opinions: &[Opinion], backend: &dyn ChatBackend) -> Result<String, EngineError> {
    if opinions.is_empty() {
        return Ok(String::new());
    }
    let mut user = String::from(
        "The multi-disciplinary team has finished its discussion. The opinions, in order:\n\n",
    );
    for opinion in opinions {
        user.push_str(&format!(
            "[Round {}] {}: {}\n",
            opinion.round, opinion.specialist, opinion.text
        ));
    }
    user.push_str("\nSummarize the discussion into a final report for the patient's record.");
    let report = backend.complete(
        ATTENDING_AGENT_ID,
        &[
            ChatMessage::system(ATTENDING_SYSTEM_PROMPT),
            ChatMessage::user(user),
        ],
    )?;
    Ok(report)
}

fn write_back(store: &MemoryStore, case: &PatientCase, decision: &Decision) {
    let record = MemoryRecord {
        record_id: format!("self:{}", case.case_key()),
        kind: match case.task() {
            TaskKind::Diagnosis => RecordKind::DiagnosisCase,
            TaskKind::Treatment => RecordKind::Visit,
        },
        profile_snapshot: case.clone(),
        decision: decision.clone(),
        source: RecordSource::SelfGenerated,
    };
    if let Err(e) = store.update(record) {
        log::debug!("memory write-back skipped: {e}");
    }
}
