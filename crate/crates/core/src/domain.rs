//! Core domain types shared by every module: patient cases, the medication
//! space, decisions, and the canonical text rendering of patient profiles.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

#[derive(Debug, Error)]
pub enum DomainError {
    #[error("symptom code has an empty {0}")]
    EmptySymptomField(&'static str),
    #[error("case {case_id}: needs at least 3 symptoms, got {got}")]
    TooFewSymptoms { case_id: String, got: usize },
    #[error("case id is empty")]
    EmptyCaseId,
    #[error("visit {patient_id}/{visit_index}: diseases must be non-empty")]
    EmptyDiseases {
        patient_id: String,
        visit_index: u32,
    },
    #[error("visit index must be >= 1")]
    ZeroVisitIndex,
    #[error("drug catalog is empty")]
    EmptyCatalog,
    #[error("duplicate catalog entry after normalization: {0}")]
    DuplicateCatalogEntry(String),
    #[error("medication not in catalog: {0}")]
    MedicationNotInCatalog(String),
}

/// Lowercase, Unicode-NFC-normalize, trim, and collapse internal whitespace.
/// Idempotent; every set comparison in the crate works over this form.
pub fn normalize_label(s: &str) -> String {
    let folded: String = s.nfc().collect::<String>().to_lowercase();
    let mut out = String::with_capacity(folded.len());
    let mut pending_space = false;
    for ch in folded.trim().chars() {
        if ch.is_whitespace() {
            pending_space = true;
        } else {
            if pending_space && !out.is_empty() {
                out.push(' ');
            }
            pending_space = false;
            out.push(ch);
        }
    }
    out
}

/// An HPO-style coded symptom, e.g. `HP:0001250` / "Seizure".
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SymptomCode {
    pub id: String,
    pub label: String,
}

impl SymptomCode {
    pub fn new(id: impl Into<String>, label: impl Into<String>) -> Result<Self, DomainError> {
        let code = Self {
            id: id.into(),
            label: label.into(),
        };
        code.validate()?;
        Ok(code)
    }

    pub fn validate(&self) -> Result<(), DomainError> {
        if self.id.trim().is_empty() {
            return Err(DomainError::EmptySymptomField("id"));
        }
        if self.label.trim().is_empty() {
            return Err(DomainError::EmptySymptomField("label"));
        }
        Ok(())
    }
}

/// A differential-diagnosis query: symptoms only, no candidate disease list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosisCase {
    pub case_id: String,
    pub symptoms: Vec<SymptomCode>,
    pub gold_diagnoses: Vec<String>,
}

impl DiagnosisCase {
    pub fn validate(&self) -> Result<(), DomainError> {
        if self.case_id.trim().is_empty() {
            return Err(DomainError::EmptyCaseId);
        }
        if self.symptoms.len() < 3 {
            return Err(DomainError::TooFewSymptoms {
                case_id: self.case_id.clone(),
                got: self.symptoms.len(),
            });
        }
        for s in &self.symptoms {
            s.validate()?;
        }
        Ok(())
    }

    pub fn symptom_ids(&self) -> Vec<&str> {
        self.symptoms.iter().map(|s| s.id.as_str()).collect()
    }
}

/// One hospital admission for a medication-recommendation patient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisitRecord {
    pub patient_id: String,
    pub visit_index: u32,
    pub diseases: Vec<String>,
    pub procedures: Vec<String>,
    pub gold_medications: BTreeSet<String>,
}

impl VisitRecord {
    pub fn validate(&self) -> Result<(), DomainError> {
        if self.visit_index < 1 {
            return Err(DomainError::ZeroVisitIndex);
        }
        if self.diseases.is_empty() {
            return Err(DomainError::EmptyDiseases {
                patient_id: self.patient_id.clone(),
                visit_index: self.visit_index,
            });
        }
        Ok(())
    }

    /// Stable per-visit identifier used for memory records and transcripts.
    pub fn visit_key(&self) -> String {
        format!("{}#{}", self.patient_id, self.visit_index)
    }
}

/// The medication space M: an ordered list of drug names, unique after
/// normalization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrugCatalog {
    names: Vec<String>,
}

impl DrugCatalog {
    pub fn new(names: Vec<String>) -> Result<Self, DomainError> {
        if names.is_empty() {
            return Err(DomainError::EmptyCatalog);
        }
        let mut seen = BTreeSet::new();
        for name in &names {
            if !seen.insert(normalize_label(name)) {
                return Err(DomainError::DuplicateCatalogEntry(name.clone()));
            }
        }
        Ok(Self { names })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn contains(&self, name: &str) -> bool {
        let needle = normalize_label(name);
        self.names.iter().any(|n| normalize_label(n) == needle)
    }

    /// Canonical catalog spelling for a name, compared after normalization.
    pub fn canonical(&self, name: &str) -> Option<&str> {
        let needle = normalize_label(name);
        self.names
            .iter()
            .find(|n| normalize_label(n) == needle)
            .map(|s| s.as_str())
    }
}

/// Ranked differential-diagnosis answer, at most ten entries, already
/// de-duplicated under normalization (first occurrence wins).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DecisionDiagnosis {
    pub ranked: Vec<String>,
}

impl DecisionDiagnosis {
    pub fn from_ranked(entries: Vec<String>) -> Self {
        let mut seen = BTreeSet::new();
        let mut ranked = Vec::new();
        for e in entries {
            if seen.insert(normalize_label(&e)) {
                ranked.push(e);
            }
            if ranked.len() == 10 {
                break;
            }
        }
        Self { ranked }
    }
}

/// Recommended medication set, canonical catalog spellings only.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DecisionTreatment {
    pub medications: BTreeSet<String>,
}

impl DecisionTreatment {
    pub fn new(
        medications: BTreeSet<String>,
        catalog: &DrugCatalog,
    ) -> Result<Self, DomainError> {
        let mut canonical = BTreeSet::new();
        for m in medications {
            match catalog.canonical(&m) {
                Some(c) => {
                    canonical.insert(c.to_string());
                }
                None => return Err(DomainError::MedicationNotInCatalog(m)),
            }
        }
        Ok(Self {
            medications: canonical,
        })
    }
}

/// The final consultation answer, one variant per task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "snake_case")]
pub enum Decision {
    Diagnosis(DecisionDiagnosis),
    Treatment(DecisionTreatment),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Diagnosis,
    Treatment,
}

impl std::fmt::Display for TaskKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TaskKind::Diagnosis => write!(f, "diagnosis"),
            TaskKind::Treatment => write!(f, "treatment"),
        }
    }
}

/// Either kind of patient case, as handed to the consultation engine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PatientCase {
    Diagnosis(DiagnosisCase),
    Visit(VisitRecord),
}

impl PatientCase {
    pub fn task(&self) -> TaskKind {
        match self {
            PatientCase::Diagnosis(_) => TaskKind::Diagnosis,
            PatientCase::Visit(_) => TaskKind::Treatment,
        }
    }

    pub fn case_key(&self) -> String {
        match self {
            PatientCase::Diagnosis(c) => c.case_id.clone(),
            PatientCase::Visit(v) => v.visit_key(),
        }
    }

    pub fn validate(&self) -> Result<(), DomainError> {
        match self {
            PatientCase::Diagnosis(c) => c.validate(),
            PatientCase::Visit(v) => v.validate(),
        }
    }
}

/// A prior admission together with the medications prescribed then; feeds the
/// optional prior-visit section of a rendered profile and the treatment
/// memory text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorVisit {
    pub visit: VisitRecord,
    pub medications: Vec<String>,
}

fn ordinal_word(n: u32) -> String {
    match n {
        1 => "First".to_string(),
        2 => "Second".to_string(),
        3 => "Third".to_string(),
        4 => "Fourth".to_string(),
        5 => "Fifth".to_string(),
        6 => "Sixth".to_string(),
        7 => "Seventh".to_string(),
        8 => "Eighth".to_string(),
        9 => "Ninth".to_string(),
        10 => "Tenth".to_string(),
        other => format!("No. {other}"),
    }
}

/// One prior admission rendered in the style the agents quote back:
/// "First admission: Patient with a diagnosis of ... has a prior medication
/// record of: [...]".
pub fn format_prior_visit(ordinal: u32, visit: &VisitRecord, medications: &[String]) -> String {
    let meds = if medications.is_empty() {
        "[]".to_string()
    } else {
        format!("['{}']", medications.join("', '"))
    };
    let procedures = if visit.procedures.is_empty() {
        "none recorded".to_string()
    } else {
        visit.procedures.join("; ")
    };
    format!(
        "{} admission: Patient with a diagnosis of {} and a history of procedures including {} has a prior medication record of: {}.",
        ordinal_word(ordinal),
        visit.diseases.join("; "),
        procedures,
        meds
    )
}

/// Render the patient-agent utterance for a case. Pure: equal inputs yield
/// byte-equal output. `history` appends a prior-visit section when non-empty;
/// the engine passes an empty slice because prior visits travel through the
/// memory channel instead.
pub fn render_profile(case: &PatientCase, history: &[PriorVisit]) -> String {
    let mut text = match case {
        PatientCase::Diagnosis(c) => {
            let labels: Vec<&str> = c.symptoms.iter().map(|s| s.label.as_str()).collect();
            format!(
                "I am experiencing the following symptoms: {}. I would like to request you to diagnose the cause of my illness.",
                labels.join(", ")
            )
        }
        PatientCase::Visit(v) => {
            let procedures = if v.procedures.is_empty() {
                "none".to_string()
            } else {
                v.procedures.join("; ")
            };
            format!(
                "I was diagnosed the following diseases: {}, and I have received the following procedures: {}. I would like to request you to provide the most appropriate combination of medications for me.",
                v.diseases.join("; "),
                procedures
            )
        }
    };
    if !history.is_empty() {
        text.push_str("\n\nPrior visits:\n");
        let lines: Vec<String> = history
            .iter()
            .map(|h| format_prior_visit(h.visit.visit_index, &h.visit, &h.medications))
            .collect();
        text.push_str(&lines.join("\n"));
    }
    text
}
