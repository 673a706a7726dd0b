//! Dataset loading and the rare-disease cohort extraction pipeline: map ICD
//! codes to rare-disease identifiers, keep patients with at least two
//! complete admissions, and emit visit records in admission order.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{DiagnosisCase, VisitRecord};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("parse error in {path} line {line}: {message}")]
    ParseError {
        path: String,
        line: usize,
        message: String,
    },
    #[error("validation error at line {line}: {message}")]
    ValidationError { line: usize, message: String },
    #[error("no records to summarize")]
    EmptyInput,
}

/// Load diagnosis cases from JSON Lines, rejecting rows that break the
/// dataset rules (fewer than three symptoms, duplicate case ids) with their
/// line number.
pub fn load_diagnosis_cases(path: &Path) -> Result<Vec<DiagnosisCase>, DatasetError> {
    let file = std::fs::File::open(path).map_err(|e| DatasetError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let mut cases = Vec::new();
    let mut seen_ids = BTreeSet::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| DatasetError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let case: DiagnosisCase =
            serde_json::from_str(&line).map_err(|e| DatasetError::ParseError {
                path: path.display().to_string(),
                line: i + 1,
                message: e.to_string(),
            })?;
        case.validate().map_err(|e| DatasetError::ValidationError {
            line: i + 1,
            message: e.to_string(),
        })?;
        if !seen_ids.insert(case.case_id.clone()) {
            return Err(DatasetError::ValidationError {
                line: i + 1,
                message: format!("duplicate case_id {}", case.case_id),
            });
        }
        cases.push(case);
    }
    Ok(cases)
}

/// Load visit records from JSON Lines; per patient, visit indices must be
/// contiguous from 1.
pub fn load_visit_records(path: &Path) -> Result<Vec<VisitRecord>, DatasetError> {
    let file = std::fs::File::open(path).map_err(|e| DatasetError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let mut visits = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| DatasetError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let visit: VisitRecord =
            serde_json::from_str(&line).map_err(|e| DatasetError::ParseError {
                path: path.display().to_string(),
                line: i + 1,
                message: e.to_string(),
            })?;
        visit.validate().map_err(|e| DatasetError::ValidationError {
            line: i + 1,
            message: e.to_string(),
        })?;
        visits.push(visit);
    }
    let mut by_patient: BTreeMap<&str, Vec<u32>> = BTreeMap::new();
    for v in &visits {
        by_patient.entry(&v.patient_id).or_default().push(v.visit_index);
    }
    for (patient, mut indices) in by_patient {
        indices.sort_unstable();
        for (expected, got) in (1..).zip(indices.iter()) {
            if expected != *got {
                return Err(DatasetError::ValidationError {
                    line: 0,
                    message: format!(
                        "patient {patient}: visit indices not contiguous from 1 (found {got})"
                    ),
                });
            }
        }
    }
    Ok(visits)
}

/// Exact ICD-to-rare-disease mapping, keyed by ICD code. The version column
/// is kept for provenance but codes are the lookup key.
#[derive(Debug, Clone, Default)]
pub struct IcdMapping {
    entries: BTreeMap<String, BTreeSet<String>>,
}

impl IcdMapping {
    pub fn new(rows: Vec<(u8, String, String)>) -> Self {
        let mut entries: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for (_version, code, rare_id) in rows {
            entries.entry(code).or_default().insert(rare_id);
        }
        Self { entries }
    }

    /// Load from CSV `icd_version,icd_code,rare_id[,label]`; when a label
    /// column exists, only rows marked exact (label starting with "E") are
    /// kept.
    pub fn load_csv(path: &Path) -> Result<Self, DatasetError> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .from_path(path)
            .map_err(|e| DatasetError::ParseError {
                path: path.display().to_string(),
                line: 0,
                message: e.to_string(),
            })?;
        let mut rows = Vec::new();
        for (i, record) in reader.records().enumerate() {
            let record = record.map_err(|e| DatasetError::ParseError {
                path: path.display().to_string(),
                line: i + 2,
                message: e.to_string(),
            })?;
            let version: u8 = record
                .get(0)
                .unwrap_or("")
                .trim()
                .parse()
                .map_err(|_| DatasetError::ParseError {
                    path: path.display().to_string(),
                    line: i + 2,
                    message: format!("icd_version must be 9 or 10, got {:?}", record.get(0)),
                })?;
            if version != 9 && version != 10 {
                return Err(DatasetError::ParseError {
                    path: path.display().to_string(),
                    line: i + 2,
                    message: format!("icd_version must be 9 or 10, got {version}"),
                });
            }
            if let Some(label) = record.get(3) {
                if !label.trim().is_empty() && !label.trim().starts_with('E') {
                    continue;
                }
            }
            rows.push((
                version,
                record.get(1).unwrap_or("").trim().to_string(),
                record.get(2).unwrap_or("").trim().to_string(),
            ));
        }
        Ok(Self::new(rows))
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn rare_ids(&self, icd_code: &str) -> Option<&BTreeSet<String>> {
        self.entries.get(icd_code)
    }

    pub fn is_rare_code(&self, icd_code: &str) -> bool {
        self.entries.contains_key(icd_code)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosisRow {
    pub patient_id: String,
    pub visit_id: String,
    pub icd_version: u8,
    pub icd_code: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub admit_time: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcedureRow {
    pub patient_id: String,
    pub visit_id: String,
    pub code: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrescriptionRow {
    pub patient_id: String,
    pub visit_id: String,
    pub drug_name: String,
}

/// MIMIC-style CSV export of admissions: one diagnoses table, one procedures
/// table, one prescriptions table.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawAdmissionTables {
    pub diagnoses: Vec<DiagnosisRow>,
    pub procedures: Vec<ProcedureRow>,
    pub prescriptions: Vec<PrescriptionRow>,
}

impl RawAdmissionTables {
    /// Load `diagnoses.csv`, `procedures.csv`, and `prescriptions.csv` from
    /// a directory. The diagnoses file may carry an optional `admit_time`
    /// column used for admission ordering.
    pub fn load_dir(dir: &Path) -> Result<Self, DatasetError> {
        let diagnoses = read_csv(&dir.join("diagnoses.csv"), |record, headers| {
            let admit_idx = headers.iter().position(|h| h == "admit_time");
            Ok(DiagnosisRow {
                patient_id: field(record, 0),
                visit_id: field(record, 1),
                icd_version: field(record, 2).parse().map_err(|_| {
                    format!("icd_version must be numeric, got {:?}", record.get(2))
                })?,
                icd_code: field(record, 3),
                admit_time: admit_idx
                    .and_then(|i| record.get(i))
                    .map(|s| s.trim().to_string())
                    .filter(|s| !s.is_empty()),
            })
        })?;
        let procedures = read_csv(&dir.join("procedures.csv"), |record, _| {
            Ok(ProcedureRow {
                patient_id: field(record, 0),
                visit_id: field(record, 1),
                code: field(record, 2),
            })
        })?;
        let prescriptions = read_csv(&dir.join("prescriptions.csv"), |record, _| {
            Ok(PrescriptionRow {
                patient_id: field(record, 0),
                visit_id: field(record, 1),
                drug_name: field(record, 2),
            })
        })?;
        for row in &diagnoses {
            if row.icd_version != 9 && row.icd_version != 10 {
                return Err(DatasetError::ValidationError {
                    line: 0,
                    message: format!(
                        "icd_version must be 9 or 10, got {} for patient {}",
                        row.icd_version, row.patient_id
                    ),
                });
            }
        }
        Ok(Self {
            diagnoses,
            procedures,
            prescriptions,
        })
    }
}

fn field(record: &csv::StringRecord, i: usize) -> String {
    record.get(i).unwrap_or("").trim().to_string()
}

fn read_csv<T>(
    path: &Path,
    parse: impl Fn(&csv::StringRecord, &csv::StringRecord) -> Result<T, String>,
) -> Result<Vec<T>, DatasetError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)
        .map_err(|e| DatasetError::ParseError {
            path: path.display().to_string(),
            line: 0,
            message: e.to_string(),
        })?;
    let headers = reader
        .headers()
        .map_err(|e| DatasetError::ParseError {
            path: path.display().to_string(),
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| DatasetError::ParseError {
            path: path.display().to_string(),
            line: i + 2,
            message: e.to_string(),
        })?;
        rows.push(
            parse(&record, &headers).map_err(|message| DatasetError::ParseError {
                path: path.display().to_string(),
                line: i + 2,
                message,
            })?,
        );
    }
    Ok(rows)
}

#[derive(Debug, Default)]
struct AdmissionDraft {
    diseases: Vec<String>,
    procedures: Vec<String>,
    medications: BTreeSet<String>,
    admit_time: Option<String>,
}

/// The cohort pipeline: (1) drop admissions with empty diagnoses or empty
/// prescriptions, (2) mark a patient rare when any retained admission
/// carries a mapped ICD code, (3) keep rare patients with at least two
/// retained admissions, and emit visit records indexed in admission-time
/// order (admit time when present, else visit id). Incomplete admissions are
/// dropped before the two-admission filter so every emitted patient keeps at
/// least two visits and re-extraction of the output is the identity.
pub fn extract_rare_cohort(
    tables: &RawAdmissionTables,
    mapping: &IcdMapping,
) -> Vec<VisitRecord> {
    // (patient, visit) -> draft
    let mut drafts: BTreeMap<(String, String), AdmissionDraft> = BTreeMap::new();
    for row in &tables.diagnoses {
        let draft = drafts
            .entry((row.patient_id.clone(), row.visit_id.clone()))
            .or_default();
        if !row.icd_code.is_empty() && !draft.diseases.contains(&row.icd_code) {
            draft.diseases.push(row.icd_code.clone());
        }
        if draft.admit_time.is_none() {
            draft.admit_time = row.admit_time.clone();
        }
    }
    for row in &tables.procedures {
        let draft = drafts
            .entry((row.patient_id.clone(), row.visit_id.clone()))
            .or_default();
        if !row.code.is_empty() && !draft.procedures.contains(&row.code) {
            draft.procedures.push(row.code.clone());
        }
    }
    for row in &tables.prescriptions {
        let draft = drafts
            .entry((row.patient_id.clone(), row.visit_id.clone()))
            .or_default();
        if !row.drug_name.is_empty() {
            draft.medications.insert(row.drug_name.clone());
        }
    }

    // step: drop incomplete admissions
    let mut by_patient: BTreeMap<String, Vec<(String, AdmissionDraft)>> = BTreeMap::new();
    for ((patient, visit), draft) in drafts {
        if draft.diseases.is_empty() || draft.medications.is_empty() {
            continue;
        }
        by_patient.entry(patient).or_default().push((visit, draft));
    }

    let mut records = Vec::new();
    for (patient, mut admissions) in by_patient {
        let rare = admissions
            .iter()
            .any(|(_, d)| d.diseases.iter().any(|code| mapping.is_rare_code(code)));
        if !rare || admissions.len() < 2 {
            continue;
        }
        admissions.sort_by(|a, b| {
            let key_a = a.1.admit_time.as_deref().unwrap_or(a.0.as_str());
            let key_b = b.1.admit_time.as_deref().unwrap_or(b.0.as_str());
            key_a.cmp(key_b).then_with(|| a.0.cmp(&b.0))
        });
        for (i, (_, draft)) in admissions.into_iter().enumerate() {
            records.push(VisitRecord {
                patient_id: patient.clone(),
                visit_index: (i + 1) as u32,
                diseases: draft.diseases,
                procedures: draft.procedures,
                gold_medications: draft.medications,
            });
        }
    }
    records
}

/// Re-encode visit records as admission tables; feeds idempotence checking
/// and round-trip tooling. Visit ids are zero-padded indices so lexicographic
/// order matches admission order.
pub fn records_to_tables(records: &[VisitRecord]) -> RawAdmissionTables {
    let mut tables = RawAdmissionTables::default();
    for record in records {
        let visit_id = format!("{:06}", record.visit_index);
        for code in &record.diseases {
            tables.diagnoses.push(DiagnosisRow {
                patient_id: record.patient_id.clone(),
                visit_id: visit_id.clone(),
                icd_version: 10,
                icd_code: code.clone(),
                admit_time: None,
            });
        }
        for code in &record.procedures {
            tables.procedures.push(ProcedureRow {
                patient_id: record.patient_id.clone(),
                visit_id: visit_id.clone(),
                code: code.clone(),
            });
        }
        for drug in &record.gold_medications {
            tables.prescriptions.push(PrescriptionRow {
                patient_id: record.patient_id.clone(),
                visit_id: visit_id.clone(),
                drug_name: drug.clone(),
            });
        }
    }
    tables
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortStats {
    pub patients: usize,
    pub visits: usize,
    pub disease_space: usize,
    pub procedure_space: usize,
    pub medication_space: usize,
    pub avg_visits_per_patient: f64,
    pub max_visits_per_patient: usize,
    pub avg_diseases_per_visit: f64,
    pub max_diseases_per_visit: usize,
    pub avg_procedures_per_visit: f64,
    pub max_procedures_per_visit: usize,
    pub avg_medications_per_visit: f64,
    pub max_medications_per_visit: usize,
}

impl std::fmt::Display for CohortStats {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "patients                 {}", self.patients)?;
        writeln!(f, "visits                   {}", self.visits)?;
        writeln!(
            f,
            "space sizes (dis/proc/med) {} / {} / {}",
            self.disease_space, self.procedure_space, self.medication_space
        )?;
        writeln!(
            f,
            "visits per patient       avg {:.2} max {}",
            self.avg_visits_per_patient, self.max_visits_per_patient
        )?;
        writeln!(
            f,
            "diseases per visit       avg {:.2} max {}",
            self.avg_diseases_per_visit, self.max_diseases_per_visit
        )?;
        writeln!(
            f,
            "procedures per visit     avg {:.2} max {}",
            self.avg_procedures_per_visit, self.max_procedures_per_visit
        )?;
        write!(
            f,
            "medications per visit    avg {:.2} max {}",
            self.avg_medications_per_visit, self.max_medications_per_visit
        )
    }
}

/// Cohort summary counts in the shape of the dataset statistics tables.
pub fn cohort_stats(records: &[VisitRecord]) -> Result<CohortStats, DatasetError> {
    if records.is_empty() {
        return Err(DatasetError::EmptyInput);
    }
    let mut patients: BTreeMap<&str, usize> = BTreeMap::new();
    let mut diseases = BTreeSet::new();
    let mut procedures = BTreeSet::new();
    let mut medications = BTreeSet::new();
    for r in records {
        *patients.entry(r.patient_id.as_str()).or_default() += 1;
        diseases.extend(r.diseases.iter());
        procedures.extend(r.procedures.iter());
        medications.extend(r.gold_medications.iter());
    }
    let visits = records.len();
    let sum = |f: fn(&VisitRecord) -> usize| records.iter().map(f).sum::<usize>();
    let max = |f: fn(&VisitRecord) -> usize| records.iter().map(f).max().unwrap_or(0);
    Ok(CohortStats {
        patients: patients.len(),
        visits,
        disease_space: diseases.len(),
        procedure_space: procedures.len(),
        medication_space: medications.len(),
        avg_visits_per_patient: visits as f64 / patients.len() as f64,
        max_visits_per_patient: patients.values().copied().max().unwrap_or(0),
        avg_diseases_per_visit: sum(|r| r.diseases.len()) as f64 / visits as f64,
        max_diseases_per_visit: max(|r| r.diseases.len()),
        avg_procedures_per_visit: sum(|r| r.procedures.len()) as f64 / visits as f64,
        max_procedures_per_visit: max(|r| r.procedures.len()),
        avg_medications_per_visit: sum(|r| r.gold_medications.len()) as f64 / visits as f64,
        max_medications_per_visit: max(|r| r.gold_medications.len()),
    })
}

/// Write visit records as JSON Lines, one visit per line.
pub fn save_visit_records(records: &[VisitRecord], path: &Path) -> Result<(), DatasetError> {
    let mut out = String::new();
    for record in records {
        out.push_str(&serde_json::to_string(record).expect("record serializes"));
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| DatasetError::Io {
        path: path.display().to_string(),
        source: e,
    })
}
