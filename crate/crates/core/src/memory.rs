//! Dynamic long-term memory: embedding-based top-k retrieval of similar
//! diagnosis cases, visit-ordered history retrieval for treatment, and
//! post-consultation updates. The store takes many concurrent readers and
//! exclusive writers.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::domain::{format_prior_visit, Decision, DiagnosisCase, PatientCase};

pub const DEFAULT_EMBEDDING_DIM: usize = 256;

#[derive(Debug, Error)]
pub enum MemoryError {
    #[error("profile has no tokens to embed")]
    EmptyProfile,
    #[error("duplicate record id: {0}")]
    DuplicateRecordId(String),
    #[error("record kind does not match its snapshot/decision types: {0}")]
    KindMismatch(String),
    #[error("embedding dimension mismatch: store uses {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("bad store line {line}: {message}")]
    BadLine { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordKind {
    DiagnosisCase,
    Visit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordSource {
    SeedCorpus,
    SelfGenerated,
}

/// A stored past consultation: the profile it answered and the decision made.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryRecord {
    pub record_id: String,
    pub kind: RecordKind,
    pub profile_snapshot: PatientCase,
    pub decision: Decision,
    pub source: RecordSource,
}

impl MemoryRecord {
    pub fn validate(&self) -> Result<(), MemoryError> {
        let consistent = matches!(
            (self.kind, &self.profile_snapshot, &self.decision),
            (RecordKind::DiagnosisCase, PatientCase::Diagnosis(_), Decision::Diagnosis(_))
                | (RecordKind::Visit, PatientCase::Visit(_), Decision::Treatment(_))
        );
        if consistent {
            Ok(())
        } else {
            Err(MemoryError::KindMismatch(self.record_id.clone()))
        }
    }
}

/// Fixed-dimension real vector with its Euclidean norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    pub values: Vec<f64>,
    pub norm: f64,
}

impl EmbeddingVector {
    fn from_values(values: Vec<f64>) -> Self {
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        Self { values, norm }
    }

    pub fn dimension(&self) -> usize {
        self.values.len()
    }
}

/// Cosine similarity; 0 when either vector has zero norm.
pub fn cosine_similarity(a: &EmbeddingVector, b: &EmbeddingVector) -> f64 {
    if a.norm == 0.0 || b.norm == 0.0 {
        return 0.0;
    }
    let dot: f64 = a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum();
    dot / (a.norm * b.norm)
}

/// Embedding provider; swap in an external service behind the same signature.
pub trait Embedder: Send + Sync {
    fn dimension(&self) -> usize;
    fn embed_case(&self, case: &DiagnosisCase) -> Result<EmbeddingVector, MemoryError>;
    fn embed_text(&self, text: &str) -> Result<EmbeddingVector, MemoryError>;
}

/// Deterministic default provider: feature-hash each token (symptom id, or
/// whitespace token for raw text) into D buckets with a ±1 sign drawn from a
/// second hash byte, then L2-normalize. Bag semantics, platform-independent.
#[derive(Debug, Clone)]
pub struct HashedBagEmbedder {
    dimension: usize,
}

impl HashedBagEmbedder {
    pub fn new(dimension: usize) -> Self {
        Self { dimension }
    }

    /// Bucket and sign for a token under this embedder's hash.
    pub fn token_slot(&self, token: &str) -> (usize, f64) {
        let digest = Sha256::digest(token.as_bytes());
        let bucket =
            u64::from_le_bytes(digest[0..8].try_into().expect("8 bytes")) % self.dimension as u64;
        let sign = if digest[8] & 1 == 0 { 1.0 } else { -1.0 };
        (bucket as usize, sign)
    }

    fn embed_tokens<'a>(
        &self,
        tokens: impl Iterator<Item = &'a str>,
    ) -> Result<EmbeddingVector, MemoryError> {
        let mut values = vec![0.0; self.dimension];
        let mut any = false;
        for token in tokens {
            if token.is_empty() {
                continue;
            }
            any = true;
            let (bucket, sign) = self.token_slot(token);
            values[bucket] += sign;
        }
        if !any {
            return Err(MemoryError::EmptyProfile);
        }
        let mut vector = EmbeddingVector::from_values(values);
        if vector.norm > 0.0 {
            for v in &mut vector.values {
                *v /= vector.norm;
            }
            vector.norm = 1.0;
        }
        Ok(vector)
    }
}

impl Default for HashedBagEmbedder {
    fn default() -> Self {
        Self::new(DEFAULT_EMBEDDING_DIM)
    }
}

impl Embedder for HashedBagEmbedder {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed_case(&self, case: &DiagnosisCase) -> Result<EmbeddingVector, MemoryError> {
        self.embed_tokens(case.symptoms.iter().map(|s| s.id.as_str()))
    }

    fn embed_text(&self, text: &str) -> Result<EmbeddingVector, MemoryError> {
        self.embed_tokens(text.split_whitespace())
    }
}

#[derive(Default)]
struct StoreInner {
    records: BTreeMap<String, MemoryRecord>,
    index: BTreeMap<String, EmbeddingVector>,
    // patient_id -> record ids ordered by visit_index
    visit_index: BTreeMap<String, Vec<String>>,
}

/// The memory store. Diagnosis records are indexed for similarity retrieval
/// the moment they are inserted; visit records are grouped per patient in
/// visit order.
pub struct MemoryStore {
    inner: RwLock<StoreInner>,
    embedder: Arc<dyn Embedder>,
    reads: AtomicU64,
}

impl MemoryStore {
    pub fn new(embedder: Arc<dyn Embedder>) -> Self {
        Self {
            inner: RwLock::new(StoreInner::default()),
            embedder,
            reads: AtomicU64::new(0),
        }
    }

    pub fn with_default_embedder() -> Self {
        Self::new(Arc::new(HashedBagEmbedder::default()))
    }

    pub fn embedder(&self) -> &Arc<dyn Embedder> {
        &self.embedder
    }

    pub fn dimension(&self) -> usize {
        self.embedder.dimension()
    }

    pub fn len(&self) -> usize {
        self.inner.read().expect("memory store lock").records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of retrieval calls served; backs the memory-ablation checks.
    pub fn read_count(&self) -> u64 {
        self.reads.load(Ordering::SeqCst)
    }

    /// Insert a record. Diagnosis records become retrievable immediately.
    pub fn update(&self, record: MemoryRecord) -> Result<(), MemoryError> {
        record.validate()?;
        let embedding = match &record.profile_snapshot {
            PatientCase::Diagnosis(case) => Some(self.embedder.embed_case(case)?),
            PatientCase::Visit(_) => None,
        };
        let mut inner = self.inner.write().expect("memory store lock");
        if inner.records.contains_key(&record.record_id) {
            return Err(MemoryError::DuplicateRecordId(record.record_id));
        }
        if let Some(vector) = embedding {
            inner.index.insert(record.record_id.clone(), vector);
        }
        if let PatientCase::Visit(v) = &record.profile_snapshot {
            // keep visit order even when inserted out of order
            let mut pairs: Vec<(u32, String)> = inner
                .visit_index
                .get(&v.patient_id)
                .map(|ids| {
                    ids.iter()
                        .map(|id| {
                            let idx = match &inner.records[id].profile_snapshot {
                                PatientCase::Visit(pv) => pv.visit_index,
                                PatientCase::Diagnosis(_) => 0,
                            };
                            (idx, id.clone())
                        })
                        .collect()
                })
                .unwrap_or_default();
            pairs.push((v.visit_index, record.record_id.clone()));
            pairs.sort();
            inner.visit_index.insert(
                v.patient_id.clone(),
                pairs.into_iter().map(|(_, id)| id).collect(),
            );
        }
        inner.records.insert(record.record_id.clone(), record);
        Ok(())
    }

    /// Insert a pre-embedded record, e.g. when loading a store whose vectors
    /// came from an external provider.
    pub fn update_with_vector(
        &self,
        record: MemoryRecord,
        vector: Option<EmbeddingVector>,
    ) -> Result<(), MemoryError> {
        match vector {
            Some(v) => {
                if v.dimension() != self.dimension() {
                    return Err(MemoryError::DimensionMismatch {
                        expected: self.dimension(),
                        got: v.dimension(),
                    });
                }
                record.validate()?;
                let mut inner = self.inner.write().expect("memory store lock");
                if inner.records.contains_key(&record.record_id) {
                    return Err(MemoryError::DuplicateRecordId(record.record_id));
                }
                inner.index.insert(record.record_id.clone(), v);
                inner.records.insert(record.record_id.clone(), record);
                Ok(())
            }
            None => self.update(record),
        }
    }

    /// The k diagnosis records most similar to the query case, cosine
    /// descending with ties broken by ascending record id. The query case
    /// itself (same case_id) is excluded so evaluation cannot leak gold
    /// answers.
    pub fn retrieve_similar(
        &self,
        profile: &DiagnosisCase,
        k: usize,
    ) -> Result<Vec<MemoryRecord>, MemoryError> {
        self.retrieve_similar_impl(profile, k, None)
    }

    /// Like [`MemoryStore::retrieve_similar`] but with the scan strategy
    /// pinned instead of size-based; results are identical either way. The
    /// benches compare the two paths through this entry point.
    pub fn retrieve_similar_forced(
        &self,
        profile: &DiagnosisCase,
        k: usize,
        parallel: bool,
    ) -> Result<Vec<MemoryRecord>, MemoryError> {
        self.retrieve_similar_impl(profile, k, Some(parallel))
    }

    fn retrieve_similar_impl(
        &self,
        profile: &DiagnosisCase,
        k: usize,
        force_parallel: Option<bool>,
    ) -> Result<Vec<MemoryRecord>, MemoryError> {
        self.reads.fetch_add(1, Ordering::SeqCst);
        let query = self.embedder.embed_case(profile)?;
        let inner = self.inner.read().expect("memory store lock");
        let mut scored = scan_similarities(&inner, &query, &profile.case_id, force_parallel);
        scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
        Ok(scored
            .into_iter()
            .take(k)
            .map(|(_, id)| inner.records[&id].clone())
            .collect())
    }

    /// Records for visits 1..n-1 of a patient, in visit order; empty for the
    /// first admission.
    pub fn retrieve_history(&self, patient_id: &str, visit_index: u32) -> Vec<MemoryRecord> {
        self.reads.fetch_add(1, Ordering::SeqCst);
        let inner = self.inner.read().expect("memory store lock");
        let Some(ids) = inner.visit_index.get(patient_id) else {
            return Vec::new();
        };
        ids.iter()
            .map(|id| &inner.records[id])
            .filter(|r| match &r.profile_snapshot {
                PatientCase::Visit(v) => v.visit_index < visit_index,
                PatientCase::Diagnosis(_) => false,
            })
            .cloned()
            .collect()
    }

    /// All records, id order. Snapshot copy.
    pub fn records(&self) -> Vec<MemoryRecord> {
        let inner = self.inner.read().expect("memory store lock");
        inner.records.values().cloned().collect()
    }

    /// Persist as JSON Lines plus a sidecar vector file, both stamped with
    /// the embedding dimension on their first line.
    pub fn save(&self, records_path: &Path, vectors_path: &Path) -> Result<(), MemoryError> {
        let inner = self.inner.read().expect("memory store lock");
        let stamp = serde_json::json!({ "dimension": self.dimension() });
        let mut rec_out = String::new();
        rec_out.push_str(&stamp.to_string());
        rec_out.push('\n');
        for record in inner.records.values() {
            rec_out.push_str(&serde_json::to_string(record).expect("record serializes"));
            rec_out.push('\n');
        }
        let mut vec_out = String::new();
        vec_out.push_str(&stamp.to_string());
        vec_out.push('\n');
        for (id, vector) in &inner.index {
            let row = serde_json::json!({ "record_id": id, "values": vector.values });
            vec_out.push_str(&row.to_string());
            vec_out.push('\n');
        }
        write_file(records_path, &rec_out)?;
        write_file(vectors_path, &vec_out)?;
        Ok(())
    }

    /// Load a store saved by [`MemoryStore::save`]. When the sidecar is
    /// missing, vectors are recomputed with this store's embedder.
    pub fn load(
        records_path: &Path,
        vectors_path: Option<&Path>,
        embedder: Arc<dyn Embedder>,
    ) -> Result<Self, MemoryError> {
        let store = Self::new(embedder);
        let mut vectors: BTreeMap<String, EmbeddingVector> = BTreeMap::new();
        if let Some(vp) = vectors_path {
            if vp.exists() {
                for (i, line) in read_lines(vp)?.into_iter().enumerate() {
                    if line.trim().is_empty() {
                        continue;
                    }
                    if i == 0 {
                        check_stamp(&line, store.dimension(), i)?;
                        continue;
                    }
                    #[derive(Deserialize)]
                    struct VectorRow {
                        record_id: String,
                        values: Vec<f64>,
                    }
                    let row: VectorRow =
                        serde_json::from_str(&line).map_err(|e| MemoryError::BadLine {
                            line: i + 1,
                            message: e.to_string(),
                        })?;
                    vectors.insert(row.record_id, EmbeddingVector::from_values(row.values));
                }
            }
        }
        for (i, line) in read_lines(records_path)?.into_iter().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            if i == 0 {
                check_stamp(&line, store.dimension(), i)?;
                continue;
            }
            let record: MemoryRecord =
                serde_json::from_str(&line).map_err(|e| MemoryError::BadLine {
                    line: i + 1,
                    message: e.to_string(),
                })?;
            let vector = vectors.remove(&record.record_id);
            store.update_with_vector(record, vector)?;
        }
        Ok(store)
    }
}

fn check_stamp(line: &str, expected: usize, line_no: usize) -> Result<(), MemoryError> {
    #[derive(Deserialize)]
    struct Stamp {
        dimension: usize,
    }
    let stamp: Stamp = serde_json::from_str(line).map_err(|e| MemoryError::BadLine {
        line: line_no + 1,
        message: format!("missing dimension stamp: {e}"),
    })?;
    if stamp.dimension != expected {
        return Err(MemoryError::DimensionMismatch {
            expected,
            got: stamp.dimension,
        });
    }
    Ok(())
}

fn write_file(path: &Path, content: &str) -> Result<(), MemoryError> {
    let mut file = std::fs::File::create(path).map_err(|e| MemoryError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    file.write_all(content.as_bytes()).map_err(|e| MemoryError::Io {
        path: path.display().to_string(),
        source: e,
    })
}

fn read_lines(path: &Path) -> Result<Vec<String>, MemoryError> {
    let file = std::fs::File::open(path).map_err(|e| MemoryError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    BufReader::new(file)
        .lines()
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| MemoryError::Io {
            path: path.display().to_string(),
            source: e,
        })
}

/// Stores at or above this size scan in parallel when the feature is on.
const PARALLEL_SCAN_THRESHOLD: usize = 4096;

/// Similarity of every indexed diagnosis record to `query`, excluding the
/// record whose case id matches `exclude_case_id`. Parallel when the store
/// is large and the `parallel` feature is on; the result set is identical
/// either way.
fn scan_similarities(
    inner: &StoreInner,
    query: &EmbeddingVector,
    exclude_case_id: &str,
    force_parallel: Option<bool>,
) -> Vec<(f64, String)> {
    let eligible = |id: &String| {
        let record = &inner.records[id];
        match &record.profile_snapshot {
            PatientCase::Diagnosis(c) => c.case_id != exclude_case_id,
            PatientCase::Visit(_) => false,
        }
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        let go_parallel =
            force_parallel.unwrap_or(inner.index.len() >= PARALLEL_SCAN_THRESHOLD);
        if go_parallel {
            return inner
                .index
                .par_iter()
                .filter(|(id, _)| eligible(id))
                .map(|(id, vector)| (cosine_similarity(query, vector), id.clone()))
                .collect();
        }
    }
    #[cfg(not(feature = "parallel"))]
    let _ = force_parallel;
    inner
        .index
        .iter()
        .filter(|(id, _)| eligible(id))
        .map(|(id, vector)| (cosine_similarity(query, vector), id.clone()))
        .collect()
}

/// Render retrieved diagnosis cases the way agents quote them:
/// "Consider these previous cases for reference: ...".
pub fn render_similar_cases(records: &[MemoryRecord]) -> String {
    if records.is_empty() {
        return String::new();
    }
    let mut lines = vec!["Consider these previous cases for reference:".to_string()];
    for (i, record) in records.iter().enumerate() {
        if let (PatientCase::Diagnosis(case), Decision::Diagnosis(decision)) =
            (&record.profile_snapshot, &record.decision)
        {
            let symptoms: Vec<&str> = case.symptoms.iter().map(|s| s.label.as_str()).collect();
            let diagnosis = if decision.ranked.is_empty() {
                "an unknown condition".to_string()
            } else {
                decision.ranked.join("; ")
            };
            lines.push(format!(
                "{}. Patient with symptoms: {} was diagnosed with {}.",
                i + 1,
                symptoms.join(", "),
                diagnosis
            ));
        }
    }
    lines.join("\n")
}

/// Render prior visits the way agents quote them:
/// "Consider these previous visits for reference: ...".
pub fn render_visit_history(records: &[MemoryRecord]) -> String {
    if records.is_empty() {
        return String::new();
    }
    let mut lines = vec!["Consider these previous visits for reference:".to_string()];
    for record in records {
        if let PatientCase::Visit(visit) = &record.profile_snapshot {
            let meds: Vec<String> = match &record.decision {
                Decision::Treatment(t) => t.medications.iter().cloned().collect(),
                Decision::Diagnosis(_) => Vec::new(),
            };
            lines.push(format_prior_visit(visit.visit_index, visit, &meds));
        }
    }
    lines.join("\n")
}

/// Seed a store from gold data: diagnosis cases keep their gold labels as
/// the stored decision; visits keep their gold prescriptions.
pub fn seed_record_from_case(case: &PatientCase) -> MemoryRecord {
    match case {
        PatientCase::Diagnosis(c) => MemoryRecord {
            record_id: c.case_id.clone(),
            kind: RecordKind::DiagnosisCase,
            profile_snapshot: case.clone(),
            decision: Decision::Diagnosis(crate::domain::DecisionDiagnosis {
                ranked: c.gold_diagnoses.clone(),
            }),
            source: RecordSource::SeedCorpus,
        },
        PatientCase::Visit(v) => MemoryRecord {
            record_id: v.visit_key(),
            kind: RecordKind::Visit,
            profile_snapshot: case.clone(),
            decision: Decision::Treatment(crate::domain::DecisionTreatment {
                medications: v.gold_medications.clone(),
            }),
            source: RecordSource::SeedCorpus,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{DecisionDiagnosis, DecisionTreatment, SymptomCode, VisitRecord};
    use std::collections::BTreeSet;

    fn case(id: &str, symptom_ids: &[&str]) -> DiagnosisCase {
        DiagnosisCase {
            case_id: id.to_string(),
            symptoms: symptom_ids
                .iter()
                .map(|s| SymptomCode::new(*s, format!("label {s}")).unwrap())
                .collect(),
            gold_diagnoses: vec!["gold".into()],
        }
    }

    fn diagnosis_record(id: &str, symptom_ids: &[&str], diagnosis: &str) -> MemoryRecord {
        MemoryRecord {
            record_id: id.to_string(),
            kind: RecordKind::DiagnosisCase,
            profile_snapshot: PatientCase::Diagnosis(case(id, symptom_ids)),
            decision: Decision::Diagnosis(DecisionDiagnosis {
                ranked: vec![diagnosis.to_string()],
            }),
            source: RecordSource::SeedCorpus,
        }
    }

    fn visit_record(patient: &str, visit: u32, meds: &[&str]) -> MemoryRecord {
        let v = VisitRecord {
            patient_id: patient.to_string(),
            visit_index: visit,
            diseases: vec!["D".into()],
            procedures: vec![],
            gold_medications: meds.iter().map(|m| m.to_string()).collect(),
        };
        MemoryRecord {
            record_id: v.visit_key(),
            kind: RecordKind::Visit,
            profile_snapshot: PatientCase::Visit(v),
            decision: Decision::Treatment(DecisionTreatment {
                medications: meds.iter().map(|m| m.to_string()).collect::<BTreeSet<_>>(),
            }),
            source: RecordSource::SeedCorpus,
        }
    }

    #[test]
    fn embedding_is_deterministic_and_bag_like() {
        let embedder = HashedBagEmbedder::default();
        let a = embedder.embed_case(&case("a", &["HP:1", "HP:2", "HP:3"])).unwrap();
        let b = embedder.embed_case(&case("b", &["HP:3", "HP:1", "HP:2"])).unwrap();
        assert_eq!(a, b);
        assert!((a.norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn disjoint_single_symptom_similarity_matches_hash_slots() {
        let embedder = HashedBagEmbedder::default();
        let a = embedder.embed_case(&case("a", &["HP:0000001"])).unwrap();
        let b = embedder.embed_case(&case("b", &["HP:0000002"])).unwrap();
        // oracle: single-token vectors are ±1 in one bucket, so cosine is
        // the sign product when buckets collide and 0 otherwise
        let (bucket_a, sign_a) = embedder.token_slot("HP:0000001");
        let (bucket_b, sign_b) = embedder.token_slot("HP:0000002");
        let expected = if bucket_a == bucket_b { sign_a * sign_b } else { 0.0 };
        assert_eq!(cosine_similarity(&a, &b), expected);
    }

    #[test]
    fn exact_duplicate_ranks_first() {
        let store = MemoryStore::with_default_embedder();
        store.update(diagnosis_record("dup", &["HP:1", "HP:2"], "X")).unwrap();
        store.update(diagnosis_record("other", &["HP:9", "HP:8"], "Y")).unwrap();
        let got = store.retrieve_similar(&case("query", &["HP:1", "HP:2"]), 2).unwrap();
        assert_eq!(got[0].record_id, "dup");
    }

    #[test]
    fn retrieval_excludes_the_query_case_itself() {
        let store = MemoryStore::with_default_embedder();
        store.update(diagnosis_record("self", &["HP:1", "HP:2"], "X")).unwrap();
        store.update(diagnosis_record("other", &["HP:1", "HP:3"], "Y")).unwrap();
        let got = store.retrieve_similar(&case("self", &["HP:1", "HP:2"]), 5).unwrap();
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].record_id, "other");
    }

    #[test]
    fn k_larger_than_store_returns_all_sorted() {
        let store = MemoryStore::with_default_embedder();
        store.update(diagnosis_record("a", &["HP:1"], "X")).unwrap();
        store.update(diagnosis_record("b", &["HP:2"], "Y")).unwrap();
        let got = store.retrieve_similar(&case("q", &["HP:1"]), 99).unwrap();
        assert_eq!(got.len(), 2);
        assert_eq!(got[0].record_id, "a");
    }

    #[test]
    fn retrieval_matches_exhaustive_scan_with_tie_breaks() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        let store = MemoryStore::with_default_embedder();
        let embedder = HashedBagEmbedder::default();
        let mut all: Vec<(String, Vec<String>)> = Vec::new();
        for i in 0..50 {
            let n = rng.gen_range(3..8);
            let ids: Vec<String> = (0..n)
                .map(|_| format!("HP:{:07}", rng.gen_range(0..40)))
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect();
            if ids.len() < 3 {
                continue;
            }
            let id = format!("rec-{i:03}");
            let refs: Vec<&str> = ids.iter().map(|s| s.as_str()).collect();
            store.update(diagnosis_record(&id, &refs, "D")).unwrap();
            all.push((id, ids));
        }
        let query = case("query", &["HP:0000003", "HP:0000007", "HP:0000011"]);
        let qv = embedder.embed_case(&query).unwrap();
        // brute-force oracle over every stored record
        let mut oracle: Vec<(f64, String)> = all
            .iter()
            .map(|(id, ids)| {
                let refs: Vec<&str> = ids.iter().map(|s| s.as_str()).collect();
                let v = embedder.embed_case(&case(id, &refs)).unwrap();
                (cosine_similarity(&qv, &v), id.clone())
            })
            .collect();
        oracle.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
        let expected: Vec<String> = oracle.iter().take(5).map(|(_, id)| id.clone()).collect();
        let got: Vec<String> = store
            .retrieve_similar(&query, 5)
            .unwrap()
            .into_iter()
            .map(|r| r.record_id)
            .collect();
        assert_eq!(got, expected);

        // prefix property
        let mut previous: Vec<String> = Vec::new();
        for k in 1..=10 {
            let now: Vec<String> = store
                .retrieve_similar(&query, k)
                .unwrap()
                .into_iter()
                .map(|r| r.record_id)
                .collect();
            assert_eq!(&now[..previous.len()], previous.as_slice());
            previous = now;
        }
    }

    #[test]
    fn history_returns_prior_visits_in_order() {
        let store = MemoryStore::with_default_embedder();
        store.update(visit_record("p1", 2, &["B"])).unwrap();
        store.update(visit_record("p1", 1, &["A"])).unwrap();
        store.update(visit_record("p1", 3, &["C"])).unwrap();
        store.update(visit_record("p2", 1, &["Z"])).unwrap();

        assert!(store.retrieve_history("p1", 1).is_empty());
        let history = store.retrieve_history("p1", 3);
        assert_eq!(history.len(), 2);
        assert_eq!(history[0].record_id, "p1#1");
        assert_eq!(history[1].record_id, "p1#2");
        let text = render_visit_history(&history);
        assert!(text.contains("has a prior medication record of"));
        assert!(text.contains("First admission"));
    }

    #[test]
    fn duplicate_id_rejected_and_reads_counted() {
        let store = MemoryStore::with_default_embedder();
        store.update(diagnosis_record("a", &["HP:1"], "X")).unwrap();
        assert!(matches!(
            store.update(diagnosis_record("a", &["HP:2"], "Y")),
            Err(MemoryError::DuplicateRecordId(_))
        ));
        let before = store.read_count();
        store.retrieve_similar(&case("q", &["HP:1"]), 1).unwrap();
        store.retrieve_history("p", 1);
        assert_eq!(store.read_count(), before + 2);
    }

    #[test]
    fn insert_then_retrieve_observes_record() {
        let store = MemoryStore::with_default_embedder();
        store.update(diagnosis_record("n1", &["HP:5", "HP:6"], "Z")).unwrap();
        let got = store.retrieve_similar(&case("q", &["HP:5", "HP:6"]), 1).unwrap();
        assert_eq!(got[0].record_id, "n1");
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let records_path = dir.path().join("store.jsonl");
        let vectors_path = dir.path().join("store.vectors.jsonl");
        let store = MemoryStore::with_default_embedder();
        store.update(diagnosis_record("a", &["HP:1", "HP:2"], "X")).unwrap();
        store.update(visit_record("p1", 1, &["A"])).unwrap();
        store.save(&records_path, &vectors_path).unwrap();

        let loaded = MemoryStore::load(
            &records_path,
            Some(&vectors_path),
            Arc::new(HashedBagEmbedder::default()),
        )
        .unwrap();
        assert_eq!(loaded.len(), 2);
        let got = loaded.retrieve_similar(&case("q", &["HP:1", "HP:2"]), 1).unwrap();
        assert_eq!(got[0].record_id, "a");
        assert_eq!(loaded.retrieve_history("p1", 2).len(), 1);
    }

    #[test]
    fn load_rejects_dimension_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let records_path = dir.path().join("store.jsonl");
        let store = MemoryStore::with_default_embedder();
        store.update(diagnosis_record("a", &["HP:1"], "X")).unwrap();
        store
            .save(&records_path, &dir.path().join("v.jsonl"))
            .unwrap();
        let result = MemoryStore::load(&records_path, None, Arc::new(HashedBagEmbedder::new(64)));
        assert!(matches!(
            result.err(),
            Some(MemoryError::DimensionMismatch { .. })
        ));
    }
}
