//! Medical tool registry and adapters: diagnostic predictors replayed from
//! fixtures or reached over HTTP, the drug-drug interaction graph, and the
//! drug monograph store. Tool feedback is concatenated deterministically in
//! registry order.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{normalize_label, DrugCatalog, SymptomCode};

#[derive(Debug, Error)]
pub enum ToolError {
    #[error("no fixture for tool {tool} with input key {input_key}")]
    FixtureMiss { tool: String, input_key: String },
    #[error("tool transport error: {0}")]
    TransportError(String),
    #[error("malformed tool output: {0}")]
    MalformedToolOutput(String),
    #[error("drug not in catalog: {0}")]
    UnknownDrug(String),
    #[error("no monograph for drug: {0}")]
    NotFound(String),
    #[error("self-loop edge on drug: {0}")]
    SelfLoop(String),
    #[error("duplicate tool name in registry: {0}")]
    DuplicateToolName(String),
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("csv error in {path}: {source}")]
    Csv { path: String, source: csv::Error },
    #[error("bad fixture line {line}: {message}")]
    BadFixtureLine { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToolInputKind {
    SymptomSet,
    DrugSet,
    DrugName,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToolMode {
    Live,
    Fixture,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ToolSpec {
    pub name: String,
    pub description: String,
    pub input_kind: ToolInputKind,
    pub mode: ToolMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreKind {
    PValue,
    Posterior,
    Score,
}

/// One entry of a diagnostic tool's top-10 output; list position is the rank.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedPrediction {
    pub disease: String,
    pub score: f64,
    pub score_kind: ScoreKind,
}

impl RankedPrediction {
    fn render(&self, position: usize) -> String {
        let score = match self.score_kind {
            ScoreKind::PValue => format!("p-value: {}", self.score),
            ScoreKind::Posterior => format!("posterior probability: {}%", self.score),
            ScoreKind::Score => format!("score: {}", self.score),
        };
        format!("{position}. {}, {score}", self.disease)
    }
}

/// Canonical lookup key for a symptom set: sorted ids joined by `|`.
pub fn symptom_input_key(symptoms: &[SymptomCode]) -> String {
    let mut ids: Vec<&str> = symptoms.iter().map(|s| s.id.as_str()).collect();
    ids.sort_unstable();
    ids.join("|")
}

/// Transport used by live adapters; injectable so tests can prove that
/// fixture mode never touches it.
pub trait ToolTransport: Send + Sync {
    fn post_json(&self, url: &str, body: &serde_json::Value) -> Result<String, ToolError>;
}

/// Default HTTP transport for live tool adapters.
pub struct HttpToolTransport {
    client: reqwest::blocking::Client,
}

impl HttpToolTransport {
    pub fn new() -> Self {
        Self {
            client: reqwest::blocking::Client::new(),
        }
    }
}

impl Default for HttpToolTransport {
    fn default() -> Self {
        Self::new()
    }
}

impl ToolTransport for HttpToolTransport {
    fn post_json(&self, url: &str, body: &serde_json::Value) -> Result<String, ToolError> {
        let resp = self
            .client
            .post(url)
            .json(body)
            .send()
            .map_err(|e| ToolError::TransportError(e.to_string()))?;
        if !resp.status().is_success() {
            return Err(ToolError::TransportError(format!(
                "HTTP {} from {url}",
                resp.status()
            )));
        }
        resp.text()
            .map_err(|e| ToolError::TransportError(e.to_string()))
    }
}

/// A diagnostic predictor (Phenomizer / LIRICAL / Phenobrain style). Fixture
/// mode answers from recorded entries keyed by the sorted symptom ids; live
/// mode posts the ids to the adapter endpoint.
pub struct DiagnosticTool {
    spec: ToolSpec,
    fixtures: FixtureEntries,
    endpoint: Option<String>,
    transport: Option<Arc<dyn ToolTransport>>,
}

impl DiagnosticTool {
    pub fn fixture(
        name: impl Into<String>,
        description: impl Into<String>,
        entries: FixtureEntries,
    ) -> Self {
        Self {
            spec: ToolSpec {
                name: name.into(),
                description: description.into(),
                input_kind: ToolInputKind::SymptomSet,
                mode: ToolMode::Fixture,
            },
            fixtures: entries,
            endpoint: None,
            transport: None,
        }
    }

    pub fn live(
        name: impl Into<String>,
        description: impl Into<String>,
        endpoint: impl Into<String>,
        transport: Arc<dyn ToolTransport>,
    ) -> Self {
        Self {
            spec: ToolSpec {
                name: name.into(),
                description: description.into(),
                input_kind: ToolInputKind::SymptomSet,
                mode: ToolMode::Live,
            },
            fixtures: BTreeMap::new(),
            endpoint: Some(endpoint.into()),
            transport: Some(transport),
        }
    }

    /// Attach a transport regardless of mode; fixture-mode lookups must not
    /// use it, which the purity tests rely on.
    pub fn with_transport(mut self, transport: Arc<dyn ToolTransport>) -> Self {
        self.transport = Some(transport);
        self
    }

    pub fn spec(&self) -> &ToolSpec {
        &self.spec
    }

    /// Top-10 ranked predictions for a symptom set.
    pub fn predict(&self, symptoms: &[SymptomCode]) -> Result<Vec<RankedPrediction>, ToolError> {
        let key = symptom_input_key(symptoms);
        let mut predictions = match self.spec.mode {
            ToolMode::Fixture => self
                .fixtures
                .get(&key)
                .cloned()
                .ok_or_else(|| ToolError::FixtureMiss {
                    tool: self.spec.name.clone(),
                    input_key: key,
                })?,
            ToolMode::Live => {
                let endpoint = self.endpoint.as_deref().ok_or_else(|| {
                    ToolError::TransportError("live tool without endpoint".into())
                })?;
                let transport = self.transport.as_ref().ok_or_else(|| {
                    ToolError::TransportError("live tool without transport".into())
                })?;
                let ids: Vec<&str> = symptoms.iter().map(|s| s.id.as_str()).collect();
                let body = serde_json::json!({ "tool": self.spec.name, "symptoms": ids });
                let text = transport.post_json(endpoint, &body)?;
                serde_json::from_str::<Vec<RankedPrediction>>(&text)
                    .map_err(|e| ToolError::MalformedToolOutput(e.to_string()))?
            }
        };
        predictions.truncate(10);
        Ok(predictions)
    }
}

/// Undirected drug-drug interaction graph over the catalog, edges annotated
/// with free text that only shows up in prompts, never in metrics.
#[derive(Debug, Clone)]
pub struct DdiGraph {
    catalog: DrugCatalog,
    // key: normalized pair, lexicographically ordered
    edges: BTreeMap<(String, String), String>,
}

impl DdiGraph {
    pub fn new(
        catalog: DrugCatalog,
        edges: Vec<(String, String, String)>,
    ) -> Result<Self, ToolError> {
        let mut map = BTreeMap::new();
        for (a, b, annotation) in edges {
            if !catalog.contains(&a) {
                return Err(ToolError::UnknownDrug(a));
            }
            if !catalog.contains(&b) {
                return Err(ToolError::UnknownDrug(b));
            }
            let (na, nb) = (normalize_label(&a), normalize_label(&b));
            if na == nb {
                return Err(ToolError::SelfLoop(a));
            }
            let key = if na < nb { (na, nb) } else { (nb, na) };
            map.insert(key, annotation);
        }
        Ok(Self {
            catalog,
            edges: map,
        })
    }

    pub fn load_csv(path: &Path, catalog: DrugCatalog) -> Result<Self, ToolError> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .from_path(path)
            .map_err(|e| ToolError::Csv {
                path: path.display().to_string(),
                source: e,
            })?;
        let mut edges = Vec::new();
        for row in reader.records() {
            let row = row.map_err(|e| ToolError::Csv {
                path: path.display().to_string(),
                source: e,
            })?;
            let a = row.get(0).unwrap_or("").to_string();
            let b = row.get(1).unwrap_or("").to_string();
            let annotation = row.get(2).unwrap_or("").to_string();
            edges.push((a, b, annotation));
        }
        Self::new(catalog, edges)
    }

    pub fn catalog(&self) -> &DrugCatalog {
        &self.catalog
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, a: &str, b: &str) -> bool {
        let (na, nb) = (normalize_label(a), normalize_label(b));
        let key = if na < nb { (na, nb) } else { (nb, na) };
        self.edges.contains_key(&key)
    }

    fn annotation(&self, a: &str, b: &str) -> Option<&str> {
        let (na, nb) = (normalize_label(a), normalize_label(b));
        let key = if na < nb { (na, nb) } else { (nb, na) };
        self.edges.get(&key).map(|s| s.as_str())
    }
}

/// All unordered interacting pairs within `meds`, sorted lexicographically
/// over canonical names.
pub fn ddi_pairs(
    graph: &DdiGraph,
    meds: &BTreeSet<String>,
) -> Result<Vec<(String, String, String)>, ToolError> {
    let mut canonical: Vec<String> = Vec::with_capacity(meds.len());
    for m in meds {
        match graph.catalog.canonical(m) {
            Some(c) => canonical.push(c.to_string()),
            None => return Err(ToolError::UnknownDrug(m.clone())),
        }
    }
    canonical.sort();
    canonical.dedup();
    let mut pairs = Vec::new();
    for i in 0..canonical.len() {
        for j in (i + 1)..canonical.len() {
            if let Some(ann) = graph.annotation(&canonical[i], &canonical[j]) {
                pairs.push((canonical[i].clone(), canonical[j].clone(), ann.to_string()));
            }
        }
    }
    pairs.sort();
    Ok(pairs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrugMonograph {
    pub name: String,
    pub description: String,
}

/// Drug monograph store, loaded from JSON Lines of `{name, description}`.
#[derive(Debug, Clone, Default)]
pub struct MonographDb {
    entries: BTreeMap<String, DrugMonograph>,
}

impl MonographDb {
    pub fn new(monographs: Vec<DrugMonograph>) -> Self {
        let mut entries = BTreeMap::new();
        for m in monographs {
            entries.insert(normalize_label(&m.name), m);
        }
        Self { entries }
    }

    pub fn load_jsonl(path: &Path) -> Result<Self, ToolError> {
        let file = std::fs::File::open(path).map_err(|e| ToolError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        let mut monographs = Vec::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| ToolError::Io {
                path: path.display().to_string(),
                source: e,
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let m: DrugMonograph =
                serde_json::from_str(&line).map_err(|e| ToolError::BadFixtureLine {
                    line: i + 1,
                    message: e.to_string(),
                })?;
            monographs.push(m);
        }
        Ok(Self::new(monographs))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn get(&self, name: &str) -> Option<&DrugMonograph> {
        self.entries.get(&normalize_label(name))
    }
}

/// Monograph for a catalog drug; a catalog drug without one is a typed
/// NotFound, not an empty string.
pub fn drug_info(
    db: &MonographDb,
    catalog: &DrugCatalog,
    name: &str,
) -> Result<DrugMonograph, ToolError> {
    if !catalog.contains(name) {
        return Err(ToolError::UnknownDrug(name.to_string()));
    }
    db.get(name)
        .cloned()
        .ok_or_else(|| ToolError::NotFound(name.to_string()))
}

/// A tool's feedback text, labeled with the tool it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledOutput {
    pub tool: String,
    pub text: String,
}

/// Concatenate labeled tool outputs in the given (registry) order, each
/// block headed by its tool name. Empty input yields the empty string, and
/// concatenation distributes over input splits.
pub fn aggregate_tool_feedback(results: &[LabeledOutput]) -> String {
    let mut out = String::new();
    for r in results {
        out.push_str(&r.tool);
        out.push_str(":\n");
        out.push_str(&r.text);
        out.push('\n');
    }
    out
}

/// Per-consultation memo so each tool runs at most once per input key.
pub type ToolCache = HashMap<String, String>;

/// Fixture file row: `{tool, input_key, output}`.
#[derive(Debug, Serialize, Deserialize)]
struct FixtureRow {
    tool: String,
    input_key: String,
    output: Vec<RankedPrediction>,
}

/// Fixture entries for one tool: input key to recorded predictions.
pub type FixtureEntries = BTreeMap<String, Vec<RankedPrediction>>;

/// Load a diagnostic fixture file, preserving first-appearance tool order.
pub fn load_diagnostic_fixtures(
    path: &Path,
) -> Result<Vec<(String, FixtureEntries)>, ToolError> {
    let file = std::fs::File::open(path).map_err(|e| ToolError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let mut order: Vec<String> = Vec::new();
    let mut by_tool: HashMap<String, FixtureEntries> = HashMap::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| ToolError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let row: FixtureRow =
            serde_json::from_str(&line).map_err(|e| ToolError::BadFixtureLine {
                line: i + 1,
                message: e.to_string(),
            })?;
        if !by_tool.contains_key(&row.tool) {
            order.push(row.tool.clone());
        }
        by_tool
            .entry(row.tool)
            .or_default()
            .insert(row.input_key, row.output);
    }
    Ok(order
        .into_iter()
        .map(|tool| {
            let entries = by_tool.remove(&tool).unwrap_or_default();
            (tool, entries)
        })
        .collect())
}

/// The registry of tools a consultation may draw on. Immutable after
/// construction; the invocation counter backs the tool-ablation checks.
pub struct ToolRegistry {
    diagnostics: Vec<DiagnosticTool>,
    ddi: Option<DdiGraph>,
    monographs: Option<MonographDb>,
    invocations: AtomicU64,
}

impl ToolRegistry {
    pub fn new() -> Self {
        Self {
            diagnostics: Vec::new(),
            ddi: None,
            monographs: None,
            invocations: AtomicU64::new(0),
        }
    }

    pub fn register_diagnostic(&mut self, tool: DiagnosticTool) -> Result<(), ToolError> {
        if self
            .diagnostics
            .iter()
            .any(|t| t.spec().name == tool.spec().name)
        {
            return Err(ToolError::DuplicateToolName(tool.spec().name.clone()));
        }
        self.diagnostics.push(tool);
        Ok(())
    }

    pub fn set_ddi_graph(&mut self, graph: DdiGraph) {
        self.ddi = Some(graph);
    }

    pub fn set_monographs(&mut self, db: MonographDb) {
        self.monographs = Some(db);
    }

    pub fn ddi_graph(&self) -> Option<&DdiGraph> {
        self.ddi.as_ref()
    }

    pub fn diagnostic_names(&self) -> Vec<&str> {
        self.diagnostics.iter().map(|t| t.spec().name.as_str()).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.diagnostics.is_empty() && self.ddi.is_none() && self.monographs.is_none()
    }

    /// Number of underlying tool executions since construction; cache hits
    /// do not count.
    pub fn invocation_count(&self) -> u64 {
        self.invocations.load(Ordering::SeqCst)
    }

    /// Run every diagnostic tool on the symptom set and aggregate the blocks
    /// in registry order. Results are memoized in `cache` by tool + input.
    pub fn diagnosis_feedback(
        &self,
        symptoms: &[SymptomCode],
        cache: &mut ToolCache,
        cache_epoch: u64,
    ) -> Result<String, ToolError> {
        let input_key = symptom_input_key(symptoms);
        let mut outputs = Vec::new();
        for tool in &self.diagnostics {
            let cache_key = format!("{}\u{1}{}\u{1}{}", tool.spec().name, input_key, cache_epoch);
            let text = match cache.get(&cache_key) {
                Some(t) => t.clone(),
                None => {
                    self.invocations.fetch_add(1, Ordering::SeqCst);
                    let preds = tool.predict(symptoms)?;
                    let rendered = preds
                        .iter()
                        .enumerate()
                        .map(|(i, p)| p.render(i + 1))
                        .collect::<Vec<_>>()
                        .join("\n");
                    cache.insert(cache_key, rendered.clone());
                    rendered
                }
            };
            outputs.push(LabeledOutput {
                tool: tool.spec().name.clone(),
                text,
            });
        }
        Ok(aggregate_tool_feedback(&outputs))
    }

    /// Therapeutic feedback: all interaction-graph edges within the
    /// medication space, then monographs for catalog drugs that have one.
    pub fn treatment_feedback(
        &self,
        cache: &mut ToolCache,
        cache_epoch: u64,
    ) -> Result<String, ToolError> {
        let mut outputs = Vec::new();
        if let Some(graph) = &self.ddi {
            let cache_key = format!("DDI-graph\u{1}catalog\u{1}{cache_epoch}");
            let text = match cache.get(&cache_key) {
                Some(t) => t.clone(),
                None => {
                    self.invocations.fetch_add(1, Ordering::SeqCst);
                    let meds: BTreeSet<String> =
                        graph.catalog.names().iter().cloned().collect();
                    let pairs = ddi_pairs(graph, &meds)?;
                    let mut lines =
                        vec!["The following are potential drug interactions:".to_string()];
                    for (a, b, ann) in pairs {
                        if ann.is_empty() {
                            lines.push(format!("{a} and {b} may interact."));
                        } else {
                            lines.push(format!("{a} and {b} {ann}."));
                        }
                    }
                    let rendered = lines.join("\n");
                    cache.insert(cache_key, rendered.clone());
                    rendered
                }
            };
            outputs.push(LabeledOutput {
                tool: "DDI-graph".to_string(),
                text,
            });
        }
        if let (Some(db), Some(graph)) = (&self.monographs, &self.ddi) {
            let cache_key = format!("DrugBank\u{1}catalog\u{1}{cache_epoch}");
            let text = match cache.get(&cache_key) {
                Some(t) => t.clone(),
                None => {
                    self.invocations.fetch_add(1, Ordering::SeqCst);
                    let mut lines =
                        vec!["More detailed drug information is provided below:".to_string()];
                    for name in graph.catalog.names() {
                        if let Some(m) = db.get(name) {
                            lines.push(format!("{}: {}", m.name, m.description));
                        }
                    }
                    let rendered = lines.join("\n");
                    cache.insert(cache_key, rendered.clone());
                    rendered
                }
            };
            outputs.push(LabeledOutput {
                tool: "DrugBank".to_string(),
                text,
            });
        }
        Ok(aggregate_tool_feedback(&outputs))
    }
}

impl Default for ToolRegistry {
    fn default() -> Self {
        Self::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct FailingTransport;

    impl ToolTransport for FailingTransport {
        fn post_json(&self, _url: &str, _body: &serde_json::Value) -> Result<String, ToolError> {
            panic!("network access attempted in fixture mode");
        }
    }

    fn symptoms(ids: &[&str]) -> Vec<SymptomCode> {
        ids.iter()
            .map(|id| SymptomCode::new(*id, format!("label {id}")).unwrap())
            .collect()
    }

    fn pred(d: &str, score: f64) -> RankedPrediction {
        RankedPrediction {
            disease: d.to_string(),
            score,
            score_kind: ScoreKind::PValue,
        }
    }

    #[test]
    fn fixture_lookup_preserves_order() {
        let syms = symptoms(&["HP:2", "HP:1"]);
        let key = symptom_input_key(&syms);
        assert_eq!(key, "HP:1|HP:2");
        let mut entries = BTreeMap::new();
        entries.insert(key, vec![pred("A", 0.1), pred("B", 0.2), pred("C", 0.3)]);
        let tool = DiagnosticTool::fixture("Phenomizer", "phenotype ranking", entries);
        let out = tool.predict(&syms).unwrap();
        assert_eq!(out.len(), 3);
        assert_eq!(out[0].disease, "A");
        assert_eq!(out[2].disease, "C");
    }

    #[test]
    fn fixture_miss_is_typed() {
        let tool = DiagnosticTool::fixture("Phenomizer", "", BTreeMap::new());
        let err = tool.predict(&symptoms(&["HP:1", "HP:2", "HP:3"])).unwrap_err();
        assert!(matches!(err, ToolError::FixtureMiss { .. }));
    }

    #[test]
    fn fixture_mode_never_touches_transport() {
        let syms = symptoms(&["HP:9"]);
        let mut entries = BTreeMap::new();
        entries.insert(symptom_input_key(&syms), vec![pred("X", 0.5)]);
        let tool = DiagnosticTool::fixture("Phenobrain", "", entries)
            .with_transport(Arc::new(FailingTransport));
        // would panic if the fixture path consulted the transport
        let out = tool.predict(&syms).unwrap();
        assert_eq!(out[0].disease, "X");
    }

    #[test]
    fn predictions_truncate_to_ten() {
        let syms = symptoms(&["HP:1"]);
        let mut entries = BTreeMap::new();
        entries.insert(
            symptom_input_key(&syms),
            (0..15).map(|i| pred(&format!("D{i}"), i as f64)).collect(),
        );
        let tool = DiagnosticTool::fixture("LIRICAL", "", entries);
        assert_eq!(tool.predict(&syms).unwrap().len(), 10);
    }

    fn abc_graph() -> DdiGraph {
        let catalog =
            DrugCatalog::new(vec!["A".into(), "B".into(), "C".into()]).unwrap();
        DdiGraph::new(
            catalog,
            vec![("A".into(), "B".into(), "may cause dizziness".into())],
        )
        .unwrap()
    }

    #[test]
    fn ddi_pairs_enumerates_edges_within_meds() {
        let graph = abc_graph();
        let all: BTreeSet<String> = ["A", "B", "C"].iter().map(|s| s.to_string()).collect();
        let pairs = ddi_pairs(&graph, &all).unwrap();
        assert_eq!(pairs.len(), 1);
        assert_eq!(pairs[0].0, "A");
        assert_eq!(pairs[0].1, "B");

        let single: BTreeSet<String> = ["A".to_string()].into();
        assert!(ddi_pairs(&graph, &single).unwrap().is_empty());

        let disjoint: BTreeSet<String> = ["C".to_string()].into();
        assert!(ddi_pairs(&graph, &disjoint).unwrap().is_empty());

        let unknown: BTreeSet<String> = ["Z".to_string()].into();
        assert!(matches!(
            ddi_pairs(&graph, &unknown),
            Err(ToolError::UnknownDrug(_))
        ));
    }

    #[test]
    fn ddi_graph_rejects_self_loops_and_foreign_drugs() {
        let catalog = DrugCatalog::new(vec!["A".into(), "B".into()]).unwrap();
        assert!(matches!(
            DdiGraph::new(catalog.clone(), vec![("A".into(), "a ".into(), String::new())]),
            Err(ToolError::SelfLoop(_))
        ));
        assert!(matches!(
            DdiGraph::new(catalog, vec![("A".into(), "Z".into(), String::new())]),
            Err(ToolError::UnknownDrug(_))
        ));
    }

    #[test]
    fn drug_info_paths() {
        let catalog = DrugCatalog::new(vec!["Ondansetron".into(), "Heparin".into()]).unwrap();
        let db = MonographDb::new(vec![DrugMonograph {
            name: "Ondansetron".into(),
            description: "A competitive serotonin type 3 receptor antagonist.".into(),
        }]);
        let info = drug_info(&db, &catalog, "ondansetron").unwrap();
        assert!(info.description.contains("serotonin type 3 receptor antagonist"));
        assert!(matches!(
            drug_info(&db, &catalog, "Aspirin"),
            Err(ToolError::UnknownDrug(_))
        ));
        assert!(matches!(
            drug_info(&db, &catalog, "Heparin"),
            Err(ToolError::NotFound(_))
        ));
    }

    #[test]
    fn aggregation_is_ordered_and_homomorphic() {
        assert_eq!(aggregate_tool_feedback(&[]), "");
        let x = vec![LabeledOutput {
            tool: "Phenomizer".into(),
            text: "1. A".into(),
        }];
        let y = vec![LabeledOutput {
            tool: "LIRICAL".into(),
            text: "1. B".into(),
        }];
        let both: Vec<LabeledOutput> = x.iter().chain(y.iter()).cloned().collect();
        let agg = aggregate_tool_feedback(&both);
        assert!(agg.find("Phenomizer").unwrap() < agg.find("LIRICAL").unwrap());
        assert_eq!(
            agg,
            format!("{}{}", aggregate_tool_feedback(&x), aggregate_tool_feedback(&y))
        );
        assert_eq!(agg, aggregate_tool_feedback(&both));
    }

    #[test]
    fn registry_counts_invocations_and_caches() {
        let syms = symptoms(&["HP:1", "HP:2", "HP:3"]);
        let mut entries = BTreeMap::new();
        entries.insert(symptom_input_key(&syms), vec![pred("A", 0.1)]);
        let mut registry = ToolRegistry::new();
        registry
            .register_diagnostic(DiagnosticTool::fixture("Phenomizer", "", entries))
            .unwrap();
        let mut cache = ToolCache::new();
        let first = registry.diagnosis_feedback(&syms, &mut cache, 0).unwrap();
        let second = registry.diagnosis_feedback(&syms, &mut cache, 0).unwrap();
        assert_eq!(first, second);
        assert_eq!(registry.invocation_count(), 1);
        // a new epoch forces re-execution
        registry.diagnosis_feedback(&syms, &mut cache, 1).unwrap();
        assert_eq!(registry.invocation_count(), 2);
    }

    #[test]
    fn duplicate_tool_names_rejected() {
        let mut registry = ToolRegistry::new();
        registry
            .register_diagnostic(DiagnosticTool::fixture("Phenomizer", "", BTreeMap::new()))
            .unwrap();
        assert!(matches!(
            registry.register_diagnostic(DiagnosticTool::fixture("Phenomizer", "", BTreeMap::new())),
            Err(ToolError::DuplicateToolName(_))
        ));
    }
}
