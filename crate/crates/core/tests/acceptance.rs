//! Acceptance suite: one test per release criterion, each printing a
//! PASS line (visible with `--nocapture`). Every expected value is pinned
//! here against an independent oracle computed inside this file, never
//! against the implementation under test.
//!
//! Criterion 10 is informational only: with licensed hospital data and a
//! live backend, the evaluation emits the full table-shaped report; the
//! dataset-level prior DDI rate and mean prescription count on the
//! reference cohort are expected near 0.0755 and 11.27. That readout needs
//! data this repository must not ship, so it is documented (here and in the
//! README) rather than asserted.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mdt_core::backend::{ReplayBackend, ReplayScript, ScriptEntry};
use mdt_core::batch::{run_eval, BackendProvider, EvalContext, JudgeMode};
use mdt_core::datasets::{
    cohort_stats, extract_rare_cohort, records_to_tables, IcdMapping, RawAdmissionTables,
};
use mdt_core::domain::{
    normalize_label, Decision, DiagnosisCase, DrugCatalog, PatientCase, SymptomCode,
};
use mdt_core::engine::{consult, Ablations, ConsultConfig};
use mdt_core::memory::{
    cosine_similarity, HashedBagEmbedder, MemoryStore, Embedder,
};
use mdt_core::metrics::{
    avg_med, ddi_rate, f1, hit_at_k, jaccard, median_rank, CaseResult, MedianRank,
};
use mdt_core::parsing::{extract_medications, rank_exact};
use mdt_core::roster::{RoleStrategy, SpecialistPool};
use mdt_core::toolkit::{
    load_diagnostic_fixtures, DdiGraph, DiagnosticTool, MonographDb, ToolRegistry,
};
use mdt_core::TaskKind;

fn fixture(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(rel)
}

fn set(items: &[&str]) -> BTreeSet<String> {
    items.iter().map(|s| s.to_string()).collect()
}

// ---------------------------------------------------------------------------
// criterion 1: metric-oracle equivalence on randomized trials
// ---------------------------------------------------------------------------

#[test]
fn criterion_01_metric_oracle_equivalence() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_101);
    let universe: Vec<String> = (0..30).map(|i| format!("drug{i:02}")).collect();

    // jaccard + f1: independent counting via nested loops over vectors
    for _ in 0..1000 {
        let pred = random_subset(&mut rng, &universe, 0..=12);
        let gold = random_subset(&mut rng, &universe, 1..=12);
        let pred_vec: Vec<&String> = pred.iter().collect();
        let gold_vec: Vec<&String> = gold.iter().collect();
        let mut inter = 0usize;
        for p in &pred_vec {
            for g in &gold_vec {
                if p == g {
                    inter += 1;
                }
            }
        }
        let union = pred_vec.len() + gold_vec.len() - inter;
        let expected_jaccard = inter as f64 / union as f64;
        assert_eq!(jaccard(&pred, &gold).unwrap(), expected_jaccard);

        let expected_p = if pred_vec.is_empty() { 0.0 } else { inter as f64 / pred_vec.len() as f64 };
        let expected_r = inter as f64 / gold_vec.len() as f64;
        let expected_f1 = if expected_p + expected_r == 0.0 {
            0.0
        } else {
            2.0 * expected_p * expected_r / (expected_p + expected_r)
        };
        let got = f1(&pred, &gold).unwrap();
        assert_eq!(got.precision, expected_p);
        assert_eq!(got.recall, expected_r);
        assert_eq!(got.f1, expected_f1);
    }

    // ddi_rate: dense adjacency-matrix oracle
    for _ in 0..1000 {
        let n = universe.len();
        let mut adjacency = vec![vec![false; n]; n];
        let mut edges = Vec::new();
        for _ in 0..rng.gen_range(0..40) {
            let a = rng.gen_range(0..n);
            let b = rng.gen_range(0..n);
            if a != b && !adjacency[a][b] {
                adjacency[a][b] = true;
                adjacency[b][a] = true;
                edges.push((universe[a].clone(), universe[b].clone(), String::new()));
            }
        }
        let catalog = DrugCatalog::new(universe.clone()).unwrap();
        let graph = DdiGraph::new(catalog, edges).unwrap();
        let pred = random_subset(&mut rng, &universe, 0..=10);
        let indices: Vec<usize> = pred
            .iter()
            .map(|d| universe.iter().position(|u| u == d).unwrap())
            .collect();
        let mut hits = 0usize;
        let mut pairs = 0usize;
        for i in 0..indices.len() {
            for j in (i + 1)..indices.len() {
                pairs += 1;
                if adjacency[indices[i]][indices[j]] {
                    hits += 1;
                }
            }
        }
        let expected = if pairs == 0 { 0.0 } else { hits as f64 / pairs as f64 };
        assert_eq!(ddi_rate(&pred, &graph).unwrap(), expected);
    }

    // hit_at_k + median_rank: counting / sort-and-pick oracles
    for _ in 0..1000 {
        let n = rng.gen_range(1..40);
        let ranks: Vec<Option<u32>> = (0..n)
            .map(|_| {
                if rng.gen_bool(0.3) {
                    None
                } else {
                    Some(rng.gen_range(1..=10))
                }
            })
            .collect();
        let results: Vec<CaseResult> = ranks
            .iter()
            .enumerate()
            .map(|(i, r)| CaseResult::diagnosis(format!("c{i}"), *r, vec![]))
            .collect();
        let k = rng.gen_range(1..=10);
        let mut hits = 0usize;
        for v in ranks.iter().flatten() {
            if *v <= k {
                hits += 1;
            }
        }
        assert_eq!(hit_at_k(&results, k).unwrap(), hits as f64 / n as f64);

        let mut sentinel: Vec<u32> = ranks.iter().map(|r| r.unwrap_or(11)).collect();
        sentinel.sort_unstable();
        let median = if n % 2 == 1 {
            sentinel[n / 2] as f64
        } else {
            (sentinel[n / 2 - 1] as f64 + sentinel[n / 2] as f64) / 2.0
        };
        let expected = if median > 10.0 {
            MedianRank::BeyondTop10
        } else {
            MedianRank::Rank(median)
        };
        assert_eq!(median_rank(&results).unwrap(), expected);
    }

    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 10.0, "took {elapsed:?}");
    println!("acceptance 1 (metric-oracle equivalence, 1000 trials each): PASS in {elapsed:?}");
}

fn random_subset(
    rng: &mut ChaCha8Rng,
    universe: &[String],
    size: std::ops::RangeInclusive<usize>,
) -> BTreeSet<String> {
    let n = rng.gen_range(size);
    let mut out = BTreeSet::new();
    while out.len() < n {
        out.insert(universe[rng.gen_range(0..universe.len())].clone());
    }
    out
}

// ---------------------------------------------------------------------------
// criterion 2: hand-derived metric values
// ---------------------------------------------------------------------------

#[test]
fn criterion_02_hand_derived_metric_values() {
    assert_eq!(
        jaccard(&set(&["B", "C", "D"]), &set(&["A", "B", "C"])).unwrap(),
        0.5
    );

    let catalog = DrugCatalog::new(vec!["A".into(), "B".into(), "C".into()]).unwrap();
    let graph = DdiGraph::new(catalog, vec![("A".into(), "B".into(), String::new())]).unwrap();
    assert_eq!(ddi_rate(&set(&["A", "B", "C"]), &graph).unwrap(), 1.0 / 3.0);

    let results = vec![
        CaseResult::diagnosis("c1", Some(2), vec![]),
        CaseResult::diagnosis("c2", None, vec![]),
        CaseResult::diagnosis("c3", None, vec![]),
    ];
    assert_eq!(median_rank(&results).unwrap(), MedianRank::BeyondTop10);
    println!("acceptance 2 (hand-derived metric values): PASS");
}

// ---------------------------------------------------------------------------
// criterion 3: termination and determinism
// ---------------------------------------------------------------------------

fn entry(agent: &str, response: &str) -> ScriptEntry {
    ScriptEntry {
        agent_id: agent.into(),
        match_key: String::new(),
        response: response.into(),
    }
}

fn tiny_case() -> PatientCase {
    PatientCase::Diagnosis(DiagnosisCase {
        case_id: "adv".into(),
        symptoms: vec![
            SymptomCode::new("HP:1", "Syncope").unwrap(),
            SymptomCode::new("HP:2", "Muscle weakness").unwrap(),
            SymptomCode::new("HP:3", "ST segment elevation").unwrap(),
        ],
        gold_diagnoses: vec!["Brugada Syndrome".into()],
    })
}

fn never_agree_script(rounds: u32) -> ReplayScript {
    let mut entries = vec![entry("attending", "Team: Cardiology, Neurology")];
    for _ in 0..rounds {
        entries.push(entry("Cardiology", "opinion C"));
        entries.push(entry("Neurology", "REVISE: disagree"));
        entries.push(entry("Neurology", "opinion N"));
        entries.push(entry("Cardiology", "REVISE: disagree"));
    }
    entries.push(entry("attending", "summary"));
    entries.push(entry("attending", "DIAGNOSIS:\n1. X"));
    ReplayScript::new(entries)
}

#[test]
fn criterion_03_termination_and_determinism() {
    let start = Instant::now();
    let pool = SpecialistPool::default_pool();
    let store = MemoryStore::with_default_embedder();
    let registry = ToolRegistry::new();

    for max_rounds in [1u32, 3, 5] {
        let config = ConsultConfig {
            max_rounds,
            ablations: Ablations {
                no_memory: true,
                no_tools: true,
                ..Ablations::default()
            },
            ..ConsultConfig::default()
        };
        let run = || {
            let backend = ReplayBackend::new(never_agree_script(max_rounds));
            consult(&tiny_case(), &config, &pool, &store, &registry, &backend, None).unwrap()
        };
        let first = run();
        let second = run();
        assert_eq!(
            first.transcript.rounds.len(),
            max_rounds as usize,
            "adversarial script must run exactly R={max_rounds} rounds"
        );
        assert_eq!(
            serde_json::to_string(&first.transcript).unwrap(),
            serde_json::to_string(&second.transcript).unwrap(),
            "replay transcripts must be byte-identical"
        );
    }

    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 5.0, "took {elapsed:?}");
    println!("acceptance 3 (termination in exactly R rounds; byte-identical replays): PASS in {elapsed:?}");
}

// ---------------------------------------------------------------------------
// criterion 4: case-study end-to-end replays
// ---------------------------------------------------------------------------

fn load_case1() -> (PatientCase, MemoryStore, ToolRegistry, ReplayBackend) {
    let case: DiagnosisCase =
        serde_json::from_str(&std::fs::read_to_string(fixture("case1/case.json")).unwrap())
            .unwrap();
    let store = MemoryStore::load(
        &fixture("case1/memory.jsonl"),
        None,
        Arc::new(HashedBagEmbedder::default()),
    )
    .unwrap();
    let mut registry = ToolRegistry::new();
    for (tool, entries) in load_diagnostic_fixtures(&fixture("case1/tools.jsonl")).unwrap() {
        registry
            .register_diagnostic(DiagnosticTool::fixture(tool, "", entries))
            .unwrap();
    }
    let backend = ReplayBackend::from_file(&fixture("case1/script.jsonl")).unwrap();
    (PatientCase::Diagnosis(case), store, registry, backend)
}

#[test]
fn criterion_04a_case1_diagnosis_replay() {
    let (case, store, registry, backend) = load_case1();
    let pool = SpecialistPool::default_pool();
    let config = ConsultConfig::default();

    let profile = mdt_core::render_profile(&case, &[]);
    assert!(profile.contains("I am experiencing the following symptoms: Urinary hesitancy, Urinary incontinence, Prostatitis"));

    // direct fixture lookup: the seventh Phenomizer prediction
    let symptoms = match &case {
        PatientCase::Diagnosis(c) => c.symptoms.clone(),
        _ => unreachable!(),
    };
    let fixtures = load_diagnostic_fixtures(&fixture("case1/tools.jsonl")).unwrap();
    let (name, entries) = fixtures.into_iter().next().unwrap();
    assert_eq!(name, "Phenomizer");
    let phenomizer = DiagnosticTool::fixture(name, "", entries);
    let predictions = phenomizer.predict(&symptoms).unwrap();
    assert!(predictions[6].disease.contains("BRUGADA SYNDROME 4"));
    assert_eq!(predictions[6].score, 0.1207);

    let outcome = consult(&case, &config, &pool, &store, &registry, &backend, None).unwrap();

    // the seventh ranked Phenomizer prediction carried p-value 0.1207
    assert!(outcome.transcript.tool_text.contains("7. BRUGADA SYNDROME 4; BRGDA4, p-value: 0.1207"));
    assert!(outcome.transcript.memory_text.contains("was diagnosed with Brugada syndrome"));
    assert_eq!(outcome.transcript.team.len(), 15);
    assert_eq!(outcome.transcript.team[0], "Urology");

    let decision = match outcome.decision.expect("decision parses") {
        Decision::Diagnosis(d) => d,
        Decision::Treatment(_) => panic!("wrong task"),
    };
    assert_eq!(decision.ranked[0], "Brugada Syndrome");
    let golds = vec!["Brugada Syndrome".to_string()];
    assert_eq!(rank_exact(&decision, &golds), Some(1));
    let results = vec![CaseResult::diagnosis("case-1", Some(1), outcome.transcript.team.clone())];
    assert_eq!(hit_at_k(&results, 1).unwrap(), 1.0);
    println!("acceptance 4a (case-study diagnosis replay: gold at rank 1, Hit@1 = 1.0): PASS");
}

fn case2_catalog() -> DrugCatalog {
    let names: Vec<String> = std::fs::read_to_string(fixture("case2/catalog.txt"))
        .unwrap()
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.to_string())
        .collect();
    DrugCatalog::new(names).unwrap()
}

#[test]
fn criterion_04b_case2_single_agent_extraction() {
    let catalog = case2_catalog();
    let reply = std::fs::read_to_string(fixture("case2/single_agent_reply.txt")).unwrap();
    let extracted = extract_medications(&reply, &catalog);
    assert_eq!(extracted.medications.len(), 21, "extraction must find exactly 21 drugs");
    assert!(extracted.medications.contains("Desmopressin Nasal"));
    assert!(!extracted.medications.contains("OxycoDONE (Immediate Release)"));
    assert!(extracted.medications.contains("*NF* Epirubicin"));
    assert!(extracted.medications.contains("PHENobarbital"));
    // "Potassium Chloride" appears bare here, not as the longer catalog name
    assert!(extracted.medications.contains("Potassium Chloride"));
    assert!(!extracted.medications.contains("Potassium Chloride Replacement (Oncology)"));

    let visit: mdt_core::VisitRecord =
        serde_json::from_str(&std::fs::read_to_string(fixture("case2/visit.json")).unwrap())
            .unwrap();
    let results = vec![CaseResult::treatment(
        "case-2-patient#4",
        extracted.medications.clone(),
        visit.gold_medications.clone(),
        vec![],
    )];
    assert_eq!(avg_med(&results).unwrap(), 21.0);
    println!("acceptance 4b (case-study single-agent extraction: 21 drugs, #MED = 21.0): PASS");
}

#[test]
fn criterion_04c_case2_treatment_replay() {
    let visit: mdt_core::VisitRecord =
        serde_json::from_str(&std::fs::read_to_string(fixture("case2/visit.json")).unwrap())
            .unwrap();
    let case = PatientCase::Visit(visit.clone());
    let catalog = case2_catalog();
    let store = MemoryStore::load(
        &fixture("case2/memory.jsonl"),
        None,
        Arc::new(HashedBagEmbedder::default()),
    )
    .unwrap();
    let mut registry = ToolRegistry::new();
    registry.set_ddi_graph(DdiGraph::load_csv(&fixture("case2/ddi.csv"), catalog.clone()).unwrap());
    registry.set_monographs(MonographDb::load_jsonl(&fixture("case2/monographs.jsonl")).unwrap());
    let backend = ReplayBackend::from_file(&fixture("case2/script.jsonl")).unwrap();
    let pool = SpecialistPool::default_pool();
    let config = ConsultConfig::default();
    let outcome = consult(&case, &config, &pool, &store, &registry, &backend, Some(&catalog)).unwrap();

    assert_eq!(outcome.transcript.team.len(), 23, "duplicate department collapses");
    assert!(outcome.transcript.memory_text.contains("has a prior medication record of"));
    assert!(outcome.transcript.memory_text.contains("First admission"));
    assert!(outcome.transcript.tool_text.contains("serotonin type 3 receptor antagonist"));
    assert!(outcome.transcript.tool_text.contains("may cause Myringitis"));

    let decision = match outcome.decision.expect("decision parses") {
        Decision::Treatment(t) => t,
        Decision::Diagnosis(_) => panic!("wrong task"),
    };
    assert_eq!(decision.medications.len(), 21);
    assert!(decision.medications.contains("Potassium Chloride Replacement (Oncology)"));
    assert!(!decision.medications.contains("Potassium Chloride"));

    // 17 of the 21 recommendations are in the 22-drug gold set
    let inter = decision
        .medications
        .intersection(&visit.gold_medications)
        .count();
    assert_eq!(inter, 17);
    assert_eq!(
        jaccard(&decision.medications, &visit.gold_medications).unwrap(),
        17.0 / 26.0
    );
    println!("acceptance 4c (case-study treatment replay: 21 recommendations, 17 matching gold): PASS");
}

// ---------------------------------------------------------------------------
// criterion 5: memory retrieval against the exhaustive scan
// ---------------------------------------------------------------------------

#[test]
fn criterion_05_memory_retrieval_matches_exhaustive_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(555);
    let store = MemoryStore::with_default_embedder();
    let embedder = HashedBagEmbedder::default();
    let mut profiles: Vec<(String, DiagnosisCase)> = Vec::new();
    for i in 0..50 {
        let n = rng.gen_range(3..9);
        let ids: BTreeSet<String> = (0..n)
            .map(|_| format!("HP:{:07}", rng.gen_range(0..25)))
            .collect();
        if ids.len() < 3 {
            continue;
        }
        let case = DiagnosisCase {
            case_id: format!("syn-{i:03}"),
            symptoms: ids
                .iter()
                .map(|id| SymptomCode::new(id.clone(), format!("label {id}")).unwrap())
                .collect(),
            gold_diagnoses: vec![format!("disease {i}")],
        };
        store
            .update(mdt_core::memory::seed_record_from_case(&PatientCase::Diagnosis(case.clone())))
            .unwrap();
        profiles.push((case.case_id.clone(), case));
    }

    let query = DiagnosisCase {
        case_id: "query".into(),
        symptoms: ["HP:0000003", "HP:0000007", "HP:0000011", "HP:0000019"]
            .iter()
            .map(|id| SymptomCode::new(*id, format!("label {id}")).unwrap())
            .collect(),
        gold_diagnoses: vec!["unused".into()],
    };
    // exhaustive oracle: embed every record, sort by (similarity desc, id asc)
    let qv = embedder.embed_case(&query).unwrap();
    let mut oracle: Vec<(f64, String)> = profiles
        .iter()
        .map(|(id, case)| (cosine_similarity(&qv, &embedder.embed_case(case).unwrap()), id.clone()))
        .collect();
    oracle.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1)));

    let top5: Vec<String> = store
        .retrieve_similar(&query, 5)
        .unwrap()
        .into_iter()
        .map(|r| r.record_id)
        .collect();
    let expected: Vec<String> = oracle.iter().take(5).map(|(_, id)| id.clone()).collect();
    assert_eq!(top5, expected, "top-5 must equal the exhaustive scan with tie-breaks");

    let mut previous: Vec<String> = Vec::new();
    for k in 1..=10 {
        let now: Vec<String> = store
            .retrieve_similar(&query, k)
            .unwrap()
            .into_iter()
            .map(|r| r.record_id)
            .collect();
        assert_eq!(&now[..previous.len()], previous.as_slice(), "prefix property at k={k}");
        previous = now;
    }
    println!("acceptance 5 (memory top-5 equals exhaustive scan; prefix property k=1..10): PASS");
}

// ---------------------------------------------------------------------------
// criterion 6: ablation contracts across the full factorial
// ---------------------------------------------------------------------------

/// Replay entries for a 2-specialist consultation where everyone agrees
/// immediately, shaped exactly like the engine's call order.
fn consensus_script(with_team: bool) -> ReplayScript {
    let mut entries = Vec::new();
    if with_team {
        entries.push(entry("attending", "Team: Cardiology, Neurology"));
        entries.push(entry("Cardiology", "opinion C"));
        entries.push(entry("Neurology", "AGREE"));
        entries.push(entry("Neurology", "opinion N"));
        entries.push(entry("attending", "summary"));
    }
    entries.push(entry("attending", "DIAGNOSIS:\n1. Brugada Syndrome"));
    ReplayScript::new(entries)
}

#[test]
fn criterion_06_ablation_factorial_contracts() {
    let start = Instant::now();
    let pool = SpecialistPool::default_pool();

    for bits in 0..8u8 {
        let ablations = Ablations {
            no_mdt: bits & 1 != 0,
            no_memory: bits & 2 != 0,
            no_tools: bits & 4 != 0,
        };
        // fresh instrumented store and registry per run
        let store = MemoryStore::with_default_embedder();
        store
            .update(mdt_core::memory::seed_record_from_case(&tiny_case()))
            .unwrap();
        let mut registry = ToolRegistry::new();
        let mut entries = BTreeMap::new();
        let symptoms = match tiny_case() {
            PatientCase::Diagnosis(c) => c.symptoms,
            _ => unreachable!(),
        };
        entries.insert(
            mdt_core::toolkit::symptom_input_key(&symptoms),
            vec![mdt_core::toolkit::RankedPrediction {
                disease: "BRUGADA SYNDROME 4".into(),
                score: 0.1207,
                score_kind: mdt_core::toolkit::ScoreKind::PValue,
            }],
        );
        registry
            .register_diagnostic(DiagnosticTool::fixture("Phenomizer", "", entries))
            .unwrap();

        let config = ConsultConfig {
            ablations,
            ..ConsultConfig::default()
        };
        let mut query_case = tiny_case();
        if let PatientCase::Diagnosis(c) = &mut query_case {
            c.case_id = "query".into();
        }
        let backend = ReplayBackend::new(consensus_script(!ablations.no_mdt));
        let outcome = consult(&query_case, &config, &pool, &store, &registry, &backend, None)
            .unwrap_or_else(|e| panic!("factorial run {bits:03b} failed: {e}"));

        if ablations.no_mdt {
            assert!(outcome.transcript.team.is_empty(), "{bits:03b}: team must be empty");
            assert_eq!(outcome.transcript.report, "");
        } else {
            assert_eq!(outcome.transcript.team.len(), 2);
        }
        if ablations.no_memory {
            assert_eq!(store.read_count(), 0, "{bits:03b}: store must see zero reads");
            assert_eq!(outcome.transcript.memory_text, "");
        } else {
            assert!(store.read_count() > 0);
        }
        if ablations.no_tools {
            assert_eq!(
                registry.invocation_count(),
                0,
                "{bits:03b}: registry must see zero calls"
            );
            assert_eq!(outcome.transcript.tool_text, "");
        } else {
            assert!(registry.invocation_count() > 0);
        }
        assert!(outcome.decision.is_some());
    }

    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 30.0, "took {elapsed:?}");
    println!("acceptance 6 (ablation contracts, 8-run factorial): PASS in {elapsed:?}");
}

// ---------------------------------------------------------------------------
// criterion 7: cohort pipeline on the synthetic tables
// ---------------------------------------------------------------------------

#[test]
fn criterion_07_cohort_pipeline() {
    let tables = RawAdmissionTables::load_dir(&fixture("cohort/tables")).unwrap();
    let mapping = IcdMapping::load_csv(&fixture("cohort/mapping.csv")).unwrap();
    // the non-exact mapping row must have been filtered out
    assert!(!mapping.is_rare_code("G71.0"));
    assert!(mapping.is_rare_code("E85.4"));

    let records = extract_rare_cohort(&tables, &mapping);
    let patients: BTreeSet<&str> = records.iter().map(|r| r.patient_id.as_str()).collect();
    assert_eq!(
        patients,
        ["p1", "p4", "p5", "p8"].iter().copied().collect::<BTreeSet<_>>(),
        "exactly the four qualifying patients"
    );
    for patient in &patients {
        let mut indices: Vec<u32> = records
            .iter()
            .filter(|r| r.patient_id == *patient)
            .map(|r| r.visit_index)
            .collect();
        indices.sort_unstable();
        let expected: Vec<u32> = (1..=indices.len() as u32).collect();
        assert_eq!(indices, expected, "visit indices contiguous for {patient}");
    }
    // p4 had three admissions but one without prescriptions
    assert_eq!(records.iter().filter(|r| r.patient_id == "p4").count(), 2);

    // counting oracle for the stats
    let stats = cohort_stats(&records).unwrap();
    assert_eq!(stats.patients, 4);
    assert_eq!(stats.visits, 8);
    let manual_visits = records.len();
    let manual_med_sum: usize = records.iter().map(|r| r.gold_medications.len()).sum();
    assert_eq!(
        stats.avg_medications_per_visit,
        manual_med_sum as f64 / manual_visits as f64
    );
    let mut disease_space = BTreeSet::new();
    for r in &records {
        disease_space.extend(r.diseases.iter().cloned());
    }
    assert_eq!(stats.disease_space, disease_space.len());

    // idempotence: re-extracting the re-encoded output is the identity
    let again = extract_rare_cohort(&records_to_tables(&records), &mapping);
    assert_eq!(records, again);
    println!("acceptance 7 (cohort pipeline: 4-patient cohort, oracle stats, idempotence): PASS");
}

// ---------------------------------------------------------------------------
// criterion 8: drug extraction safety under fuzzing
// ---------------------------------------------------------------------------

#[test]
fn criterion_08_drug_extraction_safety() {
    let catalog = case2_catalog();
    let matcher = mdt_core::parsing::MedicationMatcher::new(&catalog);
    let names = catalog.names().to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(88);
    let fragments = [
        "take", "with", "food", "mg", "daily", "see", "notes", "Heparinoid",
        "chloride", "sodium", "potassium", "1.", "2.", "-", "(', )", "%", "*",
    ];
    for _ in 0..500 {
        let mut text = String::new();
        for _ in 0..rng.gen_range(0..30) {
            if rng.gen_bool(0.4) {
                text.push_str(&names[rng.gen_range(0..names.len())]);
            } else {
                text.push_str(fragments[rng.gen_range(0..fragments.len())]);
            }
            text.push(if rng.gen_bool(0.2) { '\n' } else { ' ' });
        }
        let extracted = matcher.extract(&text);
        for m in &extracted.medications {
            assert!(catalog.contains(m), "{m:?} escaped the catalog");
        }
        // invariance under case changes
        let upper = matcher.extract(&text.to_uppercase());
        let lower = matcher.extract(&text.to_lowercase());
        assert_eq!(extracted.medications, upper.medications);
        assert_eq!(extracted.medications, lower.medications);
    }
    println!("acceptance 8 (drug extraction ⊆ catalog; case-change invariant, 500 fuzzed texts): PASS");
}

// ---------------------------------------------------------------------------
// criterion 9: monotonicity suite
// ---------------------------------------------------------------------------

#[test]
fn criterion_09_monotonicity() {
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    for _ in 0..300 {
        let n = rng.gen_range(1..50);
        let results: Vec<CaseResult> = (0..n)
            .map(|i| {
                let rank = if rng.gen_bool(0.3) {
                    None
                } else {
                    Some(rng.gen_range(1..=10))
                };
                CaseResult::diagnosis(format!("c{i}"), rank, vec![])
            })
            .collect();
        let h1 = hit_at_k(&results, 1).unwrap();
        let h3 = hit_at_k(&results, 3).unwrap();
        let h10 = hit_at_k(&results, 10).unwrap();
        assert!(h1 <= h3 && h3 <= h10, "hit-rate prefix monotonicity: {h1} {h3} {h10}");
    }

    let universe: Vec<String> = (0..25).map(|i| format!("m{i}")).collect();
    for _ in 0..1000 {
        let pred = random_subset(&mut rng, &universe, 0..=12);
        let gold = random_subset(&mut rng, &universe, 1..=12);
        let j = jaccard(&pred, &gold).unwrap();
        let prf = f1(&pred, &gold).unwrap();
        assert!(
            j <= prf.precision.min(prf.recall) + 1e-15,
            "jaccard {j} vs min(P,R) {}",
            prf.precision.min(prf.recall)
        );
    }
    println!("acceptance 9 (Hit@k monotone in k; jaccard ≤ min(precision, recall)): PASS");
}

// ---------------------------------------------------------------------------
// criterion 10: informational reference readout (documented, not gated)
// ---------------------------------------------------------------------------

#[test]
fn criterion_10_informational_reference_readout() {
    // Runs the full eval path on the shipped fixtures to show the report
    // shape; the licensed-data readout itself (prior DDI ≈ 0.0755,
    // #MED ≈ 11.27 on the reference cohort) is documentation, not a gate.
    let dir = tempfile::tempdir().unwrap();
    let script = consensus_script(false);
    mdt_core::batch::write_case_script(dir.path(), "adv", &script).unwrap();
    let pool = SpecialistPool::default_pool();
    let store = MemoryStore::with_default_embedder();
    let registry = ToolRegistry::new();
    let ctx = EvalContext {
        config: ConsultConfig {
            ablations: Ablations {
                no_mdt: true,
                no_memory: true,
                no_tools: true,
            },
            role_strategy: RoleStrategy::llm(),
            ..ConsultConfig::default()
        },
        pool: &pool,
        store: &store,
        registry: &registry,
        catalog: None,
        backend: BackendProvider::PerCaseReplayDir(dir.path().to_path_buf()),
        judge: JudgeMode::Exact,
    };
    let outcome = run_eval(&[tiny_case()], &ctx, 1).unwrap();
    assert_eq!(outcome.report.task, TaskKind::Diagnosis);
    assert!(outcome.report.hit_at.is_some());
    println!(
        "acceptance 10 (informational): licensed-cohort prior readout expected near DDI 0.0755, #MED 11.27; table shape verified on fixtures"
    );
}

// ---------------------------------------------------------------------------
// cross-cutting sanity: normalization agreement between oracle and metrics
// ---------------------------------------------------------------------------

#[test]
fn normalized_set_comparisons_align_with_oracle() {
    // mixed-case duplicates collapse the same way in both routes
    let pred = set(&["traZODONE", "Heparin"]);
    let gold = set(&["Trazodone", "HEPARIN"]);
    assert_eq!(jaccard(&pred, &gold).unwrap(), 1.0);
    let normalized: BTreeSet<String> = pred.iter().map(|s| normalize_label(s)).collect();
    assert_eq!(normalized, gold.iter().map(|s| normalize_label(s)).collect::<BTreeSet<_>>());
}
