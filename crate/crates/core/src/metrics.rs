//! Evaluation metrics: Hit@k and median rank for diagnosis, Jaccard / F1 /
//! DDI rate / #MED for treatment, batch aggregation, and per-department
//! participation rates.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{normalize_label, TaskKind};
use crate::toolkit::{DdiGraph, ToolError};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("no results to aggregate")]
    EmptyResults,
    #[error("gold medication set is empty")]
    EmptyGold,
    #[error(transparent)]
    UnknownDrug(#[from] ToolError),
}

/// Per-case outcome row; exactly the fields of its task are populated.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CaseResult {
    pub case_id: String,
    pub task: TaskKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rank: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub predicted_meds: Option<BTreeSet<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gold_meds: Option<BTreeSet<String>>,
    pub team: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl CaseResult {
    pub fn diagnosis(case_id: impl Into<String>, rank: Option<u32>, team: Vec<String>) -> Self {
        Self {
            case_id: case_id.into(),
            task: TaskKind::Diagnosis,
            rank,
            predicted_meds: None,
            gold_meds: None,
            team,
            error: None,
        }
    }

    pub fn treatment(
        case_id: impl Into<String>,
        predicted: BTreeSet<String>,
        gold: BTreeSet<String>,
        team: Vec<String>,
    ) -> Self {
        Self {
            case_id: case_id.into(),
            task: TaskKind::Treatment,
            rank: None,
            predicted_meds: Some(predicted),
            gold_meds: Some(gold),
            team,
            error: None,
        }
    }
}

/// Median rank over a batch; ranks beyond the 10-item list collapse to the
/// ">10" sentinel the reports print.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MedianRank {
    Rank(f64),
    BeyondTop10,
}

impl std::fmt::Display for MedianRank {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MedianRank::Rank(v) => write!(f, "{v}"),
            MedianRank::BeyondTop10 => write!(f, ">10"),
        }
    }
}

impl Serialize for MedianRank {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            MedianRank::Rank(v) => serializer.serialize_f64(*v),
            MedianRank::BeyondTop10 => serializer.serialize_str(">10"),
        }
    }
}

impl<'de> Deserialize<'de> for MedianRank {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Text(String),
        }
        match Repr::deserialize(deserializer)? {
            Repr::Num(v) => Ok(MedianRank::Rank(v)),
            Repr::Text(s) if s == ">10" => Ok(MedianRank::BeyondTop10),
            Repr::Text(s) => Err(serde::de::Error::custom(format!(
                "invalid median rank: {s}"
            ))),
        }
    }
}

/// Rank assigned to a case whose gold diagnosis is absent from the top-10
/// list, for median purposes.
pub const ABSENT_RANK_SENTINEL: u32 = 11;

/// Fraction of diagnosis cases whose best gold rank is within the top k.
pub fn hit_at_k(results: &[CaseResult], k: u32) -> Result<f64, MetricsError> {
    let ranks = diagnosis_ranks(results)?;
    let hits = ranks.iter().filter(|r| matches!(r, Some(v) if *v <= k)).count();
    Ok(hits as f64 / ranks.len() as f64)
}

/// Median 1-based rank across diagnosis cases; absent ranks count as 11 and
/// a median above 10 reports the ">10" sentinel.
pub fn median_rank(results: &[CaseResult]) -> Result<MedianRank, MetricsError> {
    let mut values: Vec<u32> = diagnosis_ranks(results)?
        .into_iter()
        .map(|r| r.unwrap_or(ABSENT_RANK_SENTINEL))
        .collect();
    values.sort_unstable();
    let n = values.len();
    let median = if n % 2 == 1 {
        values[n / 2] as f64
    } else {
        (values[n / 2 - 1] as f64 + values[n / 2] as f64) / 2.0
    };
    if median > 10.0 {
        Ok(MedianRank::BeyondTop10)
    } else {
        Ok(MedianRank::Rank(median))
    }
}

fn diagnosis_ranks(results: &[CaseResult]) -> Result<Vec<Option<u32>>, MetricsError> {
    let ranks: Vec<Option<u32>> = results
        .iter()
        .filter(|r| r.task == TaskKind::Diagnosis)
        .map(|r| r.rank)
        .collect();
    if ranks.is_empty() {
        return Err(MetricsError::EmptyResults);
    }
    Ok(ranks)
}

fn normalized(set: &BTreeSet<String>) -> BTreeSet<String> {
    set.iter().map(|s| normalize_label(s)).collect()
}

/// |pred ∩ gold| / |pred ∪ gold| over normalized names.
pub fn jaccard(pred: &BTreeSet<String>, gold: &BTreeSet<String>) -> Result<f64, MetricsError> {
    if gold.is_empty() {
        return Err(MetricsError::EmptyGold);
    }
    let p = normalized(pred);
    let g = normalized(gold);
    let inter = p.intersection(&g).count();
    let union = p.union(&g).count();
    Ok(inter as f64 / union as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrecisionRecallF1 {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Precision |∩|/|pred| (0 for empty pred), recall |∩|/|gold|, and
/// F1 = 2PR/(P+R) (0 when P+R = 0).
pub fn f1(pred: &BTreeSet<String>, gold: &BTreeSet<String>) -> Result<PrecisionRecallF1, MetricsError> {
    if gold.is_empty() {
        return Err(MetricsError::EmptyGold);
    }
    let p = normalized(pred);
    let g = normalized(gold);
    let inter = p.intersection(&g).count() as f64;
    let precision = if p.is_empty() { 0.0 } else { inter / p.len() as f64 };
    let recall = inter / g.len() as f64;
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(PrecisionRecallF1 {
        precision,
        recall,
        f1,
    })
}

/// Over unordered distinct pairs {j,k} within `pred`: interacting pairs /
/// total pairs. Defined as 0 when fewer than two drugs are predicted.
pub fn ddi_rate(pred: &BTreeSet<String>, graph: &DdiGraph) -> Result<f64, MetricsError> {
    for drug in pred {
        if !graph.catalog().contains(drug) {
            return Err(MetricsError::UnknownDrug(ToolError::UnknownDrug(
                drug.clone(),
            )));
        }
    }
    let drugs: Vec<&String> = pred.iter().collect();
    let n = drugs.len();
    if n < 2 {
        return Ok(0.0);
    }
    let mut interacting = 0usize;
    let mut total = 0usize;
    for i in 0..n {
        for j in (i + 1)..n {
            total += 1;
            if graph.has_edge(drugs[i], drugs[j]) {
                interacting += 1;
            }
        }
    }
    Ok(interacting as f64 / total as f64)
}

/// Mean number of recommended medications per treatment visit.
pub fn avg_med(results: &[CaseResult]) -> Result<f64, MetricsError> {
    let sizes: Vec<usize> = results
        .iter()
        .filter(|r| r.task == TaskKind::Treatment)
        .map(|r| r.predicted_meds.as_ref().map_or(0, |m| m.len()))
        .collect();
    if sizes.is_empty() {
        return Err(MetricsError::EmptyResults);
    }
    Ok(sizes.iter().sum::<usize>() as f64 / sizes.len() as f64)
}

/// For each department in `departments`: fraction of cases whose team
/// contains it. Feeds the participation CSV.
pub fn participation_rates(
    results: &[CaseResult],
    departments: &[String],
) -> BTreeMap<String, f64> {
    let n = results.len();
    let mut rates = BTreeMap::new();
    for dept in departments {
        let count = results.iter().filter(|r| r.team.contains(dept)).count();
        let rate = if n == 0 { 0.0 } else { count as f64 / n as f64 };
        rates.insert(dept.clone(), rate);
    }
    rates
}

/// Aggregated batch report: diagnosis columns (Hit@k, MR) or treatment
/// columns (Jaccard, F1, DDI, #MED) populated per task.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsReport {
    pub task: TaskKind,
    pub n_cases: usize,
    pub mean_team_size: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hit_at: Option<BTreeMap<u32, f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub median_rank: Option<MedianRank>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jaccard: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ddi: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub avg_med: Option<f64>,
}

impl MetricsReport {
    /// Aggregate per-case results into the batch report. Treatment DDI needs
    /// the interaction graph; pass None to leave the column out.
    pub fn aggregate(
        results: &[CaseResult],
        task: TaskKind,
        graph: Option<&DdiGraph>,
    ) -> Result<Self, MetricsError> {
        if results.is_empty() {
            return Err(MetricsError::EmptyResults);
        }
        let mean_team_size =
            results.iter().map(|r| r.team.len()).sum::<usize>() as f64 / results.len() as f64;
        let mut report = MetricsReport {
            task,
            n_cases: results.len(),
            mean_team_size,
            hit_at: None,
            median_rank: None,
            jaccard: None,
            f1: None,
            ddi: None,
            avg_med: None,
        };
        match task {
            TaskKind::Diagnosis => {
                let mut hits = BTreeMap::new();
                for k in [1, 3, 10] {
                    hits.insert(k, hit_at_k(results, k)?);
                }
                report.hit_at = Some(hits);
                report.median_rank = Some(median_rank(results)?);
            }
            TaskKind::Treatment => {
                let mut jac_sum = 0.0;
                let mut f1_sum = 0.0;
                let mut ddi_sum = 0.0;
                let mut n = 0usize;
                for r in results.iter().filter(|r| r.task == TaskKind::Treatment) {
                    let pred = r.predicted_meds.clone().unwrap_or_default();
                    let gold = r.gold_meds.clone().unwrap_or_default();
                    jac_sum += jaccard(&pred, &gold)?;
                    f1_sum += f1(&pred, &gold)?.f1;
                    if let Some(g) = graph {
                        ddi_sum += ddi_rate(&pred, g)?;
                    }
                    n += 1;
                }
                if n == 0 {
                    return Err(MetricsError::EmptyResults);
                }
                report.jaccard = Some(jac_sum / n as f64);
                report.f1 = Some(f1_sum / n as f64);
                if graph.is_some() {
                    report.ddi = Some(ddi_sum / n as f64);
                }
                report.avg_med = Some(avg_med(results)?);
            }
        }
        Ok(report)
    }

    /// Aligned-text rendering for terminal output.
    pub fn to_table(&self) -> String {
        let mut lines = Vec::new();
        lines.push(format!("task            {}", self.task));
        lines.push(format!("cases           {}", self.n_cases));
        lines.push(format!("mean team size  {:.2}", self.mean_team_size));
        if let Some(hits) = &self.hit_at {
            for (k, v) in hits {
                lines.push(format!("Hit@{k:<12}{v:.4}"));
            }
        }
        if let Some(mr) = &self.median_rank {
            lines.push(format!("MR              {mr}"));
        }
        if let Some(v) = self.jaccard {
            lines.push(format!("Jaccard         {v:.4}"));
        }
        if let Some(v) = self.f1 {
            lines.push(format!("F1              {v:.4}"));
        }
        if let Some(v) = self.ddi {
            lines.push(format!("DDI             {v:.4}"));
        }
        if let Some(v) = self.avg_med {
            lines.push(format!("#MED            {v:.2}"));
        }
        lines.join("\n")
    }
}

/// Serialize participation rates as `department,rate` CSV.
pub fn participation_csv(rates: &BTreeMap<String, f64>) -> String {
    let mut out = String::from("department,rate\n");
    for (dept, rate) in rates {
        let field = if dept.contains(',') || dept.contains('"') {
            format!("\"{}\"", dept.replace('"', "\"\""))
        } else {
            dept.clone()
        };
        out.push_str(&format!("{field},{rate}\n"));
    }
    out
}
