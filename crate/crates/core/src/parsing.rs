//! Extract structured decisions from model free text: catalog-constrained
//! medication matching, numbered diagnosis lists, and gold-rank scoring via
//! the exact matcher or a judge backend.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{BackendError, ChatBackend, ChatMessage};
use crate::domain::{normalize_label, DecisionDiagnosis, DecisionTreatment, DrugCatalog};

/// Judge prompt template; placeholders `{{predict_diagnosis_list}}` and
/// `{{golden_diagnosis}}`. Ships in-repo and embedded.
pub const JUDGE_PROMPT_TEMPLATE: &str = include_str!("../assets/judge_prompt.txt");

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("no DIAGNOSIS: block in reply")]
    NoDiagnosisBlock,
    #[error(transparent)]
    Backend(#[from] BackendError),
}

/// Compiled catalog matcher: one case-insensitive pattern per drug name,
/// built once and reused across texts.
pub struct MedicationMatcher {
    patterns: Vec<(regex::Regex, String)>,
}

impl MedicationMatcher {
    pub fn new(catalog: &DrugCatalog) -> Self {
        let patterns = catalog
            .names()
            .iter()
            .filter_map(|name| {
                regex::RegexBuilder::new(&name_pattern(name))
                    .case_insensitive(true)
                    .build()
                    .ok()
                    .map(|r| (r, name.clone()))
            })
            .collect();
        Self { patterns }
    }

    /// Every catalog name found in `text` as a case-insensitive whole-token
    /// match. Punctuation inside names (%, ., parentheses, *) matches
    /// literally, internal spaces match any whitespace run, and the longest
    /// name wins where matches overlap.
    pub fn extract(&self, text: &str) -> DecisionTreatment {
        let mut candidates: Vec<(usize, usize, &str)> = Vec::new();
        for (regex, name) in &self.patterns {
            for m in regex.find_iter(text) {
                if token_boundaries(text, m.start(), m.end()) {
                    candidates.push((m.start(), m.end(), name.as_str()));
                }
            }
        }
        // longest span wins on overlap; ties resolved by earlier start
        candidates.sort_by(|a, b| {
            let len_a = a.1 - a.0;
            let len_b = b.1 - b.0;
            len_b.cmp(&len_a).then(a.0.cmp(&b.0))
        });
        let mut taken: Vec<(usize, usize)> = Vec::new();
        let mut medications = BTreeSet::new();
        for (start, end, name) in candidates {
            let overlaps = taken.iter().any(|&(s, e)| start < e && s < end);
            if !overlaps {
                taken.push((start, end));
                medications.insert(name.to_string());
            }
        }
        DecisionTreatment { medications }
    }
}

/// One-shot wrapper around [`MedicationMatcher`] for single texts.
pub fn extract_medications(text: &str, catalog: &DrugCatalog) -> DecisionTreatment {
    MedicationMatcher::new(catalog).extract(text)
}

fn name_pattern(name: &str) -> String {
    let mut pattern = String::new();
    for part in name.split_whitespace() {
        if !pattern.is_empty() {
            pattern.push_str(r"\s+");
        }
        pattern.push_str(&regex::escape(part));
    }
    pattern
}

fn token_boundaries(text: &str, start: usize, end: usize) -> bool {
    let before_ok = text[..start]
        .chars()
        .next_back()
        .is_none_or(|c| !c.is_alphanumeric());
    let after_ok = text[end..]
        .chars()
        .next()
        .is_none_or(|c| !c.is_alphanumeric());
    before_ok && after_ok
}

/// Parse the last `DIAGNOSIS:` block of a reply into a ranked list. Lines
/// must be numbered `1.`, `2.`, ... consecutively; markdown emphasis,
/// trailing ` - ` annotations, and trailing periods are stripped from names.
pub fn extract_diagnoses(text: &str) -> Result<DecisionDiagnosis, ParseError> {
    let header = "DIAGNOSIS:";
    let block_start = text.rfind(header).ok_or(ParseError::NoDiagnosisBlock)?;
    let block = &text[block_start + header.len()..];
    let line_re = regex::Regex::new(r"^\s*(\d{1,2})[.)]\s*(.+)$").expect("static regex");
    let mut entries = Vec::new();
    let mut expected = 1u32;
    for line in block.lines() {
        if line.trim().is_empty() {
            continue;
        }
        match line_re.captures(line) {
            Some(caps) => {
                let n: u32 = caps[1].parse().unwrap_or(0);
                if n != expected {
                    if entries.is_empty() {
                        continue; // stray numbering before the list starts
                    }
                    break;
                }
                let name = clean_diagnosis_name(&caps[2]);
                if !name.is_empty() {
                    entries.push(name);
                }
                expected += 1;
                if expected > 10 {
                    break;
                }
            }
            None => {
                if !entries.is_empty() {
                    break;
                }
            }
        }
    }
    Ok(DecisionDiagnosis::from_ranked(entries))
}

fn clean_diagnosis_name(raw: &str) -> String {
    let no_emphasis: String = raw
        .replace("**", "")
        .replace("__", "")
        .chars()
        .filter(|c| *c != '`')
        .collect();
    let before_annotation = no_emphasis
        .split(" - ")
        .next()
        .unwrap_or(&no_emphasis)
        .trim();
    before_annotation
        .trim_end_matches(|c: char| c == '.' || c.is_whitespace())
        .trim_start_matches(|c: char| c == '*' || c.is_whitespace())
        .to_string()
}

/// Smallest 1-based index whose prediction equals some gold label under
/// normalization; None when no prediction matches.
pub fn rank_exact(predictions: &DecisionDiagnosis, golds: &[String]) -> Option<u32> {
    let gold_set: BTreeSet<String> = golds.iter().map(|g| normalize_label(g)).collect();
    predictions
        .ranked
        .iter()
        .position(|p| gold_set.contains(&normalize_label(p)))
        .map(|i| (i + 1) as u32)
}

/// Judge answer: a strict single-token rank, or nothing with the raw reply
/// kept for audit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeVerdict {
    pub rank: Option<u32>,
    pub raw: String,
}

/// Fill the judge prompt with the prediction list and gold labels.
pub fn render_judge_prompt(predictions: &DecisionDiagnosis, golds: &[String]) -> String {
    let list = predictions
        .ranked
        .iter()
        .enumerate()
        .map(|(i, d)| format!("{}. {}", i + 1, d))
        .collect::<Vec<_>>()
        .join("\n");
    JUDGE_PROMPT_TEMPLATE
        .replace("{{predict_diagnosis_list}}", &list)
        .replace("{{golden_diagnosis}}", &golds.join("; "))
}

/// Ask the judge backend whether a gold diagnosis appears in the top-10
/// list. Any reply other than "No" or an integer 1-10 leaves the rank absent.
/// The template's opening line travels as the system message.
pub fn rank_judge(
    predictions: &DecisionDiagnosis,
    golds: &[String],
    judge: &dyn ChatBackend,
) -> Result<JudgeVerdict, ParseError> {
    let prompt = render_judge_prompt(predictions, golds);
    let (system, user) = match prompt.split_once("\n\n") {
        Some((head, rest)) => (head.to_string(), rest.to_string()),
        None => ("You are a specialist in the field of rare diseases.".to_string(), prompt),
    };
    let messages = vec![ChatMessage::system(system), ChatMessage::user(user)];
    let raw = judge.complete("judge", &messages)?;
    let trimmed = raw.trim();
    let rank = if trimmed == "No" {
        None
    } else {
        match trimmed.parse::<u32>() {
            Ok(n) if (1..=10).contains(&n) => Some(n),
            _ => None,
        }
    };
    Ok(JudgeVerdict {
        rank,
        raw: raw.clone(),
    })
}
