//! The predefined specialist pool (41 clinical departments) and MDT
//! formation: attending-selected, seeded-random, or relevance-ranked teams.

use std::path::Path;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{BackendError, ChatBackend, ChatMessage};
use crate::domain::normalize_label;
use crate::memory::{cosine_similarity, Embedder, HashedBagEmbedder};

/// The default pool shipped with the crate; parsed lazily by
/// [`SpecialistPool::default_pool`].
pub const DEFAULT_POOL_JSON: &str = include_str!("../assets/specialist_pool.json");

pub const DEFAULT_POOL_SIZE: usize = 41;

#[derive(Debug, Error)]
pub enum RosterError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("pool parse error: {0}")]
    ParseError(String),
    #[error("duplicate department in pool: {0}")]
    DuplicateDepartment(String),
    #[error("pool is empty")]
    EmptyPool,
    #[error("role field {0} is empty for department {1:?}")]
    EmptyField(&'static str, String),
    #[error("attending reply named no known department")]
    NoRecognizedDepartment,
    #[error("strategy {0} requires a team size override")]
    MissingTeamSize(&'static str),
    #[error("team size {got} outside [1, {pool}]")]
    BadTeamSize { got: usize, pool: usize },
    #[error(transparent)]
    Backend(#[from] BackendError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecialistRole {
    pub department: String,
    pub description: String,
    pub system_message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpecialistPool {
    roles: Vec<SpecialistRole>,
}

impl SpecialistPool {
    pub fn new(roles: Vec<SpecialistRole>) -> Result<Self, RosterError> {
        if roles.is_empty() {
            return Err(RosterError::EmptyPool);
        }
        let mut seen = std::collections::BTreeSet::new();
        for role in &roles {
            if role.department.trim().is_empty() {
                return Err(RosterError::EmptyField("department", role.department.clone()));
            }
            if role.description.trim().is_empty() {
                return Err(RosterError::EmptyField("description", role.department.clone()));
            }
            if role.system_message.trim().is_empty() {
                return Err(RosterError::EmptyField(
                    "system_message",
                    role.department.clone(),
                ));
            }
            if !seen.insert(normalize_label(&role.department)) {
                return Err(RosterError::DuplicateDepartment(role.department.clone()));
            }
        }
        Ok(Self { roles })
    }

    /// The shipped 41-department roster.
    pub fn default_pool() -> Self {
        Self::from_json(DEFAULT_POOL_JSON).expect("shipped pool is valid")
    }

    pub fn from_json(json: &str) -> Result<Self, RosterError> {
        let roles: Vec<SpecialistRole> =
            serde_json::from_str(json).map_err(|e| RosterError::ParseError(e.to_string()))?;
        Self::new(roles)
    }

    pub fn load(path: &Path) -> Result<Self, RosterError> {
        let text = std::fs::read_to_string(path).map_err(|e| RosterError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Self::from_json(&text)
    }

    pub fn roles(&self) -> &[SpecialistRole] {
        &self.roles
    }

    pub fn len(&self) -> usize {
        self.roles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.roles.is_empty()
    }

    pub fn departments(&self) -> Vec<String> {
        self.roles.iter().map(|r| r.department.clone()).collect()
    }

    pub fn get(&self, department: &str) -> Option<&SpecialistRole> {
        let needle = normalize_label(department);
        self.roles
            .iter()
            .find(|r| normalize_label(&r.department) == needle)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoleStrategyKind {
    Llm,
    Random,
    Relevance,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RoleStrategy {
    pub kind: RoleStrategyKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub team_size_override: Option<usize>,
    pub rng_seed: u64,
}

impl RoleStrategy {
    pub fn llm() -> Self {
        Self {
            kind: RoleStrategyKind::Llm,
            team_size_override: None,
            rng_seed: 42,
        }
    }
}

/// Form a patient-specific MDT from the pool. The llm strategy asks the
/// attending to pick departments and parses its reply; random samples
/// without replacement under the seed; relevance ranks role descriptions by
/// embedding similarity to the profile. Output order is selection order and
/// duplicates are silently dropped.
pub fn form_mdt(
    profile_text: &str,
    pool: &SpecialistPool,
    strategy: &RoleStrategy,
    backend: &dyn ChatBackend,
    attending_prompt: &str,
) -> Result<Vec<SpecialistRole>, RosterError> {
    if pool.is_empty() {
        return Err(RosterError::EmptyPool);
    }
    if let Some(n) = strategy.team_size_override {
        if n < 1 || n > pool.len() {
            return Err(RosterError::BadTeamSize {
                got: n,
                pool: pool.len(),
            });
        }
    }
    match strategy.kind {
        RoleStrategyKind::Llm => {
            let roster_listing: String = pool
                .roles()
                .iter()
                .map(|r| format!("- {}: {}", r.department, r.description))
                .collect::<Vec<_>>()
                .join("\n");
            let user = format!(
                "{profile_text}\n\nThe following specialist departments are available:\n{roster_listing}\n\nSelect the departments that should join this patient's multi-disciplinary team. Answer with a comma-separated list of department names."
            );
            let reply = backend.complete(
                "attending",
                &[
                    ChatMessage::system(attending_prompt),
                    ChatMessage::user(user),
                ],
            )?;
            let mut team = parse_departments(&reply, pool);
            if team.is_empty() {
                return Err(RosterError::NoRecognizedDepartment);
            }
            if let Some(n) = strategy.team_size_override {
                team.truncate(n);
            }
            Ok(team)
        }
        RoleStrategyKind::Random => {
            let n = strategy
                .team_size_override
                .ok_or(RosterError::MissingTeamSize("random"))?;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(strategy.rng_seed);
            // partial Fisher-Yates, stable across dependency upgrades
            let mut indices: Vec<usize> = (0..pool.len()).collect();
            for i in 0..n {
                let j = rng.gen_range(i..indices.len());
                indices.swap(i, j);
            }
            Ok(indices[..n]
                .iter()
                .map(|&i| pool.roles()[i].clone())
                .collect())
        }
        RoleStrategyKind::Relevance => {
            let n = strategy
                .team_size_override
                .ok_or(RosterError::MissingTeamSize("relevance"))?;
            let embedder = HashedBagEmbedder::default();
            let query = embedder
                .embed_text(profile_text)
                .map_err(|e| RosterError::ParseError(e.to_string()))?;
            let mut scored: Vec<(f64, usize)> = pool
                .roles()
                .iter()
                .enumerate()
                .map(|(i, role)| {
                    let sim = embedder
                        .embed_text(&role.description)
                        .map(|v| cosine_similarity(&query, &v))
                        .unwrap_or(0.0);
                    (sim, i)
                })
                .collect();
            scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
            Ok(scored[..n]
                .iter()
                .map(|&(_, i)| pool.roles()[i].clone())
                .collect())
        }
    }
}

/// Match department names in an attending reply: split on separators, strip
/// surrounding punctuation, compare case-insensitively against the pool.
/// Unmatched tokens are dropped and logged, never invented; duplicates keep
/// their first position.
pub fn parse_departments(reply: &str, pool: &SpecialistPool) -> Vec<SpecialistRole> {
    let mut team: Vec<SpecialistRole> = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for raw in reply.split([',', ';', ':', '\n', '(', ')']) {
        let token = raw
            .trim()
            .trim_start_matches(|c: char| c.is_ascii_digit() || c == '.' || c == ')' || c == ' ')
            .trim_matches(|c: char| {
                c.is_whitespace() || matches!(c, '.' | '*' | '-' | '•' | '"' | '\'' | '!')
            });
        if token.is_empty() {
            continue;
        }
        match pool.get(token) {
            Some(role) => {
                if seen.insert(normalize_label(&role.department)) {
                    team.push(role.clone());
                }
            }
            None => log::debug!("dropping unrecognized department token: {token:?}"),
        }
    }
    team
}
