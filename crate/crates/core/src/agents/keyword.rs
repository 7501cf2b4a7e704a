//! Rule-table decision heuristic.
//!
//! The table maps canonical keywords to their surface forms and lists rules
//! as keyword sets with an action. Keywords are found by case-insensitive
//! whole-word matching over evidence summaries; the first rule whose keywords
//! are all present wins.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use async_trait::async_trait;
use serde::Deserialize;

use crate::a2a::Part;

use super::{echo_text, received_native, Action, ActionDecision, AgentKind, BackendError, Evidence, Fidelity, ReasoningBackend};

pub const RULES_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct Rule {
    pub keywords: Vec<String>,
    pub action: Action,
}

#[derive(Debug, Clone, Deserialize)]
struct RulesFile {
    schema_version: u32,
    fallback: Action,
    vocabulary: BTreeMap<String, Vec<String>>,
    rules: Vec<Rule>,
}

#[derive(Debug, thiserror::Error)]
pub enum RulesError {
    #[error("cannot read rule table {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("rule table does not parse: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid rule table: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone)]
pub struct KeywordRules {
    fallback: Action,
    /// keyword -> tokenized surface forms
    vocabulary: BTreeMap<String, Vec<Vec<String>>>,
    rules: Vec<Rule>,
}

pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()).map(str::to_lowercase).collect()
}

impl KeywordRules {
    pub fn load(path: &Path) -> Result<Self, RulesError> {
        let raw = std::fs::read_to_string(path).map_err(|source| RulesError::Io { path: path.display().to_string(), source })?;
        Self::from_toml(&raw)
    }

    pub fn from_toml(raw: &str) -> Result<Self, RulesError> {
        let file: RulesFile = toml::from_str(raw)?;
        if file.schema_version != RULES_SCHEMA_VERSION {
            return Err(RulesError::Invalid(format!("unsupported schema_version {}", file.schema_version)));
        }
        let mut vocabulary = BTreeMap::new();
        for (kw, variants) in file.vocabulary {
            let mut forms: Vec<Vec<String>> = std::iter::once(kw.as_str()).chain(variants.iter().map(String::as_str)).map(tokenize).collect();
            forms.sort();
            forms.dedup();
            if forms.iter().any(Vec::is_empty) {
                return Err(RulesError::Invalid(format!("keyword {kw:?} has an empty surface form")));
            }
            // The fidelity marker must never count as evidence content.
            if forms.iter().flatten().any(|t| t == "fidelity" || t == "transcoded") {
                return Err(RulesError::Invalid(format!("keyword {kw:?} would match the fidelity marker")));
            }
            vocabulary.insert(kw, forms);
        }
        for (i, r) in file.rules.iter().enumerate() {
            if r.keywords.is_empty() {
                return Err(RulesError::Invalid(format!("rule {} has no keywords", i + 1)));
            }
            if let Some(k) = r.keywords.iter().find(|k| !vocabulary.contains_key(*k)) {
                return Err(RulesError::Invalid(format!("rule {} uses {k:?}, which is not in the vocabulary", i + 1)));
            }
        }
        Ok(Self { fallback: file.fallback, vocabulary, rules: file.rules })
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn fallback(&self) -> Action {
        self.fallback
    }

    /// Canonical keywords whose surface forms occur in `text` as whole words.
    pub fn extract(&self, text: &str) -> BTreeSet<String> {
        let tokens = tokenize(text);
        self.vocabulary
            .iter()
            .filter(|(_, forms)| forms.iter().any(|f| tokens.windows(f.len()).any(|w| w == f.as_slice())))
            .map(|(k, _)| k.clone())
            .collect()
    }

    pub fn extract_all<'a>(&self, texts: impl IntoIterator<Item = &'a str>) -> BTreeSet<String> {
        texts.into_iter().flat_map(|t| self.extract(t)).collect()
    }

    /// First matching rule's action and its index, or the fallback.
    pub fn decide(&self, keywords: &BTreeSet<String>) -> (Action, Option<usize>) {
        self.rules
            .iter()
            .position(|r| r.keywords.iter().all(|k| keywords.contains(k)))
            .map_or((self.fallback, None), |i| (self.rules[i].action, Some(i)))
    }
}

pub struct KeywordBackend {
    rules: KeywordRules,
}

impl KeywordBackend {
    pub fn new(rules: KeywordRules) -> Self {
        Self { rules }
    }

    pub fn rules(&self) -> &KeywordRules {
        &self.rules
    }

    pub fn decide_sync(&self, evidence: &[Evidence]) -> ActionDecision {
        let keywords = self.rules.extract_all(evidence.iter().map(|e| e.summary.as_str()));
        let (action, rule) = self.rules.decide(&keywords);
        let listed = keywords.iter().cloned().collect::<Vec<_>>();
        let rationale = match rule {
            Some(i) => format!("rule {} matched on {{{}}}", i + 1, self.rules.rules[i].keywords.join(", ")),
            None => format!("no rule matched {{{}}}; falling back", listed.join(", ")),
        };
        ActionDecision {
            action,
            confidence: if rule.is_some() { 0.6 } else { 0.2 },
            rationale,
            matched_keywords: Some(listed),
        }
    }
}

#[async_trait]
impl ReasoningBackend for KeywordBackend {
    fn name(&self) -> &'static str {
        "keyword"
    }

    async fn analyze(&self, agent: AgentKind, _task_id: &str, parts: &[Part], _instruction: &str) -> Result<Evidence, BackendError> {
        let native = received_native(agent, parts);
        let summary = if native {
            format!("{} native {} part(s) received", parts.len(), agent)
        } else {
            echo_text(parts)
        };
        let fidelity = if native { Fidelity::Native } else { Fidelity::Transcoded };
        Ok(Evidence { source_agent: agent, fidelity, summary, structured: None })
    }

    async fn decide(&self, _task_id: &str, evidence: &[Evidence], _kb_context: &str) -> Result<ActionDecision, BackendError> {
        if evidence.is_empty() {
            return Err(BackendError::NoEvidence);
        }
        Ok(self.decide_sync(evidence))
    }
}
