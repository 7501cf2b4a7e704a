//! The three A2A agents (voice, vision, text) and their reasoning backends.

pub mod cards;
pub mod keyword;
pub mod llm;
pub mod scripted;
pub mod service;

use std::fmt;
use std::str::FromStr;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};

use crate::a2a::{Modality, Part};

pub use cards::agent_card;
pub use keyword::{KeywordBackend, KeywordRules, RulesError};
pub use llm::LlmBackend;
pub use scripted::{ScriptStore, ScriptedBackend, TaskScript};
pub use service::{AgentService, AgentSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgentKind {
    Voice,
    Vision,
    Text,
}

impl AgentKind {
    pub const ALL: [AgentKind; 3] = [AgentKind::Voice, AgentKind::Vision, AgentKind::Text];

    pub fn as_str(self) -> &'static str {
        match self {
            AgentKind::Voice => "voice",
            AgentKind::Vision => "vision",
            AgentKind::Text => "text",
        }
    }

    /// The media modality this agent consumes natively, if any.
    pub fn native_modality(self) -> Option<Modality> {
        match self {
            AgentKind::Voice => Some(Modality::Voice),
            AgentKind::Vision => Some(Modality::Image),
            AgentKind::Text => None,
        }
    }

    /// Default agent for parts of a modality.
    pub fn for_modality(m: Modality) -> AgentKind {
        match m {
            Modality::Voice => AgentKind::Voice,
            Modality::Image => AgentKind::Vision,
            Modality::Text | Modality::Data => AgentKind::Text,
        }
    }
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AgentKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "voice" => Ok(AgentKind::Voice),
            "vision" => Ok(AgentKind::Vision),
            "text" => Ok(AgentKind::Text),
            _ => Err(format!("unknown agent {s:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fidelity {
    Native,
    Transcoded,
}

impl Fidelity {
    pub fn as_str(self) -> &'static str {
        match self {
            Fidelity::Native => "native",
            Fidelity::Transcoded => "transcoded",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    pub source_agent: AgentKind,
    pub fidelity: Fidelity,
    pub summary: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub structured: Option<serde_json::Map<String, serde_json::Value>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    ApproveWarranty,
    DenyWarranty,
    InitiateReplacement,
    InitiateReturn,
    OrderPart,
    EscalateToSpecialist,
    ProvideInstructions,
    TroubleshootStep,
}

impl Action {
    pub const ALL: [Action; 8] = [
        Action::ApproveWarranty,
        Action::DenyWarranty,
        Action::InitiateReplacement,
        Action::InitiateReturn,
        Action::OrderPart,
        Action::EscalateToSpecialist,
        Action::ProvideInstructions,
        Action::TroubleshootStep,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Action::ApproveWarranty => "approve_warranty",
            Action::DenyWarranty => "deny_warranty",
            Action::InitiateReplacement => "initiate_replacement",
            Action::InitiateReturn => "initiate_return",
            Action::OrderPart => "order_part",
            Action::EscalateToSpecialist => "escalate_to_specialist",
            Action::ProvideInstructions => "provide_instructions",
            Action::TroubleshootStep => "troubleshoot_step",
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Action {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Action::ALL.into_iter().find(|a| a.as_str() == s).ok_or_else(|| format!("{s:?} is not one of the 8 action labels"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionDecision {
    pub action: Action,
    pub confidence: f64,
    pub rationale: String,
    /// Keywords the heuristic matched; other backends leave it empty.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matched_keywords: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BackendError {
    #[error("no evidence to decide on")]
    NoEvidence,
    #[error("no fixture for task {0}")]
    MissingFixture(String),
    #[error("LLM endpoint error: {0}")]
    LlmEndpoint(String),
    #[error("{0}")]
    Unsupported(String),
}

#[async_trait]
pub trait ReasoningBackend: Send + Sync {
    fn name(&self) -> &'static str;

    async fn analyze(&self, agent: AgentKind, task_id: &str, parts: &[Part], instruction: &str) -> Result<Evidence, BackendError>;

    async fn decide(&self, task_id: &str, evidence: &[Evidence], kb_context: &str) -> Result<ActionDecision, BackendError>;
}

/// Whether an analysis agent saw its own modality untranscoded.
pub fn received_native(agent: AgentKind, parts: &[Part]) -> bool {
    agent.native_modality().is_some_and(|m| parts.iter().any(|p| p.modality() == m))
}

/// Text of every received part that went through a transcoder, or of every
/// text part when none did.
pub fn echo_text(parts: &[Part]) -> String {
    let texts: Vec<&str> = parts.iter().filter_map(Part::as_text).collect();
    let marked: Vec<&str> = texts.iter().copied().filter(|t| crate::mar::is_transcoded(t)).collect();
    let chosen = if marked.is_empty() { texts } else { marked };
    chosen.join(" ")
}

/// Key into scripted decisions: the (voice, image) evidence fidelity, each
/// `native`, `transcoded` or `n/a` when the modality was not analysed. Several
/// pieces of evidence for one modality reduce to the weakest.
pub fn fidelity_profile(evidence: &[Evidence]) -> String {
    let slot = |agent: AgentKind| {
        evidence
            .iter()
            .filter(|e| e.source_agent == agent)
            .map(|e| e.fidelity)
            .max()
            .map_or("n/a", Fidelity::as_str)
    };
    format!("{}|{}", slot(AgentKind::Voice), slot(AgentKind::Vision))
}

/// Reachable scripted keys for one task given which analyses it runs.
pub fn profile_key(voice: Option<Fidelity>, image: Option<Fidelity>) -> String {
    let s = |f: Option<Fidelity>| f.map_or("n/a", Fidelity::as_str);
    format!("{}|{}", s(voice), s(image))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(agent: AgentKind, f: Fidelity) -> Evidence {
        Evidence { source_agent: agent, fidelity: f, summary: String::new(), structured: None }
    }

    #[test]
    fn action_labels_round_trip() {
        for a in Action::ALL {
            assert_eq!(a.as_str().parse::<Action>().unwrap(), a);
            assert_eq!(serde_json::to_value(a).unwrap(), a.as_str());
        }
        assert!("refund".parse::<Action>().is_err());
    }

    #[test]
    fn profile_keys() {
        assert_eq!(fidelity_profile(&[]), "n/a|n/a");
        let both = [ev(AgentKind::Voice, Fidelity::Native), ev(AgentKind::Vision, Fidelity::Transcoded)];
        assert_eq!(fidelity_profile(&both), "native|transcoded");
        let mixed = [ev(AgentKind::Vision, Fidelity::Native), ev(AgentKind::Vision, Fidelity::Transcoded)];
        assert_eq!(fidelity_profile(&mixed), "n/a|transcoded");
        assert_eq!(profile_key(Some(Fidelity::Native), None), "native|n/a");
    }
}
