//! Fixture-driven stand-in for model reasoning.
//!
//! Analysis returns the task's authored native-grade summary when the agent
//! saw its own modality, and otherwise echoes what it was handed. Decisions
//! are looked up by task and evidence fidelity profile.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use async_trait::async_trait;
use serde_json::{json, Map};

use crate::a2a::Part;

use super::{
    echo_text, fidelity_profile, received_native, Action, ActionDecision, AgentKind, BackendError, Evidence, Fidelity,
    ReasoningBackend,
};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TaskScript {
    pub native_summary: BTreeMap<AgentKind, String>,
    /// Replaces the plain echo when present.
    pub transcoded_summary: BTreeMap<AgentKind, String>,
    /// Fidelity profile key (`voice|image`) -> action.
    pub decisions: BTreeMap<String, Action>,
}

#[derive(Debug, Clone, Default)]
pub struct ScriptStore {
    tasks: HashMap<String, TaskScript>,
}

impl ScriptStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, task_id: impl Into<String>, script: TaskScript) {
        self.tasks.insert(task_id.into(), script);
    }

    pub fn get(&self, task_id: &str) -> Option<&TaskScript> {
        self.tasks.get(task_id)
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }
}

pub struct ScriptedBackend {
    store: Arc<ScriptStore>,
}

impl ScriptedBackend {
    pub fn new(store: Arc<ScriptStore>) -> Self {
        Self { store }
    }

    fn script(&self, task_id: &str) -> Result<&TaskScript, BackendError> {
        self.store.get(task_id).ok_or_else(|| BackendError::MissingFixture(task_id.to_string()))
    }
}

#[async_trait]
impl ReasoningBackend for ScriptedBackend {
    fn name(&self) -> &'static str {
        "scripted"
    }

    async fn analyze(&self, agent: AgentKind, task_id: &str, parts: &[Part], _instruction: &str) -> Result<Evidence, BackendError> {
        let script = self.script(task_id)?;
        let native = received_native(agent, parts);
        let (fidelity, summary) = if native {
            let s = script
                .native_summary
                .get(&agent)
                .ok_or_else(|| BackendError::MissingFixture(format!("{task_id}: no native {agent} summary")))?;
            (Fidelity::Native, s.clone())
        } else {
            let echo = echo_text(parts);
            let s = script.transcoded_summary.get(&agent).map(|s| crate::mar::transcode::mark_transcoded(s)).unwrap_or(echo);
            (Fidelity::Transcoded, s)
        };
        let media = parts.iter().filter(|p| p.modality().is_media()).count();
        let mut structured = Map::new();
        structured.insert("media_parts".into(), json!(media));
        structured.insert("text_parts".into(), json!(parts.len() - media));
        Ok(Evidence { source_agent: agent, fidelity, summary, structured: Some(structured) })
    }

    async fn decide(&self, task_id: &str, evidence: &[Evidence], _kb_context: &str) -> Result<ActionDecision, BackendError> {
        if evidence.is_empty() {
            return Err(BackendError::NoEvidence);
        }
        let script = self.script(task_id)?;
        let key = fidelity_profile(evidence);
        let Some(action) = script.decisions.get(&key).copied() else {
            return Ok(ActionDecision {
                action: Action::EscalateToSpecialist,
                confidence: 0.1,
                rationale: format!("no scripted outcome for evidence profile {key}"),
                matched_keywords: None,
            });
        };
        let native = evidence.iter().filter(|e| e.fidelity == Fidelity::Native).count();
        Ok(ActionDecision {
            action,
            confidence: if native == evidence.len() { 0.9 } else { 0.7 },
            rationale: format!("scripted outcome for evidence profile {key}"),
            matched_keywords: None,
        })
    }
}
