//! Adapter for a live model behind an OpenAI-compatible chat-completions API.
//!
//! Configured through `MMA2A_LLM_ENDPOINT` (full URL of the completions
//! route), `MMA2A_LLM_API_KEY` and optionally `MMA2A_LLM_MODEL`. The model is
//! asked for a JSON object `{"action", "confidence", "rationale"}`.

use async_trait::async_trait;
use serde_json::{json, Value};

use crate::a2a::Part;

use super::{echo_text, received_native, Action, ActionDecision, AgentKind, BackendError, Evidence, Fidelity, ReasoningBackend};

pub const ENV_ENDPOINT: &str = "MMA2A_LLM_ENDPOINT";
pub const ENV_API_KEY: &str = "MMA2A_LLM_API_KEY";
pub const ENV_MODEL: &str = "MMA2A_LLM_MODEL";

pub const SYNTHESIS_PROMPT: &str = "You are the decision step of a customer-service system. \
Read the evidence gathered by the voice and vision agents and the knowledge-base context, then choose exactly one action from: \
approve_warranty, deny_warranty, initiate_replacement, initiate_return, order_part, escalate_to_specialist, provide_instructions, troubleshoot_step. \
Evidence marked [fidelity=transcoded] is a lossy text stand-in for the original media. \
Reply with a single JSON object: {\"action\": <label>, \"confidence\": <0..1>, \"rationale\": <one sentence>}.";

#[derive(Debug, Clone)]
pub struct LlmBackend {
    endpoint: String,
    api_key: Option<String>,
    model: String,
    client: reqwest::Client,
}

impl LlmBackend {
    pub fn new(endpoint: impl Into<String>, api_key: Option<String>, model: impl Into<String>) -> Self {
        Self { endpoint: endpoint.into(), api_key, model: model.into(), client: reqwest::Client::new() }
    }

    pub fn from_env() -> Result<Self, BackendError> {
        let endpoint = std::env::var(ENV_ENDPOINT).map_err(|_| BackendError::LlmEndpoint(format!("{ENV_ENDPOINT} is not set")))?;
        let model = std::env::var(ENV_MODEL).unwrap_or_else(|_| "default".into());
        Ok(Self::new(endpoint, std::env::var(ENV_API_KEY).ok(), model))
    }

    async fn complete(&self, system: &str, user: &str) -> Result<String, BackendError> {
        let body = json!({
            "model": self.model,
            "temperature": 0,
            "messages": [
                {"role": "system", "content": system},
                {"role": "user", "content": user},
            ],
        });
        let mut req = self.client.post(&self.endpoint).json(&body);
        if let Some(k) = &self.api_key {
            req = req.bearer_auth(k);
        }
        let err = |e: reqwest::Error| BackendError::LlmEndpoint(e.to_string());
        let resp = req.send().await.map_err(err)?;
        if !resp.status().is_success() {
            return Err(BackendError::LlmEndpoint(format!("HTTP {}", resp.status())));
        }
        let v: Value = resp.json().await.map_err(err)?;
        v["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| BackendError::LlmEndpoint("response has no choices[0].message.content".into()))
    }
}

/// Pulls the first JSON object out of a model reply and checks the label.
pub fn parse_decision(reply: &str) -> Result<ActionDecision, BackendError> {
    let bad = |m: &str| BackendError::LlmEndpoint(format!("{m}: {reply:?}"));
    let start = reply.find('{').ok_or_else(|| bad("no JSON object in reply"))?;
    let end = reply.rfind('}').ok_or_else(|| bad("no JSON object in reply"))?;
    let v: Value = serde_json::from_str(&reply[start..=end]).map_err(|_| bad("reply JSON does not parse"))?;
    let action: Action = v["action"].as_str().ok_or_else(|| bad("missing action"))?.parse().map_err(|e: String| bad(&e))?;
    Ok(ActionDecision {
        action,
        confidence: v["confidence"].as_f64().unwrap_or(0.5).clamp(0.0, 1.0),
        rationale: v["rationale"].as_str().unwrap_or_default().to_string(),
        matched_keywords: None,
    })
}

#[async_trait]
impl ReasoningBackend for LlmBackend {
    fn name(&self) -> &'static str {
        "llm"
    }

    async fn analyze(&self, agent: AgentKind, _task_id: &str, parts: &[Part], instruction: &str) -> Result<Evidence, BackendError> {
        // Media bytes are not forwarded; the adapter only reasons over text.
        let native = received_native(agent, parts);
        let prompt = format!("{instruction}\n\nInput:\n{}", echo_text(parts));
        let summary = self.complete("Summarise the customer's problem in one sentence.", &prompt).await?;
        let fidelity = if native { Fidelity::Native } else { Fidelity::Transcoded };
        Ok(Evidence { source_agent: agent, fidelity, summary, structured: None })
    }

    async fn decide(&self, _task_id: &str, evidence: &[Evidence], kb_context: &str) -> Result<ActionDecision, BackendError> {
        if evidence.is_empty() {
            return Err(BackendError::NoEvidence);
        }
        let mut user = format!("Knowledge base:\n{kb_context}\n\nEvidence:\n");
        for e in evidence {
            user.push_str(&format!("- {} ({}): {}\n", e.source_agent, e.fidelity.as_str(), e.summary));
        }
        parse_decision(&self.complete(SYNTHESIS_PROMPT, &user).await?)
    }
}
