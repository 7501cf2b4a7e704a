use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::mime::MimeType;

pub const PROTOCOL_VERSION: &str = "0.2.5";

/// Path, relative to an agent's base URL, where its card is published.
pub const WELL_KNOWN_CARD_PATH: &str = "/.well-known/agent-card.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Skill {
    pub id: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub input_modes: Vec<MimeType>,
    pub output_modes: Vec<MimeType>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AgentCapabilities {
    #[serde(default)]
    pub streaming: bool,
}

/// An agent's capability declaration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AgentCard {
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub url: String,
    pub protocol_version: String,
    #[serde(default)]
    pub capabilities: AgentCapabilities,
    pub skills: Vec<Skill>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CardError {
    #[error("agent card declares no skills")]
    NoSkills,
    #[error("agent card url {0:?} is not an absolute http(s) URL")]
    RelativeUrl(String),
    #[error("skill {0:?} has an empty inputModes or outputModes list")]
    EmptyModes(String),
}

impl AgentCard {
    pub fn validate(&self) -> Result<(), CardError> {
        let absolute = ["http://", "https://"].iter().any(|scheme| {
            self.url.strip_prefix(scheme).is_some_and(|rest| !rest.is_empty() && !rest.starts_with('/'))
        });
        if !absolute {
            return Err(CardError::RelativeUrl(self.url.clone()));
        }
        if self.skills.is_empty() {
            return Err(CardError::NoSkills);
        }
        if let Some(s) = self.skills.iter().find(|s| s.input_modes.is_empty() || s.output_modes.is_empty()) {
            return Err(CardError::EmptyModes(s.id.clone()));
        }
        Ok(())
    }

    /// Union of every skill's input modes.
    pub fn input_modes(&self) -> BTreeSet<MimeType> {
        self.skills.iter().flat_map(|s| s.input_modes.iter().cloned()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mime(s: &str) -> MimeType {
        MimeType::parse(s).unwrap()
    }

    fn card(skills: Vec<Skill>) -> AgentCard {
        AgentCard {
            name: "voice".into(),
            description: String::new(),
            url: "http://127.0.0.1:8101".into(),
            protocol_version: PROTOCOL_VERSION.into(),
            capabilities: AgentCapabilities { streaming: true },
            skills,
        }
    }

    #[test]
    fn validation() {
        let skill = Skill {
            id: "transcribe".into(),
            name: String::new(),
            description: String::new(),
            input_modes: vec![mime("audio/wav")],
            output_modes: vec![mime("text/plain")],
        };
        assert!(card(vec![skill.clone()]).validate().is_ok());
        assert_eq!(card(vec![]).validate(), Err(CardError::NoSkills));
        let mut relative = card(vec![skill.clone()]);
        relative.url = "/agents/voice".into();
        assert!(matches!(relative.validate(), Err(CardError::RelativeUrl(_))));
        let mut no_modes = skill;
        no_modes.output_modes.clear();
        assert!(matches!(card(vec![no_modes]).validate(), Err(CardError::EmptyModes(_))));
    }

    #[test]
    fn wire_names_are_camel_case() {
        let json = serde_json::json!({
            "name": "vision",
            "url": "http://localhost:9",
            "protocolVersion": "0.2.5",
            "skills": [{"id": "inspect", "inputModes": ["image/png", "image/jpeg"], "outputModes": ["application/json"]}]
        });
        let c: AgentCard = serde_json::from_value(json).unwrap();
        assert_eq!(c.input_modes().len(), 2);
        assert!(!c.capabilities.streaming);
    }
}
