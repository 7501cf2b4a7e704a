use crate::a2a::{AgentCapabilities, AgentCard, MimeType, Skill, PROTOCOL_VERSION};

use super::AgentKind;

fn mimes(list: &[&str]) -> Vec<MimeType> {
    list.iter().map(|m| MimeType::parse(m).expect("static mime")).collect()
}

fn skill(id: &str, name: &str, description: &str, input: &[&str], output: &[&str]) -> Skill {
    Skill {
        id: id.into(),
        name: name.into(),
        description: description.into(),
        input_modes: mimes(input),
        output_modes: mimes(output),
    }
}

/// The card each agent publishes at its well-known path.
pub fn agent_card(kind: AgentKind, url: &str) -> AgentCard {
    let (name, description, skills) = match kind {
        AgentKind::Voice => (
            "voice-agent",
            "Processes customer audio: transcription, sentiment and urgency cues.",
            vec![skill(
                "voice-analysis",
                "Voice analysis",
                "Transcribe a customer clip and extract sentiment and urgency.",
                &["audio/wav", "audio/webm"],
                &["text/plain", "application/json"],
            )],
        ),
        AgentKind::Vision => (
            "vision-agent",
            "Inspects product photos for defects, wear and installation state.",
            vec![skill(
                "visual-inspection",
                "Visual inspection",
                "Detect defects and read indicators in a product photo.",
                &["image/png", "image/jpeg"],
                &["text/plain", "application/json"],
            )],
        ),
        AgentKind::Text => (
            "text-agent",
            "Reasons over text evidence and the knowledge base to pick the next action.",
            vec![skill(
                "decision-synthesis",
                "Decision synthesis",
                "Combine evidence with warranty terms and pick one of eight actions.",
                &["text/plain"],
                &["text/plain", "application/json"],
            )],
        ),
    };
    AgentCard {
        name: name.into(),
        description: description.into(),
        url: url.trim_end_matches('/').to_string(),
        protocol_version: PROTOCOL_VERSION.into(),
        capabilities: AgentCapabilities { streaming: true },
        skills,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn modes(kind: AgentKind) -> Vec<String> {
        agent_card(kind, "http://127.0.0.1:1").input_modes().into_iter().map(|m| m.to_string()).collect()
    }

    #[test]
    fn declared_input_modes() {
        assert_eq!(modes(AgentKind::Voice), ["audio/wav", "audio/webm"]);
        assert_eq!(modes(AgentKind::Vision), ["image/jpeg", "image/png"]);
        assert_eq!(modes(AgentKind::Text), ["text/plain"]);
        for k in AgentKind::ALL {
            agent_card(k, "http://127.0.0.1:1").validate().unwrap();
        }
    }
}
