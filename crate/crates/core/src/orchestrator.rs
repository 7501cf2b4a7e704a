//! Splits a benchmark task into per-agent sub-tasks, dispatches them through
//! the router and runs the final synthesis on the text agent.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::a2a::{A2ATask, Message, Part, Role, TaskSendParams, TaskState};
use crate::agents::service::{render_evidence_bundle, META_INSTRUCTION, META_KB_CONTEXT, META_PRODUCT_ID};
use crate::agents::{Action, ActionDecision, AgentKind, Evidence, Fidelity};
use crate::benchmark::{score, BenchmarkTask, Category, KnowledgeBase};
use crate::client::{A2AClient, ClientError, Sent};
use crate::mar::router::{META_PRIORITY, META_TASK_ID};
use crate::mar::{encode_for_wire, BlobStore, RoutingDecision, RoutingMode, Telemetry};

pub const SYNTHESIS_INSTRUCTION: &str = "Choose the single next action for this customer.";

#[derive(Debug, Clone, PartialEq)]
pub struct SubTask {
    pub id: String,
    pub parent_task_id: String,
    pub destination: AgentKind,
    pub parts: Vec<Part>,
    pub instruction: String,
    pub depends_on: Vec<String>,
}

impl SubTask {
    pub fn is_synthesis(&self) -> bool {
        self.destination == AgentKind::Text
    }
}

/// One analysis sub-task per analysis agent that has parts to look at, then
/// a synthesis sub-task on the text agent that depends on all of them. The
/// synthesis parts here are the task's own; evidence is appended at run time.
pub fn decompose(task: &BenchmarkTask) -> Vec<SubTask> {
    let parts_for = |agent: AgentKind| -> Vec<Part> {
        task.parts.iter().filter(|p| p.targets.contains(&agent)).map(|p| p.part.clone()).collect()
    };
    let mut subs = Vec::new();
    for agent in [AgentKind::Voice, AgentKind::Vision] {
        let parts = parts_for(agent);
        if !parts.is_empty() {
            subs.push(SubTask {
                id: format!("{}:{agent}", task.task_id),
                parent_task_id: task.task_id.clone(),
                destination: agent,
                parts,
                instruction: task.category.instruction().to_string(),
                depends_on: vec![],
            });
        }
    }
    let depends_on = subs.iter().map(|s| s.id.clone()).collect();
    subs.push(SubTask {
        id: format!("{}:synthesis", task.task_id),
        parent_task_id: task.task_id.clone(),
        destination: AgentKind::Text,
        parts: parts_for(AgentKind::Text),
        instruction: SYNTHESIS_INSTRUCTION.to_string(),
        depends_on,
    });
    subs
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentUrls {
    pub voice: String,
    pub vision: String,
    pub text: String,
}

impl AgentUrls {
    pub fn get(&self, kind: AgentKind) -> &str {
        match kind {
            AgentKind::Voice => &self.voice,
            AgentKind::Vision => &self.vision,
            AgentKind::Text => &self.text,
        }
    }
}

/// Synthetic processing time added after each sub-task, so that runs show
/// the latency shape of native media inference. Simulation only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayProfile {
    pub voice_native_ms: u64,
    pub voice_transcoded_ms: u64,
    pub vision_native_ms: u64,
    pub vision_transcoded_ms: u64,
    pub synthesis_base_ms: u64,
    pub synthesis_per_native_ms: u64,
    pub synthesis_per_transcoded_ms: u64,
    /// Relative spread of the deterministic per-task jitter.
    pub jitter: f64,
}

impl DelayProfile {
    pub const REFERENCE: DelayProfile = DelayProfile {
        voice_native_ms: 30,
        voice_transcoded_ms: 10,
        vision_native_ms: 60,
        vision_transcoded_ms: 10,
        synthesis_base_ms: 40,
        synthesis_per_native_ms: 15,
        synthesis_per_transcoded_ms: 5,
        jitter: 0.1,
    };

    /// `off` disables simulation; `reference` is the shipped profile.
    pub fn by_name(name: &str) -> Result<Option<DelayProfile>, String> {
        match name {
            "off" | "none" => Ok(None),
            "reference" => Ok(Some(Self::REFERENCE)),
            other => Err(format!("unknown delay profile {other:?}: expected off or reference")),
        }
    }

    fn analysis(&self, agent: AgentKind, f: Fidelity) -> u64 {
        match (agent, f) {
            (AgentKind::Voice, Fidelity::Native) => self.voice_native_ms,
            (AgentKind::Voice, Fidelity::Transcoded) => self.voice_transcoded_ms,
            (AgentKind::Vision, Fidelity::Native) => self.vision_native_ms,
            (AgentKind::Vision, Fidelity::Transcoded) => self.vision_transcoded_ms,
            (AgentKind::Text, _) => 0,
        }
    }

    fn synthesis(&self, evidence: &[Evidence]) -> u64 {
        let native = evidence.iter().filter(|e| e.fidelity == Fidelity::Native).count() as u64;
        let transcoded = evidence.len() as u64 - native;
        self.synthesis_base_ms + native * self.synthesis_per_native_ms + transcoded * self.synthesis_per_transcoded_ms
    }

    fn jittered(&self, base_ms: u64, key: &str) -> Duration {
        let unit = (fnv1a(key.as_bytes()) % 20_001) as f64 / 10_000.0 - 1.0;
        Duration::from_secs_f64(base_ms as f64 * (1.0 + self.jitter * unit) / 1000.0)
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ u64::from(*b)).wrapping_mul(0x0100_0000_01b3))
}

#[derive(Debug, Clone, Default)]
pub struct OrchestratorConfig {
    pub parallel_subtasks: bool,
    pub delays: Option<DelayProfile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissingEvidence {
    pub agent: AgentKind,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskResult {
    pub task_id: String,
    pub category: Category,
    pub arm: RoutingMode,
    pub decision: ActionDecision,
    pub ground_truth: Action,
    pub correct: bool,
    pub evidence: Vec<Evidence>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub missing_evidence: Vec<MissingEvidence>,
    pub e2e_latency_us: u64,
    pub analysis_latency_us: BTreeMap<AgentKind, u64>,
    pub synthesis_latency_us: u64,
    pub request_bytes: u64,
    pub input_checksum: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error_mode: Option<String>,
    pub routing_decisions: Vec<RoutingDecision>,
}

#[derive(Debug, thiserror::Error)]
pub enum OrchestratorError {
    #[error("{task_id}: {agent} agent unreachable: {source}")]
    AgentUnreachable {
        task_id: String,
        agent: AgentKind,
        #[source]
        source: ClientError,
    },
    #[error("{task_id}: synthesis failed: {reason} (missing evidence: {missing:?})")]
    SubTaskFailed { task_id: String, reason: String, missing: Vec<MissingEvidence> },
    #[error("paired arms differ: {0}")]
    ArmMismatch(String),
    #[error("{task_id}: blob store: {reason}")]
    Blob { task_id: String, reason: String },
}

pub struct Orchestrator {
    client: A2AClient,
    mode: RoutingMode,
    agents: AgentUrls,
    blobs: Arc<BlobStore>,
    telemetry: Arc<Telemetry>,
    kb: Arc<KnowledgeBase>,
    config: OrchestratorConfig,
}

struct Analysis {
    agent: AgentKind,
    outcome: Result<Evidence, String>,
    latency: Duration,
    request_bytes: usize,
}

fn artifact_json<T: for<'de> Deserialize<'de>>(task: &A2ATask) -> Option<T> {
    task.artifacts.iter().find_map(|p| match p {
        Part::Data { value } => serde_json::from_value(value.clone()).ok(),
        _ => None,
    })
}

impl Orchestrator {
    /// `telemetry` must be the log of the router behind `router_url`.
    pub fn new(
        router_url: &str,
        mode: RoutingMode,
        agents: AgentUrls,
        blobs: Arc<BlobStore>,
        telemetry: Arc<Telemetry>,
        kb: Arc<KnowledgeBase>,
        config: OrchestratorConfig,
    ) -> Self {
        Self { client: A2AClient::new(router_url), mode, agents, blobs, telemetry, kb, config }
    }

    pub fn mode(&self) -> RoutingMode {
        self.mode
    }

    fn message(&self, task: &BenchmarkTask, sub: &SubTask, parts: Vec<Part>) -> Result<Message, OrchestratorError> {
        let parts = parts
            .into_iter()
            .map(|p| encode_for_wire(p, &self.blobs))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| OrchestratorError::Blob { task_id: task.task_id.clone(), reason: e.to_string() })?;
        Ok(Message::new(Role::User, format!("{}-msg", sub.id), parts)
            .with_metadata(META_TASK_ID, task.task_id.clone())
            .with_metadata(META_PRIORITY, task.priority.0)
            .with_metadata(META_INSTRUCTION, sub.instruction.clone())
            .with_metadata(META_PRODUCT_ID, task.product_id.clone()))
    }

    async fn pause(&self, base_ms: u64, key: &str) {
        if let Some(d) = &self.config.delays {
            tokio::time::sleep(d.jittered(base_ms, key)).await;
        }
    }

    async fn run_analysis(&self, task: &BenchmarkTask, sub: &SubTask) -> Result<Analysis, OrchestratorError> {
        let started = Instant::now();
        let params = TaskSendParams { id: sub.id.clone(), message: self.message(task, sub, sub.parts.clone())? };
        let dest = self.agents.get(sub.destination);
        // Voice analysis streams its result; the other agents answer in one shot.
        let sent = match sub.destination {
            AgentKind::Voice => self.client.send_subscribe(dest, &params).await,
            _ => self.client.send(dest, &params).await,
        };
        let (outcome, request_bytes) = match sent {
            Err(ClientError::Unreachable(e)) => {
                return Err(OrchestratorError::AgentUnreachable {
                    task_id: task.task_id.clone(),
                    agent: sub.destination,
                    source: ClientError::Unreachable(e),
                })
            }
            Err(e) => (Err(e.to_string()), 0),
            Ok(Sent { task: t, request_bytes }) if t.state() == TaskState::Completed => {
                let ev = artifact_json::<Evidence>(&t).ok_or_else(|| "no evidence artifact".to_string());
                (ev, request_bytes)
            }
            Ok(Sent { task: t, request_bytes }) => {
                let state = t.state();
                (Err(t.status.message.unwrap_or_else(|| format!("ended in state {state:?}"))), request_bytes)
            }
        };
        if let Ok(ev) = &outcome {
            if let Some(d) = &self.config.delays {
                self.pause(d.analysis(sub.destination, ev.fidelity), &sub.id).await;
            }
        }
        Ok(Analysis { agent: sub.destination, outcome, latency: started.elapsed(), request_bytes })
    }

    pub async fn execute(&self, task: &BenchmarkTask) -> Result<TaskResult, OrchestratorError> {
        let started = Instant::now();
        let log_start = self.telemetry.len();
        let subs = decompose(task);
        let (analyses, synthesis): (Vec<&SubTask>, Vec<&SubTask>) = subs.iter().partition(|s| !s.is_synthesis());
        let synthesis = synthesis[0];

        let results: Vec<Analysis> = if self.config.parallel_subtasks {
            futures::future::try_join_all(analyses.iter().map(|s| self.run_analysis(task, s))).await?
        } else {
            let mut out = Vec::new();
            for s in &analyses {
                out.push(self.run_analysis(task, s).await?);
            }
            out
        };

        let mut evidence = Vec::new();
        let mut missing = Vec::new();
        let mut analysis_latency_us = BTreeMap::new();
        let mut request_bytes = 0u64;
        for a in results {
            analysis_latency_us.insert(a.agent, a.latency.as_micros() as u64);
            request_bytes += a.request_bytes as u64;
            match a.outcome {
                Ok(ev) => evidence.push(ev),
                Err(reason) => missing.push(MissingEvidence { agent: a.agent, reason }),
            }
        }
        // Fixed order so the synthesis request does not depend on completion order.
        evidence.sort_by_key(|e| e.source_agent);
        missing.sort_by_key(|m| m.agent);

        let synth_started = Instant::now();
        let mut parts = synthesis.parts.clone();
        let missing_pairs: Vec<(AgentKind, String)> = missing.iter().map(|m| (m.agent, m.reason.clone())).collect();
        if !evidence.is_empty() || !missing_pairs.is_empty() {
            parts.push(Part::text(render_evidence_bundle(&evidence, &missing_pairs)));
        }
        let message = self.message(task, synthesis, parts)?.with_metadata(META_KB_CONTEXT, self.kb.context_for(&task.product_id));
        let params = TaskSendParams { id: synthesis.id.clone(), message };
        let failed = |reason: String| OrchestratorError::SubTaskFailed { task_id: task.task_id.clone(), reason, missing: missing.clone() };
        let sent = match self.client.send(&self.agents.text, &params).await {
            Ok(s) => s,
            Err(ClientError::Unreachable(e)) => {
                return Err(OrchestratorError::AgentUnreachable {
                    task_id: task.task_id.clone(),
                    agent: AgentKind::Text,
                    source: ClientError::Unreachable(e),
                })
            }
            Err(e) => return Err(failed(e.to_string())),
        };
        request_bytes += sent.request_bytes as u64;
        if sent.task.state() != TaskState::Completed {
            return Err(failed(sent.task.status.message.unwrap_or_default()));
        }
        let decision: ActionDecision = artifact_json(&sent.task).ok_or_else(|| failed("no decision artifact".into()))?;
        if let Some(d) = &self.config.delays {
            self.pause(d.synthesis(&evidence), &synthesis.id).await;
        }
        let synthesis_latency_us = synth_started.elapsed().as_micros() as u64;

        let routing_decisions =
            self.telemetry.snapshot().into_iter().skip(log_start).filter(|d| d.task_id == task.task_id).collect();
        let correct = score(&decision, task);
        Ok(TaskResult {
            task_id: task.task_id.clone(),
            category: task.category,
            arm: self.mode,
            decision,
            ground_truth: task.ground_truth,
            correct,
            evidence,
            missing_evidence: missing,
            e2e_latency_us: started.elapsed().as_micros() as u64,
            analysis_latency_us,
            synthesis_latency_us,
            request_bytes,
            input_checksum: task.input_checksum(),
            error_mode: if correct { None } else { task.error_mode.clone() },
            routing_decisions,
        })
    }
}

#[derive(Debug, Clone)]
pub struct PairedRun {
    pub baseline: Vec<TaskResult>,
    pub treatment: Vec<TaskResult>,
}

/// Runs every task once per arm, baseline first, one task at a time. The
/// two task lists must match in ids and input bytes.
pub async fn run_paired_experiment(
    baseline: (&Orchestrator, &[BenchmarkTask]),
    treatment: (&Orchestrator, &[BenchmarkTask]),
) -> Result<PairedRun, OrchestratorError> {
    let (b_orch, b_tasks) = baseline;
    let (t_orch, t_tasks) = treatment;
    if b_tasks.len() != t_tasks.len() {
        return Err(OrchestratorError::ArmMismatch(format!("{} vs {} tasks", b_tasks.len(), t_tasks.len())));
    }
    for (b, t) in b_tasks.iter().zip(t_tasks) {
        if b.task_id != t.task_id {
            return Err(OrchestratorError::ArmMismatch(format!("task {} paired with {}", b.task_id, t.task_id)));
        }
        if b.input_checksum() != t.input_checksum() {
            return Err(OrchestratorError::ArmMismatch(format!("{}: input parts differ between arms", b.task_id)));
        }
    }
    let mut run = PairedRun { baseline: Vec::with_capacity(b_tasks.len()), treatment: Vec::with_capacity(t_tasks.len()) };
    for (b, t) in b_tasks.iter().zip(t_tasks) {
        run.baseline.push(b_orch.execute(b).await?);
        run.treatment.push(t_orch.execute(t).await?);
    }
    Ok(run)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::a2a::MimeType;
    use crate::agents::TaskScript;
    use crate::benchmark::BenchmarkPart;
    use crate::mar::TaskPriority;

    fn part(p: Part, targets: &[AgentKind]) -> BenchmarkPart {
        BenchmarkPart { part: p, targets: targets.to_vec(), transcript: None, caption: None, file: None }
    }

    fn task(category: Category, parts: Vec<BenchmarkPart>) -> BenchmarkTask {
        BenchmarkTask {
            task_id: "t_001".into(),
            category,
            product_id: "P01".into(),
            priority: TaskPriority(0),
            ground_truth: Action::OrderPart,
            error_mode: None,
            parts,
            script: TaskScript::default(),
        }
    }

    #[test]
    fn decomposition_shapes() {
        let wav = Part::inline_file(MimeType::parse("audio/wav").unwrap(), vec![], None);
        let png = Part::inline_file(MimeType::parse("image/png").unwrap(), vec![], None);
        let txt = Part::text("hello");
        let full = task(
            Category::ProductDefect,
            vec![part(wav.clone(), &[AgentKind::Voice]), part(png, &[AgentKind::Vision]), part(txt.clone(), &[AgentKind::Text])],
        );
        let subs = decompose(&full);
        assert_eq!(subs.iter().map(|s| s.destination).collect::<Vec<_>>(), [AgentKind::Voice, AgentKind::Vision, AgentKind::Text]);
        assert_eq!(subs[2].depends_on, ["t_001:voice", "t_001:vision"]);
        assert!(subs[0].depends_on.is_empty() && subs[1].depends_on.is_empty());

        let assembly = task(Category::AssemblyGuidance, vec![part(wav, &[AgentKind::Voice]), part(txt.clone(), &[AgentKind::Text, AgentKind::Voice])]);
        let subs = decompose(&assembly);
        assert_eq!(subs.len(), 2);
        assert_eq!(subs[0].parts.len(), 2);

        let text_only = task(Category::AssemblyGuidance, vec![part(txt, &[AgentKind::Text])]);
        let subs = decompose(&text_only);
        assert_eq!(subs.len(), 1);
        assert!(subs[0].is_synthesis() && subs[0].depends_on.is_empty());
    }

    #[test]
    fn delay_profile_is_deterministic_and_bounded() {
        let d = DelayProfile::REFERENCE;
        assert_eq!(d.jittered(60, "a:vision"), d.jittered(60, "a:vision"));
        for k in ["x", "y", "defect_001:voice", "z:synthesis"] {
            let ms = d.jittered(100, k).as_secs_f64() * 1000.0;
            assert!((90.0..=110.0).contains(&ms), "{ms}");
        }
        assert_eq!(DelayProfile::by_name("off").unwrap(), None);
        assert!(DelayProfile::by_name("fast").is_err());
    }
}
