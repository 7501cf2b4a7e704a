//! HTTP service wrapping one agent: card discovery plus the JSON-RPC task
//! methods. Voice and vision agents answer with an `Evidence` artifact; the
//! text agent answers with an `ActionDecision`.

use std::collections::HashMap;
use std::convert::Infallible;
use std::sync::{Arc, Mutex};

use axum::body::{Body, Bytes};
use axum::extract::State;
use axum::http::header;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Json;

use crate::a2a::rpc::{self, RpcId};
use crate::a2a::{sse, A2ATask, AgentCard, Method, Part, RpcRequest, RpcResponse, TaskQueryParams, TaskSendParams, TaskState, TaskUpdate, WELL_KNOWN_CARD_PATH};
use crate::mar::proxy::rpc_json;
use crate::mar::router::META_TASK_ID;
use crate::registry::CapabilitySet;

use super::{AgentKind, BackendError, Evidence, Fidelity, ReasoningBackend};

pub const META_INSTRUCTION: &str = "instruction";
pub const META_KB_CONTEXT: &str = "kbContext";
pub const META_PRODUCT_ID: &str = "productId";

const BUNDLE_PREFIX: &str = "evidence[";

pub struct AgentSpec {
    pub kind: AgentKind,
    pub card: AgentCard,
    pub backend: Arc<dyn ReasoningBackend>,
}

pub struct AgentService {
    spec: AgentSpec,
    caps: CapabilitySet,
    tasks: Mutex<HashMap<String, A2ATask>>,
}

/// Renders analysis results for the synthesis request, one line per agent.
/// A failed analysis is carried as `evidence[<agent>|missing]: <reason>`.
pub fn render_evidence_bundle(evidence: &[Evidence], missing: &[(AgentKind, String)]) -> String {
    let flat = |s: &str| s.replace(['\r', '\n'], " ");
    let mut lines: Vec<String> =
        evidence.iter().map(|e| format!("{BUNDLE_PREFIX}{}|{}]: {}", e.source_agent, e.fidelity.as_str(), flat(&e.summary))).collect();
    lines.extend(missing.iter().map(|(a, why)| format!("{BUNDLE_PREFIX}{a}|missing]: {}", flat(why))));
    lines.join("\n")
}

/// Inverse of [`render_evidence_bundle`]; missing entries are skipped.
pub fn parse_evidence_bundle(text: &str) -> Vec<Evidence> {
    text.lines()
        .filter_map(|line| {
            let rest = line.strip_prefix(BUNDLE_PREFIX)?;
            let (tag, summary) = rest.split_once("]: ")?;
            let (agent, fidelity) = tag.split_once('|')?;
            let fidelity = match fidelity {
                "native" => Fidelity::Native,
                "transcoded" => Fidelity::Transcoded,
                _ => return None,
            };
            Some(Evidence { source_agent: agent.parse().ok()?, fidelity, summary: summary.to_string(), structured: None })
        })
        .collect()
}

fn is_bundle(text: &str) -> bool {
    text.starts_with(BUNDLE_PREFIX)
}

impl AgentService {
    pub fn new(spec: AgentSpec) -> Arc<Self> {
        let caps = CapabilitySet::from_card(&spec.card);
        Arc::new(Self { spec, caps, tasks: Mutex::new(HashMap::new()) })
    }

    pub fn kind(&self) -> AgentKind {
        self.spec.kind
    }

    pub fn card(&self) -> &AgentCard {
        &self.spec.card
    }

    pub fn app(self: Arc<Self>) -> axum::Router {
        axum::Router::new()
            .route(WELL_KNOWN_CARD_PATH, get(card))
            .route("/", post(rpc_entry))
            .with_state(self)
    }

    /// Runs one `tasks/send`. Protocol violations come back as JSON-RPC
    /// errors; backend failures produce a task in the `failed` state.
    pub async fn process(&self, params: TaskSendParams) -> Result<A2ATask, (i64, String)> {
        let msg = &params.message;
        for (i, p) in msg.parts.iter().enumerate() {
            if p.as_text().is_none() && !self.caps.covers(&p.representative_mime()) {
                let why = format!("part {i} ({}) is not accepted by the {} agent", p.representative_mime(), self.spec.kind);
                return Err((rpc::CONTENT_TYPE_NOT_SUPPORTED, why));
            }
        }
        let mut task = A2ATask::submitted(params.id.clone(), msg.clone());
        task.transition(TaskState::Working, None).expect("submitted -> working");

        let task_id = msg.metadata_str(META_TASK_ID).unwrap_or(&params.id).to_string();
        let result = match self.spec.kind {
            AgentKind::Voice | AgentKind::Vision => self.analyze(&task_id, msg).await,
            AgentKind::Text => self.synthesize(&task_id, msg).await,
        };
        match result {
            Ok(artifacts) => {
                task.artifacts = artifacts;
                task.transition(TaskState::Completed, None).expect("working -> completed");
            }
            Err(e) => task.transition(TaskState::Failed, Some(e.to_string())).expect("working -> failed"),
        }
        self.tasks.lock().unwrap().insert(params.id, task.clone());
        Ok(task)
    }

    async fn analyze(&self, task_id: &str, msg: &crate::a2a::Message) -> Result<Vec<Part>, BackendError> {
        let instruction = msg.metadata_str(META_INSTRUCTION).unwrap_or_default();
        let ev = self.spec.backend.analyze(self.spec.kind, task_id, &msg.parts, instruction).await?;
        let summary = ev.summary.clone();
        Ok(vec![Part::data(serde_json::to_value(&ev).expect("evidence serializes")), Part::text(summary)])
    }

    async fn synthesize(&self, task_id: &str, msg: &crate::a2a::Message) -> Result<Vec<Part>, BackendError> {
        let mut evidence = Vec::new();
        let mut customer = Vec::new();
        for t in msg.parts.iter().filter_map(Part::as_text) {
            if is_bundle(t) {
                evidence.extend(parse_evidence_bundle(t));
            } else {
                customer.push(t);
            }
        }
        let mut context = msg.metadata_str(META_KB_CONTEXT).unwrap_or_default().to_string();
        if !customer.is_empty() {
            context.push_str("\n\nCustomer input:\n");
            context.push_str(&customer.join("\n"));
        }
        let decision = self.spec.backend.decide(task_id, &evidence, &context).await?;
        let rationale = format!("{}: {}", decision.action, decision.rationale);
        Ok(vec![Part::data(serde_json::to_value(&decision).expect("decision serializes")), Part::text(rationale)])
    }

    pub fn get_task(&self, id: &str) -> Option<A2ATask> {
        self.tasks.lock().unwrap().get(id).cloned()
    }
}

async fn card(State(svc): State<Arc<AgentService>>) -> Json<AgentCard> {
    Json(svc.spec.card.clone())
}

fn task_json(id: RpcId, task: &A2ATask) -> RpcResponse {
    RpcResponse::success(id, serde_json::to_value(task).expect("tasks serialize"))
}

async fn rpc_entry(State(svc): State<Arc<AgentService>>, body: Bytes) -> Response {
    let (req, method) = match RpcRequest::parse(&body) {
        Ok(x) => x,
        Err(resp) => return rpc_json(&resp),
    };
    match method {
        Method::Get => {
            let params: TaskQueryParams = match serde_json::from_value(req.params) {
                Ok(p) => p,
                Err(e) => return rpc_json(&RpcResponse::error(req.id, rpc::INVALID_PARAMS, e.to_string())),
            };
            match svc.get_task(&params.id) {
                Some(t) => rpc_json(&task_json(req.id, &t)),
                None => rpc_json(&RpcResponse::error(req.id, rpc::TASK_NOT_FOUND, format!("no task {}", params.id))),
            }
        }
        Method::Send | Method::SendSubscribe => {
            let params: TaskSendParams = match serde_json::from_value(req.params) {
                Ok(p) => p,
                Err(e) => return rpc_json(&RpcResponse::error(req.id, rpc::INVALID_PARAMS, e.to_string())),
            };
            if let Err(e) = params.message.validate() {
                return rpc_json(&RpcResponse::error(req.id, rpc::INVALID_PARAMS, e.to_string()));
            }
            let task = match svc.process(params).await {
                Ok(t) => t,
                Err((code, msg)) => return rpc_json(&RpcResponse::error(req.id, code, msg)),
            };
            if method == Method::Send {
                return rpc_json(&task_json(req.id, &task));
            }
            let frames = stream_frames(&req.id, &task);
            let body = Body::from_stream(futures::stream::iter(frames.into_iter().map(Ok::<_, Infallible>)));
            ([(header::CONTENT_TYPE, sse::CONTENT_TYPE), (header::CACHE_CONTROL, "no-cache")], body).into_response()
        }
    }
}

/// working, one event per artifact, then the terminal status.
fn stream_frames(id: &RpcId, task: &A2ATask) -> Vec<String> {
    let wrap = |u: TaskUpdate| sse::frame_update(&RpcResponse::success(id.clone(), serde_json::to_value(u).expect("updates serialize")));
    let mut frames = vec![wrap(TaskUpdate::StatusUpdate {
        task_id: task.id.clone(),
        status: crate::a2a::TaskStatus { state: TaskState::Working, message: None },
        is_final: false,
    })];
    frames.extend(task.artifacts.iter().map(|a| wrap(TaskUpdate::ArtifactUpdate { task_id: task.id.clone(), artifact: a.clone() })));
    frames.push(wrap(TaskUpdate::StatusUpdate { task_id: task.id.clone(), status: task.status.clone(), is_final: true }));
    frames
}
