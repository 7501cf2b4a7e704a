use std::sync::Arc;
use std::time::Instant;

use chrono::Utc;

use crate::a2a::{FilePart, FilePayload, Message, Part};
use crate::registry::{CapabilitySet, CardRegistry, RegistryError};

use super::blob::{encode_for_wire, BlobStore, BlobWriteError};
use super::mode::{decide_outcome, Outcome, RoutingMode, TaskPriority, TranscoderKind};
use super::telemetry::{RoutingDecision, Telemetry};
use super::transcode::{MockImageCaption, MockSpeechToText, TranscodeError, Transcoder};

/// Message metadata keys the router reads.
pub const META_TASK_ID: &str = "taskId";
pub const META_PRIORITY: &str = "priority";

#[derive(Debug, thiserror::Error)]
pub enum RouteError {
    #[error("agent card unavailable for {dest}: {source}")]
    CardUnavailable {
        dest: String,
        #[source]
        source: RegistryError,
    },
    #[error("transcoder failure: {0}")]
    Transcoder(#[from] TranscodeError),
    #[error(transparent)]
    BlobWrite(#[from] BlobWriteError),
}

pub struct ModalityRouter {
    mode: RoutingMode,
    registry: Arc<CardRegistry>,
    telemetry: Arc<Telemetry>,
    blobs: Arc<BlobStore>,
    http: reqwest::Client,
    stt: Box<dyn Transcoder>,
    caption: Box<dyn Transcoder>,
}

impl ModalityRouter {
    pub fn new(mode: RoutingMode, registry: Arc<CardRegistry>, telemetry: Arc<Telemetry>, blobs: Arc<BlobStore>) -> Self {
        Self {
            mode,
            registry,
            telemetry,
            blobs,
            http: crate::net::http_client(),
            stt: Box::new(MockSpeechToText),
            caption: Box::new(MockImageCaption),
        }
    }

    pub fn mode(&self) -> RoutingMode {
        self.mode
    }

    pub fn telemetry(&self) -> &Arc<Telemetry> {
        &self.telemetry
    }

    pub fn blobs(&self) -> &Arc<BlobStore> {
        &self.blobs
    }

    pub fn decide(&self, part: &Part, caps: &CapabilitySet, priority: TaskPriority) -> (Outcome, Option<TranscoderKind>) {
        decide_outcome(part.modality(), &part.representative_mime(), caps, self.mode, priority)
    }

    /// Routes one part to `dest`, transcoding if the rule says so, and logs
    /// the decision.
    pub async fn route(
        &self,
        task_id: &str,
        part: Part,
        dest: &str,
        priority: TaskPriority,
    ) -> Result<(Part, RoutingDecision), RouteError> {
        let started = Instant::now();
        let caps = self
            .registry
            .get_capabilities(dest)
            .await
            .map_err(|source| RouteError::CardUnavailable { dest: dest.to_string(), source })?;
        let modality = part.modality();
        let (outcome, transcoder_used) = self.decide(&part, &caps, priority);
        let routed = match (transcoder_used, &part) {
            (Some(kind), Part::File(f)) => {
                let bytes = self.payload_bytes(f).await?;
                let t = match kind {
                    TranscoderKind::SpeechToText => &self.stt,
                    TranscoderKind::ImageCaption => &self.caption,
                };
                Part::text(t.transcode(&f.mime_type, &bytes)?)
            }
            _ => encode_for_wire(part, &self.blobs)?,
        };
        let decision = RoutingDecision {
            task_id: task_id.to_string(),
            part_modality: modality,
            destination_agent: dest.to_string(),
            outcome,
            transcoder_used,
            decided_at: Utc::now(),
            decision_latency_us: started.elapsed().as_micros() as u64,
        };
        self.telemetry.record(decision.clone());
        Ok((routed, decision))
    }

    /// Routes every part of an outgoing message, preserving order. The task
    /// id and priority come from message metadata.
    pub async fn route_message(&self, msg: Message, dest: &str, fallback_task_id: &str) -> Result<Message, RouteError> {
        let task_id = msg.metadata_str(META_TASK_ID).unwrap_or(fallback_task_id).to_string();
        let priority = TaskPriority(msg.metadata_u64(META_PRIORITY).map_or(0, |p| p.min(u32::MAX as u64) as u32));
        let Message { role, parts, message_id, metadata } = msg;
        let mut routed = Vec::with_capacity(parts.len());
        for p in parts {
            routed.push(self.route(&task_id, p, dest, priority).await?.0);
        }
        Ok(Message { role, parts: routed, message_id, metadata })
    }

    async fn payload_bytes(&self, f: &FilePart) -> Result<Vec<u8>, TranscodeError> {
        match &f.payload {
            FilePayload::Inline(b) => Ok(b.clone()),
            FilePayload::Uri(uri) => {
                if let Some(b) = self.blobs.resolve(uri) {
                    return Ok(b);
                }
                let unresolvable = |_| TranscodeError::Unresolvable(uri.clone());
                let resp = self.http.get(uri).send().await.map_err(unresolvable)?;
                if !resp.status().is_success() {
                    return Err(TranscodeError::Unresolvable(uri.clone()));
                }
                Ok(resp.bytes().await.map_err(unresolvable)?.to_vec())
            }
        }
    }
}
