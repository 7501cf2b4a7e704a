//! The modality-aware router: per-part routing decisions, mock transcoders,
//! the blob store for oversize payloads, telemetry and the HTTP proxy.

pub mod blob;
pub mod mode;
pub mod proxy;
pub mod router;
pub mod telemetry;
pub mod transcode;

pub use blob::{encode_for_wire, BlobStore};
pub use mode::{decide_outcome, Outcome, RoutingMode, TaskPriority, Theta, TranscoderKind};
pub use router::{ModalityRouter, RouteError};
pub use telemetry::{read_jsonl, routing_profile, write_jsonl, OutcomeCounts, RoutingDecision, RoutingProfile, Telemetry};
pub use transcode::{is_transcoded, Transcoder, FIDELITY_MARKER};
