//! Wire-level A2A protocol model: parts, messages, agent cards, tasks,
//! the JSON-RPC envelope and SSE framing.

mod card;
mod message;
mod mime;
mod part;
pub mod rpc;
pub mod sse;
mod task;

pub use card::{AgentCapabilities, AgentCard, CardError, Skill, PROTOCOL_VERSION, WELL_KNOWN_CARD_PATH};
pub use message::{decode_message, encode_message, Message, Role};
pub use mime::{InvalidMime, MimeType};
pub use part::{part_modality, FilePart, FilePayload, Modality, Part, MAX_INLINE_BYTES};
pub use rpc::{Method, RpcId, RpcRequest, RpcResponse};
pub use task::{A2ATask, IllegalTransition, TaskQueryParams, TaskSendParams, TaskState, TaskStatus, TaskUpdate};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CodecError {
    #[error("malformed JSON: {0}")]
    MalformedJson(String),
    #[error("unknown part kind {0:?}")]
    UnknownPartKind(String),
    #[error(transparent)]
    InvalidMime(#[from] InvalidMime),
    #[error("missing field `{0}`")]
    MissingField(&'static str),
    #[error("file part carries both inline data and a URI")]
    ConflictingPayload,
    #[error("file part carries neither inline data nor a URI")]
    MissingPayload,
    #[error("invalid base64 payload: {0}")]
    InvalidBase64(String),
    #[error("inline payload of {len} bytes exceeds the 1 MiB limit; send it by URI reference")]
    OversizeInline { len: usize },
    #[error("message has no parts")]
    EmptyMessage,
    #[error("structural error: {0}")]
    Structure(String),
}
