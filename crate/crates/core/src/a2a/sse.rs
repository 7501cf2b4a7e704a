//! Server-sent-events framing for `tasks/sendSubscribe` streams.
//!
//! Every event is one JSON document carried on a single `data:` line and
//! terminated by a blank line.

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::rpc::RpcResponse;
use super::task::TaskUpdate;

pub const CONTENT_TYPE: &str = "text/event-stream";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SseError {
    #[error("truncated SSE frame: missing blank-line terminator")]
    TruncatedFrame,
    #[error("SSE frame carries no data lines")]
    NoData,
    #[error("SSE payload is not valid JSON: {0}")]
    Payload(String),
}

pub fn frame<T: Serialize>(event: &T) -> String {
    // Compact JSON never contains a raw newline, so one data line suffices.
    let json = serde_json::to_string(event).expect("SSE payloads are plain JSON values");
    format!("data: {json}\n\n")
}

pub fn parse<T: DeserializeOwned>(chunk: &str) -> Result<T, SseError> {
    let body = chunk
        .strip_suffix("\n\n")
        .or_else(|| chunk.strip_suffix("\r\n\r\n"))
        .ok_or(SseError::TruncatedFrame)?;
    let mut data = Vec::new();
    for line in body.lines() {
        if let Some(rest) = line.strip_prefix("data:") {
            data.push(rest.strip_prefix(' ').unwrap_or(rest));
        }
        // `event:`, `id:`, `retry:` and `:` comments carry nothing we use.
    }
    if data.is_empty() {
        return Err(SseError::NoData);
    }
    serde_json::from_str(&data.join("\n")).map_err(|e| SseError::Payload(e.to_string()))
}

/// Frames a task update wrapped in its JSON-RPC response envelope.
pub fn frame_update(response: &RpcResponse) -> String {
    frame(response)
}

pub fn parse_update(chunk: &str) -> Result<TaskUpdate, SseError> {
    let resp: RpcResponse = parse(chunk)?;
    let result = resp.into_result().map_err(|e| SseError::Payload(e.message))?;
    serde_json::from_value(result).map_err(|e| SseError::Payload(e.to_string()))
}

/// Reassembles frames from an arbitrarily chunked byte stream. Bytes are
/// held raw until a frame completes, so a UTF-8 sequence split across reads
/// survives.
#[derive(Debug, Default)]
pub struct FrameBuffer {
    buf: Vec<u8>,
}

impl FrameBuffer {
    pub fn push(&mut self, bytes: &[u8]) -> Vec<String> {
        self.buf.extend_from_slice(bytes);
        let mut frames = Vec::new();
        while let Some(end) = self.buf.windows(2).position(|w| w == b"\n\n") {
            let rest = self.buf.split_off(end + 2);
            let frame = std::mem::replace(&mut self.buf, rest);
            frames.push(String::from_utf8_lossy(&frame).into_owned());
        }
        frames
    }

    /// Bytes received after the last complete frame.
    pub fn remainder(&self) -> String {
        String::from_utf8_lossy(&self.buf).into_owned()
    }
}
