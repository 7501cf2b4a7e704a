//! JSON-RPC client for talking to agents through the router proxy.

use futures::StreamExt;
use serde_json::Value;

use crate::a2a::rpc::RpcErrorObject;
use crate::a2a::sse::FrameBuffer;
use crate::a2a::{sse, A2ATask, Method, RpcId, RpcRequest, RpcResponse, TaskQueryParams, TaskSendParams, TaskStatus, TaskUpdate};
use crate::mar::proxy::{DESTINATION_HEADER, PROXY_PATH};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ClientError {
    #[error("unreachable: {0}")]
    Unreachable(String),
    #[error("JSON-RPC error {code}: {message}")]
    Rpc { code: i64, message: String, kind: Option<String> },
    #[error("protocol error: {0}")]
    Protocol(String),
}

impl From<RpcErrorObject> for ClientError {
    fn from(e: RpcErrorObject) -> Self {
        let kind = e.data.as_ref().and_then(|d| d.get("kind")).and_then(Value::as_str).map(str::to_string);
        ClientError::Rpc { code: e.code, message: e.message, kind }
    }
}

/// Result of one call, with the request size for bandwidth accounting.
#[derive(Debug, Clone)]
pub struct Sent {
    pub task: A2ATask,
    pub request_bytes: usize,
}

#[derive(Debug, Clone)]
pub struct A2AClient {
    http: reqwest::Client,
    proxy_url: String,
}

impl A2AClient {
    /// `router_url` is the router's origin, e.g. `http://127.0.0.1:8200`.
    pub fn new(router_url: &str) -> Self {
        Self { http: crate::net::http_client(), proxy_url: format!("{}{PROXY_PATH}", router_url.trim_end_matches('/')) }
    }

    fn body(method: Method, params: Value, id: &str) -> Result<Vec<u8>, ClientError> {
        serde_json::to_vec(&RpcRequest::new(method, params, RpcId::string(id))).map_err(|e| ClientError::Protocol(e.to_string()))
    }

    async fn post(&self, dest: &str, body: Vec<u8>) -> Result<reqwest::Response, ClientError> {
        self.http
            .post(&self.proxy_url)
            .header(DESTINATION_HEADER, dest)
            .header(reqwest::header::CONTENT_TYPE, "application/json")
            .body(body)
            .send()
            .await
            .map_err(|e| ClientError::Unreachable(format!("{}: {e}", self.proxy_url)))
    }

    async fn unary(&self, dest: &str, body: Vec<u8>) -> Result<A2ATask, ClientError> {
        let resp = self.post(dest, body).await?;
        let bytes = resp.bytes().await.map_err(|e| ClientError::Unreachable(e.to_string()))?;
        let rpc: RpcResponse = serde_json::from_slice(&bytes).map_err(|e| ClientError::Protocol(e.to_string()))?;
        serde_json::from_value(rpc.into_result()?).map_err(|e| ClientError::Protocol(e.to_string()))
    }

    pub async fn send(&self, dest: &str, params: &TaskSendParams) -> Result<Sent, ClientError> {
        let value = serde_json::to_value(params).map_err(|e| ClientError::Protocol(e.to_string()))?;
        let body = Self::body(Method::Send, value, &params.id)?;
        let request_bytes = body.len();
        Ok(Sent { task: self.unary(dest, body).await?, request_bytes })
    }

    pub async fn get(&self, dest: &str, task_id: &str) -> Result<A2ATask, ClientError> {
        let params = serde_json::to_value(TaskQueryParams { id: task_id.to_string() }).expect("query params serialize");
        self.unary(dest, Self::body(Method::Get, params, task_id)?).await
    }

    /// `tasks/sendSubscribe`, folding the event stream back into a task.
    pub async fn send_subscribe(&self, dest: &str, params: &TaskSendParams) -> Result<Sent, ClientError> {
        let value = serde_json::to_value(params).map_err(|e| ClientError::Protocol(e.to_string()))?;
        let body = Self::body(Method::SendSubscribe, value, &params.id)?;
        let request_bytes = body.len();
        let resp = self.post(dest, body).await?;
        let is_sse = resp
            .headers()
            .get(reqwest::header::CONTENT_TYPE)
            .and_then(|v| v.to_str().ok())
            .is_some_and(|v| v.starts_with(sse::CONTENT_TYPE));
        if !is_sse {
            // Errors raised before the stream opens arrive as plain JSON.
            let bytes = resp.bytes().await.map_err(|e| ClientError::Unreachable(e.to_string()))?;
            let rpc: RpcResponse = serde_json::from_slice(&bytes).map_err(|e| ClientError::Protocol(e.to_string()))?;
            return Err(match rpc.into_result() {
                Err(e) => e.into(),
                Ok(_) => ClientError::Protocol("expected an event stream".into()),
            });
        }

        let mut task = A2ATask { id: params.id.clone(), status: TaskStatus { state: crate::a2a::TaskState::Submitted, message: None }, history: vec![], artifacts: vec![] };
        let mut frames = FrameBuffer::default();
        let mut stream = resp.bytes_stream();
        while let Some(chunk) = stream.next().await {
            let chunk = chunk.map_err(|e| ClientError::Unreachable(e.to_string()))?;
            for f in frames.push(&chunk) {
                let rpc: RpcResponse = sse::parse(&f).map_err(|e| ClientError::Protocol(e.to_string()))?;
                let update: TaskUpdate = serde_json::from_value(rpc.into_result()?).map_err(|e| ClientError::Protocol(e.to_string()))?;
                match update {
                    TaskUpdate::ArtifactUpdate { artifact, .. } => task.artifacts.push(artifact),
                    TaskUpdate::StatusUpdate { status, is_final, .. } => {
                        task.status = status;
                        if is_final {
                            return Ok(Sent { task, request_bytes });
                        }
                    }
                }
            }
        }
        Err(ClientError::Protocol("event stream ended before a final status".into()))
    }
}
