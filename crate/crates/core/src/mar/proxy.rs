//! HTTP face of the router.
//!
//! `POST /proxy` takes a JSON-RPC request plus an `x-a2a-destination` header
//! naming the agent URL, rewrites the message parts and forwards the call.
//! `tasks/sendSubscribe` responses are streamed back untouched.
//! `GET /blobs/{sha}` serves URI-referenced payloads and `GET /telemetry`
//! dumps the decision log as JSON lines.

use std::sync::Arc;

use axum::body::{Body, Bytes};
use axum::extract::{Path, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use serde_json::json;

use crate::a2a::rpc;
use crate::a2a::{Method, RpcRequest, RpcResponse, TaskSendParams};

use super::router::{ModalityRouter, RouteError};

pub const DESTINATION_HEADER: &str = "x-a2a-destination";
pub const PROXY_PATH: &str = "/proxy";

#[derive(Clone)]
struct ProxyState {
    router: Arc<ModalityRouter>,
    client: reqwest::Client,
}

pub fn app(router: Arc<ModalityRouter>) -> axum::Router {
    let state = ProxyState { router, client: crate::net::http_client() };
    axum::Router::new()
        .route(PROXY_PATH, post(proxy))
        .route("/blobs/{sha}", get(blob))
        .route("/telemetry", get(telemetry))
        .with_state(state)
}

pub(crate) fn rpc_json(resp: &RpcResponse) -> Response {
    let body = serde_json::to_vec(resp).expect("responses serialize");
    ([(header::CONTENT_TYPE, "application/json")], body).into_response()
}

fn route_error(req: &RpcRequest, e: &RouteError) -> RpcResponse {
    let kind = match e {
        RouteError::CardUnavailable { .. } => "card_unavailable",
        RouteError::Transcoder(_) => "transcoder_failure",
        RouteError::BlobWrite(_) => "blob_store_write_failure",
    };
    with_kind(RpcResponse::error(req.id.clone(), rpc::INTERNAL_ERROR, e.to_string()), kind)
}

fn with_kind(mut resp: RpcResponse, kind: &str) -> RpcResponse {
    if let Some(err) = resp.error.as_mut() {
        err.data = Some(json!({ "kind": kind }));
    }
    resp
}

async fn proxy(State(st): State<ProxyState>, headers: HeaderMap, body: Bytes) -> Response {
    let (mut req, method) = match RpcRequest::parse(&body) {
        Ok(x) => x,
        Err(resp) => return rpc_json(&resp),
    };
    let Some(dest) = headers.get(DESTINATION_HEADER).and_then(|v| v.to_str().ok()).map(str::to_string) else {
        let msg = format!("missing {DESTINATION_HEADER} header");
        return rpc_json(&RpcResponse::error(req.id, rpc::INVALID_REQUEST, msg));
    };

    if matches!(method, Method::Send | Method::SendSubscribe) {
        let params: TaskSendParams = match serde_json::from_value(std::mem::take(&mut req.params)) {
            Ok(p) => p,
            Err(e) => return rpc_json(&RpcResponse::error(req.id, rpc::INVALID_PARAMS, e.to_string())),
        };
        let message = match st.router.route_message(params.message, &dest, &params.id).await {
            Ok(m) => m,
            Err(e) => return rpc_json(&route_error(&req, &e)),
        };
        let routed = TaskSendParams { id: params.id, message };
        req.params = serde_json::to_value(&routed).expect("routed params serialize");
    }

    let upstream = match st.client.post(&dest).json(&req).send().await {
        Ok(r) => r,
        Err(e) => {
            let resp = RpcResponse::error(req.id, rpc::INTERNAL_ERROR, format!("agent unreachable at {dest}: {e}"));
            return rpc_json(&with_kind(resp, "agent_unreachable"));
        }
    };
    let status = StatusCode::from_u16(upstream.status().as_u16()).unwrap_or(StatusCode::BAD_GATEWAY);
    let content_type = upstream
        .headers()
        .get(reqwest::header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .unwrap_or("application/json")
        .to_string();
    let body = Body::from_stream(upstream.bytes_stream());
    (status, [(header::CONTENT_TYPE, content_type)], body).into_response()
}

async fn blob(State(st): State<ProxyState>, Path(sha): Path<String>) -> Response {
    match st.router.blobs().get(&sha) {
        Ok(Some(bytes)) => ([(header::CONTENT_TYPE, "application/octet-stream")], bytes).into_response(),
        Ok(None) => StatusCode::NOT_FOUND.into_response(),
        Err(e) => (StatusCode::INTERNAL_SERVER_ERROR, e.to_string()).into_response(),
    }
}

async fn telemetry(State(st): State<ProxyState>) -> Response {
    ([(header::CONTENT_TYPE, "application/jsonl")], st.router.telemetry().to_jsonl()).into_response()
}
