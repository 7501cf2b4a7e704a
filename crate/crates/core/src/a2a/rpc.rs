use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;
use serde_json::Value;

pub const JSONRPC_VERSION: &str = "2.0";

pub const PARSE_ERROR: i64 = -32700;
pub const INVALID_REQUEST: i64 = -32600;
pub const METHOD_NOT_FOUND: i64 = -32601;
pub const INVALID_PARAMS: i64 = -32602;
pub const INTERNAL_ERROR: i64 = -32603;
pub const TASK_NOT_FOUND: i64 = -32001;
pub const CONTENT_TYPE_NOT_SUPPORTED: i64 = -32005;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Send,
    SendSubscribe,
    Get,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Send => "tasks/send",
            Method::SendSubscribe => "tasks/sendSubscribe",
            Method::Get => "tasks/get",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "tasks/send" => Some(Method::Send),
            "tasks/sendSubscribe" => Some(Method::SendSubscribe),
            "tasks/get" => Some(Method::Get),
            _ => None,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A request id kept as the exact JSON text the client sent, so responses
/// echo it byte-for-byte.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RpcId(Box<RawValue>);

impl RpcId {
    pub fn number(n: u64) -> Self {
        Self(RawValue::from_string(n.to_string()).expect("integer literal is valid JSON"))
    }

    pub fn string(s: &str) -> Self {
        Self(RawValue::from_string(serde_json::to_string(s).expect("string")).expect("valid JSON"))
    }

    pub fn null() -> Self {
        Self(RawValue::from_string("null".into()).expect("valid JSON"))
    }

    pub fn raw(&self) -> &str {
        self.0.get()
    }

    fn is_valid(&self) -> bool {
        let t = self.0.get().trim_start();
        t.starts_with('"') || t.starts_with('-') || t.starts_with(|c: char| c.is_ascii_digit()) || t == "null"
    }
}

impl PartialEq for RpcId {
    fn eq(&self, other: &Self) -> bool {
        self.raw() == other.raw()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RpcRequest {
    pub jsonrpc: String,
    pub method: String,
    #[serde(default)]
    pub params: Value,
    pub id: RpcId,
}

impl RpcRequest {
    pub fn new(method: Method, params: Value, id: RpcId) -> Self {
        Self { jsonrpc: JSONRPC_VERSION.into(), method: method.as_str().into(), params, id }
    }

    /// Parses and checks the envelope. Errors come back as ready-to-send
    /// responses; the id is echoed whenever it could be recovered.
    pub fn parse(bytes: &[u8]) -> Result<(Self, Method), Box<RpcResponse>> {
        let req: RpcRequest = serde_json::from_slice(bytes).map_err(|e| {
            let id = serde_json::from_slice::<IdOnly>(bytes).ok().and_then(|x| x.id).unwrap_or_else(RpcId::null);
            let code = if serde_json::from_slice::<Value>(bytes).is_ok() { INVALID_REQUEST } else { PARSE_ERROR };
            Box::new(RpcResponse::error(id, code, e.to_string()))
        })?;
        if req.jsonrpc != JSONRPC_VERSION || !req.id.is_valid() {
            return Err(Box::new(RpcResponse::error(req.id, INVALID_REQUEST, "jsonrpc must be \"2.0\"")));
        }
        match Method::parse(&req.method) {
            Some(m) => Ok((req, m)),
            None => {
                let msg = format!("unknown method {}", req.method);
                Err(Box::new(RpcResponse::error(req.id, METHOD_NOT_FOUND, msg)))
            }
        }
    }
}

#[derive(Deserialize)]
struct IdOnly {
    id: Option<RpcId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RpcErrorObject {
    pub code: i64,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<Value>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RpcResponse {
    pub jsonrpc: String,
    pub id: RpcId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<RpcErrorObject>,
}

impl RpcResponse {
    pub fn success(id: RpcId, result: Value) -> Self {
        Self { jsonrpc: JSONRPC_VERSION.into(), id, result: Some(result), error: None }
    }

    pub fn error(id: RpcId, code: i64, message: impl Into<String>) -> Self {
        Self {
            jsonrpc: JSONRPC_VERSION.into(),
            id,
            result: None,
            error: Some(RpcErrorObject { code, message: message.into(), data: None }),
        }
    }

    pub fn into_result(self) -> Result<Value, RpcErrorObject> {
        match (self.result, self.error) {
            (_, Some(e)) => Err(e),
            (Some(r), None) => Ok(r),
            (None, None) => Err(RpcErrorObject { code: INTERNAL_ERROR, message: "empty response".into(), data: None }),
        }
    }
}
