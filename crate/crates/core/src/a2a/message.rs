use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize};
use serde_json::{Map, Value};

use super::part::Part;
use super::CodecError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    User,
    Agent,
}

/// An ordered, non-empty list of parts exchanged between agents.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Message {
    pub role: Role,
    pub parts: Vec<Part>,
    pub message_id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metadata: Option<Map<String, Value>>,
}

impl Message {
    pub fn new(role: Role, message_id: impl Into<String>, parts: Vec<Part>) -> Self {
        Self { role, parts, message_id: message_id.into(), metadata: None }
    }

    pub fn with_metadata(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.metadata.get_or_insert_with(Map::new).insert(key.to_string(), value.into());
        self
    }

    pub fn metadata_str(&self, key: &str) -> Option<&str> {
        self.metadata.as_ref()?.get(key)?.as_str()
    }

    pub fn metadata_u64(&self, key: &str) -> Option<u64> {
        self.metadata.as_ref()?.get(key)?.as_u64()
    }

    pub fn validate(&self) -> Result<(), CodecError> {
        if self.parts.is_empty() {
            return Err(CodecError::EmptyMessage);
        }
        if self.message_id.is_empty() {
            return Err(CodecError::MissingField("messageId"));
        }
        self.parts.iter().try_for_each(Part::check_inline_size)
    }

    fn from_wire(value: Value) -> Result<Self, CodecError> {
        let Value::Object(mut obj) = value else {
            return Err(CodecError::Structure("message must be a JSON object".into()));
        };
        let role: Role = match obj.remove("role") {
            Some(v) => serde_json::from_value(v).map_err(|e| CodecError::Structure(format!("role: {e}")))?,
            None => return Err(CodecError::MissingField("role")),
        };
        let message_id = match obj.remove("messageId") {
            Some(Value::String(s)) => s,
            Some(_) => return Err(CodecError::Structure("`messageId` must be a string".into())),
            None => return Err(CodecError::MissingField("messageId")),
        };
        let parts = match obj.remove("parts") {
            Some(Value::Array(items)) => items.into_iter().map(Part::from_wire).collect::<Result<Vec<_>, _>>()?,
            Some(_) => return Err(CodecError::Structure("`parts` must be an array".into())),
            None => return Err(CodecError::MissingField("parts")),
        };
        let metadata = match obj.remove("metadata") {
            None | Some(Value::Null) => None,
            Some(Value::Object(m)) => Some(m),
            Some(_) => return Err(CodecError::Structure("`metadata` must be an object".into())),
        };
        let msg = Message { role, parts, message_id, metadata };
        msg.validate()?;
        Ok(msg)
    }
}

impl<'de> Deserialize<'de> for Message {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let value = Value::deserialize(deserializer)?;
        Message::from_wire(value).map_err(D::Error::custom)
    }
}

/// Serializes a message to its canonical JSON wire form.
pub fn encode_message(msg: &Message) -> Result<Vec<u8>, CodecError> {
    msg.validate()?;
    serde_json::to_vec(msg).map_err(|e| CodecError::Structure(e.to_string()))
}

pub fn decode_message(bytes: &[u8]) -> Result<Message, CodecError> {
    let value: Value = serde_json::from_slice(bytes).map_err(|e| CodecError::MalformedJson(e.to_string()))?;
    Message::from_wire(value)
}
