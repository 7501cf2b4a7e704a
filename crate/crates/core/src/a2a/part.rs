use std::fmt;

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine as _;
use serde::de::Error as _;
use serde::ser::{Error as _, SerializeMap};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{Map, Value};

use super::mime::MimeType;
use super::CodecError;

/// Largest file payload (decoded bytes) that may travel inline.
pub const MAX_INLINE_BYTES: usize = 1_048_576;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Voice,
    Image,
    Text,
    Data,
}

impl Modality {
    pub const ALL: [Modality; 4] = [Modality::Voice, Modality::Image, Modality::Text, Modality::Data];

    pub fn as_str(self) -> &'static str {
        match self {
            Modality::Voice => "voice",
            Modality::Image => "image",
            Modality::Text => "text",
            Modality::Data => "data",
        }
    }

    /// Voice and image are the only modalities a router ever transcodes.
    pub fn is_media(self) -> bool {
        matches!(self, Modality::Voice | Modality::Image)
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FilePayload {
    Inline(Vec<u8>),
    Uri(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FilePart {
    pub mime_type: MimeType,
    pub payload: FilePayload,
    pub name: Option<String>,
}

/// One typed unit of an A2A message.
#[derive(Debug, Clone, PartialEq)]
pub enum Part {
    Text { content: String },
    File(FilePart),
    Data { value: Value },
}

impl Part {
    pub fn text(content: impl Into<String>) -> Self {
        Part::Text { content: content.into() }
    }

    pub fn inline_file(mime_type: MimeType, bytes: Vec<u8>, name: Option<String>) -> Self {
        Part::File(FilePart { mime_type, payload: FilePayload::Inline(bytes), name })
    }

    pub fn uri_file(mime_type: MimeType, uri: impl Into<String>, name: Option<String>) -> Self {
        Part::File(FilePart { mime_type, payload: FilePayload::Uri(uri.into()), name })
    }

    pub fn data(value: Value) -> Self {
        Part::Data { value }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Part::Text { .. } => "text",
            Part::File(_) => "file",
            Part::Data { .. } => "data",
        }
    }

    pub fn modality(&self) -> Modality {
        part_modality(self)
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            Part::Text { content } => Some(content),
            _ => None,
        }
    }

    /// The MIME type that stands for this part in capability matching.
    pub fn representative_mime(&self) -> MimeType {
        match self {
            Part::Text { .. } => MimeType::text_plain(),
            Part::File(f) => f.mime_type.clone(),
            Part::Data { .. } => MimeType::parse("application/json").expect("static mime"),
        }
    }

    /// Size of an inline payload in bytes; `None` for anything else.
    pub fn inline_len(&self) -> Option<usize> {
        match self {
            Part::File(FilePart { payload: FilePayload::Inline(b), .. }) => Some(b.len()),
            _ => None,
        }
    }

    pub(crate) fn check_inline_size(&self) -> Result<(), CodecError> {
        match self.inline_len() {
            Some(len) if len > MAX_INLINE_BYTES => Err(CodecError::OversizeInline { len }),
            _ => Ok(()),
        }
    }

    pub(crate) fn from_wire(value: Value) -> Result<Self, CodecError> {
        let Value::Object(mut obj) = value else {
            return Err(CodecError::Structure("part must be a JSON object".into()));
        };
        let kind = match obj.remove("kind") {
            Some(Value::String(k)) => k,
            Some(_) => return Err(CodecError::Structure("`kind` must be a string".into())),
            None => return Err(CodecError::MissingField("kind")),
        };
        match kind.as_str() {
            "text" => match obj.remove("content") {
                Some(Value::String(content)) => Ok(Part::Text { content }),
                Some(_) => Err(CodecError::Structure("text `content` must be a string".into())),
                None => Err(CodecError::MissingField("content")),
            },
            "data" => match obj.remove("data") {
                Some(value) => Ok(Part::Data { value }),
                None => Err(CodecError::MissingField("data")),
            },
            "file" => file_from_wire(obj),
            other => Err(CodecError::UnknownPartKind(other.to_string())),
        }
    }
}

fn file_from_wire(mut obj: Map<String, Value>) -> Result<Part, CodecError> {
    // `mediaType` is the newer spelling; `mimeType` wins when both are present.
    let mime_raw = match (obj.remove("mimeType"), obj.remove("mediaType")) {
        (Some(v), _) | (None, Some(v)) => v,
        (None, None) => return Err(CodecError::MissingField("mimeType")),
    };
    let Value::String(mime_raw) = mime_raw else {
        return Err(CodecError::Structure("`mimeType` must be a string".into()));
    };
    let mime_type = MimeType::parse(&mime_raw)?;
    let name = match obj.remove("name") {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) => Some(s),
        Some(_) => return Err(CodecError::Structure("`name` must be a string".into())),
    };
    let payload = match (obj.remove("data"), obj.remove("uri")) {
        (Some(_), Some(_)) => return Err(CodecError::ConflictingPayload),
        (None, None) => return Err(CodecError::MissingPayload),
        (Some(Value::String(b64)), None) => {
            let bytes = BASE64.decode(b64.as_bytes()).map_err(|e| CodecError::InvalidBase64(e.to_string()))?;
            if bytes.len() > MAX_INLINE_BYTES {
                return Err(CodecError::OversizeInline { len: bytes.len() });
            }
            FilePayload::Inline(bytes)
        }
        (None, Some(Value::String(uri))) => FilePayload::Uri(uri),
        _ => return Err(CodecError::Structure("file `data`/`uri` must be strings".into())),
    };
    Ok(Part::File(FilePart { mime_type, payload, name }))
}

impl Serialize for Part {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Part::Text { content } => {
                let mut map = serializer.serialize_map(Some(2))?;
                map.serialize_entry("kind", "text")?;
                map.serialize_entry("content", content)?;
                map.end()
            }
            Part::Data { value } => {
                let mut map = serializer.serialize_map(Some(2))?;
                map.serialize_entry("kind", "data")?;
                map.serialize_entry("data", value)?;
                map.end()
            }
            Part::File(file) => {
                let mut map = serializer.serialize_map(None)?;
                map.serialize_entry("kind", "file")?;
                map.serialize_entry("mimeType", &file.mime_type)?;
                if let Some(name) = &file.name {
                    map.serialize_entry("name", name)?;
                }
                match &file.payload {
                    FilePayload::Inline(bytes) => {
                        if bytes.len() > MAX_INLINE_BYTES {
                            return Err(S::Error::custom(CodecError::OversizeInline { len: bytes.len() }));
                        }
                        map.serialize_entry("data", &BASE64.encode(bytes))?;
                    }
                    FilePayload::Uri(uri) => map.serialize_entry("uri", uri)?,
                }
                map.end()
            }
        }
    }
}

impl<'de> Deserialize<'de> for Part {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let value = Value::deserialize(deserializer)?;
        Part::from_wire(value).map_err(D::Error::custom)
    }
}

/// Classifies a part by the modality it carries.
///
/// `audio/*` files are voice, `image/*` files are image, every other file
/// type is treated as structured data and is never transcoded.
pub fn part_modality(part: &Part) -> Modality {
    match part {
        Part::Text { .. } => Modality::Text,
        Part::Data { .. } => Modality::Data,
        Part::File(f) => {
            let top = f.mime_type.top_level();
            if top.eq_ignore_ascii_case("audio") {
                Modality::Voice
            } else if top.eq_ignore_ascii_case("image") {
                Modality::Image
            } else {
                Modality::Data
            }
        }
    }
}
