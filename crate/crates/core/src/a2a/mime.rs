use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// A syntactically valid `type/subtype` media type.
///
/// The original spelling is kept so that encode/decode round-trips are
/// lossless; comparisons through [`MimeType::matches`] are case-insensitive.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MimeType(String);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid MIME type {0:?}: expected `type/subtype`")]
pub struct InvalidMime(pub String);

fn is_token(s: &str) -> bool {
    // RFC 6838 restricted-name, plus `*` for capability wildcards.
    !s.is_empty()
        && s.len() <= 127
        && s.bytes().all(|b| {
            b.is_ascii_alphanumeric()
                || matches!(b, b'!' | b'#' | b'$' | b'&' | b'-' | b'^' | b'_' | b'.' | b'+' | b'*')
        })
}

impl MimeType {
    pub fn parse(raw: &str) -> Result<Self, InvalidMime> {
        let (ty, sub) = raw.split_once('/').ok_or_else(|| InvalidMime(raw.to_string()))?;
        if !is_token(ty) || !is_token(sub) {
            return Err(InvalidMime(raw.to_string()));
        }
        Ok(Self(raw.to_string()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn top_level(&self) -> &str {
        self.0.split_once('/').map(|(t, _)| t).unwrap_or(&self.0)
    }

    pub fn subtype(&self) -> &str {
        self.0.split_once('/').map(|(_, s)| s).unwrap_or("")
    }

    /// Whether this (declared) media range covers `concrete`.
    /// `image/*` covers every image subtype and `*/*` covers everything.
    pub fn matches(&self, concrete: &MimeType) -> bool {
        let top_ok = self.top_level() == "*" || self.top_level().eq_ignore_ascii_case(concrete.top_level());
        let sub_ok = self.subtype() == "*" || self.subtype().eq_ignore_ascii_case(concrete.subtype());
        top_ok && sub_ok
    }

    pub fn text_plain() -> Self {
        Self("text/plain".into())
    }
}

impl fmt::Display for MimeType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for MimeType {
    type Err = InvalidMime;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse(s)
    }
}

impl Serialize for MimeType {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for MimeType {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        MimeType::parse(&raw).map_err(serde::de::Error::custom)
    }
}
