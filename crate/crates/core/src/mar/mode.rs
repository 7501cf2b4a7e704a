use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::a2a::{MimeType, Modality};
use crate::registry::CapabilitySet;

/// Priority gate for adaptive routing. `Theta::INFINITY` is above every
/// possible task priority, so adaptive routing with it never forwards media
/// natively.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Theta(pub u64);

impl Theta {
    pub const INFINITY: Theta = Theta(u64::MAX);

    pub fn admits(self, priority: TaskPriority) -> bool {
        u64::from(priority.0) >= self.0
    }
}

impl fmt::Display for Theta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if *self == Theta::INFINITY {
            f.write_str("inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

impl FromStr for Theta {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "inf" | "infinity" | "∞" => Ok(Theta::INFINITY),
            t => t.parse::<u64>().map(Theta).map_err(|_| format!("invalid theta {s:?}: expected an integer or \"inf\"")),
        }
    }
}

impl TryFrom<String> for Theta {
    type Error = String;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Theta> for String {
    fn from(t: Theta) -> String {
        t.to_string()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TaskPriority(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum RoutingMode {
    Native,
    TextBottleneck,
    Adaptive(Theta),
}

impl RoutingMode {
    /// Builds a mode from the config pair `router.mode` / `router.theta`.
    pub fn from_config(mode: &str, theta: Option<Theta>) -> Result<Self, String> {
        match mode {
            "adaptive" => theta.map(RoutingMode::Adaptive).ok_or_else(|| "adaptive mode needs router.theta".to_string()),
            other => other.parse(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            RoutingMode::Native => "native",
            RoutingMode::TextBottleneck => "text_bottleneck",
            RoutingMode::Adaptive(_) => "adaptive",
        }
    }

    /// Label used in reports.
    pub fn arm_label(self) -> String {
        match self {
            RoutingMode::Native => "MMA2A".into(),
            RoutingMode::TextBottleneck => "Text-BN".into(),
            RoutingMode::Adaptive(t) => format!("Adaptive(θ={t})"),
        }
    }
}

impl fmt::Display for RoutingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RoutingMode::Adaptive(t) => write!(f, "adaptive:{t}"),
            m => f.write_str(m.name()),
        }
    }
}

impl FromStr for RoutingMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "native" | "mma2a" => Ok(RoutingMode::Native),
            "text_bottleneck" | "text-bottleneck" | "text-bn" => Ok(RoutingMode::TextBottleneck),
            other => match other.strip_prefix("adaptive:") {
                Some(t) => Ok(RoutingMode::Adaptive(t.parse()?)),
                None => Err(format!(
                    "unknown routing mode {s:?}: expected native, text_bottleneck or adaptive:<theta>"
                )),
            },
        }
    }
}

impl TryFrom<String> for RoutingMode {
    type Error = String;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<RoutingMode> for String {
    fn from(m: RoutingMode) -> Self {
        m.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Native,
    Transcoded,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TranscoderKind {
    SpeechToText,
    ImageCaption,
}

impl TranscoderKind {
    pub fn for_modality(m: Modality) -> Option<Self> {
        match m {
            Modality::Voice => Some(TranscoderKind::SpeechToText),
            Modality::Image => Some(TranscoderKind::ImageCaption),
            _ => None,
        }
    }
}

/// The routing rule, with no I/O.
///
/// Media parts go native when the destination declares their MIME type (and,
/// in adaptive mode, the task clears the priority gate); text-bottleneck mode
/// transcodes every media part. A text part counts as native only when the
/// destination declares `text/plain`; delivered anywhere else it is recorded
/// as an identity transcode with no transcoder. Data parts are always native.
pub fn decide_outcome(
    modality: Modality,
    mime: &MimeType,
    caps: &CapabilitySet,
    mode: RoutingMode,
    priority: TaskPriority,
) -> (Outcome, Option<TranscoderKind>) {
    match modality {
        Modality::Data => (Outcome::Native, None),
        Modality::Text if caps.covers(mime) => (Outcome::Native, None),
        Modality::Text => (Outcome::Transcoded, None),
        Modality::Voice | Modality::Image => {
            let native = match mode {
                RoutingMode::Native => caps.covers(mime),
                RoutingMode::TextBottleneck => false,
                RoutingMode::Adaptive(theta) => theta.admits(priority) && caps.covers(mime),
            };
            if native {
                (Outcome::Native, None)
            } else {
                (Outcome::Transcoded, TranscoderKind::for_modality(modality))
            }
        }
    }
}
