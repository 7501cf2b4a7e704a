//! The cross-modal customer-service benchmark: tasks, knowledge base,
//! manifest loading and validation, scoring and placeholder media.

pub mod kb;
pub mod manifest;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::a2a::{FilePayload, Modality, Part};
use crate::agents::{Action, ActionDecision, AgentKind, TaskScript};
use crate::mar::TaskPriority;
use crate::media;

pub use kb::{KnowledgeBase, Product, TroubleshootingEntry};
pub use manifest::{load_manifest, load_manifest_with, Benchmark, ManifestError, ValidationOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    ProductDefect,
    AssemblyGuidance,
    VisualTroubleshooting,
    WarrantyClaim,
}

impl Category {
    pub const ALL: [Category; 4] =
        [Category::ProductDefect, Category::AssemblyGuidance, Category::VisualTroubleshooting, Category::WarrantyClaim];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::ProductDefect => "product_defect",
            Category::AssemblyGuidance => "assembly_guidance",
            Category::VisualTroubleshooting => "visual_troubleshooting",
            Category::WarrantyClaim => "warranty_claim",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Category::ProductDefect => "Product defect report",
            Category::AssemblyGuidance => "Assembly guidance",
            Category::VisualTroubleshooting => "Visual troubleshooting",
            Category::WarrantyClaim => "Warranty claim",
        }
    }

    /// Tasks per category in the reference benchmark.
    pub fn reference_size(self) -> usize {
        match self {
            Category::ProductDefect | Category::WarrantyClaim => 13,
            Category::AssemblyGuidance | Category::VisualTroubleshooting => 12,
        }
    }

    /// Modalities every task of the category carries.
    pub fn modalities(self) -> &'static [Modality] {
        match self {
            Category::ProductDefect | Category::WarrantyClaim => &[Modality::Voice, Modality::Image, Modality::Text],
            Category::AssemblyGuidance => &[Modality::Voice, Modality::Text],
            Category::VisualTroubleshooting => &[Modality::Image, Modality::Text],
        }
    }

    /// Default analysis instruction sent along with media.
    pub fn instruction(self) -> &'static str {
        match self {
            Category::ProductDefect => "Identify the defect, its likely cause and the customer's account of it.",
            Category::AssemblyGuidance => "Work out which assembly step the customer is on and what they are asking.",
            Category::VisualTroubleshooting => "Read the device state or error shown and match it to a known symptom.",
            Category::WarrantyClaim => "Extract product identity, purchase evidence, sentiment and urgency.",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Category {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Category::ALL.into_iter().find(|c| c.as_str() == s).ok_or_else(|| format!("unknown category {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkPart {
    pub part: Part,
    /// Agents this part is dispatched to.
    pub targets: Vec<AgentKind>,
    pub transcript: Option<String>,
    pub caption: Option<String>,
    pub file: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkTask {
    pub task_id: String,
    pub category: Category,
    pub product_id: String,
    pub priority: TaskPriority,
    pub ground_truth: Action,
    /// Operator-assigned failure label, tabulated when the treatment arm misses.
    pub error_mode: Option<String>,
    pub parts: Vec<BenchmarkPart>,
    pub script: TaskScript,
}

impl BenchmarkTask {
    pub fn modalities(&self) -> Vec<Modality> {
        let mut m: Vec<Modality> = self.parts.iter().map(|p| p.part.modality()).collect();
        m.sort();
        m.dedup();
        m
    }

    /// Digest of every input part, used to prove both arms saw the same bytes.
    pub fn input_checksum(&self) -> String {
        let mut h = Sha256::new();
        for p in &self.parts {
            h.update(p.part.kind().as_bytes());
            h.update(p.part.representative_mime().as_str().as_bytes());
            match &p.part {
                Part::Text { content } => h.update(content.as_bytes()),
                Part::File(f) => match &f.payload {
                    FilePayload::Inline(b) => h.update(b),
                    FilePayload::Uri(u) => h.update(u.as_bytes()),
                },
                Part::Data { value } => h.update(value.to_string().as_bytes()),
            }
            for t in &p.targets {
                h.update(t.as_str().as_bytes());
            }
            h.update([0u8]);
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Exact label match; no partial credit.
pub fn score(decision: &ActionDecision, task: &BenchmarkTask) -> bool {
    decision.action == task.ground_truth
}

/// Placeholder media for every voice and image part of a task, keyed by the
/// part's file path. `min_size` pads each payload to at least that many bytes.
pub fn generate_synthetic_media(task: &BenchmarkTask, min_size: Option<usize>) -> Result<Vec<(PathBuf, Vec<u8>)>, media::MediaError> {
    let mut out = Vec::new();
    for p in &task.parts {
        let Some(file) = &p.file else { continue };
        let bytes = match p.part.modality() {
            Modality::Voice => media::wav_with_transcript(p.transcript.as_deref().unwrap_or_default(), min_size),
            Modality::Image => media::png_with_caption(p.caption.as_deref().unwrap_or_default(), min_size)?,
            _ => continue,
        };
        out.push((file.clone(), bytes));
    }
    Ok(out)
}
