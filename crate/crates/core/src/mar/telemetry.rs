use std::io::{self, BufRead, Write};
use std::path::Path;
use std::sync::Mutex;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::a2a::Modality;

use super::mode::{Outcome, TranscoderKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutingDecision {
    pub task_id: String,
    pub part_modality: Modality,
    pub destination_agent: String,
    pub outcome: Outcome,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transcoder_used: Option<TranscoderKind>,
    pub decided_at: DateTime<Utc>,
    pub decision_latency_us: u64,
}

impl RoutingDecision {
    /// Native outcomes never name a transcoder; transcoded media always does.
    pub fn is_consistent(&self) -> bool {
        match self.outcome {
            Outcome::Native => self.transcoder_used.is_none(),
            Outcome::Transcoded => self.transcoder_used.is_some() || self.part_modality == Modality::Text,
        }
    }
}

/// Append-only decision log shared by every dispatch in a run.
#[derive(Debug, Default)]
pub struct Telemetry {
    log: Mutex<Vec<RoutingDecision>>,
}

impl Telemetry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&self, d: RoutingDecision) {
        self.log.lock().unwrap().push(d);
    }

    pub fn len(&self) -> usize {
        self.log.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn snapshot(&self) -> Vec<RoutingDecision> {
        self.log.lock().unwrap().clone()
    }

    pub fn for_task(&self, task_id: &str) -> Vec<RoutingDecision> {
        self.log.lock().unwrap().iter().filter(|d| d.task_id == task_id).cloned().collect()
    }

    pub fn to_jsonl(&self) -> String {
        to_jsonl(&self.snapshot())
    }
}

pub fn to_jsonl<T: Serialize>(rows: &[T]) -> String {
    let mut out = String::new();
    for r in rows {
        out.push_str(&serde_json::to_string(r).expect("log rows serialize"));
        out.push('\n');
    }
    out
}

pub fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> io::Result<()> {
    let mut f = io::BufWriter::new(std::fs::File::create(path)?);
    f.write_all(to_jsonl(rows).as_bytes())?;
    f.flush()
}

pub fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> io::Result<Vec<T>> {
    let f = io::BufReader::new(std::fs::File::open(path)?);
    let mut rows = Vec::new();
    for (i, line) in f.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row = serde_json::from_str(&line)
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, format!("{}:{}: {e}", path.display(), i + 1)))?;
        rows.push(row);
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeCounts {
    pub native: u64,
    pub transcoded: u64,
}

impl OutcomeCounts {
    pub fn total(&self) -> u64 {
        self.native + self.transcoded
    }

    pub fn native_pct(&self) -> f64 {
        pct(self.native, self.total())
    }

    pub fn transcoded_pct(&self) -> f64 {
        pct(self.transcoded, self.total())
    }

    fn add(&mut self, o: Outcome) {
        match o {
            Outcome::Native => self.native += 1,
            Outcome::Transcoded => self.transcoded += 1,
        }
    }
}

fn pct(k: u64, n: u64) -> f64 {
    if n == 0 {
        0.0
    } else {
        100.0 * k as f64 / n as f64
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoutingProfile {
    pub voice: OutcomeCounts,
    pub image: OutcomeCounts,
    pub text: OutcomeCounts,
    pub data: OutcomeCounts,
    pub total: OutcomeCounts,
}

impl RoutingProfile {
    pub fn get(&self, m: Modality) -> OutcomeCounts {
        match m {
            Modality::Voice => self.voice,
            Modality::Image => self.image,
            Modality::Text => self.text,
            Modality::Data => self.data,
        }
    }
}

pub fn routing_profile(decisions: &[RoutingDecision]) -> RoutingProfile {
    let mut p = RoutingProfile::default();
    for d in decisions {
        let slot = match d.part_modality {
            Modality::Voice => &mut p.voice,
            Modality::Image => &mut p.image,
            Modality::Text => &mut p.text,
            Modality::Data => &mut p.data,
        };
        slot.add(d.outcome);
        p.total.add(d.outcome);
    }
    p
}
