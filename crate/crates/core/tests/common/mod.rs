#![allow(dead_code)]

use std::path::PathBuf;

use mma2a::a2a::{AgentCapabilities, AgentCard, Message, MimeType, Part, Role, Skill, TaskState, TaskStatus, TaskUpdate};
use mma2a::benchmark::Category;
use mma2a::cli::{FileConfig, RunConfig};
use mma2a::mar::{RoutingMode, Theta};
use mma2a::stats::PairedOutcome;
use proptest::prelude::*;
use rand::Rng;
use serde_json::{Map, Value};

pub fn manifest_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/crossmodal-cs/manifest.toml")
}

pub fn run_config(out: &std::path::Path, delay_profile: &str, seed: u64) -> RunConfig {
    let file = FileConfig {
        manifest: Some(manifest_path()),
        seed: Some(seed),
        out: Some(out.to_path_buf()),
        delay_profile: Some(delay_profile.into()),
        ..FileConfig::default()
    };
    RunConfig::resolve(file, &["text_bottleneck", "native"]).expect("valid config")
}

// ---------------------------------------------------------------------------
// Routing oracle. Written from the case table, sharing nothing with the
// router beyond the input types.

#[derive(Debug, Clone)]
pub enum OracleMode {
    Native,
    TextBottleneck,
    Adaptive(Option<u64>), // None = infinity
}

impl OracleMode {
    pub fn to_mode(&self) -> RoutingMode {
        match self {
            OracleMode::Native => RoutingMode::Native,
            OracleMode::TextBottleneck => RoutingMode::TextBottleneck,
            OracleMode::Adaptive(Some(t)) => RoutingMode::Adaptive(Theta(*t)),
            OracleMode::Adaptive(None) => RoutingMode::Adaptive(Theta::INFINITY),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleVerdict {
    pub native: bool,
    /// "stt", "caption" or None.
    pub transcoder: Option<&'static str>,
}

fn range_covers(declared: &str, concrete: &str) -> bool {
    let (dt, ds) = declared.split_once('/').unwrap();
    let (ct, cs) = concrete.split_once('/').unwrap();
    (dt == "*" || dt.eq_ignore_ascii_case(ct))
        && (ds == "*" || ds.eq_ignore_ascii_case(cs))
}

/// `kind` is "text", "data" or "file"; `mime` is the file's type (ignored otherwise).
pub fn oracle(kind: &str, mime: &str, declared: &[String], mode: &OracleMode, priority: u32) -> OracleVerdict {
    let effective = match kind {
        "text" => "text/plain",
        "data" => "application/json",
        _ => mime,
    };
    let declared_here = declared.iter().any(|d| range_covers(d, effective));
    let top = effective.split('/').next().unwrap().to_ascii_lowercase();
    let media = if kind != "file" {
        None
    } else if top == "audio" {
        Some("stt")
    } else if top == "image" {
        Some("caption")
    } else {
        None
    };
    if kind == "data" || (kind == "file" && media.is_none()) {
        return OracleVerdict { native: true, transcoder: None };
    }
    if kind == "text" {
        return OracleVerdict { native: declared_here, transcoder: None };
    }
    let gate_open = match mode {
        OracleMode::Native => true,
        OracleMode::TextBottleneck => false,
        OracleMode::Adaptive(None) => false,
        OracleMode::Adaptive(Some(theta)) => priority as u64 >= *theta,
    };
    if gate_open && declared_here {
        OracleVerdict { native: true, transcoder: None }
    } else {
        OracleVerdict { native: false, transcoder: media }
    }
}

pub const PART_MIMES: &[&str] = &[
    "audio/wav", "audio/mpeg", "audio/ogg", "Audio/WAV", "image/png", "image/jpeg", "image/webp", "IMAGE/png",
    "application/pdf", "video/mp4", "text/csv",
];

pub const DECLARED_MIMES: &[&str] = &[
    "audio/wav", "audio/mpeg", "audio/*", "image/png", "image/jpeg", "image/*", "text/plain", "TEXT/Plain", "text/*",
    "*/*", "application/json", "video/mp4", "application/pdf",
];

#[derive(Debug, Clone)]
pub struct Triple {
    pub kind: &'static str,
    pub mime: &'static str,
    pub declared: Vec<String>,
    pub mode: OracleMode,
    pub priority: u32,
}

impl Triple {
    pub fn part(&self, payload: Vec<u8>) -> Part {
        match self.kind {
            "text" => Part::text("the customer says it fell off the table"),
            "data" => Part::data(serde_json::json!({"order": 17})),
            _ => Part::inline_file(MimeType::parse(self.mime).unwrap(), payload, None),
        }
    }

    pub fn card(&self, url: &str) -> AgentCard {
        AgentCard {
            name: "random".into(),
            description: String::new(),
            url: url.into(),
            protocol_version: mma2a::a2a::PROTOCOL_VERSION.into(),
            capabilities: AgentCapabilities::default(),
            skills: vec![Skill {
                id: "s".into(),
                name: String::new(),
                description: String::new(),
                input_modes: self.declared.iter().map(|m| MimeType::parse(m).unwrap()).collect(),
                output_modes: vec![MimeType::text_plain()],
            }],
        }
    }

    pub fn oracle(&self) -> OracleVerdict {
        oracle(self.kind, self.mime, &self.declared, &self.mode, self.priority)
    }
}

pub fn random_triple<R: Rng>(rng: &mut R) -> Triple {
    let kind = match rng.random_range(0..10) {
        0..=1 => "text",
        2 => "data",
        _ => "file",
    };
    let mime = PART_MIMES[rng.random_range(0..PART_MIMES.len())];
    let n = rng.random_range(0..=5);
    let declared = (0..n).map(|_| DECLARED_MIMES[rng.random_range(0..DECLARED_MIMES.len())].to_string()).collect();
    let mode = match rng.random_range(0..4) {
        0 => OracleMode::Native,
        1 => OracleMode::TextBottleneck,
        _ if rng.random_bool(0.15) => OracleMode::Adaptive(None),
        _ => OracleMode::Adaptive(Some(rng.random_range(0..=12))),
    };
    Triple { kind, mime, declared, mode, priority: rng.random_range(0..=10) }
}

// ---------------------------------------------------------------------------
// Message strategies.

fn json_value() -> impl Strategy<Value = Value> {
    let leaf = prop_oneof![
        Just(Value::Null),
        any::<bool>().prop_map(Value::Bool),
        any::<i64>().prop_map(Value::from),
        ".{0,12}".prop_map(Value::String),
    ];
    leaf.prop_recursive(3, 24, 4, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 0..4).prop_map(Value::Array),
            prop::collection::btree_map("[a-z]{1,6}", inner, 0..4)
                .prop_map(|m| Value::Object(m.into_iter().collect::<Map<_, _>>())),
        ]
    })
}

fn mime_strategy() -> impl Strategy<Value = MimeType> {
    prop::sample::select(PART_MIMES).prop_map(|m| MimeType::parse(m).unwrap())
}

pub fn part_strategy() -> impl Strategy<Value = Part> {
    prop_oneof![
        any::<String>().prop_map(Part::text),
        json_value().prop_map(Part::data),
        (mime_strategy(), prop::collection::vec(any::<u8>(), 0..2048), prop::option::of("[a-z0-9_.]{1,12}"))
            .prop_map(|(m, b, n)| Part::inline_file(m, b, n)),
        (mime_strategy(), "[a-z0-9/]{1,24}", prop::option::of("[a-z0-9_.]{1,12}"))
            .prop_map(|(m, p, n)| Part::uri_file(m, format!("http://127.0.0.1:8200/blobs/{p}"), n)),
    ]
}

pub fn message_strategy() -> impl Strategy<Value = Message> {
    (
        prop_oneof![Just(Role::User), Just(Role::Agent)],
        "[A-Za-z0-9-]{1,36}",
        prop::collection::vec(part_strategy(), 1..6),
        prop::option::of(prop::collection::btree_map("[a-zA-Z]{1,8}", json_value(), 0..4)),
    )
        .prop_map(|(role, id, parts, meta)| Message {
            role,
            parts,
            message_id: id,
            metadata: meta.map(|m| m.into_iter().collect()),
        })
}

pub fn update_strategy() -> impl Strategy<Value = TaskUpdate> {
    let state = prop_oneof![
        Just(TaskState::Submitted),
        Just(TaskState::Working),
        Just(TaskState::Completed),
        Just(TaskState::Failed)
    ];
    prop_oneof![
        ("[a-z0-9-]{1,20}", state, prop::option::of(any::<String>()), any::<bool>()).prop_map(|(id, state, msg, fin)| {
            TaskUpdate::StatusUpdate { task_id: id, status: TaskStatus { state, message: msg }, is_final: fin }
        }),
        ("[a-z0-9-]{1,20}", part_strategy()).prop_map(|(id, p)| TaskUpdate::ArtifactUpdate { task_id: id, artifact: p }),
    ]
}

// ---------------------------------------------------------------------------
// Statistics oracles.

fn gcd(a: u128, b: u128) -> u128 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Two-sided exact p-value by listing every assignment of the n discordant
/// pairs to either side and counting those at least as lopsided as (b, c).
pub fn mcnemar_by_enumeration(b: u64, c: u64) -> (u128, u128) {
    let n = (b + c) as u32;
    let (lo, hi) = (b.min(c) as u32, b.max(c) as u32);
    let mut extreme: u128 = 0;
    for mask in 0u64..(1u64 << n) {
        let k = mask.count_ones();
        if k <= lo || k >= hi {
            extreme += 1;
        }
    }
    let total: u128 = 1 << n;
    let g = gcd(extreme, total);
    (extreme / g, total / g)
}

/// 50 paired outcomes with a=15 (both right), b=11 (treatment only),
/// c=1 (baseline only), d=23 (both wrong).
pub fn reference_outcomes() -> Vec<PairedOutcome> {
    let mut v = Vec::new();
    let mut push = |n: usize, base: bool, treat: bool| {
        for _ in 0..n {
            let i = v.len();
            v.push(PairedOutcome {
                task_id: format!("t{i:02}"),
                category: Category::ALL[i % 4],
                baseline_correct: base,
                treatment_correct: treat,
                baseline_latency_us: 1_000 + i as u64,
                treatment_latency_us: 1_800 + 3 * i as u64,
            });
        }
    };
    push(15, true, true);
    push(11, false, true);
    push(1, true, false);
    push(23, false, false);
    v
}
