//! Manifest loading. The manifest is a TOML file listing every task with its
//! parts, dispatch targets and fixtures; media live next to it and the
//! knowledge base is a sibling TOML file. See `BENCHMARK_FORMAT.md`.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::a2a::{MimeType, Modality, Part};
use crate::agents::{agent_card, profile_key, Action, AgentKind, Fidelity, TaskScript};
use crate::mar::TaskPriority;
use crate::media;
use crate::registry::CapabilitySet;

use super::{BenchmarkPart, BenchmarkTask, Category, KnowledgeBase};

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawManifest {
    schema_version: u32,
    name: String,
    kb: String,
    #[serde(default)]
    keyword_rules: Option<String>,
    #[serde(default)]
    tasks: Vec<RawTask>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTask {
    task_id: String,
    category: String,
    product_id: String,
    #[serde(default)]
    priority: u32,
    ground_truth: String,
    #[serde(default)]
    error_mode: Option<String>,
    #[serde(default)]
    parts: Vec<RawPart>,
    fixtures: RawFixtures,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPart {
    kind: String,
    #[serde(default)]
    content: Option<String>,
    #[serde(default)]
    file: Option<String>,
    #[serde(default)]
    mime_type: Option<String>,
    #[serde(default)]
    transcript: Option<String>,
    #[serde(default)]
    caption: Option<String>,
    #[serde(default)]
    targets: Option<Vec<String>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFixtures {
    #[serde(default)]
    voice_native: Option<String>,
    #[serde(default)]
    vision_native: Option<String>,
    #[serde(default)]
    voice_transcoded: Option<String>,
    #[serde(default)]
    vision_transcoded: Option<String>,
    #[serde(default)]
    decisions: BTreeMap<String, String>,
}

#[derive(Debug, thiserror::Error)]
pub enum ManifestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path} does not parse: {message}")]
    Parse { path: String, message: String },
    #[error("manifest has {} violation(s):\n  {}", .0.len(), .0.join("\n  "))]
    Invalid(Vec<String>),
}

#[derive(Debug, Clone, Copy)]
pub struct ValidationOptions {
    /// Pin category sizes to 13/12/12/13 and the KB to 15 products and 10
    /// troubleshooting entries.
    pub reference_counts: bool,
    /// Read media files. Without it parts carry empty payloads, which is what
    /// media generation needs before the files exist.
    pub load_media: bool,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        Self { reference_counts: true, load_media: true }
    }
}

#[derive(Debug, Clone)]
pub struct Benchmark {
    pub name: String,
    pub root: PathBuf,
    pub tasks: Vec<BenchmarkTask>,
    pub kb: KnowledgeBase,
    pub keyword_rules: Option<PathBuf>,
}

impl Benchmark {
    pub fn task(&self, id: &str) -> Option<&BenchmarkTask> {
        self.tasks.iter().find(|t| t.task_id == id)
    }

    pub fn script_store(&self) -> crate::agents::ScriptStore {
        let mut s = crate::agents::ScriptStore::new();
        for t in &self.tasks {
            s.insert(t.task_id.clone(), t.script.clone());
        }
        s
    }
}

pub fn load_manifest(path: &Path) -> Result<Benchmark, ManifestError> {
    load_manifest_with(path, ValidationOptions::default())
}

fn read(path: &Path) -> Result<String, ManifestError> {
    std::fs::read_to_string(path).map_err(|source| ManifestError::Io { path: path.display().to_string(), source })
}

pub fn load_manifest_with(path: &Path, opts: ValidationOptions) -> Result<Benchmark, ManifestError> {
    let raw: RawManifest =
        toml::from_str(&read(path)?).map_err(|e| ManifestError::Parse { path: path.display().to_string(), message: e.to_string() })?;
    let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let kb_path = root.join(&raw.kb);
    let kb: KnowledgeBase =
        toml::from_str(&read(&kb_path)?).map_err(|e| ManifestError::Parse { path: kb_path.display().to_string(), message: e.to_string() })?;

    let mut v = Vec::new();
    if raw.schema_version != MANIFEST_SCHEMA_VERSION {
        v.push(format!("unsupported schema_version {}", raw.schema_version));
    }
    v.extend(kb.violations(opts.reference_counts));
    let keyword_rules = raw.keyword_rules.as_ref().map(|r| root.join(r));
    if let Some(r) = &keyword_rules {
        if !r.exists() {
            v.push(format!("keyword rule table {} is missing", r.display()));
        }
    }

    let mut tasks = Vec::new();
    let mut ids = BTreeSet::new();
    for t in raw.tasks {
        if !ids.insert(t.task_id.clone()) {
            v.push(format!("{}: duplicate task_id", t.task_id));
        }
        if let Some(task) = convert_task(t, &root, &kb, opts, &mut v) {
            tasks.push(task);
        }
    }

    if opts.reference_counts {
        for c in Category::ALL {
            let n = tasks.iter().filter(|t| t.category == c).count();
            if n != c.reference_size() {
                v.push(format!("category {c}: {n} tasks, expected {}", c.reference_size()));
            }
        }
    }

    if v.is_empty() {
        Ok(Benchmark { name: raw.name, root, tasks, kb, keyword_rules })
    } else {
        Err(ManifestError::Invalid(v))
    }
}

fn convert_task(t: RawTask, root: &Path, kb: &KnowledgeBase, opts: ValidationOptions, v: &mut Vec<String>) -> Option<BenchmarkTask> {
    let id = t.task_id.clone();
    let start = v.len();
    let category = t.category.parse::<Category>().map_err(|e| v.push(format!("{id}: {e}"))).ok();
    let ground_truth = t.ground_truth.parse::<Action>().map_err(|e| v.push(format!("{id}: ground_truth {e}"))).ok();
    if kb.product(&t.product_id).is_none() {
        v.push(format!("{id}: product {} is not in the knowledge base", t.product_id));
    }
    if t.priority == u32::MAX {
        v.push(format!("{id}: priority must be below {}", u32::MAX));
    }
    if t.parts.is_empty() {
        v.push(format!("{id}: task has no parts"));
    }

    let mut parts = Vec::new();
    for (i, p) in t.parts.into_iter().enumerate() {
        if let Some(bp) = convert_part(&id, i, p, root, opts, v) {
            parts.push(bp);
        }
    }

    let mut script = TaskScript::default();
    for (agent, text) in [(AgentKind::Voice, t.fixtures.voice_native), (AgentKind::Vision, t.fixtures.vision_native)] {
        if let Some(s) = text {
            script.native_summary.insert(agent, s);
        }
    }
    for (agent, text) in [(AgentKind::Voice, t.fixtures.voice_transcoded), (AgentKind::Vision, t.fixtures.vision_transcoded)] {
        if let Some(s) = text {
            script.transcoded_summary.insert(agent, s);
        }
    }
    for (key, action) in t.fixtures.decisions {
        match action.parse::<Action>() {
            Ok(a) => {
                script.decisions.insert(key, a);
            }
            Err(e) => v.push(format!("{id}: decision for {key:?}: {e}")),
        }
    }

    let (category, ground_truth) = (category?, ground_truth?);
    let task = BenchmarkTask {
        task_id: id.clone(),
        category,
        product_id: t.product_id,
        priority: TaskPriority(t.priority),
        ground_truth,
        error_mode: t.error_mode,
        parts,
        script,
    };
    check_task(&task, v);
    (v.len() == start).then_some(task)
}

fn convert_part(id: &str, i: usize, p: RawPart, root: &Path, opts: ValidationOptions, v: &mut Vec<String>) -> Option<BenchmarkPart> {
    let at = format!("{id}: part {i}");
    let modality = match p.kind.as_str() {
        "voice" => Modality::Voice,
        "image" => Modality::Image,
        "text" => Modality::Text,
        other => {
            v.push(format!("{at}: unknown kind {other:?}"));
            return None;
        }
    };
    let targets = match &p.targets {
        None => vec![AgentKind::for_modality(modality)],
        Some(list) if list.is_empty() => {
            v.push(format!("{at}: empty targets"));
            return None;
        }
        Some(list) => {
            let parsed: Result<Vec<AgentKind>, String> = list.iter().map(|s| s.parse()).collect();
            match parsed {
                Ok(t) => t,
                Err(e) => {
                    v.push(format!("{at}: {e}"));
                    return None;
                }
            }
        }
    };

    if modality == Modality::Text {
        let Some(content) = p.content else {
            v.push(format!("{at}: text part needs content"));
            return None;
        };
        return Some(BenchmarkPart { part: Part::text(content), targets, transcript: None, caption: None, file: None });
    }

    let (Some(file), Some(mime)) = (p.file, p.mime_type) else {
        v.push(format!("{at}: {} part needs file and mime_type", p.kind));
        return None;
    };
    let mime = match MimeType::parse(&mime) {
        Ok(m) => m,
        Err(e) => {
            v.push(format!("{at}: {e}"));
            return None;
        }
    };
    let expected_top = if modality == Modality::Voice { "audio" } else { "image" };
    if !mime.top_level().eq_ignore_ascii_case(expected_top) {
        v.push(format!("{at}: {} part has MIME type {mime}", p.kind));
        return None;
    }
    let (transcript, caption) = (p.transcript, p.caption);
    match (modality, &transcript, &caption) {
        (Modality::Voice, None, _) => v.push(format!("{at}: voice part needs a transcript fixture")),
        (Modality::Image, _, None) => v.push(format!("{at}: image part needs a caption fixture")),
        _ => {}
    }
    let path = root.join(&file);
    let bytes = if opts.load_media {
        match std::fs::read(&path) {
            Ok(b) => {
                check_embedded(&at, modality, &mime, &b, transcript.as_deref(), caption.as_deref(), v);
                b
            }
            Err(e) => {
                v.push(format!("{at}: media file {} unreadable: {e}", path.display()));
                return None;
            }
        }
    } else {
        Vec::new()
    };
    let name = Path::new(&file).file_name().map(|n| n.to_string_lossy().into_owned());
    Some(BenchmarkPart { part: Part::inline_file(mime, bytes, name), targets, transcript, caption, file: Some(path) })
}

/// Placeholder media must carry the same description as the fixture, since
/// that is what the mock transcoders will read back out.
fn check_embedded(at: &str, m: Modality, mime: &MimeType, bytes: &[u8], transcript: Option<&str>, caption: Option<&str>, v: &mut Vec<String>) {
    let stale = |what: &str| format!("{at}: embedded {what} does not match the fixture; regenerate media");
    match (m, mime.subtype()) {
        (Modality::Voice, "wav") => match media::parse_wav(bytes) {
            Ok(w) if w.comment.as_deref() == transcript => {}
            Ok(_) => v.push(stale("transcript")),
            Err(e) => v.push(format!("{at}: {e}")),
        },
        (Modality::Image, "png") => match media::parse_png(bytes) {
            Ok(p) if p.caption.as_deref() == caption => {}
            Ok(_) => v.push(stale("caption")),
            Err(e) => v.push(format!("{at}: {e}")),
        },
        _ => {}
    }
}

/// Fidelity each analysis agent reaches for this task under native routing.
pub fn native_arm_fidelity(task: &BenchmarkTask) -> BTreeMap<AgentKind, Fidelity> {
    let mut out = BTreeMap::new();
    for agent in [AgentKind::Voice, AgentKind::Vision] {
        let caps = CapabilitySet::from_card(&agent_card(agent, "http://localhost"));
        let mut targeted = task.parts.iter().filter(|p| p.targets.contains(&agent)).peekable();
        if targeted.peek().is_none() {
            continue;
        }
        let native = targeted.any(|p| Some(p.part.modality()) == agent.native_modality() && caps.covers(&p.part.representative_mime()));
        out.insert(agent, if native { Fidelity::Native } else { Fidelity::Transcoded });
    }
    out
}

/// The two scripted keys a task can hit: native routing and text-bottleneck.
pub fn reachable_profiles(task: &BenchmarkTask) -> [String; 2] {
    let f = native_arm_fidelity(task);
    let native = profile_key(f.get(&AgentKind::Voice).copied(), f.get(&AgentKind::Vision).copied());
    let tbn = profile_key(f.get(&AgentKind::Voice).map(|_| Fidelity::Transcoded), f.get(&AgentKind::Vision).map(|_| Fidelity::Transcoded));
    [native, tbn]
}

fn check_task(task: &BenchmarkTask, v: &mut Vec<String>) {
    let id = &task.task_id;
    let have = task.modalities();
    for m in task.category.modalities() {
        if !have.contains(m) {
            v.push(format!("{id}: {} tasks need a {m} part", task.category));
        }
    }
    for m in &have {
        if !task.category.modalities().contains(m) {
            v.push(format!("{id}: {} tasks carry no {m} parts", task.category));
        }
    }
    for (agent, f) in native_arm_fidelity(task) {
        if f == Fidelity::Native && !task.script.native_summary.contains_key(&agent) {
            v.push(format!("{id}: {agent} agent sees native media but has no {agent}_native fixture"));
        }
    }
    for key in reachable_profiles(task) {
        if !task.script.decisions.contains_key(&key) {
            v.push(format!("{id}: no scripted decision for reachable profile {key:?}"));
        }
    }
    const SLOTS: [&str; 3] = ["native", "transcoded", "n/a"];
    for key in task.script.decisions.keys() {
        let ok = key.split_once('|').is_some_and(|(a, b)| SLOTS.contains(&a) && SLOTS.contains(&b));
        if !ok {
            v.push(format!("{id}: malformed decision key {key:?}; expected <voice>|<image>"));
        }
    }
}
