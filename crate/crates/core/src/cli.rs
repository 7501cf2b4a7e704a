//! Command implementations behind the `mma2a` binary. The binary only parses
//! arguments; everything it prints or writes comes from here.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::extract::{Path as UrlPath, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Json;
use serde::{Deserialize, Serialize};

use crate::agents::ScriptedBackend;
use crate::benchmark::{generate_synthetic_media, load_manifest, load_manifest_with, Benchmark, ManifestError, ValidationOptions};
use crate::experiment::{self, decision_backend, BackendChoice, ExperimentConfig, ExperimentError, ExperimentRun};
use crate::mar::{write_jsonl, RoutingMode, Theta};
use crate::mesh::{self, Backends, MeshError};
use crate::net;
use crate::orchestrator::{DelayProfile, Orchestrator, OrchestratorConfig, TaskResult};
use crate::registry::{CardRegistry, RegistryConfig};
use crate::stats::{self, render_json, render_markdown, ReportBundle, ReportInput};

pub const DEFAULT_MANIFEST: &str = "data/crossmodal-cs/manifest.toml";
pub const DEFAULT_OUT: &str = "runs";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    /// 2 for configuration and manifest problems, 3 for failures at run time.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Manifest(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        if e.is_config() {
            CliError::Config(e.to_string())
        } else {
            CliError::Runtime(e.to_string())
        }
    }
}

impl From<MeshError> for CliError {
    fn from(e: MeshError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

fn io_err(what: &str, path: &Path, e: std::io::Error) -> CliError {
    CliError::Runtime(format!("{what} {}: {e}", path.display()))
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Ports {
    pub voice: Option<u16>,
    pub vision: Option<u16>,
    pub text: Option<u16>,
    pub router: Option<u16>,
    pub orchestrator: Option<u16>,
}

/// Everything settable from a config file. Flags override these field by
/// field.
#[derive(Debug, Clone, Default, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub manifest: Option<PathBuf>,
    pub modes: Option<Vec<String>>,
    pub backend: Option<String>,
    pub seed: Option<u64>,
    pub theta: Option<String>,
    pub out: Option<PathBuf>,
    pub delay_profile: Option<String>,
    pub resamples: Option<usize>,
    pub host: Option<String>,
    #[serde(default)]
    pub ports: Ports,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let raw = fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&raw).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// Field-wise override: anything set in `flags` wins.
    pub fn merge(self, flags: FileConfig) -> FileConfig {
        FileConfig {
            manifest: flags.manifest.or(self.manifest),
            modes: flags.modes.or(self.modes),
            backend: flags.backend.or(self.backend),
            seed: flags.seed.or(self.seed),
            theta: flags.theta.or(self.theta),
            out: flags.out.or(self.out),
            delay_profile: flags.delay_profile.or(self.delay_profile),
            resamples: flags.resamples.or(self.resamples),
            host: flags.host.or(self.host),
            ports: Ports {
                voice: flags.ports.voice.or(self.ports.voice),
                vision: flags.ports.vision.or(self.ports.vision),
                text: flags.ports.text.or(self.ports.text),
                router: flags.ports.router.or(self.ports.router),
                orchestrator: flags.ports.orchestrator.or(self.ports.orchestrator),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub manifest: PathBuf,
    /// Baseline first, then treatment. Serve uses only the first.
    pub modes: Vec<RoutingMode>,
    pub backend: BackendChoice,
    pub seed: Option<u64>,
    pub theta: Option<Theta>,
    pub out: PathBuf,
    pub delay_profile: String,
    #[serde(skip)]
    pub delays: Option<DelayProfile>,
    pub resamples: usize,
    pub host: String,
    pub ports: [u16; 5],
}

impl RunConfig {
    /// `default_modes` applies when neither the file nor the flags name any.
    pub fn resolve(c: FileConfig, default_modes: &[&str]) -> Result<Self, CliError> {
        let theta = c.theta.as_deref().map(str::parse::<Theta>).transpose().map_err(CliError::Config)?;
        let names: Vec<String> = c.modes.unwrap_or_else(|| default_modes.iter().map(|s| s.to_string()).collect());
        let modes = names
            .iter()
            .map(|m| RoutingMode::from_config(m, theta))
            .collect::<Result<Vec<_>, _>>()
            .map_err(CliError::Config)?;
        let backend = c.backend.as_deref().unwrap_or("scripted").parse().map_err(CliError::Config)?;
        let delay_profile = c.delay_profile.unwrap_or_else(|| "off".into());
        let delays = DelayProfile::by_name(&delay_profile).map_err(CliError::Config)?;
        let p = c.ports;
        Ok(RunConfig {
            manifest: c.manifest.unwrap_or_else(|| DEFAULT_MANIFEST.into()),
            modes,
            backend,
            seed: c.seed,
            theta,
            out: c.out.unwrap_or_else(|| DEFAULT_OUT.into()),
            delay_profile,
            delays,
            resamples: c.resamples.unwrap_or(stats::DEFAULT_RESAMPLES),
            host: c.host.unwrap_or_else(|| "127.0.0.1".into()),
            ports: [
                p.voice.unwrap_or(8101),
                p.vision.unwrap_or(8102),
                p.text.unwrap_or(8103),
                p.router.unwrap_or(8200),
                p.orchestrator.unwrap_or(8300),
            ],
        })
    }

    fn paired_modes(&self) -> Result<(RoutingMode, RoutingMode), CliError> {
        match self.modes.as_slice() {
            [b, t] if b != t => Ok((*b, *t)),
            [_, _] => Err(CliError::Config("the two arms must use different modes".into())),
            m => Err(CliError::Config(format!("a paired run needs exactly two modes, got {}", m.len()))),
        }
    }

    fn experiment_config(&self, seed: u64) -> Result<ExperimentConfig, CliError> {
        let (baseline, treatment) = self.paired_modes()?;
        Ok(ExperimentConfig {
            baseline,
            treatment,
            backend: self.backend,
            seed,
            resamples: self.resamples,
            delays: self.delays,
            parallel_subtasks: true,
            host: self.host.clone(),
        })
    }
}

/// Creates `<out>/<command>-<UTC timestamp>[-n]`.
pub fn create_run_dir(out: &Path, command: &str) -> Result<PathBuf, CliError> {
    fs::create_dir_all(out).map_err(|e| io_err("cannot create", out, e))?;
    let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%SZ");
    for n in 0.. {
        let name = if n == 0 { format!("{command}-{stamp}") } else { format!("{command}-{stamp}-{n}") };
        let dir = out.join(name);
        match fs::create_dir(&dir) {
            Ok(()) => return Ok(dir),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(io_err("cannot create", &dir, e)),
        }
    }
    unreachable!()
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| io_err("cannot write", path, e))
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), CliError> {
    write_jsonl(path, rows).map_err(|e| io_err("cannot write", path, e))
}

fn write_run_log(path: &Path, run: &ExperimentRun) -> Result<(), CliError> {
    let mut f = fs::File::create(path).map_err(|e| io_err("cannot write", path, e))?;
    for arm in [&run.baseline, &run.treatment] {
        for r in &arm.results {
            let _ = writeln!(
                f,
                "{} {} decision={} truth={} correct={} e2e_us={} bytes={}",
                arm.mode.name(),
                r.task_id,
                r.decision.action,
                r.ground_truth,
                r.correct,
                r.e2e_latency_us,
                r.request_bytes
            );
        }
    }
    Ok(())
}

/// Logs for one arm, named by role so `report` can find them again.
fn write_arm(dir: &Path, role: &str, arm: &experiment::ArmRun) -> Result<(), CliError> {
    write_rows(&dir.join(format!("results-{role}.jsonl")), &arm.results)?;
    write_rows(&dir.join(format!("telemetry-{role}.jsonl")), &arm.telemetry)
}

fn write_report(dir: &Path, report: &ReportBundle) -> Result<(), CliError> {
    write(&dir.join("report.md"), &render_markdown(report))?;
    write(&dir.join("report.json"), &render_json(report))
}

fn echo_config(dir: &Path, cfg: &RunConfig, seed: Option<u64>) -> Result<(), CliError> {
    write(&dir.join("config.json"), &serde_json::to_string_pretty(cfg).expect("config serializes"))?;
    if let Some(seed) = seed {
        write(&dir.join("seed.txt"), &format!("{seed}\n"))?;
    }
    Ok(())
}

fn load(cfg: &RunConfig) -> Result<Benchmark, CliError> {
    Ok(load_manifest(&cfg.manifest)?)
}

pub struct ExperimentOutput {
    pub dir: PathBuf,
    pub run: ExperimentRun,
    pub report: ReportBundle,
}

pub async fn cmd_experiment(cfg: &RunConfig) -> Result<ExperimentOutput, CliError> {
    let seed = cfg.seed.ok_or_else(|| CliError::Config("experiment needs --seed (it drives the bootstrap)".into()))?;
    let ecfg = cfg.experiment_config(seed)?;
    let bench = load(cfg)?;
    let dir = create_run_dir(&cfg.out, "experiment")?;
    echo_config(&dir, cfg, Some(seed))?;
    let run = match experiment::run_experiment(&bench, &ecfg, &dir).await {
        Ok(r) => r,
        Err(e) => {
            let _ = write(&dir.join("error.txt"), &format!("{e}\n"));
            return Err(match CliError::from(e) {
                CliError::Runtime(m) => CliError::Runtime(format!("{m} (partial logs in {})", dir.display())),
                other => other,
            });
        }
    };
    write_arm(&dir, "baseline", &run.baseline)?;
    write_arm(&dir, "treatment", &run.treatment)?;
    write_run_log(&dir.join("run.log"), &run)?;
    let report = run.report(&bench.name, seed, cfg.resamples).map_err(|e| CliError::Runtime(e.to_string()))?;
    write_report(&dir, &report)?;
    Ok(ExperimentOutput { dir, run, report })
}

pub struct AblationOutput {
    pub dir: PathBuf,
    pub ablation: experiment::Ablation,
}

pub async fn cmd_ablation(cfg: &RunConfig) -> Result<AblationOutput, CliError> {
    let ecfg = cfg.experiment_config(cfg.seed.unwrap_or(0))?;
    let bench = load(cfg)?;
    let dir = create_run_dir(&cfg.out, "ablation")?;
    echo_config(&dir, cfg, cfg.seed)?;
    let ablation = experiment::run_ablation(&bench, &ecfg, &dir).await.map_err(|e| {
        let _ = write(&dir.join("error.txt"), &format!("{e}\n"));
        CliError::from(e)
    })?;
    for run in &ablation.runs {
        let sub = dir.join(run.backend.as_str());
        write_arm(&sub, "baseline", &run.baseline)?;
        write_arm(&sub, "treatment", &run.treatment)?;
        write_run_log(&sub.join("run.log"), run)?;
    }
    write(&dir.join("ablation.md"), &experiment::render_ablation(&ablation))?;
    write(&dir.join("ablation.json"), &serde_json::to_string_pretty(&ablation).expect("ablation serializes"))?;
    Ok(AblationOutput { dir, ablation })
}

pub struct ValidateOptions {
    pub reference_counts: bool,
}

/// Returns a one-line summary of the manifest when it is valid.
pub fn cmd_validate(manifest: &Path, opts: ValidateOptions) -> Result<String, CliError> {
    let b = load_manifest_with(manifest, ValidationOptions { reference_counts: opts.reference_counts, load_media: true })?;
    let media = b.tasks.iter().flat_map(|t| &t.parts).filter(|p| p.file.is_some()).count();
    Ok(format!("{}: {} tasks, {} media files, {} products, {} troubleshooting entries", b.name, b.tasks.len(), media, b.kb.products.len(), b.kb.troubleshooting.len()))
}

/// Writes placeholder media for every media part. Existing files are kept
/// unless `force` is set. Returns the number of files written.
pub fn cmd_generate_media(manifest: &Path, min_size: Option<usize>, force: bool) -> Result<usize, CliError> {
    let b = load_manifest_with(manifest, ValidationOptions { reference_counts: false, load_media: false })?;
    let mut written = 0;
    for t in &b.tasks {
        let files = generate_synthetic_media(t, min_size).map_err(|e| CliError::Runtime(format!("{}: {e}", t.task_id)))?;
        for (path, bytes) in files {
            if path.exists() && !force {
                continue;
            }
            if let Some(dir) = path.parent() {
                fs::create_dir_all(dir).map_err(|e| io_err("cannot create", dir, e))?;
            }
            fs::write(&path, bytes).map_err(|e| io_err("cannot write", &path, e))?;
            written += 1;
        }
    }
    Ok(written)
}

/// Recomputes the report from the result logs in `run_dir`. The seed comes
/// from `seed` or the directory's seed.txt.
pub fn cmd_report(run_dir: &Path, seed: Option<u64>, resamples: usize, out: Option<&Path>) -> Result<ReportBundle, CliError> {
    let read = |role: &str| -> Result<Vec<TaskResult>, CliError> {
        let path = run_dir.join(format!("results-{role}.jsonl"));
        crate::mar::read_jsonl(&path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))
    };
    let seed = match seed {
        Some(s) => s,
        None => {
            let path = run_dir.join("seed.txt");
            let raw = fs::read_to_string(&path).map_err(|e| CliError::Config(format!("no --seed and cannot read {}: {e}", path.display())))?;
            raw.trim().parse().map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
        }
    };
    let (baseline, treatment) = (read("baseline")?, read("treatment")?);
    let name = fs::read_to_string(run_dir.join("report.json"))
        .ok()
        .and_then(|s| serde_json::from_str::<serde_json::Value>(&s).ok())
        .and_then(|v| v.get("benchmark").and_then(|b| b.as_str()).map(String::from))
        .unwrap_or_else(|| "benchmark".into());
    let report = stats::build_report(ReportInput { benchmark: &name, baseline: &baseline, treatment: &treatment, seed, resamples })
        .map_err(|e| CliError::Config(e.to_string()))?;
    let dest = out.unwrap_or(run_dir);
    fs::create_dir_all(dest).map_err(|e| io_err("cannot create", dest, e))?;
    write_report(dest, &report)?;
    Ok(report)
}

struct OrchestratorState {
    bench: Benchmark,
    orchestrator: Orchestrator,
}

async fn run_task(State(s): State<Arc<OrchestratorState>>, UrlPath(id): UrlPath<String>) -> Response {
    let Some(task) = s.bench.task(&id) else {
        return (StatusCode::NOT_FOUND, format!("no task {id}")).into_response();
    };
    match s.orchestrator.execute(task).await {
        Ok(r) => Json(r).into_response(),
        Err(e) => (StatusCode::BAD_GATEWAY, e.to_string()).into_response(),
    }
}

async fn list_tasks(State(s): State<Arc<OrchestratorState>>) -> Json<Vec<String>> {
    Json(s.bench.tasks.iter().map(|t| t.task_id.clone()).collect())
}

pub struct ServeHandle {
    pub agents: mesh::AgentMesh,
    pub router: mesh::RouterInstance,
    pub orchestrator_url: String,
    orchestrator: net::ServerHandle,
}

impl ServeHandle {
    pub fn banner(&self) -> String {
        let u = &self.agents.urls;
        let mut s = String::new();
        for (name, url) in [("voice", &u.voice), ("vision", &u.vision), ("text", &u.text)] {
            s.push_str(&format!("{name:<12} {url}/.well-known/agent-card.json\n"));
        }
        s.push_str(&format!("{:<12} {}/proxy ({})\n", "router", self.router.url, self.router.router.mode().name()));
        s.push_str(&format!("{:<12} {}/tasks/{{task_id}}\n", "orchestrator", self.orchestrator_url));
        s
    }

    /// Stops accepting work and lets in-flight requests finish.
    pub async fn shutdown(self) {
        self.orchestrator.shutdown().await;
        self.router.shutdown().await;
        self.agents.shutdown().await;
    }
}

/// Starts three agents, a router in the first configured mode and an
/// orchestrator endpoint that runs benchmark tasks by id.
pub async fn cmd_serve(cfg: &RunConfig) -> Result<ServeHandle, CliError> {
    let mode = *cfg.modes.first().ok_or_else(|| CliError::Config("serve needs a mode".into()))?;
    let bench = load(cfg)?;
    let scripted = Arc::new(ScriptedBackend::new(Arc::new(bench.script_store())));
    let backends = Backends { analysis: scripted.clone(), decision: decision_backend(&bench, cfg.backend, scripted)? };
    let [voice, vision, text, router_port, orch_port] = cfg.ports;
    let agents = mesh::start_agents(&cfg.host, [voice, vision, text], &backends).await?;
    let registry = Arc::new(CardRegistry::http(net::http_client(), RegistryConfig::default()));
    let blob_dir = cfg.out.join("serve-blobs");
    let router = mesh::start_router(&format!("{}:{router_port}", cfg.host), mode, registry, &blob_dir).await?;
    let orchestrator = Orchestrator::new(
        &router.url,
        mode,
        agents.urls.clone(),
        router.blobs(),
        router.telemetry(),
        Arc::new(bench.kb.clone()),
        OrchestratorConfig { parallel_subtasks: true, delays: cfg.delays },
    );
    let state = Arc::new(OrchestratorState { bench, orchestrator });
    let app = axum::Router::new().route("/tasks", get(list_tasks)).route("/tasks/{id}", post(run_task)).with_state(state);
    let listener = net::bind(&format!("{}:{orch_port}", cfg.host)).await.map_err(MeshError::from)?;
    let orchestrator_url = format!("http://{}", listener.local_addr().map_err(MeshError::from)?);
    let orchestrator = net::spawn(listener, app).map_err(MeshError::from)?;
    Ok(ServeHandle { agents, router, orchestrator_url, orchestrator })
}
