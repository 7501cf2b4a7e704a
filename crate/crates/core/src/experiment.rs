//! Paired experiment and decision-backend ablation over a loaded benchmark.
//! Each run brings up its own agents and one router per arm on loopback.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::agents::{KeywordBackend, KeywordRules, LlmBackend, ReasoningBackend, RulesError, ScriptedBackend};
use crate::benchmark::Benchmark;
use crate::mar::{RoutingDecision, RoutingMode};
use crate::mesh::{self, Backends, MeshError};
use crate::net;
use crate::orchestrator::{run_paired_experiment, DelayProfile, Orchestrator, OrchestratorConfig, OrchestratorError, TaskResult};
use crate::registry::{CardRegistry, RegistryConfig};
use crate::stats::{self, ReportBundle, ReportInput, StatsError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendChoice {
    Keyword,
    Scripted,
    Llm,
}

impl BackendChoice {
    pub fn as_str(self) -> &'static str {
        match self {
            BackendChoice::Keyword => "keyword",
            BackendChoice::Scripted => "scripted",
            BackendChoice::Llm => "llm",
        }
    }
}

impl fmt::Display for BackendChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BackendChoice {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "keyword" => Ok(BackendChoice::Keyword),
            "scripted" => Ok(BackendChoice::Scripted),
            "llm" => Ok(BackendChoice::Llm),
            _ => Err(format!("unknown backend {s:?} (expected keyword, scripted or llm)")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub baseline: RoutingMode,
    pub treatment: RoutingMode,
    pub backend: BackendChoice,
    pub seed: u64,
    pub resamples: usize,
    pub delays: Option<DelayProfile>,
    pub parallel_subtasks: bool,
    pub host: String,
}

impl ExperimentConfig {
    pub fn new(backend: BackendChoice, seed: u64) -> Self {
        Self {
            baseline: RoutingMode::TextBottleneck,
            treatment: RoutingMode::Native,
            backend,
            seed,
            resamples: stats::DEFAULT_RESAMPLES,
            delays: None,
            parallel_subtasks: true,
            host: "127.0.0.1".into(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Rules(#[from] RulesError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Run(#[from] OrchestratorError),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

impl ExperimentError {
    /// Configuration problems as opposed to failures while running.
    pub fn is_config(&self) -> bool {
        matches!(self, ExperimentError::Config(_) | ExperimentError::Rules(_))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArmRun {
    pub mode: RoutingMode,
    pub results: Vec<TaskResult>,
    /// Everything the arm's router logged, in order.
    pub telemetry: Vec<RoutingDecision>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentRun {
    pub backend: BackendChoice,
    pub baseline: ArmRun,
    pub treatment: ArmRun,
}

impl ExperimentRun {
    pub fn report(&self, benchmark: &str, seed: u64, resamples: usize) -> Result<ReportBundle, StatsError> {
        stats::build_report(ReportInput {
            benchmark,
            baseline: &self.baseline.results,
            treatment: &self.treatment.results,
            seed,
            resamples,
        })
    }
}

pub fn keyword_rules(bench: &Benchmark) -> Result<KeywordRules, ExperimentError> {
    let path = bench
        .keyword_rules
        .as_ref()
        .ok_or_else(|| ExperimentError::Config("the manifest names no keyword_rules table".into()))?;
    Ok(KeywordRules::load(path)?)
}

pub fn decision_backend(bench: &Benchmark, choice: BackendChoice, scripted: Arc<ScriptedBackend>) -> Result<Arc<dyn ReasoningBackend>, ExperimentError> {
    Ok(match choice {
        BackendChoice::Scripted => scripted,
        BackendChoice::Keyword => Arc::new(KeywordBackend::new(keyword_rules(bench)?)),
        BackendChoice::Llm => Arc::new(LlmBackend::from_env().map_err(|e| ExperimentError::Config(e.to_string()))?),
    })
}

/// Runs every task through both arms. Blobs land under `work_dir`.
pub async fn run_experiment(bench: &Benchmark, cfg: &ExperimentConfig, work_dir: &Path) -> Result<ExperimentRun, ExperimentError> {
    if cfg.baseline == cfg.treatment {
        return Err(ExperimentError::Config(format!("both arms use {}", cfg.baseline.name())));
    }
    let scripted = Arc::new(ScriptedBackend::new(Arc::new(bench.script_store())));
    let backends = Backends { analysis: scripted.clone(), decision: decision_backend(bench, cfg.backend, scripted)? };
    let agents = mesh::start_agents(&cfg.host, [0, 0, 0], &backends).await?;
    let registry = Arc::new(CardRegistry::http(net::http_client(), RegistryConfig::default()));
    let addr = format!("{}:0", cfg.host);
    let b_router = mesh::start_router(&addr, cfg.baseline, registry.clone(), &work_dir.join("blobs").join(cfg.baseline.name())).await?;
    let t_router = mesh::start_router(&addr, cfg.treatment, registry, &work_dir.join("blobs").join(cfg.treatment.name())).await?;

    let kb = Arc::new(bench.kb.clone());
    let oc = OrchestratorConfig { parallel_subtasks: cfg.parallel_subtasks, delays: cfg.delays };
    let orch = |r: &mesh::RouterInstance, mode| {
        Orchestrator::new(&r.url, mode, agents.urls.clone(), r.blobs(), r.telemetry(), kb.clone(), oc.clone())
    };
    let b_orch = orch(&b_router, cfg.baseline);
    let t_orch = orch(&t_router, cfg.treatment);
    let run = run_paired_experiment((&b_orch, &bench.tasks), (&t_orch, &bench.tasks)).await;

    let b_tel = b_router.telemetry().snapshot();
    let t_tel = t_router.telemetry().snapshot();
    b_router.shutdown().await;
    t_router.shutdown().await;
    agents.shutdown().await;
    let run = run?;
    Ok(ExperimentRun {
        backend: cfg.backend,
        baseline: ArmRun { mode: cfg.baseline, results: run.baseline, telemetry: b_tel },
        treatment: ArmRun { mode: cfg.treatment, results: run.treatment, telemetry: t_tel },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeywordPair {
    pub task_id: String,
    pub baseline_keywords: BTreeSet<String>,
    pub treatment_keywords: BTreeSet<String>,
    pub same_keywords: bool,
    pub same_decision: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeywordInvariance {
    pub pairs: Vec<KeywordPair>,
    pub same_keyword_sets: usize,
    pub identical_decisions: usize,
    /// Tasks with equal keyword sets but different decisions. Must be empty.
    pub violations: Vec<String>,
}

impl KeywordInvariance {
    pub fn identity_rate(&self) -> f64 {
        if self.pairs.is_empty() {
            0.0
        } else {
            self.identical_decisions as f64 / self.pairs.len() as f64
        }
    }
}

/// Compares the keyword sets each arm's evidence produced with the decisions
/// the keyword backend reached.
pub fn keyword_invariance(rules: &KeywordRules, run: &ExperimentRun) -> KeywordInvariance {
    let by_id: BTreeMap<&str, &TaskResult> = run.treatment.results.iter().map(|r| (r.task_id.as_str(), r)).collect();
    let keywords = |r: &TaskResult| rules.extract_all(r.evidence.iter().map(|e| e.summary.as_str()));
    let mut pairs = Vec::new();
    for b in &run.baseline.results {
        let Some(t) = by_id.get(b.task_id.as_str()) else { continue };
        let (bk, tk) = (keywords(b), keywords(t));
        pairs.push(KeywordPair {
            task_id: b.task_id.clone(),
            same_keywords: bk == tk,
            same_decision: b.decision.action == t.decision.action,
            baseline_keywords: bk,
            treatment_keywords: tk,
        });
    }
    KeywordInvariance {
        same_keyword_sets: pairs.iter().filter(|p| p.same_keywords).count(),
        identical_decisions: pairs.iter().filter(|p| p.same_decision).count(),
        violations: pairs.iter().filter(|p| p.same_keywords && !p.same_decision).map(|p| p.task_id.clone()).collect(),
        pairs,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub backend: BackendChoice,
    pub baseline_pct: f64,
    pub treatment_pct: f64,
    pub delta_pp: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Ablation {
    pub baseline: RoutingMode,
    pub treatment: RoutingMode,
    pub rows: Vec<AblationRow>,
    pub keyword: KeywordInvariance,
    #[serde(skip)]
    pub runs: Vec<ExperimentRun>,
}

/// The 2x2 grid: keyword and scripted decision steps, each under both arms.
pub async fn run_ablation(bench: &Benchmark, cfg: &ExperimentConfig, work_dir: &Path) -> Result<Ablation, ExperimentError> {
    let rules = keyword_rules(bench)?;
    let mut rows = Vec::new();
    let mut runs = Vec::new();
    let mut keyword = None;
    for backend in [BackendChoice::Keyword, BackendChoice::Scripted] {
        let cfg = ExperimentConfig { backend, ..cfg.clone() };
        let run = run_experiment(bench, &cfg, &work_dir.join(backend.as_str())).await?;
        let outcomes = stats::pair_outcomes(&run.baseline.results, &run.treatment.results)?;
        let b = stats::tca(&outcomes, stats::Arm::Baseline)?;
        let t = stats::tca(&outcomes, stats::Arm::Treatment)?;
        rows.push(AblationRow { backend, baseline_pct: 100.0 * b, treatment_pct: 100.0 * t, delta_pp: 100.0 * (t - b) });
        if backend == BackendChoice::Keyword {
            keyword = Some(keyword_invariance(&rules, &run));
        }
        runs.push(run);
    }
    Ok(Ablation { baseline: cfg.baseline, treatment: cfg.treatment, rows, keyword: keyword.expect("keyword row ran"), runs })
}

pub fn render_ablation(a: &Ablation) -> String {
    let mut s = format!(
        "# Decision-step ablation\n\n| Decision step | {} | {} | Δ (pp) |\n|---|---|---|---|\n",
        a.baseline.arm_label(),
        a.treatment.arm_label()
    );
    for r in &a.rows {
        let delta = if r.delta_pp > 0.0 { format!("+{:.1}", r.delta_pp) } else { format!("{:.1}", r.delta_pp) };
        s.push_str(&format!("| {} | {:.1} | {:.1} | {} |\n", r.backend, r.baseline_pct, r.treatment_pct, delta));
    }
    let k = &a.keyword;
    s.push_str(&format!(
        "\nKeyword step: {} of {} tasks produced the same keyword set in both arms; {} of {} ({:.0}%) got the same decision.\n",
        k.same_keyword_sets,
        k.pairs.len(),
        k.identical_decisions,
        k.pairs.len(),
        100.0 * k.identity_rate()
    ));
    if k.violations.is_empty() {
        s.push_str("Every task with equal keyword sets got the same decision.\n");
    } else {
        s.push_str(&format!("Equal keyword sets but different decisions: {}\n", k.violations.join(", ")));
    }
    s
}
