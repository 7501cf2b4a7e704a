//! Builds the comparison report from two arms' run logs and renders it as
//! markdown and JSON.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{
    bootstrap_ci, correct_count, latency_stats, mcnemar_exact, paired_t, tca, Arm, BootstrapCi, ContingencyTable, LatencyStats,
    McNemar, PairedOutcome, PairedT, StatsError,
};
use crate::benchmark::Category;
use crate::mar::{routing_profile, RoutingProfile};
use crate::orchestrator::TaskResult;

/// Category order for the accuracy table.
pub const ACCURACY_ORDER: [Category; 4] =
    [Category::ProductDefect, Category::VisualTroubleshooting, Category::AssemblyGuidance, Category::WarrantyClaim];

/// Category order for the latency table.
pub const LATENCY_ORDER: [Category; 4] =
    [Category::AssemblyGuidance, Category::ProductDefect, Category::VisualTroubleshooting, Category::WarrantyClaim];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmSummary {
    pub label: String,
    pub correct: usize,
    pub tca: f64,
    pub latency: LatencyStats,
    pub routing: RoutingProfile,
    /// Mean request payload per task, in KB (1000 bytes).
    pub kb_per_task: f64,
    /// Share of all routed parts delivered natively.
    pub native_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryRow {
    pub category: Category,
    pub n: usize,
    pub baseline_correct: usize,
    pub treatment_correct: usize,
    pub baseline_pct: f64,
    pub treatment_pct: f64,
    pub delta_pp: f64,
    pub baseline_latency: LatencyStats,
    pub treatment_latency: LatencyStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportBundle {
    pub benchmark: String,
    pub n: usize,
    pub seed: u64,
    pub baseline: ArmSummary,
    pub treatment: ArmSummary,
    pub delta_tca: f64,
    pub delta_pp: f64,
    pub categories: Vec<CategoryRow>,
    pub contingency: ContingencyTable,
    pub mcnemar: McNemar,
    pub bootstrap: BootstrapCi,
    /// None when the latency differences cannot support a t-test.
    pub paired_t: Option<PairedT>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub paired_t_note: Option<String>,
    /// Operator-supplied error modes of the treatment arm's wrong answers.
    pub error_taxonomy: BTreeMap<String, usize>,
    pub unlabelled_errors: usize,
}

pub struct ReportInput<'a> {
    pub benchmark: &'a str,
    pub baseline: &'a [TaskResult],
    pub treatment: &'a [TaskResult],
    pub seed: u64,
    pub resamples: usize,
}

/// Pairs the two arms by task id. Both logs must cover the same tasks.
pub fn pair_outcomes(baseline: &[TaskResult], treatment: &[TaskResult]) -> Result<Vec<PairedOutcome>, StatsError> {
    let by_id: BTreeMap<&str, &TaskResult> = treatment.iter().map(|r| (r.task_id.as_str(), r)).collect();
    if by_id.len() != treatment.len() {
        return Err(StatsError::Unpaired("duplicate task ids in treatment log".into()));
    }
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(baseline.len());
    for b in baseline {
        if !seen.insert(b.task_id.as_str()) {
            return Err(StatsError::Unpaired(format!("duplicate task id {} in baseline log", b.task_id)));
        }
        let t = by_id.get(b.task_id.as_str()).ok_or_else(|| StatsError::Unpaired(format!("{} missing from treatment log", b.task_id)))?;
        out.push(PairedOutcome {
            task_id: b.task_id.clone(),
            category: b.category,
            baseline_correct: b.correct,
            treatment_correct: t.correct,
            baseline_latency_us: b.e2e_latency_us,
            treatment_latency_us: t.e2e_latency_us,
        });
    }
    if out.len() != treatment.len() {
        return Err(StatsError::Unpaired(format!("{} baseline vs {} treatment tasks", out.len(), treatment.len())));
    }
    Ok(out)
}

fn pct(k: usize, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        100.0 * k as f64 / n as f64
    }
}

fn arm_summary(results: &[TaskResult], outcomes: &[PairedOutcome], arm: Arm) -> Result<ArmSummary, StatsError> {
    let decisions: Vec<_> = results.iter().flat_map(|r| r.routing_decisions.iter().cloned()).collect();
    let routing = routing_profile(&decisions);
    let lat: Vec<u64> = results.iter().map(|r| r.e2e_latency_us).collect();
    let bytes: u64 = results.iter().map(|r| r.request_bytes).sum();
    Ok(ArmSummary {
        label: results.first().map(|r| r.arm.arm_label()).unwrap_or_default(),
        correct: correct_count(outcomes, arm),
        tca: tca(outcomes, arm)?,
        latency: latency_stats(&lat),
        routing,
        kb_per_task: bytes as f64 / 1000.0 / results.len().max(1) as f64,
        native_pct: routing.total.native_pct(),
    })
}

pub fn build_report(input: ReportInput<'_>) -> Result<ReportBundle, StatsError> {
    let outcomes = pair_outcomes(input.baseline, input.treatment)?;
    let baseline = arm_summary(input.baseline, &outcomes, Arm::Baseline)?;
    let treatment = arm_summary(input.treatment, &outcomes, Arm::Treatment)?;
    let contingency = ContingencyTable::from_outcomes(&outcomes);
    debug_assert_eq!((contingency.a + contingency.b) as usize, treatment.correct);
    debug_assert_eq!((contingency.a + contingency.c) as usize, baseline.correct);

    let mut categories = Vec::new();
    for cat in ACCURACY_ORDER {
        let rows: Vec<&PairedOutcome> = outcomes.iter().filter(|o| o.category == cat).collect();
        if rows.is_empty() {
            continue;
        }
        let n = rows.len();
        let bc = rows.iter().filter(|o| o.baseline_correct).count();
        let tc = rows.iter().filter(|o| o.treatment_correct).count();
        let bl: Vec<u64> = rows.iter().map(|o| o.baseline_latency_us).collect();
        let tl: Vec<u64> = rows.iter().map(|o| o.treatment_latency_us).collect();
        categories.push(CategoryRow {
            category: cat,
            n,
            baseline_correct: bc,
            treatment_correct: tc,
            baseline_pct: pct(bc, n),
            treatment_pct: pct(tc, n),
            delta_pp: pct(tc, n) - pct(bc, n),
            baseline_latency: latency_stats(&bl),
            treatment_latency: latency_stats(&tl),
        });
    }

    let bl: Vec<f64> = outcomes.iter().map(|o| o.baseline_latency_us as f64 / 1000.0).collect();
    let tl: Vec<f64> = outcomes.iter().map(|o| o.treatment_latency_us as f64 / 1000.0).collect();
    let (paired_t, paired_t_note) = match paired_t(&bl, &tl) {
        Ok(t) => (Some(t), None),
        Err(e) => (None, Some(e.to_string())),
    };

    let mut error_taxonomy = BTreeMap::new();
    let mut unlabelled_errors = 0;
    for r in input.treatment.iter().filter(|r| !r.correct) {
        match &r.error_mode {
            Some(m) => *error_taxonomy.entry(m.clone()).or_insert(0) += 1,
            None => unlabelled_errors += 1,
        }
    }

    let delta_tca = treatment.tca - baseline.tca;
    Ok(ReportBundle {
        benchmark: input.benchmark.to_string(),
        n: outcomes.len(),
        seed: input.seed,
        delta_pp: 100.0 * delta_tca,
        delta_tca,
        categories,
        mcnemar: mcnemar_exact(contingency.b, contingency.c),
        bootstrap: bootstrap_ci(&outcomes, input.resamples, input.seed, 0.95)?,
        contingency,
        paired_t,
        paired_t_note,
        error_taxonomy,
        unlabelled_errors,
        baseline,
        treatment,
    })
}

fn signed(x: f64) -> String {
    if x > 0.0 {
        format!("+{x:.1}")
    } else {
        format!("{x:.1}")
    }
}

fn p_value(p: f64) -> String {
    if p < 0.001 {
        "p < 0.001".into()
    } else {
        format!("p = {p:.3}")
    }
}

fn routing_cell(native: u64, total: u64) -> String {
    let pct = if total == 0 { 0.0 } else { 100.0 * native as f64 / total as f64 };
    format!("{native} ({pct:.0}%)")
}

pub fn render_markdown(r: &ReportBundle) -> String {
    let (b, t) = (&r.baseline, &r.treatment);
    let mut s = String::new();
    let _ = writeln!(s, "# {}: {} vs {}\n", r.benchmark, t.label, b.label);
    let _ = writeln!(s, "{} paired tasks, bootstrap seed {}.\n", r.n, r.seed);

    let _ = writeln!(s, "## Overall\n");
    let _ = writeln!(s, "| Metric | {} | {} | Δ |", b.label, t.label);
    let _ = writeln!(s, "|---|---|---|---|");
    let _ = writeln!(s, "| Task completion accuracy (%) | {:.1} | {:.1} | {} pp |", 100.0 * b.tca, 100.0 * t.tca, signed(r.delta_pp));
    let _ = writeln!(s, "| Correct tasks | {} | {} | |", b.correct, t.correct);
    let _ = writeln!(
        s,
        "| E2E latency (ms, mean ± sd) | {:.2} ± {:.2} | {:.2} ± {:.2} | {} ms |",
        b.latency.mean_ms,
        b.latency.stddev_ms,
        t.latency.mean_ms,
        t.latency.stddev_ms,
        signed(t.latency.mean_ms - b.latency.mean_ms)
    );
    let _ = writeln!(s, "| Request payload (KB/task) | {:.1} | {:.1} | |", b.kb_per_task, t.kb_per_task);
    let _ = writeln!(s, "| Parts routed natively (%) | {:.1} | {:.1} | |\n", b.native_pct, t.native_pct);

    let _ = writeln!(s, "## Accuracy by category\n");
    let _ = writeln!(s, "| Category | n | {} | {} | Δ (pp) |", b.label, t.label);
    let _ = writeln!(s, "|---|---|---|---|---|");
    for c in &r.categories {
        let _ = writeln!(
            s,
            "| {} | {} | {:.1} ({}) | {:.1} ({}) | {} |",
            c.category.title(),
            c.n,
            c.baseline_pct,
            c.baseline_correct,
            c.treatment_pct,
            c.treatment_correct,
            signed(c.delta_pp)
        );
    }

    let _ = writeln!(s, "\n## Routing outcomes\n");
    let _ = writeln!(s, "| Arm | Modality | Native | Transcoded |");
    let _ = writeln!(s, "|---|---|---|---|");
    for arm in [t, b] {
        let rows = [("Voice", arm.routing.voice), ("Image", arm.routing.image), ("Text", arm.routing.text), ("Total", arm.routing.total)];
        for (name, c) in rows {
            let _ = writeln!(
                s,
                "| {} | {} | {} | {} |",
                arm.label,
                name,
                routing_cell(c.native, c.total()),
                routing_cell(c.transcoded, c.total())
            );
        }
    }

    let _ = writeln!(s, "\n## Latency by category (ms)\n");
    let _ = writeln!(s, "| Category | {b} mean | {b} median | {t} mean | {t} median | Gap |", b = b.label, t = t.label);
    let _ = writeln!(s, "|---|---|---|---|---|---|");
    for cat in LATENCY_ORDER {
        if let Some(c) = r.categories.iter().find(|c| c.category == cat) {
            let _ = writeln!(
                s,
                "| {} | {:.2} | {:.2} | {:.2} | {:.2} | {} |",
                cat.title(),
                c.baseline_latency.mean_ms,
                c.baseline_latency.median_ms,
                c.treatment_latency.mean_ms,
                c.treatment_latency.median_ms,
                signed(c.treatment_latency.mean_ms - c.baseline_latency.mean_ms)
            );
        }
    }

    let _ = writeln!(s, "\n## Significance\n");
    let ct = &r.contingency;
    let _ = writeln!(s, "Contingency (both / {t} only / {b} only / neither): {} / {} / {} / {}.\n", ct.a, ct.b, ct.c, ct.d, t = t.label, b = b.label);
    let flag = if r.mcnemar.no_discordant_pairs { " (no discordant pairs)" } else { "" };
    let _ = writeln!(s, "- McNemar exact test: b = {}, c = {}, {}{flag}", r.mcnemar.b, r.mcnemar.c, p_value(r.mcnemar.p_value));
    let _ = writeln!(
        s,
        "- Paired bootstrap ({} resamples, {:.0}% CI): [{:.1}, {:.1}] pp",
        r.bootstrap.resamples,
        100.0 * r.bootstrap.level,
        r.bootstrap.lo_pp,
        r.bootstrap.hi_pp
    );
    match (&r.paired_t, &r.paired_t_note) {
        (Some(pt), _) => {
            let _ = writeln!(s, "- Paired t-test on latency ({} minus {}): t = {:.2}, df = {}, {}", b.label, t.label, pt.t, pt.df, p_value(pt.p_value));
        }
        (None, note) => {
            let _ = writeln!(s, "- Paired t-test on latency: not computed ({})", note.as_deref().unwrap_or("unavailable"));
        }
    }

    if !r.error_taxonomy.is_empty() || r.unlabelled_errors > 0 {
        let _ = writeln!(s, "\n## {} errors by mode\n", t.label);
        let _ = writeln!(s, "| Error mode | Count |");
        let _ = writeln!(s, "|---|---|");
        let mut rows: Vec<_> = r.error_taxonomy.iter().collect();
        rows.sort_by(|x, y| y.1.cmp(x.1).then(x.0.cmp(y.0)));
        for (mode, n) in rows {
            let _ = writeln!(s, "| {mode} | {n} |");
        }
        if r.unlabelled_errors > 0 {
            let _ = writeln!(s, "| (unlabelled) | {} |", r.unlabelled_errors);
        }
    }
    s
}

pub fn render_json(r: &ReportBundle) -> String {
    serde_json::to_string_pretty(r).expect("report serializes")
}
