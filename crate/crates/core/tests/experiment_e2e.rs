mod common;

use std::collections::BTreeMap;

use mma2a::benchmark::Category;
use mma2a::cli;
use mma2a::experiment::BackendChoice;
use mma2a::stats::{render_markdown, ReportBundle};

#[tokio::test(flavor = "multi_thread")]
async fn scripted_experiment_reproduces_the_reference_run() {
    let out = tempfile::tempdir().unwrap();
    let cfg = common::run_config(out.path(), "off", 7);
    assert_eq!(cfg.backend, BackendChoice::Scripted);
    let res = cli::cmd_experiment(&cfg).await.unwrap();
    let r = &res.report;

    assert_eq!(r.n, 50);
    assert_eq!((r.baseline.correct, r.treatment.correct), (16, 26));
    assert_eq!((r.baseline.tca, r.treatment.tca), (0.32, 0.52));
    assert!((r.delta_pp - 20.0).abs() < 1e-9);

    let per_cat: BTreeMap<Category, (usize, usize, usize)> =
        r.categories.iter().map(|c| (c.category, (c.n, c.baseline_correct, c.treatment_correct))).collect();
    assert_eq!(per_cat[&Category::ProductDefect], (13, 1, 6));
    assert_eq!(per_cat[&Category::VisualTroubleshooting], (12, 9, 11));
    assert_eq!(per_cat[&Category::AssemblyGuidance], (12, 5, 7));
    assert_eq!(per_cat[&Category::WarrantyClaim], (13, 1, 2));

    let c = r.contingency;
    assert_eq!((c.a, c.b, c.c, c.d), (15, 11, 1, 23));
    assert_eq!(r.mcnemar.exact, Some((13, 2048)));
    assert_eq!((r.bootstrap.lo_pp, r.bootstrap.hi_pp), (8.0, 32.0));

    let t = &r.treatment.routing;
    assert_eq!((t.voice.native, t.voice.transcoded), (40, 0));
    assert_eq!((t.image.native, t.image.transcoded), (28, 12));
    assert_eq!((t.total.native, t.total.transcoded), (178, 40));
    let b = &r.baseline.routing;
    assert_eq!((b.voice.native, b.image.native), (0, 0));
    assert_eq!((b.voice.transcoded, b.image.transcoded), (40, 40));

    let taxonomy: Vec<(&str, usize)> = r.error_taxonomy.iter().map(|(k, v)| (k.as_str(), *v)).collect();
    assert_eq!(r.error_taxonomy.values().sum::<usize>() + r.unlabelled_errors, 24);
    assert!(taxonomy.contains(&("policy_lookup_failure", 11)), "{taxonomy:?}");

    // Every artifact is written and the stored report can be rebuilt from the logs.
    for f in [
        "config.json", "seed.txt", "results-baseline.jsonl", "results-treatment.jsonl", "telemetry-baseline.jsonl",
        "telemetry-treatment.jsonl", "report.md", "report.json",
    ] {
        assert!(res.dir.join(f).is_file(), "missing {f}");
    }
    let stored: ReportBundle = serde_json::from_str(&std::fs::read_to_string(res.dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(&stored, r);
    let rebuilt_dir = tempfile::tempdir().unwrap();
    let rebuilt = cli::cmd_report(&res.dir, None, cfg.resamples, Some(rebuilt_dir.path())).unwrap();
    assert_eq!(&rebuilt, r);
    assert_eq!(std::fs::read_to_string(res.dir.join("report.md")).unwrap(), render_markdown(r));

    let md = render_markdown(r);
    for needle in ["32.0", "52.0", "+20.0", "p = 0.006", "[8.0, 32.0]"] {
        assert!(md.contains(needle), "markdown lacks {needle:?}\n{md}");
    }
}

#[tokio::test(flavor = "multi_thread")]
async fn reruns_are_deterministic() {
    let out = tempfile::tempdir().unwrap();
    let cfg = common::run_config(out.path(), "off", 1234);
    let a = cli::cmd_experiment(&cfg).await.unwrap();
    let b = cli::cmd_experiment(&cfg).await.unwrap();
    assert_ne!(a.dir, b.dir);
    let outcomes = |o: &cli::ExperimentOutput| {
        o.run
            .baseline
            .results
            .iter()
            .chain(&o.run.treatment.results)
            .map(|r| (r.task_id.clone(), r.decision.action, r.correct, r.input_checksum.clone(), r.request_bytes))
            .collect::<Vec<_>>()
    };
    assert_eq!(outcomes(&a), outcomes(&b));
    assert_eq!(a.report.bootstrap, b.report.bootstrap);
    assert_eq!(a.report.treatment.routing, b.report.treatment.routing);
    // Both arms saw byte-identical inputs.
    for (x, y) in a.run.baseline.results.iter().zip(&a.run.treatment.results) {
        assert_eq!(x.task_id, y.task_id);
        assert_eq!(x.input_checksum, y.input_checksum);
    }
}

#[tokio::test(flavor = "multi_thread")]
async fn ablation_grid_and_keyword_invariance() {
    let out = tempfile::tempdir().unwrap();
    let cfg = common::run_config(out.path(), "off", 7);
    let res = cli::cmd_ablation(&cfg).await.unwrap();
    let a = &res.ablation;
    let rows: Vec<(BackendChoice, f64, f64)> = a.rows.iter().map(|r| (r.backend, r.baseline_pct, r.treatment_pct)).collect();
    assert_eq!(rows, vec![(BackendChoice::Keyword, 36.0, 36.0), (BackendChoice::Scripted, 32.0, 52.0)]);
    assert!(a.keyword.violations.is_empty(), "{:?}", a.keyword.violations);
    assert!(a.keyword.identity_rate() >= 0.70);
    for p in &a.keyword.pairs {
        if p.same_keywords {
            assert!(p.same_decision, "{}", p.task_id);
        }
    }
    assert!(res.dir.join("ablation.md").is_file() && res.dir.join("ablation.json").is_file());
}

#[tokio::test(flavor = "multi_thread")]
async fn reference_delays_keep_the_latency_shape() {
    let out = tempfile::tempdir().unwrap();
    let res = cli::cmd_experiment(&common::run_config(out.path(), "reference", 7)).await.unwrap();
    let r = &res.report;
    let ratio = r.treatment.latency.mean_ms / r.baseline.latency.mean_ms;
    assert!((1.5..=2.1).contains(&ratio), "ratio {ratio}");
    let gap = |c: &mma2a::stats::report::CategoryRow| c.treatment_latency.mean_ms - c.baseline_latency.mean_ms;
    let widest = r.categories.iter().max_by(|x, y| gap(x).total_cmp(&gap(y))).unwrap();
    assert_eq!(widest.category, Category::ProductDefect);
}
