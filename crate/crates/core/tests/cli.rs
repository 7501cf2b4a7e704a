mod common;

use std::path::PathBuf;
use std::process::Command;

use mma2a::cli::{CliError, FileConfig, Ports, RunConfig};
use mma2a::experiment::BackendChoice;
use mma2a::mar::{RoutingMode, Theta};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mma2a"))
}

#[test]
fn validate_shipped_manifest_succeeds() {
    let out = bin().args(["validate-manifest", "--manifest"]).arg(common::manifest_path()).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("50 tasks"), "{stdout}");
}

#[test]
fn broken_inputs_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let broken = dir.path().join("manifest.toml");
    std::fs::write(&broken, "name = \"x\"\n[[task]]\nid = 3\n").unwrap();
    let missing = dir.path().join("nope.toml");
    let bad_config = dir.path().join("cfg.toml");
    std::fs::write(&bad_config, "seed = 1\ncolour = \"blue\"\n").unwrap();

    let cases: Vec<Vec<std::ffi::OsString>> = vec![
        vec!["validate-manifest".into(), "--manifest".into(), broken.into_os_string()],
        vec!["validate-manifest".into(), "--manifest".into(), missing.into_os_string()],
        vec!["experiment".into(), "--manifest".into(), common::manifest_path().into_os_string()],
        vec!["experiment".into(), "--seed".into(), "1".into(), "--mode".into(), "sideways".into()],
        vec!["experiment".into(), "--seed".into(), "1".into(), "--backend".into(), "oracle".into()],
        vec!["experiment".into(), "--config".into(), bad_config.into_os_string()],
        vec!["experiment".into(), "--seed".into(), "1".into(), "--delay-profile".into(), "slow".into()],
    ];
    for args in cases {
        let out = bin().args(&args).current_dir(dir.path()).output().unwrap();
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn experiment_binary_writes_a_run_directory() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["experiment", "--seed", "7", "--manifest"])
        .arg(common::manifest_path())
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("52.0") && stdout.contains("32.0"), "{stdout}");
    let runs: Vec<PathBuf> = std::fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(runs.len(), 1);
    assert!(runs[0].file_name().unwrap().to_string_lossy().starts_with("experiment-"));
    assert_eq!(std::fs::read_to_string(runs[0].join("seed.txt")).unwrap().trim(), "7");
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.toml");
    std::fs::write(
        &path,
        "modes = [\"native\", \"adaptive\"]\ntheta = \"3\"\nbackend = \"keyword\"\nseed = 5\n[ports]\nvoice = 9001\nrouter = 9002\n",
    )
    .unwrap();
    let file = FileConfig::load(&path).unwrap();
    let flags = FileConfig { seed: Some(9), ports: Ports { router: Some(9100), ..Ports::default() }, ..FileConfig::default() };
    let cfg = RunConfig::resolve(file.merge(flags), &["text_bottleneck", "native"]).unwrap();
    assert_eq!(cfg.modes, vec![RoutingMode::Native, RoutingMode::Adaptive(Theta(3))]);
    assert_eq!(cfg.backend, BackendChoice::Keyword);
    assert_eq!(cfg.seed, Some(9));
    assert_eq!(cfg.ports, [9001, 8102, 8103, 9100, 8300]);
}

#[test]
fn defaults_and_config_errors() {
    let cfg = RunConfig::resolve(FileConfig::default(), &["text_bottleneck", "native"]).unwrap();
    assert_eq!(cfg.modes, vec![RoutingMode::TextBottleneck, RoutingMode::Native]);
    assert_eq!(cfg.backend, BackendChoice::Scripted);
    assert_eq!(cfg.seed, None);
    assert_eq!(cfg.ports, [8101, 8102, 8103, 8200, 8300]);

    let adaptive_without_theta = FileConfig { modes: Some(vec!["adaptive".into()]), ..FileConfig::default() };
    let err = RunConfig::resolve(adaptive_without_theta, &[]).unwrap_err();
    assert!(matches!(err, CliError::Config(_)));
    assert_eq!(err.exit_code(), 2);
    assert_eq!(CliError::Runtime("x".into()).exit_code(), 3);
}

#[test]
fn validate_takes_a_positional_path() {
    let out = bin().arg("validate-manifest").arg(common::manifest_path()).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

fn serve_config(mode: &str, ports: [u16; 5]) -> RunConfig {
    let out = std::env::temp_dir().join("mma2a-serve-test");
    let mut cfg = common::run_config(&out, "off", 7);
    cfg.modes = vec![mode.parse().unwrap()];
    cfg.ports = ports;
    cfg
}

#[tokio::test(flavor = "multi_thread")]
async fn serve_publishes_cards_and_runs_tasks() {
    let handle = mma2a::cli::cmd_serve(&serve_config("text_bottleneck", [0; 5])).await.unwrap();
    let http = mma2a::net::http_client();
    let u = &handle.agents.urls;
    for url in [&u.voice, &u.vision, &u.text] {
        let card: mma2a::a2a::AgentCard = http
            .get(format!("{url}{}", mma2a::a2a::WELL_KNOWN_CARD_PATH))
            .send()
            .await
            .unwrap()
            .json()
            .await
            .unwrap();
        assert!(card.validate().is_ok());
    }
    let ids: Vec<String> = http.get(format!("{}/tasks", handle.orchestrator_url)).send().await.unwrap().json().await.unwrap();
    assert_eq!(ids.len(), 50);
    let resp = http.post(format!("{}/tasks/defect_001", handle.orchestrator_url)).send().await.unwrap();
    assert!(resp.status().is_success());
    let missing = http.post(format!("{}/tasks/nope", handle.orchestrator_url)).send().await.unwrap();
    assert_eq!(missing.status().as_u16(), 404);

    let p = mma2a::mar::routing_profile(&handle.router.telemetry().snapshot());
    assert!(p.voice.total() + p.image.total() > 0);
    assert_eq!(p.voice.native + p.image.native, 0);
    handle.shutdown().await;
}

#[tokio::test(flavor = "multi_thread")]
async fn port_conflict_names_the_port() {
    let taken = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let port = taken.local_addr().unwrap().port();
    let err = match mma2a::cli::cmd_serve(&serve_config("native", [0, port, 0, 0, 0])).await {
        Ok(_) => panic!("serve started on a taken port"),
        Err(e) => e,
    };
    assert!(err.to_string().contains(&port.to_string()), "{err}");
    assert_eq!(err.exit_code(), 3);
}
