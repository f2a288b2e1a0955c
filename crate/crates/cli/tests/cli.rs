use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn regov(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_regov")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn zoo(file: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/zoo").join(file).display().to_string()
}

#[test]
fn run_reproduces_the_zoo_fixture() {
    let out = regov(&["run", &zoo("network.toml"), &zoo("scenario.regov")]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(stdout(&out), std::fs::read_to_string(zoo("expected_transcript.txt")).unwrap());
}

#[test]
fn failed_expectation_sets_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let script = dir.path().join("bad.regov");
    std::fs::write(&script, "fetch alice bob /images/Mesoplodon.jpg\nexpect remaining alice bob:/images/Mesoplodon.jpg 7\n").unwrap();
    let out = regov(&["run", &zoo("network.toml"), &script.display().to_string()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("FAILED"));
}

#[test]
fn reports_from_a_replayed_run() {
    let (cfg, script) = (zoo("network.toml"), zoo("scenario.regov"));
    let gas = stdout(&regov(&["gas-report"]));
    assert!(gas.contains("[DTindexing]") && gas.contains("registerPod"), "{gas}");

    let out = regov(&["evidence-report", "1", "--config", &cfg, "--script", &script]);
    assert!(out.status.success());
    assert!(stdout(&out).starts_with("session=1 state=complete"), "{}", stdout(&out));

    let out = regov(&["log-dump", "alice", "bob:/images/Mesoplodon.jpg", "--config", &cfg, "--script", &script]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("\"access_granted\""), "{}", stdout(&out));

    let out = regov(&["log-dump", "alice", "nowhere", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
}

fn pod(chain: &Path, dir: &Path, args: &[&str]) -> String {
    let mut all = vec!["pod", "--chain", chain.to_str().unwrap(), "--dir", dir.to_str().unwrap()];
    all.extend_from_slice(args);
    let out = regov(&all);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    stdout(&out)
}

#[test]
fn pod_state_survives_between_invocations() {
    let tmp = tempfile::tempdir().unwrap();
    let chain = tmp.path().join("chain.jsonl");
    let dir = tmp.path().join("pod");
    let file = tmp.path().join("scan.txt");
    std::fs::write(&file, "knee scan").unwrap();

    assert!(pod(&chain, &dir, &["init-pod", "--seed", "bob", "--base-url", "https://bob.example/"]).starts_with("pod=1 "));
    assert!(pod(&chain, &dir, &["upload", "/scan.txt", file.to_str().unwrap()]).starts_with("resource=1 "));
    let rules = pod(&chain, &dir, &["set-rule", "/scan.txt", "accessCounter", "5"]);
    assert!(rules.contains('5'), "{rules}");
    assert!(pod(&chain, &dir, &["set-rule", "default", "domain", "research"]).starts_with("rules="));
    let height: u64 = pod(&chain, &dir, &["tick", "3"]).trim().trim_start_matches("height=").parse().unwrap();
    assert!(height >= 3);
    assert_eq!(pod(&chain, &dir, &["monitor", "/scan.txt"]).trim(), "session=1");
}
