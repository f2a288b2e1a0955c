use std::path::PathBuf;

use regov_core::contracts::{calls, SessionState};
use regov_core::sim::{run_files, Network, NetworkConfig, ResourceName, ScenarioScript, SimError, ViolationKind};
use regov_core::usage_log::{encode_logs, LogAction, UsageLog};

const TWO_NODES: &str = r#"
seed = 3
session_deadline = 5

[[nodes]]
name = "bob"
country = 372
pod_type = "social"
base_url = "https://BobNode.com/"

[[nodes.resources]]
path = "/images/whale.jpg"
content = "whale"
policy = { temporal = 1728000, accessCounter = 100, domain = 1, country = 150 }

[[nodes]]
name = "alice"
country = 372
pod_type = "medical"
base_url = "https://AliceNode.com/"
apps = [{ id = "Zoo", domain = "research" }]

[[nodes]]
name = "carol"
country = 276
pod_type = "social"
apps = [{ id = "Lab", domain = "research" }]
"#;

fn spawn(extra: &str) -> Network {
    Network::spawn(NetworkConfig::parse(&format!("{extra}\n{TWO_NODES}"), ".").unwrap()).unwrap()
}

fn run(net: &mut Network, script: &str) -> Vec<String> {
    let script = ScenarioScript::parse(script, Some(net.config())).unwrap();
    let run = net.run_scenario(&script);
    assert!(run.passed(), "{:#?}", run.failures);
    run.transcript
}

fn whale() -> ResourceName {
    ResourceName { owner: "bob".into(), path: "/images/whale.jpg".into() }
}

fn zoo() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/zoo")
}

#[test]
fn spawn_registers_every_pod_and_resource() {
    let net = spawn("");
    assert_eq!(net.nodes().len(), 3);
    let t = net.transcript();
    assert_eq!(t.iter().filter(|l| l.contains(" pod ")).count(), 3);
    assert_eq!(t.iter().filter(|l| l.contains(" upload ")).count(), 1);
    let id = net.resource_id(&whale()).unwrap();
    let obligations = net.node("bob").unwrap().datastore().config().obligations_address;
    let rules = calls::obligation_rules(net.ledger(), obligations, id).unwrap();
    assert_eq!((rules.temporal, rules.access_counter), (Some(1_728_000), Some(100)));
    assert_eq!(rules.domain.map(|d| d.code()), Some(1));
    assert_eq!(rules.country.map(|r| r.0), Some(150));
}

#[test]
fn empty_network_is_just_the_index() {
    let net = Network::spawn(NetworkConfig::parse("", ".").unwrap()).unwrap();
    assert!(net.nodes().is_empty());
    assert_eq!(net.ledger().receipts().len(), 1);
    assert!(net.transcript()[0].starts_with("0000 deploy contract=DTindexing"));
}

#[test]
fn unknown_gas_key_is_named() {
    let cfg = NetworkConfig::parse("[gas.DTobligations]\naddRule = 1\n", ".").unwrap();
    let err = Network::spawn(cfg).err().expect("bad key rejected");
    assert!(matches!(&err, SimError::Config(m) if m.contains("DTobligations.addRule")), "{err}");
}

#[test]
fn open_counts_down_and_needs_a_copy() {
    let mut net = spawn("");
    run(
        &mut net,
        "open alice Zoo bob:/images/whale.jpg\n\
         expect last error UnknownResource\n\
         fetch alice bob /images/whale.jpg\n\
         open alice Zoo bob:/images/whale.jpg\n\
         expect remaining alice bob:/images/whale.jpg 99\n\
         open carol Lab bob:/images/whale.jpg\n\
         expect last error UnknownResource\n",
    );
}

#[test]
fn zoo_replay_matches_fixture() {
    let (_, run) = run_files(&zoo().join("network.toml"), &zoo().join("scenario.regov")).unwrap();
    assert!(run.passed(), "{:#?}", run.failures);
    let expected = std::fs::read_to_string(zoo().join("expected_transcript.txt")).unwrap();
    assert_eq!(run.transcript_text(), expected);
}

#[test]
fn forged_evidence_is_caught() {
    let mut net = spawn("");
    run(&mut net, "fetch alice bob /images/whale.jpg\noffline alice\nmonitor bob /images/whale.jpg\n");
    let session = net.last_session().unwrap();
    let id = net.resource_id(&whale()).unwrap();

    let mut log = UsageLog::new(id);
    log.record(0, LogAction::Retrieved, "remaining=100").unwrap();
    for left in (0..100).rev().chain([0]) {
        let detail = format!("checked=geographical>domain>access_counter;app=Zoo;loc=372;domain=research;remaining={left}");
        log.record(1, LogAction::AccessGranted, detail).unwrap();
    }
    let evidence = String::from_utf8(encode_logs([&log])).unwrap();
    let alice = net.node("alice").unwrap().identity().clone();
    let oracle = net.oracle();
    let receipt = calls::callback(net.ledger_mut(), &alice, oracle, session, &evidence).unwrap();
    assert!(receipt.revert_reason().is_none());

    let report = net.compliance_report(session).unwrap();
    assert_eq!(report.state, SessionState::Complete);
    let kinds: Vec<_> = report.responders.iter().flat_map(|r| &r.violations).map(|v| v.kind).collect();
    assert_eq!(kinds, vec![ViolationKind::CounterExceeded]);
    assert!(!report.is_compliant());
}

#[test]
fn monitoring_timeout_names_the_silent_node() {
    let mut net = spawn("");
    run(
        &mut net,
        "fetch alice bob /images/whale.jpg\n\
         fetch carol bob /images/whale.jpg\n\
         offline carol\n\
         monitor bob /images/whale.jpg deadline=3\n\
         expect session last open\n",
    );
    let session = net.last_session().unwrap();
    assert_eq!(net.compliance_report(session), Err(SimError::SessionNotFinished(session)));
    run(
        &mut net,
        "tick 5\n\
         expect session last timed_out\n\
         expect responses last 1\n\
         expect non-responders last carol\n\
         expect violations last 0\n",
    );
    let report = net.compliance_report(session).unwrap();
    assert_eq!(report.non_responders, vec!["carol".to_owned()]);
    assert_eq!(report.responders.len(), 1);
    assert_eq!(report.responders[0].responder, "alice");
}

#[test]
fn unknown_session_is_reported() {
    let net = spawn("");
    assert_eq!(net.compliance_report(77), Err(SimError::UnknownSession(77)));
}

#[test]
fn scheduled_monitoring_runs_every_period() {
    let mut net = spawn("monitoring_period = 4");
    let t = run(&mut net, "fetch alice bob /images/whale.jpg\ntick 12\n");
    let scheduled: Vec<_> = t.iter().filter(|l| l.contains(" monitor ") && l.ends_with("scheduled=yes")).collect();
    assert!(scheduled.len() >= 2, "{scheduled:#?}");
    let closed = t.iter().filter(|l| l.contains(" session-closed ") && l.contains("state=complete")).count();
    assert!(closed >= 1, "{t:#?}");
}

#[test]
fn offline_owner_is_unreachable() {
    let mut net = spawn("");
    run(&mut net, "offline bob\nfetch alice bob /images/whale.jpg\nexpect last error Unreachable\nonline bob\nfetch alice bob /images/whale.jpg\nexpect last granted\n");
}

#[test]
fn identical_inputs_give_identical_runs() {
    let script = "fetch alice bob /images/whale.jpg\nrepeat 3 open alice Zoo bob:/images/whale.jpg\nmonitor bob /images/whale.jpg\n";
    let mut a = spawn("");
    let mut b = spawn("");
    assert_eq!(run(&mut a, script), run(&mut b, script));
    assert_eq!(a.gas_report(), b.gas_report());
}
