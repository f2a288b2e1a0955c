use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use regov_core::contracts::{calls, default_gas_table, governance_ledger, Governance, PodType, RuleScope};
use regov_core::datastore::Datastore;
use regov_core::enclave::AttestationAuthority;
use regov_core::identity::NodeIdentity;
use regov_core::ledger::Chain as _;
use regov_core::ledger::{Address, JournaledLedger};
use regov_core::policy::{parse_policy, DomainCode, RuleType, UsagePolicy, UsageRule};
use regov_core::sim::{self, parse_duration, Network, NetworkConfig, ScenarioScript};

#[derive(Parser)]
#[command(name = "regov", version, about = "Resource governance simulator and datastore tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Replay {
    /// Network config to spawn.
    #[arg(long)]
    config: PathBuf,
    /// Script to run before reporting.
    #[arg(long)]
    script: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Spawn a network and print the setup transcript.
    Spawn { config: PathBuf },
    /// Run a scenario script; exits non-zero if any expectation fails.
    Run {
        config: PathBuf,
        script: PathBuf,
        /// Also write the transcript to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Gas per function; with --config, every charge of a replayed run.
    GasReport {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        script: Option<PathBuf>,
    },
    /// Compliance report for a monitoring session of a replayed run.
    EvidenceReport {
        session: u64,
        #[command(flatten)]
        replay: Replay,
    },
    /// Usage log a node's enclave keeps for a resource (id or owner:path).
    LogDump {
        node: String,
        resource: String,
        #[command(flatten)]
        replay: Replay,
    },
    /// Operate one datastore against a journal-backed chain.
    Pod {
        /// Chain journal; created on first use.
        #[arg(long)]
        chain: PathBuf,
        /// Datastore directory.
        #[arg(long)]
        dir: PathBuf,
        /// Seed of the attestation authority trusted by the datastore.
        #[arg(long, default_value = "1")]
        authority_seed: u64,
        #[command(subcommand)]
        action: PodAction,
    },
}

#[derive(Subcommand)]
enum PodAction {
    /// Register a pod and write its metafiles.
    InitPod {
        /// Key seed of the owner.
        #[arg(long)]
        seed: String,
        #[arg(long)]
        base_url: String,
        #[arg(long = "type", default_value = "social")]
        pod_type: String,
    },
    /// Store a file as a resource and push its policy.
    Upload {
        path: String,
        file: PathBuf,
        /// Policy in metafile JSON.
        #[arg(long)]
        policy: Option<PathBuf>,
    },
    /// Add or replace a rule; target is `default` or a resource path.
    SetRule {
        target: String,
        rule: String,
        value: String,
    },
    RemoveRule {
        target: String,
        rule: String,
    },
    /// Start a monitoring session for a resource.
    Monitor {
        path: String,
        #[arg(long)]
        deadline: Option<u64>,
    },
    /// Compliance report of a finished session.
    EvidenceReport {
        session: u64,
    },
    /// Advance the chain by empty blocks.
    Tick {
        #[arg(default_value_t = 1)]
        blocks: u64,
    },
}

fn replay(r: &Replay) -> Result<Network> {
    let cfg = NetworkConfig::load(&r.config)?;
    let mut net = Network::spawn(cfg.clone())?;
    if let Some(path) = &r.script {
        let text = fs::read_to_string(path).with_context(|| path.display().to_string())?;
        let run = net.run_scenario(&ScenarioScript::parse(&text, Some(&cfg))?);
        if !run.passed() {
            eprintln!("warning: {} expectation(s) failed during replay", run.failures.len());
        }
    }
    Ok(net)
}

fn print_lines(lines: &[String]) {
    for l in lines {
        println!("{l}");
    }
}

fn run() -> Result<ExitCode> {
    match Cli::parse().command {
        Command::Spawn { config } => {
            let net = Network::spawn(NetworkConfig::load(&config)?)?;
            print_lines(net.transcript());
            println!("nodes={} height={} gas={}", net.nodes().len(), net.ledger().block_height(), net.ledger().total_gas());
        }
        Command::Run { config, script, out } => {
            let (_net, run) = sim::run_files(&config, &script)?;
            print!("{}", run.transcript_text());
            if let Some(out) = out {
                fs::write(&out, run.transcript_text()).with_context(|| out.display().to_string())?;
            }
            for f in &run.failures {
                eprintln!("FAILED {f}");
            }
            return Ok(ExitCode::from(u8::try_from(run.exit_code()).unwrap_or(1)));
        }
        Command::GasReport { config: None, .. } => print!("{}", default_gas_table().to_toml()),
        Command::GasReport { config: Some(config), script } => {
            print!("{}", replay(&Replay { config, script })?.gas_report());
        }
        Command::EvidenceReport { session, replay: r } => {
            print_lines(&replay(&r)?.compliance_report(session)?.to_lines());
        }
        Command::LogDump { node, resource, replay: r } => {
            let net = replay(&r)?;
            let id = match resource.split_once(':') {
                Some((owner, path)) => net
                    .resource_id(&sim::ResourceName { owner: owner.into(), path: path.into() })
                    .ok_or_else(|| anyhow!("unknown resource {resource}"))?,
                None => resource.parse().context("resource must be an id or owner:path")?,
            };
            match net.log_dump(&node, id)? {
                Some(text) => print!("{text}"),
                None => bail!("{node} has no log for resource {id}"),
            }
        }
        Command::Pod { chain, dir, authority_seed, action } => pod(&chain, &dir, authority_seed, action)?,
    }
    Ok(ExitCode::SUCCESS)
}

type Chain = JournaledLedger<Governance>;

/// Opens the journal, deploying DTindexing on first use; returns its address.
fn open_chain(path: &Path) -> Result<(Chain, Address)> {
    let mut chain = JournaledLedger::open(governance_ledger(default_gas_table())?, path)?;
    let deployed = chain.ledger().receipts().iter().find(|r| r.kind == "DTindexing" && r.function == "deployment");
    let indexing = match deployed {
        Some(r) => serde_json::from_value(r.output.clone())?,
        None => calls::deploy_indexing(&mut chain, &NodeIdentity::from_seed(b"regov/operator/cli"), None)?,
    };
    Ok((chain, indexing))
}

fn scope(ds: &Datastore, target: &str) -> Result<RuleScope> {
    if target == "default" {
        return Ok(RuleScope::Default);
    }
    let entry = ds.config().resource_by_path(target).ok_or_else(|| anyhow!("no resource at {target}"))?;
    Ok(RuleScope::Resource(entry.resource_id))
}

fn pod(chain_path: &Path, dir: &Path, authority_seed: u64, action: PodAction) -> Result<()> {
    let (mut chain, indexing) = open_chain(chain_path)?;
    let verifier = AttestationAuthority::from_seed(format!("regov/authority/{authority_seed}").as_bytes()).verifier();
    if let PodAction::InitPod { seed, base_url, pod_type } = &action {
        let pod_type = PodType::parse(pod_type).ok_or_else(|| anyhow!("unknown pod type {pod_type}"))?;
        let ds = Datastore::init(dir, NodeIdentity::from_seed(seed.as_bytes()), base_url, pod_type, &mut chain, indexing, verifier)?;
        let c = ds.config();
        println!("pod={} obligations={} owner={}", c.datastore_id, c.obligations_address, c.public_key.to_hex());
        return Ok(());
    }
    let mut ds = Datastore::open(dir, verifier)?;
    match action {
        PodAction::InitPod { .. } => unreachable!("handled above"),
        PodAction::Upload { path, file, policy } => {
            let bytes = fs::read(&file).with_context(|| file.display().to_string())?;
            let policy = match policy {
                Some(p) => parse_policy(&fs::read(&p).with_context(|| p.display().to_string())?)?,
                None => UsagePolicy::empty(),
            };
            let id = ds.upload_resource(&mut chain, &path, &bytes, policy)?;
            println!("resource={id} url={}", ds.config().url_for(&path));
        }
        PodAction::SetRule { target, rule, value } => {
            let rule_type = RuleType::parse(&rule).ok_or_else(|| anyhow!("unknown rule {rule}"))?;
            let parameter = match rule_type {
                RuleType::Temporal => parse_duration(&value).ok_or_else(|| anyhow!("bad duration {value}"))?,
                RuleType::Domain => match DomainCode::from_name(&value) {
                    Some(d) => u64::from(d.code()),
                    None => value.parse()?,
                },
                _ => value.parse()?,
            };
            let rule = UsageRule::from_parameter(rule_type, parameter)?;
            let s = scope(&ds, &target)?;
            ds.set_rule(&mut chain, s, rule)?;
            println!("rules={}", serde_json::to_string(&ds.obligations())?);
        }
        PodAction::RemoveRule { target, rule } => {
            let rule_type = RuleType::parse(&rule).ok_or_else(|| anyhow!("unknown rule {rule}"))?;
            let s = scope(&ds, &target)?;
            ds.remove_rule(&mut chain, s, rule_type)?;
            println!("rules={}", serde_json::to_string(&ds.obligations())?);
        }
        PodAction::Monitor { path, deadline } => {
            let id = ds.config().resource_by_path(&path).ok_or_else(|| anyhow!("no resource at {path}"))?.resource_id;
            let session = ds.monitor_now(&mut chain, id, deadline)?;
            println!("session={session}");
        }
        PodAction::EvidenceReport { session } => {
            let oracle = calls::oracle_address(&chain, indexing)?;
            print_lines(&sim::compliance_report(&chain, oracle, session, |k| k.to_hex()[..16].to_owned())?.to_lines());
        }
        PodAction::Tick { blocks } => {
            for _ in 0..blocks {
                chain.mine_empty_block()?;
            }
            println!("height={}", chain.block_height());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
