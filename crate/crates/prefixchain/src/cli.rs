//! Operator CLI: run a daemon node, generate keys, replay update logs,
//! inject attack transactions, and inspect chain/state/log.
//!
//! Exit codes: 0 success, 1 operational failure, 2 usage error. Daemon
//! options resolve as flags > `PREFIXCHAIN_*` environment variables >
//! `--config` file.

use std::collections::BTreeMap;
use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use crate::attack::{AttackContext, AttackScenario};
use crate::ingest;
use crate::ledger::crypto::{DeterministicKeyring, KeyPair};
use crate::ledger::genesis::{build_genesis_block, GENESIS_AUTHORITY};
use crate::ledger::{Asn, Chain, Prefix};
use crate::mining::Difficulty;
use crate::node::{NodeConfig, NodeEngine};
use crate::overlay::http::{run_daemon, HttpPeerClient};
use crate::overlay::{PeerClient, SignedIdentity};
use crate::verdict::Roster;

#[derive(Parser)]
#[command(
    name = "prefixchain",
    version,
    about = "Passive blockchain for IP prefix allocations and BGP paths"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a networked daemon node.
    Node(NodeArgs),
    /// Generate a signing key pair.
    Keygen(KeygenArgs),
    /// Convert BGP update logs into transactions and post them to a node.
    Replay(ReplayArgs),
    /// Emit a canned invalid transaction and assert the node rejects it.
    Attack(AttackArgs),
    /// Print chain, state, graph or invalid-transaction log of a node.
    Inspect(InspectArgs),
}

#[derive(Args)]
struct NodeArgs {
    /// Listen address, e.g. 127.0.0.1:8640.
    #[arg(long, env = "PREFIXCHAIN_LISTEN")]
    listen: Option<SocketAddr>,
    /// ASN of this node.
    #[arg(long, env = "PREFIXCHAIN_ASN")]
    asn: Option<u32>,
    /// Key file (see `keygen`).
    #[arg(long, env = "PREFIXCHAIN_KEY")]
    key: Option<PathBuf>,
    /// Comma-separated bootstrap endpoints (host:port).
    #[arg(long, env = "PREFIXCHAIN_BOOTSTRAP", value_delimiter = ',')]
    bootstrap: Vec<String>,
    /// PoW difficulty in leading zero hex chars.
    #[arg(long, env = "PREFIXCHAIN_DIFFICULTY")]
    difficulty: Option<u8>,
    /// Mine blocks on this node.
    #[arg(long, env = "PREFIXCHAIN_MINE")]
    mine: bool,
    /// Maximum transactions per assembled block.
    #[arg(long, env = "PREFIXCHAIN_MAX_TX")]
    max_tx: Option<usize>,
    /// Genesis allocation CSV (prefix,asn per line). Empty genesis if absent.
    #[arg(long, env = "PREFIXCHAIN_GENESIS")]
    genesis: Option<PathBuf>,
    /// Timestamp baked into the genesis block.
    #[arg(long, env = "PREFIXCHAIN_GENESIS_TIMESTAMP")]
    genesis_timestamp: Option<u64>,
    /// Automatically emit Revoke transactions for own expired assigns.
    #[arg(long, env = "PREFIXCHAIN_AUTO_REVOKE")]
    auto_revoke: bool,
    /// TOML config file; lowest-precedence source for the options above.
    #[arg(long, env = "PREFIXCHAIN_CONFIG")]
    config: Option<PathBuf>,
}

/// The `--config` file mirror of the daemon flags.
#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    listen: Option<SocketAddr>,
    asn: Option<u32>,
    key: Option<PathBuf>,
    bootstrap: Option<Vec<String>>,
    difficulty: Option<u8>,
    mine: Option<bool>,
    max_tx: Option<usize>,
    genesis: Option<PathBuf>,
    genesis_timestamp: Option<u64>,
    auto_revoke: Option<bool>,
}

#[derive(Args)]
struct KeygenArgs {
    /// Output path for the key file.
    #[arg(long)]
    out: PathBuf,
    /// Overwrite an existing file.
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct ReplayArgs {
    /// Target node base URL or host:port.
    #[arg(long)]
    node: String,
    /// BGP update log (timestamp|A|prefix|path / timestamp|W|prefix|asn).
    #[arg(long)]
    updates: PathBuf,
    /// Optional pfx2as dataset; its origin ASNs are registered too.
    #[arg(long)]
    pfx2as: Option<PathBuf>,
    /// Triplet merge lookback window (0 disables merging).
    #[arg(long, default_value_t = 8)]
    merge_window: usize,
    /// Seed for the deterministic replay keyring.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, value_parser = ["text", "json"], default_value = "text")]
    format: String,
}

#[derive(Args)]
struct AttackArgs {
    /// Target node base URL or host:port.
    #[arg(long)]
    node: String,
    /// One of: fake-creator, non-owner-assign, non-assigner-update,
    /// bogus-origin-announce, no-path-withdraw.
    #[arg(long)]
    scenario: String,
    /// Seed for the attacker's deterministic key.
    #[arg(long, default_value_t = 1337)]
    seed: u64,
}

#[derive(Args)]
struct InspectArgs {
    /// Target node base URL or host:port.
    #[arg(long)]
    node: String,
    #[command(subcommand)]
    what: InspectWhat,
    #[arg(long, value_parser = ["text", "json"], default_value = "text", global = true)]
    format: String,
}

#[derive(Subcommand)]
enum InspectWhat {
    /// Chain summary: index, hash, miner and transaction count per block.
    Chain,
    /// IP allocation state dump.
    Ipstate,
    /// DOT graph for one prefix.
    Graph { prefix: String },
    /// Invalid-transaction log.
    Log,
}

/// Entry point used by the `prefixchain` binary.
pub fn run() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Node(args) => cmd_node(args),
        Command::Keygen(args) => cmd_keygen(args),
        Command::Replay(args) => cmd_replay(args),
        Command::Attack(args) => cmd_attack(args),
        Command::Inspect(args) => cmd_inspect(args),
    };
    match result {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(1)
        }
    }
}

type CmdResult = Result<ExitCode, Box<dyn std::error::Error>>;

fn usage_error(message: &str) -> CmdResult {
    eprintln!("error: {message}");
    Ok(ExitCode::from(2))
}

fn cmd_node(mut args: NodeArgs) -> CmdResult {
    if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path)?;
        let file: FileConfig = toml::from_str(&text)?;
        args.listen = args.listen.or(file.listen);
        args.asn = args.asn.or(file.asn);
        args.key = args.key.or(file.key);
        if args.bootstrap.is_empty() {
            args.bootstrap = file.bootstrap.unwrap_or_default();
        }
        args.difficulty = args.difficulty.or(file.difficulty);
        args.mine = args.mine || file.mine.unwrap_or(false);
        args.max_tx = args.max_tx.or(file.max_tx);
        args.genesis = args.genesis.or(file.genesis);
        args.genesis_timestamp = args.genesis_timestamp.or(file.genesis_timestamp);
        args.auto_revoke = args.auto_revoke || file.auto_revoke.unwrap_or(false);
    }

    let Some(listen) = args.listen else {
        return usage_error("--listen is required (or PREFIXCHAIN_LISTEN / config file)");
    };
    let Some(asn) = args.asn else {
        return usage_error("--asn is required (or PREFIXCHAIN_ASN / config file)");
    };
    if asn == 0 {
        return usage_error("--asn must be positive");
    }
    let Some(key_path) = args.key else {
        return usage_error("--key is required (or PREFIXCHAIN_KEY / config file)");
    };

    let key = KeyPair::load(&key_path)?;
    let allocations = match &args.genesis {
        Some(path) => {
            let file = std::fs::File::open(path)?;
            let (allocations, stats) = ingest::parse_genesis_csv(std::io::BufReader::new(file))?;
            if stats.skipped > 0 {
                log::warn!("genesis file: skipped {} malformed lines", stats.skipped);
            }
            allocations
        }
        None => Vec::new(),
    };
    let genesis = build_genesis_block(
        &allocations,
        GENESIS_AUTHORITY,
        args.genesis_timestamp.unwrap_or(0),
    )?;
    log::info!("genesis hash {}", genesis.hash);

    let config = NodeConfig {
        difficulty: Difficulty::new(args.difficulty.unwrap_or(4))?,
        max_tx_per_block: args.max_tx.unwrap_or(100),
        mine: args.mine,
        auto_revoke: args.auto_revoke,
        ..NodeConfig::default()
    };
    let engine = NodeEngine::new(Asn(asn), key, listen.ip(), listen.port(), config, genesis)?;
    run_daemon(engine, listen, args.bootstrap)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_keygen(args: KeygenArgs) -> CmdResult {
    if args.out.exists() && !args.force {
        return Err(format!(
            "{} already exists; pass --force to overwrite",
            args.out.display()
        )
        .into());
    }
    let key = KeyPair::generate(&mut rand::rngs::OsRng);
    key.save(&args.out)?;
    println!("{}", key.public().to_hex());
    Ok(ExitCode::SUCCESS)
}

/// Registers a deterministic identity for every ASN appearing in the data,
/// at the target node and at every peer the target knows.
fn register_participants(
    client: &HttpPeerClient,
    node: &str,
    keyring: &mut DeterministicKeyring,
    asns: &[Asn],
) -> Result<(), Box<dyn std::error::Error>> {
    let mut endpoints = vec![node.to_string()];
    if let Ok(peers) = client.peers(node) {
        endpoints.extend(peers.iter().map(|p| p.endpoint()));
    }
    for asn in asns {
        let key = keyring.key_for(*asn).clone();
        let record =
            SignedIdentity::build(*asn, IpAddr::V4(Ipv4Addr::LOCALHOST), 0, &key);
        for endpoint in &endpoints {
            if let Err(err) = client.register(endpoint, &record) {
                log::debug!("registering {asn} at {endpoint} failed: {err}");
            }
        }
    }
    Ok(())
}

fn cmd_replay(args: ReplayArgs) -> CmdResult {
    let client = HttpPeerClient::new();
    let updates_file = std::fs::File::open(&args.updates)?;
    let (records, parse_stats) = ingest::parse_updates(std::io::BufReader::new(updates_file))?;
    let pfx2as = match &args.pfx2as {
        Some(path) => {
            let file = std::fs::File::open(path)?;
            ingest::parse_pfx2as(std::io::BufReader::new(file))?.0
        }
        None => Vec::new(),
    };

    let mut keyring = DeterministicKeyring::new(args.seed);
    let participants = ingest::participants(&records, &pfx2as);
    register_participants(&client, &args.node, &mut keyring, &participants)?;
    let (txs, gen_stats) = ingest::transactions_from_updates(&records, &mut keyring, args.merge_window);

    let mut accepted = 0usize;
    let mut rejected = 0usize;
    let mut reasons: BTreeMap<&'static str, usize> = BTreeMap::new();
    for tx in &txs {
        match client.post_transaction(&args.node, tx)? {
            Ok(()) => accepted += 1,
            Err(reason) => {
                rejected += 1;
                *reasons.entry(reason.code()).or_default() += 1;
            }
        }
    }

    if args.format == "json" {
        let summary = serde_json::json!({
            "records_parsed": parse_stats.parsed,
            "records_skipped": parse_stats.skipped + gen_stats.skipped_records,
            "transactions": txs.len(),
            "merged_triplets": gen_stats.merged,
            "accepted": accepted,
            "rejected": rejected,
            "rejection_reasons": reasons,
        });
        println!("{}", serde_json::to_string_pretty(&summary)?);
    } else {
        println!(
            "parsed {} records ({} skipped), generated {} transactions ({} triplets merged)",
            parse_stats.parsed,
            parse_stats.skipped + gen_stats.skipped_records,
            txs.len(),
            gen_stats.merged
        );
        println!("accepted {accepted}, rejected {rejected}");
        for (code, count) in &reasons {
            println!("  {code}: {count}");
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_attack(args: AttackArgs) -> CmdResult {
    let Some(scenario) = AttackScenario::from_name(&args.scenario) else {
        return usage_error(&format!(
            "unknown scenario {:?}; expected one of {}",
            args.scenario,
            AttackScenario::ALL
                .iter()
                .map(|s| s.name())
                .collect::<Vec<_>>()
                .join(", ")
        ));
    };
    let client = HttpPeerClient::new();

    // Build the attacker's replica: fetch the chain and replay it under the
    // target's roster (its peers plus itself).
    let node_identity = client.identity(&args.node)?;
    let peers = client.peers(&args.node).unwrap_or_default();
    let mut roster: Roster = peers.iter().map(|p| p.asn).collect();
    roster.insert(node_identity.asn);
    let chain: Chain = client.fetch_chain(&args.node)?;
    let states = crate::consensus::replay(&chain, &roster)?;

    let mut keyring = DeterministicKeyring::new(args.seed);
    let attacker = Asn(65001);
    let attacker_key = keyring.key_for(attacker).clone();
    let record = SignedIdentity::build(attacker, IpAddr::V4(Ipv4Addr::LOCALHOST), 0, &attacker_key);
    if let Err(err) = client.register(&args.node, &record) {
        log::debug!("attacker registration: {err}");
    }
    let victim = peers
        .iter()
        .map(|p| p.asn)
        .find(|a| *a != attacker)
        .unwrap_or(node_identity.asn);

    let log_before = client
        .get_text(&args.node, "/log")
        .ok()
        .and_then(|text| serde_json::from_str::<Vec<serde_json::Value>>(&text).ok())
        .map(|v| v.len())
        .unwrap_or(0);

    let ctx = AttackContext {
        states: &states,
        attacker,
        attacker_key: &attacker_key,
        victim,
        now: crate::overlay::http::unix_now(),
    };
    let (tx, expected) = crate::attack::build(scenario, &ctx);
    println!("scenario {}: txid {}", scenario.name(), tx.txid);

    match client.post_transaction(&args.node, &tx)? {
        Ok(()) => {
            eprintln!("FAIL: node accepted the {} transaction", scenario.name());
            Ok(ExitCode::from(1))
        }
        Err(reason) => {
            let log_after = client
                .get_text(&args.node, "/log")
                .ok()
                .and_then(|text| serde_json::from_str::<Vec<serde_json::Value>>(&text).ok())
                .map(|v| v.len())
                .unwrap_or(0);
            let logged = log_after > log_before;
            println!(
                "rejected with {} (expected {}), logged: {}",
                reason.code(),
                expected.code(),
                logged
            );
            if reason == expected && logged {
                Ok(ExitCode::SUCCESS)
            } else {
                Ok(ExitCode::from(1))
            }
        }
    }
}

fn cmd_inspect(args: InspectArgs) -> CmdResult {
    let client = HttpPeerClient::new();
    let json = args.format == "json";
    match args.what {
        InspectWhat::Chain => {
            let chain: Chain = client.fetch_chain(&args.node)?;
            if json {
                let blocks: Vec<_> = chain
                    .blocks
                    .iter()
                    .map(|b| {
                        serde_json::json!({
                            "index": b.index,
                            "hash": b.hash,
                            "miner": b.miner.0,
                            "tx_count": b.transactions.len(),
                        })
                    })
                    .collect();
                println!("{}", serde_json::to_string_pretty(&blocks)?);
            } else {
                for b in &chain.blocks {
                    println!("{}\t{}\t{}\t{}", b.index, b.hash, b.miner, b.transactions.len());
                }
            }
        }
        InspectWhat::Ipstate => {
            let dump = client.get_text(&args.node, "/state/ip")?;
            if json {
                let records: Vec<_> = dump
                    .lines()
                    .filter_map(|line| {
                        let fields: Vec<&str> = line.split('\t').collect();
                        (fields.len() == 5).then(|| {
                            serde_json::json!({
                                "prefix": fields[0],
                                "owner": fields[1],
                                "lease_expiry": fields[2],
                                "transfer": fields[3],
                                "last_assign": fields[4],
                            })
                        })
                    })
                    .collect();
                println!("{}", serde_json::to_string_pretty(&records)?);
            } else {
                print!("{dump}");
            }
        }
        InspectWhat::Graph { prefix } => {
            let parsed: Prefix = prefix.parse()?;
            let dot = client.get_graph_dot(&args.node, &parsed.to_string())?;
            if json {
                println!(
                    "{}",
                    serde_json::to_string_pretty(&serde_json::json!({
                        "prefix": parsed.to_string(),
                        "dot": dot,
                    }))?
                );
            } else {
                print!("{dot}");
            }
        }
        InspectWhat::Log => {
            let text = client.get_text(&args.node, "/log")?;
            if json {
                println!("{text}");
            } else {
                let records: Vec<crate::mempool::InvalidTxRecord> = serde_json::from_str(&text)?;
                for r in records {
                    println!(
                        "{}\t{}\t{}\t{}\t{}",
                        r.received_at,
                        r.txid,
                        r.tx_type,
                        r.creator,
                        r.reason.code()
                    );
                }
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}
