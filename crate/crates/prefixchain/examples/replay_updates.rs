//! From raw routing data to a chain: parse a pfx2as snapshot and a BGP
//! update log, extract AS-triplets, generate signed transactions, mine them
//! on a single node, and dump the resulting per-prefix graph.
//!
//! Run with: cargo run --example replay_updates

use std::io::Cursor;
use std::net::{IpAddr, Ipv4Addr};
use std::sync::atomic::AtomicBool;

use prefixchain::ingest::{
    genesis_allocations, parse_pfx2as, parse_updates, participants, transactions_from_updates,
    triplets_from_path,
};
use prefixchain::ledger::crypto::DeterministicKeyring;
use prefixchain::ledger::genesis::{build_genesis_block, GENESIS_AUTHORITY};
use prefixchain::mining::{mine, MineOutcome};
use prefixchain::overlay::SignedIdentity;
use prefixchain::{Asn, Difficulty, KeyPair, NodeConfig, NodeEngine};

// CAIDA-style prefix-to-AS lines; 1_2 is a multi-origin set.
const PFX2AS: &str = "\
10.0.0.0\t8\t65010
172.16.0.0\t12\t65011
192.168.0.0\t16\t65010_65012
";

// timestamp|A|prefix|as-path (collector-nearest first) or |W|prefix|asn.
const UPDATES: &str = "\
1000|A|10.0.0.0/8|65012 65010
1001|A|10.0.0.0/8|65013 65012 65010
1002|A|10.0.0.0/8|65014 65012 65010
1003|A|172.16.0.0/12|65013 65011
1004|W|10.0.0.0/8|65012
";

fn main() {
    let (pfx_records, pfx_stats) = parse_pfx2as(Cursor::new(PFX2AS)).unwrap();
    let allocations = genesis_allocations(&pfx_records);
    println!(
        "pfx2as: {} lines parsed ({} skipped), {} allocations",
        pfx_stats.parsed,
        pfx_stats.skipped,
        allocations.len()
    );

    let (updates, update_stats) = parse_updates(Cursor::new(UPDATES)).unwrap();
    println!(
        "updates: {} records parsed ({} skipped)",
        update_stats.parsed, update_stats.skipped
    );

    // Triplets of the first three-hop path, for illustration.
    let path = &updates[1].as_path;
    println!("\ntriplets of {:?}:", path.iter().map(|a| a.0).collect::<Vec<_>>());
    for t in triplets_from_path(path) {
        println!(
            "  previous {:?} advertiser {} next {:?}",
            t.previous.map(|a| a.0),
            t.advertiser,
            t.next.map(|a| a.0)
        );
    }

    // Deterministic identities for every AS in the data, then transactions.
    let mut keyring = DeterministicKeyring::new(42);
    let asns = participants(&updates, &pfx_records);
    let (txs, gen_stats) = transactions_from_updates(&updates, &mut keyring, 8);
    println!(
        "\ngenerated {} transactions ({} announce, {} withdraw, {} triplets merged)",
        txs.len(),
        gen_stats.announce_txs,
        gen_stats.withdraw_txs,
        gen_stats.merged
    );

    // A single mining node replays the stream into its chain.
    let genesis = build_genesis_block(&allocations, GENESIS_AUTHORITY, 0).unwrap();
    let mut engine = NodeEngine::new(
        Asn(64512),
        KeyPair::from_seed([9; 32]),
        IpAddr::V4(Ipv4Addr::LOCALHOST),
        8640,
        NodeConfig {
            difficulty: Difficulty::new(1).unwrap(),
            ..NodeConfig::default()
        },
        genesis,
    )
    .unwrap();
    for asn in &asns {
        let key = keyring.key_for(*asn).clone();
        engine
            .handle_register(
                &SignedIdentity::build(*asn, IpAddr::V4(Ipv4Addr::LOCALHOST), 0, &key),
                0,
            )
            .unwrap();
    }
    for tx in &txs {
        engine.submit_transaction(tx.clone(), tx.timestamp).unwrap();
    }
    let abort = AtomicBool::new(false);
    while let Ok(candidate) = engine.assemble_candidate(2000) {
        let key = engine.key().clone();
        let MineOutcome::Mined(block) =
            mine(candidate, engine.config().difficulty, &abort, &key, || 2000)
        else {
            unreachable!("no abort signal set");
        };
        engine.adopt_own_block(block, 2000).unwrap();
    }
    println!(
        "mined into {} blocks; chain head {}",
        engine.chain().len() - 1,
        engine.head_info().head_hash
    );

    println!("\nfinal 10.0.0.0/8 graph (AS65012 withdrew, its learners pruned):");
    print!(
        "{}",
        engine
            .states()
            .bgp
            .graph("10.0.0.0/8".parse().unwrap())
            .unwrap()
            .to_dot()
    );
    println!("\nIP allocation state:\n{}", engine.dump_ip_state());
}
