//! Proof of work at desk scale: assemble a candidate from the mempool,
//! search nonces at increasing difficulty, verify, and watch the roughly
//! 16x cost step per extra leading zero hex character.
//!
//! Run with: cargo run --release --example mine_blocks

use std::net::{IpAddr, Ipv4Addr};
use std::sync::atomic::AtomicBool;
use std::time::Instant;

use prefixchain::bgppath;
use prefixchain::ledger::genesis::{build_genesis_block, GENESIS_AUTHORITY};
use prefixchain::ledger::AnnouncePayload;
use prefixchain::mining::{mine, verify_pow, MineOutcome};
use prefixchain::overlay::SignedIdentity;
use prefixchain::{
    Allocation, Asn, Difficulty, KeyPair, NodeConfig, NodeEngine, Prefix, Transaction,
    TransactionPayload,
};

fn main() {
    let prefix: Prefix = "10.0.0.0/8".parse().unwrap();
    let owner = Asn(65010);
    let owner_key = KeyPair::from_seed([1; 32]);
    let genesis = build_genesis_block(
        &[Allocation { prefix, asn: owner }],
        GENESIS_AUTHORITY,
        0,
    )
    .unwrap();

    let mut engine = NodeEngine::new(
        Asn(64512),
        KeyPair::from_seed([2; 32]),
        IpAddr::V4(Ipv4Addr::LOCALHOST),
        8640,
        NodeConfig {
            difficulty: Difficulty::new(1).unwrap(),
            ..NodeConfig::default()
        },
        genesis,
    )
    .unwrap();
    engine
        .handle_register(
            &SignedIdentity::build(owner, IpAddr::V4(Ipv4Addr::LOCALHOST), 0, &owner_key),
            0,
        )
        .unwrap();

    // One announce into the mempool.
    let payload = AnnouncePayload {
        prefix,
        as_source: owner,
        as_source_list: vec![],
        as_dest_list: vec![Asn(64512)],
    };
    let tx = Transaction::build_signed(
        TransactionPayload::Announce(payload.clone()),
        bgppath::announce_output(&payload),
        10,
        owner,
        &owner_key,
    )
    .unwrap();
    engine.submit_transaction(tx, 10).unwrap();
    println!("mempool holds {} transaction(s)", engine.mempool().len());

    let abort = AtomicBool::new(false);
    let mut last = None;
    for zeros in 1..=4u8 {
        let difficulty = Difficulty::new(zeros).unwrap();
        let candidate = engine.assemble_candidate(20).unwrap();
        let t0 = Instant::now();
        let MineOutcome::Mined(block) = mine(candidate, difficulty, &abort, engine.key(), || 20)
        else {
            unreachable!("no abort signal set");
        };
        println!(
            "difficulty {zeros}: nonce {:>8}  {:>10.4}s  hash {}",
            block.nonce,
            t0.elapsed().as_secs_f64(),
            block.hash
        );
        assert!(verify_pow(&block, difficulty));
        last = Some(block);
    }

    // Adopt the hardest block; it clears the mempool into the chain.
    engine.adopt_own_block(last.expect("loop ran"), 21).unwrap();
    println!(
        "chain length {}, head {}, mempool {}",
        engine.chain().len(),
        engine.head_info().head_hash,
        engine.mempool().len()
    );
}
