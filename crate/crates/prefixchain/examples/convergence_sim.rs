//! Longest-chain convergence in the deterministic simulator: a 5-node mesh
//! splits, both sides mine divergent chains, the partition heals, and
//! keepalive head exchange pulls everyone onto the longest chain.
//!
//! The partition/heal/tick half of the script is expressed in the scenario
//! DSL; transactions are injected from JSON files the scenario references.
//!
//! Run with: cargo run --example convergence_sim

use prefixchain::bgppath;
use prefixchain::ledger::AnnouncePayload;
use prefixchain::sim::{Scenario, SimEvent, SimNetwork, SIM_ASN_BASE};
use prefixchain::{Allocation, Asn, Difficulty, Prefix, Transaction, TransactionPayload};

fn announce_tx(
    network: &SimNetwork,
    creator: usize,
    learned_from: &[u32],
    advertised_to: &[u32],
    prefix: Prefix,
    at: u64,
) -> Transaction {
    let payload = AnnouncePayload {
        prefix,
        as_source: network.node(creator).asn(),
        as_source_list: learned_from.iter().map(|a| Asn(*a)).collect(),
        as_dest_list: advertised_to.iter().map(|a| Asn(*a)).collect(),
    };
    Transaction::build_signed(
        TransactionPayload::Announce(payload.clone()),
        bgppath::announce_output(&payload),
        at,
        network.node(creator).asn(),
        network.node(creator).key(),
    )
    .unwrap()
}

fn main() {
    let p1: Prefix = "10.0.0.0/8".parse().unwrap();
    let p2: Prefix = "172.16.0.0/12".parse().unwrap();
    let allocations = vec![
        Allocation {
            prefix: p1,
            asn: Asn(SIM_ASN_BASE),
        },
        Allocation {
            prefix: p2,
            asn: Asn(SIM_ASN_BASE + 2),
        },
    ];
    let mut network = SimNetwork::build(5, &allocations, Difficulty::new(1).unwrap(), 7);
    let base = SIM_ASN_BASE;

    // Write the transactions the scenario file will reference.
    let dir = std::env::temp_dir().join("prefixchain-convergence-example");
    std::fs::create_dir_all(&dir).unwrap();
    let txs = [
        ("a1.json", announce_tx(&network, 0, &[], &[base + 1], p1, 10)),
        ("b1.json", announce_tx(&network, 2, &[], &[base + 3], p2, 20)),
        ("b2.json", announce_tx(&network, 3, &[base + 2], &[base + 4], p2, 21)),
    ];
    for (name, tx) in &txs {
        std::fs::write(dir.join(name), serde_json::to_string_pretty(tx).unwrap()).unwrap();
    }

    // Partition {0,1} | {2,3,4}; the minority mines one block, the majority
    // two; heal; one keepalive interval reconciles the mesh.
    let script = "\
# split the mesh
partition 0 2
partition 0 3
partition 0 4
partition 1 2
partition 1 3
partition 1 4
tx 0 a1.json
mine 0
tx 2 b1.json
mine 2
tx 3 b2.json
mine 3
heal 0 2
heal 0 3
heal 0 4
heal 1 2
heal 1 3
heal 1 4
tick 10
";
    let scenario = Scenario::parse(script, &dir).unwrap();
    println!("running {} scripted events", scenario.events.len());
    assert!(matches!(scenario.events[0], SimEvent::Partition { .. }));

    let transcript = network.run(&scenario);
    println!("\nevent log:");
    for line in &transcript.log {
        println!("  {line}");
    }
    println!("\nfinal heads:");
    for report in &transcript.nodes {
        println!(
            "  {}: chain length {}, head {}",
            report.asn,
            report.head_index + 1,
            report.head_hash
        );
    }
    println!("\nconverged: {}", transcript.converged);
    assert!(transcript.converged);
    assert_eq!(transcript.nodes[0].head_index, 2, "longest chain won");
}
