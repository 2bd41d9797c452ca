//! Hijack-style transactions against a 3-node network: every canned attack
//! scenario is rejected with a machine-readable reason and logged on every
//! node, with zero state mutation.
//!
//! Run with: cargo run --example attack_rejection

use std::net::{IpAddr, Ipv4Addr};

use prefixchain::attack::{build, AttackContext, AttackScenario};
use prefixchain::ledger::crypto::DeterministicKeyring;
use prefixchain::overlay::SignedIdentity;
use prefixchain::sim::{SimNetwork, SIM_ASN_BASE};
use prefixchain::{Allocation, Asn, Difficulty, Prefix};

fn main() {
    let prefix: Prefix = "10.0.0.0/8".parse().unwrap();
    let allocations = vec![Allocation {
        prefix,
        asn: Asn(SIM_ASN_BASE),
    }];
    let mut network = SimNetwork::build(3, &allocations, Difficulty::new(1).unwrap(), 11);

    // The attacker registers like any participant; its key is its own, so
    // only impersonation fails at the signature check.
    let mut keyring = DeterministicKeyring::new(1337);
    let attacker = Asn(65001);
    let attacker_key = keyring.key_for(attacker).clone();
    network.register_identity(&SignedIdentity::build(
        attacker,
        IpAddr::V4(Ipv4Addr::LOCALHOST),
        0,
        &attacker_key,
    ));

    for (i, scenario) in AttackScenario::ALL.into_iter().enumerate() {
        let (tx, expected) = {
            let ctx = AttackContext {
                states: network.node(0).states(),
                attacker,
                attacker_key: &attacker_key,
                victim: Asn(SIM_ASN_BASE),
                now: 100 + i as u64,
            };
            build(scenario, &ctx)
        };
        println!("scenario {:<22} expecting {}", scenario.name(), expected.code());
        network.submit_tx(0, tx);
        network.drain();
        for n in 0..3 {
            let entry = network.node(n).invalid_log().last().unwrap();
            println!(
                "  node {n} logged: t={} {} {} -> {}",
                entry.received_at,
                entry.tx_type,
                entry.creator,
                entry.reason.code()
            );
            assert_eq!(entry.reason, expected);
        }
    }

    println!("\nchains untouched:");
    for n in 0..3 {
        let node = network.node(n);
        println!(
            "  node {n}: length {}, mempool {}, log entries {}",
            node.chain().len(),
            node.mempool().len(),
            node.invalid_log().len()
        );
        assert_eq!(node.chain().len(), 1);
        assert_eq!(node.mempool().len(), 0);
        assert_eq!(node.invalid_log().len(), AttackScenario::ALL.len());
    }
    println!("all {} scenarios rejected on every node", AttackScenario::ALL.len());
}
