//! IP allocation lifecycle: genesis ownership, an assign with a finite
//! lease, a lease update, expiry, and the revoke that restores the owner.
//!
//! Run with: cargo run --example allocation_lifecycle

use prefixchain::ledger::genesis::{build_genesis_block, GENESIS_AUTHORITY};
use prefixchain::ledger::{AssignPayload, RevokePayload, UpdatePayload};
use prefixchain::{
    consensus, ipalloc, Allocation, Asn, Chain, KeyPair, Prefix, Roster, Transaction,
    TransactionOutput, TransactionPayload, LEASE_INFINITE,
};

fn main() {
    let prefix: Prefix = "10.0.0.0/8".parse().unwrap();
    let owner = Asn(65010);
    let tenant = Asn(65020);

    // Genesis: the registry hands 10.0.0.0/8 to AS65010 forever.
    let genesis = build_genesis_block(
        &[Allocation { prefix, asn: owner }],
        GENESIS_AUTHORITY,
        0,
    )
    .unwrap();
    let genesis_txid = genesis.transactions[0].txid;
    let chain = Chain::new(genesis);
    let roster: Roster = [owner, tenant].into_iter().collect();
    let mut states = consensus::replay(&chain, &roster).unwrap();
    println!("after genesis:\n{}", states.ip.dump());

    let owner_key = KeyPair::from_seed([10; 32]);

    // AS65010 leases the prefix to AS65020 for 3600 seconds at t=100.
    let assign = AssignPayload {
        prefix,
        as_source: owner,
        as_dest: vec![tenant],
        source_lease: LEASE_INFINITE,
        lease_duration: 3600,
        transfer_tag: false,
        last_assign: genesis_txid,
    };
    let assign_tx = Transaction::build_signed(
        TransactionPayload::Assign(assign.clone()),
        ipalloc::assign_output(&assign),
        100,
        owner,
        &owner_key,
    )
    .unwrap();
    consensus::validate_and_apply(&assign_tx, &mut states, &roster).unwrap();
    println!("after assign (lease 3600s from t=100):\n{}", states.ip.dump());
    println!(
        "owners at t=200: {:?}",
        states.ip.current_owners(prefix, 200)
    );

    // The owner shortens the lease to 1800 seconds.
    let update = UpdatePayload {
        as_source: owner,
        assign_tran: assign_tx.txid,
        new_lease: 1800,
    };
    let stored = states.ip.assign(assign_tx.txid).unwrap();
    let update_tx = Transaction::build_signed(
        TransactionPayload::Update(update.clone()),
        ipalloc::update_output(&update, stored),
        500,
        owner,
        &owner_key,
    )
    .unwrap();
    consensus::validate_and_apply(&update_tx, &mut states, &roster).unwrap();
    println!("after update (lease now 1800s):\n{}", states.ip.dump());

    // Once the lease has run out, the revoke restores AS65010.
    let revoke = RevokePayload {
        as_source: owner,
        assign_tran: assign_tx.txid,
    };
    let stored = states.ip.assign(assign_tx.txid).unwrap();
    let revoke_tx = Transaction::build_signed(
        TransactionPayload::Revoke(revoke),
        ipalloc::revoke_output(stored),
        2000,
        owner,
        &owner_key,
    )
    .unwrap();
    if let TransactionOutput::Revoke { entry } = &revoke_tx.output {
        println!(
            "revoke output: prefix {} back to {} (restored lease {})",
            entry.prefix, entry.as_source, entry.new_lease_duration
        );
    }
    consensus::validate_and_apply(&revoke_tx, &mut states, &roster).unwrap();
    println!("after revoke:\n{}", states.ip.dump());
    println!(
        "owners at t=2001: {:?}",
        states.ip.current_owners(prefix, 2001)
    );
}
