//! Per-prefix AS-level graphs: origination, propagation along neighbors,
//! a loop rejection, and the pruning cascade of a withdraw.
//!
//! Run with: cargo run --example announce_withdraw

use std::collections::BTreeSet;

use prefixchain::bgppath::{self, BgpPathState};
use prefixchain::ledger::{AnnouncePayload, WithdrawPayload};
use prefixchain::{Asn, Prefix, Roster};

fn announce(prefix: Prefix, source: u32, learned_from: &[u32], advertised_to: &[u32]) -> AnnouncePayload {
    AnnouncePayload {
        prefix,
        as_source: Asn(source),
        as_source_list: learned_from.iter().map(|a| Asn(*a)).collect(),
        as_dest_list: advertised_to.iter().map(|a| Asn(*a)).collect(),
    }
}

fn main() {
    let prefix: Prefix = "203.0.113.0/24".parse().unwrap();
    let roster: Roster = (1..=50).map(Asn).collect();
    let mut state = BgpPathState::new();

    // Ownership seeds the graph: AS1 is the origin.
    bgppath::sync_origins(&mut state, prefix, &BTreeSet::from([Asn(1)]));
    println!("ownership skeleton:\n{}", state.graph(prefix).unwrap().to_dot());

    // AS1 originates to AS10 and AS11; they spread it further.
    for payload in [
        announce(prefix, 1, &[], &[10, 11]),
        announce(prefix, 10, &[1], &[20]),
        announce(prefix, 11, &[1], &[20]),
        announce(prefix, 20, &[10, 11], &[30]),
    ] {
        let verdict = bgppath::validate_announce(&state, &payload, &roster);
        println!("announce by {}: {verdict}", payload.as_source);
        bgppath::apply_announce(&mut state, &payload).unwrap();
    }
    println!("\npropagated topology:\n{}", state.graph(prefix).unwrap().to_dot());

    // AS30 advertising back to AS1 would close a loop; rejected.
    let looping = announce(prefix, 30, &[20], &[1]);
    println!(
        "announce by {} back to AS1: {}",
        looping.as_source,
        bgppath::validate_announce(&state, &looping, &roster)
    );

    // AS10 withdraws: AS20 survives via AS11, AS30 survives via AS20.
    let withdraw = WithdrawPayload {
        prefix,
        as_source: Asn(10),
    };
    println!(
        "\nwithdraw by {}: {}",
        withdraw.as_source,
        bgppath::validate_withdraw(&state, &withdraw)
    );
    bgppath::apply_withdraw(&mut state, &withdraw).unwrap();
    println!("after AS10 withdraws:\n{}", state.graph(prefix).unwrap().to_dot());

    // AS11 withdraws too: everything upstream of the origin is pruned.
    let withdraw = WithdrawPayload {
        prefix,
        as_source: Asn(11),
    };
    bgppath::apply_withdraw(&mut state, &withdraw).unwrap();
    println!("after AS11 withdraws as well:\n{}", state.graph(prefix).unwrap().to_dot());
}
