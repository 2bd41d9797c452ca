//! Two real daemons over loopback HTTP: the second bootstraps off the
//! first, a transaction is broadcast, the miner picks it up, and the block
//! notification converges both chains.
//!
//! Run with: cargo run --example two_node_http

use std::net::{IpAddr, Ipv4Addr, SocketAddr, TcpListener};
use std::time::{Duration, Instant};

use prefixchain::bgppath;
use prefixchain::ledger::genesis::{build_genesis_block, GENESIS_AUTHORITY};
use prefixchain::ledger::AnnouncePayload;
use prefixchain::overlay::http::{run_daemon, HttpPeerClient};
use prefixchain::overlay::{PeerClient, SignedIdentity};
use prefixchain::{
    Allocation, Asn, Difficulty, KeyPair, NodeConfig, NodeEngine, Prefix, Transaction,
    TransactionPayload,
};

fn free_port() -> u16 {
    TcpListener::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap()
        .port()
}

fn main() {
    let prefix: Prefix = "10.0.0.0/8".parse().unwrap();
    let owner = Asn(65010);
    let owner_key = KeyPair::from_seed([1; 32]);
    let allocations = vec![Allocation { prefix, asn: owner }];

    let port_a = free_port();
    let port_b = free_port();
    let endpoint_a = format!("127.0.0.1:{port_a}");
    let endpoint_b = format!("127.0.0.1:{port_b}");

    let spawn = |asn: u32, seed: u8, port: u16, mine: bool, bootstrap: Vec<String>| {
        let genesis = build_genesis_block(&allocations, GENESIS_AUTHORITY, 0).unwrap();
        let config = NodeConfig {
            difficulty: Difficulty::new(1).unwrap(),
            mine,
            keepalive_interval: 2,
            ..NodeConfig::default()
        };
        let engine = NodeEngine::new(
            Asn(asn),
            KeyPair::from_seed([seed; 32]),
            IpAddr::V4(Ipv4Addr::LOCALHOST),
            port,
            config,
            genesis,
        )
        .unwrap();
        std::thread::spawn(move || {
            let listen = SocketAddr::from(([127, 0, 0, 1], port));
            run_daemon(engine, listen, bootstrap).expect("daemon runs");
        });
    };

    println!("starting miner on {endpoint_a} and follower on {endpoint_b}");
    spawn(64512, 2, port_a, true, vec![]);
    let client = HttpPeerClient::new();
    wait_for(|| client.ping(&endpoint_a).is_ok(), "daemon A");
    spawn(64513, 3, port_b, false, vec![endpoint_a.clone()]);
    wait_for(|| client.ping(&endpoint_b).is_ok(), "daemon B");
    wait_for(
        || client.peers(&endpoint_a).map(|p| !p.is_empty()).unwrap_or(false),
        "overlay join",
    );
    println!("B joined via A; peer tables populated");

    // Register the prefix owner's identity at both nodes, then broadcast
    // one origination announce to A.
    let record = SignedIdentity::build(owner, IpAddr::V4(Ipv4Addr::LOCALHOST), 0, &owner_key);
    client.register(&endpoint_a, &record).unwrap();
    client.register(&endpoint_b, &record).unwrap();

    let payload = AnnouncePayload {
        prefix,
        as_source: owner,
        as_source_list: vec![],
        as_dest_list: vec![Asn(64512)],
    };
    let tx = Transaction::build_signed(
        TransactionPayload::Announce(payload.clone()),
        bgppath::announce_output(&payload),
        100,
        owner,
        &owner_key,
    )
    .unwrap();
    client.post_transaction(&endpoint_a, &tx).unwrap().unwrap();
    println!("posted announce {} to A", tx.txid);

    // A mines it; the block notify makes B fetch and adopt.
    wait_for(
        || {
            let a = client.ping(&endpoint_a).ok();
            let b = client.ping(&endpoint_b).ok();
            matches!((a, b), (Some(a), Some(b)) if a.head_index >= 1 && a.head_hash == b.head_hash)
        },
        "mining and convergence",
    );
    let head_a = client.ping(&endpoint_a).unwrap();
    let head_b = client.ping(&endpoint_b).unwrap();
    println!(
        "converged: A head {} == B head {} at height {}",
        head_a.head_hash, head_b.head_hash, head_a.head_index
    );

    let dot = client.get_graph_dot(&endpoint_b, "10.0.0.0/8").unwrap();
    println!("\nB's view of the prefix graph:\n{dot}");
    std::process::exit(0);
}

fn wait_for(mut check: impl FnMut() -> bool, what: &str) {
    let deadline = Instant::now() + Duration::from_secs(20);
    while !check() {
        assert!(Instant::now() < deadline, "timed out waiting for {what}");
        std::thread::sleep(Duration::from_millis(100));
    }
}
